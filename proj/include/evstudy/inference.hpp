#pragma once

#include "evstudy/design.hpp"
#include "evstudy/estimator.hpp"
#include "evstudy/geo.hpp"
#include "evstudy/panel.hpp"
#include "evstudy/parallel.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace evstudy::inference {

enum class WaldReference { ChiSquare, HotellingF };
WaldReference parse_wald_reference(const std::string &s);
std::string to_string(WaldReference r);

struct WaldTest {
  std::vector<std::string> restricted_names;
  double statistic = 0.0; // b' V^-1 b
  int df = 0;
  double p_value = 1.0;
  WaldReference reference = WaldReference::ChiSquare;
  // Hotelling reference only: scaled statistic and denominator df (G - q).
  double f_statistic = 0.0;
  int df2 = 0;
  nlohmann::json to_json() const;
};

// Upper tail of the chi-square distribution.
double chi_square_upper(double statistic, int df);

// b' V^-1 b over the named coefficients, compared with chi-square(q) or,
// for HotellingF, W (G-q) / (q (G-1)) compared with F(q, G-q). Throws
// SpecError when a name is not in the fit and InferenceError when the
// sub-covariance is singular or unavailable, or G <= q for HotellingF.
WaldTest wald_test(const estimator::FitResult &fit,
                   const std::vector<std::string> &names,
                   WaldReference reference = WaldReference::ChiSquare);

// Event-dummy coefficients with k < -2 (the leads of a pretrend fit).
std::vector<std::string> lead_names(const estimator::FitResult &fit);
WaldTest pretrend_test(const estimator::FitResult &fit,
                       const std::vector<std::string> &leads,
                       WaldReference reference = WaldReference::ChiSquare);

struct PlotRow {
  int k = 0;
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};
// Event-dummy coefficients (no distance interactions) with k <= k_max, in
// ascending k, with normal-quantile intervals at ci_level.
std::vector<PlotRow> plot_rows(const estimator::FitResult &fit, double ci_level,
                               std::optional<int> k_max = std::nullopt);
// Header k,estimate,ci_low,ci_high.
void write_plot_csv(std::ostream &out, const std::vector<PlotRow> &rows);

// Semidynamic fit on the outer ring. Throws SampleError when the map has no
// ring municipalities or the ring has no rows at k >= -2. A warning is added
// when the placebo sample coincides with the treated sample.
estimator::FitResult placebo_run(const panel::Panel &panel,
                                 const geo::EventMap &map,
                                 const design::ModelSpec &spec,
                                 const estimator::FitOptions &opt = {},
                                 std::vector<std::string> *warnings = nullptr);

struct BalanceEntry {
  std::string covariate;
  std::optional<estimator::FitResult> fit;
  std::string error; // empty on success
  std::string error_type;
};
struct BalanceSuite {
  std::vector<BalanceEntry> entries;
  std::size_t succeeded() const;
};

// One dummies-plus-FE regression per covariate. Errors are recorded per
// covariate; a covariate constant in the sample is a degenerate model.
BalanceSuite balance_suite(const panel::Panel &panel, const geo::EventMap &map,
                           const design::ModelSpec &spec,
                           const std::vector<std::string> &covariates,
                           const estimator::FitOptions &opt = {});

// Column header for a balance covariate ("Male", "Family Income > 6 ...").
std::string balance_label(const std::string &covariate);
// Covariates as columns, rows tau-2 .. tau+report_k_max and Intercept.
void write_balance_table(std::ostream &out, const BalanceSuite &suite,
                         int report_k_max);

struct DiagnosticsReport {
  std::optional<estimator::FitResult> pretrend_fit;
  std::optional<WaldTest> pretrend_wald;
  std::string pretrend_error;
  std::optional<estimator::FitResult> placebo_fit;
  std::string placebo_error;
  BalanceSuite balance;
  std::vector<std::string> warnings;
  design::ModelSpec spec;

  // Number of suites (pretrend, placebo, balance) that produced a result.
  int suites_succeeded() const;
  nlohmann::json to_json() const;
};

// Runs the pretrend, placebo and balance suites. Each suite uses `spec` with
// its own mode; window overrides carry over only when spec.mode matches.
DiagnosticsReport run_diagnostics(const panel::Panel &panel,
                                  const geo::EventMap &map,
                                  const design::ModelSpec &spec,
                                  const estimator::FitOptions &opt = {});

// Spec used by one diagnostic suite.
design::ModelSpec suite_spec(const design::ModelSpec &spec, design::Mode mode);

// Runs fn(index, seed) for index in [0, n) with seed = base_seed + index,
// in parallel; results come back in index order.
template <typename F>
auto replicate(std::size_t n, std::uint64_t base_seed, F fn)
    -> std::vector<decltype(fn(std::size_t{}, std::uint64_t{}))> {
  std::vector<decltype(fn(std::size_t{}, std::uint64_t{}))> out(n);
  parallel_for(n, [&](std::size_t i) { out[i] = fn(i, base_seed + i); });
  return out;
}

} // namespace evstudy::inference
