#pragma once

#include "evstudy/geo.hpp"
#include "evstudy/panel.hpp"
#include "evstudy/treatment.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <ostream>
#include <string>
#include <vector>

namespace evstudy::design {

enum class Mode { Pretrend, Semidynamic, Placebo, Balance };
std::string to_string(Mode m);
Mode parse_mode(const std::string &s);

// Declarative regression specification. Every field has a default so a spec
// file only lists what it changes; unknown keys are rejected.
struct ModelSpec {
  Mode mode = Mode::Semidynamic;

  // Event window. Unset values take the mode's defaults: pretrend uses
  // [-9, 9] omitting {-9, -3}; the other modes use [-2, 9] with every
  // earlier k pooled into the baseline.
  std::optional<int> k_min;
  std::optional<int> k_max;
  std::optional<std::vector<int>> omitted;
  bool bin_endpoints = false;

  std::vector<std::string> controls{"sex",           "race",      "age",
                                    "family_income", "father_hs", "mother_hs",
                                    "marital_status"};
  // Controls also interacted with distance. The default is a documented
  // placeholder; reproduction runs should set it explicitly.
  std::vector<std::string> distance_interacted_controls{
      "family_income", "father_hs", "mother_hs"};
  bool include_peer_mean = true;
  bool include_mean_trend = true;
  // true: the mean-by-trend term uses the full municipality-year mean;
  // false: it reuses the leave-one-out mean.
  bool mean_trend_full_mean = true;
  bool state_trends = true;
  // Trend variable is (year - trend_center); unset means the sample midpoint.
  std::optional<double> trend_center;

  std::string cluster_by = "municipality";
  std::vector<std::string> fe{"municipality", "year"};

  // Buffer classes forming the estimation sample. Unset: analysis buffers
  // (host + every inner radius) for estimation modes, the outer ring for
  // placebo.
  std::optional<std::vector<std::string>> sample;

  // Coefficients with k above this are estimated but not printed in tables.
  int report_k_max = 5;
  double ci_level = 0.95;
  // "cr1": G/(G-1) * (N-1)/(N-K); "none": plain sandwich.
  std::string small_sample = "cr1";
  // Reference distribution of joint tests: "chi2" compares b'V^-1 b with
  // chi-square(q); "hotelling_f" compares W (G-q) / (q (G-1)) with F(q, G-q).
  std::string wald_reference = "chi2";
  std::vector<std::string> balance_covariates{
      "male", "white", "age", "father_hs", "mother_hs", "income_gt6"};

  treatment::DummyConfig dummy_config() const;
  std::vector<std::string> sample_classes(const geo::Radii &radii) const;

  // Throws SpecError on inconsistent fields.
  void validate() const;
  static ModelSpec from_json(const nlohmann::json &j);
  nlohmann::json to_json() const;
};

struct DesignMatrix {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  std::vector<std::string> names;

  // Event dummies and their distance interactions, in column order.
  std::vector<int> event_ks;
  std::vector<std::string> treatment_columns;

  std::vector<std::string> fe_names;
  std::vector<std::vector<std::uint32_t>> fe_ids; // [dim][row], dense
  std::vector<std::uint32_t> fe_levels;           // cardinality per dim

  std::string cluster_name;
  std::vector<std::uint32_t> cluster_ids; // dense
  std::uint32_t n_clusters = 0;

  std::vector<std::size_t> panel_rows; // row keys: index into Panel::rows
  std::size_t singletons_dropped = 0;
  double trend_center = 0.0;
  bool report_intercept = false;
  ModelSpec spec;
  std::string outcome_name = "outcome";

  std::size_t rows() const { return static_cast<std::size_t>(y.size()); }
  std::optional<std::size_t> column(const std::string &name) const;

  // Throws DataError naming row and column on a non-finite entry.
  void check_finite(const panel::Panel *panel = nullptr) const;

  void write_csv(std::ostream &out) const;
  nlohmann::json sidecar() const;
};

// Assembles, in order: event dummies, dummy x distance, control columns,
// distance-interacted control columns, peer mean, mean x trend, state x
// trend. Categorical controls are one-hot with the codebook reference level
// omitted; missing values get an explicit `<name>_missing` column when any
// row in the sample is missing.
DesignMatrix build_design(const panel::Panel &panel, const geo::EventMap &map,
                          const ModelSpec &spec);

// Balance regression: y = covariate, X = event dummies only, FE =
// municipality and year. Rows with a missing covariate are excluded.
DesignMatrix balance_design(const panel::Panel &panel, const geo::EventMap &map,
                            const ModelSpec &spec, const std::string &covariate);

// Columns generated for one control (without the distance interaction).
std::vector<std::string> control_columns(const panel::Panel &panel,
                                         std::span<const std::size_t> rows,
                                         const std::string &control);

} // namespace evstudy::design
