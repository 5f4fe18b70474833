#include "evstudy/inference.hpp"

#include "evstudy/csv.hpp"
#include "evstudy/errors.hpp"
#include "evstudy/treatment.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <map>

namespace evstudy::inference {

namespace {

// k of a plain event dummy name (ev_m8, ev_0, ev_p3); nullopt otherwise.
std::optional<int> dummy_k(const std::string &name) {
  if (name == "ev_0") {
    return 0;
  }
  if (name.size() < 5 || name.rfind("ev_", 0) != 0 ||
      (name[3] != 'm' && name[3] != 'p')) {
    return std::nullopt;
  }
  const std::string digits = name.substr(4);
  if (digits.empty() ||
      !std::all_of(digits.begin(), digits.end(),
                   [](char c) { return c >= '0' && c <= '9'; })) {
    return std::nullopt;
  }
  const int v = std::stoi(digits);
  return name[3] == 'm' ? -v : v;
}

std::string error_type(const std::exception &e) {
  if (dynamic_cast<const SpecError *>(&e)) {
    return "SpecError";
  }
  if (dynamic_cast<const ConfigError *>(&e)) {
    return "ConfigError";
  }
  if (dynamic_cast<const SampleError *>(&e)) {
    return "SampleError";
  }
  if (dynamic_cast<const DataError *>(&e)) {
    return "DataError";
  }
  if (dynamic_cast<const ConvergenceError *>(&e)) {
    return "ConvergenceError";
  }
  if (dynamic_cast<const DegenerateModelError *>(&e)) {
    return "DegenerateModelError";
  }
  if (dynamic_cast<const InferenceError *>(&e)) {
    return "InferenceError";
  }
  return "Error";
}

nlohmann::json num(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

nlohmann::json plot_json(const std::vector<PlotRow> &rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto &r : rows) {
    out.push_back({{"k", r.k},
                   {"estimate", num(r.estimate)},
                   {"ci_low", num(r.ci_low)},
                   {"ci_high", num(r.ci_high)}});
  }
  return out;
}

} // namespace

WaldReference parse_wald_reference(const std::string &s) {
  if (s == "chi2") {
    return WaldReference::ChiSquare;
  }
  if (s == "hotelling_f") {
    return WaldReference::HotellingF;
  }
  throw ConfigError("unknown Wald reference '" + s + "'");
}

std::string to_string(WaldReference r) {
  return r == WaldReference::ChiSquare ? "chi2" : "hotelling_f";
}

nlohmann::json WaldTest::to_json() const {
  nlohmann::json j{{"restricted_names", restricted_names},
                   {"statistic", num(statistic)},
                   {"df", df},
                   {"p_value", num(p_value)},
                   {"reference", to_string(reference)}};
  if (reference == WaldReference::HotellingF) {
    j["f_statistic"] = num(f_statistic);
    j["df2"] = df2;
  }
  return j;
}

double chi_square_upper(double statistic, int df) {
  if (df <= 0) {
    throw InferenceError("chi-square test needs at least one restriction");
  }
  if (!(statistic > 0.0)) {
    return 1.0;
  }
  boost::math::chi_squared dist(df);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

WaldTest wald_test(const estimator::FitResult &fit,
                   const std::vector<std::string> &names,
                   WaldReference reference) {
  if (names.empty()) {
    throw InferenceError("Wald test needs at least one coefficient");
  }
  if (!fit.inference_error.empty()) {
    throw InferenceError("covariance unavailable: " + fit.inference_error);
  }
  const auto q = static_cast<Eigen::Index>(names.size());
  std::vector<Eigen::Index> idx;
  for (const auto &name : names) {
    auto j = fit.index(name);
    if (!j) {
      throw SpecError("coefficient '" + name + "' is not in the fit");
    }
    idx.push_back(static_cast<Eigen::Index>(*j));
  }
  Eigen::VectorXd b(q);
  Eigen::MatrixXd V(q, q);
  for (Eigen::Index a = 0; a < q; ++a) {
    b(a) = fit.coefficients(idx[a]);
    for (Eigen::Index c = 0; c < q; ++c) {
      V(a, c) = fit.vcov(idx[a], idx[c]);
    }
  }
  if (!V.allFinite() || !b.allFinite()) {
    throw InferenceError("non-finite coefficients or covariance in Wald test");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(V);
  const double max_ev = eig.eigenvalues().maxCoeff();
  const double min_ev = eig.eigenvalues().minCoeff();
  if (!(max_ev > 0.0) || min_ev <= 1e-12 * max_ev) {
    throw InferenceError("covariance of the tested coefficients is singular; "
                         "test fewer leads or use more clusters");
  }
  const Eigen::VectorXd w = eig.eigenvectors().transpose() * b;
  double stat = 0.0;
  for (Eigen::Index a = 0; a < q; ++a) {
    stat += w(a) * w(a) / eig.eigenvalues()(a);
  }
  WaldTest t;
  t.restricted_names = names;
  t.statistic = stat;
  t.df = static_cast<int>(q);
  t.reference = reference;
  if (reference == WaldReference::ChiSquare) {
    t.p_value = chi_square_upper(stat, t.df);
    return t;
  }
  const double g = static_cast<double>(fit.n_clusters);
  if (fit.n_clusters <= names.size()) {
    throw InferenceError("Hotelling reference needs more clusters than tested "
                         "coefficients");
  }
  t.df2 = static_cast<int>(fit.n_clusters - names.size());
  t.f_statistic = stat * (g - static_cast<double>(q)) /
                  (static_cast<double>(q) * (g - 1.0));
  if (t.f_statistic > 0.0) {
    boost::math::fisher_f dist(t.df, t.df2);
    t.p_value = boost::math::cdf(boost::math::complement(dist, t.f_statistic));
  }
  return t;
}

std::vector<std::string> lead_names(const estimator::FitResult &fit) {
  std::vector<std::pair<int, std::string>> leads;
  for (const auto &name : fit.treatment_columns) {
    auto k = dummy_k(name);
    if (k && *k < -2) {
      leads.emplace_back(*k, name);
    }
  }
  std::sort(leads.begin(), leads.end());
  std::vector<std::string> out;
  for (auto &[k, name] : leads) {
    out.push_back(name);
  }
  return out;
}

WaldTest pretrend_test(const estimator::FitResult &fit,
                       const std::vector<std::string> &leads,
                       WaldReference reference) {
  return wald_test(fit, leads, reference);
}

std::vector<PlotRow> plot_rows(const estimator::FitResult &fit, double ci_level,
                               std::optional<int> k_max) {
  if (!(ci_level > 0.0 && ci_level < 1.0)) {
    throw SpecError("ci_level must lie in (0, 1)");
  }
  const double z = boost::math::quantile(boost::math::normal(),
                                         0.5 + 0.5 * ci_level);
  std::vector<PlotRow> rows;
  for (const auto &name : fit.treatment_columns) {
    auto k = dummy_k(name);
    if (!k || (k_max && *k > *k_max)) {
      continue;
    }
    const double b = fit.estimate(name);
    const double se = fit.std_error(name);
    rows.push_back({*k, b, b - z * se, b + z * se});
  }
  std::sort(rows.begin(), rows.end(),
            [](const PlotRow &a, const PlotRow &b) { return a.k < b.k; });
  return rows;
}

void write_plot_csv(std::ostream &out, const std::vector<PlotRow> &rows) {
  csv::write_row(out, {"k", "estimate", "ci_low", "ci_high"});
  for (const auto &r : rows) {
    csv::write_row(out, {std::to_string(r.k), csv::format_double(r.estimate),
                         csv::format_double(r.ci_low),
                         csv::format_double(r.ci_high)});
  }
}

estimator::FitResult placebo_run(const panel::Panel &panel,
                                 const geo::EventMap &map,
                                 const design::ModelSpec &spec_in,
                                 const estimator::FitOptions &opt,
                                 std::vector<std::string> *warnings) {
  design::ModelSpec spec = spec_in;
  spec.mode = design::Mode::Placebo;
  const bool any_ring =
      std::any_of(map.rows().begin(), map.rows().end(),
                  [](const geo::EventAssignment &a) { return a.in_ring(); });
  if (!any_ring && !spec.sample) {
    throw SampleError("placebo sample is empty: no municipality lies in the "
                      "outer ring");
  }
  design::ModelSpec treated = spec;
  treated.mode = design::Mode::Semidynamic;
  treated.sample.reset();
  auto placebo_classes = spec.sample_classes(map.radii());
  auto treated_classes = treated.sample_classes(map.radii());
  std::sort(placebo_classes.begin(), placebo_classes.end());
  std::sort(treated_classes.begin(), treated_classes.end());
  if (placebo_classes == treated_classes && warnings) {
    warnings->push_back("placebo sample is identical to the treated sample");
  }

  const auto d = design::build_design(panel, map, spec);
  bool any_treated = false;
  for (const auto &name : d.treatment_columns) {
    const auto j = d.column(name);
    if (j && d.X.col(static_cast<Eigen::Index>(*j)).cwiseAbs().maxCoeff() > 0.0) {
      any_treated = true;
      break;
    }
  }
  if (!any_treated) {
    throw SampleError("placebo sample has no rows at k >= -2");
  }
  return estimator::fit(d, opt);
}

std::size_t BalanceSuite::succeeded() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(),
                    [](const BalanceEntry &e) { return e.fit.has_value(); }));
}

BalanceSuite balance_suite(const panel::Panel &panel, const geo::EventMap &map,
                           const design::ModelSpec &spec,
                           const std::vector<std::string> &covariates,
                           const estimator::FitOptions &opt) {
  if (covariates.empty()) {
    throw SpecError("balance suite needs at least one covariate");
  }
  BalanceSuite suite;
  for (const auto &cov : covariates) {
    BalanceEntry e;
    e.covariate = cov;
    try {
      const auto d = design::balance_design(panel, map, spec, cov);
      if (d.y.maxCoeff() == d.y.minCoeff()) {
        throw DegenerateModelError("covariate '" + cov +
                                   "' is constant in the sample");
      }
      e.fit = estimator::fit(d, opt);
    } catch (const Error &err) {
      e.error = err.what();
      e.error_type = error_type(err);
    }
    suite.entries.push_back(std::move(e));
  }
  return suite;
}

std::string balance_label(const std::string &covariate) {
  static const std::map<std::string, std::string> labels{
      {"male", "Male"},
      {"white", "White"},
      {"age", "Age"},
      {"father_hs", "Father completed high school"},
      {"mother_hs", "Mother completed high school"},
      {"income_gt6", "Family Income > 6 minimum wages"}};
  auto it = labels.find(covariate);
  return it == labels.end() ? covariate : it->second;
}

void write_balance_table(std::ostream &out, const BalanceSuite &suite,
                         int report_k_max) {
  std::vector<estimator::TableColumn> columns;
  std::vector<std::string> rows;
  for (const auto &e : suite.entries) {
    if (!e.fit) {
      continue;
    }
    columns.push_back({balance_label(e.covariate), &*e.fit});
    for (const auto &name : estimator::reported_rows(*e.fit, report_k_max)) {
      if (std::find(rows.begin(), rows.end(), name) == rows.end()) {
        rows.push_back(name);
      }
    }
  }
  if (!columns.empty()) {
    estimator::write_table(out, columns, rows, true);
  }
  for (const auto &e : suite.entries) {
    if (!e.fit) {
      out << "Not estimated: " << balance_label(e.covariate) << " ("
          << e.error_type << ": " << e.error << ")\n";
    }
  }
}

int DiagnosticsReport::suites_succeeded() const {
  return (pretrend_fit ? 1 : 0) + (placebo_fit ? 1 : 0) +
         (balance.succeeded() > 0 ? 1 : 0);
}

nlohmann::json DiagnosticsReport::to_json() const {
  nlohmann::json j;
  j["spec"] = spec.to_json();

  nlohmann::json pre;
  pre["spec"] = suite_spec(spec, design::Mode::Pretrend).to_json();
  if (pretrend_fit) {
    pre["status"] = "ok";
    pre["fit"] = pretrend_fit->to_json();
    pre["plot"] = plot_json(plot_rows(*pretrend_fit, spec.ci_level, -2));
    pre["singletons_dropped"] = pretrend_fit->singletons_dropped;
  }
  if (pretrend_wald) {
    pre["wald"] = pretrend_wald->to_json();
  }
  if (!pretrend_error.empty()) {
    pre["status"] = pretrend_fit ? "partial" : "error";
    pre["error"] = pretrend_error;
  }
  j["pretrend"] = pre;

  nlohmann::json pla;
  pla["spec"] = suite_spec(spec, design::Mode::Placebo).to_json();
  if (placebo_fit) {
    pla["status"] = "ok";
    pla["fit"] = placebo_fit->to_json();
    pla["plot"] = plot_json(plot_rows(*placebo_fit, spec.ci_level, spec.report_k_max));
    pla["singletons_dropped"] = placebo_fit->singletons_dropped;
  } else {
    pla["status"] = "error";
    pla["error"] = placebo_error;
  }
  j["placebo"] = pla;

  nlohmann::json bal;
  bal["spec"] = suite_spec(spec, design::Mode::Balance).to_json();
  nlohmann::json entries = nlohmann::json::array();
  for (const auto &e : balance.entries) {
    nlohmann::json item{{"covariate", e.covariate}};
    if (e.fit) {
      item["status"] = "ok";
      item["fit"] = e.fit->to_json();
    } else {
      item["status"] = "error";
      item["error_type"] = e.error_type;
      item["error"] = e.error;
    }
    entries.push_back(item);
  }
  bal["covariates"] = entries;
  j["balance"] = bal;
  j["warnings"] = warnings;
  j["suites_succeeded"] = suites_succeeded();
  return j;
}

design::ModelSpec suite_spec(const design::ModelSpec &spec, design::Mode mode) {
  design::ModelSpec s = spec;
  if (spec.mode != mode) {
    s.k_min.reset();
    s.k_max.reset();
    s.omitted.reset();
    s.sample.reset();
  }
  s.mode = mode;
  return s;
}

DiagnosticsReport run_diagnostics(const panel::Panel &panel,
                                  const geo::EventMap &map,
                                  const design::ModelSpec &spec,
                                  const estimator::FitOptions &opt) {
  DiagnosticsReport r;
  r.spec = spec;
  try {
    const auto d =
        design::build_design(panel, map, suite_spec(spec, design::Mode::Pretrend));
    r.pretrend_fit = estimator::fit(d, opt);
    r.pretrend_wald = pretrend_test(*r.pretrend_fit, lead_names(*r.pretrend_fit),
                                    parse_wald_reference(spec.wald_reference));
  } catch (const Error &e) {
    r.pretrend_error = std::string(error_type(e)) + ": " + e.what();
  }
  try {
    r.placebo_fit = placebo_run(panel, map, suite_spec(spec, design::Mode::Placebo),
                                opt, &r.warnings);
  } catch (const Error &e) {
    r.placebo_error = std::string(error_type(e)) + ": " + e.what();
  }
  try {
    r.balance = balance_suite(panel, map, suite_spec(spec, design::Mode::Balance),
                              spec.balance_covariates, opt);
  } catch (const Error &e) {
    BalanceEntry entry;
    entry.covariate = "*";
    entry.error = e.what();
    entry.error_type = error_type(e);
    r.balance.entries.push_back(entry);
  }
  return r;
}

} // namespace evstudy::inference
