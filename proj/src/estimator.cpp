#include "evstudy/estimator.hpp"

#include "evstudy/errors.hpp"
#include "evstudy/parallel.hpp"
#include "evstudy/treatment.hpp"

#include <Eigen/Householder>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace evstudy::estimator {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ColumnSweep {
  int iterations = 0;
  std::vector<double> history;
};

// Demeans one column in place across all dimensions until converged.
ColumnSweep absorb_column(Eigen::Ref<Eigen::VectorXd> v,
                          std::span<const FixedEffect> fe,
                          const std::vector<std::vector<double>> &inv_counts,
                          const AbsorbOptions &opt) {
  ColumnSweep out;
  const Eigen::Index n = v.size();
  std::vector<std::vector<double>> sums(fe.size());
  for (std::size_t d = 0; d < fe.size(); ++d) {
    sums[d].resize(fe[d].levels);
  }
  auto group_sums = [&](std::size_t d) {
    auto &s = sums[d];
    std::fill(s.begin(), s.end(), 0.0);
    const auto ids = fe[d].ids;
    for (Eigen::Index i = 0; i < n; ++i) {
      s[ids[i]] += v(i);
    }
  };
  for (int it = 1; it <= opt.max_iter; ++it) {
    for (std::size_t d = 0; d < fe.size(); ++d) {
      group_sums(d);
      auto &s = sums[d];
      for (std::size_t g = 0; g < s.size(); ++g) {
        s[g] *= inv_counts[d][g];
      }
      const auto ids = fe[d].ids;
      for (Eigen::Index i = 0; i < n; ++i) {
        v(i) -= s[ids[i]];
      }
    }
    double worst = 0.0;
    for (std::size_t d = 0; d < fe.size(); ++d) {
      group_sums(d);
      for (std::size_t g = 0; g < sums[d].size(); ++g) {
        worst = std::max(worst, std::abs(sums[d][g] * inv_counts[d][g]));
      }
    }
    out.history.push_back(worst);
    out.iterations = it;
    if (worst <= opt.tol) {
      return out;
    }
  }
  throw ConvergenceError("fixed-effect absorption did not converge within " +
                             std::to_string(opt.max_iter) +
                             " sweeps (max group residual " +
                             std::to_string(out.history.back()) + ")",
                         out.history.back());
}

double t_two_sided_p(double t, double df) {
  if (!std::isfinite(t) || !(df > 0.0)) {
    return kNaN;
  }
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

std::string fmt(const char *pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, v);
  return buf;
}

struct EventName {
  int k = 0;
  bool interaction = false;
};

std::optional<EventName> parse_event_name(const std::string &name) {
  if (name.rfind("ev_", 0) != 0) {
    return std::nullopt;
  }
  std::string rest = name.substr(3);
  EventName e;
  const std::string suffix = "_x_dist";
  if (rest.size() > suffix.size() &&
      rest.compare(rest.size() - suffix.size(), suffix.size(), suffix) == 0) {
    e.interaction = true;
    rest.resize(rest.size() - suffix.size());
  }
  if (rest == "0") {
    e.k = 0;
  } else if (rest.size() > 1 && (rest[0] == 'm' || rest[0] == 'p')) {
    try {
      std::size_t pos = 0;
      const int v = std::stoi(rest.substr(1), &pos);
      if (pos != rest.size() - 1) {
        return std::nullopt;
      }
      e.k = rest[0] == 'm' ? -v : v;
    } catch (const std::exception &) {
      return std::nullopt;
    }
  } else {
    return std::nullopt;
  }
  return e;
}

std::size_t text_width(const std::string &s) {
  std::size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) {
      ++n;
    }
  }
  return n;
}

} // namespace

AbsorptionResult absorb(const Eigen::VectorXd &y, const Eigen::MatrixXd &X,
                        std::span<const FixedEffect> fe,
                        const AbsorbOptions &opt) {
  const Eigen::Index n = y.size();
  if (n < 2) {
    throw DataError("absorption needs at least two rows");
  }
  if (fe.empty()) {
    throw SpecError("absorption needs at least one fixed-effect dimension");
  }
  if (X.rows() != n) {
    throw DataError("outcome and regressors have different row counts");
  }
  std::vector<std::vector<double>> inv_counts(fe.size());
  for (std::size_t d = 0; d < fe.size(); ++d) {
    if (fe[d].ids.size() != static_cast<std::size_t>(n)) {
      throw DataError("fixed-effect ids do not align with the rows");
    }
    std::vector<double> counts(fe[d].levels, 0.0);
    for (auto g : fe[d].ids) {
      if (g >= fe[d].levels) {
        throw DataError("fixed-effect id out of range");
      }
      counts[g] += 1.0;
    }
    inv_counts[d].resize(fe[d].levels);
    for (std::size_t g = 0; g < counts.size(); ++g) {
      inv_counts[d][g] = counts[g] > 0.0 ? 1.0 / counts[g] : 0.0;
    }
  }

  AbsorptionResult res;
  res.y_res = y;
  res.X_res = X;
  const std::size_t cols = static_cast<std::size_t>(X.cols()) + 1;
  std::vector<ColumnSweep> sweeps(cols);
  parallel_for(cols, [&](std::size_t c) {
    if (c == 0) {
      sweeps[c] = absorb_column(res.y_res, fe, inv_counts, opt);
    } else {
      sweeps[c] = absorb_column(res.X_res.col(static_cast<Eigen::Index>(c - 1)),
                                fe, inv_counts, opt);
    }
  });
  for (const auto &s : sweeps) {
    res.iterations = std::max(res.iterations, s.iterations);
  }
  res.residual_history.assign(res.iterations, 0.0);
  for (const auto &s : sweeps) {
    for (int it = 0; it < res.iterations; ++it) {
      const auto idx = std::min<std::size_t>(it, s.history.size() - 1);
      res.residual_history[it] = std::max(res.residual_history[it], s.history[idx]);
    }
  }
  res.max_group_residual = res.residual_history.back();
  return res;
}

OlsResult ols(const Eigen::VectorXd &y, const Eigen::MatrixXd &X,
              std::span<const double> reference_norms, double rel_tol) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (y.size() != n) {
    throw DataError("outcome and regressors have different row counts");
  }
  if (!reference_norms.empty() &&
      reference_norms.size() != static_cast<std::size_t>(p)) {
    throw DataError("reference norms do not match the column count");
  }

  Eigen::MatrixXd A = X;
  Eigen::VectorXd qty = y;
  OlsResult out;
  std::vector<double> taus;
  for (Eigen::Index j = 0; j < p; ++j) {
    const Eigen::Index r = static_cast<Eigen::Index>(out.retained.size());
    const double ref =
        reference_norms.empty() ? X.col(j).norm() : reference_norms[j];
    const double remaining = r < n ? A.col(j).tail(n - r).norm() : 0.0;
    if (r >= n || !(remaining > rel_tol * ref)) {
      out.dropped.push_back(static_cast<std::size_t>(j));
      continue;
    }
    double tau = 0.0;
    double beta = 0.0;
    A.col(j).tail(n - r).makeHouseholderInPlace(tau, beta);
    A(r, j) = beta;
    const auto essential = A.col(j).tail(n - r - 1);
    const Eigen::Index rest = p - j - 1;
    parallel_for(static_cast<std::size_t>(rest) + 1, [&](std::size_t c) {
      double workspace = 0.0;
      if (c == static_cast<std::size_t>(rest)) {
        qty.tail(n - r).applyHouseholderOnTheLeft(essential, tau, &workspace);
      } else {
        A.col(j + 1 + static_cast<Eigen::Index>(c))
            .tail(n - r)
            .applyHouseholderOnTheLeft(essential, tau, &workspace);
      }
    });
    taus.push_back(tau);
    out.retained.push_back(static_cast<std::size_t>(j));
  }
  const Eigen::Index rank = static_cast<Eigen::Index>(out.retained.size());
  if (rank == 0) {
    throw DegenerateModelError("no regressor survives the collinearity check");
  }

  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(rank, rank);
  for (Eigen::Index b = 0; b < rank; ++b) {
    const Eigen::Index col = static_cast<Eigen::Index>(out.retained[b]);
    for (Eigen::Index a = 0; a <= b; ++a) {
      R(a, b) = A(a, col);
    }
  }
  const auto tri = R.triangularView<Eigen::Upper>();
  out.coefficients = tri.solve(qty.head(rank));
  const Eigen::MatrixXd R_inv =
      tri.solve(Eigen::MatrixXd::Identity(rank, rank));
  out.xtx_inverse = R_inv * R_inv.transpose();

  out.residuals = y;
  for (Eigen::Index b = 0; b < rank; ++b) {
    out.residuals.noalias() -=
        out.coefficients(b) * X.col(static_cast<Eigen::Index>(out.retained[b]));
  }
  return out;
}

SmallSample parse_small_sample(const std::string &s) {
  if (s == "cr1") {
    return SmallSample::CR1;
  }
  if (s == "none") {
    return SmallSample::None;
  }
  throw ConfigError("unknown small-sample convention '" + s + "'");
}

std::string to_string(SmallSample s) {
  return s == SmallSample::CR1 ? "cr1" : "none";
}

double small_sample_factor(std::size_t n_obs, std::size_t n_clusters,
                           double n_params, SmallSample s) {
  if (s == SmallSample::None) {
    return 1.0;
  }
  const double g = static_cast<double>(n_clusters);
  const double n = static_cast<double>(n_obs);
  return g / (g - 1.0) * (n - 1.0) / (n - n_params);
}

Eigen::MatrixXd cluster_vcov(const Eigen::MatrixXd &X,
                             const Eigen::VectorXd &residuals,
                             std::span<const std::uint32_t> cluster_ids,
                             const Eigen::MatrixXd &bread,
                             const VcovOptions &opt) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (residuals.size() != n || cluster_ids.size() != static_cast<std::size_t>(n)) {
    throw DataError("residuals or cluster ids do not align with the rows");
  }
  std::uint32_t n_clusters = 0;
  for (auto g : cluster_ids) {
    n_clusters = std::max(n_clusters, g + 1);
  }
  std::vector<char> present(n_clusters, 0);
  for (auto g : cluster_ids) {
    present[g] = 1;
  }
  const auto observed = static_cast<std::size_t>(
      std::count(present.begin(), present.end(), 1));
  if (observed < 2) {
    throw InferenceError("clustered covariance needs at least two clusters, "
                         "found " + std::to_string(observed));
  }
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(n_clusters, p);
  parallel_for(static_cast<std::size_t>(p), [&](std::size_t jj) {
    const auto j = static_cast<Eigen::Index>(jj);
    auto col = scores.col(j);
    for (Eigen::Index i = 0; i < n; ++i) {
      col(cluster_ids[i]) += X(i, j) * residuals(i);
    }
  });
  const Eigen::MatrixXd meat = scores.transpose() * scores;
  const double factor = small_sample_factor(
      static_cast<std::size_t>(n), observed,
      static_cast<double>(p) + opt.absorbed_df, opt.small_sample);
  Eigen::MatrixXd V = factor * (bread * meat * bread);
  return 0.5 * (V + V.transpose());
}

Eigen::MatrixXd cluster_vcov(const Eigen::MatrixXd &X,
                             const Eigen::VectorXd &residuals,
                             std::span<const std::uint32_t> cluster_ids,
                             const VcovOptions &opt) {
  const Eigen::MatrixXd xtx = X.transpose() * X;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw InferenceError("X'X is not positive definite");
  }
  const Eigen::MatrixXd bread =
      ldlt.solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));
  return cluster_vcov(X, residuals, cluster_ids, bread, opt);
}

double absorbed_degrees_of_freedom(std::span<const FixedEffect> fe) {
  if (fe.empty()) {
    return 0.0;
  }
  double df = fe[0].levels;
  if (fe.size() >= 2) {
    // Union-find over the bipartite graph of first- and second-dimension
    // levels; each connected component carries one redundant level.
    const std::uint32_t l0 = fe[0].levels;
    std::vector<std::uint32_t> parent(l0 + fe[1].levels);
    std::iota(parent.begin(), parent.end(), 0u);
    auto find = [&parent](std::uint32_t a) {
      while (parent[a] != a) {
        parent[a] = parent[parent[a]];
        a = parent[a];
      }
      return a;
    };
    for (std::size_t i = 0; i < fe[0].ids.size(); ++i) {
      const auto a = find(fe[0].ids[i]);
      const auto b = find(l0 + fe[1].ids[i]);
      if (a != b) {
        parent[std::max(a, b)] = std::min(a, b);
      }
    }
    std::size_t components = 0;
    for (std::uint32_t v = 0; v < parent.size(); ++v) {
      components += find(v) == v;
    }
    df += static_cast<double>(fe[1].levels) - static_cast<double>(components);
  }
  for (std::size_t d = 2; d < fe.size(); ++d) {
    df += static_cast<double>(fe[d].levels) - 1.0;
  }
  return df;
}

std::optional<std::size_t> FitResult::index(const std::string &name) const {
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j] == name) {
      return j;
    }
  }
  return std::nullopt;
}

double FitResult::estimate(const std::string &name) const {
  auto j = index(name);
  return j ? coefficients(static_cast<Eigen::Index>(*j)) : kNaN;
}

double FitResult::std_error(const std::string &name) const {
  auto j = index(name);
  return j ? se(static_cast<Eigen::Index>(*j)) : kNaN;
}

double FitResult::p_value(const std::string &name) const {
  auto j = index(name);
  return j ? p(static_cast<Eigen::Index>(*j)) : kNaN;
}

nlohmann::json FitResult::to_json() const {
  auto num = [](double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  };
  nlohmann::json coefs = nlohmann::json::array();
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    coefs.push_back({{"name", names[j]},
                     {"estimate", num(coefficients(i))},
                     {"se", num(se(i))},
                     {"t", num(t(i))},
                     {"p", num(p(i))}});
  }
  nlohmann::json vc = nlohmann::json::array();
  for (Eigen::Index a = 0; a < vcov.rows(); ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index b = 0; b < vcov.cols(); ++b) {
      row.push_back(num(vcov(a, b)));
    }
    vc.push_back(row);
  }
  nlohmann::json j{
      {"coefficients", coefs},
      {"vcov", vc},
      {"dropped_columns", dropped_columns},
      {"n_obs", n_obs},
      {"n_clusters", n_clusters},
      {"cluster_by", cluster_by},
      {"r2", num(r2)},
      {"adj_r2", num(adj_r2)},
      {"absorbed_df", absorbed_df},
      {"small_sample", {{"convention", to_string(small_sample)},
                        {"factor", num(small_sample_factor)}}},
      {"p_value_reference", "student_t(G-1)"},
      {"convergence",
       {{"iterations", iterations}, {"max_group_residual", max_group_residual}}},
      {"singletons_dropped", singletons_dropped},
      {"spec", spec}};
  j["intercept"] = intercept ? num(*intercept) : nlohmann::json(nullptr);
  if (!inference_error.empty()) {
    j["inference_error"] = inference_error;
  }
  return j;
}

FitResult fit(const design::DesignMatrix &design, const FitOptions &opt) {
  if (design.rows() < 2) {
    throw SampleError("design has fewer than two rows");
  }
  std::vector<FixedEffect> fe;
  for (std::size_t d = 0; d < design.fe_ids.size(); ++d) {
    fe.push_back({design.fe_ids[d], design.fe_levels[d]});
  }
  auto absorbed = absorb(design.y, design.X, fe, {opt.tol, opt.max_iter});

  std::vector<double> ref(static_cast<std::size_t>(design.X.cols()));
  for (Eigen::Index j = 0; j < design.X.cols(); ++j) {
    ref[static_cast<std::size_t>(j)] = design.X.col(j).norm();
  }
  OlsResult o = ols(absorbed.y_res, absorbed.X_res, ref);

  FitResult r;
  for (auto j : o.retained) {
    r.names.push_back(design.names[j]);
  }
  for (auto j : o.dropped) {
    r.dropped_columns.push_back(design.names[j]);
  }
  for (const auto &name : design.treatment_columns) {
    if (std::find(r.names.begin(), r.names.end(), name) != r.names.end()) {
      r.treatment_columns.push_back(name);
    }
  }
  if (!design.treatment_columns.empty() && r.treatment_columns.empty()) {
    throw DegenerateModelError(
        "every treatment column was dropped as collinear");
  }
  r.coefficients = o.coefficients;
  r.n_obs = design.rows();
  r.n_clusters = design.n_clusters;
  r.cluster_by = design.cluster_name;
  r.iterations = absorbed.iterations;
  r.max_group_residual = absorbed.max_group_residual;
  r.absorbed_df = absorbed_degrees_of_freedom(fe);
  r.small_sample = opt.small_sample.value_or(
      parse_small_sample(design.spec.small_sample));
  r.singletons_dropped = design.singletons_dropped;
  r.spec = design.spec.to_json();

  const double k_total = static_cast<double>(o.retained.size()) + r.absorbed_df;
  const double n = static_cast<double>(r.n_obs);
  const double ybar = design.y.mean();
  const double tss = (design.y.array() - ybar).square().sum();
  const double rss = o.residuals.squaredNorm();
  r.r2 = tss > 0.0 ? 1.0 - rss / tss : kNaN;
  r.adj_r2 = (tss > 0.0 && n > k_total)
                 ? 1.0 - (rss / (n - k_total)) / (tss / (n - 1.0))
                 : kNaN;

  if (design.report_intercept) {
    double xb = 0.0;
    for (std::size_t b = 0; b < o.retained.size(); ++b) {
      xb += design.X.col(static_cast<Eigen::Index>(o.retained[b])).mean() *
            o.coefficients(static_cast<Eigen::Index>(b));
    }
    r.intercept = ybar - xb;
  }

  const auto k = static_cast<Eigen::Index>(o.retained.size());
  r.se = Eigen::VectorXd::Constant(k, kNaN);
  r.t = Eigen::VectorXd::Constant(k, kNaN);
  r.p = Eigen::VectorXd::Constant(k, kNaN);
  r.vcov = Eigen::MatrixXd::Constant(k, k, kNaN);
  r.small_sample_factor = small_sample_factor(r.n_obs, r.n_clusters, k_total,
                                              r.small_sample);
  try {
    VcovOptions vopt{r.small_sample, r.absorbed_df};
    if (o.dropped.empty()) {
      r.vcov = cluster_vcov(absorbed.X_res, o.residuals, design.cluster_ids,
                            o.xtx_inverse, vopt);
    } else {
      Eigen::MatrixXd X_ret(absorbed.X_res.rows(), k);
      for (Eigen::Index b = 0; b < k; ++b) {
        X_ret.col(b) = absorbed.X_res.col(static_cast<Eigen::Index>(o.retained[b]));
      }
      r.vcov = cluster_vcov(X_ret, o.residuals, design.cluster_ids,
                            o.xtx_inverse, vopt);
    }
    const double df = static_cast<double>(r.n_clusters) - 1.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      r.se(j) = std::sqrt(std::max(0.0, r.vcov(j, j)));
      r.t(j) = r.coefficients(j) / r.se(j);
      r.p(j) = t_two_sided_p(r.t(j), df);
    }
  } catch (const InferenceError &e) {
    r.inference_error = e.what();
  }
  return r;
}

std::string format_estimate(double value) {
  if (!std::isfinite(value)) {
    return "";
  }
  if (value != 0.0 && std::abs(value) < 0.0005) {
    return fmt("%.4f", value);
  }
  std::string s = fmt("%.3f", value);
  if (s == "-0.000") {
    s = "0.000";
  }
  return s;
}

std::string stars(double p) {
  if (!std::isfinite(p)) {
    return "";
  }
  if (p < 0.01) {
    return "***";
  }
  if (p < 0.05) {
    return "**";
  }
  if (p < 0.1) {
    return "*";
  }
  return "";
}

std::string row_label(const std::string &name) {
  auto e = parse_event_name(name);
  if (!e) {
    return name;
  }
  const std::string tau = treatment::tau_label(e->k);
  if (!e->interaction) {
    return tau;
  }
  return (e->k == 0 ? tau : "(" + tau + ")") + " x buffer distance";
}

std::vector<std::string> reported_rows(const FitResult &fit, int report_k_max) {
  std::vector<std::pair<EventName, std::string>> ev;
  for (const auto &name : fit.treatment_columns) {
    auto e = parse_event_name(name);
    if (e && e->k <= report_k_max) {
      ev.emplace_back(*e, name);
    }
  }
  std::stable_sort(ev.begin(), ev.end(), [](const auto &a, const auto &b) {
    if (a.first.interaction != b.first.interaction) {
      return !a.first.interaction;
    }
    return a.first.k < b.first.k;
  });
  std::vector<std::string> rows;
  for (const auto &[e, name] : ev) {
    rows.push_back(name);
  }
  return rows;
}

void write_table(std::ostream &out, const std::vector<TableColumn> &columns,
                 const std::vector<std::string> &rows, bool include_intercept) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{""};
  for (const auto &c : columns) {
    header.push_back(c.header);
  }
  cells.push_back(header);
  std::vector<std::string> numbering{""};
  for (std::size_t c = 0; c < columns.size(); ++c) {
    numbering.push_back("(" + std::to_string(c + 1) + ")");
  }
  cells.push_back(numbering);
  cells.push_back({});

  auto coef_rows = [&](const std::string &label, auto estimate_of, auto se_of,
                       auto p_of) {
    std::vector<std::string> est{label};
    std::vector<std::string> se{""};
    for (const auto &c : columns) {
      const double b = estimate_of(*c.fit);
      const double s = se_of(*c.fit);
      est.push_back(std::isfinite(b) ? format_estimate(b) + stars(p_of(*c.fit))
                                     : "");
      se.push_back(std::isfinite(s) ? "(" + format_estimate(s) + ")" : "");
    }
    cells.push_back(est);
    cells.push_back(se);
    cells.push_back(std::vector<std::string>(columns.size() + 1, ""));
  };

  for (const auto &name : rows) {
    coef_rows(
        row_label(name), [&](const FitResult &f) { return f.estimate(name); },
        [&](const FitResult &f) { return f.std_error(name); },
        [&](const FitResult &f) { return f.p_value(name); });
  }
  if (include_intercept) {
    coef_rows(
        "Intercept",
        [](const FitResult &f) { return f.intercept.value_or(kNaN); },
        [](const FitResult &) { return kNaN; },
        [](const FitResult &) { return kNaN; });
  }
  cells.push_back({});
  std::vector<std::string> obs{"Observations"};
  std::vector<std::string> clusters{"Clusters"};
  std::vector<std::string> adj{"Adjusted R²"};
  for (const auto &c : columns) {
    obs.push_back(treatment::thousands(c.fit->n_obs));
    clusters.push_back(std::to_string(c.fit->n_clusters));
    adj.push_back(std::isfinite(c.fit->adj_r2) ? fmt("%.3f", c.fit->adj_r2) : "");
  }
  cells.push_back(clusters);
  cells.push_back(obs);
  cells.push_back(adj);

  std::vector<std::size_t> width(columns.size() + 1, 0);
  for (const auto &row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      width[c] = std::max(width[c], text_width(row[c]));
    }
  }
  std::size_t total = 0;
  for (auto w : width) {
    total += w + 2;
  }
  const std::string rule(total, '=');
  out << rule << '\n';
  for (std::size_t r = 0; r < cells.size(); ++r) {
    const auto &row = cells[r];
    if (row.empty()) {
      out << std::string(total, '-') << '\n';
      continue;
    }
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::size_t w = text_width(row[c]);
      const std::string fill(width[c] > w ? width[c] - w : 0, ' ');
      line += c == 0 ? row[c] + fill : "  " + fill + row[c];
    }
    while (!line.empty() && line.back() == ' ') {
      line.pop_back();
    }
    out << line << '\n';
  }
  out << rule << '\n';
  std::string by = columns.empty() ? "" : columns.front().fit->cluster_by;
  out << "Note: *p<0.1; **p<0.05; ***p<0.01. Standard errors clustered by "
      << by << " in parentheses.\n";
}

} // namespace evstudy::estimator
