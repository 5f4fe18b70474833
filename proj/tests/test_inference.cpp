#include "evstudy/errors.hpp"
#include "evstudy/inference.hpp"

#include "oracles.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace evstudy;
using namespace evstudy::inference;

namespace {

estimator::FitResult make_fit(const std::vector<std::string> &names,
                              const Eigen::VectorXd &b, const Eigen::MatrixXd &V,
                              std::size_t clusters = 50) {
  estimator::FitResult f;
  f.names = names;
  f.treatment_columns = names;
  f.coefficients = b;
  f.vcov = V;
  f.se = V.diagonal().cwiseSqrt();
  f.n_clusters = clusters;
  return f;
}

const dgp::SimulatedData &sim() {
  static const auto s = dgp::simulate_panel(oracle::small_config());
  return s;
}

const panel::Panel &pnl() {
  static const auto p = oracle::make_panel(sim());
  return p;
}

} // namespace

TEST_CASE("wald: zero estimates give p = 1") {
  const auto f = make_fit({"ev_m8", "ev_m7"}, Eigen::VectorXd::Zero(2),
                          Eigen::MatrixXd::Identity(2, 2) * 0.01);
  const auto w = wald_test(f, {"ev_m8", "ev_m7"});
  CHECK(w.statistic == 0.0);
  CHECK(w.p_value == 1.0);
  CHECK(w.df == 2);
}

TEST_CASE("wald: single restriction at 1.96 se has p close to 0.05") {
  Eigen::VectorXd b(1);
  b << 1.959963984540054 * 0.2;
  const auto f = make_fit({"ev_m4"}, b, Eigen::MatrixXd::Identity(1, 1) * 0.04);
  const auto w = wald_test(f, {"ev_m4"});
  CHECK(w.statistic == doctest::Approx(1.959963984540054 * 1.959963984540054));
  CHECK(std::abs(w.p_value - 0.05) <= 1e-9);
}

TEST_CASE("wald: statistic against the direct quadratic form, order and scale invariant") {
  Eigen::VectorXd b(3);
  b << 0.05, -0.02, 0.08;
  Eigen::MatrixXd V(3, 3);
  V << 0.0016, 0.0004, 0.0002, 0.0004, 0.0025, -0.0003, 0.0002, -0.0003, 0.0036;
  const auto f = make_fit({"ev_m8", "ev_m6", "ev_m4"}, b, V);
  const double direct = b.dot(V.ldlt().solve(b));
  const auto w = wald_test(f, {"ev_m8", "ev_m6", "ev_m4"});
  CHECK(w.statistic == doctest::Approx(direct).epsilon(1e-12));
  boost::math::chi_squared chi(3);
  CHECK(w.p_value == doctest::Approx(boost::math::cdf(boost::math::complement(chi, direct))));

  const auto w2 = wald_test(f, {"ev_m4", "ev_m8", "ev_m6"});
  CHECK(w2.statistic == doctest::Approx(w.statistic).epsilon(1e-12));

  // rescaling one regressor by s scales b by 1/s and V by 1/s^2
  Eigen::VectorXd bs = b;
  Eigen::MatrixXd Vs = V;
  const double s = 1000.0;
  bs(1) /= s;
  Vs.row(1) /= s;
  Vs.col(1) /= s;
  const auto w3 = wald_test(make_fit(f.names, bs, Vs), f.names);
  CHECK(w3.statistic == doctest::Approx(w.statistic).epsilon(1e-9));
}

TEST_CASE("wald: hotelling reference") {
  Eigen::VectorXd b(2);
  b << 0.1, 0.05;
  Eigen::MatrixXd V = Eigen::MatrixXd::Identity(2, 2) * 0.0025;
  const auto f = make_fit({"ev_m8", "ev_m7"}, b, V, 20);
  const auto w = wald_test(f, {"ev_m8", "ev_m7"}, WaldReference::HotellingF);
  const double W = b.dot(V.inverse() * b);
  CHECK(w.statistic == doctest::Approx(W));
  CHECK(w.df2 == 18);
  CHECK(w.f_statistic == doctest::Approx(W * 18.0 / (2.0 * 19.0)));
  boost::math::fisher_f F(2, 18);
  CHECK(w.p_value == doctest::Approx(boost::math::cdf(boost::math::complement(F, w.f_statistic))));
  CHECK(w.p_value > wald_test(f, f.names).p_value);
  CHECK(w.to_json()["reference"] == "hotelling_f");

  const auto small = make_fit(f.names, b, V, 2);
  CHECK_THROWS_AS(wald_test(small, f.names, WaldReference::HotellingF), InferenceError);
}

TEST_CASE("wald: failures") {
  Eigen::MatrixXd V(2, 2);
  V << 1, 1, 1, 1;
  const auto f = make_fit({"ev_m8", "ev_m7"}, Eigen::VectorXd::Ones(2), V);
  CHECK_THROWS_AS(wald_test(f, {"ev_m8", "ev_m7"}), InferenceError);
  CHECK_THROWS_AS(wald_test(f, {"ev_m5"}), SpecError);
  CHECK_THROWS_AS(wald_test(f, {}), InferenceError);
  auto g = f;
  g.inference_error = "only one cluster";
  CHECK_THROWS_AS(wald_test(g, {"ev_m8"}), InferenceError);
  CHECK_THROWS_AS(parse_wald_reference("t"), ConfigError);
}

TEST_CASE("lead names pick dummies before -2 in ascending order") {
  const auto f = make_fit({"ev_m4", "ev_m8", "ev_m2", "ev_0", "ev_m8_x_dist"},
                          Eigen::VectorXd::Zero(5), Eigen::MatrixXd::Identity(5, 5));
  CHECK(lead_names(f) == std::vector<std::string>{"ev_m8", "ev_m4"});
}

TEST_CASE("plot rows: normal intervals, dummies only, k cap") {
  // coefficients of the published semidynamic path, tau..tau+5
  const std::vector<double> est{0.031, 0.034, 0.036, 0.040, 0.041, 0.046};
  std::vector<std::string> names;
  Eigen::VectorXd b(7);
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(7, 7);
  for (int k = 0; k <= 5; ++k) {
    names.push_back(k == 0 ? "ev_0" : "ev_p" + std::to_string(k));
    b(k) = est[k];
    V(k, k) = std::pow(0.01 + 0.002 * k, 2);
  }
  names.push_back("ev_0_x_dist");
  b(6) = -0.001;
  V(6, 6) = 1e-6;
  const auto f = make_fit(names, b, V);
  const auto rows = plot_rows(f, 0.95);
  REQUIRE(rows.size() == 6);
  for (int k = 0; k <= 5; ++k) {
    CHECK(rows[k].k == k);
    CHECK(rows[k].estimate == est[k]);
    const double half = 1.959963984540054 * (0.01 + 0.002 * k);
    CHECK(rows[k].ci_low == doctest::Approx(est[k] - half).epsilon(1e-12));
    CHECK(rows[k].ci_high == doctest::Approx(est[k] + half).epsilon(1e-12));
  }
  CHECK(plot_rows(f, 0.95, 3).size() == 4);
  const auto r90 = plot_rows(f, 0.90);
  CHECK(r90[0].ci_high - r90[0].estimate == doctest::Approx(1.6448536269514722 * 0.01));
  CHECK_THROWS_AS(plot_rows(f, 1.2), SpecError);

  std::ostringstream out;
  write_plot_csv(out, rows);
  CHECK(out.str().rfind("k,estimate,ci_low,ci_high\n0,0.031,", 0) == 0);
}

TEST_CASE("placebo: ring fit and its failure modes") {
  design::ModelSpec spec;
  std::vector<std::string> warnings;
  const auto f = placebo_run(pnl(), sim().map, spec, {}, &warnings);
  CHECK(f.n_clusters == 8);
  CHECK(warnings.empty());

  auto same = spec;
  same.sample = std::vector<std::string>{"host", "le10", "le25"};
  placebo_run(pnl(), sim().map, same, {}, &warnings);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("identical") != std::string::npos);

  auto cfg = oracle::small_config();
  cfg.n_ring = 0;
  const auto no_ring = dgp::simulate_panel(cfg);
  const auto p2 = oracle::make_panel(no_ring);
  CHECK_THROWS_AS(placebo_run(p2, no_ring.map, spec), SampleError);

  auto late = oracle::small_config();
  late.opening_years.assign(8, 2016);
  const auto s3 = dgp::simulate_panel(late);
  std::vector<panel::StudentRecord> early;
  for (const auto &r : s3.records) {
    if (r.year <= 2010) {
      early.push_back(r);
    }
  }
  const auto p3 = panel::build_panel(panel::filter_records(early), s3.codebook);
  try {
    placebo_run(p3, s3.map, spec);
    FAIL("expected SampleError");
  } catch (const SampleError &e) {
    CHECK(std::string(e.what()).find("k >= -2") != std::string::npos);
  }
}

TEST_CASE("balance suite: table shape and per-covariate errors") {
  design::ModelSpec spec;
  const auto suite = balance_suite(pnl(), sim().map, spec, spec.balance_covariates);
  CHECK(suite.entries.size() == 6);
  CHECK(suite.succeeded() == 6);
  std::ostringstream out;
  write_balance_table(out, suite, spec.report_k_max);
  const std::string t = out.str();
  for (const char *h : {"Male", "White", "Age", "Father completed high school",
                        "Mother completed high school",
                        "Family Income > 6 minimum wages"}) {
    CHECK(t.find(h) != std::string::npos);
  }
  CHECK(t.find("τ−2") != std::string::npos);
  CHECK(t.find("τ+5") != std::string::npos);
  CHECK(t.find("τ+6") == std::string::npos);
  CHECK(t.find("Intercept") != std::string::npos);
  CHECK(t.find("x buffer distance") == std::string::npos);

  auto records = pnl().records;
  for (auto &r : records) {
    r.father_hs = 1;
  }
  const auto constant = panel::build_panel(records, pnl().codebook);
  const auto s2 = balance_suite(constant, sim().map, spec, {"father_hs", "male"});
  CHECK(s2.succeeded() == 1);
  CHECK(s2.entries[0].error_type == "DegenerateModelError");
  std::ostringstream out2;
  write_balance_table(out2, s2, 5);
  CHECK(out2.str().find("Not estimated: Father completed high school") != std::string::npos);
}

TEST_CASE("diagnostics report") {
  design::ModelSpec spec;
  const auto rep = run_diagnostics(pnl(), sim().map, spec);
  CHECK(rep.suites_succeeded() == 3);
  const auto j = rep.to_json();
  CHECK(j["pretrend"]["status"] == "ok");
  CHECK(j["pretrend"]["wald"]["df"] == 5);
  CHECK(j["placebo"]["status"] == "ok");
  CHECK(j["balance"]["covariates"].size() == 6);
  std::vector<int> ks;
  for (const auto &row : j["pretrend"]["plot"]) {
    ks.push_back(row["k"]);
  }
  CHECK(ks == std::vector<int>{-8, -7, -6, -5, -4, -2});

  auto s = spec;
  s.k_min = -2;
  CHECK_FALSE(suite_spec(s, design::Mode::Pretrend).k_min.has_value());
  s.mode = design::Mode::Pretrend;
  CHECK(suite_spec(s, design::Mode::Pretrend).k_min == -2);
}

TEST_CASE("replicate passes consecutive seeds in order") {
  const auto out = replicate(5, 100, [](std::size_t i, std::uint64_t seed) {
    return static_cast<std::uint64_t>(i) * 1000 + seed;
  });
  CHECK(out == std::vector<std::uint64_t>{100, 1101, 2102, 3103, 4104});
}
