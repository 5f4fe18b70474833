#pragma once

#include "evstudy/design.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace evstudy::estimator {

// Group ids for one fixed-effect dimension: ids[i] in [0, levels).
struct FixedEffect {
  std::span<const std::uint32_t> ids;
  std::uint32_t levels = 0;
};

struct AbsorbOptions {
  double tol = 1e-8;
  int max_iter = 10000;
};

struct AbsorptionResult {
  Eigen::VectorXd y_res;
  Eigen::MatrixXd X_res;
  int iterations = 0;
  // Largest |group mean| left in any column for any dimension.
  double max_group_residual = 0.0;
  // max_group_residual after each sweep.
  std::vector<double> residual_history;
  std::vector<std::string> dropped_columns; // filled in by fit()
};

// Alternating projections: sweeps subtract group means dimension by
// dimension until every group mean of every column is within tol. Each
// column is iterated independently, so the result does not depend on the
// number of threads. Throws ConvergenceError after max_iter sweeps.
AbsorptionResult absorb(const Eigen::VectorXd &y, const Eigen::MatrixXd &X,
                        std::span<const FixedEffect> fe,
                        const AbsorbOptions &opt = {});

struct OlsResult {
  Eigen::VectorXd coefficients;     // retained columns, in input order
  std::vector<std::size_t> retained; // input column indices
  std::vector<std::size_t> dropped;  // input column indices
  Eigen::MatrixXd xtx_inverse;      // (X'X)^-1 over retained columns
  Eigen::VectorXd residuals;
};

// Least squares through a Householder QR that walks the columns in order and
// drops any column whose remaining norm falls to rel_tol times its reference
// norm (the column's own norm when `reference_norms` is empty). Dropped
// columns are reported, never zeroed. Throws DegenerateModelError when no
// column survives.
OlsResult ols(const Eigen::VectorXd &y, const Eigen::MatrixXd &X,
              std::span<const double> reference_norms = {},
              double rel_tol = 1e-10);

enum class SmallSample { CR1, None };
SmallSample parse_small_sample(const std::string &s);
std::string to_string(SmallSample s);

struct VcovOptions {
  SmallSample small_sample = SmallSample::CR1;
  // Parameters absorbed by fixed effects; added to K in (N-1)/(N-K).
  double absorbed_df = 0.0;
};

// Finite-sample factor G/(G-1) * (N-1)/(N-K) (1 for SmallSample::None).
double small_sample_factor(std::size_t n_obs, std::size_t n_clusters,
                           double n_params, SmallSample s);

// Sandwich B (sum_g X_g' e_g e_g' X_g) B with B = (X'X)^-1, scaled by the
// small-sample factor with K = X.cols() + absorbed_df. Throws InferenceError
// with fewer than two clusters.
Eigen::MatrixXd cluster_vcov(const Eigen::MatrixXd &X,
                             const Eigen::VectorXd &residuals,
                             std::span<const std::uint32_t> cluster_ids,
                             const VcovOptions &opt = {});
// Same with a precomputed bread.
Eigen::MatrixXd cluster_vcov(const Eigen::MatrixXd &X,
                             const Eigen::VectorXd &residuals,
                             std::span<const std::uint32_t> cluster_ids,
                             const Eigen::MatrixXd &bread,
                             const VcovOptions &opt);

// Parameters absorbed by the fixed effects: levels of the first dimension,
// plus levels minus connected components for the second, plus levels minus
// one for any further dimension.
double absorbed_degrees_of_freedom(std::span<const FixedEffect> fe);

struct FitOptions {
  double tol = 1e-8;
  int max_iter = 10000;
  std::optional<SmallSample> small_sample; // default: from the design spec
};

struct FitResult {
  std::vector<std::string> names; // retained coefficients
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd vcov;
  Eigen::VectorXd se;
  Eigen::VectorXd t;
  Eigen::VectorXd p;
  std::vector<std::string> dropped_columns;
  std::vector<std::string> treatment_columns; // retained ones
  std::size_t n_obs = 0;
  std::size_t n_clusters = 0;
  std::string cluster_by;
  double r2 = 0.0;
  double adj_r2 = 0.0;
  double absorbed_df = 0.0;
  SmallSample small_sample = SmallSample::CR1;
  double small_sample_factor = 1.0;
  int iterations = 0;
  double max_group_residual = 0.0;
  std::optional<double> intercept;
  std::string inference_error; // non-empty when vcov could not be formed
  std::size_t singletons_dropped = 0;
  nlohmann::json spec;

  std::optional<std::size_t> index(const std::string &name) const;
  double estimate(const std::string &name) const;
  double std_error(const std::string &name) const;
  double p_value(const std::string &name) const;

  nlohmann::json to_json() const;
};

// absorb -> ols -> cluster_vcov. p-values are two-sided from Student t with
// G-1 degrees of freedom. Throws DegenerateModelError when the design has
// treatment columns and all of them are dropped.
FitResult fit(const design::DesignMatrix &design, const FitOptions &opt = {});

// One table column per fit; rows are coefficient names (estimate with stars
// over parenthesized se). `labels` maps a coefficient name to its row label.
struct TableColumn {
  std::string header;
  const FitResult *fit = nullptr;
};
void write_table(std::ostream &out, const std::vector<TableColumn> &columns,
                 const std::vector<std::string> &rows,
                 bool include_intercept = false);

// Default row list for a fit: treatment coefficients with k <= report_k_max,
// dummies first, then distance interactions.
std::vector<std::string> reported_rows(const FitResult &fit, int report_k_max);
std::string row_label(const std::string &name);
std::string format_estimate(double value);
std::string stars(double p);

} // namespace evstudy::estimator
