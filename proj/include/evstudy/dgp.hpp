#pragma once

#include "evstudy/codebook.hpp"
#include "evstudy/geo.hpp"
#include "evstudy/panel.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <random>
#include <vector>

namespace evstudy::dgp {

struct DgpConfig {
  // Effort model: U = phi(e) w_hi + (1 - phi(e)) w_lo - phi(e) K - c(e),
  // phi(e) = 1 - exp(-phi_scale e), c(e) = cost_curv e^2 / 2.
  double w_hi = 3.0;
  double w_lo = 0.0;
  double K_far = 2.0;
  double K_near = 1.0;
  double kappa = 0.0; // per-km cost gradient after opening
  double phi_scale = 1.0;
  double cost_curv = 1.0;
  int anticipation = 2;
  double effect_map = 0.1331;

  double fe_sd_muni = 0.3;
  double fe_sd_year = 0.2;
  double noise_sd = 0.94;
  double income_effect = 0.04; // per family-income level above the lowest
  double male_effect = -0.05;
  double white_effect = 0.1;
  double parent_hs_effect = 0.08; // each parent
  double missing_rate = 0.01;     // per covariate
  double absent_rate = 0.03;      // per exam day
  double zero_essay_rate = 0.01;

  // Layout: n_municipalities analysis municipalities (one host per opening
  // plus neighbors within the analysis radius) and n_ring municipalities in
  // the placebo ring.
  int n_municipalities = 113;
  int n_ring = 30;
  int n_states = 5;
  int first_year = 2004;
  int n_years = 13;
  std::vector<int> skip_years{2011, 2012};
  int students_per_cell = 600;
  std::vector<int> opening_years{2009, 2009, 2010, 2010, 2011, 2011, 2013, 2013};
  double neighbor_min_km = 2.0;
  double ring_min_km = 25.5;
  double ring_max_km = 49.5;
  std::uint64_t seed = 42;

  // Panel years: n_years consecutive years from first_year, skipping
  // skip_years.
  std::vector<int> years() const;
  // Throws ConfigError.
  void validate() const;
  static DgpConfig from_json(const nlohmann::json &j);
  nlohmann::json to_json() const;
};

struct EffortSolution {
  double e_star = 0.0;
  double admitted_prob = 0.0;
};

// Root of phi'(e) (w_hi - w_lo - K) = c'(e) by bisection; e* = 0 when
// w_hi - w_lo - K <= 0.
EffortSolution optimal_effort(const DgpConfig &config, double K_effective);

// Cost faced in `year` at distance d from an opening in `opening_year`.
double effective_cost(const DgpConfig &config, double distance_km,
                      int year, int opening_year);

struct Truth {
  std::vector<int> ks;
  std::vector<double> beta;      // at the mean analysis distance
  std::vector<double> beta_host; // at distance 0
  double mean_distance_km = 0.0;
  double e_far = 0.0;
  double e_near = 0.0;
  nlohmann::json to_json() const;
};

struct SimulatedData {
  std::vector<geo::Centroid> centroids;
  std::vector<geo::OpeningEvent> events;
  std::vector<panel::StudentRecord> records; // sorted by municipality, year
  geo::EventMap map;
  Truth truth;
  Codebook codebook;
};

SimulatedData simulate_panel(const DgpConfig &config);

// Portable draws on top of std::mt19937_64 (whose output sequence is fixed
// by the standard).
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(); // [0, 1)
  double normal();  // Marsaglia polar
  std::uint64_t bits() { return engine_(); }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                          std::uint64_t a = 0, std::uint64_t b = 0);

} // namespace evstudy::dgp
