#include "evstudy/dgp.hpp"

#include "evstudy/errors.hpp"
#include "evstudy/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

namespace evstudy::dgp {

namespace {

enum Stream : std::uint64_t {
  kLayout = 1,
  kMuniEffect = 2,
  kYearEffect = 3,
  kCell = 4,
};

constexpr double kDegToRad = std::numbers::pi / 180.0;

const std::vector<std::string> &known_keys() {
  static const std::vector<std::string> keys{
      "w_hi", "w_lo", "K_far", "K_near", "kappa", "phi_scale", "cost_curv",
      "anticipation", "effect_map", "fe_sd_muni", "fe_sd_year", "noise_sd",
      "income_effect", "male_effect", "white_effect", "parent_hs_effect",
      "missing_rate", "absent_rate", "zero_essay_rate", "n_municipalities",
      "n_ring", "n_states", "first_year", "n_years", "skip_years",
      "students_per_cell", "opening_years", "neighbor_min_km", "ring_min_km",
      "ring_max_km", "seed"};
  return keys;
}

template <typename T>
void read_field(const nlohmann::json &j, const char *key, T &out) {
  if (auto it = j.find(key); it != j.end()) {
    out = it->get<T>();
  }
}

double round_to(double v, double scale) { return std::round(v * scale) / scale; }

// Point at `distance_km` from (lat, lon) along `bearing` (radians).
geo::Centroid destination(const geo::Centroid &from, double distance_km,
                          double bearing) {
  const double delta = distance_km / geo::kEarthRadiusKm;
  const double phi1 = from.lat * kDegToRad;
  const double lambda1 = from.lon * kDegToRad;
  const double phi2 = std::asin(std::sin(phi1) * std::cos(delta) +
                                std::cos(phi1) * std::sin(delta) * std::cos(bearing));
  const double lambda2 =
      lambda1 + std::atan2(std::sin(bearing) * std::sin(delta) * std::cos(phi1),
                           std::cos(delta) - std::sin(phi1) * std::sin(phi2));
  geo::Centroid c;
  c.lat = round_to(phi2 / kDegToRad, 1e7);
  c.lon = round_to(lambda2 / kDegToRad, 1e7);
  return c;
}

std::string muni_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "M%05d", index);
  return buf;
}

std::string state_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "S%02d", index);
  return buf;
}

// Index drawn from cumulative probabilities.
int draw_category(Rng &rng, const std::vector<double> &probs) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) {
      return static_cast<int>(i);
    }
  }
  return static_cast<int>(probs.size()) - 1;
}

} // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                          std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ stream);
  h = splitmix64(h ^ a);
  return splitmix64(h ^ b);
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  has_spare_ = true;
  return u * m;
}

std::vector<int> DgpConfig::years() const {
  std::vector<int> out;
  const std::set<int> skip(skip_years.begin(), skip_years.end());
  for (int y = first_year; static_cast<int>(out.size()) < n_years; ++y) {
    if (!skip.count(y)) {
      out.push_back(y);
    }
  }
  return out;
}

void DgpConfig::validate() const {
  auto require = [](bool ok, const std::string &msg) {
    if (!ok) {
      throw ConfigError("dgp config: " + msg);
    }
  };
  require(w_hi > w_lo, "w_hi must exceed w_lo");
  require(K_far >= 0.0 && K_near >= 0.0, "costs must be non-negative");
  require(K_near <= K_far, "K_near must not exceed K_far");
  require(kappa >= 0.0, "kappa must be non-negative");
  require(phi_scale > 0.0, "phi_scale must be positive");
  require(cost_curv > 0.0, "cost_curv must be positive");
  require(anticipation >= 0, "anticipation must be non-negative");
  require(std::isfinite(effect_map), "effect_map must be finite");
  require(fe_sd_muni >= 0.0 && fe_sd_year >= 0.0 && noise_sd >= 0.0,
          "standard deviations must be non-negative");
  for (double r : {missing_rate, absent_rate, zero_essay_rate}) {
    require(r >= 0.0 && r < 1.0, "rates must lie in [0, 1)");
  }
  require(!opening_years.empty(), "opening_years must not be empty");
  require(n_municipalities >= static_cast<int>(opening_years.size()),
          "n_municipalities must be at least the number of openings");
  require(n_ring >= 0, "n_ring must be non-negative");
  require(n_states >= 1, "n_states must be positive");
  require(n_years >= 1, "n_years must be positive");
  require(students_per_cell >= 1, "students_per_cell must be positive");
  require(neighbor_min_km > 0.0 && neighbor_min_km < 25.0,
          "neighbor_min_km must lie in (0, 25)");
  require(ring_min_km > 25.0 && ring_min_km <= ring_max_km && ring_max_km <= 50.0,
          "ring distances must lie in (25, 50]");
  const auto ys = years();
  for (int y : opening_years) {
    if (y < ys.front() || y > ys.back()) {
      throw ConfigError("dgp config: opening year " + std::to_string(y) +
                        " lies outside the panel years " +
                        std::to_string(ys.front()) + "-" +
                        std::to_string(ys.back()));
    }
  }
}

DgpConfig DgpConfig::from_json(const nlohmann::json &j) {
  if (!j.is_object()) {
    throw ConfigError("dgp config must be a JSON object");
  }
  const auto &keys = known_keys();
  for (const auto &[key, value] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError("dgp config: unknown key '" + key + "'");
    }
  }
  DgpConfig c;
  try {
    read_field(j, "w_hi", c.w_hi);
    read_field(j, "w_lo", c.w_lo);
    read_field(j, "K_far", c.K_far);
    read_field(j, "K_near", c.K_near);
    read_field(j, "kappa", c.kappa);
    read_field(j, "phi_scale", c.phi_scale);
    read_field(j, "cost_curv", c.cost_curv);
    read_field(j, "anticipation", c.anticipation);
    read_field(j, "effect_map", c.effect_map);
    read_field(j, "fe_sd_muni", c.fe_sd_muni);
    read_field(j, "fe_sd_year", c.fe_sd_year);
    read_field(j, "noise_sd", c.noise_sd);
    read_field(j, "income_effect", c.income_effect);
    read_field(j, "male_effect", c.male_effect);
    read_field(j, "white_effect", c.white_effect);
    read_field(j, "parent_hs_effect", c.parent_hs_effect);
    read_field(j, "missing_rate", c.missing_rate);
    read_field(j, "absent_rate", c.absent_rate);
    read_field(j, "zero_essay_rate", c.zero_essay_rate);
    read_field(j, "n_municipalities", c.n_municipalities);
    read_field(j, "n_ring", c.n_ring);
    read_field(j, "n_states", c.n_states);
    read_field(j, "first_year", c.first_year);
    read_field(j, "n_years", c.n_years);
    read_field(j, "skip_years", c.skip_years);
    read_field(j, "students_per_cell", c.students_per_cell);
    read_field(j, "opening_years", c.opening_years);
    read_field(j, "neighbor_min_km", c.neighbor_min_km);
    read_field(j, "ring_min_km", c.ring_min_km);
    read_field(j, "ring_max_km", c.ring_max_km);
    read_field(j, "seed", c.seed);
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("dgp config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json DgpConfig::to_json() const {
  return {{"w_hi", w_hi},
          {"w_lo", w_lo},
          {"K_far", K_far},
          {"K_near", K_near},
          {"kappa", kappa},
          {"phi_scale", phi_scale},
          {"cost_curv", cost_curv},
          {"anticipation", anticipation},
          {"effect_map", effect_map},
          {"fe_sd_muni", fe_sd_muni},
          {"fe_sd_year", fe_sd_year},
          {"noise_sd", noise_sd},
          {"income_effect", income_effect},
          {"male_effect", male_effect},
          {"white_effect", white_effect},
          {"parent_hs_effect", parent_hs_effect},
          {"missing_rate", missing_rate},
          {"absent_rate", absent_rate},
          {"zero_essay_rate", zero_essay_rate},
          {"n_municipalities", n_municipalities},
          {"n_ring", n_ring},
          {"n_states", n_states},
          {"first_year", first_year},
          {"n_years", n_years},
          {"skip_years", skip_years},
          {"students_per_cell", students_per_cell},
          {"opening_years", opening_years},
          {"neighbor_min_km", neighbor_min_km},
          {"ring_min_km", ring_min_km},
          {"ring_max_km", ring_max_km},
          {"seed", seed}};
}

EffortSolution optimal_effort(const DgpConfig &config, double K_effective) {
  const double a = config.phi_scale;
  const double c0 = config.cost_curv;
  const double gain = config.w_hi - config.w_lo - K_effective;
  EffortSolution s;
  if (gain <= 0.0) {
    return s;
  }
  auto foc = [&](double e) { return a * std::exp(-a * e) * gain - c0 * e; };
  double lo = 0.0;
  double hi = a * gain / c0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) {
      break;
    }
    if (foc(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  s.e_star = std::abs(foc(lo)) <= std::abs(foc(hi)) ? lo : hi;
  s.admitted_prob = 1.0 - std::exp(-a * s.e_star);
  return s;
}

double effective_cost(const DgpConfig &config, double distance_km, int year,
                      int opening_year) {
  if (year < opening_year - config.anticipation) {
    return config.K_far;
  }
  return std::min(config.K_far, config.K_near + config.kappa * distance_km);
}

nlohmann::json Truth::to_json() const {
  nlohmann::json path = nlohmann::json::array();
  for (std::size_t i = 0; i < ks.size(); ++i) {
    path.push_back({{"k", ks[i]}, {"beta", beta[i]}, {"beta_host", beta_host[i]}});
  }
  return {{"path", path},
          {"mean_distance_km", mean_distance_km},
          {"e_far", e_far},
          {"e_near", e_near},
          {"units", "outcome z-score"}};
}

SimulatedData simulate_panel(const DgpConfig &config) {
  config.validate();
  SimulatedData out;
  out.codebook = Codebook::defaults();
  const auto years = config.years();
  const int n_events = static_cast<int>(config.opening_years.size());

  // Layout: events on a 5-degree grid (several hundred km apart), neighbors
  // and ring municipalities scattered around their event.
  Rng layout(derive_seed(config.seed, kLayout));
  struct Muni {
    geo::Centroid centroid;
    int event = 0;
  };
  std::vector<Muni> munis;
  std::vector<geo::Centroid> hosts;
  for (int e = 0; e < n_events; ++e) {
    geo::Centroid c;
    c.lat = -5.0 - 5.0 * (e % 4);
    c.lon = -40.0 - 5.0 * (e / 4);
    c.state_id = state_id(e % config.n_states);
    hosts.push_back(c);
    munis.push_back({c, e});
  }
  auto scatter = [&](int e, double min_km, double max_km) {
    const double d = min_km + (max_km - min_km) * layout.uniform();
    const double bearing = 2.0 * std::numbers::pi * layout.uniform();
    geo::Centroid c = destination(hosts[e], d, bearing);
    c.state_id = hosts[e].state_id;
    munis.push_back({c, e});
  };
  const double analysis_km = 25.0;
  for (int i = 0; i < config.n_municipalities - n_events; ++i) {
    scatter(i % n_events, config.neighbor_min_km, analysis_km - 0.5);
  }
  for (int i = 0; i < config.n_ring; ++i) {
    scatter(i % n_events, config.ring_min_km, config.ring_max_km);
  }
  for (std::size_t m = 0; m < munis.size(); ++m) {
    munis[m].centroid.municipality_id = muni_id(static_cast<int>(m) + 1);
    out.centroids.push_back(munis[m].centroid);
  }
  for (int e = 0; e < n_events; ++e) {
    out.events.push_back({munis[e].centroid.municipality_id,
                          munis[e].centroid.state_id, config.opening_years[e]});
  }
  out.map = geo::assign_events(out.centroids, out.events);

  // Truth path at the mean analysis distance and at the host.
  std::vector<double> distance(munis.size());
  std::vector<int> opening(munis.size());
  double dist_sum = 0.0;
  int n_analysis = 0;
  for (std::size_t m = 0; m < munis.size(); ++m) {
    const auto &a = out.map.at(munis[m].centroid.municipality_id);
    distance[m] = a.distance_km;
    opening[m] = a.opening_year;
    if (a.in_analysis_sample()) {
      dist_sum += a.distance_km;
      ++n_analysis;
    }
  }
  auto &truth = out.truth;
  truth.mean_distance_km = n_analysis ? dist_sum / n_analysis : 0.0;
  truth.e_far = optimal_effort(config, config.K_far).e_star;
  truth.e_near = optimal_effort(config, config.K_near).e_star;
  const double e_mean = optimal_effort(
      config, std::min(config.K_far,
                       config.K_near + config.kappa * truth.mean_distance_km))
                            .e_star;
  const auto [min_open, max_open] =
      std::minmax_element(config.opening_years.begin(), config.opening_years.end());
  for (int k = years.front() - *max_open; k <= years.back() - *min_open; ++k) {
    truth.ks.push_back(k);
    const bool on = k >= -config.anticipation;
    truth.beta.push_back(on ? config.effect_map * (e_mean - truth.e_far) : 0.0);
    truth.beta_host.push_back(
        on ? config.effect_map * (truth.e_near - truth.e_far) : 0.0);
  }

  std::vector<double> muni_fe(munis.size());
  for (std::size_t m = 0; m < munis.size(); ++m) {
    Rng rng(derive_seed(config.seed, kMuniEffect, m));
    muni_fe[m] = config.fe_sd_muni * rng.normal();
  }
  std::vector<double> year_fe(years.size());
  for (std::size_t t = 0; t < years.size(); ++t) {
    Rng rng(derive_seed(config.seed, kYearEffect, static_cast<std::uint64_t>(years[t])));
    year_fe[t] = config.fe_sd_year * rng.normal();
  }

  // Effort effect depends only on (municipality, year); precompute e*.
  const std::size_t n_cells = munis.size() * years.size();
  std::vector<std::vector<panel::StudentRecord>> cells(n_cells);
  const std::vector<double> race_p{0.45, 0.10, 0.38, 0.04, 0.03};
  const std::vector<double> income_p{0.30, 0.25, 0.18, 0.12, 0.09, 0.06};
  const std::vector<double> marital_p{0.90, 0.07, 0.02, 0.01};
  parallel_for(n_cells, [&](std::size_t cell) {
    const std::size_t m = cell / years.size();
    const std::size_t t = cell % years.size();
    const int year = years[t];
    const auto &centroid = munis[m].centroid;
    Rng rng(derive_seed(config.seed, kCell, m, static_cast<std::uint64_t>(year)));
    const double K = effective_cost(config, distance[m], year, opening[m]);
    const double treat = config.effect_map * optimal_effort(config, K).e_star;
    const double cell_mean = treat + muni_fe[m] + year_fe[t];
    auto &rows = cells[cell];
    rows.reserve(config.students_per_cell);
    char id[48];
    for (int s = 0; s < config.students_per_cell; ++s) {
      panel::StudentRecord r;
      std::snprintf(id, sizeof(id), "%s-%d-%04d", centroid.municipality_id.c_str(),
                    year, s + 1);
      r.student_id = id;
      r.municipality_id = centroid.municipality_id;
      r.state_id = centroid.state_id;
      r.year = year;

      auto missing = [&] { return rng.uniform() < config.missing_rate; };
      const bool male = rng.uniform() < 0.42;
      const int race = draw_category(rng, race_p);
      const int income = draw_category(rng, income_p);
      const int marital = draw_category(rng, marital_p);
      const bool father = rng.uniform() < 0.45;
      const bool mother = rng.uniform() < 0.50;
      const double age = std::max(15.0, std::round(18.0 + 2.0 * rng.normal()));
      r.sex = missing() ? -1 : static_cast<std::int16_t>(male ? 1 : 0);
      r.race = missing() ? -1 : static_cast<std::int16_t>(race);
      r.family_income = missing() ? -1 : static_cast<std::int16_t>(income);
      r.marital_status = missing() ? -1 : static_cast<std::int16_t>(marital);
      r.father_hs = missing() ? -1 : static_cast<std::int8_t>(father);
      r.mother_hs = missing() ? -1 : static_cast<std::int8_t>(mother);
      r.age = missing() ? std::nan("") : age;

      const double z = cell_mean + config.income_effect * income +
                       (male ? config.male_effect : 0.0) +
                       (race == 0 ? config.white_effect : 0.0) +
                       config.parent_hs_effect * (father + mother) +
                       config.noise_sd * rng.normal();
      const double mean_grade = 600.0 + 100.0 * z;
      std::array<double, 4> dev{};
      double dev_mean = 0.0;
      for (auto &d : dev) {
        d = 30.0 * rng.normal();
        dev_mean += 0.25 * d;
      }
      for (std::size_t j = 0; j < 4; ++j) {
        r.area_grades[j] = round_to(mean_grade + (dev[j] - dev_mean), 10.0);
      }
      r.essay_grade = std::clamp(std::round(560.0 + 60.0 * z + 120.0 * rng.normal()),
                                 40.0, 1000.0);
      if (rng.uniform() < config.zero_essay_rate) {
        r.essay_grade = 0.0;
      }
      r.present_day1 = rng.uniform() >= config.absent_rate;
      r.present_day2 = rng.uniform() >= config.absent_rate;
      if (!r.present_day1) {
        r.area_grades[0] = std::nan("");
        r.area_grades[1] = std::nan("");
      }
      if (!r.present_day2) {
        r.area_grades[2] = std::nan("");
        r.area_grades[3] = std::nan("");
        r.essay_grade = std::nan("");
      }
      rows.push_back(std::move(r));
    }
  });
  std::size_t total = 0;
  for (const auto &c : cells) {
    total += c.size();
  }
  out.records.reserve(total);
  for (auto &c : cells) {
    std::move(c.begin(), c.end(), std::back_inserter(out.records));
    std::vector<panel::StudentRecord>().swap(c);
  }
  return out;
}

} // namespace evstudy::dgp
