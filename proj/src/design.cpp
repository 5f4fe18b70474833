#include "evstudy/design.hpp"

#include "evstudy/csv.hpp"
#include "evstudy/errors.hpp"
#include "evstudy/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

namespace evstudy::design {

namespace {

using ValueFn = std::function<double(std::size_t)>; // panel row -> value

struct Column {
  std::string name;
  ValueFn value;
};

const std::vector<std::string> &known_controls() {
  static const std::vector<std::string> names{
      "sex",       "race",      "age",           "family_income",
      "father_hs", "mother_hs", "marital_status"};
  return names;
}

bool is_categorical(const std::string &name) {
  const auto &c = categorical_fields();
  return std::find(c.begin(), c.end(), name) != c.end();
}

const std::vector<std::string> &known_keys() {
  static const std::vector<std::string> keys{"municipality", "year", "state",
                                             "event"};
  return keys;
}

template <class T>
void read_field(const nlohmann::json &j, const char *key, T &out) {
  if (j.contains(key)) {
    out = j.at(key).get<T>();
  }
}

// Flag-valued control stored as int8 (-1 missing).
std::int8_t flag_of(const panel::StudentRecord &r, const std::string &name) {
  return name == "father_hs" ? r.father_hs : r.mother_hs;
}

std::vector<Column> control_column_specs(const panel::Panel &panel,
                                         std::span<const std::size_t> rows,
                                         const std::string &control) {
  std::vector<Column> cols;
  auto rec = [&panel](std::size_t i) -> const panel::StudentRecord & {
    return panel.record(panel.rows[i]);
  };
  bool any_missing = false;
  if (is_categorical(control)) {
    const auto &cb = panel.codebook.column(control);
    const int ref = cb.reference_index();
    for (std::size_t l = 0; l < cb.levels.size(); ++l) {
      if (static_cast<int>(l) == ref) {
        continue;
      }
      const auto level = static_cast<std::int16_t>(l);
      cols.push_back({control + "_" + cb.levels[l].code,
                      [rec, control, level](std::size_t i) {
                        return rec(i).categorical(control) == level ? 1.0 : 0.0;
                      }});
    }
    for (std::size_t i : rows) {
      if (rec(i).categorical(control) < 0) {
        any_missing = true;
        break;
      }
    }
    if (any_missing) {
      cols.push_back({control + "_missing", [rec, control](std::size_t i) {
                        return rec(i).categorical(control) < 0 ? 1.0 : 0.0;
                      }});
    }
  } else if (control == "age") {
    cols.push_back({"age", [rec](std::size_t i) {
                      const double a = rec(i).age;
                      return std::isnan(a) ? 0.0 : a;
                    }});
    for (std::size_t i : rows) {
      if (std::isnan(rec(i).age)) {
        any_missing = true;
        break;
      }
    }
    if (any_missing) {
      cols.push_back({"age_missing", [rec](std::size_t i) {
                        return std::isnan(rec(i).age) ? 1.0 : 0.0;
                      }});
    }
  } else if (control == "father_hs" || control == "mother_hs") {
    cols.push_back({control, [rec, control](std::size_t i) {
                      return flag_of(rec(i), control) == 1 ? 1.0 : 0.0;
                    }});
    for (std::size_t i : rows) {
      if (flag_of(rec(i), control) < 0) {
        any_missing = true;
        break;
      }
    }
    if (any_missing) {
      cols.push_back({control + "_missing", [rec, control](std::size_t i) {
                        return flag_of(rec(i), control) < 0 ? 1.0 : 0.0;
                      }});
    }
  } else {
    throw SpecError("unknown control '" + control + "'");
  }
  return cols;
}

struct Sample {
  std::vector<std::size_t> rows; // panel row indices
  std::vector<const geo::EventAssignment *> assignment; // per municipality
  std::size_t singletons_dropped = 0;
};

Sample select_rows(const panel::Panel &panel, const geo::EventMap &map,
                   const ModelSpec &spec, bool need_peer) {
  const auto classes = spec.sample_classes(map.radii());
  for (const auto &label : classes) {
    geo::parse_buffer_label(label, map.radii()); // validates the label
  }
  Sample s;
  s.assignment.resize(panel.municipalities.size());
  std::vector<char> in_sample(panel.municipalities.size(), 0);
  for (std::size_t m = 0; m < panel.municipalities.size(); ++m) {
    const auto *a = map.find(panel.municipalities[m]);
    if (!a) {
      throw DataError("municipality '" + panel.municipalities[m] +
                      "' appears in the panel but not in the event map");
    }
    s.assignment[m] = a;
    const auto label = geo::buffer_label(a->buffer, map.radii());
    in_sample[m] =
        std::find(classes.begin(), classes.end(), label) != classes.end();
  }
  for (std::size_t i = 0; i < panel.rows.size(); ++i) {
    const auto &row = panel.rows[i];
    if (!in_sample[row.municipality]) {
      continue;
    }
    if (need_peer && std::isnan(row.peer_mean)) {
      ++s.singletons_dropped;
      continue;
    }
    s.rows.push_back(i);
  }
  if (s.rows.empty()) {
    std::string list;
    for (const auto &c : classes) {
      list += (list.empty() ? "" : ", ") + c;
    }
    throw SampleError("estimation sample is empty (buffer classes: " + list +
                      ")");
  }
  return s;
}

// Dense ids over the sample for a key dimension, ordered by the key value.
std::vector<std::uint32_t> dense_ids(const panel::Panel &panel,
                                     const Sample &s, const std::string &key,
                                     std::uint32_t &levels) {
  std::vector<std::int64_t> raw(s.rows.size());
  if (key == "event") {
    // Rank event municipalities by id so level order is stable.
    std::map<std::string, std::int64_t> rank;
    for (const auto *a : s.assignment) {
      rank.emplace(a->event_municipality_id, 0);
    }
    std::int64_t next = 0;
    for (auto &[name, r] : rank) {
      r = next++;
    }
    for (std::size_t r = 0; r < s.rows.size(); ++r) {
      const auto &row = panel.rows[s.rows[r]];
      raw[r] = rank.at(s.assignment[row.municipality]->event_municipality_id);
    }
  } else {
    for (std::size_t r = 0; r < s.rows.size(); ++r) {
      const auto &row = panel.rows[s.rows[r]];
      if (key == "municipality") {
        raw[r] = row.municipality;
      } else if (key == "state") {
        raw[r] = row.state;
      } else if (key == "year") {
        raw[r] = panel.record(row).year;
      } else {
        throw SpecError("unknown grouping key '" + key + "'");
      }
    }
  }
  std::map<std::int64_t, std::uint32_t> remap;
  for (auto v : raw) {
    remap.emplace(v, 0);
  }
  std::uint32_t next = 0;
  for (auto &[v, idx] : remap) {
    idx = next++;
  }
  std::vector<std::uint32_t> ids(raw.size());
  for (std::size_t r = 0; r < raw.size(); ++r) {
    ids[r] = remap.at(raw[r]);
  }
  levels = static_cast<std::uint32_t>(remap.size());
  return ids;
}

void fill(DesignMatrix &d, const Sample &s, const std::vector<Column> &cols) {
  const std::size_t n = s.rows.size();
  d.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  d.names.clear();
  for (const auto &c : cols) {
    d.names.push_back(c.name);
  }
  parallel_for(cols.size(), [&](std::size_t j) {
    auto col = d.X.col(static_cast<Eigen::Index>(j));
    for (std::size_t r = 0; r < n; ++r) {
      col(static_cast<Eigen::Index>(r)) = cols[j].value(s.rows[r]);
    }
  });
}

void attach_groups(DesignMatrix &d, const panel::Panel &panel, const Sample &s,
                   const std::vector<std::string> &fe,
                   const std::string &cluster_by) {
  d.fe_names = fe;
  d.fe_ids.clear();
  d.fe_levels.clear();
  for (const auto &dim : fe) {
    std::uint32_t levels = 0;
    d.fe_ids.push_back(dense_ids(panel, s, dim, levels));
    d.fe_levels.push_back(levels);
  }
  d.cluster_name = cluster_by;
  d.cluster_ids = dense_ids(panel, s, cluster_by, d.n_clusters);
  d.panel_rows = s.rows;
  d.singletons_dropped = s.singletons_dropped;
}

std::vector<std::string> all_labels(const geo::Radii &radii) {
  std::vector<std::string> labels{"host"};
  for (std::size_t i = 0; i + 1 < radii.km.size(); ++i) {
    labels.push_back(
        geo::buffer_label({geo::BufferClass::Within, i}, radii));
  }
  return labels;
}

} // namespace

std::string to_string(Mode m) {
  switch (m) {
  case Mode::Pretrend:
    return "pretrend";
  case Mode::Semidynamic:
    return "semidynamic";
  case Mode::Placebo:
    return "placebo";
  case Mode::Balance:
    return "balance";
  }
  return "semidynamic";
}

Mode parse_mode(const std::string &s) {
  for (Mode m : {Mode::Pretrend, Mode::Semidynamic, Mode::Placebo, Mode::Balance}) {
    if (to_string(m) == s) {
      return m;
    }
  }
  throw ConfigError("unknown mode '" + s +
                    "' (expected pretrend, semidynamic, placebo, or balance)");
}

treatment::DummyConfig ModelSpec::dummy_config() const {
  auto cfg = mode == Mode::Pretrend ? treatment::DummyConfig::pretrend()
                                    : treatment::DummyConfig::semidynamic();
  if (k_min) {
    cfg.k_min = *k_min;
  }
  if (k_max) {
    cfg.k_max = *k_max;
  }
  if (omitted) {
    cfg.omitted = std::set<int>(omitted->begin(), omitted->end());
  }
  cfg.bin_endpoints = bin_endpoints;
  return cfg;
}

std::vector<std::string> ModelSpec::sample_classes(const geo::Radii &radii) const {
  if (sample) {
    return *sample;
  }
  if (mode == Mode::Placebo) {
    return {geo::buffer_label({geo::BufferClass::Ring, radii.km.size() - 1},
                              radii)};
  }
  return all_labels(radii);
}

void ModelSpec::validate() const {
  const auto &known = known_controls();
  std::set<std::string> seen;
  for (const auto &c : controls) {
    if (std::find(known.begin(), known.end(), c) == known.end()) {
      throw SpecError("unknown control '" + c + "'");
    }
    if (!seen.insert(c).second) {
      throw SpecError("control '" + c + "' listed twice");
    }
  }
  for (const auto &c : distance_interacted_controls) {
    if (!seen.count(c)) {
      throw SpecError("distance-interacted control '" + c +
                      "' is not among the controls");
    }
  }
  if (fe.empty()) {
    throw SpecError("at least one fixed-effect dimension is required");
  }
  const auto &keys = known_keys();
  for (const auto &dim : fe) {
    if (std::find(keys.begin(), keys.end(), dim) == keys.end()) {
      throw SpecError("unknown fixed-effect dimension '" + dim + "'");
    }
  }
  if (std::find(keys.begin(), keys.end(), cluster_by) == keys.end()) {
    throw SpecError("cluster_by references unknown key '" + cluster_by + "'");
  }
  if (!(ci_level > 0.0 && ci_level < 1.0)) {
    throw SpecError("ci_level must lie in (0, 1)");
  }
  if (small_sample != "cr1" && small_sample != "none") {
    throw SpecError("small_sample must be 'cr1' or 'none'");
  }
  if (wald_reference != "chi2" && wald_reference != "hotelling_f") {
    throw SpecError("wald_reference must be 'chi2' or 'hotelling_f'");
  }
  const auto cfg = dummy_config();
  if (cfg.k_min > cfg.k_max) {
    throw SpecError("k_min exceeds k_max");
  }
}

ModelSpec ModelSpec::from_json(const nlohmann::json &j) {
  static const std::set<std::string> keys{
      "mode", "k_min", "k_max", "omitted", "bin_endpoints", "controls",
      "distance_interacted_controls", "include_peer_mean",
      "include_mean_trend", "mean_trend_full_mean", "state_trends",
      "trend_center", "cluster_by", "fe", "sample", "report_k_max",
      "ci_level", "small_sample", "wald_reference", "balance_covariates"};
  if (!j.is_object()) {
    throw ConfigError("model spec must be a JSON object");
  }
  for (const auto &[key, _] : j.items()) {
    if (!keys.count(key)) {
      throw ConfigError("model spec: unknown key '" + key + "'");
    }
  }
  ModelSpec s;
  try {
    if (j.contains("mode")) {
      s.mode = parse_mode(j.at("mode").get<std::string>());
    }
    if (j.contains("k_min") && !j.at("k_min").is_null()) {
      s.k_min = j.at("k_min").get<int>();
    }
    if (j.contains("k_max") && !j.at("k_max").is_null()) {
      s.k_max = j.at("k_max").get<int>();
    }
    if (j.contains("omitted") && !j.at("omitted").is_null()) {
      s.omitted = j.at("omitted").get<std::vector<int>>();
    }
    if (j.contains("trend_center") && !j.at("trend_center").is_null()) {
      s.trend_center = j.at("trend_center").get<double>();
    }
    if (j.contains("sample") && !j.at("sample").is_null()) {
      s.sample = j.at("sample").get<std::vector<std::string>>();
    }
    read_field(j, "bin_endpoints", s.bin_endpoints);
    read_field(j, "controls", s.controls);
    read_field(j, "distance_interacted_controls", s.distance_interacted_controls);
    read_field(j, "include_peer_mean", s.include_peer_mean);
    read_field(j, "include_mean_trend", s.include_mean_trend);
    read_field(j, "mean_trend_full_mean", s.mean_trend_full_mean);
    read_field(j, "state_trends", s.state_trends);
    read_field(j, "cluster_by", s.cluster_by);
    read_field(j, "fe", s.fe);
    read_field(j, "report_k_max", s.report_k_max);
    read_field(j, "ci_level", s.ci_level);
    read_field(j, "small_sample", s.small_sample);
    read_field(j, "wald_reference", s.wald_reference);
    read_field(j, "balance_covariates", s.balance_covariates);
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("model spec: ") + e.what());
  }
  s.validate();
  return s;
}

nlohmann::json ModelSpec::to_json() const {
  const auto cfg = dummy_config();
  nlohmann::json j;
  j["mode"] = to_string(mode);
  j["k_min"] = cfg.k_min;
  j["k_max"] = cfg.k_max;
  j["omitted"] = std::vector<int>(cfg.omitted.begin(), cfg.omitted.end());
  j["bin_endpoints"] = bin_endpoints;
  j["controls"] = controls;
  j["distance_interacted_controls"] = distance_interacted_controls;
  j["include_peer_mean"] = include_peer_mean;
  j["include_mean_trend"] = include_mean_trend;
  j["mean_trend_full_mean"] = mean_trend_full_mean;
  j["state_trends"] = state_trends;
  j["trend_center"] = trend_center ? nlohmann::json(*trend_center)
                                   : nlohmann::json(nullptr);
  j["cluster_by"] = cluster_by;
  j["fe"] = fe;
  j["sample"] = sample ? nlohmann::json(*sample) : nlohmann::json(nullptr);
  j["report_k_max"] = report_k_max;
  j["ci_level"] = ci_level;
  j["small_sample"] = small_sample;
  j["wald_reference"] = wald_reference;
  j["balance_covariates"] = balance_covariates;
  return j;
}

std::optional<std::size_t> DesignMatrix::column(const std::string &name) const {
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j] == name) {
      return j;
    }
  }
  return std::nullopt;
}

void DesignMatrix::check_finite(const panel::Panel *panel) const {
  auto row_label = [&](Eigen::Index r) {
    if (panel && static_cast<std::size_t>(r) < panel_rows.size()) {
      return "student '" +
             panel->record(panel->rows[panel_rows[r]]).student_id + "'";
    }
    return "row " + std::to_string(r);
  };
  for (Eigen::Index r = 0; r < y.size(); ++r) {
    if (!std::isfinite(y(r))) {
      throw DataError("non-finite outcome at " + row_label(r));
    }
  }
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      if (!std::isfinite(X(r, j))) {
        throw DataError("non-finite value in column '" + names[j] + "' at " +
                        row_label(r));
      }
    }
  }
}

void DesignMatrix::write_csv(std::ostream &out) const {
  std::vector<std::string> header{outcome_name};
  header.insert(header.end(), names.begin(), names.end());
  for (const auto &f : fe_names) {
    header.push_back("fe_" + f);
  }
  header.push_back("cluster_" + cluster_name);
  csv::write_row(out, header);
  std::vector<std::string> fields;
  for (Eigen::Index r = 0; r < y.size(); ++r) {
    fields.clear();
    fields.push_back(csv::format_double(y(r)));
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      fields.push_back(csv::format_double(X(r, j)));
    }
    for (const auto &ids : fe_ids) {
      fields.push_back(std::to_string(ids[r]));
    }
    fields.push_back(std::to_string(cluster_ids[r]));
    csv::write_row(out, fields);
  }
}

nlohmann::json DesignMatrix::sidecar() const {
  nlohmann::json fe = nlohmann::json::object();
  for (std::size_t d = 0; d < fe_names.size(); ++d) {
    fe[fe_names[d]] = fe_levels[d];
  }
  return {{"outcome", outcome_name},
          {"columns", names},
          {"treatment_columns", treatment_columns},
          {"n_rows", rows()},
          {"fe_cardinality", fe},
          {"cluster", {{"by", cluster_name}, {"n", n_clusters}}},
          {"singletons_dropped", singletons_dropped},
          {"trend_center", trend_center},
          {"spec", spec.to_json()}};
}

std::vector<std::string> control_columns(const panel::Panel &panel,
                                         std::span<const std::size_t> rows,
                                         const std::string &control) {
  std::vector<std::string> names;
  for (const auto &c : control_column_specs(panel, rows, control)) {
    names.push_back(c.name);
  }
  return names;
}

DesignMatrix build_design(const panel::Panel &panel, const geo::EventMap &map,
                          const ModelSpec &spec) {
  spec.validate();
  if (spec.mode == Mode::Balance) {
    throw SpecError("balance specifications are built per covariate with "
                    "balance_design");
  }
  const bool need_peer = spec.include_peer_mean ||
                         (spec.include_mean_trend && !spec.mean_trend_full_mean);
  Sample s = select_rows(panel, map, spec, need_peer);

  std::vector<int> ks(s.rows.size());
  std::vector<double> dist(panel.municipalities.size());
  for (std::size_t m = 0; m < panel.municipalities.size(); ++m) {
    dist[m] = s.assignment[m]->distance_km;
  }
  int year_min = panel.record(panel.rows[s.rows.front()]).year;
  int year_max = year_min;
  for (std::size_t r = 0; r < s.rows.size(); ++r) {
    const auto &row = panel.rows[s.rows[r]];
    const int year = panel.record(row).year;
    ks[r] = treatment::relative_time(year, s.assignment[row.municipality]->opening_year);
    year_min = std::min(year_min, year);
    year_max = std::max(year_max, year);
  }
  const auto dummies = treatment::build_dummies(ks, spec.dummy_config());
  const double center =
      spec.trend_center.value_or(0.5 * (year_min + year_max));

  // Event dummies are looked up by sample position; map panel row -> sample
  // position for the value functions.
  std::vector<std::int32_t> dummy_col(panel.rows.size(), -1);
  for (std::size_t r = 0; r < s.rows.size(); ++r) {
    dummy_col[s.rows[r]] = dummies.column_of_row[r];
  }
  auto distance = [&panel, &dist](std::size_t i) {
    return dist[panel.rows[i].municipality];
  };
  auto trend = [&panel, center](std::size_t i) {
    return static_cast<double>(panel.record(panel.rows[i]).year) - center;
  };

  std::vector<Column> cols;
  DesignMatrix d;
  d.event_ks = dummies.included;
  for (std::size_t c = 0; c < dummies.included.size(); ++c) {
    const int col = static_cast<int>(c);
    cols.push_back({treatment::dummy_name(dummies.included[c]),
                    [&dummy_col, col](std::size_t i) {
                      return dummy_col[i] == col ? 1.0 : 0.0;
                    }});
  }
  for (std::size_t c = 0; c < dummies.included.size(); ++c) {
    const int col = static_cast<int>(c);
    cols.push_back({treatment::dummy_name(dummies.included[c]) + "_x_dist",
                    [&dummy_col, col, distance](std::size_t i) {
                      return dummy_col[i] == col ? distance(i) : 0.0;
                    }});
  }
  for (const auto &c : cols) {
    d.treatment_columns.push_back(c.name);
  }

  std::vector<Column> interacted;
  for (const auto &control : spec.controls) {
    auto cc = control_column_specs(panel, s.rows, control);
    const bool x_dist =
        std::find(spec.distance_interacted_controls.begin(),
                  spec.distance_interacted_controls.end(),
                  control) != spec.distance_interacted_controls.end();
    for (auto &c : cc) {
      if (x_dist) {
        interacted.push_back({c.name + "_x_dist",
                              [v = c.value, distance](std::size_t i) {
                                return v(i) * distance(i);
                              }});
      }
      cols.push_back(std::move(c));
    }
  }
  cols.insert(cols.end(), interacted.begin(), interacted.end());

  if (spec.include_peer_mean) {
    cols.push_back({"peer_mean", [&panel](std::size_t i) {
                      return panel.rows[i].peer_mean;
                    }});
  }
  if (spec.include_mean_trend) {
    const bool full = spec.mean_trend_full_mean;
    cols.push_back({"muni_mean_x_trend", [&panel, trend, full](std::size_t i) {
                      const auto &row = panel.rows[i];
                      return (full ? row.muni_year_mean : row.peer_mean) *
                             trend(i);
                    }});
  }
  if (spec.state_trends) {
    std::set<std::uint32_t> states;
    for (std::size_t i : s.rows) {
      states.insert(panel.rows[i].state);
    }
    // The first state is the reference: the sum of all state trends equals
    // the common trend, which the year effects absorb.
    bool first = true;
    for (std::uint32_t st : states) {
      if (first) {
        first = false;
        continue;
      }
      cols.push_back({"trend_state_" + panel.states[st],
                      [&panel, trend, st](std::size_t i) {
                        return panel.rows[i].state == st ? trend(i) : 0.0;
                      }});
    }
  }

  fill(d, s, cols);
  d.y.resize(static_cast<Eigen::Index>(s.rows.size()));
  for (std::size_t r = 0; r < s.rows.size(); ++r) {
    d.y(static_cast<Eigen::Index>(r)) = panel.rows[s.rows[r]].outcome;
  }
  attach_groups(d, panel, s, spec.fe, spec.cluster_by);
  d.trend_center = center;
  d.spec = spec;
  d.check_finite(&panel);
  return d;
}

DesignMatrix balance_design(const panel::Panel &panel, const geo::EventMap &map,
                            const ModelSpec &spec_in, const std::string &covariate) {
  ModelSpec spec = spec_in;
  spec.fe = {"municipality", "year"};
  spec.validate();

  std::function<double(const panel::StudentRecord &)> value;
  const auto &indicators = panel.codebook.indicators();
  if (auto it = indicators.find(covariate); it != indicators.end()) {
    const auto &def = it->second;
    const auto &col = panel.codebook.column(def.column);
    std::set<std::int16_t> levels;
    for (const auto &code : def.codes) {
      levels.insert(static_cast<std::int16_t>(col.index_of(code)));
    }
    value = [levels, field = def.column](const panel::StudentRecord &r) {
      const auto v = r.categorical(field);
      if (v < 0) {
        return std::nan("");
      }
      return levels.count(v) ? 1.0 : 0.0;
    };
  } else if (covariate == "age") {
    value = [](const panel::StudentRecord &r) { return r.age; };
  } else if (covariate == "father_hs" || covariate == "mother_hs") {
    value = [covariate](const panel::StudentRecord &r) {
      const auto f = flag_of(r, covariate);
      return f < 0 ? std::nan("") : static_cast<double>(f);
    };
  } else {
    throw SpecError("unknown balance covariate '" + covariate + "'");
  }

  Sample s = select_rows(panel, map, spec, false);
  std::vector<std::size_t> kept;
  for (std::size_t i : s.rows) {
    if (!std::isnan(value(panel.record(panel.rows[i])))) {
      kept.push_back(i);
    }
  }
  if (kept.empty()) {
    throw SampleError("covariate '" + covariate + "' is missing on every row");
  }
  s.rows = std::move(kept);

  std::vector<int> ks(s.rows.size());
  for (std::size_t r = 0; r < s.rows.size(); ++r) {
    const auto &row = panel.rows[s.rows[r]];
    ks[r] = treatment::relative_time(panel.record(row).year,
                                     s.assignment[row.municipality]->opening_year);
  }
  const auto dummies = treatment::build_dummies(ks, spec.dummy_config());
  std::vector<std::int32_t> dummy_col(panel.rows.size(), -1);
  for (std::size_t r = 0; r < s.rows.size(); ++r) {
    dummy_col[s.rows[r]] = dummies.column_of_row[r];
  }
  std::vector<Column> cols;
  for (std::size_t c = 0; c < dummies.included.size(); ++c) {
    const int col = static_cast<int>(c);
    cols.push_back({treatment::dummy_name(dummies.included[c]),
                    [&dummy_col, col](std::size_t i) {
                      return dummy_col[i] == col ? 1.0 : 0.0;
                    }});
  }

  DesignMatrix d;
  d.event_ks = dummies.included;
  for (const auto &c : cols) {
    d.treatment_columns.push_back(c.name);
  }
  fill(d, s, cols);
  d.y.resize(static_cast<Eigen::Index>(s.rows.size()));
  for (std::size_t r = 0; r < s.rows.size(); ++r) {
    d.y(static_cast<Eigen::Index>(r)) = value(panel.record(panel.rows[s.rows[r]]));
  }
  attach_groups(d, panel, s, spec.fe, spec.cluster_by);
  d.report_intercept = true;
  d.spec = spec;
  d.spec.mode = Mode::Balance;
  d.outcome_name = covariate;
  d.check_finite(&panel);
  return d;
}

} // namespace evstudy::design
