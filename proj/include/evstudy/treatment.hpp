#pragma once

#include "evstudy/geo.hpp"
#include "evstudy/panel.hpp"

#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace evstudy::treatment {

inline int relative_time(int year, int opening_year) { return year - opening_year; }

// Event-time indicator column name: ev_m8, ev_m2, ev_0, ev_p1, ...
std::string dummy_name(int k);
// Table label for k: "τ−9", "τ", "τ+3".
std::string tau_label(int k);

enum class DummyMode { Pretrend, Semidynamic };

struct DummyConfig {
  DummyMode mode = DummyMode::Semidynamic;
  int k_min = -2;
  int k_max = 9;
  std::set<int> omitted;
  // Pool k beyond the window into the endpoint columns instead of failing.
  bool bin_endpoints = false;

  // Leads -8..-4 and lags -2..+9 with -9 and -3 omitted.
  static DummyConfig pretrend();
  // Indicators for k >= -2 only; every earlier k is baseline.
  static DummyConfig semidynamic();
};

struct DummySystem {
  int k_min = 0;
  int k_max = 0;
  std::vector<int> included; // ascending, one indicator column each
  std::set<int> omitted;     // explicit baseline categories
  // Column index into `included` for each row, -1 when the row sits in a
  // baseline or omitted category.
  std::vector<int> column_of_row;

  std::vector<std::string> column_names() const;
  // Value of indicator `column` at `row` (0 or 1).
  double value(std::size_t row, std::size_t column) const {
    return column_of_row[row] == static_cast<int>(column) ? 1.0 : 0.0;
  }
};

// Throws ConfigError listing every observed k that falls outside the window
// and cannot be absorbed by the baseline.
DummySystem build_dummies(std::span<const int> event_times,
                          const DummyConfig &config);

// k for every panel row; throws DataError when a municipality has no event.
std::vector<int> event_times(const panel::Panel &panel,
                             const geo::EventMap &map);

struct Distribution {
  std::vector<int> ks;              // ascending
  std::vector<std::string> groups;  // column order
  // counts[g][i] = rows of group g at ks[i]
  std::vector<std::vector<std::size_t>> counts;
  std::vector<std::size_t> totals;

  double share(std::size_t g, std::size_t i) const {
    return totals[g] ? static_cast<double>(counts[g][i]) / totals[g] : 0.0;
  }
};

// Counts per k and group. `group_of_row` names the group of each row; rows
// whose group is not in `groups` are ignored. `ks` fixes the reported range
// when non-empty (it must cover every observed k).
Distribution treatment_distribution(std::span<const int> event_times,
                                    std::span<const std::string> group_of_row,
                                    const std::vector<std::string> &groups,
                                    std::vector<int> ks = {});

// "1263" -> "1,263"
std::string thousands(std::size_t n);
void write_distribution_csv(std::ostream &out, const Distribution &d);
// Aligned text, one row per k: τ−9 | 1,263 | (0.3%) | ...
void write_distribution_text(std::ostream &out, const Distribution &d);

} // namespace evstudy::treatment
