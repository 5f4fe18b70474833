#include "evstudy/treatment.hpp"

#include "evstudy/csv.hpp"
#include "evstudy/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>

namespace evstudy::treatment {

namespace {

std::string percent(double share) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", 100.0 * share);
  return buf;
}

// Display width in code points (labels contain τ and −).
std::size_t text_width(const std::string &s) {
  std::size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) {
      ++n;
    }
  }
  return n;
}

std::string pad(const std::string &s, std::size_t width, bool right) {
  const std::size_t w = text_width(s);
  const std::string fill(width > w ? width - w : 0, ' ');
  return right ? fill + s : s + fill;
}

} // namespace

std::string dummy_name(int k) {
  if (k == 0) {
    return "ev_0";
  }
  return (k < 0 ? "ev_m" : "ev_p") + std::to_string(std::abs(k));
}

std::string tau_label(int k) {
  if (k == 0) {
    return "τ";
  }
  return std::string("τ") + (k < 0 ? "−" : "+") + std::to_string(std::abs(k));
}

DummyConfig DummyConfig::pretrend() {
  return {DummyMode::Pretrend, -9, 9, {-9, -3}, false};
}

DummyConfig DummyConfig::semidynamic() {
  return {DummyMode::Semidynamic, -2, 9, {}, false};
}

std::vector<std::string> DummySystem::column_names() const {
  std::vector<std::string> names;
  names.reserve(included.size());
  for (int k : included) {
    names.push_back(dummy_name(k));
  }
  return names;
}

DummySystem build_dummies(std::span<const int> event_times,
                          const DummyConfig &config) {
  if (config.k_min > config.k_max) {
    throw ConfigError("event window is empty (k_min > k_max)");
  }
  DummySystem d;
  d.k_min = config.k_min;
  d.k_max = config.k_max;
  d.omitted = config.omitted;
  for (int k : config.omitted) {
    if (k < config.k_min || k > config.k_max) {
      throw ConfigError("omitted category " + std::to_string(k) +
                        " lies outside the event window");
    }
  }
  for (int k = config.k_min; k <= config.k_max; ++k) {
    if (!config.omitted.count(k)) {
      d.included.push_back(k);
    }
  }
  if (d.included.empty()) {
    throw ConfigError("event window leaves no indicator columns");
  }

  std::vector<int> slot(config.k_max - config.k_min + 1, -1);
  for (std::size_t c = 0; c < d.included.size(); ++c) {
    slot[d.included[c] - config.k_min] = static_cast<int>(c);
  }

  std::set<int> offending;
  d.column_of_row.resize(event_times.size(), -1);
  for (std::size_t i = 0; i < event_times.size(); ++i) {
    int k = event_times[i];
    if (k < config.k_min) {
      if (config.mode == DummyMode::Semidynamic) {
        continue; // pooled baseline
      }
      if (!config.bin_endpoints) {
        offending.insert(k);
        continue;
      }
      k = config.k_min;
    } else if (k > config.k_max) {
      if (!config.bin_endpoints) {
        offending.insert(k);
        continue;
      }
      k = config.k_max;
    }
    d.column_of_row[i] = slot[k - config.k_min];
  }
  if (!offending.empty()) {
    std::string list;
    for (int k : offending) {
      list += (list.empty() ? "" : ", ") + std::to_string(k);
    }
    throw ConfigError("observed event times outside the window [" +
                      std::to_string(config.k_min) + ", " +
                      std::to_string(config.k_max) + "]: " + list);
  }
  return d;
}

std::vector<int> event_times(const panel::Panel &panel,
                             const geo::EventMap &map) {
  std::vector<int> ks(panel.rows.size());
  std::vector<int> opening(panel.municipalities.size());
  for (std::size_t m = 0; m < panel.municipalities.size(); ++m) {
    opening[m] = map.at(panel.municipalities[m]).opening_year;
  }
  for (std::size_t i = 0; i < panel.rows.size(); ++i) {
    const auto &row = panel.rows[i];
    ks[i] = relative_time(panel.record(row).year, opening[row.municipality]);
  }
  return ks;
}

Distribution treatment_distribution(std::span<const int> event_times,
                                    std::span<const std::string> group_of_row,
                                    const std::vector<std::string> &groups,
                                    std::vector<int> ks) {
  std::map<std::string, std::size_t> gidx;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    gidx.emplace(groups[g], g);
  }
  std::set<int> observed;
  for (std::size_t i = 0; i < event_times.size(); ++i) {
    if (gidx.count(group_of_row[i])) {
      observed.insert(event_times[i]);
    }
  }
  if (ks.empty()) {
    if (!observed.empty()) {
      for (int k = *observed.begin(); k <= *observed.rbegin(); ++k) {
        ks.push_back(k);
      }
    }
  } else {
    std::sort(ks.begin(), ks.end());
    for (int k : observed) {
      if (!std::binary_search(ks.begin(), ks.end(), k)) {
        throw ConfigError("distribution range does not cover observed k = " +
                          std::to_string(k));
      }
    }
  }

  Distribution d;
  d.ks = ks;
  d.groups = groups;
  d.counts.assign(groups.size(), std::vector<std::size_t>(ks.size(), 0));
  d.totals.assign(groups.size(), 0);
  for (std::size_t i = 0; i < event_times.size(); ++i) {
    auto it = gidx.find(group_of_row[i]);
    if (it == gidx.end()) {
      continue;
    }
    const auto pos = std::lower_bound(ks.begin(), ks.end(), event_times[i]);
    ++d.counts[it->second][pos - ks.begin()];
    ++d.totals[it->second];
  }
  return d;
}

std::string thousands(std::size_t n) {
  std::string digits = std::to_string(n);
  std::string out;
  const std::size_t lead = digits.size() % 3;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && i >= lead && (i - lead) % 3 == 0) {
      out.push_back(',');
    }
    out.push_back(digits[i]);
  }
  return out;
}

void write_distribution_csv(std::ostream &out, const Distribution &d) {
  std::vector<std::string> header{"k"};
  for (const auto &g : d.groups) {
    header.push_back(g + "_count");
    header.push_back(g + "_share");
  }
  csv::write_row(out, header);
  for (std::size_t i = 0; i < d.ks.size(); ++i) {
    std::vector<std::string> row{std::to_string(d.ks[i])};
    for (std::size_t g = 0; g < d.groups.size(); ++g) {
      row.push_back(std::to_string(d.counts[g][i]));
      row.push_back(csv::format_double(d.share(g, i)));
    }
    csv::write_row(out, row);
  }
}

void write_distribution_text(std::ostream &out, const Distribution &d) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"k"};
  for (const auto &g : d.groups) {
    header.push_back(g);
    header.push_back("");
  }
  cells.push_back(header);
  for (std::size_t i = 0; i < d.ks.size(); ++i) {
    std::vector<std::string> row{tau_label(d.ks[i])};
    for (std::size_t g = 0; g < d.groups.size(); ++g) {
      row.push_back(thousands(d.counts[g][i]));
      row.push_back("(" + percent(d.share(g, i)) + ")");
    }
    cells.push_back(row);
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto &row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      width[c] = std::max(width[c], text_width(row[c]));
    }
  }
  for (const auto &row : cells) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) {
        line += " | ";
      }
      line += pad(row[c], width[c], c > 0);
    }
    while (!line.empty() && line.back() == ' ') {
      line.pop_back();
    }
    out << line << '\n';
  }
}

} // namespace evstudy::treatment
