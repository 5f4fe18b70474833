#pragma once

#include <nlohmann/json.hpp>

#include <map>
#include <string>
#include <vector>

namespace evstudy {

struct CategoryLevel {
  std::string code;
  std::string label;
};

// One categorical column. Records store the 0-based level index, or -1 for
// missing. The reference level gets no dummy column in regressions.
struct CategoricalColumn {
  std::vector<CategoryLevel> levels;
  std::string reference;

  int index_of(const std::string &code) const; // -1 if unknown
  int reference_index() const;
};

// A 0/1 variable derived from a categorical column, used for balance
// regressions (e.g. "male" = sex in {M}).
struct IndicatorDef {
  std::string column;
  std::vector<std::string> codes;
};

// Names of the categorical fields a StudentRecord carries.
inline const std::vector<std::string> &categorical_fields() {
  static const std::vector<std::string> names{"sex", "race", "family_income",
                                              "marital_status"};
  return names;
}

class Codebook {
public:
  Codebook() = default;

  // Built-in ENEM-style codebook used by the simulator.
  static Codebook defaults();
  // Throws ConfigError on malformed input, missing categorical fields,
  // unknown reference codes, or indicators pointing at unknown codes.
  static Codebook from_json(const nlohmann::json &j);
  nlohmann::json to_json() const;

  const CategoricalColumn &column(const std::string &name) const;
  const std::map<std::string, IndicatorDef> &indicators() const {
    return indicators_;
  }

private:
  std::map<std::string, CategoricalColumn> columns_;
  std::map<std::string, IndicatorDef> indicators_;
};

} // namespace evstudy
