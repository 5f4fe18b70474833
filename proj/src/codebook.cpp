#include "evstudy/codebook.hpp"

#include "evstudy/errors.hpp"

#include <set>

namespace evstudy {

int CategoricalColumn::index_of(const std::string &code) const {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i].code == code) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

int CategoricalColumn::reference_index() const { return index_of(reference); }

Codebook Codebook::defaults() {
  Codebook cb;
  cb.columns_["sex"] = {{{"F", "female"}, {"M", "male"}}, "F"};
  cb.columns_["race"] = {{{"W", "white"},
                          {"B", "black"},
                          {"P", "brown"},
                          {"A", "asian"},
                          {"I", "indigenous"}},
                         "W"};
  cb.columns_["family_income"] = {{{"A", "up to 1 minimum wage"},
                                   {"B", "1 to 2 minimum wages"},
                                   {"C", "2 to 3 minimum wages"},
                                   {"D", "3 to 6 minimum wages"},
                                   {"E", "6 to 10 minimum wages"},
                                   {"F", "more than 10 minimum wages"}},
                                  "A"};
  cb.columns_["marital_status"] = {
      {{"S", "single"}, {"M", "married"}, {"D", "divorced"}, {"V", "widowed"}},
      "S"};
  cb.indicators_["male"] = {"sex", {"M"}};
  cb.indicators_["white"] = {"race", {"W"}};
  cb.indicators_["income_gt6"] = {"family_income", {"E", "F"}};
  return cb;
}

Codebook Codebook::from_json(const nlohmann::json &j) {
  if (!j.is_object()) {
    throw ConfigError("codebook must be a JSON object");
  }
  for (const auto &[key, _] : j.items()) {
    if (key != "columns" && key != "indicators") {
      throw ConfigError("codebook: unknown key '" + key + "'");
    }
  }
  Codebook cb;
  try {
    for (const auto &[name, col] : j.at("columns").items()) {
      CategoricalColumn c;
      std::set<std::string> codes;
      for (const auto &lvl : col.at("levels")) {
        CategoryLevel level{lvl.at("code").get<std::string>(),
                            lvl.value("label", std::string{})};
        if (level.code.empty() || !codes.insert(level.code).second) {
          throw ConfigError("codebook column '" + name +
                            "' has an empty or repeated code");
        }
        c.levels.push_back(std::move(level));
      }
      c.reference = col.at("reference").get<std::string>();
      if (c.reference_index() < 0) {
        throw ConfigError("codebook column '" + name + "' reference '" +
                          c.reference + "' is not one of its codes");
      }
      cb.columns_[name] = std::move(c);
    }
    if (j.contains("indicators")) {
      for (const auto &[name, ind] : j.at("indicators").items()) {
        IndicatorDef def{ind.at("column").get<std::string>(),
                         ind.at("codes").get<std::vector<std::string>>()};
        cb.indicators_[name] = std::move(def);
      }
    }
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("codebook: ") + e.what());
  }
  for (const auto &name : categorical_fields()) {
    if (!cb.columns_.count(name)) {
      throw ConfigError("codebook is missing column '" + name + "'");
    }
  }
  for (const auto &[name, ind] : cb.indicators_) {
    auto it = cb.columns_.find(ind.column);
    if (it == cb.columns_.end()) {
      throw ConfigError("indicator '" + name + "' refers to unknown column '" +
                        ind.column + "'");
    }
    for (const auto &code : ind.codes) {
      if (it->second.index_of(code) < 0) {
        throw ConfigError("indicator '" + name + "' refers to unknown code '" +
                          code + "'");
      }
    }
  }
  return cb;
}

nlohmann::json Codebook::to_json() const {
  nlohmann::json j;
  for (const auto &[name, col] : columns_) {
    nlohmann::json levels = nlohmann::json::array();
    for (const auto &l : col.levels) {
      levels.push_back({{"code", l.code}, {"label", l.label}});
    }
    j["columns"][name] = {{"levels", levels}, {"reference", col.reference}};
  }
  j["indicators"] = nlohmann::json::object();
  for (const auto &[name, ind] : indicators_) {
    j["indicators"][name] = {{"column", ind.column}, {"codes", ind.codes}};
  }
  return j;
}

const CategoricalColumn &Codebook::column(const std::string &name) const {
  auto it = columns_.find(name);
  if (it == columns_.end()) {
    throw SpecError("codebook has no column '" + name + "'");
  }
  return it->second;
}

} // namespace evstudy
