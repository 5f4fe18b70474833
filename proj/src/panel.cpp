#include "evstudy/panel.hpp"

#include "evstudy/csv.hpp"
#include "evstudy/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

namespace evstudy::panel {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string at_line(const csv::Reader &r) {
  return r.source() + ":" + std::to_string(r.line()) + ": ";
}

bool parse_flag(const csv::Reader &r, std::size_t col, const char *name) {
  const auto &s = r.field(col);
  if (s == "1") {
    return true;
  }
  if (s == "0") {
    return false;
  }
  throw DataError(at_line(r) + name + " must be 0 or 1, found '" + s + "'");
}

std::int8_t parse_optional_flag(const csv::Reader &r, std::size_t col,
                                const char *name) {
  if (r.field(col).empty()) {
    return -1;
  }
  return parse_flag(r, col, name) ? 1 : 0;
}

std::int16_t parse_code(const csv::Reader &r, std::size_t col,
                        const Codebook &cb, const std::string &name) {
  const auto &s = r.field(col);
  if (s.empty()) {
    return -1;
  }
  const int idx = cb.column(name).index_of(s);
  if (idx < 0) {
    throw DataError(at_line(r) + "code '" + s + "' is not declared for '" +
                    name + "' in the codebook");
  }
  return static_cast<std::int16_t>(idx);
}

std::string code_text(std::int16_t idx, const Codebook &cb,
                      const std::string &name) {
  return idx < 0 ? std::string{} : cb.column(name).levels.at(idx).code;
}

std::string optional_number(double v) {
  return std::isnan(v) ? std::string{} : csv::format_double(v);
}

std::string optional_flag(std::int8_t v) {
  return v < 0 ? std::string{} : std::to_string(v);
}

std::vector<std::string> record_fields(const StudentRecord &r,
                                       const Codebook &cb) {
  std::vector<std::string> f{r.student_id, r.municipality_id, r.state_id,
                             std::to_string(r.year)};
  for (double g : r.area_grades) {
    f.push_back(optional_number(g));
  }
  f.push_back(optional_number(r.essay_grade));
  f.push_back(r.present_day1 ? "1" : "0");
  f.push_back(r.present_day2 ? "1" : "0");
  f.push_back(code_text(r.sex, cb, "sex"));
  f.push_back(code_text(r.race, cb, "race"));
  f.push_back(optional_number(r.age));
  f.push_back(code_text(r.family_income, cb, "family_income"));
  f.push_back(optional_flag(r.father_hs));
  f.push_back(optional_flag(r.mother_hs));
  f.push_back(code_text(r.marital_status, cb, "marital_status"));
  return f;
}

} // namespace

std::int16_t StudentRecord::categorical(const std::string &field) const {
  if (field == "sex") {
    return sex;
  }
  if (field == "race") {
    return race;
  }
  if (field == "family_income") {
    return family_income;
  }
  if (field == "marital_status") {
    return marital_status;
  }
  throw SpecError("'" + field + "' is not a categorical field");
}

const std::vector<std::string> &student_columns() {
  static const std::vector<std::string> cols{
      "student_id", "municipality_id", "state_id", "year",
      kAreaColumns[0], kAreaColumns[1], kAreaColumns[2], kAreaColumns[3],
      "essay_grade", "present_day1", "present_day2", "sex", "race", "age",
      "family_income", "father_hs", "mother_hs", "marital_status"};
  return cols;
}

nlohmann::json IngestReport::to_json() const {
  return {{"rows_read", rows_read},
          {"rows_retained", rows_retained},
          {"dropped",
           {{"absent", dropped_absent},
            {"zero_essay", dropped_zero_essay},
            {"excluded_year", dropped_excluded_year},
            {"missing_grade", dropped_missing_grade}}}};
}

std::vector<StudentRecord> read_students(std::istream &in,
                                         const std::string &source,
                                         const Codebook &codebook,
                                         const YearBounds &years) {
  csv::Reader r(in, source, student_columns());
  std::vector<std::size_t> col;
  for (const auto &name : student_columns()) {
    col.push_back(r.column(name));
  }
  std::vector<StudentRecord> out;
  while (r.next()) {
    StudentRecord s;
    s.student_id = r.field(col[0]);
    s.municipality_id = r.field(col[1]);
    s.state_id = r.field(col[2]);
    if (s.municipality_id.empty()) {
      throw DataError(at_line(r) + "empty municipality_id");
    }
    s.year = static_cast<int>(r.to_int(col[3]));
    if ((years.first && s.year < *years.first) ||
        (years.last && s.year > *years.last)) {
      throw DataError(at_line(r) + "year " + std::to_string(s.year) +
                      " outside the configured range");
    }
    for (std::size_t a = 0; a < 4; ++a) {
      s.area_grades[a] = r.to_double_or_nan(col[4 + a]);
    }
    s.essay_grade = r.to_double_or_nan(col[8]);
    for (double g : s.area_grades) {
      if (g < 0.0 || std::isinf(g)) {
        throw DataError(at_line(r) + "negative or infinite area grade");
      }
    }
    if (s.essay_grade < 0.0 || std::isinf(s.essay_grade)) {
      throw DataError(at_line(r) + "negative or infinite essay grade");
    }
    s.present_day1 = parse_flag(r, col[9], "present_day1");
    s.present_day2 = parse_flag(r, col[10], "present_day2");
    s.sex = parse_code(r, col[11], codebook, "sex");
    s.race = parse_code(r, col[12], codebook, "race");
    s.age = r.to_double_or_nan(col[13]);
    if (s.age < 0.0 || std::isinf(s.age)) {
      throw DataError(at_line(r) + "invalid age");
    }
    s.family_income = parse_code(r, col[14], codebook, "family_income");
    s.father_hs = parse_optional_flag(r, col[15], "father_hs");
    s.mother_hs = parse_optional_flag(r, col[16], "mother_hs");
    s.marital_status = parse_code(r, col[17], codebook, "marital_status");
    out.push_back(std::move(s));
  }
  return out;
}

void write_students(std::ostream &out, const std::vector<StudentRecord> &rows,
                    const Codebook &codebook) {
  csv::write_row(out, student_columns());
  for (const auto &r : rows) {
    csv::write_row(out, record_fields(r, codebook));
  }
}

std::vector<StudentRecord> filter_records(std::vector<StudentRecord> records,
                                          const FilterConfig &config,
                                          IngestReport *report) {
  IngestReport local;
  std::vector<StudentRecord> kept;
  kept.reserve(records.size());
  for (auto &r : records) {
    if (!r.present_day1 || !r.present_day2) {
      ++local.dropped_absent;
    } else if (!(r.essay_grade > 0.0)) {
      ++local.dropped_zero_essay;
    } else if (config.excluded_years.count(r.year)) {
      ++local.dropped_excluded_year;
    } else if (std::any_of(r.area_grades.begin(), r.area_grades.end(),
                           [](double g) { return std::isnan(g); })) {
      ++local.dropped_missing_grade;
    } else {
      kept.push_back(std::move(r));
    }
  }
  if (report) {
    report->dropped_absent += local.dropped_absent;
    report->dropped_zero_essay += local.dropped_zero_essay;
    report->dropped_excluded_year += local.dropped_excluded_year;
    report->dropped_missing_grade += local.dropped_missing_grade;
    report->rows_retained = kept.size();
  }
  return kept;
}

std::string to_string(StandardizeScope s) {
  return s == StandardizeScope::PerYear ? "per_year" : "pooled";
}

StandardizeScope parse_scope(const std::string &s) {
  if (s == "per_year") {
    return StandardizeScope::PerYear;
  }
  if (s == "pooled") {
    return StandardizeScope::Pooled;
  }
  throw ConfigError("unknown standardization scope '" + s +
                    "' (expected per_year or pooled)");
}

std::vector<double> standardize_values(std::span<const double> values,
                                       std::span<const int> years,
                                       StandardizeScope scope) {
  struct Moments {
    std::size_t n = 0;
    double sum = 0.0;
    double ss = 0.0;
  };
  auto key = [&](std::size_t i) {
    return scope == StandardizeScope::PerYear ? years[i] : 0;
  };
  std::map<int, Moments> cells;
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto &m = cells[key(i)];
    ++m.n;
    m.sum += values[i];
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto &m = cells[key(i)];
    const double d = values[i] - m.sum / static_cast<double>(m.n);
    m.ss += d * d;
  }
  std::map<int, std::pair<double, double>> scale;
  for (const auto &[k, m] : cells) {
    const double mean = m.sum / static_cast<double>(m.n);
    const double sd = std::sqrt(m.ss / static_cast<double>(m.n));
    const std::string where = scope == StandardizeScope::PerYear
                                  ? "year " + std::to_string(k)
                                  : "the pooled sample";
    if (m.n < 2) {
      throw DegenerateScaleError("cannot standardize " + where +
                                 ": fewer than two rows");
    }
    if (!(sd > 0.0)) {
      throw DegenerateScaleError("cannot standardize " + where +
                                 ": zero variance");
    }
    scale[k] = {mean, sd};
  }
  std::vector<double> z(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto &[mean, sd] = scale[key(i)];
    z[i] = (values[i] - mean) / sd;
  }
  return z;
}

std::vector<double> standardize(const std::vector<StudentRecord> &records,
                                StandardizeScope scope) {
  std::vector<double> raw(records.size());
  std::vector<int> years(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    raw[i] = records[i].mean_area_grade();
    years[i] = records[i].year;
  }
  return standardize_values(raw, years, scope);
}

std::optional<double> leave_one_out_mean(std::span<const double> group,
                                         std::size_t target) {
  if (group.size() < 2 || target >= group.size()) {
    return std::nullopt;
  }
  double sum = 0.0;
  for (double v : group) {
    sum += v;
  }
  return (sum - group[target]) / static_cast<double>(group.size() - 1);
}

Panel build_panel(std::vector<StudentRecord> records, Codebook codebook,
                  StandardizeScope scope, IngestReport report) {
  Panel p;
  p.codebook = std::move(codebook);
  p.scope = scope;
  p.records = std::move(records);
  p.report = report;
  p.report.rows_retained = p.records.size();
  if (p.records.empty()) {
    throw SampleError("no student records left after filtering");
  }
  const std::vector<double> z = standardize(p.records, scope);

  std::map<std::string, std::uint32_t> muni_idx, state_idx;
  for (const auto &r : p.records) {
    muni_idx.emplace(r.municipality_id, 0);
    state_idx.emplace(r.state_id, 0);
  }
  for (auto &[name, idx] : muni_idx) {
    idx = static_cast<std::uint32_t>(p.municipalities.size());
    p.municipalities.push_back(name);
  }
  for (auto &[name, idx] : state_idx) {
    idx = static_cast<std::uint32_t>(p.states.size());
    p.states.push_back(name);
  }

  p.rows.resize(p.records.size());
  struct Cell {
    double sum = 0.0;
    std::uint32_t n = 0;
  };
  std::unordered_map<std::uint64_t, Cell> cells;
  auto cell_key = [](std::uint32_t m, int year) {
    return (static_cast<std::uint64_t>(m) << 32) |
           static_cast<std::uint32_t>(year);
  };
  for (std::size_t i = 0; i < p.records.size(); ++i) {
    const auto &r = p.records[i];
    auto &row = p.rows[i];
    row.record = i;
    row.municipality = muni_idx.at(r.municipality_id);
    row.state = state_idx.at(r.state_id);
    row.outcome = z[i];
    auto &c = cells[cell_key(row.municipality, r.year)];
    c.sum += z[i];
    ++c.n;
  }
  for (std::size_t i = 0; i < p.rows.size(); ++i) {
    auto &row = p.rows[i];
    const auto &c = cells.at(cell_key(row.municipality, p.records[i].year));
    row.cell_size = c.n;
    row.muni_year_mean = c.sum / c.n;
    row.peer_mean =
        c.n >= 2 ? (c.sum - row.outcome) / static_cast<double>(c.n - 1) : kNaN;
  }
  return p;
}

void write_panel(std::ostream &out, const Panel &panel) {
  auto header = student_columns();
  header.insert(header.end(), {"outcome", "peer_mean", "muni_year_mean"});
  csv::write_row(out, header);
  for (const auto &row : panel.rows) {
    auto fields = record_fields(panel.record(row), panel.codebook);
    fields.push_back(csv::format_double(row.outcome));
    fields.push_back(optional_number(row.peer_mean));
    fields.push_back(csv::format_double(row.muni_year_mean));
    csv::write_row(out, fields);
  }
}

} // namespace evstudy::panel
