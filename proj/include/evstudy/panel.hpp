#pragma once

#include "evstudy/codebook.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace evstudy::panel {

// Multiple-choice areas: natural sciences, human sciences, languages, math.
inline constexpr std::array<const char *, 4> kAreaColumns{
    "grade_cn", "grade_ch", "grade_lc", "grade_mt"};

struct StudentRecord {
  std::string student_id;
  std::string municipality_id;
  std::string state_id;
  int year = 0;
  std::array<double, 4> area_grades{}; // NaN = missing
  double essay_grade = 0.0;            // NaN = missing
  bool present_day1 = true;
  bool present_day2 = true;
  // Level indices into the codebook; -1 = missing.
  std::int16_t sex = -1;
  std::int16_t race = -1;
  std::int16_t family_income = -1;
  std::int16_t marital_status = -1;
  double age = 0.0; // NaN = missing
  std::int8_t father_hs = -1; // 0/1, -1 = missing
  std::int8_t mother_hs = -1;

  double mean_area_grade() const {
    return (area_grades[0] + area_grades[1] + area_grades[2] + area_grades[3]) /
           4.0;
  }
  std::int16_t categorical(const std::string &field) const;
};

// Header of students.csv, in column order.
const std::vector<std::string> &student_columns();

struct IngestReport {
  std::size_t rows_read = 0;
  std::size_t dropped_absent = 0;
  std::size_t dropped_zero_essay = 0;
  std::size_t dropped_excluded_year = 0;
  std::size_t dropped_missing_grade = 0;
  std::size_t rows_retained = 0;

  nlohmann::json to_json() const;
};

struct YearBounds {
  std::optional<int> first;
  std::optional<int> last;
};

// Streams students.csv, validating years, grade signs, flags, and codes
// against the codebook. Throws DataError with file:line context.
std::vector<StudentRecord> read_students(std::istream &in,
                                         const std::string &source,
                                         const Codebook &codebook,
                                         const YearBounds &years = {});
void write_students(std::ostream &out, const std::vector<StudentRecord> &rows,
                    const Codebook &codebook);

struct FilterConfig {
  std::set<int> excluded_years{2011, 2012};
};

// Keeps rows present on both days with a positive essay grade, all four area
// grades, and a year outside the excluded set. Idempotent. Counts per drop
// reason are added to `report` when given.
std::vector<StudentRecord> filter_records(std::vector<StudentRecord> records,
                                          const FilterConfig &config = {},
                                          IngestReport *report = nullptr);

enum class StandardizeScope { PerYear, Pooled };
std::string to_string(StandardizeScope s);
StandardizeScope parse_scope(const std::string &s);

// z-score of the mean area grade, using the population (divide-by-n)
// standard deviation within each year (or over the whole sample). Throws
// DegenerateScaleError naming the year when a cell has fewer than two rows or
// zero variance.
std::vector<double> standardize(const std::vector<StudentRecord> &records,
                                StandardizeScope scope = StandardizeScope::PerYear);

// Same transform applied to an arbitrary value vector grouped by `years`.
std::vector<double> standardize_values(std::span<const double> values,
                                       std::span<const int> years,
                                       StandardizeScope scope);

// Mean of `group` excluding the element at `target`; nullopt for groups of
// fewer than two rows.
std::optional<double> leave_one_out_mean(std::span<const double> group,
                                         std::size_t target);

struct PanelRow {
  std::size_t record = 0;  // index into Panel::records
  std::uint32_t municipality = 0; // dense index into Panel::municipalities
  std::uint32_t state = 0;        // dense index into Panel::states
  double outcome = 0.0;        // standardized mean area grade
  double peer_mean = 0.0;      // leave-one-out cell mean; NaN if singleton
  double muni_year_mean = 0.0; // full municipality-year mean of outcome
  std::uint32_t cell_size = 0;
};

struct Panel {
  Codebook codebook;
  StandardizeScope scope = StandardizeScope::PerYear;
  std::vector<StudentRecord> records;
  std::vector<PanelRow> rows; // one per record, same order
  std::vector<std::string> municipalities; // sorted
  std::vector<std::string> states;         // sorted
  IngestReport report;

  const StudentRecord &record(const PanelRow &row) const {
    return records[row.record];
  }
};

// Standardizes filtered records and attaches peer means. Records must
// already be filtered.
Panel build_panel(std::vector<StudentRecord> records, Codebook codebook,
                  StandardizeScope scope = StandardizeScope::PerYear,
                  IngestReport report = {});

// Students header plus outcome, peer_mean, muni_year_mean.
void write_panel(std::ostream &out, const Panel &panel);

} // namespace evstudy::panel
