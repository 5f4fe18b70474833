#include "evstudy/errors.hpp"
#include "evstudy/panel.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace evstudy;
using namespace evstudy::panel;

namespace {

StudentRecord student(const std::string &id, const std::string &muni, int year,
                      double grade) {
  StudentRecord s;
  s.student_id = id;
  s.municipality_id = muni;
  s.state_id = "S1";
  s.year = year;
  s.area_grades = {grade, grade + 10, grade - 10, grade};
  s.essay_grade = 500.0;
  s.sex = 0;
  s.race = 1;
  s.family_income = 2;
  s.marital_status = 0;
  s.age = 17.0;
  s.father_hs = 1;
  s.mother_hs = 0;
  return s;
}

} // namespace

TEST_CASE("filter: drop reasons are counted and filtering is idempotent") {
  std::vector<StudentRecord> rows;
  rows.push_back(student("a", "M1", 2008, 500));
  rows.push_back(student("b", "M1", 2008, 510));
  rows.back().present_day2 = false;
  rows.push_back(student("c", "M1", 2008, 520));
  rows.back().essay_grade = 0.0;
  rows.push_back(student("d", "M1", 2011, 530));
  rows.push_back(student("e", "M1", 2008, 540));
  rows.back().area_grades[2] = NAN;
  rows.push_back(student("f", "M1", 2013, 550));

  IngestReport rep;
  auto kept = filter_records(rows, {}, &rep);
  CHECK(kept.size() == 2);
  CHECK(rep.dropped_absent == 1);
  CHECK(rep.dropped_zero_essay == 1);
  CHECK(rep.dropped_excluded_year == 1);
  CHECK(rep.dropped_missing_grade == 1);
  CHECK(rep.rows_retained == 2);

  IngestReport again;
  auto twice = filter_records(kept, {}, &again);
  CHECK(twice.size() == kept.size());
  CHECK(again.dropped_absent + again.dropped_zero_essay +
            again.dropped_excluded_year + again.dropped_missing_grade ==
        0);

  FilterConfig keep_all_years;
  keep_all_years.excluded_years.clear();
  CHECK(filter_records(rows, keep_all_years).size() == 3);
}

TEST_CASE("standardize: per-year mean 0 and population sd 1") {
  std::vector<double> v{1, 2, 3, 4, 10, 20, 30};
  std::vector<int> y{2008, 2008, 2008, 2008, 2009, 2009, 2009};
  const auto z = standardize_values(v, y, StandardizeScope::PerYear);
  for (int year : {2008, 2009}) {
    double s = 0, ss = 0;
    int n = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (y[i] == year) {
        s += z[i];
        ss += z[i] * z[i];
        ++n;
      }
    }
    CHECK(std::abs(s / n) < 1e-12);
    CHECK(ss / n == doctest::Approx(1.0).epsilon(1e-12));
  }
  // population sd of {1,2,3,4} is sqrt(1.25)
  CHECK(z[0] == doctest::Approx(-1.5 / std::sqrt(1.25)));

  const auto pooled = standardize_values(v, y, StandardizeScope::Pooled);
  double s = 0;
  for (double x : pooled) {
    s += x;
  }
  CHECK(std::abs(s) < 1e-12);
}

TEST_CASE("standardize: degenerate cells name the year") {
  std::vector<double> v{5, 5, 1, 2};
  std::vector<int> y{2010, 2010, 2013, 2013};
  try {
    standardize_values(v, y, StandardizeScope::PerYear);
    FAIL("expected DegenerateScaleError");
  } catch (const DegenerateScaleError &e) {
    CHECK(std::string(e.what()).find("2010") != std::string::npos);
  }
  std::vector<double> one{1, 2, 3};
  std::vector<int> y1{2010, 2013, 2013};
  CHECK_THROWS_AS(standardize_values(one, y1, StandardizeScope::PerYear),
                  DegenerateScaleError);
  CHECK_NOTHROW(standardize_values(one, y1, StandardizeScope::Pooled));
}

TEST_CASE("leave-one-out mean") {
  std::vector<double> g{1, 2, 3, 6};
  CHECK(*leave_one_out_mean(g, 0) == doctest::Approx(11.0 / 3.0));
  CHECK(*leave_one_out_mean(g, 3) == doctest::Approx(2.0));
  std::vector<double> single{4};
  CHECK_FALSE(leave_one_out_mean(single, 0).has_value());
}

TEST_CASE("build_panel: peer means, cell sizes, dense ids") {
  std::vector<StudentRecord> rows{
      student("a", "M2", 2008, 400), student("b", "M2", 2008, 500),
      student("c", "M2", 2008, 600), student("d", "M1", 2008, 450),
      student("e", "M1", 2009, 480), student("f", "M1", 2009, 520),
      student("g", "M2", 2009, 700)};
  const auto p = build_panel(rows, Codebook::defaults());
  REQUIRE(p.rows.size() == 7);
  CHECK(p.municipalities == std::vector<std::string>{"M1", "M2"});
  const auto &ra = p.rows[0];
  const auto &rb = p.rows[1];
  const auto &rc = p.rows[2];
  CHECK(ra.municipality == 1);
  CHECK(ra.cell_size == 3);
  CHECK(ra.peer_mean == doctest::Approx((rb.outcome + rc.outcome) / 2));
  CHECK(ra.muni_year_mean ==
        doctest::Approx((ra.outcome + rb.outcome + rc.outcome) / 3));
  CHECK(std::isnan(p.rows[3].peer_mean));
  CHECK(std::isnan(p.rows[6].peer_mean));
  CHECK(p.rows[6].muni_year_mean == doctest::Approx(p.rows[6].outcome));
  CHECK(p.rows[4].peer_mean == doctest::Approx(p.rows[5].outcome));

  CHECK_THROWS_AS(build_panel({}, Codebook::defaults()), SampleError);
}

TEST_CASE("students csv round trip") {
  const auto cb = Codebook::defaults();
  std::vector<StudentRecord> rows{student("a", "M1", 2008, 512.3),
                                  student("b", "M1", 2009, 498.7)};
  rows[1].sex = -1;
  rows[1].age = NAN;
  rows[1].father_hs = -1;
  rows[1].essay_grade = NAN;
  rows[1].present_day2 = false;
  std::stringstream s;
  write_students(s, rows, cb);
  const auto back = read_students(s, "students.csv", cb);
  REQUIRE(back.size() == 2);
  CHECK(back[0].area_grades == rows[0].area_grades);
  CHECK(back[0].race == rows[0].race);
  CHECK(back[1].sex == -1);
  CHECK(std::isnan(back[1].age));
  CHECK(back[1].father_hs == -1);
  CHECK(std::isnan(back[1].essay_grade));
  CHECK_FALSE(back[1].present_day2);
}

TEST_CASE("students csv: bad codes and values are data errors") {
  const auto cb = Codebook::defaults();
  std::vector<StudentRecord> rows{student("a", "M1", 2008, 512.3)};
  std::stringstream s;
  write_students(s, rows, cb);
  std::string text = s.str();

  auto reject = [&](const std::string &from, const std::string &to) {
    std::string t = text;
    const auto pos = t.rfind(from);
    REQUIRE(pos != std::string::npos);
    t.replace(pos, from.size(), to);
    std::stringstream in(t);
    CHECK_THROWS_AS(read_students(in, "students.csv", cb), DataError);
  };
  reject(",F,", ",Q,");
  reject("512.3", "-1");

  std::stringstream ok(text);
  CHECK_THROWS_AS(read_students(ok, "students.csv", cb, {2009, 2018}), DataError);
  try {
    std::string t = text;
    t.replace(t.rfind(",F,"), 3, ",Q,");
    std::stringstream in(t);
    read_students(in, "students.csv", cb);
  } catch (const DataError &e) {
    CHECK(std::string(e.what()).find("students.csv:2") != std::string::npos);
  }
}
