#include "evstudy/errors.hpp"
#include "evstudy/geo.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace evstudy;
using namespace evstudy::geo;

namespace {

Centroid at(const std::string &id, double lat, double lon,
            const std::string &state = "S1") {
  return {id, state, lat, lon};
}

// Point on the equator `km` east of (0, 0).
Centroid east(const std::string &id, double km) {
  return at(id, 0.0, km / kEarthRadiusKm * 180.0 / std::numbers::pi);
}

} // namespace

TEST_CASE("haversine: half great circle and one degree") {
  const double half = std::numbers::pi * 6371.0088;
  CHECK(std::abs(haversine_km(at("a", 0, 0), at("b", 0, 180)) - half) <= 0.01);
  CHECK(std::abs(haversine_km(at("a", 90, 0), at("b", -90, 0)) - half) <= 0.01);
  CHECK(std::abs(haversine_km(at("a", 0, -90), at("b", 0, 90)) - half) <= 1e-6);
  CHECK(haversine_km(at("a", 0, 0), at("b", 0, 1)) ==
        doctest::Approx(kEarthRadiusKm * std::numbers::pi / 180.0));
  CHECK(haversine_km(at("a", -15.8, -47.9), at("a", -15.8, -47.9)) == 0.0);
}

TEST_CASE("haversine: symmetric") {
  const auto a = at("a", -23.5, -46.6);
  const auto b = at("b", -22.9, -43.2);
  CHECK(haversine_km(a, b) == haversine_km(b, a));
}

TEST_CASE("classify: thresholds belong to the inner class") {
  const Radii r;
  const double eps = 1e-9;
  CHECK(buffer_label(classify(0.0, true, r), r) == "host");
  CHECK(buffer_label(classify(3.0, false, r), r) == "le10");
  CHECK(buffer_label(classify(10.0, false, r), r) == "le10");
  CHECK(buffer_label(classify(10.0 + eps, false, r), r) == "le25");
  CHECK(buffer_label(classify(25.0, false, r), r) == "le25");
  CHECK(buffer_label(classify(25.0 + eps, false, r), r) == "ring25_50");
  CHECK(buffer_label(classify(50.0, false, r), r) == "ring25_50");
  CHECK(buffer_label(classify(50.0 + eps, false, r), r) == "outside");
  CHECK(buffer_label(classify(10.0 - eps, false, r), r) == "le10");
}

TEST_CASE("buffer labels round-trip and rank outward") {
  const Radii r;
  int last = -1;
  for (const char *label : {"host", "le10", "le25", "ring25_50", "outside"}) {
    const auto slot = parse_buffer_label(label, r);
    CHECK(buffer_label(slot, r) == label);
    CHECK(buffer_rank(slot) > last);
    last = buffer_rank(slot);
  }
  CHECK_THROWS_AS(parse_buffer_label("le30", r), DataError);
}

TEST_CASE("radii validation") {
  CHECK_THROWS_AS(Radii{{10.0}}.validate(), ConfigError);
  CHECK_THROWS_AS((Radii{{10.0, 10.0}}.validate()), ConfigError);
  CHECK_NOTHROW((Radii{{5.0, 20.0, 40.0}}.validate()));
}

TEST_CASE("centroid validation") {
  CHECK_THROWS_AS(validate(at("x", 91, 0)), DataError);
  CHECK_THROWS_AS(validate(at("x", 0, -181)), DataError);
  CHECK_THROWS_AS(validate(at("x", NAN, 0)), DataError);
  CHECK_NOTHROW(validate(at("x", -90, 180)));
}

TEST_CASE("assign_events: nearest event and buffer") {
  std::vector<Centroid> c{east("A", 0), east("B", 8), east("C", 20),
                          east("D", 30), east("E", 70), east("F", 1000),
                          east("G", 1070)};
  std::vector<OpeningEvent> e{{"A", "S1", 2009}, {"F", "S1", 2011}};
  const auto map = assign_events(c, e);
  CHECK(map.at("A").buffer.cls == BufferClass::Host);
  CHECK(map.at("A").distance_km == 0.0);
  CHECK(map.at("B").event_municipality_id == "A");
  CHECK(buffer_label(map.at("B").buffer, map.radii()) == "le10");
  CHECK(buffer_label(map.at("C").buffer, map.radii()) == "le25");
  CHECK(map.at("D").in_ring());
  CHECK(map.at("E").buffer.cls == BufferClass::Outside);
  CHECK(map.at("G").event_municipality_id == "F");
  CHECK(map.at("G").opening_year == 2011);
  CHECK(map.at("C").in_analysis_sample());
  CHECK_FALSE(map.at("D").in_analysis_sample());
  CHECK(map.at("B").distance_km == doctest::Approx(8.0));
}

TEST_CASE("assign_events: ties go to the smallest event id, input order irrelevant") {
  std::vector<Centroid> c{east("M", 50), east("Z", 100), east("A", 0)};
  std::vector<OpeningEvent> e1{{"Z", "S1", 2010}, {"A", "S1", 2009}};
  std::vector<OpeningEvent> e2{{"A", "S1", 2009}, {"Z", "S1", 2010}};
  const auto m1 = assign_events(c, e1);
  const auto m2 = assign_events({c[2], c[0], c[1]}, e2);
  CHECK(m1.at("M").event_municipality_id == "A");
  CHECK(m2.at("M").event_municipality_id == "A");
  REQUIRE(m1.rows().size() == m2.rows().size());
  for (std::size_t i = 0; i < m1.rows().size(); ++i) {
    CHECK(m1.rows()[i].municipality_id == m2.rows()[i].municipality_id);
    CHECK(m1.rows()[i].distance_km == m2.rows()[i].distance_km);
  }
}

TEST_CASE("assign_events: overlap inside the smallest radius is an error") {
  std::vector<Centroid> c{east("A", 0), east("B", 12), east("C", 6)};
  std::vector<OpeningEvent> e{{"A", "S1", 2009}, {"B", "S1", 2010}};
  CHECK_THROWS_AS(assign_events(c, e), OverlapError);
}

TEST_CASE("assign_events: input errors") {
  std::vector<Centroid> c{east("A", 0), east("B", 5)};
  CHECK_THROWS_AS(assign_events(c, {{"Q", "S1", 2009}}), DataError);
  CHECK_THROWS_AS(assign_events(c, {}), DataError);
  CHECK_THROWS_AS(assign_events({east("A", 0), east("A", 1)}, {{"A", "S1", 2009}}),
                  DataError);
}

TEST_CASE("csv round trip for centroids, events, event map") {
  std::vector<Centroid> c{east("A", 0), east("B", 8), east("C", 30)};
  std::vector<OpeningEvent> e{{"A", "S1", 2009}};
  std::stringstream cs, es;
  write_centroids(cs, c);
  write_events(es, e);
  const auto c2 = read_centroids(cs, "centroids.csv");
  const auto e2 = read_events(es, "events.csv");
  REQUIRE(c2.size() == 3);
  CHECK(c2[1].lon == c[1].lon);
  CHECK(e2[0].opening_year == 2009);

  const auto map = assign_events(c2, e2);
  std::stringstream ms;
  write_eventmap(ms, map);
  CHECK(ms.str().rfind("municipality_id,event_municipality_id,distance_km,buffer_class,opening_year", 0) == 0);
  const auto map2 = read_eventmap(ms, "eventmap.csv", c2);
  CHECK(map2.at("C").in_ring());
  CHECK(map2.at("B").distance_km == map.at("B").distance_km);
}

TEST_CASE("csv readers reject bad input with context") {
  std::stringstream bad("municipality_id,state_id,lat,lon\nA,S1,95,0\n");
  CHECK_THROWS_AS(read_centroids(bad, "c.csv"), DataError);
  std::stringstream missing("municipality_id,lat,lon\nA,1,2\n");
  CHECK_THROWS_AS(read_centroids(missing, "c.csv"), DataError);
  std::stringstream years("municipality_id,state_id,opening_year\nA,S1,1990\n");
  CHECK_THROWS_AS(read_events(years, "e.csv", YearRange{2004, 2018}), DataError);
  try {
    std::stringstream s("municipality_id,state_id,lat,lon\nA,S1,x,0\n");
    read_centroids(s, "c.csv");
    FAIL("expected DataError");
  } catch (const DataError &err) {
    CHECK(std::string(err.what()).find("c.csv") != std::string::npos);
  }
}
