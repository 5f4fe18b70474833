#include "evstudy/geo.hpp"

#include "evstudy/csv.hpp"
#include "evstudy/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace evstudy::geo {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

std::string radius_text(double km) { return csv::format_double(km); }

} // namespace

void validate(const Centroid &c) {
  if (!std::isfinite(c.lat) || !std::isfinite(c.lon) || c.lat < -90.0 ||
      c.lat > 90.0 || c.lon < -180.0 || c.lon > 180.0) {
    throw DataError("centroid '" + c.municipality_id +
                    "' has out-of-range coordinates (lat=" +
                    csv::format_double(c.lat) +
                    ", lon=" + csv::format_double(c.lon) + ")");
  }
}

double haversine_km(const Centroid &a, const Centroid &b) {
  validate(a);
  validate(b);
  const double phi1 = a.lat * kDegToRad;
  const double phi2 = b.lat * kDegToRad;
  const double dphi = (b.lat - a.lat) * kDegToRad;
  const double dlambda = (b.lon - a.lon) * kDegToRad;
  const double s_phi = std::sin(dphi / 2.0);
  const double s_lambda = std::sin(dlambda / 2.0);
  double h = s_phi * s_phi + std::cos(phi1) * std::cos(phi2) * s_lambda * s_lambda;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

void Radii::validate() const {
  if (km.size() < 2) {
    throw ConfigError("buffer radii need at least two thresholds (analysis "
                      "radius and placebo ring)");
  }
  for (std::size_t i = 0; i < km.size(); ++i) {
    if (!(km[i] > 0.0) || !std::isfinite(km[i])) {
      throw ConfigError("buffer radii must be positive and finite");
    }
    if (i > 0 && !(km[i] > km[i - 1])) {
      throw ConfigError("buffer radii must be strictly increasing");
    }
  }
}

BufferSlot classify(double distance_km, bool is_host, const Radii &radii) {
  if (is_host) {
    return {BufferClass::Host, 0};
  }
  const std::size_t n = radii.km.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (distance_km <= radii.km[i]) {
      return {BufferClass::Within, i};
    }
  }
  if (distance_km <= radii.km[n - 1]) {
    return {BufferClass::Ring, n - 1};
  }
  return {BufferClass::Outside, n};
}

std::string buffer_label(const BufferSlot &slot, const Radii &radii) {
  switch (slot.cls) {
  case BufferClass::Host:
    return "host";
  case BufferClass::Within:
    return "le" + radius_text(radii.km.at(slot.index));
  case BufferClass::Ring: {
    const std::size_t n = radii.km.size();
    return "ring" + radius_text(radii.km[n - 2]) + "_" +
           radius_text(radii.km[n - 1]);
  }
  case BufferClass::Outside:
    break;
  }
  return "outside";
}

BufferSlot parse_buffer_label(const std::string &label, const Radii &radii) {
  const std::size_t n = radii.km.size();
  std::vector<BufferSlot> all{{BufferClass::Host, 0}};
  for (std::size_t i = 0; i + 1 < n; ++i) {
    all.push_back({BufferClass::Within, i});
  }
  all.push_back({BufferClass::Ring, n - 1});
  all.push_back({BufferClass::Outside, n});
  for (const auto &slot : all) {
    if (buffer_label(slot, radii) == label) {
      return slot;
    }
  }
  throw DataError("unknown buffer class '" + label + "'");
}

int buffer_rank(const BufferSlot &slot) {
  switch (slot.cls) {
  case BufferClass::Host:
    return 0;
  case BufferClass::Within:
    return 1 + static_cast<int>(slot.index);
  case BufferClass::Ring:
  case BufferClass::Outside:
    return 1 + static_cast<int>(slot.index);
  }
  return 0;
}

EventMap::EventMap(std::vector<EventAssignment> rows, Radii radii)
    : rows_(std::move(rows)), radii_(std::move(radii)) {
  std::sort(rows_.begin(), rows_.end(), [](const auto &a, const auto &b) {
    return a.municipality_id < b.municipality_id;
  });
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (!index_.emplace(rows_[i].municipality_id, i).second) {
      throw DataError("event map lists municipality '" +
                      rows_[i].municipality_id + "' twice");
    }
  }
}

const EventAssignment *EventMap::find(const std::string &municipality_id) const {
  auto it = index_.find(municipality_id);
  return it == index_.end() ? nullptr : &rows_[it->second];
}

const EventAssignment &EventMap::at(const std::string &municipality_id) const {
  const auto *row = find(municipality_id);
  if (!row) {
    throw DataError("municipality '" + municipality_id +
                    "' has no entry in the event map");
  }
  return *row;
}

EventMap assign_events(const std::vector<Centroid> &centroids,
                       const std::vector<OpeningEvent> &events,
                       const Radii &radii) {
  radii.validate();
  if (events.empty()) {
    throw DataError("no opening events supplied");
  }

  std::vector<const Centroid *> muni;
  muni.reserve(centroids.size());
  std::unordered_map<std::string, const Centroid *> by_id;
  for (const auto &c : centroids) {
    validate(c);
    if (!by_id.emplace(c.municipality_id, &c).second) {
      throw DataError("duplicate centroid for municipality '" +
                      c.municipality_id + "'");
    }
    muni.push_back(&c);
  }

  // Events sorted by municipality id so the scan below breaks distance ties
  // toward the smallest id regardless of input order.
  std::vector<const OpeningEvent *> ev;
  std::set<std::string> seen;
  for (const auto &e : events) {
    if (!seen.insert(e.municipality_id).second) {
      throw DataError("more than one opening event for municipality '" +
                      e.municipality_id + "'");
    }
    if (!by_id.count(e.municipality_id)) {
      throw DataError("opening event municipality '" + e.municipality_id +
                      "' has no centroid");
    }
    ev.push_back(&e);
  }
  std::sort(ev.begin(), ev.end(), [](const auto *a, const auto *b) {
    return a->municipality_id < b->municipality_id;
  });

  const double overlap_radius = radii.km.front();
  std::vector<EventAssignment> rows;
  rows.reserve(muni.size());
  for (const Centroid *c : muni) {
    const OpeningEvent *best = nullptr;
    double best_d = 0.0;
    const OpeningEvent *close_event = nullptr;
    for (const OpeningEvent *e : ev) {
      const double d =
          (e->municipality_id == c->municipality_id)
              ? 0.0
              : haversine_km(*c, *by_id.at(e->municipality_id));
      if (!best || d < best_d) {
        best = e;
        best_d = d;
      }
      if (d <= overlap_radius) {
        if (close_event) {
          throw OverlapError("municipality '" + c->municipality_id +
                             "' lies within " + radius_text(overlap_radius) +
                             " km of two events ('" +
                             close_event->municipality_id + "' and '" +
                             e->municipality_id + "')");
        }
        close_event = e;
      }
    }
    const bool host = best->municipality_id == c->municipality_id;
    EventAssignment row;
    row.municipality_id = c->municipality_id;
    row.state_id = c->state_id;
    row.event_municipality_id = best->municipality_id;
    row.opening_year = best->opening_year;
    row.distance_km = host ? 0.0 : best_d;
    row.buffer = classify(row.distance_km, host, radii);
    rows.push_back(std::move(row));
  }
  return EventMap(std::move(rows), radii);
}

std::vector<Centroid> read_centroids(std::istream &in,
                                     const std::string &source) {
  csv::Reader r(in, source, {"municipality_id", "state_id", "lat", "lon"});
  const auto c_id = r.column("municipality_id");
  const auto c_state = r.column("state_id");
  const auto c_lat = r.column("lat");
  const auto c_lon = r.column("lon");
  std::vector<Centroid> out;
  while (r.next()) {
    Centroid c{r.field(c_id), r.field(c_state), r.to_double(c_lat),
               r.to_double(c_lon)};
    if (c.municipality_id.empty()) {
      throw DataError(source + ":" + std::to_string(r.line()) +
                      ": empty municipality_id");
    }
    validate(c);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<OpeningEvent> read_events(std::istream &in,
                                      const std::string &source,
                                      const YearRange &years) {
  csv::Reader r(in, source, {"municipality_id", "state_id", "opening_year"});
  const auto c_id = r.column("municipality_id");
  const auto c_state = r.column("state_id");
  const auto c_year = r.column("opening_year");
  std::vector<OpeningEvent> out;
  while (r.next()) {
    OpeningEvent e{r.field(c_id), r.field(c_state),
                   static_cast<int>(r.to_int(c_year))};
    if ((years.first && e.opening_year < *years.first) ||
        (years.last && e.opening_year > *years.last)) {
      throw DataError(source + ":" + std::to_string(r.line()) +
                      ": opening year " + std::to_string(e.opening_year) +
                      " outside the observation range");
    }
    out.push_back(std::move(e));
  }
  return out;
}

EventMap read_eventmap(std::istream &in, const std::string &source,
                       const std::vector<Centroid> &centroids,
                       const Radii &radii) {
  radii.validate();
  csv::Reader r(in, source,
                {"municipality_id", "event_municipality_id", "distance_km",
                 "buffer_class", "opening_year"});
  std::unordered_map<std::string, const Centroid *> by_id;
  for (const auto &c : centroids) {
    by_id.emplace(c.municipality_id, &c);
  }
  std::vector<EventAssignment> rows;
  while (r.next()) {
    EventAssignment a;
    a.municipality_id = r.field("municipality_id");
    a.event_municipality_id = r.field("event_municipality_id");
    a.distance_km = r.to_double(r.column("distance_km"));
    a.opening_year = static_cast<int>(r.to_int(r.column("opening_year")));
    a.buffer = parse_buffer_label(r.field("buffer_class"), radii);
    auto it = by_id.find(a.municipality_id);
    if (it == by_id.end()) {
      throw DataError(source + ":" + std::to_string(r.line()) +
                      ": municipality '" + a.municipality_id +
                      "' has no centroid");
    }
    a.state_id = it->second->state_id;
    const bool host = a.buffer.cls == BufferClass::Host;
    if (!(a.distance_km >= 0.0) || (host && a.distance_km != 0.0) ||
        buffer_label(classify(a.distance_km, host, radii), radii) !=
            buffer_label(a.buffer, radii)) {
      throw DataError(source + ":" + std::to_string(r.line()) +
                      ": buffer_class inconsistent with distance_km");
    }
    rows.push_back(std::move(a));
  }
  return EventMap(std::move(rows), radii);
}

void write_centroids(std::ostream &out, const std::vector<Centroid> &rows) {
  csv::write_row(out, {"municipality_id", "state_id", "lat", "lon"});
  for (const auto &c : rows) {
    csv::write_row(out, {c.municipality_id, c.state_id,
                         csv::format_double(c.lat), csv::format_double(c.lon)});
  }
}

void write_events(std::ostream &out, const std::vector<OpeningEvent> &rows) {
  csv::write_row(out, {"municipality_id", "state_id", "opening_year"});
  for (const auto &e : rows) {
    csv::write_row(out, {e.municipality_id, e.state_id,
                         std::to_string(e.opening_year)});
  }
}

void write_eventmap(std::ostream &out, const EventMap &map) {
  csv::write_row(out, {"municipality_id", "event_municipality_id",
                       "distance_km", "buffer_class", "opening_year"});
  for (const auto &a : map.rows()) {
    csv::write_row(out, {a.municipality_id, a.event_municipality_id,
                         csv::format_double(a.distance_km),
                         buffer_label(a.buffer, map.radii()),
                         std::to_string(a.opening_year)});
  }
}

} // namespace evstudy::geo
