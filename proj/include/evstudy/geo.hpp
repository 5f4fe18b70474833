#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

namespace evstudy::geo {

// Mean Earth radius (IUGG), used for all spherical distances.
inline constexpr double kEarthRadiusKm = 6371.0088;

struct Centroid {
  std::string municipality_id;
  std::string state_id;
  double lat = 0.0; // degrees, [-90, 90]
  double lon = 0.0; // degrees, [-180, 180]
};

struct OpeningEvent {
  std::string municipality_id;
  std::string state_id;
  int opening_year = 0;
};

// Ordered from nearest to farthest; `Ring` is the band between the last two
// radii and `Outside` lies beyond the largest radius.
enum class BufferClass { Host, Within, Ring, Outside };

// Throws DataError if lat/lon are out of range or non-finite.
void validate(const Centroid &c);

// Great-circle distance on a sphere of radius kEarthRadiusKm.
double haversine_km(const Centroid &a, const Centroid &b);

// Radii for buffer classification, strictly increasing, at least two values.
// The default matches the 10/25 km analysis buffers and the 25-50 km placebo
// ring.
struct Radii {
  std::vector<double> km{10.0, 25.0, 50.0};

  // Largest radius that still belongs to the analysis sample.
  double analysis_radius() const { return km[km.size() - 2]; }
  void validate() const;
};

// Buffer slot for a distance: 0 = host, i (1-based) = within km[i-1] for
// i < km.size(), km.size() = ring, km.size()+1 = outside. A distance exactly
// on a threshold belongs to the inner class.
struct BufferSlot {
  BufferClass cls = BufferClass::Outside;
  std::size_t index = 0; // radius index for Within; unused otherwise
};

BufferSlot classify(double distance_km, bool is_host, const Radii &radii);

// Stable text label: host, le10, le25, ring25_50, outside.
std::string buffer_label(const BufferSlot &slot, const Radii &radii);
// Inverse of buffer_label; throws DataError on unknown labels.
BufferSlot parse_buffer_label(const std::string &label, const Radii &radii);
// Ordinal used for monotonicity checks (0 = host, increasing outward).
int buffer_rank(const BufferSlot &slot);

struct EventAssignment {
  std::string municipality_id;
  std::string state_id;
  std::string event_municipality_id;
  int opening_year = 0;
  double distance_km = 0.0;
  BufferSlot buffer;

  bool in_analysis_sample() const {
    return buffer.cls == BufferClass::Host || buffer.cls == BufferClass::Within;
  }
  bool in_ring() const { return buffer.cls == BufferClass::Ring; }
};

class EventMap {
public:
  EventMap() = default;
  EventMap(std::vector<EventAssignment> rows, Radii radii);

  const std::vector<EventAssignment> &rows() const { return rows_; }
  const Radii &radii() const { return radii_; }
  const EventAssignment *find(const std::string &municipality_id) const;
  const EventAssignment &at(const std::string &municipality_id) const;

private:
  std::vector<EventAssignment> rows_; // sorted by municipality_id
  std::unordered_map<std::string, std::size_t> index_;
  Radii radii_;
};

// Maps every centroid to its nearest event. Ties in distance go to the event
// with the smallest municipality_id. Output is sorted by municipality_id and
// does not depend on input order. Throws OverlapError when a municipality
// lies within the smallest radius of two distinct events, and DataError when
// an event's municipality has no centroid or ids repeat.
EventMap assign_events(const std::vector<Centroid> &centroids,
                       const std::vector<OpeningEvent> &events,
                       const Radii &radii = {});

// Years allowed for opening events; unset bounds are not checked.
struct YearRange {
  std::optional<int> first;
  std::optional<int> last;
};

std::vector<Centroid> read_centroids(std::istream &in,
                                     const std::string &source);
std::vector<OpeningEvent> read_events(std::istream &in,
                                      const std::string &source,
                                      const YearRange &years = {});
EventMap read_eventmap(std::istream &in, const std::string &source,
                       const std::vector<Centroid> &centroids,
                       const Radii &radii = {});

void write_centroids(std::ostream &out, const std::vector<Centroid> &rows);
void write_events(std::ostream &out, const std::vector<OpeningEvent> &rows);
void write_eventmap(std::ostream &out, const EventMap &map);

} // namespace evstudy::geo
