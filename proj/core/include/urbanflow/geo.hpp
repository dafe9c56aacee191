#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace urbanflow::geo {

inline constexpr double kEarthRadiusKm = 6371.0;

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

inline void validate_coords(double lat, double lon) {
  if (!(lat >= -90.0 && lat <= 90.0))
    throw std::invalid_argument("latitude out of range [-90,90]: " + std::to_string(lat));
  if (!(lon >= -180.0 && lon <= 180.0))
    throw std::invalid_argument("longitude out of range [-180,180]: " + std::to_string(lon));
}

/// Grid cell identifier: coordinates clipped to two decimals, stored as
/// integer centi-degrees so cell ids hash and compare exactly.
struct CellId {
  int lat_c = 0;  // truncated lat * 100
  int lon_c = 0;  // truncated lon * 100

  friend bool operator==(const CellId&, const CellId&) = default;
  friend auto operator<=>(const CellId&, const CellId&) = default;

  double lat() const { return lat_c / 100.0; }
  double lon() const { return lon_c / 100.0; }

  /// Center of the square this id covers. Truncation toward zero means a
  /// negative cell covers (v-0.01, v] and a positive one [v, v+0.01); the
  /// zero cell straddles the origin and its center is the origin itself.
  LatLon center() const {
    auto half = [](int c) {
      if (c > 0) return c / 100.0 + 0.005;
      if (c < 0) return c / 100.0 - 0.005;
      return 0.0;
    };
    return {half(lat_c), half(lon_c)};
  }
};

struct CellIdHash {
  std::size_t operator()(const CellId& c) const {
    return std::hash<std::int64_t>()((std::int64_t(c.lat_c) << 32) ^ std::uint32_t(c.lon_c));
  }
};

namespace detail {
// Truncate a coordinate toward zero at two decimals. A small nudge away
// from zero absorbs binary representation error (4.35 stores as
// 434.99999999999994 * 1e-2 and must still clip to 4.35).
inline int clip_centi(double v) {
  const double scaled = v * 100.0;
  return static_cast<int>(std::trunc(scaled + std::copysign(1e-6, scaled)));
}
}  // namespace detail

/// Clip (lat, lon) to the two-decimal grid, truncating toward zero.
inline CellId snap_to_grid(double lat, double lon) {
  validate_coords(lat, lon);
  return {detail::clip_centi(lat), detail::clip_centi(lon)};
}

inline CellId snap_to_grid(const LatLon& p) { return snap_to_grid(p.lat, p.lon); }

/// Great-circle distance in kilometers (haversine, mean Earth radius 6371 km).
inline double haversine_km(const LatLon& a, const LatLon& b) {
  validate_coords(a.lat, a.lon);
  validate_coords(b.lat, b.lon);
  constexpr double deg = M_PI / 180.0;
  const double dlat = (b.lat - a.lat) * deg;
  const double dlon = (b.lon - a.lon) * deg;
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  const double h = s1 * s1 + std::cos(a.lat * deg) * std::cos(b.lat * deg) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

/// Closed ring of vertices. Callers may pass the ring with or without the
/// repeated closing vertex; both forms describe the same polygon.
using Ring = std::vector<LatLon>;

namespace detail {
inline bool on_segment(const LatLon& p, const LatLon& a, const LatLon& b) {
  const double cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
  if (std::abs(cross) > 1e-12) return false;
  const double dot = (p.lon - a.lon) * (b.lon - a.lon) + (p.lat - a.lat) * (b.lat - a.lat);
  const double len2 = (b.lon - a.lon) * (b.lon - a.lon) + (b.lat - a.lat) * (b.lat - a.lat);
  return dot >= -1e-12 && dot <= len2 + 1e-12;
}

inline std::size_t distinct_vertex_count(const Ring& ring) {
  std::size_t n = ring.size();
  if (n > 1 && std::abs(ring.front().lat - ring.back().lat) < 1e-12 &&
      std::abs(ring.front().lon - ring.back().lon) < 1e-12)
    --n;  // drop the repeated closing vertex
  return n;
}
}  // namespace detail

/// Even-odd ray-casting containment test. Points exactly on an edge count
/// as inside. Throws on rings with fewer than 3 distinct vertices.
inline bool point_in_polygon(const LatLon& pt, const Ring& ring) {
  const std::size_t n = detail::distinct_vertex_count(ring);
  if (n < 3) throw std::invalid_argument("point_in_polygon: ring has fewer than 3 distinct vertices");

  for (std::size_t i = 0; i < n; ++i) {
    if (detail::on_segment(pt, ring[i], ring[(i + 1) % n])) return true;
  }

  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const LatLon& a = ring[i];
    const LatLon& b = ring[j];
    const bool straddles = (a.lat > pt.lat) != (b.lat > pt.lat);
    if (straddles) {
      const double x = (b.lon - a.lon) * (pt.lat - a.lat) / (b.lat - a.lat) + a.lon;
      if (pt.lon < x) inside = !inside;
    }
  }
  return inside;
}

struct BoundingBox {
  double min_lat = 0, max_lat = 0, min_lon = 0, max_lon = 0;
  bool contains(const LatLon& p) const {
    return p.lat >= min_lat && p.lat <= max_lat && p.lon >= min_lon && p.lon <= max_lon;
  }
};

inline BoundingBox bounding_box(const Ring& ring) {
  if (ring.empty()) throw std::invalid_argument("bounding_box: empty ring");
  BoundingBox bb{ring[0].lat, ring[0].lat, ring[0].lon, ring[0].lon};
  for (const auto& p : ring) {
    bb.min_lat = std::min(bb.min_lat, p.lat);
    bb.max_lat = std::max(bb.max_lat, p.lat);
    bb.min_lon = std::min(bb.min_lon, p.lon);
    bb.max_lon = std::max(bb.max_lon, p.lon);
  }
  return bb;
}

/// Arithmetic centroid of the distinct ring vertices.
inline LatLon ring_centroid(const Ring& ring) {
  const std::size_t n = detail::distinct_vertex_count(ring);
  if (n == 0) throw std::invalid_argument("ring_centroid: empty ring");
  LatLon c{0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    c.lat += ring[i].lat;
    c.lon += ring[i].lon;
  }
  c.lat /= double(n);
  c.lon /= double(n);
  return c;
}

}  // namespace urbanflow::geo
