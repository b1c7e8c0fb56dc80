#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "cluttermap/core/error.hpp"

namespace cluttermap::geo {

inline constexpr double kEarthRadiusM = 6371000.0;

struct GeoPoint {
  double lat = 0.0;  // WGS84 degrees
  double lon = 0.0;

  void validate() const {
    require(std::abs(lat) <= 90.0, "latitude out of range: ", lat);
    require(std::abs(lon) <= 180.0, "longitude out of range: ", lon);
  }
};

struct PlanarPoint {
  double x = 0.0;  // meters east of origin
  double y = 0.0;  // meters north of origin
};

// Equirectangular projection about a fixed origin. City-scale extents keep
// the distortion well under 1%.
class EquirectProjector {
public:
  explicit EquirectProjector(GeoPoint origin) : origin_(origin) {
    origin.validate();
    cos_lat0_ = std::cos(origin.lat * std::numbers::pi / 180.0);
  }

  GeoPoint origin() const { return origin_; }

  PlanarPoint to_planar(GeoPoint p) const {
    const double dlat = (p.lat - origin_.lat) * std::numbers::pi / 180.0;
    const double dlon = (p.lon - origin_.lon) * std::numbers::pi / 180.0;
    return {kEarthRadiusM * dlon * cos_lat0_, kEarthRadiusM * dlat};
  }

  GeoPoint from_planar(PlanarPoint p) const {
    const double dlat = p.y / kEarthRadiusM;
    const double dlon = p.x / (kEarthRadiusM * cos_lat0_);
    return {origin_.lat + dlat * 180.0 / std::numbers::pi,
            origin_.lon + dlon * 180.0 / std::numbers::pi};
  }

private:
  GeoPoint origin_;
  double cos_lat0_;
};

inline double planar_distance(PlanarPoint a, PlanarPoint b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Local-meter distance between two geographic points, projected about their
// midpoint.
inline double distance_m(GeoPoint a, GeoPoint b) {
  EquirectProjector proj({(a.lat + b.lat) / 2.0, (a.lon + b.lon) / 2.0});
  return planar_distance(proj.to_planar(a), proj.to_planar(b));
}

inline GeoPoint centroid(const std::vector<GeoPoint>& points) {
  require(!points.empty(), "centroid of empty point set");
  double lat = 0, lon = 0;
  for (const auto& p : points) {
    lat += p.lat;
    lon += p.lon;
  }
  return {lat / static_cast<double>(points.size()),
          lon / static_cast<double>(points.size())};
}

}  // namespace cluttermap::geo
