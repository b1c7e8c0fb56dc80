#pragma once

#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cluttermap/geo/geo.hpp"
#include "cluttermap/geo/inventory.hpp"

namespace cluttermap::geo {

// Typed building footprint in planar meters. First ring is the outer
// boundary, the rest are holes.
struct BuildingPolygon {
  std::vector<std::vector<PlanarPoint>> rings;
  std::string building_type;
  ClutterLabel label = ClutterLabel::Residential;
  double area = 0.0;
  std::size_t feature_index = 0;
};

namespace detail {

inline double ring_area(const std::vector<PlanarPoint>& ring) {
  double a = 0;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i)
    a += ring[i].x * ring[i + 1].y - ring[i + 1].x * ring[i].y;
  return a / 2.0;
}

// Even-odd rule across every ring, so holes punch out naturally.
inline bool point_in_rings(const std::vector<std::vector<PlanarPoint>>& rings,
                           PlanarPoint p) {
  bool inside = false;
  for (const auto& ring : rings) {
    for (std::size_t i = 0, j = ring.size() - 2; i + 1 < ring.size(); j = i++) {
      const auto& a = ring[i];
      const auto& b = ring[j];
      if ((a.y > p.y) != (b.y > p.y)) {
        const double x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
        if (p.x < x_cross) inside = !inside;
      }
    }
  }
  return inside;
}

inline double point_segment_distance(PlanarPoint p, PlanarPoint a,
                                     PlanarPoint b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

inline double point_polygon_distance(const BuildingPolygon& poly,
                                     PlanarPoint p) {
  if (point_in_rings(poly.rings, p)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& ring : poly.rings)
    for (std::size_t i = 0; i + 1 < ring.size(); ++i)
      best = std::min(best, point_segment_distance(p, ring[i], ring[i + 1]));
  return best;
}

}  // namespace detail

struct PolygonParseResult {
  std::vector<BuildingPolygon> polygons;
  // One diagnostic per rejected feature; parsing continues past bad features.
  std::vector<std::string> feature_errors;
};

// Reads a GeoJSON FeatureCollection of Polygon/MultiPolygon features carrying
// a `building_type` property. Coordinates are [lon, lat] per GeoJSON.
inline PolygonParseResult parse_building_polygons(
    const nlohmann::json& geojson, const BuildingTypeMap& type_map,
    const EquirectProjector& proj) {
  require(geojson.value("type", "") == "FeatureCollection",
          "building polygons must be a GeoJSON FeatureCollection");
  PolygonParseResult result;
  const auto& features = geojson.at("features");
  for (std::size_t fi = 0; fi < features.size(); ++fi) {
    const auto& feature = features[fi];
    auto reject = [&](const std::string& why) {
      result.feature_errors.push_back("feature " + std::to_string(fi) + ": " + why);
    };
    // An unmapped building-type string is a hard error, never a silent
    // default; geometry defects only reject their own feature.
    require(feature.contains("properties") &&
                feature.at("properties").contains("building_type"),
            "feature ", fi, ": missing building_type property");
    const std::string type =
        feature.at("properties").at("building_type").get<std::string>();
    const ClutterLabel label = type_map.lookup(type);
    try {
      const auto& geom = feature.at("geometry");
      const std::string gtype = geom.value("type", "");
      std::vector<nlohmann::json> polygon_coord_sets;
      if (gtype == "Polygon") {
        polygon_coord_sets.push_back(geom.at("coordinates"));
      } else if (gtype == "MultiPolygon") {
        for (const auto& c : geom.at("coordinates"))
          polygon_coord_sets.push_back(c);
      } else {
        fail("unsupported geometry type '", gtype, "'");
      }
      for (const auto& coord_set : polygon_coord_sets) {
        BuildingPolygon poly;
        poly.building_type = type;
        poly.label = label;
        poly.feature_index = fi;
        for (const auto& ring_json : coord_set) {
          std::vector<PlanarPoint> ring;
          for (const auto& pos : ring_json) {
            require(pos.is_array() && pos.size() >= 2, "bad coordinate");
            GeoPoint gp{pos[1].get<double>(), pos[0].get<double>()};
            gp.validate();
            ring.push_back(proj.to_planar(gp));
          }
          require(ring.size() >= 4, "ring has ", ring.size(),
                  " positions; a closed ring needs at least 4");
          require(ring.front().x == ring.back().x &&
                      ring.front().y == ring.back().y,
                  "ring is not closed");
          poly.rings.push_back(std::move(ring));
        }
        require(!poly.rings.empty(), "polygon has no rings");
        poly.area = std::abs(detail::ring_area(poly.rings[0]));
        for (std::size_t r = 1; r < poly.rings.size(); ++r)
          poly.area -= std::abs(detail::ring_area(poly.rings[r]));
        result.polygons.push_back(std::move(poly));
      }
    } catch (const std::exception& e) {
      reject(e.what());
    }
  }
  return result;
}

struct SpatialJoinResult {
  std::vector<InventoryRecord> labeled;
  std::vector<InventoryRecord> review;  // no polygon within max_distance
};

// Each building point takes the type of the polygon containing it (smallest
// area wins when polygons overlap), else the nearest polygon within
// max_distance meters; otherwise it goes to review.
inline SpatialJoinResult spatial_join_buildings(
    const std::vector<InventoryRecord>& building_points,
    const std::vector<BuildingPolygon>& polygons,
    const EquirectProjector& proj, double max_distance_m) {
  SpatialJoinResult result;
  for (const auto& rec : building_points) {
    const PlanarPoint p = proj.to_planar(rec.point);
    const BuildingPolygon* containing = nullptr;
    for (const auto& poly : polygons) {
      if (!detail::point_in_rings(poly.rings, p)) continue;
      if (!containing || poly.area < containing->area) containing = &poly;
    }
    const BuildingPolygon* chosen = containing;
    if (!chosen) {
      double best = max_distance_m;
      for (const auto& poly : polygons) {
        const double d = detail::point_polygon_distance(poly, p);
        if (d <= best && (!chosen || d < best)) {
          best = d;
          chosen = &poly;
        }
      }
    }
    if (chosen) {
      InventoryRecord out = rec;
      out.label = chosen->label;
      out.raw_attributes["building_type"] = chosen->building_type;
      result.labeled.push_back(std::move(out));
    } else {
      result.review.push_back(rec);
    }
  }
  return result;
}

}  // namespace cluttermap::geo
