#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cluttermap/eval/pipeline.hpp"
#include "cluttermap/geo/provider.hpp"
#include "cluttermap/io/image_codec.hpp"

namespace cluttermap::eval {

inline constexpr std::uint8_t kRasterUnknown = 255;

// Georeferenced class raster. Origin is the north-west corner; rows advance
// south, columns east, pixel_size_m meters per cell.
struct LabeledRaster {
  geo::GeoPoint origin;
  double pixel_size_m = 1.0;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> cells;  // label index, or kRasterUnknown

  std::uint8_t& at(int col, int row) {
    return cells[static_cast<std::size_t>(row) * width + col];
  }
  std::uint8_t at(int col, int row) const {
    return cells[static_cast<std::size_t>(row) * width + col];
  }
};

inline const std::vector<io::PaletteEntry>& raster_palette() {
  static const std::vector<io::PaletteEntry> palette = [] {
    std::vector<io::PaletteEntry> p(256, {0, 0, 0});  // unknown and unused: black
    p[0] = {0, 100, 0};      // deciduous: dark green
    p[1] = {144, 238, 144};  // coniferous: light green
    p[2] = {255, 165, 0};    // residential: orange
    p[3] = {255, 0, 0};      // non-residential: red
    p[4] = {128, 128, 128};  // other: gray
    return p;
  }();
  return palette;
}

inline nlohmann::json raster_legend() {
  nlohmann::json legend;
  for (ClutterLabel l : all_clutter_labels)
    legend[std::to_string(static_cast<int>(l))] = label_name(l);
  legend[std::to_string(kRasterUnknown)] = "unknown";
  return legend;
}

// Classifies a grid of sample points over the bounding box. Cells whose fetch
// fails carry the reserved unknown value, never a fabricated label.
inline LabeledRaster classify_grid(geo::GeoPoint corner_a, geo::GeoPoint corner_b,
                                   double pixel_size_m, EnsembleModel& ensemble,
                                   geo::ImageProvider& provider,
                                   int expected_side = 640,
                                   int fetch_parallelism = 4) {
  corner_a.validate();
  corner_b.validate();
  require(pixel_size_m > 0, "pixel size must be positive");
  const double lat_min = std::min(corner_a.lat, corner_b.lat);
  const double lat_max = std::max(corner_a.lat, corner_b.lat);
  const double lon_min = std::min(corner_a.lon, corner_b.lon);
  const double lon_max = std::max(corner_a.lon, corner_b.lon);
  require(lat_min < lat_max && lon_min < lon_max,
          "bounding box has zero area");

  const geo::EquirectProjector proj(
      {(lat_min + lat_max) / 2, (lon_min + lon_max) / 2});
  const auto sw = proj.to_planar({lat_min, lon_min});
  const auto ne = proj.to_planar({lat_max, lon_max});

  LabeledRaster raster;
  raster.pixel_size_m = pixel_size_m;
  raster.origin = {lat_max, lon_min};  // north-west corner
  raster.width = static_cast<int>(std::ceil((ne.x - sw.x) / pixel_size_m));
  raster.height = static_cast<int>(std::ceil((ne.y - sw.y) / pixel_size_m));
  raster.cells.assign(static_cast<std::size_t>(raster.width) * raster.height,
                      kRasterUnknown);

  const int crop_side = ensemble.input_side();
  const std::size_t cell_count = raster.cells.size();
  std::vector<std::optional<ImagePatch>> patches(cell_count);

  // Fetch phase (parallel, provider rate limits apply), then batched
  // classification through the single ensemble instance.
  ThreadPool fetch_pool(fetch_parallelism);
  fetch_pool.parallel_for(0, static_cast<int>(cell_count), [&](int idx) {
    const int row = idx / raster.width;
    const int col = idx % raster.width;
    const geo::PlanarPoint center{sw.x + (col + 0.5) * pixel_size_m,
                                  ne.y - (row + 0.5) * pixel_size_m};
    geo::InventoryRecord cell;
    cell.id = "cell_" + std::to_string(row) + "_" + std::to_string(col);
    cell.point = proj.from_planar(center);
    auto out = geo::fetch_image(cell, provider, expected_side);
    if (out.status == geo::FetchOutcome::Status::Ok)
      patches[static_cast<std::size_t>(idx)] = center_crop(out.image, crop_side);
  });
  for (std::size_t idx = 0; idx < cell_count; ++idx) {
    if (!patches[idx].has_value()) continue;
    raster.cells[idx] =
        static_cast<std::uint8_t>(ensemble.classify(*patches[idx]));
  }
  return raster;
}

// Indexed-color PNG plus a JSON georeferencing sidecar.
inline void save_raster(const LabeledRaster& raster, const std::string& png_path,
                        const std::string& sidecar_path) {
  io::write_indexed_png(png_path, raster.width, raster.height, raster.cells,
                        raster_palette());
  nlohmann::json sidecar{{"origin_lat", raster.origin.lat},
                         {"origin_lon", raster.origin.lon},
                         {"pixel_size_m", raster.pixel_size_m},
                         {"width", raster.width},
                         {"height", raster.height},
                         {"legend", raster_legend()}};
  const std::string tmp = sidecar_path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    require(out.good(), "cannot write sidecar ", tmp);
    out << sidecar.dump(2) << "\n";
  }
  std::filesystem::rename(tmp, sidecar_path);
}

inline LabeledRaster load_raster_sidecar(const std::string& sidecar_path) {
  std::ifstream in(sidecar_path);
  require(in.good(), "cannot open sidecar ", sidecar_path);
  nlohmann::json j;
  in >> j;
  LabeledRaster raster;
  raster.origin = {j.at("origin_lat").get<double>(),
                   j.at("origin_lon").get<double>()};
  raster.pixel_size_m = j.at("pixel_size_m").get<double>();
  raster.width = j.at("width").get<int>();
  raster.height = j.at("height").get<int>();
  return raster;
}

}  // namespace cluttermap::eval
