#pragma once

#include <deque>
#include <string>
#include <vector>

#include "cluttermap/image.hpp"
#include "cluttermap/io/csv.hpp"

namespace cluttermap::geo {

// Axis-aligned tree detection in pixel coordinates, top-left origin. Boxes
// are closed regions: [xmin,xmax] x [ymin,ymax].
struct DetectionBox {
  std::string image_id;
  double xmin = 0, ymin = 0, xmax = 0, ymax = 0;
  double score = 0.0;

  void validate(int image_side = 640) const {
    require(xmin < xmax && ymin < ymax, "detection box for ", image_id,
            " has inverted extents");
    require(xmin >= 0 && ymin >= 0 && xmax < image_side && ymax < image_side,
            "detection box for ", image_id, " exceeds the ", image_side, "x",
            image_side, " image");
    require(score >= 0.0 && score <= 1.0, "detection score out of [0,1]");
  }
};

inline const std::vector<std::string>& detections_csv_header() {
  static const std::vector<std::string> header{"image_id", "xmin", "ymin",
                                               "xmax",     "ymax", "score"};
  return header;
}

inline void write_detections(const std::vector<DetectionBox>& boxes,
                             const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(boxes.size());
  for (const auto& b : boxes) {
    rows.push_back({b.image_id, io::format_double(b.xmin), io::format_double(b.ymin),
                    io::format_double(b.xmax), io::format_double(b.ymax),
                    io::format_double(b.score)});
  }
  io::write_csv(path, detections_csv_header(), rows);
}

inline std::vector<DetectionBox> read_detections(const std::string& path,
                                                 int image_side = 640) {
  const auto table = io::read_csv(path, detections_csv_header());
  std::vector<DetectionBox> boxes;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::size_t line = table.line_numbers[i];
    DetectionBox b;
    b.image_id = row[0];
    b.xmin = io::parse_double(row[1], "xmin", line);
    b.ymin = io::parse_double(row[2], "ymin", line);
    b.xmax = io::parse_double(row[3], "xmax", line);
    b.ymax = io::parse_double(row[4], "ymax", line);
    b.score = io::parse_double(row[5], "score", line);
    try {
      b.validate(image_side);
    } catch (const Error& e) {
      fail(path, " line ", line, ": ", e.what());
    }
    boxes.push_back(std::move(b));
  }
  return boxes;
}

// Pluggable detector interface. Production runs consume precomputed boxes
// from an external crown detector; the greenness stub below exists so the
// cleaning filters can be exercised without one.
class TreeDetector {
public:
  virtual ~TreeDetector() = default;
  virtual std::vector<DetectionBox> detect(const std::string& image_id,
                                           const ImagePatch& image) = 0;
};

// Boxes read from a detection CSV, grouped by image id.
class PrecomputedDetector : public TreeDetector {
public:
  explicit PrecomputedDetector(std::vector<DetectionBox> boxes) {
    for (auto& b : boxes) by_image_[b.image_id].push_back(std::move(b));
  }

  std::vector<DetectionBox> detect(const std::string& image_id,
                                   const ImagePatch&) override {
    const auto it = by_image_.find(image_id);
    return it == by_image_.end() ? std::vector<DetectionBox>{} : it->second;
  }

private:
  std::map<std::string, std::vector<DetectionBox>> by_image_;
};

// Deterministic stub: thresholded-greenness connected components. A pixel is
// "green" when its G channel dominates R and B by `margin`; 4-connected
// components larger than min_area become boxes scored by their fill ratio.
class GreennessDetector : public TreeDetector {
public:
  GreennessDetector(int margin = 20, int min_green = 60, int min_area = 64)
      : margin_(margin), min_green_(min_green), min_area_(min_area) {}

  std::vector<DetectionBox> detect(const std::string& image_id,
                                   const ImagePatch& img) override {
    const int w = img.width, h = img.height;
    std::vector<std::uint8_t> green(static_cast<std::size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int r = img.at(x, y, 0), g = img.at(x, y, 1), b = img.at(x, y, 2);
        green[static_cast<std::size_t>(y) * w + x] =
            g >= min_green_ && g >= r + margin_ && g >= b + margin_;
      }
    std::vector<std::uint8_t> seen(green.size(), 0);
    std::vector<DetectionBox> boxes;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t start = static_cast<std::size_t>(y) * w + x;
        if (!green[start] || seen[start]) continue;
        int x0 = x, x1 = x, y0 = y, y1 = y;
        long long count = 0;
        std::deque<std::pair<int, int>> queue{{x, y}};
        seen[start] = 1;
        while (!queue.empty()) {
          const auto [cx, cy] = queue.front();
          queue.pop_front();
          ++count;
          x0 = std::min(x0, cx); x1 = std::max(x1, cx);
          y0 = std::min(y0, cy); y1 = std::max(y1, cy);
          const int nx[4] = {cx - 1, cx + 1, cx, cx};
          const int ny[4] = {cy, cy, cy - 1, cy + 1};
          for (int k = 0; k < 4; ++k) {
            if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) continue;
            const std::size_t idx = static_cast<std::size_t>(ny[k]) * w + nx[k];
            if (green[idx] && !seen[idx]) {
              seen[idx] = 1;
              queue.emplace_back(nx[k], ny[k]);
            }
          }
        }
        if (count < min_area_) continue;
        DetectionBox box;
        box.image_id = image_id;
        box.xmin = x0; box.ymin = y0; box.xmax = x1; box.ymax = y1;
        const double box_area =
            static_cast<double>(x1 - x0 + 1) * (y1 - y0 + 1);
        box.score = std::min(1.0, static_cast<double>(count) / box_area);
        boxes.push_back(box);
      }
    }
    return boxes;
  }

private:
  int margin_;
  int min_green_;
  int min_area_;
};

}  // namespace cluttermap::geo
