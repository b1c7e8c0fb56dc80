#pragma once

#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include "cluttermap/geo/detect.hpp"
#include "cluttermap/geo/inventory.hpp"

namespace cluttermap::geo {

// Drop reasons. Every dropped record carries exactly one; when several
// filters would fire, the first in this order wins (the kept set itself is
// filter-order independent because the predicates are independent).
inline constexpr const char* kReasonFetchFailed = "fetch-failed";
inline constexpr const char* kReasonInvalidImage = "invalid-image";
inline constexpr const char* kReasonLowDetail = "low-detail image";
inline constexpr const char* kReasonDetectorMismatch = "detector mismatch";
inline constexpr const char* kReasonClassCollision = "class collision";

enum class SampleStatus { Kept, Dropped, FetchFailed };

struct ManifestEntry {
  std::string id;
  std::string image_path;
  long long byte_size = 0;
  std::string fetch_timestamp;  // ISO-8601 UTC
  SampleStatus status = SampleStatus::Kept;
  std::string reason;  // empty iff kept
};

struct SampleManifest {
  std::vector<ManifestEntry> entries;

  ManifestEntry* find(const std::string& id) {
    for (auto& e : entries)
      if (e.id == id) return &e;
    return nullptr;
  }

  std::map<std::string, long long> drop_counts_by_reason() const {
    std::map<std::string, long long> counts;
    for (const auto& e : entries)
      if (e.status != SampleStatus::Kept) ++counts[e.reason];
    return counts;
  }

  long long kept_count() const {
    long long n = 0;
    for (const auto& e : entries) n += e.status == SampleStatus::Kept;
    return n;
  }
};

// ---------------------------------------------------------------------------
// The three cleaning predicates
// ---------------------------------------------------------------------------

// (2) file size below threshold -> low-detail image.
inline bool passes_file_size(long long byte_size,
                             long long threshold_bytes = 184320) {
  return byte_size >= threshold_bytes;
}

inline void filter_file_size(SampleManifest& manifest,
                             long long threshold_bytes = 184320) {
  for (auto& e : manifest.entries) {
    if (e.status != SampleStatus::Kept) continue;
    if (!passes_file_size(e.byte_size, threshold_bytes)) {
      e.status = SampleStatus::Dropped;
      e.reason = kReasonLowDetail;
    }
  }
}

// (1) detector/label consistency over the center window. The window is the
// axis-aligned window_side x window_side box centered in the image (offset
// floor((side - window)/2)), closed on its boundary; "tree present" means any
// detection with score >= score_threshold intersects it.
inline bool tree_present_in_center(const std::vector<DetectionBox>& detections,
                                   int image_side = 640, int window_side = 75,
                                   double score_threshold = 0.3) {
  const double w0 = (image_side - window_side) / 2;
  const double w1 = w0 + window_side - 1;
  for (const auto& box : detections) {
    if (box.score < score_threshold) continue;
    if (box.xmin <= w1 && box.xmax >= w0 && box.ymin <= w1 && box.ymax >= w0)
      return true;
  }
  return false;
}

// keep = label and detector agree about a tree in the center window.
inline bool filter_tree_consistency(const InventoryRecord& record,
                                    const std::vector<DetectionBox>& detections,
                                    int image_side = 640, int window_side = 75,
                                    double score_threshold = 0.3) {
  const bool tree = tree_present_in_center(detections, image_side, window_side,
                                           score_threshold);
  const bool labeled_tree = to_coarse(record.label) == CoarseLabel::Tree;
  return tree == labeled_tree;
}

// (3) multiple classes at the same location: every pair of records with
// distinct labels within radius_m is dropped, both sides.
inline std::unordered_set<std::string> colocated_drops(
    const Inventory& inventory, double radius_m = 2.0) {
  std::unordered_set<std::string> drops;
  if (inventory.records.empty()) return drops;
  std::vector<GeoPoint> pts;
  pts.reserve(inventory.records.size());
  for (const auto& r : inventory.records) pts.push_back(r.point);
  const EquirectProjector proj(centroid(pts));
  std::vector<PlanarPoint> planar(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) planar[i] = proj.to_planar(pts[i]);
  // Coarse grid of radius-sized cells keeps the pair scan near-linear.
  const double cell = std::max(radius_m, 1e-9);
  std::map<std::pair<long long, long long>, std::vector<std::size_t>> grid;
  auto cell_of = [&](PlanarPoint p) {
    return std::make_pair(static_cast<long long>(std::floor(p.x / cell)),
                          static_cast<long long>(std::floor(p.y / cell)));
  };
  for (std::size_t i = 0; i < planar.size(); ++i)
    grid[cell_of(planar[i])].push_back(i);
  for (std::size_t i = 0; i < planar.size(); ++i) {
    const auto [cx, cy] = cell_of(planar[i]);
    for (long long dx = -1; dx <= 1; ++dx) {
      for (long long dy = -1; dy <= 1; ++dy) {
        const auto it = grid.find({cx + dx, cy + dy});
        if (it == grid.end()) continue;
        for (std::size_t j : it->second) {
          if (j <= i) continue;
          if (inventory.records[i].label == inventory.records[j].label) continue;
          if (planar_distance(planar[i], planar[j]) <= radius_m) {
            drops.insert(inventory.records[i].id);
            drops.insert(inventory.records[j].id);
          }
        }
      }
    }
  }
  return drops;
}

inline void filter_colocated(const Inventory& inventory,
                             SampleManifest& manifest, double radius_m = 2.0) {
  const auto drops = colocated_drops(inventory, radius_m);
  for (auto& e : manifest.entries) {
    if (e.status != SampleStatus::Kept) continue;
    if (drops.count(e.id)) {
      e.status = SampleStatus::Dropped;
      e.reason = kReasonClassCollision;
    }
  }
}

// ---------------------------------------------------------------------------
// Combined cleaning pass
// ---------------------------------------------------------------------------

struct CleaningConfig {
  long long file_size_threshold_bytes = 184320;  // 180 KB
  double detector_score_threshold = 0.3;
  int center_window_side = 75;
  int image_side = 640;
  double colocation_radius_m = 2.0;
};

// Applies all three filters; reason priority is fixed (size, detector,
// co-location) but the kept set does not depend on the order.
inline void clean_manifest(
    const Inventory& inventory, SampleManifest& manifest,
    const std::map<std::string, std::vector<DetectionBox>>& detections_by_id,
    const CleaningConfig& config = {}) {
  const auto collisions = colocated_drops(inventory, config.colocation_radius_m);
  for (const auto& record : inventory.records) {
    ManifestEntry* entry = manifest.find(record.id);
    if (entry == nullptr || entry->status == SampleStatus::FetchFailed) continue;
    if (entry->status == SampleStatus::Dropped) continue;
    if (!passes_file_size(entry->byte_size, config.file_size_threshold_bytes)) {
      entry->status = SampleStatus::Dropped;
      entry->reason = kReasonLowDetail;
      continue;
    }
    const auto it = detections_by_id.find(record.id);
    static const std::vector<DetectionBox> kNone;
    const auto& boxes = it == detections_by_id.end() ? kNone : it->second;
    if (!filter_tree_consistency(record, boxes, config.image_side,
                                 config.center_window_side,
                                 config.detector_score_threshold)) {
      entry->status = SampleStatus::Dropped;
      entry->reason = kReasonDetectorMismatch;
      continue;
    }
    if (collisions.count(record.id)) {
      entry->status = SampleStatus::Dropped;
      entry->reason = kReasonClassCollision;
    }
  }
}

// ---------------------------------------------------------------------------
// Manifest CSV: id,image_path,byte_size,fetch_timestamp,status,reason
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& manifest_csv_header() {
  static const std::vector<std::string> header{
      "id", "image_path", "byte_size", "fetch_timestamp", "status", "reason"};
  return header;
}

inline std::string status_name(SampleStatus s) {
  switch (s) {
    case SampleStatus::Kept: return "kept";
    case SampleStatus::Dropped: return "dropped";
    case SampleStatus::FetchFailed: return "fetch-failed";
  }
  return "?";
}

inline SampleStatus parse_status(const std::string& s, std::size_t line) {
  if (s == "kept") return SampleStatus::Kept;
  if (s == "dropped") return SampleStatus::Dropped;
  if (s == "fetch-failed") return SampleStatus::FetchFailed;
  fail("line ", line, ": unknown manifest status '", s, "'");
}

inline void write_manifest(const SampleManifest& manifest,
                           const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries)
    rows.push_back({e.id, e.image_path, std::to_string(e.byte_size),
                    e.fetch_timestamp, status_name(e.status), e.reason});
  io::write_csv(path, manifest_csv_header(), rows);
}

inline SampleManifest read_manifest(const std::string& path) {
  const auto table = io::read_csv(path, manifest_csv_header());
  SampleManifest manifest;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    ManifestEntry e;
    e.id = row[0];
    e.image_path = row[1];
    e.byte_size = std::stoll(row[2]);
    e.fetch_timestamp = row[3];
    e.status = parse_status(row[4], table.line_numbers[i]);
    e.reason = row[5];
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

}  // namespace cluttermap::geo
