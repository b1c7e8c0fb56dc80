#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cluttermap/eval/kmeans.hpp"
#include "cluttermap/geo/provider.hpp"
#include "cluttermap/image.hpp"
#include "cluttermap/net/config.hpp"

namespace cluttermap::eval {

// The four model kinds the pipeline trains.
enum class ModelKind { Stage1, Stage2Tree, Stage2Building, SingleStage };

inline std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Stage1: return "stage1";
    case ModelKind::Stage2Tree: return "stage2_tree";
    case ModelKind::Stage2Building: return "stage2_building";
    case ModelKind::SingleStage: return "single_stage";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "stage1") return ModelKind::Stage1;
  if (s == "stage2_tree") return ModelKind::Stage2Tree;
  if (s == "stage2_building") return ModelKind::Stage2Building;
  if (s == "single_stage") return ModelKind::SingleStage;
  fail("unknown model kind '", std::string(s),
       "' (expected stage1|stage2_tree|stage2_building|single_stage)");
}

// Class index within the kind's label set (0-based, spec tie-break order), or
// nothing when the sample does not belong to this kind's subset.
inline std::optional<int> target_for(ModelKind kind, ClutterLabel label) {
  switch (kind) {
    case ModelKind::Stage1:
      return static_cast<int>(to_coarse(label));
    case ModelKind::Stage2Tree:
      if (label == ClutterLabel::Deciduous) return 0;
      if (label == ClutterLabel::Coniferous) return 1;
      return std::nullopt;
    case ModelKind::Stage2Building:
      if (label == ClutterLabel::Residential) return 0;
      if (label == ClutterLabel::NonResidential) return 1;
      return std::nullopt;
    case ModelKind::SingleStage:
      return static_cast<int>(label);
  }
  return std::nullopt;
}

inline int num_classes(ModelKind kind) {
  switch (kind) {
    case ModelKind::Stage1: return 3;
    case ModelKind::Stage2Tree:
    case ModelKind::Stage2Building: return 2;
    case ModelKind::SingleStage: return 5;
  }
  return 0;
}

inline bool uses_sigmoid(ModelKind kind) {
  return kind == ModelKind::Stage2Tree || kind == ModelKind::Stage2Building;
}

inline std::string class_name(ModelKind kind, int index) {
  switch (kind) {
    case ModelKind::Stage1:
      return std::string(label_name(static_cast<CoarseLabel>(index)));
    case ModelKind::Stage2Tree:
      return std::string(
          label_name(index == 0 ? ClutterLabel::Deciduous : ClutterLabel::Coniferous));
    case ModelKind::Stage2Building:
      return std::string(label_name(index == 0 ? ClutterLabel::Residential
                                               : ClutterLabel::NonResidential));
    case ModelKind::SingleStage:
      return std::string(label_name(static_cast<ClutterLabel>(index)));
  }
  return "?";
}

// Architecture for a kind: the shared default trunk with the head swapped.
inline net::NetConfig config_for(ModelKind kind, int input_side = 112) {
  net::NetConfig config = net::default_stage1_config();
  config.input_side = input_side;
  if (uses_sigmoid(kind)) config.head = net::SigmoidHead{};
  else config.head = net::SoftmaxHead{num_classes(kind)};
  return config;
}

// ---------------------------------------------------------------------------
// In-memory dataset: records aligned with preprocessed (center-cropped)
// patches. Planar coordinates are derived once about the dataset centroid.
// ---------------------------------------------------------------------------

struct LabeledPatchSet {
  int input_side = 112;
  std::vector<geo::InventoryRecord> records;
  std::vector<ImagePatch> patches;

  std::size_t size() const { return records.size(); }

  void validate() const {
    require(records.size() == patches.size(),
            "records and patches must be aligned");
    for (const auto& p : patches)
      require(p.width == input_side && p.height == input_side,
              "every patch must be ", input_side, "x", input_side);
  }

  std::vector<geo::PlanarPoint> planar_coordinates() const {
    std::vector<geo::GeoPoint> pts;
    pts.reserve(records.size());
    for (const auto& r : records) pts.push_back(r.point);
    const geo::EquirectProjector proj(geo::centroid(pts));
    std::vector<geo::PlanarPoint> out(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) out[i] = proj.to_planar(pts[i]);
    return out;
  }
};

struct AssembleResult {
  LabeledPatchSet set;
  std::vector<std::string> skipped;  // id: reason
};

// Fetch + center-crop every record of a (cleaned) inventory into memory.
inline AssembleResult assemble_patch_set(const geo::Inventory& inventory,
                                         geo::ImageProvider& provider,
                                         int input_side = 112,
                                         int expected_side = 640,
                                         int parallelism = 2) {
  AssembleResult result;
  result.set.input_side = input_side;
  std::vector<std::optional<ImagePatch>> fetched(inventory.records.size());
  std::vector<std::string> errors(inventory.records.size());
  ThreadPool pool(parallelism);
  pool.parallel_for(0, static_cast<int>(inventory.records.size()), [&](int i) {
    const auto& record = inventory.records[static_cast<std::size_t>(i)];
    auto out = geo::fetch_image(record, provider, expected_side);
    if (out.status == geo::FetchOutcome::Status::Ok) {
      fetched[static_cast<std::size_t>(i)] = center_crop(out.image, input_side);
    } else {
      errors[static_cast<std::size_t>(i)] = out.error;
    }
  });
  for (std::size_t i = 0; i < inventory.records.size(); ++i) {
    if (fetched[i].has_value()) {
      result.set.records.push_back(inventory.records[i]);
      result.set.patches.push_back(std::move(*fetched[i]));
    } else {
      result.skipped.push_back(inventory.records[i].id + ": " + errors[i]);
    }
  }
  return result;
}

// One augmented training item: a sample index and a D4 transform.
struct TrainItem {
  std::size_t sample;
  int transform;  // 0..7
};

// Every sample under all eight symmetries, in a fixed order.
inline std::vector<TrainItem> augmented_items(
    const std::vector<std::size_t>& sample_indices) {
  std::vector<TrainItem> items;
  items.reserve(sample_indices.size() * kNumD4Transforms);
  for (std::size_t s : sample_indices)
    for (int k = 0; k < kNumD4Transforms; ++k) items.push_back({s, k});
  return items;
}

// Assembles a normalized NxCxHxW batch, applying each item's transform.
template <typename T>
Tensor<T> assemble_batch(const LabeledPatchSet& data,
                         std::span<const TrainItem> items, ThreadPool& pool) {
  const int side = data.input_side;
  Tensor<T> batch({static_cast<int>(items.size()), 3, side, side});
  const std::size_t stride = static_cast<std::size_t>(3) * side * side;
  pool.parallel_for(0, static_cast<int>(items.size()), [&](int i) {
    const auto& item = items[static_cast<std::size_t>(i)];
    d4_normalize_into(data.patches[item.sample], item.transform,
                      batch.data.data() + static_cast<std::size_t>(i) * stride);
  });
  return batch;
}

}  // namespace cluttermap::eval
