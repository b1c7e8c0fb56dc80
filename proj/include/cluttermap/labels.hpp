#pragma once

#include <array>
#include <string>
#include <string_view>

#include "cluttermap/core/error.hpp"

namespace cluttermap {

// The five fine clutter classes. The listed order is the tie-breaking order
// everywhere a deterministic choice between equal candidates is needed.
enum class ClutterLabel : int {
  Deciduous = 0,
  Coniferous = 1,
  Residential = 2,
  NonResidential = 3,
  Other = 4,
};

inline constexpr int kNumClutterLabels = 5;

inline constexpr std::array<ClutterLabel, kNumClutterLabels> all_clutter_labels{
    ClutterLabel::Deciduous, ClutterLabel::Coniferous, ClutterLabel::Residential,
    ClutterLabel::NonResidential, ClutterLabel::Other};

// Stage-1 classes.
enum class CoarseLabel : int {
  Tree = 0,
  Building = 1,
  Other = 2,
};

inline constexpr int kNumCoarseLabels = 3;

inline constexpr CoarseLabel to_coarse(ClutterLabel label) {
  switch (label) {
    case ClutterLabel::Deciduous:
    case ClutterLabel::Coniferous:
      return CoarseLabel::Tree;
    case ClutterLabel::Residential:
    case ClutterLabel::NonResidential:
      return CoarseLabel::Building;
    case ClutterLabel::Other:
      return CoarseLabel::Other;
  }
  return CoarseLabel::Other;
}

inline std::string_view label_name(ClutterLabel label) {
  switch (label) {
    case ClutterLabel::Deciduous: return "deciduous";
    case ClutterLabel::Coniferous: return "coniferous";
    case ClutterLabel::Residential: return "residential";
    case ClutterLabel::NonResidential: return "non_residential";
    case ClutterLabel::Other: return "other";
  }
  return "?";
}

inline std::string_view label_name(CoarseLabel label) {
  switch (label) {
    case CoarseLabel::Tree: return "tree";
    case CoarseLabel::Building: return "building";
    case CoarseLabel::Other: return "other";
  }
  return "?";
}

inline ClutterLabel parse_clutter_label(std::string_view s) {
  for (ClutterLabel l : all_clutter_labels)
    if (s == label_name(l)) return l;
  fail("unknown clutter label '", std::string(s),
       "' (expected deciduous|coniferous|residential|non_residential|other)");
}

}  // namespace cluttermap
