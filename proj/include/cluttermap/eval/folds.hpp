#pragma once

#include <string>
#include <vector>

#include "cluttermap/eval/kmeans.hpp"

namespace cluttermap::eval {

// One cross-validation fold: one cluster as the geographically independent
// test set, the remainder shuffled and split 80/20 into train/validation.
struct FoldPlan {
  int fold_index = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> test_indices;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
  double test_fraction = 0.0;
  bool fraction_in_observed_band = true;  // the 10-30% band is advisory
};

struct FoldPlanSet {
  std::vector<FoldPlan> folds;
  std::vector<std::string> warnings;
};

inline FoldPlanSet make_folds(const ClusterAssignment& assignment,
                              std::uint64_t seed,
                              double validation_fraction = 0.2) {
  const std::size_t n = assignment.assignment.size();
  require(n > 0, "cannot fold an empty dataset");
  require(validation_fraction > 0 && validation_fraction < 1,
          "validation fraction must be in (0,1)");
  FoldPlanSet out;
  const auto members = assignment.members();
  for (int fold = 0; fold < assignment.k; ++fold) {
    FoldPlan plan;
    plan.fold_index = fold;
    plan.seed = derive_seed(seed, "fold/" + std::to_string(fold));
    plan.test_indices = members[static_cast<std::size_t>(fold)];
    require(plan.test_indices.size() < n, "fold ", fold,
            ": test cluster equals the whole dataset");
    if (plan.test_indices.empty()) {
      out.warnings.push_back("fold " + std::to_string(fold) +
                             ": empty test cluster, fold skipped");
      continue;
    }
    std::vector<std::size_t> rest;
    rest.reserve(n - plan.test_indices.size());
    for (std::size_t i = 0; i < n; ++i)
      if (assignment.assignment[i] != fold) rest.push_back(i);
    Rng rng(plan.seed);
    rng.shuffle(rest);
    const auto val_count = static_cast<std::size_t>(
        std::llround(validation_fraction * static_cast<double>(rest.size())));
    plan.val_indices.assign(rest.begin(),
                            rest.begin() + static_cast<std::ptrdiff_t>(val_count));
    plan.train_indices.assign(rest.begin() + static_cast<std::ptrdiff_t>(val_count),
                              rest.end());
    plan.test_fraction =
        static_cast<double>(plan.test_indices.size()) / static_cast<double>(n);
    plan.fraction_in_observed_band =
        plan.test_fraction >= 0.1 && plan.test_fraction <= 0.3;
    if (!plan.fraction_in_observed_band) {
      out.warnings.push_back(
          "fold " + std::to_string(fold) + ": test fraction " +
          std::to_string(plan.test_fraction) +
          " outside the typically observed 10-30% band");
    }
    out.folds.push_back(std::move(plan));
  }
  return out;
}

}  // namespace cluttermap::eval
