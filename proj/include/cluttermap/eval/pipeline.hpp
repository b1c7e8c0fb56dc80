#pragma once

#include <array>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "cluttermap/eval/dataset.hpp"
#include "cluttermap/net/checkpoint.hpp"

namespace cluttermap::eval {

// Record of a two-stage decision: stage-1 probabilities, the routed stage-2
// probabilities (absent when stage 1 said Other), and the final label.
struct StageTrace {
  std::array<double, kNumCoarseLabels> stage1_probs{};
  CoarseLabel stage1_label = CoarseLabel::Other;
  std::optional<std::array<double, 2>> stage2_probs;
  ClutterLabel final_label = ClutterLabel::Other;
  double confidence = 0.0;  // probability along the taken route
};

// Stage-1 router plus the two specialist binary classifiers. The output's
// coarse class always equals the stage-1 decision.
class TwoStagePipeline {
public:
  TwoStagePipeline(const net::Checkpoint& stage1, const net::Checkpoint& tree,
                   const net::Checkpoint& building)
      : stage1_(stage1), tree_(tree), building_(building) {
    require(std::holds_alternative<net::SoftmaxHead>(stage1.config.head) &&
                stage1.config.head_outputs() == 3,
            "stage-1 checkpoint must carry a 3-class softmax head");
    require(std::holds_alternative<net::SigmoidHead>(tree.config.head),
            "tree stage-2 checkpoint must carry a sigmoid head");
    require(std::holds_alternative<net::SigmoidHead>(building.config.head),
            "building stage-2 checkpoint must carry a sigmoid head");
  }

  int input_side() const { return stage1_.config().input_side; }

  StageTrace classify(const ImagePatch& patch) {
    const auto p1 = stage1_.predict(patch);
    StageTrace trace;
    for (int c = 0; c < kNumCoarseLabels; ++c)
      trace.stage1_probs[static_cast<std::size_t>(c)] = p1[static_cast<std::size_t>(c)];
    trace.stage1_label = static_cast<CoarseLabel>(net::argmax_index(p1));
    switch (trace.stage1_label) {
      case CoarseLabel::Other:
        // Returns immediately; stage 2 is never invoked.
        trace.final_label = ClutterLabel::Other;
        trace.confidence = trace.stage1_probs[2];
        break;
      case CoarseLabel::Tree: {
        const auto p2 = tree_.predict(patch);
        trace.stage2_probs = {p2[0], p2[1]};
        const bool first = p2[0] >= 0.5;
        trace.final_label =
            first ? ClutterLabel::Deciduous : ClutterLabel::Coniferous;
        trace.confidence = trace.stage1_probs[0] * (first ? p2[0] : p2[1]);
        break;
      }
      case CoarseLabel::Building: {
        const auto p2 = building_.predict(patch);
        trace.stage2_probs = {p2[0], p2[1]};
        const bool first = p2[0] >= 0.5;
        trace.final_label =
            first ? ClutterLabel::Residential : ClutterLabel::NonResidential;
        trace.confidence = trace.stage1_probs[1] * (first ? p2[0] : p2[1]);
        break;
      }
    }
    return trace;
  }

  net::Predictor<float>& stage1() { return stage1_; }
  net::Predictor<float>& tree() { return tree_; }
  net::Predictor<float>& building() { return building_; }

private:
  net::Predictor<float> stage1_, tree_, building_;
};

// ---------------------------------------------------------------------------
// Ensemble majority vote
// ---------------------------------------------------------------------------

struct VoteRecord {
  int label = 0;        // index into the label set being voted on
  double confidence = 0.0;
};

// Mode of the votes. Ties break by highest mean confidence among each tied
// label's voters, then by lowest label index; the result is invariant under
// any permutation of the voters.
inline int majority_vote(const std::vector<VoteRecord>& votes, int num_labels) {
  require(!votes.empty(), "majority vote over an empty ensemble");
  std::vector<long long> counts(static_cast<std::size_t>(num_labels), 0);
  std::vector<double> confidence_sum(static_cast<std::size_t>(num_labels), 0.0);
  for (const auto& v : votes) {
    require(v.label >= 0 && v.label < num_labels, "vote label out of range");
    ++counts[static_cast<std::size_t>(v.label)];
    confidence_sum[static_cast<std::size_t>(v.label)] += v.confidence;
  }
  int best = -1;
  for (int l = 0; l < num_labels; ++l) {
    const auto i = static_cast<std::size_t>(l);
    if (counts[i] == 0) continue;
    if (best < 0) {
      best = l;
      continue;
    }
    const auto b = static_cast<std::size_t>(best);
    if (counts[i] > counts[b]) {
      best = l;
    } else if (counts[i] == counts[b]) {
      const double mean_i = confidence_sum[i] / static_cast<double>(counts[i]);
      const double mean_b = confidence_sum[b] / static_cast<double>(counts[b]);
      if (mean_i > mean_b) best = l;  // equal means keep the lower index
    }
  }
  return best;
}

// k fold-trained two-stage pipelines (or k single-stage models) voting on
// final five-class labels.
class EnsembleModel {
public:
  static EnsembleModel from_two_stage(std::vector<TwoStagePipeline> members) {
    require(!members.empty(), "ensemble needs at least one member");
    EnsembleModel m;
    m.two_stage_ = std::move(members);
    return m;
  }

  static EnsembleModel from_single_stage(std::vector<net::Predictor<float>> members) {
    require(!members.empty(), "ensemble needs at least one member");
    for (auto& p : members)
      require(std::holds_alternative<net::SoftmaxHead>(p.config().head) &&
                  p.config().head_outputs() == kNumClutterLabels,
              "single-stage members must carry a 5-class softmax head");
    EnsembleModel m;
    m.single_stage_ = std::move(members);
    return m;
  }

  bool is_two_stage() const { return !two_stage_.empty(); }
  std::size_t size() const {
    return is_two_stage() ? two_stage_.size() : single_stage_.size();
  }
  std::vector<TwoStagePipeline>& two_stage_members() { return two_stage_; }
  std::vector<net::Predictor<float>>& single_stage_members() {
    return single_stage_;
  }

  int input_side() {
    return is_two_stage() ? two_stage_[0].input_side()
                          : single_stage_[0].config().input_side;
  }

  ClutterLabel classify(const ImagePatch& patch) {
    std::vector<VoteRecord> votes;
    votes.reserve(size());
    if (is_two_stage()) {
      for (auto& member : two_stage_) {
        const auto trace = member.classify(patch);
        votes.push_back({static_cast<int>(trace.final_label), trace.confidence});
      }
    } else {
      for (auto& member : single_stage_) {
        const auto probs = member.predict(patch);
        const int label = net::argmax_index(probs);
        votes.push_back({label, probs[static_cast<std::size_t>(label)]});
      }
    }
    return static_cast<ClutterLabel>(majority_vote(votes, kNumClutterLabels));
  }

private:
  std::vector<TwoStagePipeline> two_stage_;
  std::vector<net::Predictor<float>> single_stage_;
};

}  // namespace cluttermap::eval
