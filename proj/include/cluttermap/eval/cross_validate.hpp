#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cluttermap/eval/folds.hpp"
#include "cluttermap/eval/pipeline.hpp"
#include "cluttermap/eval/train.hpp"
#include "cluttermap/stats/metrics.hpp"

namespace cluttermap::eval {

struct CvConfig {
  int k = 5;
  std::uint64_t seed = 1;
  int kmeans_max_iters = 100;
  Hyperparams hyperparams;
};

// (class name, model name) keys for the eleven per-stage rate rows.
using RateKey = std::pair<std::string, std::string>;

struct StageRate {
  double tpr = 0.0;
  long long n = 0;
};

struct PairedRecord {
  ClutterLabel truth = ClutterLabel::Other;
  ClutterLabel two_stage_label = ClutterLabel::Other;
  ClutterLabel single_label = ClutterLabel::Other;
  bool two_stage_correct = false;
  bool single_correct = false;
};

struct FoldResult {
  int fold_index = 0;
  long long test_count = 0;
  std::map<RateKey, StageRate> stage_rates;
  std::array<std::optional<StageRate>, kNumClutterLabels> two_stage_acc;
  std::array<std::optional<StageRate>, kNumClutterLabels> single_acc;
  std::vector<PairedRecord> paired;
  net::Checkpoint stage1, stage2_tree, stage2_building, single_stage;
  double test_fraction = 0.0;
};

struct CvResult {
  ClusterAssignment assignment;
  std::vector<FoldResult> folds;
  std::vector<std::string> warnings;
};

namespace detail {

// Batched per-model probabilities over a sample subset (no augmentation:
// test sets are never augmented).
struct ModelProbs {
  std::vector<std::array<double, 3>> stage1;
  std::vector<std::array<double, 2>> tree;
  std::vector<std::array<double, 2>> building;
  std::vector<std::array<double, 5>> single;
};

template <std::size_t N>
void fill_probs(net::Predictor<float>& predictor, const LabeledPatchSet& data,
                const std::vector<std::size_t>& indices,
                std::vector<std::array<double, N>>& out, ThreadPool& pool,
                int batch_size = 64) {
  out.resize(indices.size());
  std::vector<TrainItem> items;
  items.reserve(indices.size());
  for (std::size_t i : indices) items.push_back({i, 0});
  for (std::size_t start = 0; start < items.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t count =
        std::min(items.size() - start, static_cast<std::size_t>(batch_size));
    auto batch = assemble_batch<float>(
        data, std::span(items.data() + start, count), pool);
    auto probs = predictor.predict_batch(batch, pool);
    for (std::size_t i = 0; i < count; ++i) {
      require(probs[i].size() == N, "probability arity mismatch");
      for (std::size_t c = 0; c < N; ++c) out[start + i][c] = probs[i][c];
    }
  }
}

inline ClutterLabel route_two_stage(const std::array<double, 3>& p1,
                                    const std::array<double, 2>& tree,
                                    const std::array<double, 2>& building,
                                    double* confidence = nullptr) {
  int c1 = 0;
  for (int c = 1; c < 3; ++c)
    if (p1[static_cast<std::size_t>(c)] > p1[static_cast<std::size_t>(c1)]) c1 = c;
  switch (static_cast<CoarseLabel>(c1)) {
    case CoarseLabel::Tree: {
      const bool first = tree[0] >= 0.5;
      if (confidence) *confidence = p1[0] * (first ? tree[0] : tree[1]);
      return first ? ClutterLabel::Deciduous : ClutterLabel::Coniferous;
    }
    case CoarseLabel::Building: {
      const bool first = building[0] >= 0.5;
      if (confidence) *confidence = p1[1] * (first ? building[0] : building[1]);
      return first ? ClutterLabel::Residential : ClutterLabel::NonResidential;
    }
    case CoarseLabel::Other:
      break;
  }
  if (confidence) *confidence = p1[2];
  return ClutterLabel::Other;
}

inline int argmax5(const std::array<double, 5>& p) {
  int best = 0;
  for (int c = 1; c < 5; ++c)
    if (p[static_cast<std::size_t>(c)] > p[static_cast<std::size_t>(best)]) best = c;
  return best;
}

inline std::optional<StageRate> rate_over(
    const std::vector<std::size_t>& rows, const std::vector<bool>& correct) {
  if (rows.empty()) return std::nullopt;
  long long hit = 0;
  for (std::size_t r : rows) hit += correct[r];
  return StageRate{static_cast<double>(hit) / static_cast<double>(rows.size()),
                   static_cast<long long>(rows.size())};
}

}  // namespace detail

// Evaluates one fold's four models on its test cluster: the eleven Table-I
// style rate rows, per-class two-stage / single-stage accuracies (a sample is
// two-stage correct iff both stages are correct), and paired records.
inline void evaluate_fold(FoldResult& fold, const LabeledPatchSet& data,
                          const std::vector<std::size_t>& test, ThreadPool& pool) {
  detail::ModelProbs probs;
  {
    net::Predictor<float> p1(fold.stage1), pt(fold.stage2_tree),
        pb(fold.stage2_building), ps(fold.single_stage);
    detail::fill_probs(p1, data, test, probs.stage1, pool);
    detail::fill_probs(pt, data, test, probs.tree, pool);
    detail::fill_probs(pb, data, test, probs.building, pool);
    detail::fill_probs(ps, data, test, probs.single, pool);
  }
  const std::size_t n = test.size();
  fold.test_count = static_cast<long long>(n);

  std::vector<bool> stage1_correct(n), stage2_correct(n), two_correct(n),
      single_correct(n);
  std::vector<ClutterLabel> truth(n), two_label(n), single_label(n);
  for (std::size_t i = 0; i < n; ++i) {
    truth[i] = data.records[test[i]].label;
    const CoarseLabel coarse_truth = to_coarse(truth[i]);
    int c1 = 0;
    for (int c = 1; c < 3; ++c)
      if (probs.stage1[i][static_cast<std::size_t>(c)] >
          probs.stage1[i][static_cast<std::size_t>(c1)])
        c1 = c;
    stage1_correct[i] = static_cast<CoarseLabel>(c1) == coarse_truth;
    // Stage-2 correctness is scored by the true class's own specialist.
    switch (coarse_truth) {
      case CoarseLabel::Tree:
        stage2_correct[i] = (probs.tree[i][0] >= 0.5)
                                ? truth[i] == ClutterLabel::Deciduous
                                : truth[i] == ClutterLabel::Coniferous;
        break;
      case CoarseLabel::Building:
        stage2_correct[i] = (probs.building[i][0] >= 0.5)
                                ? truth[i] == ClutterLabel::Residential
                                : truth[i] == ClutterLabel::NonResidential;
        break;
      case CoarseLabel::Other:
        stage2_correct[i] = true;  // no second stage for Other
        break;
    }
    two_label[i] =
        detail::route_two_stage(probs.stage1[i], probs.tree[i], probs.building[i]);
    two_correct[i] = two_label[i] == truth[i];
    single_label[i] =
        static_cast<ClutterLabel>(detail::argmax5(probs.single[i]));
    single_correct[i] = single_label[i] == truth[i];
    fold.paired.push_back({truth[i], two_label[i], single_label[i],
                           two_correct[i], single_correct[i]});
  }

  // Row index sets.
  auto rows_of_coarse = [&](CoarseLabel c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i)
      if (to_coarse(truth[i]) == c) rows.push_back(i);
    return rows;
  };
  auto rows_of_fine = [&](ClutterLabel l) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i)
      if (truth[i] == l) rows.push_back(i);
    return rows;
  };

  auto put = [&](const std::string& cls, const std::string& model,
                 const std::optional<StageRate>& rate) {
    if (rate) fold.stage_rates[{cls, model}] = *rate;
  };
  for (CoarseLabel c : {CoarseLabel::Tree, CoarseLabel::Building, CoarseLabel::Other})
    put(std::string(label_name(c)), "stage1",
        detail::rate_over(rows_of_coarse(c), stage1_correct));
  for (ClutterLabel l : {ClutterLabel::Deciduous, ClutterLabel::Coniferous,
                         ClutterLabel::Residential, ClutterLabel::NonResidential})
    put(std::string(label_name(l)), "stage1",
        detail::rate_over(rows_of_fine(l), stage1_correct));
  for (ClutterLabel l : {ClutterLabel::Deciduous, ClutterLabel::Coniferous})
    put(std::string(label_name(l)), "tree",
        detail::rate_over(rows_of_fine(l), stage2_correct));
  for (ClutterLabel l : {ClutterLabel::Residential, ClutterLabel::NonResidential})
    put(std::string(label_name(l)), "building",
        detail::rate_over(rows_of_fine(l), stage2_correct));

  for (ClutterLabel l : all_clutter_labels) {
    const auto rows = rows_of_fine(l);
    fold.two_stage_acc[static_cast<std::size_t>(l)] =
        detail::rate_over(rows, two_correct);
    fold.single_acc[static_cast<std::size_t>(l)] =
        detail::rate_over(rows, single_correct);
  }
}

// Full protocol: k-means geographic clustering, one fold per cluster, four
// models per fold, evaluation on each fold's test cluster. Folds whose
// training data miss a required class are skipped with a warning.
inline CvResult cross_validate(const LabeledPatchSet& data, const CvConfig& config,
                               ThreadPool& pool) {
  data.validate();
  require(data.size() >= 2, "cross-validation needs at least two samples");
  CvResult result;
  result.assignment = kmeans_geo(data.planar_coordinates(), config.k,
                                 derive_seed(config.seed, "kmeans"),
                                 config.kmeans_max_iters);
  auto plans = make_folds(result.assignment, derive_seed(config.seed, "folds"));
  result.warnings = plans.warnings;
  for (const auto& plan : plans.folds) {
    FoldResult fold;
    fold.fold_index = plan.fold_index;
    fold.test_fraction = plan.test_fraction;
    const std::string tag = "fold/" + std::to_string(plan.fold_index) + "/";
    try {
      fold.stage1 = train_model(ModelKind::Stage1, data, plan.train_indices,
                                plan.val_indices, config.hyperparams,
                                derive_seed(config.seed, tag + "stage1"), pool)
                        .checkpoint;
      fold.stage2_tree =
          train_model(ModelKind::Stage2Tree, data, plan.train_indices,
                      plan.val_indices, config.hyperparams,
                      derive_seed(config.seed, tag + "stage2_tree"), pool)
              .checkpoint;
      fold.stage2_building =
          train_model(ModelKind::Stage2Building, data, plan.train_indices,
                      plan.val_indices, config.hyperparams,
                      derive_seed(config.seed, tag + "stage2_building"), pool)
              .checkpoint;
      fold.single_stage =
          train_model(ModelKind::SingleStage, data, plan.train_indices,
                      plan.val_indices, config.hyperparams,
                      derive_seed(config.seed, tag + "single_stage"), pool)
              .checkpoint;
    } catch (const Error& e) {
      result.warnings.push_back("fold " + std::to_string(plan.fold_index) +
                                " skipped: " + e.what());
      continue;
    }
    evaluate_fold(fold, data, plan.test_indices, pool);
    result.folds.push_back(std::move(fold));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Independent test of the fold ensemble (the paper's cross-city evaluation)
// ---------------------------------------------------------------------------

struct IndependentTestResult {
  std::map<RateKey, StageRate> stage_rates;  // Table III shape (ensemble, per stage)
  std::array<std::optional<StageRate>, kNumClutterLabels> two_stage_acc;
  std::array<std::optional<StageRate>, kNumClutterLabels> single_acc;
  std::array<std::optional<stats::TestResult>, kNumClutterLabels> mcnemar;
  std::array<stats::ContingencyTable, kNumClutterLabels> contingency;
  stats::F1Result two_stage_f1;
  stats::F1Result single_stage_f1;
  long long sample_count = 0;
};

// Per-sample majority votes, stage-wise for the Table III rows and on final
// labels for the Table IV comparison. Directions: the two-stage method is
// tested for improvement on every class except coniferous, where the
// alternative is reversed.
inline IndependentTestResult evaluate_independent(
    const LabeledPatchSet& data, std::vector<TwoStagePipeline>& two_stage,
    std::vector<net::Predictor<float>>& single_members, ThreadPool& pool,
    const std::array<stats::Direction, kNumClutterLabels>& directions = {
        stats::Direction::Greater, stats::Direction::Less,
        stats::Direction::Greater, stats::Direction::Greater,
        stats::Direction::Greater}) {
  data.validate();
  require(!two_stage.empty() && !single_members.empty(),
          "independent test needs both ensembles");
  const std::size_t n = data.size();
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;

  // Member-major batched inference.
  std::vector<detail::ModelProbs> member_probs(two_stage.size());
  for (std::size_t m = 0; m < two_stage.size(); ++m) {
    detail::fill_probs(two_stage[m].stage1(), data, all, member_probs[m].stage1, pool);
    detail::fill_probs(two_stage[m].tree(), data, all, member_probs[m].tree, pool);
    detail::fill_probs(two_stage[m].building(), data, all, member_probs[m].building, pool);
  }
  std::vector<std::vector<std::array<double, 5>>> single_probs(single_members.size());
  for (std::size_t m = 0; m < single_members.size(); ++m)
    detail::fill_probs(single_members[m], data, all, single_probs[m], pool);

  IndependentTestResult result;
  result.sample_count = static_cast<long long>(n);
  std::vector<ClutterLabel> truth(n);
  std::vector<bool> stage1_vote_correct(n), stage2_vote_correct(n);
  std::vector<bool> two_correct(n), single_correct(n);
  std::vector<int> two_label(n), single_label(n), truth_idx(n);

  for (std::size_t i = 0; i < n; ++i) {
    truth[i] = data.records[i].label;
    truth_idx[i] = static_cast<int>(truth[i]);
    const CoarseLabel coarse_truth = to_coarse(truth[i]);

    // Stage-1 ensemble: mode of the members' coarse decisions.
    std::vector<VoteRecord> v1;
    for (const auto& mp : member_probs) {
      int c1 = 0;
      for (int c = 1; c < 3; ++c)
        if (mp.stage1[i][static_cast<std::size_t>(c)] >
            mp.stage1[i][static_cast<std::size_t>(c1)])
          c1 = c;
      v1.push_back({c1, mp.stage1[i][static_cast<std::size_t>(c1)]});
    }
    const int stage1_vote = majority_vote(v1, kNumCoarseLabels);
    stage1_vote_correct[i] =
        static_cast<CoarseLabel>(stage1_vote) == coarse_truth;

    // Specialist ensemble for the true class's branch.
    if (coarse_truth != CoarseLabel::Other) {
      std::vector<VoteRecord> v2;
      for (const auto& mp : member_probs) {
        const auto& p = coarse_truth == CoarseLabel::Tree ? mp.tree[i]
                                                          : mp.building[i];
        const int idx = p[0] >= 0.5 ? 0 : 1;
        v2.push_back({idx, p[static_cast<std::size_t>(idx)]});
      }
      const int s2 = majority_vote(v2, 2);
      const bool truth_is_first = truth[i] == ClutterLabel::Deciduous ||
                                  truth[i] == ClutterLabel::Residential;
      stage2_vote_correct[i] = (s2 == 0) == truth_is_first;
    }

    // Final five-class votes.
    std::vector<VoteRecord> final_votes;
    for (const auto& mp : member_probs) {
      double confidence = 0;
      const ClutterLabel label = detail::route_two_stage(
          mp.stage1[i], mp.tree[i], mp.building[i], &confidence);
      final_votes.push_back({static_cast<int>(label), confidence});
    }
    two_label[i] = majority_vote(final_votes, kNumClutterLabels);
    two_correct[i] = two_label[i] == truth_idx[i];

    std::vector<VoteRecord> single_votes;
    for (const auto& sp : single_probs) {
      const int label = detail::argmax5(sp[i]);
      single_votes.push_back({label, sp[i][static_cast<std::size_t>(label)]});
    }
    single_label[i] = majority_vote(single_votes, kNumClutterLabels);
    single_correct[i] = single_label[i] == truth_idx[i];
  }

  auto rows_of_coarse = [&](CoarseLabel c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i)
      if (to_coarse(truth[i]) == c) rows.push_back(i);
    return rows;
  };
  auto rows_of_fine = [&](ClutterLabel l) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i)
      if (truth[i] == l) rows.push_back(i);
    return rows;
  };
  auto put = [&](const std::string& cls, const std::string& model,
                 const std::optional<StageRate>& rate) {
    if (rate) result.stage_rates[{cls, model}] = *rate;
  };
  for (CoarseLabel c : {CoarseLabel::Tree, CoarseLabel::Building, CoarseLabel::Other})
    put(std::string(label_name(c)), "stage1",
        detail::rate_over(rows_of_coarse(c), stage1_vote_correct));
  for (ClutterLabel l : {ClutterLabel::Deciduous, ClutterLabel::Coniferous,
                         ClutterLabel::Residential, ClutterLabel::NonResidential})
    put(std::string(label_name(l)), "stage1",
        detail::rate_over(rows_of_fine(l), stage1_vote_correct));
  for (ClutterLabel l : {ClutterLabel::Deciduous, ClutterLabel::Coniferous})
    put(std::string(label_name(l)), "tree",
        detail::rate_over(rows_of_fine(l), stage2_vote_correct));
  for (ClutterLabel l : {ClutterLabel::Residential, ClutterLabel::NonResidential})
    put(std::string(label_name(l)), "building",
        detail::rate_over(rows_of_fine(l), stage2_vote_correct));

  for (ClutterLabel l : all_clutter_labels) {
    const auto i = static_cast<std::size_t>(l);
    const auto rows = rows_of_fine(l);
    result.two_stage_acc[i] = detail::rate_over(rows, two_correct);
    result.single_acc[i] = detail::rate_over(rows, single_correct);
    if (!rows.empty()) {
      std::vector<bool> two_bits, one_bits;
      for (std::size_t r : rows) {
        two_bits.push_back(two_correct[r]);
        one_bits.push_back(single_correct[r]);
      }
      result.contingency[i] = stats::build_contingency(two_bits, one_bits);
      result.mcnemar[i] =
          stats::mcnemar_one_sided(result.contingency[i], directions[i]);
    }
  }
  result.two_stage_f1 = stats::f1_scores(two_label, truth_idx, kNumClutterLabels);
  result.single_stage_f1 =
      stats::f1_scores(single_label, truth_idx, kNumClutterLabels);
  return result;
}

}  // namespace cluttermap::eval
