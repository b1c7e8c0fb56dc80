#pragma once

#include <span>
#include <string>
#include <vector>

#include "cluttermap/eval/dataset.hpp"
#include "cluttermap/net/checkpoint.hpp"
#include "cluttermap/nn/adam.hpp"

namespace cluttermap::eval {

struct Hyperparams {
  nn::AdamConfig adam;           // lr 1e-3, betas 0.9/0.999, eps 1e-8
  int batch_size = 32;
  int max_epochs = 50;
  // Stop once validation accuracy reaches this value; >1 disables.
  double early_stop_val_accuracy = 1.1;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  net::Checkpoint checkpoint;  // best validation accuracy
  std::vector<EpochStats> curve;
  std::vector<std::string> notes;  // rejected steps, early stop, ...
};

namespace detail {

// Predicted class index within the kind's label set for one probability row.
inline int predicted_index(ModelKind kind, const std::vector<double>& probs) {
  if (uses_sigmoid(kind)) return probs[0] >= 0.5 ? 0 : 1;
  int best = 0;
  for (int c = 1; c < static_cast<int>(probs.size()); ++c)
    if (probs[static_cast<std::size_t>(c)] > probs[static_cast<std::size_t>(best)]) best = c;
  return best;
}

template <typename T>
double evaluate_accuracy(net::Predictor<T>& predictor, ModelKind kind,
                         const LabeledPatchSet& data,
                         const std::vector<TrainItem>& items,
                         int batch_size, ThreadPool& pool) {
  if (items.empty()) return 0.0;
  long long correct = 0;
  for (std::size_t start = 0; start < items.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t count =
        std::min(items.size() - start, static_cast<std::size_t>(batch_size));
    auto batch = assemble_batch<T>(
        data, std::span(items.data() + start, count), pool);
    auto probs = predictor.predict_batch(batch, pool);
    for (std::size_t i = 0; i < count; ++i) {
      const auto target =
          target_for(kind, data.records[items[start + i].sample].label);
      if (target && predicted_index(kind, probs[i]) == *target) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(items.size());
}

}  // namespace detail

// Trains one model kind on the given train/validation split. Labels are
// remapped per kind and samples outside the kind's subset are excluded.
// Training and validation sets are 8x D4-augmented; the checkpoint with the
// best validation accuracy is returned. Identical seeds and inputs give a
// bit-identical checkpoint for any thread count.
inline TrainResult train_model(ModelKind kind, const LabeledPatchSet& data,
                               const std::vector<std::size_t>& train_indices,
                               const std::vector<std::size_t>& val_indices,
                               const Hyperparams& hp, std::uint64_t seed,
                               ThreadPool& pool) {
  data.validate();
  require(hp.batch_size >= 2, "batch size must be >= 2 (batch norm needs it)");
  require(hp.max_epochs >= 0, "negative epoch count");

  // Subset + remap.
  std::vector<std::size_t> train, val;
  std::vector<long long> class_counts(static_cast<std::size_t>(num_classes(kind)), 0);
  for (std::size_t i : train_indices) {
    const auto t = target_for(kind, data.records[i].label);
    if (!t) continue;
    ++class_counts[static_cast<std::size_t>(*t)];
    train.push_back(i);
  }
  for (std::size_t i : val_indices)
    if (target_for(kind, data.records[i].label)) val.push_back(i);
  for (int c = 0; c < num_classes(kind); ++c) {
    require(class_counts[static_cast<std::size_t>(c)] > 0, "model kind ",
            model_kind_name(kind), ": class '", class_name(kind, c),
            "' is absent from the training data");
  }

  const net::NetConfig config = config_for(kind, data.input_side);
  auto network = net::build_network<float>(config, seed);
  network.reseed_dropout(derive_seed(seed, "dropout-train"));
  auto params = network.params();
  nn::AdamState<float> adam(params, hp.adam);

  const auto train_items = augmented_items(train);
  const auto val_items = augmented_items(val);

  TrainResult result;
  net::TrainingMeta meta;
  meta.seed = seed;

  auto snapshot = [&](double val_acc, int epochs_run) {
    net::TrainingMeta m = meta;
    m.epochs = epochs_run;
    m.final_val_accuracy = val_acc;
    return net::checkpoint_from_network(network, config, m);
  };

  // Zero-epoch runs still report the initialized network's accuracy.
  double best_val = -1.0;
  {
    net::Checkpoint initial = snapshot(0.0, 0);
    net::Predictor<float> p(initial);
    const double acc = detail::evaluate_accuracy(p, kind, data, val_items,
                                                 hp.batch_size, pool);
    initial.meta.final_val_accuracy = acc;
    best_val = acc;
    result.checkpoint = std::move(initial);
  }

  std::vector<TrainItem> order = train_items;
  for (int epoch = 0; epoch < hp.max_epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(seed, "shuffle/" + std::to_string(epoch)));
    shuffle_rng.shuffle(order);
    double loss_sum = 0;
    long long batches = 0;
    std::size_t start = 0;
    while (start < order.size()) {
      std::size_t count =
          std::min(order.size() - start, static_cast<std::size_t>(hp.batch_size));
      // Fold a trailing singleton into the previous batch (batch norm needs
      // at least two samples).
      if (count == 1 && start > 0) break;
      if (order.size() - start - count == 1) ++count;
      auto batch = assemble_batch<float>(
          data, std::span(order.data() + start, count), pool);
      std::vector<int> targets;
      targets.reserve(count);
      for (std::size_t i = 0; i < count; ++i)
        targets.push_back(
            *target_for(kind, data.records[order[start + i].sample].label));
      auto logits = network.forward(batch, nn::Mode::Train, pool);
      Tensor<float> dlogits;
      double loss;
      if (uses_sigmoid(kind)) {
        // Class 0 of the pair corresponds to sigmoid output >= 0.5.
        std::vector<int> bits(count);
        for (std::size_t i = 0; i < count; ++i) bits[i] = targets[i] == 0 ? 1 : 0;
        loss = nn::binary_cross_entropy_batch(logits, bits, &dlogits);
      } else {
        loss = nn::cross_entropy_batch(logits, targets, &dlogits);
      }
      network.zero_grad();
      network.backward(dlogits, pool);
      const auto step = adam.step(params);
      if (!step.applied)
        result.notes.push_back("epoch " + std::to_string(epoch) + ": " +
                               step.diagnostic);
      loss_sum += loss;
      ++batches;
      start += count;
    }
    net::Checkpoint current = snapshot(0.0, epoch + 1);
    net::Predictor<float> p(current);
    const double val_acc = detail::evaluate_accuracy(p, kind, data, val_items,
                                                     hp.batch_size, pool);
    current.meta.final_val_accuracy = val_acc;
    result.curve.push_back(
        {epoch + 1, batches ? loss_sum / static_cast<double>(batches) : 0.0, val_acc});
    if (val_acc > best_val) {
      best_val = val_acc;
      result.checkpoint = std::move(current);
    }
    if (val_acc >= hp.early_stop_val_accuracy) {
      result.notes.push_back("early stop at epoch " + std::to_string(epoch + 1) +
                             " with validation accuracy " +
                             std::to_string(val_acc));
      break;
    }
  }
  return result;
}

}  // namespace cluttermap::eval
