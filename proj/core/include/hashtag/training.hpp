#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "hashtag/ops.hpp"

namespace hashtag {

// Mean loss and argmax accuracy over the supervised positions of an epoch.
// For the seq2seq model the positions are teacher-forced target tokens; for
// the masked LM they are the single mask slot of each example.
struct EpochStats {
  double mean_loss = 0.0;
  double accuracy = 0.0;
  std::size_t positions = 0;
};

class TokenTally {
 public:
  void add(double loss, bool correct) {
    loss_sum_ += loss;
    correct_ += correct ? 1 : 0;
    ++count_;
  }
  void merge(const TokenTally& other) {
    loss_sum_ += other.loss_sum_;
    correct_ += other.correct_;
    count_ += other.count_;
  }
  std::size_t count() const { return count_; }
  EpochStats stats() const {
    if (count_ == 0) return {};
    return {loss_sum_ / static_cast<double>(count_),
            static_cast<double>(correct_) / static_cast<double>(count_), count_};
  }

 private:
  double loss_sum_ = 0.0;
  std::size_t correct_ = 0;
  std::size_t count_ = 0;
};

/// Scores one logit vector against its gold id.
inline CrossEntropyResult score_position(std::span<const double> logits, std::size_t gold, TokenTally& tally) {
  auto ce = softmax_cross_entropy(logits, gold);
  tally.add(ce.loss, argmax(logits) == gold);
  return ce;
}

struct HistoryEntry {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  std::optional<double> val_acc;

  nlohmann::json to_json() const {
    nlohmann::json j{{"epoch", epoch}, {"train_loss", train_loss}, {"train_acc", train_acc}};
    j["val_acc"] = val_acc ? nlohmann::json(*val_acc) : nlohmann::json(nullptr);
    return j;
  }
};

struct FitOptions {
  std::size_t epochs = 20;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  // Stop once validation accuracy has not improved for this many epochs (0 disables).
  std::size_t patience = 3;
  // Stop as soon as training accuracy reaches this value (disabled when unset).
  std::optional<double> target_train_accuracy;
};

/// Shared epoch loop with early stopping. `train_epoch(epoch_seed)` runs one
/// pass over the training data; `evaluate()` scores the validation set and may
/// be empty when no validation data is available.
inline std::vector<HistoryEntry> fit_loop(const FitOptions& options,
                                          const std::function<EpochStats(std::uint64_t)>& train_epoch,
                                          const std::function<std::optional<EpochStats>()>& evaluate,
                                          const std::function<void(const HistoryEntry&)>& on_epoch = {}) {
  std::vector<HistoryEntry> history;
  double best_val = -1.0;
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    const EpochStats train = train_epoch(options.seed + epoch);
    HistoryEntry entry{epoch, train.mean_loss, train.accuracy, std::nullopt};
    if (auto val = evaluate ? evaluate() : std::nullopt) entry.val_acc = val->accuracy;
    history.push_back(entry);
    if (on_epoch) on_epoch(entry);

    if (options.target_train_accuracy && train.accuracy >= *options.target_train_accuracy) break;
    if (entry.val_acc && options.patience > 0) {
      if (*entry.val_acc > best_val) {
        best_val = *entry.val_acc;
        stale = 0;
      } else if (++stale >= options.patience) {
        break;
      }
    }
  }
  return history;
}

}  // namespace hashtag
