#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "textshift/cnn_model.hpp"
#include "textshift/corpus.hpp"
#include "textshift/fasttext.hpp"
#include "textshift/optim.hpp"

namespace textshift {

struct TrainConfig {
  OptimizerConfig optimizer;
  std::size_t batch_size = 50;
  std::size_t max_epochs = 25;
  std::size_t patience = 5;
  std::uint64_t seed = 1;
  bool deterministic = true;
  std::size_t threads = 1;

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t selected = 0;  // index into epochs
};

/// Patience-based stopping on validation accuracy. Ties do not count as
/// improvement, so the earliest best epoch is kept.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Records one epoch; returns true when it is the new best.
  bool update(double val_accuracy);
  bool should_stop() const noexcept { return stale_ >= patience_; }
  std::size_t best_index() const noexcept { return best_index_; }
  double best_value() const noexcept { return best_; }

 private:
  std::size_t patience_;
  std::size_t seen_ = 0;
  std::size_t stale_ = 0;
  std::size_t best_index_ = 0;
  double best_ = -1.0;
};

struct CnnTrainResult {
  CnnModel model;  // best-validation snapshot
  OptimizerState optimizer;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minibatch training with the configured optimizer and a dense-row norm cap
/// after every step. Returns the snapshot with the best validation accuracy.
/// `after_step`, when set, sees the model after each renormalized step.
CnnTrainResult train_cnn(const CnnModel& initial, const Corpus& train, const Corpus& val,
                         const TrainConfig& config, const EpochCallback& on_epoch = {},
                         const std::function<void(const CnnModel&)>& after_step = {});

struct FastTextTrainResult {
  FastTextModel model;  // best-validation snapshot
  TrainHistory history;
};

FastTextTrainResult train_fasttext(const FastTextModel& initial, const Corpus& train,
                                   const Corpus& val, const FtTrainOptions& options,
                                   const EpochCallback& on_epoch = {});

struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::size_t> counts;  // row = true class, column = predicted

  explicit ConfusionMatrix(std::size_t c = 0) : classes(c), counts(c * c, 0) {}
  std::size_t& at(std::size_t truth, std::size_t predicted) {
    return counts[truth * classes + predicted];
  }
  std::size_t at(std::size_t truth, std::size_t predicted) const {
    return counts[truth * classes + predicted];
  }
  std::size_t total() const;
  std::size_t trace() const;
  std::size_t row_total(std::size_t truth) const;
};

struct Evaluation {
  double accuracy = 0.0;
  ConfusionMatrix confusion;
  std::vector<double> recall;
  std::vector<std::size_t> predictions;
};

/// Index of the largest entry, smallest index on ties.
std::size_t argmax(std::span<const double> values);

Evaluation summarize_predictions(std::span<const std::size_t> truth,
                                 std::span<const std::size_t> predicted, std::size_t classes);

using AnyModel = std::variant<CnnModel, FastTextModel>;

const LabelSet& model_labels(const AnyModel& model);
std::vector<double> predict_proba(const AnyModel& model, const std::vector<std::string>& tokens);

/// Test-mode predictions; documents are split across `threads` workers but
/// results are gathered by document index.
Evaluation evaluate(const CnnModel& model, const Corpus& corpus, std::size_t threads = 1);
Evaluation evaluate(const FastTextModel& model, const Corpus& corpus, std::size_t threads = 1);
Evaluation evaluate(const AnyModel& model, const Corpus& corpus, std::size_t threads = 1);

/// Runs `fn(i)` for i in [0, count) over up to `threads` workers.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace textshift
