#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "polyseg/data.hpp"
#include "polyseg/model.hpp"
#include "polyseg/tensor.hpp"

// Training protocol: Dice loss on sigmoid outputs, Adadelta updates scaled
// by the configured learning rate, early stopping on validation loss with
// best-weight restore, and per-image Dice/IoU evaluation on thresholded
// predictions.

namespace polyseg::train {

struct TrainConfig {
  double learning_rate = 0.0001;
  int batch_size = 16;
  int max_epochs = 100;
  int early_stop_patience = 10;
  double threshold = 0.5;
  double dice_smooth = 1e-6;
  double adadelta_rho = 0.95;
  double adadelta_eps = 1e-6;
  uint64_t seed = 42;

  void validate() const;
};

struct MetricsRecord {
  double dice = 0.0;
  double iou = 0.0;
  double loss = 0.0;
  int epoch = 0;
  std::string split_name;
};

// Soft Dice over all pixels (one global sum): (2*sum(p*t)+s)/(sum p + sum t + s).
double dice_coefficient(const Tensor& pred, const Tensor& target, double smooth);

// (|intersection|+s) / (|union|+s) on binary tensors.
double iou(const Tensor& pred_binary, const Tensor& target, double smooth);

// 1 where pred > threshold (strict), else 0.
Tensor binarize(const Tensor& pred, double threshold);

// Differentiable 1 - soft_dice; gradient flows to pred.
template <class T>
TensorT<T> dice_loss(const TensorT<T>& pred, const TensorT<T>& target, double smooth);

// Per-parameter accumulators E[g^2] and E[dx^2], zero-initialized, with
// shapes mirroring the learnable parameters.
template <class T>
struct AdadeltaStateT {
  struct Slot {
    TensorT<T> sq_grad;
    TensorT<T> sq_update;
  };
  std::map<std::string, Slot> slots;

  static AdadeltaStateT init(const model::ParamsT<T>& params);
};

using AdadeltaState = AdadeltaStateT<float>;

// One Adadelta step over every learnable parameter; throws naming the
// parameter if a gradient is non-finite.
template <class T>
void adadelta_step(model::ParamsT<T>& params, AdadeltaStateT<T>& state, double lr, double rho,
                   double eps);

// Validation-loss early stopping: strict improvement (min mode, min_delta 0)
// resets the patience counter; stop fires once epochs_since_improvement
// reaches the patience.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}

  // Returns true when val_loss strictly improves on the best seen.
  bool observe(int epoch, double val_loss) {
    if (val_loss < best_loss_) {
      best_loss_ = val_loss;
      best_epoch_ = epoch;
      since_ = 0;
      return true;
    }
    since_ = epoch - best_epoch_;
    return false;
  }

  bool should_stop() const { return since_ >= patience_; }
  double best_loss() const { return best_loss_; }
  int best_epoch() const { return best_epoch_; }
  int epochs_since_improvement() const { return since_; }

 private:
  int patience_;
  double best_loss_ = std::numeric_limits<double>::infinity();
  int best_epoch_ = 0;
  int since_ = 0;
};

// Shuffled minibatches (last partial batch kept); per batch: augment ->
// train-mode forward -> dice loss -> backward -> adadelta step -> zero
// grads. Returns the mean batch loss. Augmentation streams derive from
// (aug.seed, sample id, epoch), so sample order does not perturb them.
double train_epoch(model::Params& params, const model::ModelConfig& cfg,
                   const std::vector<data::Sample>& train_samples, const data::AugmentSpec& aug,
                   AdadeltaState& opt, const TrainConfig& tc, int epoch);

// Eval-mode forward, no augmentation; Dice/IoU on thresholded predictions,
// all metrics averaged per image.
MetricsRecord evaluate(const model::Params& params, const model::ModelConfig& cfg,
                       const std::vector<data::Sample>& samples, const TrainConfig& tc,
                       const std::string& split_name, int epoch);

struct FitOptions {
  int start_epoch = 0;  // resume offset; epochs run in (start_epoch, max_epochs]
  std::function<void(const MetricsRecord& val, double train_loss)> on_epoch;
};

struct FitResult {
  std::vector<MetricsRecord> history;  // one validation record per epoch
  MetricsRecord test;                  // final test metrics with the best weights
  double best_val_loss = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int stop_epoch = 0;  // last epoch that ran
};

// Trains until patience exhaustion or max_epochs, restores the best
// snapshot (weights and BN stats) into `params`, then evaluates test.
// The loop owns params and optimizer state exclusively; checkpoint I/O
// belongs between epochs (the CLI writes only after fit returns).
FitResult fit(model::Params& params, AdadeltaState& opt, const model::ModelConfig& cfg,
              const std::vector<data::Sample>& train_samples,
              const std::vector<data::Sample>& val_samples,
              const std::vector<data::Sample>& test_samples, const data::AugmentSpec& aug,
              const TrainConfig& tc, const FitOptions& options = {});

// JSON-lines serialization of MetricsRecord.
std::string metrics_to_json_line(const MetricsRecord& rec);
MetricsRecord metrics_from_json_line(const std::string& line);

}  // namespace polyseg::train
