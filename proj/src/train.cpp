#include "polyseg/train.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "polyseg/kernels.hpp"
#include "polyseg/ops.hpp"

namespace polyseg::train {

void TrainConfig::validate() const {
  POLYSEG_CHECK(learning_rate >= 0.0, "learning_rate must be non-negative");
  POLYSEG_CHECK(batch_size >= 1, "batch_size must be >= 1");
  POLYSEG_CHECK(max_epochs >= 0, "max_epochs must be >= 0");
  POLYSEG_CHECK(early_stop_patience >= 1, "early_stop_patience must be >= 1");
  POLYSEG_CHECK(threshold > 0.0 && threshold < 1.0, "threshold must lie in (0,1)");
  POLYSEG_CHECK(dice_smooth >= 0.0, "dice_smooth must be >= 0");
  POLYSEG_CHECK(adadelta_rho > 0.0 && adadelta_rho < 1.0, "adadelta_rho must lie in (0,1)");
  POLYSEG_CHECK(adadelta_eps > 0.0, "adadelta_eps must be positive");
}

double dice_coefficient(const Tensor& pred, const Tensor& target, double smooth) {
  POLYSEG_CHECK(pred.shape() == target.shape(), "dice_coefficient shape mismatch: "
                                                    << pred.shape().str() << " vs "
                                                    << target.shape().str());
  const size_t n = size_t(pred.numel());
  const double inter = kernels::dot(pred.data_ptr(), target.data_ptr(), n);
  const double sums = kernels::sum(pred.data_ptr(), n) + kernels::sum(target.data_ptr(), n);
  return (2.0 * inter + smooth) / (sums + smooth);
}

double iou(const Tensor& pred_binary, const Tensor& target, double smooth) {
  POLYSEG_CHECK(pred_binary.shape() == target.shape(), "iou shape mismatch: "
                                                           << pred_binary.shape().str() << " vs "
                                                           << target.shape().str());
  const size_t n = size_t(pred_binary.numel());
  const double inter = kernels::dot(pred_binary.data_ptr(), target.data_ptr(), n);
  const double unions = kernels::sum(pred_binary.data_ptr(), n) +
                        kernels::sum(target.data_ptr(), n) - inter;
  return (inter + smooth) / (unions + smooth);
}

Tensor binarize(const Tensor& pred, double threshold) {
  POLYSEG_CHECK(threshold > 0.0 && threshold < 1.0, "threshold must lie in (0,1)");
  Tensor out(pred.shape());
  auto in = pred.data();
  auto o = out.data();
  const float thr = float(threshold);
  for (size_t i = 0; i < o.size(); ++i) o[i] = in[i] > thr ? 1.0f : 0.0f;
  return out;
}

template <class T>
TensorT<T> dice_loss(const TensorT<T>& pred, const TensorT<T>& target, double smooth) {
  POLYSEG_CHECK(pred.shape() == target.shape(), "dice_loss shape mismatch: " << pred.shape().str()
                                                                             << " vs "
                                                                             << target.shape().str());
  auto inter = ops::reduce_sum(ops::mul(pred, target));
  auto sums = ops::add(ops::reduce_sum(pred), ops::reduce_sum(target));
  auto num = ops::add_scalar(ops::mul_scalar(inter, T(2)), static_cast<T>(smooth));
  auto den = ops::add_scalar(sums, static_cast<T>(smooth));
  auto dice = ops::div(num, den);
  return ops::add_scalar(ops::mul_scalar(dice, T(-1)), T(1));
}

template <class T>
AdadeltaStateT<T> AdadeltaStateT<T>::init(const model::ParamsT<T>& params) {
  AdadeltaStateT<T> state;
  for (const auto& [name, tensor] : params.tensors) {
    if (!tensor.requires_grad()) continue;
    state.slots.emplace(name, Slot{TensorT<T>::zeros(tensor.shape()),
                                   TensorT<T>::zeros(tensor.shape())});
  }
  return state;
}

template <class T>
void adadelta_step(model::ParamsT<T>& params, AdadeltaStateT<T>& state, double lr, double rho,
                   double eps) {
  for (auto& [name, tensor] : params.tensors) {
    if (!tensor.requires_grad()) continue;
    auto it = state.slots.find(name);
    POLYSEG_CHECK(it != state.slots.end(), "optimizer state missing for parameter '" << name << "'");
    POLYSEG_CHECK(it->second.sq_grad.shape() == tensor.shape(),
                  "optimizer state shape mismatch for parameter '" << name << "'");
    tensor.ensure_grad();
    const double gsum = kernels::sum(tensor.grad().data(), size_t(tensor.numel()));
    POLYSEG_CHECK(std::isfinite(gsum), "non-finite gradient in parameter '" << name << "'");
    kernels::adadelta_update(tensor.data_ptr(), tensor.grad().data(),
                             it->second.sq_grad.data_ptr(), it->second.sq_update.data_ptr(),
                             static_cast<T>(lr), static_cast<T>(rho), static_cast<T>(eps),
                             size_t(tensor.numel()));
  }
}

namespace {

// Stacks samples into N x 3 x S x S images and N x 1 x S x S masks.
std::pair<Tensor, Tensor> stack_batch(const std::vector<data::Sample>& samples) {
  POLYSEG_CHECK(!samples.empty(), "empty batch");
  const int64_t C = samples[0].image.dim(0);
  const int64_t H = samples[0].image.dim(1);
  const int64_t W = samples[0].image.dim(2);
  const auto n = int64_t(samples.size());
  Tensor images(Shape{n, C, H, W});
  Tensor masks(Shape{n, 1, H, W});
  for (int64_t i = 0; i < n; ++i) {
    const data::Sample& s = samples[size_t(i)];
    POLYSEG_CHECK(s.image.shape() == samples[0].image.shape() &&
                      s.mask.shape() == samples[0].mask.shape(),
                  "sample '" << s.id << "' shape differs within batch");
    std::copy(s.image.data().begin(), s.image.data().end(),
              images.data().begin() + i * C * H * W);
    std::copy(s.mask.data().begin(), s.mask.data().end(), masks.data().begin() + i * H * W);
  }
  return {images, masks};
}

}  // namespace

double train_epoch(model::Params& params, const model::ModelConfig& cfg,
                   const std::vector<data::Sample>& train_samples, const data::AugmentSpec& aug,
                   AdadeltaState& opt, const TrainConfig& tc, int epoch) {
  POLYSEG_CHECK(!train_samples.empty(), "train split is empty");
  tc.validate();

  std::vector<size_t> order(train_samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng::SplitMix64 shuffle_rng(rng::mix(tc.seed, 0x8badf00d00000000ull + uint64_t(epoch)));
  for (size_t i = order.size() - 1; i > 0; --i)
    std::swap(order[i], order[size_t(shuffle_rng.next_u64() % (i + 1))]);

  double loss_total = 0.0;
  int batches = 0;
  for (size_t start = 0; start < order.size(); start += size_t(tc.batch_size)) {
    const size_t end = std::min(order.size(), start + size_t(tc.batch_size));
    std::vector<data::Sample> batch;
    batch.reserve(end - start);
    for (size_t i = start; i < end; ++i) {
      const data::Sample& s = train_samples[order[i]];
      rng::SplitMix64 stream(rng::derive_seed(aug.seed, s.id, uint64_t(epoch)));
      batch.push_back(data::augment(s, aug, stream));
    }
    auto [images, masks] = stack_batch(batch);

    Tape tape;
    double batch_loss;
    {
      Tape::Scope scope(tape);
      Tensor pred = model::forward(images, params, cfg, true);
      Tensor loss = dice_loss(pred, masks, tc.dice_smooth);
      batch_loss = double(loss.item());
      POLYSEG_CHECK(std::isfinite(batch_loss), "non-finite training loss at epoch " << epoch);
      tape.backward(loss);
    }
    adadelta_step(params, opt, tc.learning_rate, tc.adadelta_rho, tc.adadelta_eps);
    params.zero_grads();

    loss_total += batch_loss;
    ++batches;
  }
  return loss_total / double(batches);
}

MetricsRecord evaluate(const model::Params& params, const model::ModelConfig& cfg,
                       const std::vector<data::Sample>& samples, const TrainConfig& tc,
                       const std::string& split_name, int epoch) {
  POLYSEG_CHECK(!samples.empty(), "evaluate on an empty split");
  double dice_sum = 0.0, iou_sum = 0.0, loss_sum = 0.0;
  for (const data::Sample& s : samples) {
    auto [image, mask] = stack_batch({s});
    Tensor pred = model::forward(image, params, cfg, false);
    const Tensor hard = binarize(pred, tc.threshold);
    dice_sum += dice_coefficient(hard, mask, tc.dice_smooth);
    iou_sum += iou(hard, mask, tc.dice_smooth);
    loss_sum += 1.0 - dice_coefficient(pred, mask, tc.dice_smooth);
  }
  const double n = double(samples.size());
  MetricsRecord rec;
  rec.dice = dice_sum / n;
  rec.iou = iou_sum / n;
  rec.loss = loss_sum / n;
  rec.epoch = epoch;
  rec.split_name = split_name;
  return rec;
}

FitResult fit(model::Params& params, AdadeltaState& opt, const model::ModelConfig& cfg,
              const std::vector<data::Sample>& train_samples,
              const std::vector<data::Sample>& val_samples,
              const std::vector<data::Sample>& test_samples, const data::AugmentSpec& aug,
              const TrainConfig& tc, const FitOptions& options) {
  tc.validate();
  POLYSEG_CHECK(!train_samples.empty() && !val_samples.empty() && !test_samples.empty(),
                "fit requires nonempty train, val and test splits");

  FitResult result;
  EarlyStopper stopper(tc.early_stop_patience);
  model::Params best = params.clone();
  int last_epoch = options.start_epoch;

  for (int epoch = options.start_epoch + 1; epoch <= tc.max_epochs; ++epoch) {
    const double train_loss = train_epoch(params, cfg, train_samples, aug, opt, tc, epoch);
    MetricsRecord val = evaluate(params, cfg, val_samples, tc, "val", epoch);
    result.history.push_back(val);
    last_epoch = epoch;

    if (stopper.observe(epoch, val.loss)) best = params.clone();
    if (options.on_epoch) options.on_epoch(val, train_loss);
    if (stopper.should_stop()) break;
  }

  if (last_epoch > options.start_epoch) {
    params = best;  // restore the best snapshot, including BN running stats
    result.best_val_loss = stopper.best_loss();
    result.best_epoch = stopper.best_epoch();
  }
  result.stop_epoch = last_epoch;
  result.test = evaluate(params, cfg, test_samples, tc, "test", last_epoch);
  return result;
}

std::string metrics_to_json_line(const MetricsRecord& rec) {
  nlohmann::json j;
  j["dice"] = rec.dice;
  j["iou"] = rec.iou;
  j["loss"] = rec.loss;
  j["epoch"] = rec.epoch;
  j["split"] = rec.split_name;
  return j.dump();
}

MetricsRecord metrics_from_json_line(const std::string& line) {
  const nlohmann::json j = nlohmann::json::parse(line);
  MetricsRecord rec;
  rec.dice = j.at("dice").get<double>();
  rec.iou = j.at("iou").get<double>();
  rec.loss = j.at("loss").get<double>();
  rec.epoch = j.at("epoch").get<int>();
  rec.split_name = j.at("split").get<std::string>();
  return rec;
}

template TensorT<float> dice_loss<float>(const TensorT<float>&, const TensorT<float>&, double);
template TensorT<double> dice_loss<double>(const TensorT<double>&, const TensorT<double>&, double);
template struct AdadeltaStateT<float>;
template struct AdadeltaStateT<double>;
template void adadelta_step<float>(model::ParamsT<float>&, AdadeltaStateT<float>&, double, double,
                                   double);
template void adadelta_step<double>(model::ParamsT<double>&, AdadeltaStateT<double>&, double,
                                    double, double);

}  // namespace polyseg::train
