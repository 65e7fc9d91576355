#include "polyseg/tensor.hpp"

#include <unordered_set>

#include "polyseg/rng.hpp"

namespace polyseg {

template <class T>
TensorT<T> tensor_init(const Shape& shape, const InitScheme& scheme) {
  TensorT<T> t(shape);
  auto out = t.data();
  switch (scheme.kind) {
    case InitScheme::Kind::zeros:
      break;
    case InitScheme::Kind::ones:
      for (T& v : out) v = T(1);
      break;
    case InitScheme::Kind::constant:
      for (T& v : out) v = static_cast<T>(scheme.value);
      break;
    case InitScheme::Kind::he_normal: {
      POLYSEG_CHECK(scheme.fan_in >= 1, "he_normal fan_in " << scheme.fan_in << " must be >= 1");
      rng::SplitMix64 r(scheme.seed);
      const double sd = std::sqrt(2.0 / static_cast<double>(scheme.fan_in));
      for (T& v : out) v = static_cast<T>(sd * r.normal());
      break;
    }
    case InitScheme::Kind::uniform: {
      rng::SplitMix64 r(scheme.seed);
      for (T& v : out) v = static_cast<T>(r.uniform(scheme.lo, scheme.hi));
      break;
    }
  }
  return t;
}

template <class T>
void TapeT<T>::backward(TensorT<T> loss) {
  POLYSEG_CHECK(loss.defined() && loss.numel() == 1,
                "backward requires a scalar loss, got shape "
                    << (loss.defined() ? loss.shape().str() : std::string("<undefined>")));

  // Pre-allocate zero gradients for every grad-requiring tensor on the tape
  // so non-contributing tensors end with a zero gradient, not a missing one.
  for (Node& node : nodes_) {
    for (TensorT<T>& in : node.inputs)
      if (in.requires_grad()) in.ensure_grad();
    if (node.output.requires_grad()) node.output.ensure_grad();
  }

  // Gradients of op outputs are per-call scratch: zero them so a repeated
  // backward() re-propagates from a clean slate while leaf gradients keep
  // accumulating.
  for (Node& node : nodes_) node.output.zero_grad();

  loss.ensure_grad();
  loss.grad()[0] += T(1);

  std::unordered_set<const void*> needed;
  needed.insert(loss.id());
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!needed.count(it->output.id())) continue;
    it->backward_fn();
    for (const TensorT<T>& in : it->inputs) needed.insert(in.id());
  }
}

template TensorT<float> tensor_init<float>(const Shape&, const InitScheme&);
template TensorT<double> tensor_init<double>(const Shape&, const InitScheme&);
template class TapeT<float>;
template class TapeT<double>;

}  // namespace polyseg
