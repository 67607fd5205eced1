#pragma once

#include <cmath>
#include <memory>
#include <optional>

#include "poisonbench/model.hpp"

namespace pb {

struct RecordOptions {
  bool record = true;
  // Retain the gradient w.r.t. the input images (attacks need it, training does not).
  bool input_grad = false;
  // Skip parameter gradients in backward (attacks only need the input gradient).
  bool param_grads = true;
};

template <typename T>
struct Graph {
  Model<T>* model = nullptr;
  Tape<T> tape;
  bool want_input_grad = false;
  bool want_param_grads = true;
  bool consumed = false;
  std::optional<Tensor<T>> input_gradient;
};

template <typename T>
struct Logits {
  Tensor<T> value;
  std::shared_ptr<Graph<T>> graph;  // null when not recorded
};

template <typename T>
struct LossValue {
  T value = 0;
  Tensor<T> grad_logits;  // d loss / d logits
  std::shared_ptr<Graph<T>> graph;

  // Available after backward() when the forward asked for it.
  const Tensor<T>& input_gradient() const {
    if (!graph || !graph->input_gradient)
      throw state_error("no_input_gradient",
                        "input gradient was not requested at forward time or backward has not run");
    return *graph->input_gradient;
  }
};

template <typename T>
Logits<T> forward(Model<T>& model, const Tensor<T>& images, RecordOptions opts = {}) {
  const InputSpec& in = model.spec().input;
  if (images.rank() != 4 || images.dim(1) != in.channels || images.dim(2) != in.height ||
      images.dim(3) != in.width)
    throw shape_error("layer 'input': expected [N x " + std::to_string(in.channels) + " x " +
                      std::to_string(in.height) + " x " + std::to_string(in.width) + "], got " +
                      shape_str(images.shape()));
  Logits<T> out;
  if (opts.record) {
    out.graph = std::make_shared<Graph<T>>();
    out.graph->model = &model;
    out.graph->want_input_grad = opts.input_grad;
    out.graph->want_param_grads = opts.param_grads;
  }
  out.value = model.net().forward(images, model.mode(), opts.record ? &out.graph->tape : nullptr);
  if (!out.value.all_finite()) throw numeric_error("non_finite_logits", "forward produced non-finite logits");
  return out;
}

// Mean over the batch of -log softmax(logits)[label].
template <typename T>
LossValue<T> cross_entropy(const Tensor<T>& logits, const Labels& labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size())
    throw shape_error("cross_entropy: logits " + shape_str(logits.shape()) + " vs " +
                      std::to_string(labels.size()) + " labels");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  LossValue<T> loss;
  loss.grad_logits = Tensor<T>(logits.shape());
  long double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= k)
      throw data_error("label_out_of_range", "label " + std::to_string(y) + " outside [0, " +
                                                 std::to_string(k) + ")");
    const T* z = logits.ptr() + i * k;
    T zmax = z[0];
    for (std::size_t j = 1; j < k; ++j) zmax = std::max(zmax, z[j]);
    T sum = 0;
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(z[j] - zmax);
    const T log_sum = std::log(sum) + zmax;
    total += log_sum - z[y];
    T* g = loss.grad_logits.ptr() + i * k;
    for (std::size_t j = 0; j < k; ++j)
      g[j] = (std::exp(z[j] - log_sum) - (static_cast<std::size_t>(y) == j ? T(1) : T(0))) /
             static_cast<T>(n);
  }
  loss.value = n ? static_cast<T>(total / n) : T(0);
  // Rounding can leave a saturated loss a hair below zero.
  loss.value = std::max(loss.value, T(0));
  return loss;
}

template <typename T>
LossValue<T> cross_entropy(const Logits<T>& logits, const Labels& labels) {
  LossValue<T> loss = cross_entropy(logits.value, labels);
  loss.graph = logits.graph;
  return loss;
}

// Overwrites every parameter gradient of the recorded model (unless the
// forward opted out of parameter gradients).
template <typename T>
void backward(LossValue<T>& loss) {
  if (!loss.graph) throw state_error("not_recorded", "loss was not produced by a recorded forward");
  Graph<T>& g = *loss.graph;
  if (g.consumed) throw state_error("double_backward", "backward already ran on this graph; re-run forward");
  g.consumed = true;
  if (g.want_param_grads) g.model->zero_grad();
  Tensor<T> gx = backprop(g.tape, loss.grad_logits, g.want_param_grads);
  g.tape.entries.clear();
  if (g.want_input_grad) g.input_gradient = std::move(gx);
}

}  // namespace pb
