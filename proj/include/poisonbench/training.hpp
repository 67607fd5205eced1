#pragma once

#include "poisonbench/autodiff.hpp"
#include "poisonbench/data.hpp"
#include "poisonbench/optim.hpp"
#include "poisonbench/zoo.hpp"

namespace pb {

struct SgdConfig {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

struct BatchResult {
  double loss = 0;
  std::size_t correct = 0;
};

// One SGD step in train mode on a mini-batch.
template <typename T>
BatchResult train_on_batch(Model<T>& model, const Tensor<T>& images, const Labels& labels, const SgdConfig& sgd) {
  model.train();
  auto logits = forward(model, images);
  auto loss = cross_entropy(logits, labels);
  if (!std::isfinite(loss.value)) throw numeric_error("non_finite_loss", "training loss is not finite");
  backward(loss);
  sgd_step(model.parameters(), static_cast<T>(sgd.lr), static_cast<T>(sgd.momentum), static_cast<T>(sgd.weight_decay));
  BatchResult r;
  r.loss = static_cast<double>(loss.value);
  const Labels pred = argmax_rows(logits.value);
  for (std::size_t i = 0; i < labels.size(); ++i) r.correct += pred[i] == labels[i];
  return r;
}

// Fraction of `ds` classified correctly, evaluated in eval mode.
template <typename T>
double accuracy(Model<T>& model, const ImageDataset& ds, std::size_t batch_size = 256) {
  if (ds.size() == 0) return 0.0;
  const Mode saved = model.mode();
  model.eval();
  std::size_t correct = 0;
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    std::vector<std::size_t> rows;
    for (std::size_t i = start; i < std::min(ds.size(), start + batch_size); ++i) rows.push_back(i);
    const Labels pred = predict(model, ds.batch_images<T>(rows), batch_size);
    for (std::size_t i = 0; i < rows.size(); ++i) correct += pred[i] == ds.labels[rows[i]];
  }
  model.set_mode(saved);
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

}  // namespace pb
