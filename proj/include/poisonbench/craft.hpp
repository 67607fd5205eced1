#pragma once

#include <random>
#include <sstream>

#include "poisonbench/attacks.hpp"
#include "poisonbench/noise.hpp"
#include "poisonbench/poison_pack.hpp"
#include "poisonbench/training.hpp"

namespace pb {

// Sample-wise error-maximizing poison: one adversarial perturbation per
// training image against a frozen crafting model. momentum_mu > 0 selects
// MI-FGSM, otherwise PGD.
template <typename T>
PoisonPack craft_errmax_poison(Model<T>& crafting_model, const ImageDataset& ds, const AttackConfig& cfg) {
  cfg.validate(ds.num_classes);
  if (crafting_model.spec().input != ds.input_spec())
    throw data_error("misaligned_model", "crafting model input spec differs from the dataset");
  PoisonPack pack;
  pack.mode = PoisonMode::sample_wise;
  pack.epsilon = static_cast<float>(cfg.epsilon);
  pack.num_classes = ds.num_classes;
  pack.deltas = Tensor<float>(ds.images.shape());
  pack.indices = ds.indices;
  const std::size_t rs = ds.images.row_size();
  for (std::size_t start = 0; start < ds.size(); start += cfg.batch_size) {
    std::vector<std::size_t> rows;
    for (std::size_t i = start; i < std::min(ds.size(), start + cfg.batch_size); ++i) rows.push_back(i);
    const Tensor<T> x = ds.batch_images<T>(rows);
    const Labels y = ds.batch_labels(rows);
    // Random starts are keyed by dataset position, so batch size does not matter.
    const Tensor<T> delta = detail::sign_attack(crafting_model, x, y, cfg, cfg.momentum_mu > 0, {}, start);
    for (std::size_t j = 0; j < delta.size(); ++j) {
      // Casting a double delta may round a hair past the float budget.
      pack.deltas[start * rs + j] = std::clamp(static_cast<float>(delta[j]), -pack.epsilon, pack.epsilon);
    }
  }
  std::ostringstream prov;
  prov << "errmax " << describe(cfg) << " model=" << crafting_model.spec().name << " model_seed=" << crafting_model.seed();
  pack.provenance = prov.str();
  return pack;
}

// ---------------------------------------------------------------------------

struct ErrMinConfig {
  std::size_t inner_model_steps = 10;
  AttackConfig noise_pgd = [] {
    AttackConfig a;
    a.steps = 20;
    a.targeted = false;
    a.step_size = default_step_size(a.epsilon, a.steps);
    return a;
  }();
  double stop_train_accuracy = 0.99;
  std::size_t max_outer_rounds = 50;
  PoisonMode mode = PoisonMode::sample_wise;
  std::size_t batch_size = 128;
  SgdConfig sgd;

  // The stop threshold is accepted in [0, 1] here; the CLI additionally
  // demands > 1/K for user-facing configs.
  void validate(std::size_t num_classes) const {
    noise_pgd.validate(num_classes);
    if (inner_model_steps == 0) throw config_error("bad_errmin_config", "inner_model_steps must be >= 1");
    if (max_outer_rounds == 0) throw config_error("bad_errmin_config", "max_outer_rounds must be >= 1");
    if (!(stop_train_accuracy >= 0.0 && stop_train_accuracy <= 1.0))
      throw config_error("bad_errmin_config", "stop_train_accuracy must be in [0, 1]");
    if (batch_size == 0) throw config_error("bad_errmin_config", "batch_size must be >= 1");
  }
};

enum class ErrMinStop { accuracy_reached, max_rounds };

struct ErrMinResult {
  PoisonPack pack;
  ErrMinStop stop = ErrMinStop::max_rounds;
  std::size_t rounds = 0;
  double train_accuracy = 0;
};

// Error-minimizing ("unlearnable") noise by alternating a few SGD steps on
// the current poisoned data with sign-gradient descent of the true-label
// loss on the noise. Class-wise noise shares one delta per class; each batch
// steps it along the sign of the gradient summed over the class members in
// that batch.
template <typename T = float>
ErrMinResult craft_errmin_poison(const ImageDataset& ds, const ErrMinConfig& cfg, const ArchSpec& arch, std::uint64_t seed) {
  cfg.validate(ds.num_classes);
  Model<T> model = build_model<T>(arch_spec(arch.name, ds.input_spec()), seed);
  const bool class_wise = cfg.mode == PoisonMode::class_wise;
  const std::size_t n = ds.size(), rs = ds.images.row_size(), k = ds.num_classes;
  const std::size_t m = class_wise ? k : n;
  const T eps = static_cast<T>(cfg.noise_pgd.epsilon);
  const T alpha = static_cast<T>(cfg.noise_pgd.step_size);
  Tensor<T> deltas({m, ds.channels(), ds.height(), ds.width()});
  auto row_of = [&](std::size_t i) { return class_wise ? static_cast<std::size_t>(ds.labels[i]) : i; };

  auto poisoned_batch = [&](const std::vector<std::size_t>& rows) {
    Tensor<T> x = ds.batch_images<T>(rows);
    for (std::size_t b = 0; b < rows.size(); ++b) {
      const T* d = deltas.ptr() + row_of(rows[b]) * rs;
      for (std::size_t j = 0; j < rs; ++j) x[b * rs + j] = std::clamp(x[b * rs + j] + d[j], T(0), T(1));
    }
    return x;
  };

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order = iota_rows(n);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  ErrMinResult result;
  for (std::size_t round = 0; round < cfg.max_outer_rounds; ++round) {
    // (a) surrogate training on the current poison
    for (std::size_t s = 0; s < cfg.inner_model_steps; ++s) {
      std::vector<std::size_t> rows;
      for (std::size_t b = 0; b < std::min(cfg.batch_size, n); ++b) {
        if (cursor == n) {
          std::shuffle(order.begin(), order.end(), rng);
          cursor = 0;
        }
        rows.push_back(order[cursor++]);
      }
      const BatchResult br = train_on_batch(model, poisoned_batch(rows), ds.batch_labels(rows), cfg.sgd);
      if (!std::isfinite(br.loss))
        throw numeric_error("non_finite_loss", "error-min surrogate loss diverged in round " + std::to_string(round));
    }
    // (b) noise descent on the true-label loss, surrogate frozen
    model.eval();
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      std::vector<std::size_t> rows;
      for (std::size_t i = start; i < std::min(n, start + cfg.batch_size); ++i) rows.push_back(i);
      const Tensor<T> clean = ds.batch_images<T>(rows);
      const Labels y = ds.batch_labels(rows);
      for (int step = 0; step < cfg.noise_pgd.steps; ++step) {
        Tensor<T> cur(clean.shape());
        for (std::size_t b = 0; b < rows.size(); ++b)
          std::copy_n(deltas.ptr() + row_of(rows[b]) * rs, rs, cur.ptr() + b * rs);
        const Tensor<T> g = detail::input_gradient(model, clean, cur, y);
        if (class_wise) {
          std::vector<T> sum(k * rs, T(0));
          std::vector<bool> present(k, false);
          for (std::size_t b = 0; b < rows.size(); ++b) {
            const std::size_t c = static_cast<std::size_t>(y[b]);
            present[c] = true;
            for (std::size_t j = 0; j < rs; ++j) sum[c * rs + j] += g[b * rs + j];
          }
          for (std::size_t c = 0; c < k; ++c) {
            if (!present[c]) continue;
            T* d = deltas.ptr() + c * rs;
            for (std::size_t j = 0; j < rs; ++j)
              d[j] = std::clamp(d[j] - alpha * detail::sign(sum[c * rs + j]), -eps, eps);
          }
        } else {
          for (std::size_t b = 0; b < rows.size(); ++b) {
            T* d = deltas.ptr() + rows[b] * rs;
            for (std::size_t j = 0; j < rs; ++j) d[j] = d[j] - alpha * detail::sign(g[b * rs + j]);
            detail::project<T>(std::span<T>(d, rs), clean.row(b), eps);
          }
        }
      }
    }
    // (c) stopping test on the poisoned training set
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      std::vector<std::size_t> rows;
      for (std::size_t i = start; i < std::min(n, start + cfg.batch_size); ++i) rows.push_back(i);
      const Labels pred = predict(model, poisoned_batch(rows));
      for (std::size_t b = 0; b < rows.size(); ++b) correct += pred[b] == ds.labels[rows[b]];
    }
    result.rounds = round + 1;
    result.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    if (result.train_accuracy >= cfg.stop_train_accuracy) {
      result.stop = ErrMinStop::accuracy_reached;
      break;
    }
  }

  PoisonPack& pack = result.pack;
  pack.mode = cfg.mode;
  pack.epsilon = static_cast<float>(cfg.noise_pgd.epsilon);
  pack.num_classes = k;
  pack.deltas = Tensor<float>(deltas.shape());
  for (std::size_t j = 0; j < deltas.size(); ++j)
    pack.deltas[j] = std::clamp(static_cast<float>(deltas[j]), -pack.epsilon, pack.epsilon);
  if (!class_wise) pack.indices = ds.indices;
  std::ostringstream prov;
  prov << "errmin mode=" << to_string(cfg.mode) << " inner_steps=" << cfg.inner_model_steps
       << " noise_steps=" << cfg.noise_pgd.steps << " step_size=" << cfg.noise_pgd.step_size
       << " eps=" << cfg.noise_pgd.epsilon << " stop_acc=" << cfg.stop_train_accuracy << " arch=" << arch.name
       << " seed=" << seed << " rounds=" << result.rounds
       << " stop=" << (result.stop == ErrMinStop::accuracy_reached ? "accuracy" : "max_rounds");
  pack.provenance = prov.str();
  return result;
}

}  // namespace pb
