#pragma once

#include <cstdio>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "poisonbench/poison_pack.hpp"
#include "poisonbench/training.hpp"

namespace pb {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double lr_decay_factor = 10.0;  // lr is divided by this at lr_decay_epoch
  std::size_t lr_decay_epoch = 50;
  double loss_threshold = 0.5;
  std::uint64_t seed = 0;
  bool shuffle = true;
  bool augment = false;  // random 4-px crop + horizontal flip

  // 40 epochs with the decay at the midpoint.
  static TrainConfig desk_scale() {
    TrainConfig c;
    c.epochs = 40;
    c.lr_decay_epoch = 20;
    return c;
  }

  void validate() const {
    if (epochs < 1) throw config_error("bad_train_config", "epochs must be >= 1");
    if (batch_size < 1) throw config_error("bad_train_config", "batch_size must be >= 1");
    if (!(loss_threshold > 0)) throw config_error("bad_train_config", "loss_threshold must be > 0");
    if (!(lr >= 0) || !(lr_decay_factor > 0)) throw config_error("bad_train_config", "lr must be >= 0, decay factor > 0");
  }

  double lr_at(std::size_t epoch) const { return epoch >= lr_decay_epoch ? lr / lr_decay_factor : lr; }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"momentum", c.momentum},
          {"weight_decay", c.weight_decay},
          {"lr_decay_factor", c.lr_decay_factor},
          {"lr_decay_epoch", c.lr_decay_epoch},
          {"loss_threshold", c.loss_threshold},
          {"seed", c.seed},
          {"shuffle", c.shuffle},
          {"augment", c.augment}};
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double train_acc = 0;
  double test_acc = 0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainReport {
  std::vector<EpochRecord> records;
  TrainConfig config;
  std::string provenance = "clean";

  double final_test_acc() const { return records.empty() ? 0.0 : records.back().test_acc; }
};

namespace detail {

// Random 4-pixel-padded crop plus horizontal flip, in place.
inline void augment_batch(Tensor<float>& x, std::mt19937_64& rng) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  std::uniform_int_distribution<int> shift(-4, 4);
  std::bernoulli_distribution flip(0.5);
  std::vector<float> tmp(c * h * w);
  for (std::size_t i = 0; i < n; ++i) {
    const int dy = shift(rng), dx = shift(rng);
    const bool f = flip(rng);
    float* img = x.ptr() + i * c * h * w;
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t xx = 0; xx < w; ++xx) {
          const long sy = static_cast<long>(y) + dy;
          const long sxr = static_cast<long>(f ? w - 1 - xx : xx) + dx;
          const bool in = sy >= 0 && sy < static_cast<long>(h) && sxr >= 0 && sxr < static_cast<long>(w);
          tmp[(ch * h + y) * w + xx] = in ? img[(ch * h + sy) * w + sxr] : 0.0f;
        }
    std::copy(tmp.begin(), tmp.end(), img);
  }
}

}  // namespace detail

// Mini-batch SGD with a single step decay; test accuracy is measured in eval
// mode after every epoch. Train loss is the mean of the mini-batch losses.
template <typename T>
TrainReport train(Model<T>& model, const ImageDataset& train_ds, const ImageDataset& test_ds, const TrainConfig& cfg,
                  std::string provenance = "clean") {
  cfg.validate();
  if (train_ds.input_spec() != test_ds.input_spec())
    throw data_error("dataset_mismatch", "train and test sets differ in (C,H,W,K)");
  if (model.spec().input != train_ds.input_spec())
    throw data_error("dataset_mismatch", "model input spec differs from the dataset");
  if (train_ds.size() == 0) throw data_error("empty_dataset", "training set is empty");
  TrainReport report;
  report.config = cfg;
  report.provenance = std::move(provenance);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order = iota_rows(train_ds.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
    const SgdConfig sgd{cfg.lr_at(epoch), cfg.momentum, cfg.weight_decay};
    double loss_sum = 0;
    std::size_t batches = 0, correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::span<const std::size_t> rows(order.data() + start, std::min(cfg.batch_size, order.size() - start));
      Tensor<float> xf = train_ds.batch_images<float>(rows);
      if (cfg.augment) detail::augment_batch(xf, rng);
      Tensor<T> x;
      if constexpr (std::is_same_v<T, float>) x = std::move(xf);
      else x = xf.template cast<T>();
      BatchResult br;
      try {
        br = train_on_batch(model, x, train_ds.batch_labels(rows), sgd);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::numeric) throw;
        throw numeric_error(e.code(), std::string(e.what()) + " at epoch " + std::to_string(epoch));
      }
      loss_sum += br.loss;
      correct += br.correct;
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(train_ds.size());
    rec.test_acc = accuracy(model, test_ds);
    if (!std::isfinite(rec.train_loss))
      throw numeric_error("non_finite_loss", "non-finite train loss at epoch " + std::to_string(epoch));
    report.records.push_back(rec);
  }
  model.eval();
  return report;
}

// ---------------------------------------------------------------------------
// Metrics

struct Peak {
  std::size_t epoch;
  double accuracy;
};

// Highest test accuracy and the first epoch reaching it.
inline Peak peak_accuracy(const TrainReport& report) {
  if (report.records.empty()) throw state_error("empty_report", "peak_accuracy of an empty report");
  Peak best{report.records[0].epoch, report.records[0].test_acc};
  for (const auto& r : report.records)
    if (r.test_acc > best.accuracy) best = {r.epoch, r.test_acc};
  return best;
}

// First epoch whose mean train loss is strictly below tau.
inline std::optional<std::size_t> epochs_to_threshold(const TrainReport& report, double tau) {
  if (!(tau > 0)) throw config_error("bad_threshold", "loss threshold must be > 0");
  for (const auto& r : report.records)
    if (r.train_loss < tau) return r.epoch;
  return std::nullopt;
}

// Peak over final test accuracy; +inf when the final accuracy is zero.
inline double early_stop_gain(const TrainReport& report) {
  const double peak = peak_accuracy(report).accuracy;
  const double final_acc = report.final_test_acc();
  if (final_acc <= 0) return std::numeric_limits<double>::infinity();
  return peak / final_acc;
}

// Ranks starting at 1, ties share their average rank.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx = iota_rows(v.size());
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

// Spearman rank correlation: Pearson correlation of average ranks.
inline double spearman_rho(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw config_error("length_mismatch", "spearman_rho needs equal-length inputs");
  if (xs.size() < 3) throw config_error("too_few_points", "spearman_rho needs at least 3 points");
  const std::vector<double> rx = average_ranks(xs), ry = average_ranks(ys);
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) throw config_error("constant_sequence", "spearman_rho is undefined for a constant sequence");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Fraction of poisoned samples x_i + delta_i the victim misclassifies.
template <typename T>
double transferability(const PoisonPack& pack, const ImageDataset& clean_ds, Model<T>& victim) {
  if (pack.mode != PoisonMode::sample_wise)
    throw config_error("class_wise_pack", "transferability is defined for sample-wise packs");
  const ImageDataset poisoned = apply_poison(clean_ds, pack);
  if (poisoned.size() == 0) return 0.0;
  std::size_t wrong = 0;
  const Labels pred = predict(victim, poisoned.images.template cast<T>());
  for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != poisoned.labels[i];
  return static_cast<double>(wrong) / static_cast<double>(poisoned.size());
}

// ---------------------------------------------------------------------------
// Report files

inline std::string curve_csv(const TrainReport& report) {
  std::string out = "epoch,train_loss,train_acc,test_acc\n";
  char line[128];
  for (const auto& r : report.records) {
    std::snprintf(line, sizeof line, "%zu,%.6f,%.6f,%.6f\n", r.epoch, r.train_loss, r.train_acc, r.test_acc);
    out += line;
  }
  return out;
}

inline nlohmann::ordered_json summary_json(const TrainReport& report, const std::string& poison_id,
                                           const std::string& config_hash) {
  const Peak peak = peak_accuracy(report);
  const auto thr = epochs_to_threshold(report, report.config.loss_threshold);
  const double gain = early_stop_gain(report);
  nlohmann::ordered_json j;
  j["poison_id"] = poison_id;
  j["peak_test_acc"] = peak.accuracy;
  j["peak_epoch"] = peak.epoch;
  j["final_test_acc"] = report.final_test_acc();
  j["epochs_to_threshold"] = thr ? nlohmann::ordered_json(*thr) : nlohmann::ordered_json(nullptr);
  j["loss_threshold"] = report.config.loss_threshold;
  j["early_stop_gain"] = std::isfinite(gain) ? nlohmann::ordered_json(gain) : nlohmann::ordered_json("inf");
  j["config_hash"] = config_hash;
  return j;
}

}  // namespace pb
