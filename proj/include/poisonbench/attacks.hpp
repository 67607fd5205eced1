#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "poisonbench/autodiff.hpp"
#include "poisonbench/zoo.hpp"

namespace pb {

enum class TargetRule { next_class, fixed };

struct AttackConfig {
  int steps = 10;
  double step_size = 0.0;  // pixel units
  double epsilon = 8.0 / 255.0;
  bool targeted = true;
  TargetRule target_rule = TargetRule::next_class;
  int fixed_target = 0;
  double momentum_mu = 0.0;  // 0 selects PGD, > 0 selects MI-FGSM
  bool random_start = false;
  std::uint64_t rng_seed = 0;
  std::size_t batch_size = 128;

  void validate(std::size_t num_classes) const {
    if (steps < 1) throw config_error("bad_attack_config", "attack steps must be >= 1");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw config_error("bad_attack_config", "epsilon must be >= 0");
    if (!(step_size > 0.0)) throw config_error("bad_attack_config", "step_size must be > 0");
    // A step of more than 2 eps cannot land anywhere the projection would not.
    // With eps == 0 the ball is a point and any step size is harmless.
    if (epsilon > 0.0 && step_size > 2.0 * epsilon * (1.0 + 1e-12))
      throw config_error("bad_attack_config", "step_size must be <= 2 * epsilon");
    if (!(momentum_mu >= 0.0)) throw config_error("bad_attack_config", "momentum_mu must be >= 0");
    if (batch_size == 0) throw config_error("bad_attack_config", "batch_size must be >= 1");
    if (target_rule == TargetRule::fixed && (fixed_target < 0 || static_cast<std::size_t>(fixed_target) >= num_classes))
      throw config_error("bad_attack_config", "fixed target outside [0, K)");
  }
};

// 1.25 * 2 eps / steps, kept within [eps / 255, 2 eps].
inline double default_step_size(double epsilon, int steps) {
  const double s = 2.5 * epsilon / static_cast<double>(std::max(steps, 1));
  return std::clamp(s, epsilon / 255.0, 2.0 * epsilon);
}

inline int target_label(int y, std::size_t num_classes, const AttackConfig& cfg) {
  if (cfg.target_rule == TargetRule::fixed) return cfg.fixed_target;
  return static_cast<int>((static_cast<std::size_t>(y) + 1) % num_classes);
}

inline std::string describe(const AttackConfig& cfg) {
  std::ostringstream os;
  os << (cfg.momentum_mu > 0 ? "mifgsm" : "pgd") << " steps=" << cfg.steps << " step_size=" << cfg.step_size
     << " eps=" << cfg.epsilon << " targeted=" << (cfg.targeted ? 1 : 0);
  if (cfg.targeted)
    os << " rule=" << (cfg.target_rule == TargetRule::next_class ? "next_class" : "fixed:" + std::to_string(cfg.fixed_target));
  if (cfg.momentum_mu > 0) os << " mu=" << cfg.momentum_mu;
  if (cfg.random_start) os << " random_start seed=" << cfg.rng_seed;
  return os.str();
}

// Called after each iterate with (step, delta, momentum); momentum is empty for PGD.
template <typename T>
using AttackObserver = std::function<void(int, const Tensor<T>&, const Tensor<T>&)>;

namespace detail {

template <typename T>
T sign(T v) {
  return static_cast<T>((v > T(0)) - (v < T(0)));
}

// Clip delta to the eps-ball, then pull x + delta back into [0, 1]. The box
// step only touches coordinates that actually leave [0, 1].
template <typename T>
void project(std::span<T> delta, std::span<const T> x, T eps) {
  for (std::size_t i = 0; i < delta.size(); ++i) {
    T d = std::clamp(delta[i], -eps, eps);
    const T v = x[i] + d;
    if (v > T(1)) d = T(1) - x[i];
    else if (v < T(0)) d = -x[i];
    delta[i] = d;
  }
}

template <typename T>
Tensor<T> input_gradient(Model<T>& model, const Tensor<T>& x, const Tensor<T>& delta, const Labels& labels) {
  Tensor<T> xa = x;
  for (std::size_t i = 0; i < xa.size(); ++i) xa[i] += delta[i];
  auto logits = forward(model, xa, {.record = true, .input_grad = true, .param_grads = false});
  auto loss = cross_entropy(logits, labels);
  backward(loss);
  Tensor<T> g = loss.input_gradient();
  if (!g.all_finite()) throw numeric_error("non_finite_gradient", "attack gradient is not finite");
  return g;
}

template <typename T>
Tensor<T> sign_attack(Model<T>& model, const Tensor<T>& x, const Labels& y, const AttackConfig& cfg, bool use_momentum,
                      const AttackObserver<T>& observer, std::uint64_t first_sample = 0) {
  if (model.mode() != Mode::eval) throw state_error("train_mode_model", "attacks require a frozen (eval mode) model");
  const std::size_t k = model.spec().input.classes;
  cfg.validate(k);
  if (x.rank() != 4 || x.dim(0) != y.size()) throw shape_error("attack: images/labels size mismatch");
  Labels loss_labels = y;
  if (cfg.targeted)
    for (int& l : loss_labels) l = target_label(l, k, cfg);
  // Ascend on the true label, descend toward the target.
  const T direction = cfg.targeted ? T(-1) : T(1);
  const T eps = static_cast<T>(cfg.epsilon);
  const T alpha = static_cast<T>(cfg.step_size);
  const std::size_t n = x.dim(0), rs = x.row_size();

  Tensor<T> delta(x.shape());
  if (cfg.random_start) {
    for (std::size_t i = 0; i < n; ++i) {
      // Independent stream per sample so batching does not change the draw.
      std::mt19937_64 rng(cfg.rng_seed ^ (0x9e3779b97f4a7c15ULL * (first_sample + i + 1)));
      std::uniform_real_distribution<double> u(-cfg.epsilon, cfg.epsilon);
      for (std::size_t j = 0; j < rs; ++j) delta[i * rs + j] = static_cast<T>(u(rng));
    }
  }
  detail::project<T>(delta.data(), x.data(), eps);

  Tensor<T> momentum = use_momentum ? Tensor<T>(x.shape()) : Tensor<T>();
  for (int step = 0; step < cfg.steps; ++step) {
    const Tensor<T> g = input_gradient(model, x, delta, loss_labels);
    if (use_momentum) {
      const T mu = static_cast<T>(cfg.momentum_mu);
      for (std::size_t i = 0; i < n; ++i) {
        T l1 = 0;
        for (std::size_t j = 0; j < rs; ++j) l1 += std::abs(g[i * rs + j]);
        for (std::size_t j = 0; j < rs; ++j) {
          // A zero gradient contributes nothing rather than 0/0.
          const T normalized = l1 > T(0) ? g[i * rs + j] / l1 : T(0);
          momentum[i * rs + j] = mu * momentum[i * rs + j] + normalized;
        }
      }
    }
    const Tensor<T>& dir = use_momentum ? momentum : g;
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] += direction * alpha * sign(dir[i]);
    detail::project<T>(delta.data(), x.data(), eps);
    if (observer) observer(step, delta, momentum);
  }
  return delta;
}

}  // namespace detail

// Projected sign-gradient ascent (untargeted) or descent toward the target
// label (targeted) inside the eps-ball and the [0,1] pixel box.
template <typename T>
Tensor<T> pgd_attack(Model<T>& model, const Tensor<T>& x, const Labels& y, const AttackConfig& cfg,
                     const AttackObserver<T>& observer = {}) {
  if (cfg.momentum_mu != 0.0) throw config_error("bad_attack_config", "pgd_attack needs momentum_mu == 0");
  return detail::sign_attack(model, x, y, cfg, false, observer);
}

// Momentum iterative FGSM: accumulates l1-normalised gradients,
// g <- mu g + grad / |grad|_1, and steps along sign(g). mu == 0 degenerates
// to sign-gradient PGD.
template <typename T>
Tensor<T> mifgsm_attack(Model<T>& model, const Tensor<T>& x, const Labels& y, const AttackConfig& cfg,
                        const AttackObserver<T>& observer = {}) {
  return detail::sign_attack(model, x, y, cfg, true, observer);
}

}  // namespace pb
