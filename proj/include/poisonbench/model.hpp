#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poisonbench/layers.hpp"

namespace pb {

struct InputSpec {
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t classes = 10;

  friend bool operator==(const InputSpec&, const InputSpec&) = default;
};

enum class ArchFamily { conv, residual, mlp };

struct Stage {
  std::size_t width;
  std::size_t blocks;

  friend bool operator==(const Stage&, const Stage&) = default;
};

// Structural description of a victim network. Instances come from the
// registry in zoo.hpp, so equal names imply equal structure.
struct ArchSpec {
  std::string name;
  ArchFamily family = ArchFamily::conv;
  std::vector<Stage> stages;
  std::size_t classifier_width = 0;  // hidden linear layer before the output; 0 = none
  InputSpec input;

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

template <typename T>
class Model {
 public:
  Model(ArchSpec spec, std::uint64_t seed, Sequential<T> net)
      : spec_(std::move(spec)), seed_(seed), net_(std::move(net)) {}

  const ArchSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }

  Mode mode() const { return mode_; }
  void set_mode(Mode m) { mode_ = m; }
  void train() { mode_ = Mode::train; }
  void eval() { mode_ = Mode::eval; }

  Sequential<T>& net() { return net_; }

  std::vector<Parameter<T>*> parameters() { return net_.parameters(); }
  // Non-trainable state (normalization running statistics).
  std::vector<Tensor<T>*> buffers() { return net_.buffers(); }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : parameters()) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

 private:
  ArchSpec spec_;
  std::uint64_t seed_;
  Sequential<T> net_;
  Mode mode_ = Mode::train;
};

}  // namespace pb
