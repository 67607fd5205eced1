#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "poisonbench/autodiff.hpp"
#include "poisonbench/binary_io.hpp"
#include "poisonbench/model.hpp"

namespace pb {

// Desk-scale victim zoo.
//   cnn-a : 3 stages of conv-BN-ReLU + maxpool, widths 32/64/128 (~95k params at K=10)
//   cnn-b : deeper and narrower, residual blocks, widths 16/32/64
//   mlp   : two hidden ReLU layers, no convolution
inline std::vector<std::string> arch_names() { return {"cnn-a", "cnn-b", "mlp"}; }

inline ArchSpec arch_spec(const std::string& name, InputSpec input = {}) {
  ArchSpec s;
  s.name = name;
  s.input = input;
  if (name == "cnn-a") {
    s.family = ArchFamily::conv;
    s.stages = {{32, 1}, {64, 1}, {128, 1}};
  } else if (name == "cnn-b") {
    s.family = ArchFamily::residual;
    s.stages = {{16, 1}, {32, 1}, {64, 1}};
  } else if (name == "mlp") {
    s.family = ArchFamily::mlp;
    s.stages = {{128, 1}, {64, 1}};
  } else {
    throw config_error("unknown_architecture", "unknown architecture '" + name + "'");
  }
  return s;
}

namespace detail {

template <typename T>
void add_conv_bn_relu(Sequential<T>& net, const std::string& prefix, std::size_t in, std::size_t out) {
  net.template add<Conv2d<T>>(prefix + ".conv", in, out, 3, 1, 1);
  net.template add<BatchNorm<T>>(prefix + ".bn", out);
  net.template add<ReLU<T>>(prefix + ".relu");
}

template <typename T>
Sequential<T> assemble(const ArchSpec& spec) {
  Sequential<T> net;
  const InputSpec& in = spec.input;
  std::size_t ch = in.channels;
  std::size_t spatial = std::min(in.height, in.width);
  if (spec.family == ArchFamily::mlp) {
    net.template add<Flatten<T>>("flatten");
    std::size_t width = in.channels * in.height * in.width;
    for (std::size_t s = 0; s < spec.stages.size(); ++s)
      for (std::size_t b = 0; b < spec.stages[s].blocks; ++b) {
        const std::string p = "hidden" + std::to_string(s) + "." + std::to_string(b);
        net.template add<Linear<T>>(p + ".fc", width, spec.stages[s].width);
        net.template add<ReLU<T>>(p + ".relu");
        width = spec.stages[s].width;
      }
    net.template add<Linear<T>>("head", width, in.classes);
    return net;
  }
  for (std::size_t s = 0; s < spec.stages.size(); ++s) {
    const std::string sp = "stage" + std::to_string(s);
    const std::size_t w = spec.stages[s].width;
    if (spec.family == ArchFamily::conv) {
      for (std::size_t b = 0; b < spec.stages[s].blocks; ++b) {
        add_conv_bn_relu(net, sp + ".block" + std::to_string(b), ch, w);
        ch = w;
      }
    } else {
      add_conv_bn_relu(net, sp + ".proj", ch, w);
      ch = w;
      for (std::size_t b = 0; b < spec.stages[s].blocks; ++b) {
        const std::string bp = sp + ".res" + std::to_string(b);
        Sequential<T> body;
        add_conv_bn_relu(body, bp + ".a", w, w);
        body.template add<Conv2d<T>>(bp + ".b.conv", w, w, 3, 1, 1);
        body.template add<BatchNorm<T>>(bp + ".b.bn", w);
        net.template add<Residual<T>>(bp, std::move(body));
        net.template add<ReLU<T>>(bp + ".relu");
      }
    }
    if (spatial >= 2) {
      net.template add<MaxPool2<T>>(sp + ".pool");
      spatial /= 2;
    }
  }
  net.template add<GlobalAvgPool<T>>("gap");
  if (spec.classifier_width > 0) {
    net.template add<Linear<T>>("classifier", ch, spec.classifier_width);
    net.template add<ReLU<T>>("classifier.relu");
    ch = spec.classifier_width;
  }
  net.template add<Linear<T>>("head", ch, in.classes);
  return net;
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace detail

// Weights ~ U(-b, b) with b = sqrt(6 / fan_in); biases and BN shifts zero,
// BN scales one. Draws are made in double so float and double models built
// from the same seed agree up to rounding.
template <typename T>
Model<T> build_model(const ArchSpec& spec, std::uint64_t seed) {
  const ArchSpec reference = arch_spec(spec.name, spec.input);
  if (!(reference == spec))
    throw config_error("arch_mismatch", "spec '" + spec.name + "' differs from the registered structure");
  if (spec.input.classes < 2 || spec.input.channels == 0 || spec.input.height == 0 || spec.input.width == 0)
    throw config_error("bad_input_spec", "input spec needs C,H,W >= 1 and K >= 2");
  Model<T> model(spec, seed, detail::assemble<T>(spec));
  std::mt19937_64 rng(seed);
  for (Parameter<T>* p : model.parameters()) {
    if (!detail::ends_with(p->name, ".weight")) continue;
    const double fan_in = static_cast<double>(p->value.size() / p->value.dim(0));
    std::uniform_real_distribution<double> dist(-std::sqrt(6.0 / fan_in), std::sqrt(6.0 / fan_in));
    for (T& v : p->value.data()) v = static_cast<T>(dist(rng));
  }
  return model;
}

template <typename T>
Model<T> build_model(const std::string& name, InputSpec input, std::uint64_t seed) {
  return build_model<T>(arch_spec(name, input), seed);
}

// Argmax per row; ties resolve to the lowest class index.
template <typename T>
Labels argmax_rows(const Tensor<T>& logits) {
  Labels out(logits.dim(0));
  const std::size_t k = logits.dim(1);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T* z = logits.ptr() + i * k;
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (z[j] > z[best]) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

template <typename T>
Labels predict(Model<T>& model, const Tensor<T>& images, std::size_t batch_size = 256) {
  if (model.mode() != Mode::eval)
    throw state_error("train_mode_model", "predict requires a model in eval mode");
  const std::size_t n = images.dim(0);
  Labels out;
  out.reserve(n);
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < n; start += batch_size) {
    rows.clear();
    for (std::size_t i = start; i < std::min(n, start + batch_size); ++i) rows.push_back(i);
    const Labels part = argmax_rows(forward(model, gather_rows(images, rows), {.record = false}).value);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint: "PBMD", version, name, seed, then parameter tensors followed by
// normalization buffers, each as (rank, dims..., f32 values).

inline constexpr char kCheckpointMagic[4] = {'P', 'B', 'M', 'D'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

template <typename T>
std::vector<std::uint8_t> encode_checkpoint(Model<T>& model) {
  io::Writer w;
  w.bytes(kCheckpointMagic, 4);
  w.u8(kCheckpointVersion);
  w.str(model.spec().name);
  w.u64(model.seed());
  auto put = [&](const Tensor<T>& t) {
    w.u64(t.rank());
    for (std::size_t d : t.shape()) w.u64(d);
    for (T v : t.data()) w.f32(static_cast<float>(v));
  };
  for (auto* p : model.parameters()) put(p->value);
  for (auto* b : model.buffers()) put(*b);
  return w.buffer();
}

template <typename T>
void save_checkpoint(Model<T>& model, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(model));
}

// The input spec is not part of the file; tensor shapes are checked against it.
template <typename T>
Model<T> decode_checkpoint(const std::vector<std::uint8_t>& bytes, InputSpec input) {
  io::Reader r(bytes, "checkpoint");
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw data_error("bad_magic", "not a PBMD checkpoint");
  if (const auto v = r.u8(); v != kCheckpointVersion)
    throw data_error("version_mismatch", "checkpoint version " + std::to_string(v));
  const std::string name = r.str();
  const std::uint64_t seed = r.u64();
  Model<T> model = build_model<T>(arch_spec(name, input), seed);
  auto take = [&](Tensor<T>& t) {
    const std::uint64_t rank = r.u64();
    if (rank > 8) throw data_error("corrupt_checkpoint", "implausible tensor rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    if (shape != t.shape())
      throw data_error("corrupt_checkpoint", "tensor " + shape_str(shape) + " where model expects " +
                                                 shape_str(t.shape()));
    r.need(t.size() * 4);
    for (T& v : t.data()) v = static_cast<T>(r.f32());
  };
  for (auto* p : model.parameters()) take(p->value);
  for (auto* b : model.buffers()) take(*b);
  if (!r.at_end()) throw data_error("corrupt_checkpoint", "trailing bytes after last tensor");
  model.eval();
  return model;
}

template <typename T>
Model<T> load_checkpoint(const std::filesystem::path& path, InputSpec input) {
  return decode_checkpoint<T>(io::read_file(path), input);
}

}  // namespace pb
