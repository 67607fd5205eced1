#pragma once

#include <Eigen/Core>

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "poisonbench/tensor.hpp"

namespace pb {

enum class Mode { train, eval };

// Trainable tensor with its gradient and SGD momentum buffer.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> gradient;
  Tensor<T> momentum_buffer;

  Parameter(std::string n, Tensor<T> v)
      : name(std::move(n)),
        value(std::move(v)),
        gradient(value.shape()),
        momentum_buffer(value.shape()) {}

  void zero_grad() { gradient.fill(T(0)); }
};

struct LayerCache {
  virtual ~LayerCache() = default;
};

template <typename T>
class Layer;

// Per-forward record of layer caches, consumed by a single backward sweep.
template <typename T>
struct Tape {
  struct Entry {
    Layer<T>* layer;
    std::unique_ptr<LayerCache> cache;
  };
  std::vector<Entry> entries;

  void push(Layer<T>* layer, std::unique_ptr<LayerCache> cache) {
    entries.push_back({layer, std::move(cache)});
  }
};

template <typename T>
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  // When `tape` is non-null the layer records what backward needs.
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode, Tape<T>* tape) = 0;
  // Returns the input gradient; accumulates parameter gradients when
  // `param_grads` is set.
  virtual Tensor<T> backward(const LayerCache& cache, const Tensor<T>& grad_out, bool param_grads) = 0;

  virtual std::vector<Parameter<T>*> parameters() { return {}; }
  virtual std::vector<Tensor<T>*> buffers() { return {}; }
  virtual std::unique_ptr<Layer<T>> clone() const = 0;

  const std::string& name() const { return name_; }

 protected:
  [[noreturn]] void fail_shape(const Tensor<T>& x, const std::string& expectation) const {
    throw shape_error("layer '" + name_ + "': expected " + expectation + ", got " +
                      shape_str(x.shape()));
  }

 private:
  std::string name_;
};

template <typename T>
using MatrixRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatrixRM<T>>;
template <typename T>
using ConstMapRM = Eigen::Map<const MatrixRM<T>>;

namespace detail {

template <typename C>
const C& cache_as(const LayerCache& c) {
  return static_cast<const C&>(c);
}

template <typename T>
struct InputCache : LayerCache {
  Tensor<T> input;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolution (square kernel, symmetric zero padding), im2col + GEMM.

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
         std::size_t stride = 1, std::size_t padding = 0)
      : Layer<T>(std::move(name)),
        in_(in_ch),
        out_(out_ch),
        k_(kernel),
        stride_(stride),
        pad_(padding),
        weight_(this->name() + ".weight", Tensor<T>({out_ch, in_ch, kernel, kernel})),
        bias_(this->name() + ".bias", Tensor<T>({out_ch})) {}

  Tensor<T> forward(const Tensor<T>& x, Mode, Tape<T>* tape) override {
    if (x.rank() != 4 || x.dim(1) != in_)
      this->fail_shape(x, "[N x " + std::to_string(in_) + " x H x W]");
    const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    if (h + 2 * pad_ < k_ || w + 2 * pad_ < k_) this->fail_shape(x, "spatial size >= kernel");
    const std::size_t ho = out_size(h), wo = out_size(w);
    Tensor<T> y({n, out_, ho, wo});
    MatrixRM<T> cols(in_ * k_ * k_, ho * wo);
    ConstMapRM<T> wmat(weight_.value.ptr(), out_, in_ * k_ * k_);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(bias_.value.ptr(), out_);
    for (std::size_t i = 0; i < n; ++i) {
      im2col(x.ptr() + i * in_ * h * w, h, w, ho, wo, cols.data());
      MapRM<T> ymat(y.ptr() + i * out_ * ho * wo, out_, ho * wo);
      ymat.noalias() = wmat * cols;
      ymat.colwise() += bias;
    }
    if (tape) {
      auto c = std::make_unique<detail::InputCache<T>>();
      c->input = x;
      tape->push(this, std::move(c));
    }
    return y;
  }

  Tensor<T> backward(const LayerCache& cache, const Tensor<T>& gy, bool param_grads) override {
    const Tensor<T>& x = detail::cache_as<detail::InputCache<T>>(cache).input;
    const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const std::size_t ho = out_size(h), wo = out_size(w);
    Tensor<T> gx(x.shape());
    MatrixRM<T> cols(in_ * k_ * k_, ho * wo);
    MatrixRM<T> gcols(in_ * k_ * k_, ho * wo);
    ConstMapRM<T> wmat(weight_.value.ptr(), out_, in_ * k_ * k_);
    MapRM<T> gw(weight_.gradient.ptr(), out_, in_ * k_ * k_);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gb(bias_.gradient.ptr(), out_);
    for (std::size_t i = 0; i < n; ++i) {
      ConstMapRM<T> gymat(gy.ptr() + i * out_ * ho * wo, out_, ho * wo);
      if (param_grads) {
        im2col(x.ptr() + i * in_ * h * w, h, w, ho, wo, cols.data());
        gw.noalias() += gymat * cols.transpose();
        gb += gymat.rowwise().sum();
      }
      gcols.noalias() = wmat.transpose() * gymat;
      col2im(gcols.data(), h, w, ho, wo, gx.ptr() + i * in_ * h * w);
    }
    return gx;
  }

  std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d>(*this); }

 private:
  std::size_t out_size(std::size_t s) const { return (s + 2 * pad_ - k_) / stride_ + 1; }

  void im2col(const T* img, std::size_t h, std::size_t w, std::size_t ho, std::size_t wo,
              T* cols) const {
    for (std::size_t c = 0; c < in_; ++c)
      for (std::size_t ky = 0; ky < k_; ++ky)
        for (std::size_t kx = 0; kx < k_; ++kx) {
          T* dst = cols + ((c * k_ + ky) * k_ + kx) * ho * wo;
          for (std::size_t oy = 0; oy < ho; ++oy) {
            const long iy = static_cast<long>(oy * stride_ + ky) - static_cast<long>(pad_);
            for (std::size_t ox = 0; ox < wo; ++ox) {
              const long ix = static_cast<long>(ox * stride_ + kx) - static_cast<long>(pad_);
              const bool inside = iy >= 0 && iy < static_cast<long>(h) && ix >= 0 &&
                                  ix < static_cast<long>(w);
              dst[oy * wo + ox] = inside ? img[(c * h + iy) * w + ix] : T(0);
            }
          }
        }
  }

  void col2im(const T* cols, std::size_t h, std::size_t w, std::size_t ho, std::size_t wo,
              T* img) const {
    for (std::size_t c = 0; c < in_; ++c)
      for (std::size_t ky = 0; ky < k_; ++ky)
        for (std::size_t kx = 0; kx < k_; ++kx) {
          const T* src = cols + ((c * k_ + ky) * k_ + kx) * ho * wo;
          for (std::size_t oy = 0; oy < ho; ++oy) {
            const long iy = static_cast<long>(oy * stride_ + ky) - static_cast<long>(pad_);
            if (iy < 0 || iy >= static_cast<long>(h)) continue;
            for (std::size_t ox = 0; ox < wo; ++ox) {
              const long ix = static_cast<long>(ox * stride_ + kx) - static_cast<long>(pad_);
              if (ix < 0 || ix >= static_cast<long>(w)) continue;
              img[(c * h + iy) * w + ix] += src[oy * wo + ox];
            }
          }
        }
  }

  std::size_t in_, out_, k_, stride_, pad_;
  Parameter<T> weight_;
  Parameter<T> bias_;
};

// ---------------------------------------------------------------------------

template <typename T>
class Linear final : public Layer<T> {
 public:
  Linear(std::string name, std::size_t in, std::size_t out)
      : Layer<T>(std::move(name)),
        in_(in),
        out_(out),
        weight_(this->name() + ".weight", Tensor<T>({out, in})),
        bias_(this->name() + ".bias", Tensor<T>({out})) {}

  Tensor<T> forward(const Tensor<T>& x, Mode, Tape<T>* tape) override {
    if (x.rank() != 2 || x.dim(1) != in_) this->fail_shape(x, "[N x " + std::to_string(in_) + "]");
    const std::size_t n = x.dim(0);
    Tensor<T> y({n, out_});
    ConstMapRM<T> xm(x.ptr(), n, in_);
    ConstMapRM<T> wm(weight_.value.ptr(), out_, in_);
    MapRM<T> ym(y.ptr(), n, out_);
    ym.noalias() = xm * wm.transpose();
    ym.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias_.value.ptr(), out_);
    if (tape) {
      auto c = std::make_unique<detail::InputCache<T>>();
      c->input = x;
      tape->push(this, std::move(c));
    }
    return y;
  }

  Tensor<T> backward(const LayerCache& cache, const Tensor<T>& gy, bool param_grads) override {
    const Tensor<T>& x = detail::cache_as<detail::InputCache<T>>(cache).input;
    const std::size_t n = x.dim(0);
    ConstMapRM<T> xm(x.ptr(), n, in_);
    ConstMapRM<T> gym(gy.ptr(), n, out_);
    ConstMapRM<T> wm(weight_.value.ptr(), out_, in_);
    if (param_grads) {
      MapRM<T>(weight_.gradient.ptr(), out_, in_).noalias() += gym.transpose() * xm;
      Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias_.gradient.ptr(), out_) +=
          gym.colwise().sum();
    }
    Tensor<T> gx(x.shape());
    MapRM<T>(gx.ptr(), n, in_).noalias() = gym * wm;
    return gx;
  }

  std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Linear>(*this); }

 private:
  std::size_t in_, out_;
  Parameter<T> weight_;
  Parameter<T> bias_;
};

// ---------------------------------------------------------------------------

// Gradient at exactly zero is zero.
template <typename T>
class ReLU final : public Layer<T> {
 public:
  using Layer<T>::Layer;

  Tensor<T> forward(const Tensor<T>& x, Mode, Tape<T>* tape) override {
    Tensor<T> y = x;
    for (T& v : y.data()) v = v > T(0) ? v : T(0);
    if (tape) {
      auto c = std::make_unique<detail::InputCache<T>>();
      c->input = x;
      tape->push(this, std::move(c));
    }
    return y;
  }

  Tensor<T> backward(const LayerCache& cache, const Tensor<T>& gy, bool) override {
    const Tensor<T>& x = detail::cache_as<detail::InputCache<T>>(cache).input;
    Tensor<T> gx = gy;
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (!(x[i] > T(0))) gx[i] = T(0);
    return gx;
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ReLU>(*this); }
};

// ---------------------------------------------------------------------------

// 2x2 window, stride 2; odd trailing rows/columns are dropped.
template <typename T>
class MaxPool2 final : public Layer<T> {
 public:
  using Layer<T>::Layer;

  Tensor<T> forward(const Tensor<T>& x, Mode, Tape<T>* tape) override {
    if (x.rank() != 4 || x.dim(2) < 2 || x.dim(3) < 2) this->fail_shape(x, "[N x C x H>=2 x W>=2]");
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t ho = h / 2, wo = w / 2;
    Tensor<T> y({n, c, ho, wo});
    auto cache = tape ? std::make_unique<Cache>() : nullptr;
    if (cache) {
      cache->input_shape = x.shape();
      cache->argmax.resize(y.size());
    }
    for (std::size_t p = 0; p < n * c; ++p) {
      const T* src = x.ptr() + p * h * w;
      for (std::size_t oy = 0; oy < ho; ++oy)
        for (std::size_t ox = 0; ox < wo; ++ox) {
          std::size_t best = (2 * oy) * w + 2 * ox;
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t idx = (2 * oy + dy) * w + 2 * ox + dx;
              if (src[idx] > src[best]) best = idx;
            }
          const std::size_t o = (p * ho + oy) * wo + ox;
          y[o] = src[best];
          if (cache) cache->argmax[o] = p * h * w + best;
        }
    }
    if (tape) tape->push(this, std::move(cache));
    return y;
  }

  Tensor<T> backward(const LayerCache& cache, const Tensor<T>& gy, bool) override {
    const auto& c = detail::cache_as<Cache>(cache);
    Tensor<T> gx(c.input_shape);
    for (std::size_t o = 0; o < gy.size(); ++o) gx[c.argmax[o]] += gy[o];
    return gx;
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<MaxPool2>(*this); }

 private:
  struct Cache : LayerCache {
    Shape input_shape;
    std::vector<std::size_t> argmax;
  };
};

// ---------------------------------------------------------------------------

template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  using Layer<T>::Layer;

  Tensor<T> forward(const Tensor<T>& x, Mode, Tape<T>* tape) override {
    if (x.rank() != 4) this->fail_shape(x, "[N x C x H x W]");
    const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    Tensor<T> y({n, c});
    for (std::size_t p = 0; p < n * c; ++p) {
      T s = 0;
      for (std::size_t i = 0; i < hw; ++i) s += x[p * hw + i];
      y[p] = s / static_cast<T>(hw);
    }
    if (tape) {
      auto cache = std::make_unique<ShapeCache>();
      cache->input_shape = x.shape();
      tape->push(this, std::move(cache));
    }
    return y;
  }

  Tensor<T> backward(const LayerCache& cache, const Tensor<T>& gy, bool) override {
    const Shape& s = detail::cache_as<ShapeCache>(cache).input_shape;
    const std::size_t hw = s[2] * s[3];
    Tensor<T> gx(s);
    for (std::size_t p = 0; p < gy.size(); ++p) {
      const T g = gy[p] / static_cast<T>(hw);
      for (std::size_t i = 0; i < hw; ++i) gx[p * hw + i] = g;
    }
    return gx;
  }

  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<GlobalAvgPool>(*this);
  }

 private:
  struct ShapeCache : LayerCache {
    Shape input_shape;
  };
};

template <typename T>
class Flatten final : public Layer<T> {
 public:
  using Layer<T>::Layer;

  Tensor<T> forward(const Tensor<T>& x, Mode, Tape<T>* tape) override {
    if (x.rank() < 2) this->fail_shape(x, "rank >= 2");
    if (tape) {
      auto cache = std::make_unique<ShapeCache>();
      cache->input_shape = x.shape();
      tape->push(this, std::move(cache));
    }
    return x.reshaped({x.dim(0), x.row_size()});
  }

  Tensor<T> backward(const LayerCache& cache, const Tensor<T>& gy, bool) override {
    return gy.reshaped(detail::cache_as<ShapeCache>(cache).input_shape);
  }

  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Flatten>(*this); }

 private:
  struct ShapeCache : LayerCache {
    Shape input_shape;
  };
};

// ---------------------------------------------------------------------------
// Batch normalization over dim 1 of [N x C] or [N x C x H x W].
// Train mode normalizes with batch statistics and updates running estimates;
// eval mode uses the running estimates only.

template <typename T>
class BatchNorm final : public Layer<T> {
 public:
  BatchNorm(std::string name, std::size_t channels, T momentum = T(0.1), T eps = T(1e-5))
      : Layer<T>(std::move(name)),
        channels_(channels),
        momentum_(momentum),
        eps_(eps),
        gamma_(this->name() + ".gamma", Tensor<T>({channels}, T(1))),
        beta_(this->name() + ".beta", Tensor<T>({channels})),
        running_mean_({channels}),
        running_var_({channels}, T(1)) {}

  Tensor<T> forward(const Tensor<T>& x, Mode mode, Tape<T>* tape) override {
    if ((x.rank() != 2 && x.rank() != 4) || x.dim(1) != channels_)
      this->fail_shape(x, "[N x " + std::to_string(channels_) + " (x H x W)]");
    const std::size_t n = x.dim(0), inner = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
    const std::size_t count = n * inner;
    Tensor<T> y(x.shape());
    auto cache = tape ? std::make_unique<Cache>() : nullptr;
    if (cache) {
      cache->mode = mode;
      cache->xhat = Tensor<T>(x.shape());
      cache->inv_std.resize(channels_);
    }
    for (std::size_t c = 0; c < channels_; ++c) {
      T mean, var;
      if (mode == Mode::train) {
        long double s = 0, ss = 0;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < inner; ++j) s += x[(i * channels_ + c) * inner + j];
        mean = static_cast<T>(s / count);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < inner; ++j) {
            const long double d = x[(i * channels_ + c) * inner + j] - mean;
            ss += d * d;
          }
        var = static_cast<T>(ss / count);
        const T unbiased = count > 1 ? static_cast<T>(ss / (count - 1)) : var;
        running_mean_[c] = (T(1) - momentum_) * running_mean_[c] + momentum_ * mean;
        running_var_[c] = (T(1) - momentum_) * running_var_[c] + momentum_ * unbiased;
      } else {
        mean = running_mean_[c];
        var = running_var_[c];
      }
      const T inv_std = T(1) / std::sqrt(var + eps_);
      const T g = gamma_.value[c], b = beta_.value[c];
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < inner; ++j) {
          const std::size_t idx = (i * channels_ + c) * inner + j;
          const T xh = (x[idx] - mean) * inv_std;
          y[idx] = g * xh + b;
          if (cache) cache->xhat[idx] = xh;
        }
      if (cache) cache->inv_std[c] = inv_std;
    }
    if (tape) tape->push(this, std::move(cache));
    return y;
  }

  Tensor<T> backward(const LayerCache& cache_base, const Tensor<T>& gy, bool param_grads) override {
    const auto& cache = detail::cache_as<Cache>(cache_base);
    const Tensor<T>& xhat = cache.xhat;
    const std::size_t n = xhat.dim(0), inner = xhat.rank() == 4 ? xhat.dim(2) * xhat.dim(3) : 1;
    const T count = static_cast<T>(n * inner);
    Tensor<T> gx(xhat.shape());
    for (std::size_t c = 0; c < channels_; ++c) {
      T sum_gy = 0, sum_gy_xhat = 0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < inner; ++j) {
          const std::size_t idx = (i * channels_ + c) * inner + j;
          sum_gy += gy[idx];
          sum_gy_xhat += gy[idx] * xhat[idx];
        }
      if (param_grads) {
        gamma_.gradient[c] += sum_gy_xhat;
        beta_.gradient[c] += sum_gy;
      }
      const T scale = gamma_.value[c] * cache.inv_std[c];
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < inner; ++j) {
          const std::size_t idx = (i * channels_ + c) * inner + j;
          if (cache.mode == Mode::train)
            gx[idx] = scale * (gy[idx] - sum_gy / count - xhat[idx] * sum_gy_xhat / count);
          else
            gx[idx] = scale * gy[idx];
        }
    }
    return gx;
  }

  std::vector<Parameter<T>*> parameters() override { return {&gamma_, &beta_}; }
  std::vector<Tensor<T>*> buffers() override { return {&running_mean_, &running_var_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<BatchNorm>(*this); }

 private:
  struct Cache : LayerCache {
    Mode mode;
    Tensor<T> xhat;
    std::vector<T> inv_std;
  };

  std::size_t channels_;
  T momentum_, eps_;
  Parameter<T> gamma_;
  Parameter<T> beta_;
  Tensor<T> running_mean_;
  Tensor<T> running_var_;
};

// ---------------------------------------------------------------------------

template <typename T>
class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& other) {
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
  }
  Sequential& operator=(const Sequential& other) {
    if (this != &other) *this = Sequential(other);
    return *this;
  }
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <typename L, typename... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }
  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, Tape<T>* tape) {
    Tensor<T> h = x;
    for (auto& l : layers_) h = l->forward(h, mode, tape);
    return h;
  }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    for (auto& l : layers_)
      for (auto* p : l->parameters()) out.push_back(p);
    return out;
  }
  std::vector<Tensor<T>*> buffers() {
    std::vector<Tensor<T>*> out;
    for (auto& l : layers_)
      for (auto* b : l->buffers()) out.push_back(b);
    return out;
  }

  std::size_t size() const { return layers_.size(); }
  Layer<T>& operator[](std::size_t i) { return *layers_[i]; }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

// Runs the tape in reverse, returning the gradient w.r.t. the tape's input.
template <typename T>
Tensor<T> backprop(Tape<T>& tape, Tensor<T> grad, bool param_grads = true) {
  for (auto it = tape.entries.rbegin(); it != tape.entries.rend(); ++it)
    grad = it->layer->backward(*it->cache, grad, param_grads);
  return grad;
}

// y = x + body(x). The body must preserve shape.
template <typename T>
class Residual final : public Layer<T> {
 public:
  Residual(std::string name, Sequential<T> body) : Layer<T>(std::move(name)), body_(std::move(body)) {}

  Tensor<T> forward(const Tensor<T>& x, Mode mode, Tape<T>* tape) override {
    std::unique_ptr<Cache> cache = tape ? std::make_unique<Cache>() : nullptr;
    Tensor<T> y = body_.forward(x, mode, cache ? &cache->inner : nullptr);
    if (y.shape() != x.shape()) this->fail_shape(y, "body output " + shape_str(x.shape()));
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
    if (tape) tape->push(this, std::move(cache));
    return y;
  }

  Tensor<T> backward(const LayerCache& cache, const Tensor<T>& gy, bool param_grads) override {
    // Tape entries are consumed by exactly one backward, so the cast is safe.
    auto& inner = const_cast<Tape<T>&>(detail::cache_as<Cache>(cache).inner);
    Tensor<T> gx = backprop(inner, gy, param_grads);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
    return gx;
  }

  std::vector<Parameter<T>*> parameters() override { return body_.parameters(); }
  std::vector<Tensor<T>*> buffers() override { return body_.buffers(); }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Residual>(*this); }

 private:
  struct Cache : LayerCache {
    Tape<T> inner;
  };
  Sequential<T> body_;
};

}  // namespace pb
