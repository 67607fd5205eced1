#pragma once

#include <cmath>
#include <random>
#include <sstream>

#include "poisonbench/dct.hpp"
#include "poisonbench/poison_pack.hpp"

namespace pb {

struct ImageShape {
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;
};

// Patch grid for a regions noise. Square counts tile as sqrt(n) x sqrt(n);
// n = 2 splits into two vertical halves and n = 2 m^2 (128) into an m x 2m grid.
struct RegionGrid {
  std::size_t rows;
  std::size_t cols;
};

inline RegionGrid region_grid(std::size_t n_regions) {
  switch (n_regions) {
    case 1: return {1, 1};
    case 2: return {1, 2};
    case 4: return {2, 2};
    case 16: return {4, 4};
    case 64: return {8, 8};
    case 128: return {8, 16};
    case 1024: return {32, 32};
    default:
      throw config_error("unsupported_regions", "n_regions must be one of 1,2,4,16,64,128,1024 (got " +
                                                    std::to_string(n_regions) + ")");
  }
}

// Class-wise regions noise: each class gets n_regions Bernoulli(0.5) colour
// vectors mapped {0,1} -> {-eps,+eps}, each painted over one patch.
inline PoisonPack gen_regions_noise(std::size_t n_regions, std::size_t num_classes, float epsilon,
                                    std::uint64_t seed, ImageShape shape = {}) {
  const RegionGrid grid = region_grid(n_regions);
  if (shape.height % grid.rows != 0 || shape.width % grid.cols != 0)
    throw config_error("unsupported_regions", std::to_string(grid.rows) + "x" + std::to_string(grid.cols) +
                                                  " patch grid does not divide " + std::to_string(shape.height) +
                                                  "x" + std::to_string(shape.width));
  if (num_classes < 2) throw config_error("bad_classes", "need K >= 2");
  const std::size_t ph = shape.height / grid.rows, pw = shape.width / grid.cols;
  PoisonPack pack;
  pack.mode = PoisonMode::class_wise;
  pack.epsilon = epsilon;
  pack.num_classes = num_classes;
  pack.deltas = Tensor<float>({num_classes, shape.channels, shape.height, shape.width});
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::vector<float> colours(n_regions * shape.channels);
  for (std::size_t k = 0; k < num_classes; ++k) {
    for (float& c : colours) c = coin(rng) ? epsilon : -epsilon;
    float* d = pack.deltas.ptr() + k * pack.deltas.row_size();
    for (std::size_t c = 0; c < shape.channels; ++c)
      for (std::size_t y = 0; y < shape.height; ++y)
        for (std::size_t x = 0; x < shape.width; ++x) {
          const std::size_t region = (y / ph) * grid.cols + x / pw;
          d[(c * shape.height + y) * shape.width + x] = colours[region * shape.channels + c];
        }
  }
  std::ostringstream prov;
  prov << "regions n=" << n_regions << " grid=" << grid.rows << "x" << grid.cols << " p=0.5 eps=" << epsilon
       << " seed=" << seed;
  pack.provenance = prov.str();
  return pack;
}

// Spatial field whose DCT spectrum is standard Gaussian on the top-left
// n_freq x n_freq block and zero elsewhere.
inline Tensor<double> lowfreq_field(std::size_t n_freq, std::size_t size, std::mt19937_64& rng) {
  if (n_freq == 0 || n_freq > size) throw config_error("bad_n_freq", "n_freq must be in [1, H]");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Tensor<double> coeffs({size, size});
  for (std::size_t u = 0; u < n_freq; ++u)
    for (std::size_t v = 0; v < n_freq; ++v) coeffs[u * size + v] = gauss(rng);
  return idct2(coeffs);
}

// Class-wise low-frequency noise; each (class, channel) field is rescaled so
// its largest magnitude equals epsilon.
inline PoisonPack gen_lowfreq_noise(std::size_t n_freq, std::size_t num_classes, float epsilon, std::uint64_t seed,
                                    ImageShape shape = {}) {
  if (n_freq < 2 || n_freq > 8) throw config_error("bad_n_freq", "n_freq must be in [2, 8] (got " + std::to_string(n_freq) + ")");
  if (shape.height != shape.width) throw config_error("bad_shape", "low-frequency noise needs square images");
  if (n_freq > shape.height) throw config_error("bad_n_freq", "n_freq exceeds image size");
  if (num_classes < 2) throw config_error("bad_classes", "need K >= 2");
  const std::size_t hw = shape.height * shape.width;
  PoisonPack pack;
  pack.mode = PoisonMode::class_wise;
  pack.epsilon = epsilon;
  pack.num_classes = num_classes;
  pack.deltas = Tensor<float>({num_classes, shape.channels, shape.height, shape.width});
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < num_classes; ++k)
    for (std::size_t c = 0; c < shape.channels; ++c) {
      const Tensor<double> field = lowfreq_field(n_freq, shape.height, rng);
      const double peak = field.max_abs();
      const double scale = peak > 0 ? static_cast<double>(epsilon) / peak : 0.0;
      float* d = pack.deltas.ptr() + (k * shape.channels + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        // Clamp absorbs the last-ulp overshoot of the rescale.
        d[i] = std::clamp(static_cast<float>(field[i] * scale), -epsilon, epsilon);
      }
    }
  std::ostringstream prov;
  prov << "lowfreq n=" << n_freq << " scale=maxabs eps=" << epsilon << " seed=" << seed;
  pack.provenance = prov.str();
  return pack;
}

}  // namespace pb
