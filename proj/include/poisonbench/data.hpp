#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "poisonbench/binary_io.hpp"
#include "poisonbench/model.hpp"
#include "poisonbench/tensor.hpp"

namespace pb {

// Labeled images in [0,1] pixel space. `indices` records each sample's
// position in the dataset it was originally loaded as, so sample-wise
// perturbations stay bound to the right image through subsetting.
struct ImageDataset {
  std::string name;
  Tensor<float> images;  // n x C x H x W
  Labels labels;
  std::size_t num_classes = 0;
  std::vector<std::uint64_t> indices;

  std::size_t size() const { return labels.size(); }
  std::size_t channels() const { return images.dim(1); }
  std::size_t height() const { return images.dim(2); }
  std::size_t width() const { return images.dim(3); }
  InputSpec input_spec() const { return {channels(), height(), width(), num_classes}; }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> c(num_classes, 0);
    for (int y : labels) ++c[static_cast<std::size_t>(y)];
    return c;
  }

  template <typename T>
  Tensor<T> batch_images(std::span<const std::size_t> rows) const {
    if constexpr (std::is_same_v<T, float>) {
      return gather_rows(images, rows);
    } else {
      return gather_rows(images, rows).template cast<T>();
    }
  }
  Labels batch_labels(std::span<const std::size_t> rows) const {
    Labels out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = labels[rows[i]];
    return out;
  }
};

inline void validate_dataset(const ImageDataset& ds) {
  if (ds.images.rank() != 4 || ds.images.dim(0) != ds.labels.size() || ds.indices.size() != ds.labels.size())
    throw data_error("bad_dataset", "dataset '" + ds.name + "' has inconsistent sizes");
  for (float v : ds.images.data())
    if (!(v >= 0.0f && v <= 1.0f)) throw data_error("bad_dataset", "pixel outside [0,1] in '" + ds.name + "'");
  for (int y : ds.labels)
    if (y < 0 || static_cast<std::size_t>(y) >= ds.num_classes)
      throw data_error("label_out_of_range", "label " + std::to_string(y) + " in '" + ds.name + "'");
}

inline std::vector<std::size_t> iota_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  std::iota(r.begin(), r.end(), std::size_t{0});
  return r;
}

// ---------------------------------------------------------------------------
// CIFAR-10 binary batches: records of 1 label byte + 3072 pixel bytes (R, G, B
// planes of 32x32).

inline constexpr std::size_t kCifarRecord = 3073;

inline ImageDataset read_cifar10_files(const std::vector<std::filesystem::path>& files, std::string name) {
  std::vector<std::vector<std::uint8_t>> blobs;
  std::size_t n = 0;
  for (const auto& f : files) {
    if (!std::filesystem::exists(f)) throw data_error("missing_file", "missing CIFAR-10 file " + f.string());
    blobs.push_back(io::read_file(f));
    if (blobs.back().size() % kCifarRecord != 0)
      throw data_error("bad_cifar_file", f.string() + ": length " + std::to_string(blobs.back().size()) +
                                             " is not a multiple of 3073");
    n += blobs.back().size() / kCifarRecord;
  }
  ImageDataset ds;
  ds.name = std::move(name);
  ds.num_classes = 10;
  ds.images = Tensor<float>({n, 3, 32, 32});
  ds.labels.resize(n);
  ds.indices.resize(n);
  std::size_t i = 0;
  for (const auto& blob : blobs)
    for (std::size_t off = 0; off < blob.size(); off += kCifarRecord, ++i) {
      const int label = blob[off];
      if (label > 9) throw data_error("bad_cifar_file", "label byte " + std::to_string(label) + " > 9");
      ds.labels[i] = label;
      ds.indices[i] = i;
      float* dst = ds.images.ptr() + i * 3072;
      for (std::size_t p = 0; p < 3072; ++p) dst[p] = static_cast<float>(blob[off + 1 + p]) / 255.0f;
    }
  return ds;
}

// Accepts either the directory holding the .bin files or its parent
// (the archive extracts to cifar-10-batches-bin/).
inline std::pair<ImageDataset, ImageDataset> load_cifar10(const std::filesystem::path& directory) {
  std::filesystem::path dir = directory;
  if (!std::filesystem::exists(dir / "data_batch_1.bin") &&
      std::filesystem::exists(dir / "cifar-10-batches-bin" / "data_batch_1.bin"))
    dir /= "cifar-10-batches-bin";
  std::vector<std::filesystem::path> train_files;
  for (int b = 1; b <= 5; ++b) train_files.push_back(dir / ("data_batch_" + std::to_string(b) + ".bin"));
  return {read_cifar10_files(train_files, "cifar10-train"), read_cifar10_files({dir / "test_batch.bin"}, "cifar10-test")};
}

// ---------------------------------------------------------------------------

// Stratified subset with exactly `per_class` samples of each class. Samples
// keep their relative order from `ds`; selection within a class is a seeded
// shuffle.
inline ImageDataset subsample(const ImageDataset& ds, std::size_t per_class, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;
  for (std::size_t k = 0; k < ds.num_classes; ++k) {
    auto& members = by_class[k];
    if (per_class > members.size())
      throw config_error("per_class_too_large", "class " + std::to_string(k) + " has " +
                                                    std::to_string(members.size()) + " samples, asked for " +
                                                    std::to_string(per_class));
    std::shuffle(members.begin(), members.end(), rng);
    chosen.insert(chosen.end(), members.begin(), members.begin() + static_cast<long>(per_class));
  }
  std::sort(chosen.begin(), chosen.end());
  ImageDataset out;
  out.name = ds.name + "-sub" + std::to_string(per_class);
  out.num_classes = ds.num_classes;
  out.images = gather_rows(ds.images, chosen);
  out.labels = ds.batch_labels(chosen);
  for (std::size_t i : chosen) out.indices.push_back(ds.indices[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic fixture: each class owns a Gaussian blob with a fixed position
// and color. Class prototypes depend only on (K, H); the seed drives the
// per-sample jitter and pixel noise, so train and test sets drawn with
// different seeds share the same classes.

inline ImageDataset synth_blobs(std::size_t n_per_class, std::size_t num_classes, std::size_t size,
                                std::uint64_t seed) {
  if (num_classes < 2) throw config_error("bad_blobs", "synth_blobs needs K >= 2");
  if (size < 4) throw config_error("bad_blobs", "synth_blobs needs H >= 4");
  const std::size_t n = n_per_class * num_classes;
  const double h = static_cast<double>(size);
  ImageDataset ds;
  ds.name = "blobs-k" + std::to_string(num_classes) + "-h" + std::to_string(size);
  ds.num_classes = num_classes;
  ds.images = Tensor<float>({n, 3, size, size});
  ds.labels.resize(n);
  ds.indices.resize(n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i % num_classes;
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(num_classes);
    const double cy = h / 2 + 0.28 * h * std::sin(angle) + 0.04 * h * gauss(rng);
    const double cx = h / 2 + 0.28 * h * std::cos(angle) + 0.04 * h * gauss(rng);
    const double sigma = 0.14 * h;
    const double color[3] = {0.5 + 0.4 * std::cos(angle), 0.5 + 0.4 * std::cos(angle + 2.1),
                             0.5 + 0.4 * std::cos(angle + 4.2)};
    float* img = ds.images.ptr() + i * 3 * size * size;
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
          const double dy = static_cast<double>(y) + 0.5 - cy, dx = static_cast<double>(x) + 0.5 - cx;
          const double w = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
          const double v = 0.5 * (1 - w) + color[c] * w + 0.08 * gauss(rng);
          img[(c * size + y) * size + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    ds.labels[i] = static_cast<int>(k);
    ds.indices[i] = i;
  }
  return ds;
}

}  // namespace pb
