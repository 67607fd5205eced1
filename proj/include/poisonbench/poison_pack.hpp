#pragma once

#include <cstring>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "poisonbench/binary_io.hpp"
#include "poisonbench/data.hpp"

namespace pb {

enum class PoisonMode : std::uint8_t { class_wise = 0, sample_wise = 1 };

inline const char* to_string(PoisonMode m) { return m == PoisonMode::class_wise ? "class_wise" : "sample_wise"; }

// Additive perturbations under an l-inf budget. Class-wise packs hold one
// delta per class (m == K); sample-wise packs hold one delta per training
// sample, bound to it by original index.
struct PoisonPack {
  PoisonMode mode = PoisonMode::class_wise;
  float epsilon = 8.0f / 255.0f;
  std::size_t num_classes = 0;
  Tensor<float> deltas;  // m x C x H x W
  std::string provenance;
  std::vector<std::uint64_t> indices;  // sample_wise only

  std::size_t count() const { return deltas.dim(0); }

  friend bool operator==(const PoisonPack& a, const PoisonPack& b) {
    return a.mode == b.mode && std::memcmp(&a.epsilon, &b.epsilon, sizeof(float)) == 0 &&
           a.num_classes == b.num_classes && a.deltas == b.deltas && a.provenance == b.provenance &&
           a.indices == b.indices;
  }
};

inline constexpr float kBudgetSlack = 1e-7f;

inline void validate_pack(const PoisonPack& p) {
  if (p.deltas.rank() != 4) throw data_error("invalid_pack", "deltas must be m x C x H x W");
  if (p.num_classes < 2) throw data_error("invalid_pack", "pack needs K >= 2");
  if (!(p.epsilon >= 0.0f) || !std::isfinite(p.epsilon)) throw data_error("invalid_pack", "epsilon must be finite and >= 0");
  if (p.mode == PoisonMode::class_wise) {
    if (p.count() != p.num_classes) throw data_error("invalid_pack", "class-wise pack needs m == K");
    if (!p.indices.empty()) throw data_error("invalid_pack", "class-wise pack carries no indices");
  } else if (p.indices.size() != p.count()) {
    throw data_error("invalid_pack", "sample-wise pack needs one index per delta");
  }
  if (!p.deltas.all_finite()) throw data_error("invalid_pack", "non-finite delta");
  if (p.deltas.max_abs() > p.epsilon + kBudgetSlack)
    throw data_error("budget_violation", "max |delta| " + std::to_string(p.deltas.max_abs()) + " exceeds epsilon " +
                                             std::to_string(p.epsilon));
}

// ---------------------------------------------------------------------------
// File layout: "PZN1", version, mode, epsilon f32, K, m, C, H, W (u64),
// provenance, deltas (f32, row-major), then m u64 indices when sample-wise.

inline constexpr char kPackMagic[4] = {'P', 'Z', 'N', '1'};
inline constexpr std::uint8_t kPackVersion = 1;

inline std::vector<std::uint8_t> encode_pack(const PoisonPack& p) {
  validate_pack(p);
  io::Writer w;
  w.bytes(kPackMagic, 4);
  w.u8(kPackVersion);
  w.u8(static_cast<std::uint8_t>(p.mode));
  w.f32(p.epsilon);
  w.u64(p.num_classes);
  for (std::size_t d : p.deltas.shape()) w.u64(d);
  w.str(p.provenance);
  w.bytes(p.deltas.ptr(), p.deltas.size() * sizeof(float));
  if (p.mode == PoisonMode::sample_wise)
    for (std::uint64_t i : p.indices) w.u64(i);
  return w.buffer();
}

inline PoisonPack decode_pack(const std::vector<std::uint8_t>& bytes) {
  io::Reader r(bytes, "poison pack");
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kPackMagic, 4) != 0) throw data_error("bad_magic", "not a PZN1 poison pack");
  if (const auto v = r.u8(); v != kPackVersion)
    throw data_error("version_mismatch", "poison pack version " + std::to_string(v));
  PoisonPack p;
  const std::uint8_t mode = r.u8();
  if (mode > 1) throw data_error("invalid_pack", "mode byte " + std::to_string(mode));
  p.mode = static_cast<PoisonMode>(mode);
  p.epsilon = r.f32();
  p.num_classes = r.u64();
  Shape shape(4);
  for (auto& d : shape) d = r.u64();
  p.provenance = r.str();
  // Guard the size product against overflow before allocating.
  std::uint64_t count = 1;
  for (std::size_t d : shape) {
    if (d != 0 && count > r.remaining() / d) r.need(r.remaining() + 1);
    count *= d;
  }
  r.need(count * sizeof(float));
  p.deltas = Tensor<float>(shape);
  r.bytes(p.deltas.ptr(), count * sizeof(float));
  if (p.mode == PoisonMode::sample_wise) {
    r.need(shape[0] * 8);
    p.indices.resize(shape[0]);
    for (auto& i : p.indices) i = r.u64();
  }
  if (!r.at_end()) throw data_error("invalid_pack", "trailing bytes after pack payload");
  validate_pack(p);
  return p;
}

inline void write_poison_pack(const PoisonPack& p, const std::filesystem::path& path) {
  io::write_file(path, encode_pack(p));
}

inline PoisonPack read_poison_pack(const std::filesystem::path& path) { return decode_pack(io::read_file(path)); }

inline PoisonPack zero_pack(const ImageDataset& ds, PoisonMode mode, float epsilon = 8.0f / 255.0f) {
  PoisonPack p;
  p.mode = mode;
  p.epsilon = epsilon;
  p.num_classes = ds.num_classes;
  const std::size_t m = mode == PoisonMode::class_wise ? ds.num_classes : ds.size();
  p.deltas = Tensor<float>({m, ds.channels(), ds.height(), ds.width()});
  if (mode == PoisonMode::sample_wise) p.indices = ds.indices;
  p.provenance = "zero";
  return p;
}

// Row of the pack that perturbs each sample of `ds`.
inline std::vector<std::size_t> pack_rows_for(const ImageDataset& ds, const PoisonPack& pack) {
  if (pack.num_classes != ds.num_classes)
    throw data_error("misaligned_pack", "pack K=" + std::to_string(pack.num_classes) + " vs dataset K=" +
                                            std::to_string(ds.num_classes));
  if (pack.deltas.dim(1) != ds.channels() || pack.deltas.dim(2) != ds.height() || pack.deltas.dim(3) != ds.width())
    throw data_error("misaligned_pack", "pack image shape differs from dataset");
  std::vector<std::size_t> rows(ds.size());
  if (pack.mode == PoisonMode::class_wise) {
    for (std::size_t i = 0; i < ds.size(); ++i) rows[i] = static_cast<std::size_t>(ds.labels[i]);
    return rows;
  }
  std::unordered_map<std::uint64_t, std::size_t> where;
  where.reserve(pack.indices.size());
  for (std::size_t r = 0; r < pack.indices.size(); ++r) where.emplace(pack.indices[r], r);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto it = where.find(ds.indices[i]);
    if (it == where.end())
      throw data_error("misaligned_pack", "sample with original index " + std::to_string(ds.indices[i]) +
                                              " has no delta in the pack");
    rows[i] = it->second;
  }
  return rows;
}

// x' = clip(x + delta, 0, 1); labels are untouched.
inline ImageDataset apply_poison(const ImageDataset& ds, const PoisonPack& pack) {
  const std::vector<std::size_t> rows = pack_rows_for(ds, pack);
  ImageDataset out = ds;
  out.name = ds.name + "+poison";
  const std::size_t rs = ds.images.row_size();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    float* x = out.images.ptr() + i * rs;
    const float* d = pack.deltas.ptr() + rows[i] * rs;
    for (std::size_t j = 0; j < rs; ++j) x[j] = std::clamp(x[j] + d[j], 0.0f, 1.0f);
  }
  return out;
}

}  // namespace pb
