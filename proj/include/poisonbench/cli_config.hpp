#pragma once

#include <cstdio>
#include <cstdlib>
#include <set>
#include <string>

#include "json.hpp"
#include "poisonbench/craft.hpp"
#include "poisonbench/harness.hpp"

namespace pb::cli {

using nlohmann::ordered_json;

struct DatasetConfig {
  std::string source = "blobs";  // blobs | cifar10
  std::string dir;               // cifar10 root; falls back to $PB_DATA_DIR
  std::size_t per_class = 0;     // stratified train subset, 0 = everything
  std::size_t test_per_class = 0;
  std::uint64_t subset_seed = 0;
  // blobs only
  std::size_t blobs_train_per_class = 50;
  std::size_t blobs_test_per_class = 20;
  std::size_t classes = 10;
  std::size_t size = 32;
  std::uint64_t blobs_seed = 1;
};

struct GeneratorConfig {
  std::string name = "regions";  // regions | lowfreq | errmax_pgd | errmax_mifgsm | errmin
  double epsilon = 8.0 / 255.0;
  std::uint64_t seed = 0;
  std::size_t n_regions = 4;
  std::size_t n_freq = 4;
  // error-maximizing
  int steps = 10;
  double step_size = 0;  // 0 = default_step_size(epsilon, steps)
  bool targeted = true;
  std::string target_rule = "next_class";  // next_class | fixed
  int fixed_target = 0;
  double momentum_mu = 1.0;  // errmax_mifgsm only
  bool random_start = false;
  std::size_t batch_size = 128;
  // error-minimizing
  std::string mode = "sample_wise";
  std::size_t inner_model_steps = 10;
  double stop_train_accuracy = 0.99;
  std::size_t max_outer_rounds = 50;
  int noise_steps = 20;
};

struct ModelConfig {
  std::string arch = "cnn-a";
  std::uint64_t seed = 0;
  std::string checkpoint;  // load instead of training when set
};

struct RunConfig {
  DatasetConfig dataset;
  GeneratorConfig generator;
  ModelConfig crafting;  // surrogate for errmax (trained on clean data) and errmin
  ModelConfig victim;    // model trained by train-eval and transfer
  TrainConfig train = TrainConfig::desk_scale();
  std::string poison_id;  // defaults to the pack file stem
  std::string out = "runs";
};

// ---------------------------------------------------------------------------
// JSON mapping. Reading rejects unknown keys so typos surface as config errors.

namespace detail {

class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw config_error("bad_config", where_ + " must be a JSON object");
  }

  template <typename V>
  void get(const char* key, V& dst) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_unsigned_v<V> && !std::is_same_v<V, bool>) {
        if (!it->is_number_integer() || it->template get<long long>() < 0) throw std::invalid_argument("");
      }
      dst = it->template get<V>();
    } catch (const std::exception&) {
      throw config_error("bad_config", where_ + "." + key + " has the wrong type: " + it->dump());
    }
  }

  const nlohmann::json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw config_error("unknown_key", "unknown key " + where_ + "." + k);
  }

 private:
  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline void from_json_checked(const nlohmann::json& j, DatasetConfig& d) {
  detail::ObjectReader r(j, "dataset");
  r.get("source", d.source);
  r.get("dir", d.dir);
  r.get("per_class", d.per_class);
  r.get("test_per_class", d.test_per_class);
  r.get("subset_seed", d.subset_seed);
  r.get("blobs_train_per_class", d.blobs_train_per_class);
  r.get("blobs_test_per_class", d.blobs_test_per_class);
  r.get("classes", d.classes);
  r.get("size", d.size);
  r.get("blobs_seed", d.blobs_seed);
  r.finish();
}

inline void from_json_checked(const nlohmann::json& j, GeneratorConfig& g) {
  detail::ObjectReader r(j, "generator");
  r.get("name", g.name);
  r.get("epsilon", g.epsilon);
  r.get("seed", g.seed);
  r.get("n_regions", g.n_regions);
  r.get("n_freq", g.n_freq);
  r.get("steps", g.steps);
  r.get("step_size", g.step_size);
  r.get("targeted", g.targeted);
  r.get("target_rule", g.target_rule);
  r.get("fixed_target", g.fixed_target);
  r.get("momentum_mu", g.momentum_mu);
  r.get("random_start", g.random_start);
  r.get("batch_size", g.batch_size);
  r.get("mode", g.mode);
  r.get("inner_model_steps", g.inner_model_steps);
  r.get("stop_train_accuracy", g.stop_train_accuracy);
  r.get("max_outer_rounds", g.max_outer_rounds);
  r.get("noise_steps", g.noise_steps);
  r.finish();
}

inline void from_json_checked(const nlohmann::json& j, ModelConfig& m, const std::string& where) {
  detail::ObjectReader r(j, where);
  r.get("arch", m.arch);
  r.get("seed", m.seed);
  r.get("checkpoint", m.checkpoint);
  r.finish();
}

inline void from_json_checked(const nlohmann::json& j, TrainConfig& t) {
  detail::ObjectReader r(j, "train");
  r.get("epochs", t.epochs);
  r.get("batch_size", t.batch_size);
  r.get("lr", t.lr);
  r.get("momentum", t.momentum);
  r.get("weight_decay", t.weight_decay);
  r.get("lr_decay_factor", t.lr_decay_factor);
  r.get("lr_decay_epoch", t.lr_decay_epoch);
  r.get("loss_threshold", t.loss_threshold);
  r.get("seed", t.seed);
  r.get("shuffle", t.shuffle);
  r.get("augment", t.augment);
  r.finish();
}

// Merges `j` over `cfg`; absent keys keep their current values.
inline void merge_json(const nlohmann::json& j, RunConfig& cfg) {
  detail::ObjectReader r(j, "config");
  if (const auto* c = r.child("dataset")) from_json_checked(*c, cfg.dataset);
  if (const auto* c = r.child("generator")) from_json_checked(*c, cfg.generator);
  if (const auto* c = r.child("crafting")) from_json_checked(*c, cfg.crafting, "crafting");
  if (const auto* c = r.child("victim")) from_json_checked(*c, cfg.victim, "victim");
  if (const auto* c = r.child("train")) from_json_checked(*c, cfg.train);
  r.get("poison_id", cfg.poison_id);
  r.get("out", cfg.out);
  r.finish();
}

inline ordered_json to_json(const DatasetConfig& d) {
  return {{"source", d.source},
          {"dir", d.dir},
          {"per_class", d.per_class},
          {"test_per_class", d.test_per_class},
          {"subset_seed", d.subset_seed},
          {"blobs_train_per_class", d.blobs_train_per_class},
          {"blobs_test_per_class", d.blobs_test_per_class},
          {"classes", d.classes},
          {"size", d.size},
          {"blobs_seed", d.blobs_seed}};
}

inline ordered_json to_json(const GeneratorConfig& g) {
  return {{"name", g.name},
          {"epsilon", g.epsilon},
          {"seed", g.seed},
          {"n_regions", g.n_regions},
          {"n_freq", g.n_freq},
          {"steps", g.steps},
          {"step_size", g.step_size},
          {"targeted", g.targeted},
          {"target_rule", g.target_rule},
          {"fixed_target", g.fixed_target},
          {"momentum_mu", g.momentum_mu},
          {"random_start", g.random_start},
          {"batch_size", g.batch_size},
          {"mode", g.mode},
          {"inner_model_steps", g.inner_model_steps},
          {"stop_train_accuracy", g.stop_train_accuracy},
          {"max_outer_rounds", g.max_outer_rounds},
          {"noise_steps", g.noise_steps}};
}

inline ordered_json to_json(const ModelConfig& m) {
  return {{"arch", m.arch}, {"seed", m.seed}, {"checkpoint", m.checkpoint}};
}

inline ordered_json to_json(const RunConfig& c) {
  const nlohmann::json train_plain = pb::to_json(c.train);
  ordered_json train = ordered_json::object();
  for (const auto& [k, v] : train_plain.items()) train[k] = v;
  return {{"dataset", to_json(c.dataset)}, {"generator", to_json(c.generator)},
          {"crafting", to_json(c.crafting)}, {"victim", to_json(c.victim)},
          {"train", train},                  {"poison_id", c.poison_id},
          {"out", c.out}};
}

// ---------------------------------------------------------------------------
// Config hash: 64-bit FNV-1a over the canonical JSON text. The output and
// data directories are excluded so relocating a run keeps its identity.

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string canonical_text(const ordered_json& j) { return j.dump(); }

inline std::string config_hash(const RunConfig& c) {
  ordered_json j = to_json(c);
  j.erase("out");
  j["dataset"].erase("dir");
  return hex64(fnv1a64(canonical_text(j)));
}

inline RunConfig load_config_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw data_error("missing_file", "config file " + path.string() + " not found");
  const auto bytes = io::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw config_error("bad_config", path.string() + ": " + e.what());
  }
  RunConfig cfg;
  merge_json(j, cfg);
  return cfg;
}

// ---------------------------------------------------------------------------
// Mapping to library configs.

inline const std::vector<std::string>& generator_names() {
  static const std::vector<std::string> names{"regions", "lowfreq", "errmax_pgd", "errmax_mifgsm", "errmin"};
  return names;
}

inline void require_generator(const std::string& name) {
  const auto& g = generator_names();
  if (std::find(g.begin(), g.end(), name) == g.end())
    throw config_error("unknown_generator", "unknown generator '" + name +
                                                "' (expected regions, lowfreq, errmax_pgd, errmax_mifgsm or errmin)");
}

inline PoisonMode parse_mode(const std::string& s) {
  if (s == "class_wise") return PoisonMode::class_wise;
  if (s == "sample_wise") return PoisonMode::sample_wise;
  throw config_error("bad_config", "mode must be class_wise or sample_wise (got '" + s + "')");
}

inline AttackConfig attack_config(const GeneratorConfig& g, std::size_t num_classes) {
  AttackConfig a;
  a.steps = g.steps;
  a.epsilon = g.epsilon;
  a.step_size = g.step_size > 0 ? g.step_size : default_step_size(g.epsilon, g.steps);
  a.targeted = g.targeted;
  if (g.target_rule == "next_class") a.target_rule = TargetRule::next_class;
  else if (g.target_rule == "fixed") a.target_rule = TargetRule::fixed;
  else throw config_error("bad_config", "target_rule must be next_class or fixed");
  a.fixed_target = g.fixed_target;
  a.momentum_mu = g.name == "errmax_mifgsm" ? g.momentum_mu : 0.0;
  if (g.name == "errmax_mifgsm" && !(g.momentum_mu > 0))
    throw config_error("bad_config", "errmax_mifgsm needs momentum_mu > 0");
  a.random_start = g.random_start;
  a.rng_seed = g.seed;
  a.batch_size = g.batch_size;
  a.validate(num_classes);
  return a;
}

inline ErrMinConfig errmin_config(const GeneratorConfig& g, const TrainConfig& t, std::size_t num_classes) {
  ErrMinConfig e;
  e.inner_model_steps = g.inner_model_steps;
  e.noise_pgd.steps = g.noise_steps;
  e.noise_pgd.epsilon = g.epsilon;
  e.noise_pgd.targeted = false;
  e.noise_pgd.step_size = g.step_size > 0 ? g.step_size : default_step_size(g.epsilon, g.noise_steps);
  e.stop_train_accuracy = g.stop_train_accuracy;
  e.max_outer_rounds = g.max_outer_rounds;
  e.mode = parse_mode(g.mode);
  e.batch_size = g.batch_size;
  e.sgd = {t.lr, t.momentum, t.weight_decay};
  if (!(g.stop_train_accuracy > 1.0 / static_cast<double>(num_classes) && g.stop_train_accuracy <= 1.0))
    throw config_error("bad_config", "stop_train_accuracy must lie in (1/K, 1]");
  e.validate(num_classes);
  return e;
}

inline std::filesystem::path data_dir(const DatasetConfig& d) {
  if (!d.dir.empty()) return d.dir;
  if (const char* env = std::getenv("PB_DATA_DIR"); env && *env) return env;
  throw data_error("missing_dataset", "cifar10 needs dataset.dir or PB_DATA_DIR");
}

inline InputSpec dataset_input_spec(const DatasetConfig& d) {
  if (d.source == "cifar10") return {3, 32, 32, 10};
  if (d.source == "blobs") return {3, d.size, d.size, d.classes};
  throw config_error("bad_config", "dataset.source must be blobs or cifar10 (got '" + d.source + "')");
}

struct Datasets {
  ImageDataset train;
  ImageDataset test;
};

inline Datasets load_datasets(const DatasetConfig& d) {
  Datasets out;
  if (d.source == "cifar10") {
    auto [train, test] = load_cifar10(data_dir(d));
    out.train = std::move(train);
    out.test = std::move(test);
  } else if (d.source == "blobs") {
    out.train = synth_blobs(d.blobs_train_per_class, d.classes, d.size, d.blobs_seed);
    out.test = synth_blobs(d.blobs_test_per_class, d.classes, d.size, d.blobs_seed + 1);
    out.test.name += "-test";
  } else {
    dataset_input_spec(d);  // throws
  }
  if (d.per_class > 0) out.train = subsample(out.train, d.per_class, d.subset_seed);
  if (d.test_per_class > 0) out.test = subsample(out.test, d.test_per_class, d.subset_seed + 1);
  return out;
}

}  // namespace pb::cli
