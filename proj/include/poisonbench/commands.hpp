#pragma once

#include <atomic>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "poisonbench/cli_config.hpp"

namespace pb::cli {

namespace fs = std::filesystem;

inline void write_text(const fs::path& path, const std::string& text) {
  io::write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

inline std::string read_text(const fs::path& path) {
  if (!fs::exists(path)) throw data_error("missing_file", path.string() + " not found");
  const auto b = io::read_file(path);
  return {b.begin(), b.end()};
}

inline void append_line(const fs::path& path, const std::string& line) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw data_error("io_error", "cannot append to " + path.string());
  out << line << '\n';
}

inline std::string file_hash(const fs::path& path) {
  const auto b = io::read_file(path);
  return hex64(fnv1a64(std::string_view(reinterpret_cast<const char*>(b.data()), b.size())));
}

// Loaded datasets are shared read-only between commands of one process.
using DatasetsPtr = std::shared_ptr<const Datasets>;

inline DatasetsPtr load_shared(const DatasetConfig& d) { return std::make_shared<const Datasets>(load_datasets(d)); }

// Clean-trained model for a ModelConfig, or the checkpoint it names.
inline Model<float> obtain_model(const ModelConfig& mc, const RunConfig& cfg, const Datasets& data) {
  const InputSpec spec = data.train.input_spec();
  if (!mc.checkpoint.empty()) {
    if (!fs::exists(mc.checkpoint)) throw data_error("missing_file", "checkpoint " + mc.checkpoint + " not found");
    return load_checkpoint<float>(mc.checkpoint, spec);
  }
  Model<float> m = build_model<float>(mc.arch, spec, mc.seed);
  train(m, data.train, data.test, cfg.train);
  return m;
}

// ---------------------------------------------------------------------------
// craft

struct CraftResult {
  fs::path pack_path;
  ordered_json manifest;
};

inline CraftResult cmd_craft(const RunConfig& cfg, DatasetsPtr data = nullptr) {
  const GeneratorConfig& g = cfg.generator;
  require_generator(g.name);
  const std::string hash = config_hash(cfg);
  const InputSpec spec = dataset_input_spec(cfg.dataset);
  const fs::path out_dir = cfg.out;

  ordered_json manifest;
  manifest["command"] = "craft";
  manifest["config_hash"] = hash;
  PoisonPack pack;
  if (g.name == "regions" || g.name == "lowfreq") {
    const ImageShape shape{spec.channels, spec.height, spec.width};
    const float eps = static_cast<float>(g.epsilon);
    pack = g.name == "regions" ? gen_regions_noise(g.n_regions, spec.classes, eps, g.seed, shape)
                               : gen_lowfreq_noise(g.n_freq, spec.classes, eps, g.seed, shape);
  } else {
    if (!data) data = load_shared(cfg.dataset);
    if (g.name == "errmin") {
      const ErrMinConfig ec = errmin_config(g, cfg.train, spec.classes);
      const ErrMinResult r =
          craft_errmin_poison<float>(data->train, ec, arch_spec(cfg.crafting.arch, spec), cfg.crafting.seed);
      pack = r.pack;
      manifest["errmin"] = {{"rounds", r.rounds},
                            {"stop", r.stop == ErrMinStop::accuracy_reached ? "accuracy" : "max_rounds"},
                            {"train_accuracy", r.train_accuracy}};
    } else {
      const AttackConfig ac = attack_config(g, spec.classes);
      Model<float> surrogate = obtain_model(cfg.crafting, cfg, *data);
      surrogate.eval();
      if (cfg.crafting.checkpoint.empty()) save_checkpoint(surrogate, out_dir / "crafting_model.pbmd");
      pack = craft_errmax_poison(surrogate, data->train, ac);
      manifest["crafting_model"] = {{"arch", surrogate.spec().name},
                                    {"seed", surrogate.seed()},
                                    {"clean_train_accuracy", accuracy(surrogate, data->train)},
                                    {"attack_success", transferability(pack, data->train, surrogate)}};
    }
  }
  pack.provenance += " config=" + hash;
  const fs::path pack_path = out_dir / "pack.pzn";
  write_poison_pack(pack, pack_path);
  manifest["pack"] = {{"file", "pack.pzn"},
                      {"mode", to_string(pack.mode)},
                      {"count", pack.count()},
                      {"num_classes", pack.num_classes},
                      {"epsilon", pack.epsilon},
                      {"max_abs_delta", pack.deltas.max_abs()},
                      {"provenance", pack.provenance},
                      {"file_hash", file_hash(pack_path)}};
  ordered_json config = to_json(cfg);
  config.erase("out");
  manifest["config"] = config;
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return {pack_path, manifest};
}

// ---------------------------------------------------------------------------
// train-eval

inline std::string run_hash(const RunConfig& cfg, const fs::path& pack) {
  const std::string h = config_hash(cfg);
  if (pack.empty()) return h;
  return hex64(fnv1a64(h + ":" + file_hash(pack)));
}

inline std::string poison_id_for(const RunConfig& cfg, const fs::path& pack) {
  if (!cfg.poison_id.empty()) return cfg.poison_id;
  if (pack.empty()) return "clean";
  return pack.parent_path().filename().empty() ? pack.stem().string() : pack.parent_path().filename().string();
}

// Trains the victim on (optionally poisoned) training data; writes
// curve.csv and summary.json and, when `ledger` is set, appends the summary.
inline ordered_json cmd_train_eval(const RunConfig& cfg, const fs::path& pack_path, const fs::path& ledger,
                                   DatasetsPtr data = nullptr) {
  if (!pack_path.empty() && !fs::exists(pack_path)) throw data_error("missing_file", "pack " + pack_path.string() + " not found");
  if (!data) data = load_shared(cfg.dataset);
  const std::string hash = run_hash(cfg, pack_path);
  const std::string id = poison_id_for(cfg, pack_path);
  ImageDataset train_ds = data->train;
  std::string provenance = "clean";
  if (!pack_path.empty()) {
    const PoisonPack pack = read_poison_pack(pack_path);
    train_ds = apply_poison(data->train, pack);
    provenance = pack.provenance;
  }
  Model<float> model = build_model<float>(cfg.victim.arch, train_ds.input_spec(), cfg.victim.seed);
  const TrainReport report = train(model, train_ds, data->test, cfg.train, provenance);
  const fs::path out_dir = cfg.out;
  write_text(out_dir / "curve.csv", curve_csv(report));
  ordered_json summary = summary_json(report, id, hash);
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  if (!ledger.empty()) append_line(ledger, summary.dump());
  return summary;
}

// ---------------------------------------------------------------------------
// transfer

inline ordered_json cmd_transfer(const RunConfig& cfg, const fs::path& pack_path, DatasetsPtr data = nullptr) {
  if (!fs::exists(pack_path)) throw data_error("missing_file", "pack " + pack_path.string() + " not found");
  const PoisonPack pack = read_poison_pack(pack_path);
  if (pack.mode != PoisonMode::sample_wise)
    throw config_error("class_wise_pack", "transferability is defined for sample-wise packs");
  if (!data) data = load_shared(cfg.dataset);
  Model<float> victim = obtain_model(cfg.victim, cfg, *data);
  victim.eval();
  ordered_json j;
  j["poison_id"] = poison_id_for(cfg, pack_path);
  j["victim_arch"] = victim.spec().name;
  j["victim_seed"] = victim.seed();
  j["samples"] = data->train.size();
  j["transferability"] = transferability(pack, data->train, victim);
  j["clean_error"] = transferability(zero_pack(data->train, PoisonMode::sample_wise), data->train, victim);
  j["victim_test_accuracy"] = accuracy(victim, data->test);
  j["pack_provenance"] = pack.provenance;
  j["config_hash"] = run_hash(cfg, pack_path);
  write_text(fs::path(cfg.out) / "transfer.json", j.dump(2) + "\n");
  return j;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepRun {
  std::string id;
  bool clean = false;
  RunConfig cfg;
};

// {"base": {...}, "runs": [{"id": "R4", "clean": false, "config": {...}}], "out": "dir"}
inline std::vector<SweepRun> parse_sweep(const nlohmann::json& j, const std::string& out_override) {
  detail::ObjectReader r(j, "sweep");
  RunConfig base;
  if (const auto* b = r.child("base")) merge_json(*b, base);
  std::string out = "sweep";
  r.get("out", out);
  if (!out_override.empty()) out = out_override;
  const auto* runs = r.child("runs");
  r.finish();
  if (!runs || !runs->is_array() || runs->empty()) throw config_error("bad_config", "sweep.runs must be a non-empty array");
  std::vector<SweepRun> result;
  std::set<std::string> ids;
  for (const auto& rj : *runs) {
    detail::ObjectReader rr(rj, "sweep.runs[]");
    SweepRun run;
    run.cfg = base;
    rr.get("id", run.id);
    rr.get("clean", run.clean);
    if (const auto* c = rr.child("config")) merge_json(*c, run.cfg);
    rr.finish();
    if (run.id.empty() || run.id.find('/') != std::string::npos || run.id == "." || run.id == "..")
      throw config_error("bad_config", "every sweep run needs a plain id");
    if (!ids.insert(run.id).second) throw config_error("bad_config", "duplicate sweep run id " + run.id);
    run.cfg.poison_id = run.id;
    run.cfg.out = (fs::path(out) / run.id).string();
    result.push_back(std::move(run));
  }
  return result;
}

struct SweepOutcome {
  std::vector<ordered_json> summaries;  // run order; null for failed runs
  std::vector<std::string> errors;      // run order; empty when the run succeeded
  fs::path ledger;
};

// Runs are independent (own model and RNG streams), so they execute
// concurrently; results are collected by run index so the ledger order
// matches the sweep file regardless of completion order.
inline SweepOutcome cmd_sweep(const nlohmann::json& sweep, std::size_t workers, const std::string& out_override = "",
                              std::ostream* progress = nullptr) {
  const std::vector<SweepRun> runs = parse_sweep(sweep, out_override);
  const fs::path out = fs::path(runs.front().cfg.out).parent_path();
  std::map<std::string, DatasetsPtr> cache;
  std::vector<DatasetsPtr> data(runs.size());
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const std::string key = to_json(runs[i].cfg.dataset).dump();
    auto& slot = cache[key];
    if (!slot) slot = load_shared(runs[i].cfg.dataset);
    data[i] = slot;
  }
  SweepOutcome outcome;
  outcome.summaries.resize(runs.size());
  outcome.errors.resize(runs.size());
  std::vector<std::exception_ptr> failures(runs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < runs.size();) {
      const SweepRun& run = runs[i];
      try {
        fs::path pack;
        if (!run.clean) pack = cmd_craft(run.cfg, data[i]).pack_path;
        outcome.summaries[i] = cmd_train_eval(run.cfg, pack, {}, data[i]);
      } catch (const std::exception& e) {
        failures[i] = std::current_exception();
        outcome.errors[i] = e.what();
      }
      if (progress) {
        std::lock_guard lock(log_mutex);
        *progress << "sweep: " << run.id << (outcome.errors[i].empty() ? " done" : " FAILED: " + outcome.errors[i])
                  << "\n";
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(workers, 1, runs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  outcome.ledger = out / "ledger.jsonl";
  std::string ledger_text;
  for (const auto& s : outcome.summaries)
    if (!s.is_null()) ledger_text += s.dump() + "\n";
  write_text(outcome.ledger, ledger_text);
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  return outcome;
}

// ---------------------------------------------------------------------------
// report

struct LedgerRow {
  std::string poison_id;
  std::optional<double> epochs_to_threshold;
  double peak_test_acc;
  double final_test_acc;
  std::string config_hash;
};

inline std::vector<LedgerRow> read_ledger(const fs::path& path) {
  const std::string text = read_text(path);
  std::vector<LedgerRow> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      LedgerRow r;
      r.poison_id = j.at("poison_id").get<std::string>();
      if (!j.at("epochs_to_threshold").is_null()) r.epochs_to_threshold = j.at("epochs_to_threshold").get<double>();
      r.peak_test_acc = j.at("peak_test_acc").get<double>();
      r.final_test_acc = j.at("final_test_acc").get<double>();
      r.config_hash = j.at("config_hash").get<std::string>();
      rows.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw data_error("bad_ledger", path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

inline std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Scatter data for epochs-to-threshold vs peak and final vs peak, plus the
// Spearman correlation. Runs that never reached the threshold have no
// x-coordinate and are excluded from the first correlation.
inline ordered_json cmd_report(const fs::path& ledger, const fs::path& out_dir, std::ostream* warn = nullptr) {
  const std::vector<LedgerRow> rows = read_ledger(ledger);
  if (rows.size() < 3)
    throw config_error("too_few_runs", "report needs at least 3 runs, ledger has " + std::to_string(rows.size()));
  const std::string ledger_hash = file_hash(ledger);
  std::string speed = "poison_id,epochs_to_threshold,peak_test_acc,config_hash\n";
  std::string final_peak = "poison_id,final_test_acc,peak_test_acc,config_hash\n";
  std::vector<double> ett, peak_inc, finals, peaks;
  ordered_json excluded = ordered_json::array();
  for (const auto& r : rows) {
    final_peak += r.poison_id + "," + fmt6(r.final_test_acc) + "," + fmt6(r.peak_test_acc) + "," + r.config_hash + "\n";
    finals.push_back(r.final_test_acc);
    peaks.push_back(r.peak_test_acc);
    if (!r.epochs_to_threshold) {
      excluded.push_back(r.poison_id);
      if (warn) *warn << "report: " << r.poison_id << " never reached the loss threshold; excluded from rho\n";
      continue;
    }
    speed += r.poison_id + "," + std::to_string(static_cast<long long>(*r.epochs_to_threshold)) + "," +
             fmt6(r.peak_test_acc) + "," + r.config_hash + "\n";
    ett.push_back(*r.epochs_to_threshold);
    peak_inc.push_back(r.peak_test_acc);
  }
  auto rho_or_reason = [](const std::vector<double>& x, const std::vector<double>& y, ordered_json& value,
                          std::string& status) {
    try {
      value = spearman_rho(x, y);
      status = "ok";
    } catch (const Error& e) {
      value = nullptr;
      status = e.code();
    }
  };
  ordered_json rho, rho_final;
  std::string status, status_final;
  rho_or_reason(ett, peak_inc, rho, status);
  rho_or_reason(finals, peaks, rho_final, status_final);
  write_text(out_dir / "speed_vs_peak.csv", speed);
  write_text(out_dir / "final_vs_peak.csv", final_peak);
  ordered_json rep;
  rep["ledger_hash"] = ledger_hash;
  rep["runs"] = rows.size();
  rep["included"] = ett.size();
  rep["excluded"] = excluded;
  rep["spearman_rho"] = rho;
  rep["rho_status"] = status;
  rep["spearman_rho_final_vs_peak"] = rho_final;
  rep["rho_final_vs_peak_status"] = status_final;
  write_text(out_dir / "report.json", rep.dump(2) + "\n");
  return rep;
}

// ---------------------------------------------------------------------------
// export-perturbation

// Per-image min-max normalization to [0, 255] with round-half-up; a flat
// perturbation maps to mid-gray 128.
inline std::vector<std::uint8_t> perturbation_ppm(const PoisonPack& pack, std::size_t index) {
  if (index >= pack.count())
    throw config_error("index_out_of_range", "index " + std::to_string(index) + " outside pack of " +
                                                 std::to_string(pack.count()));
  const std::size_t c = pack.deltas.dim(1), h = pack.deltas.dim(2), w = pack.deltas.dim(3);
  if (c != 1 && c != 3) throw data_error("bad_channels", "PPM export needs 1 or 3 channels");
  const std::span<const float> d = pack.deltas.row(index);
  const auto [lo_it, hi_it] = std::minmax_element(d.begin(), d.end());
  const double lo = *lo_it, hi = *hi_it;
  auto to_byte = [&](float v) {
    const double x = hi > lo ? (static_cast<double>(v) - lo) / (hi - lo) : 0.5;
    return static_cast<std::uint8_t>(std::min(255.0, std::floor(x * 255.0 + 0.5)));
  };
  std::string header = "P6\n# pbench perturbation index=" + std::to_string(index) +
                       " normalization=per-image-minmax rounding=half-up source=" + pack.provenance + "\n" +
                       std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < 3; ++ch) out.push_back(to_byte(d[((c == 3 ? ch : 0) * h + y) * w + x]));
  return out;
}

inline void cmd_export_perturbation(const fs::path& pack_path, std::size_t index, const fs::path& out) {
  if (!fs::exists(pack_path)) throw data_error("missing_file", "pack " + pack_path.string() + " not found");
  io::write_file(out, perturbation_ppm(read_poison_pack(pack_path), index));
}

}  // namespace pb::cli
