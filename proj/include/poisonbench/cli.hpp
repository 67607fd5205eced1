#pragma once

#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "poisonbench/commands.hpp"

namespace pb::cli {

inline void print_error(std::ostream& err, const std::string& kind, const std::string& code, const std::string& message) {
  ordered_json j;
  j["error"] = {{"kind", kind}, {"code", code}, {"message", message}};
  err << j.dump() << std::endl;
}

namespace detail {

// Command-line values that override the config file when given.
struct Overrides {
  std::string config;
  std::optional<std::string> gen, mode, data_dir, out, arch, poison_id, crafting_checkpoint, victim_checkpoint;
  std::optional<std::size_t> n_regions, n_freq, epochs;
  std::optional<double> epsilon;
  std::optional<int> steps;
  std::optional<std::uint64_t> seed, model_seed, train_seed;
  bool augment = false;

  RunConfig resolve() const {
    RunConfig c = config.empty() ? RunConfig{} : load_config_file(config);
    if (gen) c.generator.name = *gen;
    if (mode) c.generator.mode = *mode;
    if (n_regions) c.generator.n_regions = *n_regions;
    if (n_freq) c.generator.n_freq = *n_freq;
    if (epsilon) c.generator.epsilon = *epsilon;
    if (steps) c.generator.steps = *steps;
    if (seed) c.generator.seed = *seed;
    if (data_dir) c.dataset.dir = *data_dir;
    if (out) c.out = *out;
    if (arch) c.victim.arch = *arch;
    if (model_seed) c.victim.seed = *model_seed;
    if (train_seed) c.train.seed = *train_seed;
    if (epochs) c.train.epochs = *epochs;
    if (augment) c.train.augment = true;
    if (poison_id) c.poison_id = *poison_id;
    if (crafting_checkpoint) c.crafting.checkpoint = *crafting_checkpoint;
    if (victim_checkpoint) c.victim.checkpoint = *victim_checkpoint;
    return c;
  }
};

inline void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("-c,--config", o.config, "JSON run config");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--data-dir", o.data_dir, "CIFAR-10 root (default $PB_DATA_DIR)");
}

}  // namespace detail

// Entry point shared by the pbench binary and the tests. `args` excludes
// the program name. Returns the process exit code.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"pbench: craft and evaluate availability poisons", "pbench"};
  app.require_subcommand(1);
  detail::Overrides o;
  std::string pack, ledger;
  std::size_t workers = 1, index = 0;

  auto* craft = app.add_subcommand("craft", "craft a poison pack");
  detail::add_common(craft, o);
  craft->add_option("--gen", o.gen, "regions | lowfreq | errmax_pgd | errmax_mifgsm | errmin");
  craft->add_option("--n-regions", o.n_regions);
  craft->add_option("--n-freq", o.n_freq);
  craft->add_option("--epsilon", o.epsilon);
  craft->add_option("--steps", o.steps);
  craft->add_option("--seed", o.seed, "generator seed");
  craft->add_option("--mode", o.mode, "class_wise | sample_wise (errmin)");
  craft->add_option("--crafting-checkpoint", o.crafting_checkpoint);

  auto* train_eval = app.add_subcommand("train-eval", "train a victim and log its curve");
  detail::add_common(train_eval, o);
  train_eval->add_option("--pack", pack, "poison pack (omit for the clean baseline)");
  train_eval->add_option("--ledger", ledger, "JSONL ledger to append the summary to");
  train_eval->add_option("--arch", o.arch);
  train_eval->add_option("--model-seed", o.model_seed);
  train_eval->add_option("--train-seed", o.train_seed);
  train_eval->add_option("--epochs", o.epochs);
  train_eval->add_option("--poison-id", o.poison_id);
  train_eval->add_flag("--augment", o.augment, "random crop + flip");

  auto* transfer = app.add_subcommand("transfer", "fraction of poisoned samples a victim misclassifies");
  detail::add_common(transfer, o);
  transfer->add_option("--pack", pack)->required();
  transfer->add_option("--arch", o.arch, "victim architecture");
  transfer->add_option("--model-seed", o.model_seed);
  transfer->add_option("--victim-checkpoint", o.victim_checkpoint);
  transfer->add_option("--poison-id", o.poison_id);

  std::string sweep_file, sweep_out;
  auto* sweep = app.add_subcommand("sweep", "craft + train-eval for every run of a sweep file");
  sweep->add_option("-c,--config", sweep_file, "sweep JSON")->required();
  sweep->add_option("--workers", workers, "concurrent runs")->check(CLI::PositiveNumber);
  sweep->add_option("--out", sweep_out);

  std::string report_out = ".";
  auto* report = app.add_subcommand("report", "scatter data and rank correlation from a ledger");
  report->add_option("--ledger", ledger)->required();
  report->add_option("--out", report_out);

  std::string ppm_out;
  auto* export_ppm = app.add_subcommand("export-perturbation", "write one perturbation as a PPM image");
  export_ppm->add_option("--pack", pack)->required();
  export_ppm->add_option("--index", index, "class (class-wise) or row (sample-wise)")->required();
  export_ppm->add_option("--out", ppm_out)->required();

  std::vector<const char*> argv{"pbench"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, "config", "usage", e.what());
    return 2;
  }

  try {
    if (craft->parsed()) {
      const CraftResult r = cmd_craft(o.resolve());
      out << "wrote " << r.pack_path.string() << " (" << r.manifest["pack"]["mode"].get<std::string>() << ", m="
          << r.manifest["pack"]["count"] << ", config " << r.manifest["config_hash"].get<std::string>() << ")\n";
    } else if (train_eval->parsed()) {
      const RunConfig cfg = o.resolve();
      const auto s = cmd_train_eval(cfg, pack, ledger);
      out << s.dump() << "\n";
    } else if (transfer->parsed()) {
      const auto j = cmd_transfer(o.resolve(), pack);
      out << j.dump() << "\n";
    } else if (sweep->parsed()) {
      const std::string text = read_text(sweep_file);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(text);
      } catch (const nlohmann::json::parse_error& e) {
        throw config_error("bad_config", sweep_file + ": " + e.what());
      }
      const SweepOutcome r = cmd_sweep(j, workers, sweep_out, &err);
      out << "wrote " << r.ledger.string() << "\n";
    } else if (report->parsed()) {
      const auto rep = cmd_report(ledger, report_out, &err);
      out << rep.dump() << "\n";
    } else if (export_ppm->parsed()) {
      cmd_export_perturbation(pack, index, ppm_out);
      out << "wrote " << ppm_out << "\n";
    }
  } catch (const Error& e) {
    print_error(err, to_string(e.kind()), e.code(), e.what());
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    print_error(err, "data", "io_error", e.what());
    return 3;
  } catch (const std::exception& e) {
    print_error(err, "internal", "internal", e.what());
    return 1;
  }
  return 0;
}

}  // namespace pb::cli
