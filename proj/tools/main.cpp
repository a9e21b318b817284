#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "came/cli/commands.hpp"
#include "came/cli/config.hpp"
#include "came/cli/experiments.hpp"
#include "came/cli/gradcheck.hpp"
#include "came/util/binary_io.hpp"

namespace {

using came::cli::RunConfig;

// Options shared by every subcommand that reads a run config.
struct ConfigOptions {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", config_file, "Run config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "Override a config key: section.key=value (repeatable)");
    cmd->add_option("--seed", seed, "Seed (overrides the config file and CAME_SEED)");
  }

  RunConfig load() const {
    RunConfig c = config_file.empty() ? RunConfig() : came::cli::load_run_config(config_file);
    for (const auto& o : overrides) came::cli::apply_override(c, o);
    came::cli::apply_seed_env(c);
    if (seed) c.seed = *seed;
    return c;
  }
};

void print_gradcheck(const char* name, const came::diff::GradCheckReport& r) {
  std::printf("%-12s %s  max rel err %.3e over %zu values; worst %s[%zu] analytic %.6e numeric %.6e\n", name,
              r.pass ? "ok  " : "FAIL", r.max_rel_err, r.checked, r.worst_param.c_str(), r.worst_index,
              r.worst_analytic, r.worst_numeric);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"came: mixture-of-experts retriever with competitive learning"};
  app.require_subcommand(1);

  // datagen
  auto* datagen = app.add_subcommand("datagen", "Generate a synthetic three-family dataset");
  std::string spec_file, data_out;
  std::optional<std::uint64_t> data_seed;
  datagen->add_option("--spec", spec_file, "Generator spec (key = value lines)")->check(CLI::ExistingFile);
  datagen->add_option("-o,--out", data_out, "Output directory")->required();
  datagen->add_option("--seed", data_seed, "Generator seed (overrides the spec)");

  // train
  auto* train = app.add_subcommand("train", "Train the retriever and write a checkpoint");
  ConfigOptions train_opts;
  train_opts.attach(train);
  std::optional<double> tau, ratio;
  std::optional<std::size_t> shared_layers;
  bool no_specialized = false, no_standardized = false, quiet = false;
  train->add_option("--tau", tau, "Competition temperature (> 0)");
  train->add_option("--ratio", ratio, "Share of phase-A steps trained with the standardized loss");
  train->add_option("--shared-layers", shared_layers, "Number of shared transformer layers");
  train->add_flag("--no-specialized", no_specialized, "Standardized loss only, every step");
  train->add_flag("--no-standardized", no_standardized, "Specialized loss from the first step");
  train->add_flag("-q,--quiet", quiet, "No per-step progress");

  auto* index = app.add_subcommand("index", "Encode the corpus into the three expert indexes");
  ConfigOptions index_opts;
  index_opts.attach(index);

  auto* retrieve = app.add_subcommand("retrieve", "Write one run file per expert for the evaluation queries");
  ConfigOptions retrieve_opts;
  retrieve_opts.attach(retrieve);

  auto* fuse = app.add_subcommand("fuse", "Fuse the three expert runs");
  ConfigOptions fuse_opts;
  fuse_opts.attach(fuse);
  std::string method;
  fuse->add_option("--method", method, "sum, normsum, normmax, sumrr, maxrr or linear");

  auto* evaluate = app.add_subcommand("eval", "Score a run file");
  ConfigOptions eval_opts;
  eval_opts.attach(evaluate);
  std::string run_file;
  evaluate->add_option("--run", run_file, "Run file (default: the fused run)");

  auto* gradcheck = app.add_subcommand("gradcheck", "Check both training losses against finite differences");
  came::cli::GradCheckSetup gc;
  gradcheck->add_option("--seed", gc.seed, "Seed of the random tiny model");
  gradcheck->add_option("--tol", gc.tol, "Maximum relative error");

  auto* experiment = app.add_subcommand("experiment", "Run a named sweep on a generated dataset");
  ConfigOptions exp_opts;
  exp_opts.attach(experiment);
  std::string sweep;
  std::size_t seeds = 1;
  experiment->add_option("name", sweep, "tau | ratio | shared-layers | ablation")
      ->required()
      ->check(CLI::IsMember(came::cli::sweep_names()));
  experiment->add_option("--seeds", seeds, "Repeat every variant over this many seeds")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*datagen) {
      came::synthgen::GenSpec spec;
      if (!spec_file.empty()) spec = came::synthgen::parse_spec(came::read_file(spec_file), spec_file);
      if (data_seed) spec.seed = *data_seed;
      spec.validate();
      came::cli::cmd_datagen(spec, data_out);
      std::printf("wrote dataset to %s\n", data_out.c_str());
    } else if (*train) {
      RunConfig c = train_opts.load();
      if (tau) c.schedule.tau = *tau;
      if (ratio) c.schedule.standardized_ratio = *ratio;
      if (shared_layers) c.model.n_shared_layers = *shared_layers;
      if (no_specialized) c.schedule.specialized = false;
      if (no_standardized) c.schedule.standardized_ratio = 0.0;
      c.finalize();
      came::write_file_atomic(c.paths.output_dir / "config.resolved.toml", came::cli::format_run_config(c));
      const auto res = came::cli::cmd_train(c, quiet ? nullptr : &std::cout);
      for (const auto& w : res.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      std::printf("wrote %s\n", c.paths.checkpoint.string().c_str());
    } else if (*index) {
      RunConfig c = index_opts.load();
      c.finalize();
      came::cli::cmd_index(c);
      std::printf("wrote indexes to %s\n", c.paths.index_dir.string().c_str());
    } else if (*retrieve) {
      RunConfig c = retrieve_opts.load();
      c.finalize();
      came::cli::cmd_retrieve(c);
      std::printf("wrote expert runs to %s\n", c.paths.output_dir.string().c_str());
    } else if (*fuse) {
      RunConfig c = fuse_opts.load();
      if (!method.empty()) c.fusion = came::retrieval::parse_fusion_method(method);
      c.finalize();
      came::cli::cmd_fuse(c);
      std::printf("wrote %s\n", came::cli::fused_run_path(c).string().c_str());
    } else if (*evaluate) {
      RunConfig c = eval_opts.load();
      c.finalize();
      const auto reports = came::cli::cmd_eval(c, run_file.empty() ? came::cli::fused_run_path(c) : std::filesystem::path(run_file));
      std::cout << came::eval::reports_to_table(reports);
      for (const auto& r : reports) {
        for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      }
    } else if (*gradcheck) {
      const auto out = came::cli::run_gradcheck(gc);
      print_gradcheck("standardized", out.standardized);
      print_gradcheck("specialized", out.specialized);
      for (const auto& n : out.notes) std::printf("note: %s\n", n.c_str());
      return out.pass() ? 0 : 1;
    } else if (*experiment) {
      RunConfig c = exp_opts.load();
      c.finalize();
      if (c.paths.data.empty()) throw std::invalid_argument("experiment needs paths.data (a datagen output directory)");
      const auto data = came::synthgen::read_dataset(c.paths.data);
      const auto rows = came::cli::run_sweep(sweep, c, data, seeds, &std::cout);
      const auto out = c.paths.output_dir / ("experiment." + sweep + ".csv");
      came::write_file_atomic(out, came::cli::sweep_to_csv(rows));
      std::printf("wrote %s\n", out.string().c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
