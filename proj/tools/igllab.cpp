// igllab: command-line experiment runner.
//
//   igllab run    --config exp.json [--seed S] [--horizon T] [--alpha A] [--epsilon E] [--jobs J] [--out DIR]
//   igllab replay RECORDS.jsonl --config exp.json [--out FILE.csv]
//   igllab sweep  --config sweep.json [--out DIR]
//   igllab plot   A.csv [B.csv ...] --out curves.svg
//
// IGLLAB_LOG sets verbosity (trace, debug, info, warn, error, off).

#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "igllab/experiment.hpp"
#include "igllab/plot.hpp"

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("igllab");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("IGLLAB_LOG"))
    spdlog::set_level(spdlog::level::from_str(level));
}

igllab::CommandLog make_log() {
  igllab::CommandLog log;
  log.info = [](const std::string& m) { spdlog::info("{}", m); };
  log.error = [](const std::string& m) { spdlog::error("{}", m); };
  return log;
}

struct CommonFlags {
  std::string config;
  igllab::Overrides overrides;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "experiment config (JSON)")->required();
  cmd->add_option("--out", f.overrides.out, "output directory (replay: output CSV)");
  cmd->add_option("--seed", f.overrides.seed, "run a single seed instead of the config's list");
  cmd->add_option("--jobs", f.overrides.jobs, "parallel cells");
  cmd->add_option("--horizon", f.overrides.horizon, "steps per run");
  cmd->add_option("--alpha", f.overrides.alpha, "labelling propensity for IGL-P(3)");
  cmd->add_option("--epsilon", f.overrides.epsilon, "exploration rate");
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Interaction-grounded learning experiments"};
  app.require_subcommand(1);

  CommonFlags run_flags, replay_flags, sweep_flags;
  auto* run = app.add_subcommand("run", "run every (algorithm, seed) cell of a config");
  add_common(run, run_flags);

  auto* replay = app.add_subcommand("replay", "replay a record file off-policy");
  std::string records;
  replay->add_option("records", records, "JSON-lines record file")->required();
  add_common(replay, replay_flags);

  auto* sweep = app.add_subcommand("sweep", "dislike-probability sweep on the 3-state simulator");
  add_common(sweep, sweep_flags);

  auto* plot = app.add_subcommand("plot", "render reward-state curves to SVG");
  std::vector<std::string> csvs;
  std::string image;
  plot->add_option("metrics", csvs, "metrics CSV files")->required();
  plot->add_option("--out", image, "output SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const auto log = make_log();
  if (*run) return igllab::cmd_run(run_flags.config, run_flags.overrides, log);
  if (*replay) return igllab::cmd_replay(records, replay_flags.config, replay_flags.overrides, log);
  if (*sweep) return igllab::cmd_sweep(sweep_flags.config, sweep_flags.overrides, log);
  if (*plot) return igllab::cmd_plot(csvs, image, log.error);
  return 1;
}
