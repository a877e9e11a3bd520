// sweep.hpp
// IGL-P(3) on the 3-state emission simulator across dislike probabilities.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "igllab/agents.hpp"
#include "igllab/metrics.hpp"
#include "igllab/parallel.hpp"
#include "igllab/sim/emission.hpp"

namespace igllab {

struct SweepOptions {
  std::vector<double> p_values = {0.2, 0.5, 1.0};
  std::uint32_t runs = 10;
  std::uint64_t horizon = 100000;
  std::uint64_t seed = 1;
  AgentSettings settings = emission_preset();
  bool alpha_equals_p = true;  // otherwise settings.alpha is used as given
  double convergence_threshold = 0.7;
  std::size_t jobs = 1;
};

struct SweepRun {
  double p = 0.0;
  std::uint32_t replicate = 0;
  FinalWindow final;
  std::optional<std::uint64_t> convergence;
};

struct SweepRow {
  double p = 0.0;
  MeanSe frac_neg;
  MeanSe frac_zero;
  MeanSe frac_pos;
  MeanSe convergence;  // runs that never converge count as the horizon
  std::uint32_t converged = 0;
  std::uint32_t runs = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepRun> runs;
};

/// Replicate r uses the same seed for every p, so profiles match across p.
inline SweepRun sweep_cell(double p, std::uint32_t replicate, const SweepOptions& opt) {
  if (!(p > 0.0 && p <= 1.0)) throw Error("sweep: dislike probability must lie in (0, 1]");
  const RunSeeds seeds = run_seeds(derive_seed(opt.seed, replicate));
  EmissionEnv env = build_emission_env(default_three_state_spec(p), seeds.env);
  AgentSettings s = opt.settings;
  if (opt.alpha_equals_p) s.alpha = p;
  IglAgent agent = make_igl_agent(Algorithm::IglP3, env, env.spec().dn_signals, s, seeds.agent);
  const MetricsSeries series = run_on_policy(agent, env, opt.horizon, seeds.driver);
  return {p, replicate, final_window(series), convergence_step(series, opt.convergence_threshold)};
}

inline SweepResult sweep_dislike_probability(const SweepOptions& opt) {
  if (opt.p_values.empty()) throw Error("sweep: no dislike probabilities given");
  if (opt.runs < 1) throw Error("sweep: runs must be at least 1");
  SweepResult result;
  result.runs.resize(opt.p_values.size() * opt.runs);
  parallel_for(result.runs.size(), opt.jobs, [&](std::size_t i) {
    result.runs[i] = sweep_cell(opt.p_values[i / opt.runs], static_cast<std::uint32_t>(i % opt.runs), opt);
  });
  for (std::size_t pi = 0; pi < opt.p_values.size(); ++pi) {
    std::vector<double> neg, zero, pos, conv;
    SweepRow row;
    row.p = opt.p_values[pi];
    for (std::uint32_t r = 0; r < opt.runs; ++r) {
      const SweepRun& run = result.runs[pi * opt.runs + r];
      neg.push_back(run.final.frac_neg);
      zero.push_back(run.final.frac_zero);
      pos.push_back(run.final.frac_pos);
      conv.push_back(static_cast<double>(run.convergence.value_or(opt.horizon)));
      if (run.convergence) ++row.converged;
    }
    row.frac_neg = mean_se(neg);
    row.frac_zero = mean_se(zero);
    row.frac_pos = mean_se(pos);
    row.convergence = mean_se(conv);
    row.runs = opt.runs;
    result.rows.push_back(row);
  }
  return result;
}

}  // namespace igllab
