// regret.hpp
// Cumulative regret of a played trace against the environment's oracle.
#pragma once

#include <span>

#include "igllab/core.hpp"
#include "igllab/sim/environment.hpp"

namespace igllab {

/// Sum over rounds of r(oracle_best) - r(played), with ground-truth rewards.
inline double oracle_regret(const Environment& env, std::span<const InteractionRecord> trace) {
  if (!env.has_ground_truth()) throw GroundTruthUnavailable();
  double total = 0.0;
  for (const auto& rec : trace) {
    if (rec.chosen_index >= rec.action_set.size())
      throw ValidationError(Invariant::IndexOutOfRange, "chosen index outside action set");
    const auto best = env.oracle_best(rec.context, rec.action_set);
    total += value_of(env.reward_of(rec.context, rec.action_set, best)) -
             value_of(env.reward_of(rec.context, rec.action_set, rec.chosen_index));
  }
  return total;
}

}  // namespace igllab
