// environment.hpp
// The stochastic IGL protocol as seen by a learner: draw a context and action
// set, play an action, observe one feedback signal. Simulators also expose the
// ground-truth latent reward for evaluation; it is never passed to learners.
#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "igllab/core.hpp"

namespace igllab {

class GroundTruthUnavailable : public Error {
 public:
  GroundTruthUnavailable() : Error("GroundTruthUnavailable: environment has no latent rewards") {}
};

struct Emission {
  Feedback feedback;
  LatentReward reward = LatentReward::Zero;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::pair<Context, ActionSet> next() = 0;

  /// Feedback depends on the chosen action only through the latent reward.
  virtual Emission feedback(const Context& context, const ActionSet& actions,
                            std::size_t chosen) = 0;

  /// Ground-truth latent reward of playing `index` in this round.
  virtual LatentReward reward_of(const Context& context, const ActionSet& actions,
                                 std::size_t index) const = 0;

  virtual bool has_ground_truth() const { return true; }

  /// Lowest-index action with maximal ground-truth reward.
  virtual std::size_t oracle_best(const Context& context, const ActionSet& actions) const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < actions.size(); ++i)
      if (value_of(reward_of(context, actions, i)) > value_of(reward_of(context, actions, best)))
        best = i;
    return best;
  }

  virtual std::uint32_t context_dim() const = 0;
  virtual std::uint32_t feedback_count() const = 0;
  virtual std::uint32_t action_count() const = 0;

  /// Reserved one-hot block of the context that carries the user id, if any.
  virtual std::optional<IndexBlock> user_block() const { return std::nullopt; }
};

}  // namespace igllab
