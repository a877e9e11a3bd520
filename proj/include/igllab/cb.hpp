// cb.hpp
// Contextual-bandit policy consumed by the IGL reduction, and the CTR
// baseline that rewards only the click signal.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "igllab/core.hpp"
#include "igllab/learners.hpp"

namespace igllab {

enum class Exploration { EpsilonGreedy, Softmax };

/// How a negative reward on the chosen action reaches the scorer. Both give
/// every other class a positive example. Replicate gives each one the full
/// credit, which equals subtracting it from the chosen action up to a shift
/// shared by all actions. SplitEqually divides it among the K-1 others.
enum class NegativeCredit { Replicate, SplitEqually };

struct CbConfig {
  Exploration exploration = Exploration::EpsilonGreedy;
  double epsilon = 0.1;
  double temperature = 1.0;  // Softmax only
  NegativeCredit negative_credit = NegativeCredit::Replicate;
  ModelConfig scorer;        // classes = K, input = context features
};

/// Epsilon-greedy over `scores`: the first maximal entry gets 1-eps+eps/K,
/// every other entry eps/K.
inline PolicyDistribution epsilon_greedy(const std::vector<double>& scores, double epsilon) {
  const std::size_t k = scores.size();
  std::size_t best = 0;
  for (std::size_t i = 1; i < k; ++i)
    if (scores[i] > scores[best]) best = i;
  PolicyDistribution dist;
  dist.probs.assign(k, epsilon / static_cast<double>(k));
  dist.probs[best] += 1.0 - epsilon;
  return dist;
}

/// (1-eps) * softmax(scores / temperature) + eps/K.
inline PolicyDistribution softmax_exploration(const std::vector<double>& scores, double temperature,
                                              double epsilon) {
  const std::size_t k = scores.size();
  double top = scores[0];
  for (double s : scores) top = std::max(top, s);
  std::vector<double> e(k);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    e[i] = std::exp((scores[i] - top) / temperature);
    total += e[i];
  }
  PolicyDistribution dist;
  dist.probs.resize(k);
  for (std::size_t i = 0; i < k; ++i)
    dist.probs[i] = (1.0 - epsilon) * e[i] / total + epsilon / static_cast<double>(k);
  return dist;
}

class CbPolicy {
 public:
  explicit CbPolicy(const CbConfig& config) : config_(config), scorer_(config.scorer) {
    if (!(config_.epsilon > 0.0 && config_.epsilon <= 1.0))
      throw Error("CbConfig: epsilon must lie in (0, 1]");
    if (config_.exploration == Exploration::Softmax && !(config_.temperature > 0.0))
      throw Error("CbConfig: temperature must be positive");
  }

  const CbConfig& config() const noexcept { return config_; }
  const OnlineSoftmaxModel& scorer() const noexcept { return scorer_; }
  OnlineSoftmaxModel& scorer() noexcept { return scorer_; }

  std::uint32_t action_count() const noexcept { return config_.scorer.classes; }

  /// Smallest probability any emitted distribution can hold.
  double epsilon_floor() const noexcept {
    return config_.epsilon / static_cast<double>(action_count());
  }

  /// Log-probabilities of the scorer; monotone in the class logits.
  std::vector<double> scores(const Context& context, const ActionSet& actions) const {
    check_k(actions);
    auto probs = scorer_.predict(context.features, action_count());
    for (auto& p : probs) p = std::log(p);
    return probs;
  }

  PolicyDistribution predict(const Context& context, const ActionSet& actions) const {
    const auto s = scores(context, actions);
    if (config_.exploration == Exploration::Softmax)
      return softmax_exploration(s, config_.temperature, config_.epsilon);
    return epsilon_greedy(s, config_.epsilon);
  }

  /// Inverse-propensity-weighted update. Credit r / P(chosen) goes to the
  /// chosen class when positive. When negative, its magnitude goes to the
  /// other classes per NegativeCredit, applied as one logical example.
  void learn(const Context& context, const ActionSet& actions, std::size_t chosen,
             double pseudo_reward, const PolicyDistribution& behavior) {
    check_k(actions);
    if (chosen >= actions.size())
      throw ValidationError(Invariant::IndexOutOfRange, "chosen index outside action set");
    if (behavior.size() != actions.size())
      throw ValidationError(Invariant::DimensionMismatch, "behavior distribution misaligned");
    if (pseudo_reward == 0.0) return;
    const double p = behavior[chosen];
    if (p < kPropensityFloor)
      throw ValidationError(Invariant::ProbabilityBelowFloor, "behavior probability below floor");
    const double credit = pseudo_reward / p;
    const auto k = static_cast<std::uint32_t>(actions.size());
    if (credit > 0.0) {
      scorer_.learn({context.features, k, static_cast<std::uint32_t>(chosen), credit});
      return;
    }
    const double share = config_.negative_credit == NegativeCredit::SplitEqually
                             ? -credit / static_cast<double>(k - 1)
                             : -credit;
    std::vector<WeightedExample> group;
    group.reserve(k - 1);
    for (std::uint32_t c = 0; c < k; ++c)
      if (c != chosen) group.push_back({context.features, k, c, share});
    scorer_.learn_group(group);
  }

 private:
  void check_k(const ActionSet& actions) const {
    if (actions.size() != action_count())
      throw ValidationError(Invariant::DimensionMismatch,
                            "policy built for K=" + std::to_string(action_count()) +
                                ", action set has " + std::to_string(actions.size()));
  }

  CbConfig config_;
  OnlineSoftmaxModel scorer_;
};

/// CB-Click reward: 1 iff the observed signal is the click signal.
inline double ctr_reward(const Feedback& feedback, std::uint32_t click_signal) noexcept {
  return feedback.signal_id == click_signal ? 1.0 : 0.0;
}

/// One step of the CTR baseline: a plain CB update on the click indicator.
inline double ctr_baseline_learn(CbPolicy& policy, const InteractionRecord& rec,
                                 std::uint32_t click_signal) {
  const double r = ctr_reward(rec.feedback, click_signal);
  policy.learn(rec.context, rec.action_set, rec.chosen_index, r, rec.behavior_probs);
  return r;
}

}  // namespace igllab
