// igl.hpp
// Interaction-grounded learning by inverse kinematics.
//
// Each round the inverse-kinematics (IK) model predicts which action was
// played from the context and the observed feedback. Its training stream is
// importance weighted so that the action prior is uniform (1/K) whatever the
// behavior policy was. A posterior above detection_factor/K marks an extreme
// event, meaning the latent reward is nonzero. The definitely-negative oracle
// then decides its sign, and the contextual bandit learns from the resulting
// pseudo-reward in {0, 1, -1/alpha}.
#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "igllab/cb.hpp"
#include "igllab/core.hpp"
#include "igllab/learners.hpp"
#include "igllab/metrics.hpp"
#include "igllab/sim/environment.hpp"

namespace igllab {

class ZeroPropensity : public Error {
 public:
  explicit ZeroPropensity(double p)
      : Error("ZeroPropensity: behavior probability " + std::to_string(p) +
              " is at or below the propensity floor") {}
};

class ConfigMismatch : public Error {
 public:
  using Error::Error;
};

/// A record stream failed validation; `line` is 1-based.
class RecordInvalid : public Error {
 public:
  RecordInvalid(std::size_t line, const std::string& what)
      : Error("RecordInvalid at line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// ---------------------------------------------------------------------------
// IK input encoding
// ---------------------------------------------------------------------------

/// Layout of the IK input: context features, then a one-hot feedback block,
/// then (optionally) a user x feedback cross block that lets a log-linear
/// model represent per-user feedback semantics.
struct IkInputLayout {
  std::uint32_t context_dim = 0;
  std::uint32_t feedback_count = 0;
  std::optional<IndexBlock> user_block;
  bool cross_user_feedback = false;

  IndexBlock feedback_block() const noexcept { return {context_dim, feedback_count}; }

  IndexBlock cross_block() const noexcept {
    if (!cross_user_feedback || !user_block) return {context_dim + feedback_count, 0};
    return {context_dim + feedback_count, user_block->size * feedback_count};
  }

  std::uint32_t input_dim() const noexcept {
    return context_dim + feedback_count + cross_block().size;
  }

  FeatureVector encode(const Context& context, const Feedback& feedback) const {
    if (feedback.signal_id >= feedback_count)
      throw ValidationError(Invariant::IndexOutOfRange,
                            "signal " + std::to_string(feedback.signal_id) + " outside vocabulary");
    std::vector<FeatureVector::Entry> entries;
    entries.reserve(context.features.nnz() + 2);
    std::optional<std::uint32_t> user;
    for (const auto& [i, v] : context.features.entries()) {
      if (i >= context_dim)
        throw ValidationError(Invariant::DimensionMismatch,
                              "context feature " + std::to_string(i) + " outside layout");
      entries.emplace_back(i, v);
      if (!user && user_block && user_block->contains(i)) user = i - user_block->offset;
    }
    entries.emplace_back(context_dim + feedback.signal_id, 1.0);
    if (cross_user_feedback && user)
      entries.emplace_back(cross_block().offset + *user * feedback_count + feedback.signal_id, 1.0);
    return FeatureVector(input_dim(), std::move(entries));
  }
};

// ---------------------------------------------------------------------------
// Definitely-negative oracle
// ---------------------------------------------------------------------------

/// Partial labeler (context, feedback) -> {-1, 0}. It must never return -1 on
/// a signal that can be emitted under r = +1.
class DnOracle {
 public:
  using Fn = std::function<int(const Context&, const Feedback&)>;

  DnOracle() = default;

  static DnOracle constant_zero() { return DnOracle(); }

  /// -1 exactly on the listed signals.
  static DnOracle from_signals(std::vector<std::uint32_t> signals) {
    DnOracle dn;
    dn.signals_ = std::move(signals);
    return dn;
  }

  static DnOracle custom(Fn fn) {
    DnOracle dn;
    dn.fn_ = std::move(fn);
    return dn;
  }

  int operator()(const Context& context, const Feedback& feedback) const {
    if (fn_) {
      const int v = fn_(context, feedback);
      if (v != 0 && v != -1) throw Error("DnOracle must return -1 or 0");
      return v;
    }
    for (auto s : signals_)
      if (s == feedback.signal_id) return -1;
    return 0;
  }

  bool is_constant_zero() const noexcept { return !fn_ && signals_.empty(); }
  const std::vector<std::uint32_t>& signals() const noexcept { return signals_; }

 private:
  std::vector<std::uint32_t> signals_;
  Fn fn_;
};

// ---------------------------------------------------------------------------
// Configuration and step record
// ---------------------------------------------------------------------------

enum class LatentStates { Two, Three };

struct IglConfig {
  LatentStates latent_states = LatentStates::Two;
  double alpha = 1.0;
  double detection_factor = 2.0;
  std::uint32_t action_count = 2;
  DnOracle dn;
  IkInputLayout ik_input;

  void validate() const {
    if (action_count < 2) throw ConfigMismatch("IglConfig: K must be at least 2");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigMismatch("IglConfig: alpha must lie in (0, 1]");
    if (!(detection_factor > 0.0)) throw ConfigMismatch("IglConfig: detection_factor must be positive");
    if (latent_states == LatentStates::Two && (alpha != 1.0 || !dn.is_constant_zero()))
      throw ConfigMismatch("IglConfig: 2-state IGL requires alpha = 1 and a constant-0 DN oracle");
  }
};

inline IglConfig two_state_config(std::uint32_t k, IkInputLayout layout) {
  IglConfig c;
  c.latent_states = LatentStates::Two;
  c.action_count = k;
  c.ik_input = layout;
  return c;
}

inline IglConfig three_state_config(std::uint32_t k, IkInputLayout layout, double alpha, DnOracle dn) {
  IglConfig c;
  c.latent_states = LatentStates::Three;
  c.action_count = k;
  c.alpha = alpha;
  c.dn = std::move(dn);
  c.ik_input = layout;
  return c;
}

struct IglStep {
  InteractionRecord record;
  double ik_posterior = 0.0;       // IK estimate of P(a_t | y_t, x_t)
  std::size_t ik_argmax = 0;       // most probable action under the IK model
  double importance_weight = 1.0;  // 1 / (K P(a_t | x_t))
  bool extreme = false;
  int dn = 0;
  PseudoReward pseudo_reward;
};

// ---------------------------------------------------------------------------
// The three pieces of the reward extractor
// ---------------------------------------------------------------------------

/// Importance weight that turns the behavior policy into a uniform one.
inline double synthetic_uniform_weight(std::uint32_t k, double p_chosen) {
  if (k < 2) throw ConfigMismatch("synthetic_uniform_weight: K must be at least 2");
  if (!(p_chosen > kPropensityFloor)) throw ZeroPropensity(p_chosen);
  if (p_chosen > 1.0)
    throw ValidationError(Invariant::DistributionNotNormalized, "probability above 1");
  return 1.0 / (static_cast<double>(k) * p_chosen);
}

/// Against a uniform prior 1/K: is the posterior more than factor times the prior?
inline bool detect_extreme(std::uint32_t k, double posterior, double factor = 2.0) noexcept {
  return static_cast<double>(k) * posterior > factor;
}

inline PseudoReward extract_reward(bool extreme, int dn, double alpha) noexcept {
  if (!extreme) return {0.0};
  if (dn == -1) return {-1.0 / alpha};
  return {1.0};
}

// ---------------------------------------------------------------------------
// One round of the reduction
// ---------------------------------------------------------------------------

/// Predict, update the CB on the pseudo-reward, then update IK with the
/// synthetic-uniform weight, in that order.
inline IglStep igl_step(const IglConfig& config, OnlineSoftmaxModel& ik, CbPolicy& cb,
                        const InteractionRecord& record) {
  const std::uint32_t k = config.action_count;
  if (record.action_set.size() != k)
    throw ConfigMismatch("igl_step: record has K=" + std::to_string(record.action_set.size()) +
                         ", config expects K=" + std::to_string(k));
  validate_record(record, config.ik_input.feedback_count);

  IglStep step;
  step.record = record;
  step.importance_weight =
      synthetic_uniform_weight(k, record.behavior_probs[record.chosen_index]);

  const FeatureVector input = config.ik_input.encode(record.context, record.feedback);
  const auto posterior = ik.predict(input, k);
  step.ik_posterior = posterior[record.chosen_index];
  for (std::size_t i = 1; i < posterior.size(); ++i)
    if (posterior[i] > posterior[step.ik_argmax]) step.ik_argmax = i;

  step.extreme = detect_extreme(k, step.ik_posterior, config.detection_factor);
  step.dn = step.extreme ? config.dn(record.context, record.feedback) : 0;
  step.pseudo_reward = extract_reward(step.extreme, step.dn, config.alpha);

  cb.learn(record.context, record.action_set, record.chosen_index, step.pseudo_reward.value,
           record.behavior_probs);
  ik.learn({input, k, static_cast<std::uint32_t>(record.chosen_index), step.importance_weight});
  return step;
}

// ---------------------------------------------------------------------------
// Agents: a behavior policy plus a learning rule over logged rounds
// ---------------------------------------------------------------------------

/// IGL-P(2) / IGL-P(3): owns its IK and CB models.
class IglAgent {
 public:
  IglAgent(IglConfig config, const ModelConfig& ik_model, const CbConfig& cb)
      : config_(std::move(config)), ik_(ik_model), cb_(cb) {
    config_.validate();
    if (ik_model.input_dim != config_.ik_input.input_dim())
      throw ConfigMismatch("IK model input_dim does not match the IK input layout");
    if (ik_model.classes != config_.action_count || cb.scorer.classes != config_.action_count)
      throw ConfigMismatch("IK and CB models must have K classes");
  }

  PolicyDistribution predict(const Context& context, const ActionSet& actions) const {
    return cb_.predict(context, actions);
  }

  IglStep step(const InteractionRecord& record) { return igl_step(config_, ik_, cb_, record); }

  static constexpr bool has_ik = true;

  const IglConfig& config() const noexcept { return config_; }
  const OnlineSoftmaxModel& ik() const noexcept { return ik_; }
  const CbPolicy& cb() const noexcept { return cb_; }

 private:
  IglConfig config_;
  OnlineSoftmaxModel ik_;
  CbPolicy cb_;
};

/// CB-Click: a plain CB that treats the click signal as the reward.
class CtrAgent {
 public:
  CtrAgent(const CbConfig& cb, std::uint32_t click_signal, std::uint32_t feedback_count)
      : cb_(cb), click_(click_signal), feedback_count_(feedback_count) {}

  PolicyDistribution predict(const Context& context, const ActionSet& actions) const {
    return cb_.predict(context, actions);
  }

  IglStep step(const InteractionRecord& record) {
    validate_record(record, feedback_count_);
    IglStep step;
    step.record = record;
    step.importance_weight = synthetic_uniform_weight(
        static_cast<std::uint32_t>(record.action_set.size()),
        record.behavior_probs[record.chosen_index]);
    step.ik_posterior = std::numeric_limits<double>::quiet_NaN();
    step.pseudo_reward = {ctr_baseline_learn(cb_, record, click_)};
    return step;
  }

  static constexpr bool has_ik = false;

  const CbPolicy& cb() const noexcept { return cb_; }

 private:
  CbPolicy cb_;
  std::uint32_t click_;
  std::uint32_t feedback_count_;
};

// ---------------------------------------------------------------------------
// Drivers
// ---------------------------------------------------------------------------

/// Inverse-CDF draw from a distribution.
template <typename Rng>
std::size_t sample_index(const PolicyDistribution& dist, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    acc += dist[i];
    if (u < acc) return i;
  }
  return dist.size() - 1;
}

struct DriverOptions {
  std::size_t metrics_window = 500;
  /// Called with every completed step, e.g. to capture a RecordFile.
  std::function<void(const IglStep&)> on_step;
};

template <typename Agent>
MetricsSeries run_on_policy(Agent& agent, Environment& env, std::uint64_t horizon,
                            std::uint64_t seed, const DriverOptions& options = {}) {
  if (horizon < 1) throw Error("run_on_policy: horizon must be at least 1");
  std::mt19937_64 rng(seed);
  MetricsTracker tracker(options.metrics_window);
  MetricsSeries series;
  series.reserve(horizon);
  for (std::uint64_t t = 0; t < horizon; ++t) {
    auto [context, actions] = env.next();
    InteractionRecord rec;
    rec.behavior_probs = agent.predict(context, actions);
    rec.chosen_index = sample_index(rec.behavior_probs, rng);
    const Emission em = env.feedback(context, actions, rec.chosen_index);
    rec.feedback = em.feedback;
    rec.latent_reward = em.reward;

    std::optional<double> regret;
    if (env.has_ground_truth()) {
      const auto best = env.oracle_best(context, actions);
      regret = value_of(env.reward_of(context, actions, best)) - value_of(em.reward);
    }
    rec.context = std::move(context);
    rec.action_set = std::move(actions);

    const IglStep step = agent.step(rec);
    std::optional<bool> hit;
    if constexpr (Agent::has_ik) hit = step.ik_argmax == step.record.chosen_index;
    series.push_back(
        tracker.add(step.pseudo_reward.value, em.reward, step.ik_posterior, hit, regret));
    if (options.on_step) options.on_step(step);
  }
  return series;
}

/// Replays logged rounds in order. `source` yields records until nullopt;
/// any validation failure is rethrown as RecordInvalid with its 1-based line.
template <typename Agent, typename Source>
  requires std::invocable<Source&>
MetricsSeries run_off_policy(Agent& agent, Source&& source, const DriverOptions& options = {}) {
  MetricsTracker tracker(options.metrics_window);
  MetricsSeries series;
  std::size_t line = 0;
  while (true) {
    std::optional<InteractionRecord> rec = source();
    if (!rec) break;
    ++line;
    IglStep step;
    try {
      step = agent.step(*rec);
    } catch (const ValidationError& e) {
      throw RecordInvalid(line, e.what());
    } catch (const ZeroPropensity& e) {
      throw RecordInvalid(line, e.what());
    } catch (const ConfigMismatch& e) {
      throw RecordInvalid(line, e.what());
    }
    std::optional<bool> hit;
    if constexpr (Agent::has_ik) hit = step.ik_argmax == step.record.chosen_index;
    series.push_back(tracker.add(step.pseudo_reward.value, rec->latent_reward, step.ik_posterior,
                                 hit, std::nullopt));
    if (options.on_step) options.on_step(step);
  }
  return series;
}

/// Convenience overload over an in-memory sequence.
template <typename Agent>
MetricsSeries run_off_policy(Agent& agent, const std::vector<InteractionRecord>& records,
                             const DriverOptions& options = {}) {
  std::size_t i = 0;
  return run_off_policy(agent,
                        [&]() -> std::optional<InteractionRecord> {
                          if (i == records.size()) return std::nullopt;
                          return records[i++];
                        },
                        options);
}

}  // namespace igllab
