// agents.hpp
// Builds IGL-P(2), IGL-P(3) and CB-Click agents for an environment from one
// flat set of hyperparameters.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include "igllab/cb.hpp"
#include "igllab/igl.hpp"
#include "igllab/learners.hpp"
#include "igllab/sim/environment.hpp"

namespace igllab {

enum class Algorithm { IglP2, IglP3, CbCtr };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::IglP2: return "igl-p2";
    case Algorithm::IglP3: return "igl-p3";
    case Algorithm::CbCtr: return "cb-ctr";
  }
  return "unknown";
}

inline std::optional<Algorithm> parse_algorithm(const std::string& name) {
  if (name == "igl-p2") return Algorithm::IglP2;
  if (name == "igl-p3") return Algorithm::IglP3;
  if (name == "cb-ctr") return Algorithm::CbCtr;
  return std::nullopt;
}

struct AgentSettings {
  double alpha = 1.0;
  double detection_factor = 2.0;
  Exploration exploration = Exploration::EpsilonGreedy;
  double epsilon = 0.1;
  double temperature = 1.0;
  NegativeCredit negative_credit = NegativeCredit::Replicate;

  double cb_learning_rate = 2.5e-3;
  double ik_learning_rate = 2.5e-3;
  std::uint32_t batch_size = 1;
  std::uint32_t hidden_width = 512;
  double init_scale = 0.2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;

  // IK input options.
  bool ik_cross_user_feedback = false;
  bool ik_gate = false;
  std::uint32_t ik_gate_rank = 2;
};

/// Settings used for the emission simulators: a linear learner whose IK has
/// a user x signal cross block, so per-user decoding is representable.
inline AgentSettings emission_preset() {
  AgentSettings s;
  s.hidden_width = 0;
  s.ik_cross_user_feedback = true;
  s.cb_learning_rate = 1e-3;
  s.ik_learning_rate = 1e-3;
  return s;
}

/// Settings used for the supervised-to-bandit simulator: the IK embeds users
/// and words in two dimensions through the bilinear gate. Softmax exploration
/// keeps the early policy close to uniform while the CB scores are flat.
inline AgentSettings covertype_preset() {
  AgentSettings s;
  s.hidden_width = 0;
  s.ik_gate = true;
  s.ik_gate_rank = 2;
  s.exploration = Exploration::Softmax;
  s.temperature = 1.0;
  return s;
}

/// SplitMix64 step, used to derive independent seeds from one run seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Independent streams for one run: environment, agent models, action draws.
struct RunSeeds {
  std::uint64_t env;
  std::uint64_t agent;
  std::uint64_t driver;
};

inline RunSeeds run_seeds(std::uint64_t seed) {
  return {derive_seed(seed, 10), derive_seed(seed, 11), derive_seed(seed, 12)};
}

inline IkInputLayout ik_layout_for(const Environment& env, const AgentSettings& s) {
  IkInputLayout layout;
  layout.context_dim = env.context_dim();
  layout.feedback_count = env.feedback_count();
  layout.user_block = env.user_block();
  layout.cross_user_feedback = s.ik_cross_user_feedback && layout.user_block.has_value();
  return layout;
}

inline ModelConfig base_model_config(const AgentSettings& s, std::uint32_t input_dim,
                                     std::uint32_t classes, double lr, std::uint64_t seed) {
  ModelConfig m;
  m.input_dim = input_dim;
  m.classes = classes;
  m.learning_rate = lr;
  m.batch_size = s.batch_size;
  m.hidden_width = s.hidden_width;
  m.init_scale = s.init_scale;
  m.beta1 = s.beta1;
  m.beta2 = s.beta2;
  m.epsilon = s.adam_epsilon;
  m.seed = seed;
  return m;
}

inline CbConfig cb_config_for(std::uint32_t context_dim, std::uint32_t k, const AgentSettings& s,
                              std::uint64_t seed) {
  CbConfig cb;
  cb.exploration = s.exploration;
  cb.epsilon = s.epsilon;
  cb.temperature = s.temperature;
  cb.negative_credit = s.negative_credit;
  cb.scorer = base_model_config(s, context_dim, k, s.cb_learning_rate, derive_seed(seed, 1));
  return cb;
}

inline ModelConfig ik_config_for(const IkInputLayout& layout, std::uint32_t k,
                                 const AgentSettings& s, std::uint64_t seed) {
  ModelConfig m = base_model_config(s, layout.input_dim(), k, s.ik_learning_rate, derive_seed(seed, 2));
  if (s.ik_gate && layout.user_block) {
    BilinearGate g;
    g.left_offset = layout.user_block->offset;
    g.left_size = layout.user_block->size;
    g.right_offset = layout.feedback_block().offset;
    g.right_size = layout.feedback_block().size;
    g.rank = s.ik_gate_rank;
    m.gate = g;
  }
  return m;
}

/// IGL agent over an explicit layout (used for replaying logs without an
/// environment). `dn_signals` is ignored for IGL-P(2).
inline IglAgent make_igl_agent(Algorithm algorithm, const IkInputLayout& layout, std::uint32_t k,
                               std::vector<std::uint32_t> dn_signals, const AgentSettings& s,
                               std::uint64_t seed) {
  IglConfig config = algorithm == Algorithm::IglP3
                         ? three_state_config(k, layout, s.alpha, DnOracle::from_signals(std::move(dn_signals)))
                         : two_state_config(k, layout);
  config.detection_factor = s.detection_factor;
  return IglAgent(std::move(config), ik_config_for(layout, k, s, seed),
                  cb_config_for(layout.context_dim, k, s, seed));
}

inline IglAgent make_igl_agent(Algorithm algorithm, const Environment& env,
                               std::vector<std::uint32_t> dn_signals, const AgentSettings& s,
                               std::uint64_t seed) {
  return make_igl_agent(algorithm, ik_layout_for(env, s), env.action_count(), std::move(dn_signals),
                        s, seed);
}

inline CtrAgent make_ctr_agent(const Environment& env, std::uint32_t click_signal,
                               const AgentSettings& s, std::uint64_t seed) {
  return CtrAgent(cb_config_for(env.context_dim(), env.action_count(), s, seed), click_signal,
                  env.feedback_count());
}

}  // namespace igllab
