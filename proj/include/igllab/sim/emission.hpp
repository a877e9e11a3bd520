// emission.hpp
// Latent-state emission simulator. Every user has a fixed latent reward for
// each action and a fixed communication style: a table P(signal | r). The
// signal vocabulary is {like, dislike, click, skip, none}. A valid table
// decodes perfectly: no signal has nonzero probability in two latent states.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "igllab/core.hpp"
#include "igllab/sim/environment.hpp"

namespace igllab {

enum Signal : std::uint32_t { kLike = 0, kDislike = 1, kClick = 2, kSkip = 3, kNone = 4 };
inline constexpr std::uint32_t kSignalCount = 5;
inline const std::array<const char*, kSignalCount> kSignalNames = {"like", "dislike", "click",
                                                                    "skip", "none"};

class EmissionRowInvalid : public Error {
 public:
  using Error::Error;
};

/// P(signal | r) for r in {-1, 0, +1}; row index is r + 1.
struct EmissionTable {
  std::array<std::vector<double>, 3> rows;

  const std::vector<double>& row(LatentReward r) const { return rows[value_of(r) + 1]; }
  std::vector<double>& row(LatentReward r) { return rows[value_of(r) + 1]; }
};

struct EmissionSpec {
  int state_count = 3;
  std::uint32_t user_count = 10;
  std::uint32_t action_count = 10;
  std::vector<EmissionTable> styles;  // user u speaks styles[u % styles.size()]
  // Share of each user's actions with r = +1 and r = -1; the rest have r = 0.
  double pos_fraction = 0.2;
  double neg_fraction = 0.2;
  std::vector<std::uint32_t> dn_signals = {kDislike};
  std::uint32_t click_signal = kClick;
};

/// Two states: r=+1 speaks like/click, r=0 speaks dislike/skip/none.
inline EmissionTable default_two_state_table() {
  EmissionTable t;
  t.rows[2] = {0.3, 0.0, 0.7, 0.0, 0.0};
  t.rows[1] = {0.0, 0.1, 0.0, 0.3, 0.6};
  t.rows[0] = {0.0, 0.0, 0.0, 0.0, 0.0};
  return t;
}

/// Three states: r=+1 like/click, r=0 none, r=-1 dislike with probability
/// `p_dislike` and skip otherwise.
inline EmissionTable default_three_state_table(double p_dislike = 0.2) {
  EmissionTable t;
  t.rows[2] = {0.3, 0.0, 0.7, 0.0, 0.0};
  t.rows[1] = {0.0, 0.0, 0.0, 0.0, 1.0};
  t.rows[0] = {0.0, p_dislike, 0.0, 1.0 - p_dislike, 0.0};
  return t;
}

inline EmissionSpec default_two_state_spec() {
  EmissionSpec s;
  s.state_count = 2;
  s.styles = {default_two_state_table()};
  s.neg_fraction = 0.0;
  s.dn_signals.clear();
  return s;
}

inline EmissionSpec default_three_state_spec(double p_dislike = 0.2) {
  EmissionSpec s;
  s.state_count = 3;
  s.styles = {default_three_state_table(p_dislike)};
  return s;
}

/// Throws EmissionRowInvalid unless every used row is a distribution (to
/// 1e-12) and every signal is emitted in at most one latent state.
inline void validate_emission_spec(const EmissionSpec& spec) {
  if (spec.state_count != 2 && spec.state_count != 3)
    throw EmissionRowInvalid("state_count must be 2 or 3");
  if (spec.styles.empty()) throw EmissionRowInvalid("at least one communication style required");
  if (spec.user_count < 1) throw EmissionRowInvalid("user_count must be positive");
  if (spec.action_count < 2) throw EmissionRowInvalid("action_count must be at least 2");
  if (spec.pos_fraction <= 0.0 || spec.neg_fraction < 0.0 ||
      spec.pos_fraction + spec.neg_fraction > 1.0)
    throw EmissionRowInvalid("reward fractions must be a valid partition");
  if (spec.state_count == 2 && spec.neg_fraction != 0.0)
    throw EmissionRowInvalid("2-state simulator cannot assign r = -1");

  for (std::size_t s = 0; s < spec.styles.size(); ++s) {
    const auto& t = spec.styles[s];
    const std::string where = "style " + std::to_string(s);
    for (int r = -1; r <= 1; ++r) {
      const auto& row = t.rows[r + 1];
      const bool used = !(spec.state_count == 2 && r == -1);
      if (!used) {
        for (double p : row)
          if (p != 0.0) throw EmissionRowInvalid(where + ": 2-state table has an r=-1 emission");
        continue;
      }
      if (row.size() != kSignalCount)
        throw EmissionRowInvalid(where + ", r=" + std::to_string(r) + ": row needs " +
                                 std::to_string(kSignalCount) + " entries");
      double sum = 0.0;
      for (double p : row) {
        if (!(p >= 0.0 && p <= 1.0))
          throw EmissionRowInvalid(where + ", r=" + std::to_string(r) + ": entry outside [0,1]");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12)
        throw EmissionRowInvalid(where + ", r=" + std::to_string(r) + ": row sums to " +
                                 std::to_string(sum));
    }
    for (std::uint32_t sig = 0; sig < kSignalCount; ++sig) {
      int states = 0;
      for (int r = -1; r <= 1; ++r) {
        const auto& row = t.rows[r + 1];
        if (!row.empty() && row[sig] > 0.0) ++states;
      }
      if (states > 1)
        throw EmissionRowInvalid(where + ": signal '" + kSignalNames[sig] +
                                 "' is emitted in more than one latent state");
    }
    for (auto dn : spec.dn_signals)
      if (dn >= kSignalCount || (t.rows[2].size() == kSignalCount && t.rows[2][dn] > 0.0))
        throw EmissionRowInvalid(where + ": definitely-negative signal is emitted under r = +1");
  }
}

class EmissionEnv final : public Environment {
 public:
  EmissionEnv(EmissionSpec spec, std::uint64_t seed) : spec_(std::move(spec)), rng_(seed) {
    validate_emission_spec(spec_);
    const std::uint32_t k = spec_.action_count;
    auto n_pos = static_cast<std::uint32_t>(std::lround(spec_.pos_fraction * k));
    auto n_neg = static_cast<std::uint32_t>(std::lround(spec_.neg_fraction * k));
    n_pos = std::max<std::uint32_t>(1, n_pos);
    if (spec_.state_count == 3 && spec_.neg_fraction > 0.0) n_neg = std::max<std::uint32_t>(1, n_neg);
    if (n_pos + n_neg > k) throw EmissionRowInvalid("reward fractions leave no room in K actions");

    profiles_.resize(spec_.user_count);
    for (auto& profile : profiles_) {
      profile.assign(k, LatentReward::Zero);
      std::fill_n(profile.begin(), n_pos, LatentReward::Pos);
      std::fill_n(profile.begin() + n_pos, n_neg, LatentReward::Neg);
      std::shuffle(profile.begin(), profile.end(), rng_);
    }
    for (std::uint32_t a = 0; a < k; ++a)
      actions_.actions.push_back({static_cast<std::int64_t>(a), FeatureVector::one_hot(k, a)});
  }

  const EmissionSpec& spec() const noexcept { return spec_; }

  LatentReward profile(std::uint32_t user, std::uint32_t action) const {
    return profiles_.at(user).at(action);
  }

  const EmissionTable& style_of(std::uint32_t user) const {
    return spec_.styles[user % spec_.styles.size()];
  }

  Context context_for(std::uint32_t user) const {
    return {static_cast<std::int64_t>(user), FeatureVector::one_hot(spec_.user_count, user)};
  }

  const ActionSet& actions() const noexcept { return actions_; }

  std::pair<Context, ActionSet> next() override {
    std::uniform_int_distribution<std::uint32_t> pick(0, spec_.user_count - 1);
    return {context_for(pick(rng_)), actions_};
  }

  Emission feedback(const Context& context, const ActionSet& actions, std::size_t chosen) override {
    const LatentReward r = reward_of(context, actions, chosen);
    const auto& row = style_of(static_cast<std::uint32_t>(context.user_id)).row(r);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng_);
    double acc = 0.0;
    std::uint32_t signal = kSignalCount - 1;
    for (std::uint32_t s = 0; s < kSignalCount; ++s) {
      if (row[s] == 0.0) continue;
      acc += row[s];
      signal = s;
      if (u < acc) break;
    }
    return {{signal}, r};
  }

  LatentReward reward_of(const Context& context, const ActionSet& actions,
                         std::size_t index) const override {
    return profile(static_cast<std::uint32_t>(context.user_id),
                   static_cast<std::uint32_t>(actions[index].action_id));
  }

  std::uint32_t context_dim() const override { return spec_.user_count; }
  std::uint32_t feedback_count() const override { return kSignalCount; }
  std::uint32_t action_count() const override { return spec_.action_count; }
  std::optional<IndexBlock> user_block() const override {
    return IndexBlock{0, spec_.user_count};
  }

 private:
  EmissionSpec spec_;
  std::mt19937_64 rng_;
  std::vector<std::vector<LatentReward>> profiles_;
  ActionSet actions_;
};

inline EmissionEnv build_emission_env(const EmissionSpec& spec, std::uint64_t seed) {
  return EmissionEnv(spec, seed);
}

}  // namespace igllab
