// core.hpp
// Protocol-level value types shared by every igllab module: contexts, action
// sets, behavior distributions, feedback signals, latent and pseudo rewards,
// and the logged interaction tuple.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace igllab {

/// Absolute tolerance for "probabilities sum to one".
inline constexpr double kNormalizationTolerance = 1e-9;

/// Smallest behavior probability accepted for importance weighting.
inline constexpr double kPropensityFloor = 1e-6;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Invariant {
  DistributionNotNormalized,
  IndexOutOfRange,
  DuplicateActionId,
  ProbabilityBelowFloor,
  DimensionMismatch,
  InvalidFeature,
  InvalidReward,
};

inline const char* to_string(Invariant inv) {
  switch (inv) {
    case Invariant::DistributionNotNormalized: return "DistributionNotNormalized";
    case Invariant::IndexOutOfRange: return "IndexOutOfRange";
    case Invariant::DuplicateActionId: return "DuplicateActionId";
    case Invariant::ProbabilityBelowFloor: return "ProbabilityBelowFloor";
    case Invariant::DimensionMismatch: return "DimensionMismatch";
    case Invariant::InvalidFeature: return "InvalidFeature";
    case Invariant::InvalidReward: return "InvalidReward";
  }
  return "Unknown";
}

/// A violated type invariant.
class ValidationError : public Error {
 public:
  ValidationError(Invariant inv, const std::string& detail)
      : Error(std::string(to_string(inv)) + ": " + detail), invariant_(inv) {}
  Invariant invariant() const noexcept { return invariant_; }

 private:
  Invariant invariant_;
};

// ---------------------------------------------------------------------------
// FeatureVector
// ---------------------------------------------------------------------------

/// Sparse real vector with a declared dimension. Entries are kept sorted by
/// index, unique, and never store an exact zero.
class FeatureVector {
 public:
  using Entry = std::pair<std::uint32_t, double>;

  FeatureVector() = default;
  explicit FeatureVector(std::uint32_t dimension) : dimension_(dimension) {}

  /// Builds from unordered entries; zeros are dropped. Throws ValidationError
  /// on duplicate or out-of-range indices or non-finite values.
  FeatureVector(std::uint32_t dimension, std::vector<Entry> entries) : dimension_(dimension) {
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.first < b.first; });
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& [idx, val] = entries[i];
      if (idx >= dimension_)
        throw ValidationError(Invariant::IndexOutOfRange,
                              "feature index " + std::to_string(idx) + " >= dimension " +
                                  std::to_string(dimension_));
      if (i > 0 && entries[i - 1].first == idx)
        throw ValidationError(Invariant::InvalidFeature,
                              "duplicate feature index " + std::to_string(idx));
      if (!std::isfinite(val))
        throw ValidationError(Invariant::InvalidFeature,
                              "non-finite value at feature " + std::to_string(idx));
      if (val != 0.0) entries_.push_back(entries[i]);
    }
  }

  static FeatureVector one_hot(std::uint32_t dimension, std::uint32_t index, double value = 1.0) {
    return FeatureVector(dimension, {{index, value}});
  }

  std::uint32_t dimension() const noexcept { return dimension_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t nnz() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  double at(std::uint32_t index) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), index,
                               [](const Entry& e, std::uint32_t i) { return e.first < i; });
    return (it != entries_.end() && it->first == index) ? it->second : 0.0;
  }

  /// Places `other` at `offset` inside a larger vector of `dimension` entries.
  FeatureVector embedded(std::uint32_t dimension, std::uint32_t offset) const {
    std::vector<Entry> shifted;
    shifted.reserve(entries_.size());
    for (const auto& [i, v] : entries_) shifted.emplace_back(i + offset, v);
    return FeatureVector(dimension, std::move(shifted));
  }

  /// Concatenation: this vector occupies [0, dimension()), `tail` follows.
  FeatureVector concat(const FeatureVector& tail) const {
    std::vector<Entry> all = entries_;
    for (const auto& [i, v] : tail.entries_) all.emplace_back(i + dimension_, v);
    return FeatureVector(dimension_ + tail.dimension_, std::move(all));
  }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

 private:
  std::uint32_t dimension_ = 0;
  std::vector<Entry> entries_;
};

/// A contiguous range of reserved feature indices, e.g. a one-hot id block.
struct IndexBlock {
  std::uint32_t offset = 0;
  std::uint32_t size = 0;

  bool contains(std::uint32_t i) const noexcept { return i >= offset && i < offset + size; }
  friend bool operator==(const IndexBlock&, const IndexBlock&) = default;
};

// ---------------------------------------------------------------------------
// Interaction types
// ---------------------------------------------------------------------------

struct Context {
  std::int64_t user_id = 0;
  FeatureVector features;

  friend bool operator==(const Context&, const Context&) = default;
};

struct Action {
  std::int64_t action_id = 0;
  FeatureVector features;

  friend bool operator==(const Action&, const Action&) = default;
};

struct ActionSet {
  std::vector<Action> actions;

  std::size_t size() const noexcept { return actions.size(); }
  const Action& operator[](std::size_t i) const { return actions[i]; }

  friend bool operator==(const ActionSet&, const ActionSet&) = default;
};

/// Probability vector aligned with an ActionSet's ordering.
struct PolicyDistribution {
  std::vector<double> probs;

  std::size_t size() const noexcept { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }

  friend bool operator==(const PolicyDistribution&, const PolicyDistribution&) = default;
};

/// One-hot feedback: the index of the single observed signal.
struct Feedback {
  std::uint32_t signal_id = 0;

  friend bool operator==(const Feedback&, const Feedback&) = default;
};

enum class LatentReward : int { Neg = -1, Zero = 0, Pos = 1 };

inline int value_of(LatentReward r) noexcept { return static_cast<int>(r); }

inline LatentReward latent_reward_from_int(int v) {
  if (v < -1 || v > 1)
    throw ValidationError(Invariant::InvalidReward, "latent reward must be -1, 0 or 1, got " +
                                                        std::to_string(v));
  return static_cast<LatentReward>(v);
}

/// The value substituted for the unobserved reward in the CB update: one of
/// {0, 1, -1/alpha}.
struct PseudoReward {
  double value = 0.0;

  friend bool operator==(const PseudoReward&, const PseudoReward&) = default;
};

struct InteractionRecord {
  Context context;
  ActionSet action_set;
  std::size_t chosen_index = 0;
  PolicyDistribution behavior_probs;
  Feedback feedback;
  std::optional<LatentReward> latent_reward;

  friend bool operator==(const InteractionRecord&, const InteractionRecord&) = default;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Checks that `probs` is a distribution with every entry in [floor, 1].
inline void validate_distribution(const PolicyDistribution& dist, double floor = 0.0) {
  double sum = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const double p = dist[i];
    if (!std::isfinite(p) || p < 0.0 || p > 1.0)
      throw ValidationError(Invariant::DistributionNotNormalized,
                            "probability " + std::to_string(i) + " outside [0,1]");
    if (p < floor)
      throw ValidationError(Invariant::ProbabilityBelowFloor,
                            "probability " + std::to_string(i) + " below floor");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kNormalizationTolerance)
    throw ValidationError(Invariant::DistributionNotNormalized,
                          "probabilities sum to " + std::to_string(sum));
}

inline void validate_action_set(const ActionSet& actions) {
  if (actions.size() < 2)
    throw ValidationError(Invariant::IndexOutOfRange, "action set needs K >= 2");
  std::set<std::int64_t> seen;
  for (const auto& a : actions.actions)
    if (!seen.insert(a.action_id).second)
      throw ValidationError(Invariant::DuplicateActionId,
                            "action id " + std::to_string(a.action_id) + " repeated");
}

/// Returns normally iff every InteractionRecord invariant holds. The feedback
/// vocabulary size is checked only when `feedback_count` is given.
inline void validate_record(const InteractionRecord& rec,
                            std::optional<std::uint32_t> feedback_count = std::nullopt) {
  validate_action_set(rec.action_set);
  const std::size_t k = rec.action_set.size();
  if (rec.behavior_probs.size() != k)
    throw ValidationError(Invariant::DimensionMismatch,
                          "behavior_probs has " + std::to_string(rec.behavior_probs.size()) +
                              " entries for K=" + std::to_string(k));
  if (rec.chosen_index >= k)
    throw ValidationError(Invariant::IndexOutOfRange,
                          "chosen_index " + std::to_string(rec.chosen_index) +
                              " >= K=" + std::to_string(k));
  validate_distribution(rec.behavior_probs);
  if (feedback_count && rec.feedback.signal_id >= *feedback_count)
    throw ValidationError(Invariant::IndexOutOfRange,
                          "signal " + std::to_string(rec.feedback.signal_id) +
                              " outside vocabulary of " + std::to_string(*feedback_count));
}

}  // namespace igllab
