// covertype.hpp
// Supervised-to-bandit environment with a per-user feedback vocabulary.
//
// Each example of a multiclass dataset is owned by one of N users; the
// context is the example features followed by a one-hot user id. Choosing the
// true class has latent reward 1, anything else 0. Users [0, N/2) are
// "normal": they speak a uniformly random word from the good half [0, M/2)
// when r = 1 and from the bad half otherwise. Users [N/2, N) are "bizarro" and
// use the opposite convention.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "igllab/core.hpp"
#include "igllab/sim/environment.hpp"

namespace igllab {

class DatasetParseError : public Error {
 public:
  using Error::Error;
};

class OddPartition : public Error {
 public:
  using Error::Error;
};

struct LabeledExample {
  std::vector<double> features;
  std::uint32_t label = 0;
};

struct Dataset {
  std::vector<LabeledExample> examples;
  std::uint32_t feature_count = 0;
  std::uint32_t class_count = 0;
};

struct DatasetFormat {
  char delimiter = ',';
  int label_offset = 0;  // subtracted from the raw label column
  bool standardize = true;
};

/// Z-scores every feature column in place; constant columns become 0.
inline void standardize(Dataset& data) {
  const auto n = static_cast<double>(data.examples.size());
  for (std::uint32_t j = 0; j < data.feature_count; ++j) {
    double mean = 0.0;
    for (const auto& ex : data.examples) mean += ex.features[j];
    mean /= n;
    double var = 0.0;
    for (const auto& ex : data.examples) var += (ex.features[j] - mean) * (ex.features[j] - mean);
    const double sd = std::sqrt(var / n);
    for (auto& ex : data.examples) ex.features[j] = sd > 0.0 ? (ex.features[j] - mean) / sd : 0.0;
  }
}

/// Header-less delimiter-separated numeric rows; the last column is the label.
inline Dataset parse_dataset(std::istream& in, const DatasetFormat& format = {}) {
  Dataset data;
  std::string line;
  std::size_t lineno = 0;
  std::uint32_t max_label = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, format.delimiter)) {
      try {
        std::size_t used = 0;
        cells.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw DatasetParseError("line " + std::to_string(lineno) + ": '" + cell + "' is not a number");
      }
    }
    if (cells.size() < 2)
      throw DatasetParseError("line " + std::to_string(lineno) + ": need features and a label");
    const auto nfeat = static_cast<std::uint32_t>(cells.size() - 1);
    if (data.examples.empty()) data.feature_count = nfeat;
    if (nfeat != data.feature_count)
      throw DatasetParseError("line " + std::to_string(lineno) + ": expected " +
                              std::to_string(data.feature_count + 1) + " columns");
    const double raw = cells.back() - format.label_offset;
    if (raw < 0.0 || raw != std::floor(raw))
      throw DatasetParseError("line " + std::to_string(lineno) + ": label must be a non-negative integer after offset");
    LabeledExample ex;
    ex.label = static_cast<std::uint32_t>(raw);
    cells.pop_back();
    ex.features = std::move(cells);
    max_label = std::max(max_label, ex.label);
    data.examples.push_back(std::move(ex));
  }
  if (data.examples.empty()) throw DatasetParseError("dataset is empty");
  data.class_count = max_label + 1;
  if (data.class_count < 2) throw DatasetParseError("dataset needs at least two classes");
  if (format.standardize) standardize(data);
  return data;
}

inline Dataset load_dataset(const std::string& path, const DatasetFormat& format = {}) {
  std::ifstream in(path);
  if (!in) throw DatasetParseError("cannot open dataset '" + path + "'");
  return parse_dataset(in, format);
}

struct SyntheticDatasetSpec {
  std::uint32_t examples = 2000;
  std::uint32_t features = 10;
  std::uint32_t classes = 7;
  double noise = 0.3;  // isotropic noise around unit-norm class centroids
  std::uint64_t seed = 7;
};

/// Gaussian blobs around well-separated centroids; linearly separable with
/// high probability for small noise.
inline Dataset make_synthetic_dataset(const SyntheticDatasetSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> centroids(spec.classes, std::vector<double>(spec.features));
  for (auto& c : centroids) {
    double norm = 0.0;
    for (auto& v : c) {
      v = gauss(rng);
      norm += v * v;
    }
    for (auto& v : c) v /= std::sqrt(norm);
  }
  Dataset data;
  data.feature_count = spec.features;
  data.class_count = spec.classes;
  for (std::uint32_t i = 0; i < spec.examples; ++i) {
    LabeledExample ex;
    ex.label = i % spec.classes;
    ex.features = centroids[ex.label];
    for (auto& v : ex.features) v += spec.noise * gauss(rng);
    data.examples.push_back(std::move(ex));
  }
  std::shuffle(data.examples.begin(), data.examples.end(), rng);
  return data;
}

inline void write_dataset(std::ostream& out, const Dataset& data, char delimiter = ',') {
  out.precision(17);
  for (const auto& ex : data.examples) {
    for (double v : ex.features) out << v << delimiter;
    out << ex.label << '\n';
  }
}

enum class UserType { Normal, Bizarro };

class SupervisedToBanditEnv final : public Environment {
 public:
  SupervisedToBanditEnv(Dataset data, std::uint32_t users, std::uint32_t words, std::uint64_t seed)
      : data_(std::move(data)), users_(users), words_(words), rng_(seed) {
    if (data_.examples.empty()) throw DatasetParseError("dataset is empty");
    if (users_ == 0 || users_ % 2 != 0) throw OddPartition("user count N must be even and positive");
    if (words_ == 0 || words_ % 2 != 0) throw OddPartition("word count M must be even and positive");
    const std::uint32_t d = data_.feature_count;
    context_dim_ = d + users_;

    std::vector<std::size_t> order(data_.examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng_);
    owner_.resize(order.size());
    for (std::size_t i = 0; i < order.size(); ++i)
      owner_[order[i]] = static_cast<std::uint32_t>(i % users_);

    contexts_.reserve(data_.examples.size());
    for (std::size_t e = 0; e < data_.examples.size(); ++e) {
      std::vector<FeatureVector::Entry> entries;
      for (std::uint32_t j = 0; j < d; ++j) entries.emplace_back(j, data_.examples[e].features[j]);
      entries.emplace_back(d + owner_[e], 1.0);
      Context ctx{static_cast<std::int64_t>(owner_[e]), FeatureVector(context_dim_, std::move(entries))};
      index_.emplace(ctx.features.entries(), e);
      contexts_.push_back(std::move(ctx));
    }
    for (std::uint32_t c = 0; c < data_.class_count; ++c)
      actions_.actions.push_back({static_cast<std::int64_t>(c), FeatureVector(data_.class_count)});
  }

  const Dataset& dataset() const noexcept { return data_; }
  std::uint32_t user_count() const noexcept { return users_; }
  std::uint32_t word_count() const noexcept { return words_; }
  std::uint32_t owner_of(std::size_t example) const { return owner_.at(example); }
  const Context& context_of(std::size_t example) const { return contexts_.at(example); }
  const ActionSet& actions() const noexcept { return actions_; }

  UserType user_type(std::uint32_t user) const noexcept {
    return user < users_ / 2 ? UserType::Normal : UserType::Bizarro;
  }
  bool is_good_word(std::uint32_t word) const noexcept { return word < words_ / 2; }

  /// Index of the example shown in `context`.
  std::size_t example_of(const Context& context) const {
    if (current_ < contexts_.size() && contexts_[current_] == context) return current_;
    auto it = index_.find(context.features.entries());
    if (it == index_.end()) throw Error("context does not belong to this environment");
    return it->second;
  }

  std::pair<Context, ActionSet> next() override {
    std::uniform_int_distribution<std::size_t> pick(0, contexts_.size() - 1);
    current_ = pick(rng_);
    return {contexts_[current_], actions_};
  }

  Emission feedback(const Context& context, const ActionSet& actions, std::size_t chosen) override {
    const LatentReward r = reward_of(context, actions, chosen);
    const bool speak_good = (r == LatentReward::Pos) == (user_type(static_cast<std::uint32_t>(context.user_id)) == UserType::Normal);
    std::uniform_int_distribution<std::uint32_t> half(0, words_ / 2 - 1);
    const std::uint32_t word = half(rng_) + (speak_good ? 0 : words_ / 2);
    return {{word}, r};
  }

  LatentReward reward_of(const Context& context, const ActionSet& actions,
                         std::size_t index) const override {
    const auto label = data_.examples[example_of(context)].label;
    return actions[index].action_id == static_cast<std::int64_t>(label) ? LatentReward::Pos
                                                                        : LatentReward::Zero;
  }

  std::size_t oracle_best(const Context& context, const ActionSet& actions) const override {
    const auto label = data_.examples[example_of(context)].label;
    for (std::size_t i = 0; i < actions.size(); ++i)
      if (actions[i].action_id == static_cast<std::int64_t>(label)) return i;
    return 0;
  }

  std::uint32_t context_dim() const override { return context_dim_; }
  std::uint32_t feedback_count() const override { return words_; }
  std::uint32_t action_count() const override { return data_.class_count; }
  std::optional<IndexBlock> user_block() const override {
    return IndexBlock{data_.feature_count, users_};
  }

 private:
  Dataset data_;
  std::uint32_t users_;
  std::uint32_t words_;
  std::uint32_t context_dim_ = 0;
  std::mt19937_64 rng_;
  std::vector<std::uint32_t> owner_;
  std::vector<Context> contexts_;
  std::map<std::vector<FeatureVector::Entry>, std::size_t> index_;
  ActionSet actions_;
  std::size_t current_ = static_cast<std::size_t>(-1);
};

inline SupervisedToBanditEnv build_covertype_env(Dataset data, std::uint32_t users,
                                                 std::uint32_t words, std::uint64_t seed) {
  return SupervisedToBanditEnv(std::move(data), users, words, seed);
}

inline SupervisedToBanditEnv build_covertype_env(const std::string& path, const DatasetFormat& format,
                                                 std::uint32_t users, std::uint32_t words,
                                                 std::uint64_t seed) {
  return SupervisedToBanditEnv(load_dataset(path, format), users, words, seed);
}

}  // namespace igllab
