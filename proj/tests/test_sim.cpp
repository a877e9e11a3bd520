#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "igllab/sim/covertype.hpp"
#include "igllab/sim/emission.hpp"
#include "igllab/sim/regret.hpp"
#include "igllab/sim/sweep.hpp"
#include "support/ci_audit.hpp"

using namespace igllab;

namespace {

Dataset tiny_dataset() {
  Dataset d;
  d.feature_count = 2;
  d.class_count = 2;
  d.examples = {{{1.0, 0.0}, 0}, {{0.0, 1.0}, 1}, {{1.0, 1.0}, 0}, {{-1.0, 0.5}, 1}};
  return d;
}

std::string message_of(const EmissionSpec& spec) {
  try {
    validate_emission_spec(spec);
  } catch (const EmissionRowInvalid& e) {
    return e.what();
  }
  return "";
}

// Leaks the action into the feedback: the audit must reject it.
class LeakyEnv final : public Environment {
 public:
  explicit LeakyEnv(std::uint64_t seed) : rng_(seed) {
    for (std::uint32_t a = 0; a < 3; ++a) actions_.actions.push_back({a, FeatureVector::one_hot(3, a)});
  }
  std::pair<Context, ActionSet> next() override { return {{0, FeatureVector::one_hot(1, 0)}, actions_}; }
  Emission feedback(const Context&, const ActionSet&, std::size_t chosen) override {
    std::bernoulli_distribution coin(chosen == 0 ? 0.6 : 0.4);
    return {{coin(rng_) ? 1u : 0u}, LatentReward::Zero};
  }
  LatentReward reward_of(const Context&, const ActionSet&, std::size_t) const override {
    return LatentReward::Zero;
  }
  std::uint32_t context_dim() const override { return 1; }
  std::uint32_t feedback_count() const override { return 2; }
  std::uint32_t action_count() const override { return 3; }

 private:
  std::mt19937_64 rng_;
  ActionSet actions_;
};

}  // namespace

// --- emission simulator --------------------------------------------------

TEST(EmissionSpec, DefaultsAreValid) {
  EXPECT_NO_THROW(validate_emission_spec(default_two_state_spec()));
  EXPECT_NO_THROW(validate_emission_spec(default_three_state_spec()));
  const auto t = default_three_state_table(0.2);
  EXPECT_DOUBLE_EQ(t.row(LatentReward::Neg)[kDislike], 0.2);
  EXPECT_DOUBLE_EQ(t.row(LatentReward::Neg)[kSkip], 0.8);
}

TEST(EmissionSpec, RowSummingToPointNineIsInvalid) {
  auto spec = default_three_state_spec();
  spec.styles[0].row(LatentReward::Zero) = {0.0, 0.0, 0.0, 0.0, 0.9};
  EXPECT_NE(message_of(spec).find("sums to"), std::string::npos);
}

TEST(EmissionSpec, SignalInTwoStatesIsInvalid) {
  auto spec = default_three_state_spec();
  spec.styles[0].row(LatentReward::Zero) = {0.0, 0.0, 0.0, 0.5, 0.5};
  EXPECT_NE(message_of(spec).find("skip"), std::string::npos);
}

TEST(EmissionSpec, OtherStructuralErrors) {
  auto spec = default_three_state_spec();
  spec.dn_signals = {kLike};
  EXPECT_FALSE(message_of(spec).empty());
  spec = default_two_state_spec();
  spec.neg_fraction = 0.2;
  EXPECT_FALSE(message_of(spec).empty());
  spec = default_three_state_spec();
  spec.state_count = 4;
  EXPECT_FALSE(message_of(spec).empty());
  spec = default_three_state_spec();
  spec.pos_fraction = 0.7;
  spec.neg_fraction = 0.5;
  EXPECT_FALSE(message_of(spec).empty());
  spec = default_three_state_spec();
  spec.styles[0].row(LatentReward::Pos) = {0.3, 0.0, 0.7};
  EXPECT_FALSE(message_of(spec).empty());
}

TEST(EmissionEnv, ProfilesFollowFractions) {
  auto spec = default_three_state_spec();
  spec.user_count = 20;
  EmissionEnv env(spec, 4);
  for (std::uint32_t u = 0; u < 20; ++u) {
    int counts[3] = {0, 0, 0};
    for (std::uint32_t a = 0; a < 10; ++a) ++counts[value_of(env.profile(u, a)) + 1];
    EXPECT_EQ(counts[0], 2);
    EXPECT_EQ(counts[1], 6);
    EXPECT_EQ(counts[2], 2);
  }
}

TEST(EmissionEnv, FeedbackFrequenciesMatchTable) {
  EmissionEnv env(default_three_state_spec(0.3), 8);
  const auto ctx = env.context_for(0);
  std::map<int, std::vector<double>> counts;
  const int n = 50000;
  for (std::uint32_t a = 0; a < 10; ++a) {
    const LatentReward r = env.profile(0, a);
    auto& c = counts[value_of(r)];
    c.resize(kSignalCount);
    for (int i = 0; i < n / 10; ++i) c[env.feedback(ctx, env.actions(), a).feedback.signal_id] += 1;
  }
  for (auto& [r, c] : counts) {
    double total = 0.0;
    for (double v : c) total += v;
    const auto row = default_three_state_table(0.3).rows[r + 1];
    for (std::uint32_t s = 0; s < kSignalCount; ++s) {
      const double sigma = std::sqrt(total * row[s] * (1 - row[s]));
      EXPECT_LE(std::abs(c[s] - total * row[s]), 3 * sigma + 1e-9) << "r=" << r << " s=" << s;
    }
  }
}

TEST(EmissionEnv, SeedDeterminism) {
  EmissionEnv a(default_three_state_spec(), 5), b(default_three_state_spec(), 5);
  for (int t = 0; t < 1000; ++t) {
    auto [xa, aa] = a.next();
    auto [xb, ab] = b.next();
    ASSERT_EQ(xa, xb);
    ASSERT_EQ(aa, ab);
    const std::size_t k = static_cast<std::size_t>(t) % aa.size();
    ASSERT_EQ(a.feedback(xa, aa, k).feedback, b.feedback(xb, ab, k).feedback);
  }
}

TEST(EmissionEnv, FeedbackIndependentOfActionGivenUserAndReward) {
  auto spec = default_three_state_spec(0.5);
  spec.user_count = 5;
  EmissionEnv env(spec, 12);
  const auto audit = igltest::audit_conditional_independence(env, 100000, 3);
  EXPECT_GT(audit.p_value, 0.001);
  EXPECT_GT(audit.tables, 0u);
}

TEST(CiAudit, DetectsLeakyEnvironment) {
  LeakyEnv env(1);
  EXPECT_LT(igltest::audit_conditional_independence(env, 20000, 2).p_value, 0.001);
}

// --- supervised-to-bandit simulator --------------------------------------

TEST(Covertype, HalvesUsersAndWords) {
  SyntheticDatasetSpec ds;
  ds.examples = 300;
  SupervisedToBanditEnv env(make_synthetic_dataset(ds), 100, 100, 1);
  int normal = 0, good = 0;
  for (std::uint32_t u = 0; u < 100; ++u) normal += env.user_type(u) == UserType::Normal;
  for (std::uint32_t w = 0; w < 100; ++w) good += env.is_good_word(w);
  EXPECT_EQ(normal, 50);
  EXPECT_EQ(good, 50);
  EXPECT_EQ(env.context_dim(), ds.features + 100);
  EXPECT_EQ(env.action_count(), ds.classes);
}

TEST(Covertype, SmallestInstanceRule) {
  Dataset d = tiny_dataset();
  d.examples.resize(1);
  d.examples.push_back({{0.0, 0.0}, 1});  // two classes need two labels
  SupervisedToBanditEnv env(d, 2, 2, 3);
  for (std::size_t e = 0; e < d.examples.size(); ++e) {
    const auto& ctx = env.context_of(e);
    const auto user = static_cast<std::uint32_t>(ctx.user_id);
    const std::size_t correct = d.examples[e].label;
    for (int i = 0; i < 20; ++i) {
      const auto right = env.feedback(ctx, env.actions(), correct);
      const auto wrong = env.feedback(ctx, env.actions(), 1 - correct);
      EXPECT_EQ(right.reward, LatentReward::Pos);
      EXPECT_EQ(wrong.reward, LatentReward::Zero);
      const bool normal = env.user_type(user) == UserType::Normal;
      EXPECT_EQ(env.is_good_word(right.feedback.signal_id), normal);
      EXPECT_EQ(env.is_good_word(wrong.feedback.signal_id), !normal);
    }
  }
}

TEST(Covertype, EmissionFrequenciesWithinThreeSigma) {
  const Dataset d = tiny_dataset();
  SupervisedToBanditEnv env(d, 2, 6, 9);
  const int draws = 100000;
  std::vector<std::vector<double>> counts(d.examples.size() * 2, std::vector<double>(6, 0.0));
  for (int t = 0; t < draws; ++t) {
    const std::size_t e = static_cast<std::size_t>(t) % d.examples.size();
    const std::size_t a = (static_cast<std::size_t>(t) / d.examples.size()) % 2;
    counts[e * 2 + a][env.feedback(env.context_of(e), env.actions(), a).feedback.signal_id] += 1;
  }
  for (std::size_t e = 0; e < d.examples.size(); ++e)
    for (std::size_t a = 0; a < 2; ++a) {
      const bool pos = a == d.examples[e].label;
      const bool normal = env.user_type(env.owner_of(e)) == UserType::Normal;
      const bool good = pos == normal;
      double n = 0.0;
      for (double c : counts[e * 2 + a]) n += c;
      for (std::uint32_t w = 0; w < 6; ++w) {
        const double p = env.is_good_word(w) == good ? 1.0 / 3 : 0.0;
        const double sigma = std::sqrt(n * p * (1 - p));
        EXPECT_LE(std::abs(counts[e * 2 + a][w] - n * p), 3 * sigma + 1e-9);
      }
    }
}

TEST(Covertype, RoundRobinOwnershipAndUserBlock) {
  SyntheticDatasetSpec ds;
  ds.examples = 40;
  SupervisedToBanditEnv env(make_synthetic_dataset(ds), 4, 2, 5);
  std::vector<int> per_user(4, 0);
  for (std::size_t e = 0; e < 40; ++e) {
    const auto u = env.owner_of(e);
    ++per_user[u];
    EXPECT_DOUBLE_EQ(env.context_of(e).features.at(ds.features + u), 1.0);
    EXPECT_EQ(env.context_of(e).user_id, u);
  }
  for (int c : per_user) EXPECT_EQ(c, 10);
  EXPECT_EQ(*env.user_block(), (IndexBlock{ds.features, 4}));
}

TEST(Covertype, OddPartition) {
  EXPECT_THROW(SupervisedToBanditEnv(tiny_dataset(), 3, 2, 1), OddPartition);
  EXPECT_THROW(SupervisedToBanditEnv(tiny_dataset(), 2, 5, 1), OddPartition);
  EXPECT_THROW(SupervisedToBanditEnv(tiny_dataset(), 0, 2, 1), OddPartition);
}

TEST(Covertype, SeedDeterminism) {
  SupervisedToBanditEnv a(tiny_dataset(), 2, 4, 6), b(tiny_dataset(), 2, 4, 6);
  for (int t = 0; t < 500; ++t) {
    auto [xa, aa] = a.next();
    auto [xb, ab] = b.next();
    ASSERT_EQ(xa, xb);
    ASSERT_EQ(a.feedback(xa, aa, 0).feedback, b.feedback(xb, ab, 0).feedback);
  }
}

TEST(Covertype, FeedbackIndependentOfActionGivenUserAndReward) {
  SyntheticDatasetSpec ds;
  ds.examples = 200;
  SupervisedToBanditEnv env(make_synthetic_dataset(ds), 10, 10, 2);
  EXPECT_GT(igltest::audit_conditional_independence(env, 100000, 4).p_value, 0.001);
}

TEST(Dataset, ParsesAndStandardizes) {
  std::stringstream in("1,2,1\n3,2,2\n\n5,2,1\n");
  DatasetFormat f;
  f.label_offset = 1;
  const auto d = parse_dataset(in, f);
  EXPECT_EQ(d.examples.size(), 3u);
  EXPECT_EQ(d.feature_count, 2u);
  EXPECT_EQ(d.class_count, 2u);
  EXPECT_EQ(d.examples[1].label, 1u);
  EXPECT_NEAR(d.examples[0].features[0], -std::sqrt(1.5), 1e-12);
  EXPECT_DOUBLE_EQ(d.examples[0].features[1], 0.0);  // constant column
}

TEST(Dataset, DelimiterAndRoundTrip) {
  SyntheticDatasetSpec ds;
  ds.examples = 30;
  const auto d = make_synthetic_dataset(ds);
  std::stringstream buf;
  write_dataset(buf, d, ';');
  DatasetFormat f;
  f.delimiter = ';';
  f.standardize = false;
  const auto back = parse_dataset(buf, f);
  ASSERT_EQ(back.examples.size(), d.examples.size());
  for (std::size_t i = 0; i < d.examples.size(); ++i) {
    EXPECT_EQ(back.examples[i].label, d.examples[i].label);
    EXPECT_EQ(back.examples[i].features, d.examples[i].features);
  }
}

TEST(Dataset, ParseErrors) {
  auto fails = [](const std::string& text) {
    std::stringstream in(text);
    EXPECT_THROW(parse_dataset(in), DatasetParseError) << text;
  };
  fails("");
  fails("1,2,x\n");
  fails("1,2,0\n1,0\n");
  fails("1,2,-1\n");
  fails("1,2,0.5\n");
  fails("1,0\n2,0\n");  // one class
  fails("7\n");
  EXPECT_THROW(load_dataset("/nonexistent/file.csv"), DatasetParseError);
}

// --- regret --------------------------------------------------------------

TEST(Regret, OracleTraceIsZeroAndSingleMiss) {
  EmissionEnv env(default_three_state_spec(), 3);
  std::vector<InteractionRecord> trace;
  for (int t = 0; t < 200; ++t) {
    auto [ctx, actions] = env.next();
    InteractionRecord rec;
    rec.chosen_index = env.oracle_best(ctx, actions);
    rec.context = ctx;
    rec.action_set = actions;
    trace.push_back(rec);
  }
  EXPECT_EQ(oracle_regret(env, trace), 0.0);

  auto spec = default_two_state_spec();
  spec.user_count = 1;
  spec.action_count = 2;
  spec.pos_fraction = 0.5;
  EmissionEnv two(spec, 1);
  InteractionRecord miss;
  miss.context = two.context_for(0);
  miss.action_set = two.actions();
  miss.chosen_index = two.profile(0, 0) == LatentReward::Pos ? 1 : 0;
  EXPECT_EQ(oracle_regret(two, std::vector<InteractionRecord>{miss}), 1.0);
  miss.chosen_index = 2;
  EXPECT_THROW(oracle_regret(two, std::vector<InteractionRecord>{miss}), ValidationError);
}

TEST(Regret, UniformTraceMatchesClosedForm) {
  auto spec = default_two_state_spec();
  spec.user_count = 1;
  spec.action_count = 2;
  spec.pos_fraction = 0.5;
  EmissionEnv env(spec, 2);
  std::mt19937_64 rng(3);
  std::vector<InteractionRecord> trace;
  const int n = 10000;
  for (int t = 0; t < n; ++t) {
    auto [ctx, actions] = env.next();
    InteractionRecord rec;
    rec.chosen_index = rng() % 2;
    rec.context = ctx;
    rec.action_set = actions;
    trace.push_back(rec);
  }
  // per-step regret is Bernoulli(1/2)
  const double mean = n * 0.5, sigma = std::sqrt(n * 0.25);
  EXPECT_LE(std::abs(oracle_regret(env, trace) - mean), 3 * sigma);
}

TEST(Regret, NoGroundTruth) {
  struct Blind : Environment {
    std::pair<Context, ActionSet> next() override { return {}; }
    Emission feedback(const Context&, const ActionSet&, std::size_t) override { return {}; }
    LatentReward reward_of(const Context&, const ActionSet&, std::size_t) const override {
      throw GroundTruthUnavailable();
    }
    bool has_ground_truth() const override { return false; }
    std::uint32_t context_dim() const override { return 1; }
    std::uint32_t feedback_count() const override { return 1; }
    std::uint32_t action_count() const override { return 2; }
  } env;
  EXPECT_THROW(oracle_regret(env, std::vector<InteractionRecord>{}), GroundTruthUnavailable);
}

// --- sweep ---------------------------------------------------------------

TEST(Sweep, SinglePointTable) {
  SweepOptions opt;
  opt.p_values = {1.0};
  opt.runs = 1;
  opt.horizon = 300;
  const auto res = sweep_dislike_probability(opt);
  ASSERT_EQ(res.rows.size(), 1u);
  ASSERT_EQ(res.runs.size(), 1u);
  const auto& row = res.rows[0];
  EXPECT_EQ(row.runs, 1u);
  EXPECT_NEAR(row.frac_neg.mean + row.frac_zero.mean + row.frac_pos.mean, 1.0, 1e-12);
  EXPECT_EQ(res.runs[0].final.steps, 30u);
}

TEST(Sweep, ParallelMatchesSerial) {
  SweepOptions opt;
  opt.p_values = {0.3, 1.0};
  opt.runs = 2;
  opt.horizon = 500;
  const auto serial = sweep_dislike_probability(opt);
  opt.jobs = 3;
  const auto parallel = sweep_dislike_probability(opt);
  for (std::size_t i = 0; i < serial.runs.size(); ++i) {
    EXPECT_EQ(serial.runs[i].final.frac_pos, parallel.runs[i].final.frac_pos);
    EXPECT_EQ(serial.runs[i].convergence, parallel.runs[i].convergence);
  }
}

TEST(Sweep, RejectsBadInput) {
  SweepOptions opt;
  opt.horizon = 10;
  opt.runs = 1;
  opt.p_values = {0.0};
  EXPECT_THROW(sweep_dislike_probability(opt), Error);
  opt.p_values = {};
  EXPECT_THROW(sweep_dislike_probability(opt), Error);
  opt.p_values = {0.5};
  opt.runs = 0;
  EXPECT_THROW(sweep_dislike_probability(opt), Error);
}
