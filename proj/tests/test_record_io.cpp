#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "igllab/agents.hpp"
#include "igllab/record_io.hpp"
#include "igllab/sim/emission.hpp"

using namespace igllab;
namespace fs = std::filesystem;

namespace {

FeatureVector random_features(std::mt19937_64& rng, std::uint32_t dim) {
  std::normal_distribution<double> g(0.0, 10.0);
  std::vector<FeatureVector::Entry> e;
  for (std::uint32_t i = 0; i < dim; ++i)
    if (rng() % 3 == 0) e.emplace_back(i, g(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20));
  return FeatureVector(dim, e);
}

InteractionRecord random_record(std::mt19937_64& rng) {
  InteractionRecord rec;
  const std::uint32_t dim = 1 + static_cast<std::uint32_t>(rng() % 20);
  rec.context = {static_cast<std::int64_t>(rng() % 1000) - 500, random_features(rng, dim)};
  const std::size_t k = 2 + rng() % 6;
  for (std::size_t a = 0; a < k; ++a)
    rec.action_set.actions.push_back({static_cast<std::int64_t>(a * 7 + rng() % 7), random_features(rng, 5)});
  std::uniform_real_distribution<double> u(0.01, 1.0);
  double total = 0.0;
  for (std::size_t a = 0; a < k; ++a) total += rec.behavior_probs.probs.emplace_back(u(rng));
  for (auto& p : rec.behavior_probs.probs) p /= total;
  rec.chosen_index = rng() % k;
  rec.feedback = {static_cast<std::uint32_t>(rng() % 50)};
  if (rng() % 2) rec.latent_reward = latent_reward_from_int(static_cast<int>(rng() % 3) - 1);
  try {
    validate_record(rec);
  } catch (const ValidationError&) {
    return random_record(rng);  // normalization drift beyond 1e-9 is vanishingly rare
  }
  return rec;
}

std::string two_action_line(const std::string& probs) {
  return R"({"schema_version":1,"context":{"user_id":0,"dim":2,"features":[[0,1.0]]},)"
         R"("actions":[{"action_id":0,"dim":2,"features":[[0,1.0]]},{"action_id":1,"dim":2,"features":[[1,1.0]]}],)"
         R"("chosen_index":0,"behavior_probs":)" +
         probs + R"(,"feedback_signal":0})";
}

}  // namespace

TEST(RecordIo, EmptyStreamWritesNothing) {
  std::stringstream buf;
  EXPECT_EQ(write_records(std::vector<InteractionRecord>{}, buf), 0u);
  EXPECT_TRUE(buf.str().empty());
  EXPECT_TRUE(read_records(buf).empty());
}

TEST(RecordIo, RandomRoundTripIsBitExact) {
  std::mt19937_64 rng(1);
  std::vector<InteractionRecord> recs;
  for (int i = 0; i < 1000; ++i) recs.push_back(random_record(rng));
  std::stringstream buf;
  EXPECT_EQ(write_records(recs, buf), 1000u);
  const auto back = read_records(buf);
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) ASSERT_EQ(back[i], recs[i]) << "record " << i;
}

TEST(RecordIo, AbsentLatentRewardOmitsKey) {
  std::mt19937_64 rng(2);
  auto rec = random_record(rng);
  rec.latent_reward.reset();
  const auto line = format_record(rec);
  EXPECT_EQ(line.find("latent_reward"), std::string::npos);
  rec.latent_reward = LatentReward::Neg;
  EXPECT_NE(format_record(rec).find("\"latent_reward\":-1"), std::string::npos);
}

TEST(RecordIo, MalformedLineThreeOfFive) {
  std::stringstream in;
  const std::string good = two_action_line("[0.5,0.5]");
  in << good << '\n' << good << '\n' << "{not json" << '\n' << good << '\n' << good << '\n';
  RecordReader reader(in);
  EXPECT_TRUE(reader.next().has_value());
  EXPECT_TRUE(reader.next().has_value());
  try {
    reader.next();
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(RecordIo, UnnormalizedProbsOnLineOne) {
  std::stringstream in(two_action_line("[0.6,0.6]") + "\n");
  try {
    read_records(in);
    FAIL();
  } catch (const RecordValidationError& e) {
    EXPECT_EQ(e.line(), 1u);
    EXPECT_EQ(e.invariant(), Invariant::DistributionNotNormalized);
  }
}

TEST(RecordIo, FeedbackVocabularyChecked) {
  std::stringstream in(two_action_line("[0.5,0.5]") + "\n");
  EXPECT_NO_THROW(read_records(in, 1u));
  std::string line = two_action_line("[0.5,0.5]");
  line.replace(line.find("\"feedback_signal\":0"), 19, "\"feedback_signal\":3");
  std::stringstream in2(line + "\n");
  EXPECT_THROW(read_records(in2, 3u), RecordValidationError);
}

TEST(RecordIo, WriterRejectsInvalidAndFailedSinks) {
  InteractionRecord bad;
  bad.action_set.actions = {{0, {}}, {1, {}}};
  bad.behavior_probs = {{0.7, 0.7}};
  std::stringstream buf;
  EXPECT_THROW(write_records(std::vector<InteractionRecord>{bad}, buf), ValidationError);
  RecordWriter w(buf);
  EXPECT_THROW(w.write(bad), ValidationError);
  EXPECT_EQ(w.count(), 0u);

  std::mt19937_64 rng(3);
  std::ofstream closed;  // never opened
  EXPECT_THROW(write_records(std::vector<InteractionRecord>{random_record(rng)}, closed), SinkError);
  RecordWriter wc(closed);
  EXPECT_THROW(wc.write(random_record(rng)), SinkError);
}

TEST(RecordIo, ConformanceFixtures) {
  const fs::path root = fs::path(IGLLAB_FIXTURES) / "records";
  std::ifstream manifest_in(root / "expected.json");
  ASSERT_TRUE(manifest_in.good());
  const auto manifest = nlohmann::json::parse(manifest_in);

  std::size_t valid_seen = 0, invalid_seen = 0;
  for (const auto& entry : fs::directory_iterator(root / "valid")) {
    const auto name = entry.path().filename().string();
    ASSERT_TRUE(manifest["valid"].contains(name)) << name;
    std::ifstream in(entry.path());
    const auto recs = read_records(in);
    EXPECT_EQ(recs.size(), manifest["valid"][name].get<std::size_t>()) << name;
    // Re-serializing and reading again gives the same records.
    std::stringstream again;
    write_records(recs, again);
    EXPECT_EQ(read_records(again), recs) << name;
    ++valid_seen;
  }
  for (const auto& entry : fs::directory_iterator(root / "invalid")) {
    const auto name = entry.path().filename().string();
    ASSERT_TRUE(manifest["invalid"].contains(name)) << name;
    const auto& want = manifest["invalid"][name];
    std::ifstream in(entry.path());
    try {
      read_records(in);
      ADD_FAILURE() << name << " was accepted";
    } catch (const RecordValidationError& e) {
      EXPECT_EQ(want["error"], "validation") << name << ": " << e.what();
      EXPECT_EQ(e.line(), want["line"].get<std::size_t>()) << name;
      EXPECT_EQ(to_string(e.invariant()), want["invariant"].get<std::string>()) << name;
    } catch (const ParseError& e) {
      EXPECT_EQ(want["error"], "parse") << name << ": " << e.what();
      EXPECT_EQ(e.line(), want["line"].get<std::size_t>()) << name;
    }
    ++invalid_seen;
  }
  EXPECT_EQ(valid_seen, manifest["valid"].size());
  EXPECT_EQ(invalid_seen, manifest["invalid"].size());
}

TEST(RecordIo, BlankLinesKeepLineNumbers) {
  std::stringstream in("\n\n" + two_action_line("[0.5,0.5]") + "\n\n" + two_action_line("[0.9,0.9]") + "\n");
  RecordReader reader(in);
  EXPECT_TRUE(reader.next().has_value());
  EXPECT_EQ(reader.line(), 3u);
  try {
    reader.next();
    FAIL();
  } catch (const RecordValidationError& e) {
    EXPECT_EQ(e.line(), 5u);
  }
}

TEST(RecordIo, CapturedRunReplaysToSameMetrics) {
  const auto seeds = run_seeds(4);
  auto s = emission_preset();
  s.alpha = 0.5;
  EmissionEnv env(default_three_state_spec(), seeds.env);
  auto live = make_igl_agent(Algorithm::IglP3, env, {kDislike}, s, seeds.agent);
  std::stringstream file;
  RecordWriter writer(file);
  DriverOptions opt;
  opt.on_step = [&](const IglStep& st) { writer.write(st.record); };
  const auto online = run_on_policy(live, env, 8000, seeds.driver, opt);
  EXPECT_EQ(writer.count(), 8000u);

  auto replay = make_igl_agent(Algorithm::IglP3, env, {kDislike}, s, seeds.agent);
  RecordReader reader(file, env.feedback_count());
  const auto offline = run_off_policy(replay, reader);
  ASSERT_EQ(offline.size(), online.size());
  for (std::size_t t = 0; t < online.size(); ++t) {
    ASSERT_EQ(offline[t].pseudo_reward, online[t].pseudo_reward) << t;
    ASSERT_EQ(offline[t].reward, online[t].reward) << t;
    ASSERT_EQ(offline[t].frac_pos, online[t].frac_pos) << t;
    ASSERT_EQ(offline[t].frac_neg, online[t].frac_neg) << t;
    ASSERT_EQ(offline[t].ik_posterior, online[t].ik_posterior) << t;
    ASSERT_EQ(offline[t].ik_accuracy, online[t].ik_accuracy) << t;
  }
}
