#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "igllab/metrics.hpp"

using namespace igllab;

namespace {

MetricsSeries series_of(const std::vector<int>& rs, std::size_t window) {
  MetricsTracker t(window);
  MetricsSeries out;
  for (int r : rs) out.push_back(t.add(r > 0 ? 1.0 : 0.0, latent_reward_from_int(r), 0.5, true, 0.0));
  return out;
}

}  // namespace

TEST(Metrics, HeaderMatchesGoldenFile) {
  std::ifstream golden(std::string(IGLLAB_FIXTURES) + "/metrics_header.csv");
  ASSERT_TRUE(golden.good());
  std::stringstream want;
  want << golden.rdbuf();
  std::stringstream got;
  write_metrics_header(got);
  EXPECT_EQ(got.str(), want.str());
}

TEST(Metrics, TrailingWindowFractions) {
  const auto s = series_of({1, 1, 0, -1, 0, 1}, 4);
  ASSERT_EQ(s.size(), 6u);
  EXPECT_DOUBLE_EQ(*s[0].frac_pos, 1.0);
  EXPECT_DOUBLE_EQ(*s[2].frac_pos, 2.0 / 3);
  // Window at step 6 covers steps 3..6: 0, -1, 0, 1.
  EXPECT_DOUBLE_EQ(*s[5].frac_pos, 0.25);
  EXPECT_DOUBLE_EQ(*s[5].frac_neg, 0.25);
  EXPECT_DOUBLE_EQ(*s[5].frac_zero, 0.5);
  EXPECT_EQ(s[5].step, 6u);
}

TEST(Metrics, FractionsSumToOne) {
  std::mt19937_64 rng(3);
  std::vector<int> rs(3000);
  for (auto& r : rs) r = static_cast<int>(rng() % 3) - 1;
  for (const auto& row : series_of(rs, 500))
    EXPECT_NEAR(*row.frac_neg + *row.frac_zero + *row.frac_pos, 1.0, 1e-12);
}

TEST(Metrics, AccuracyRegretAndMissingGroundTruth) {
  MetricsTracker t(2);
  auto a = t.add(0.0, std::nullopt, 0.3, true, 1.0);
  auto b = t.add(0.0, std::nullopt, 0.3, false, 0.5);
  auto c = t.add(0.0, std::nullopt, 0.3, false, std::nullopt);
  EXPECT_FALSE(a.frac_pos.has_value());
  EXPECT_FALSE(a.reward.has_value());
  EXPECT_DOUBLE_EQ(a.ik_accuracy, 1.0);
  EXPECT_DOUBLE_EQ(b.ik_accuracy, 0.5);
  EXPECT_DOUBLE_EQ(c.ik_accuracy, 0.0);
  EXPECT_DOUBLE_EQ(*b.cumulative_regret, 1.5);
  EXPECT_FALSE(c.cumulative_regret.has_value());
  MetricsTracker baseline;
  EXPECT_TRUE(std::isnan(baseline.add(1.0, LatentReward::Pos, NAN, std::nullopt, 0.0).ik_accuracy));
}

TEST(Metrics, FinalWindow) {
  std::vector<int> rs(100, 0);
  for (int i = 90; i < 100; ++i) rs[i] = i < 97 ? 1 : -1;
  const auto fw = final_window(series_of(rs, 500), 0.1);
  EXPECT_EQ(fw.steps, 10u);
  EXPECT_DOUBLE_EQ(fw.frac_pos, 0.7);
  EXPECT_DOUBLE_EQ(fw.frac_neg, 0.3);
  EXPECT_DOUBLE_EQ(fw.frac_zero, 0.0);
  EXPECT_EQ(final_window(series_of({1}, 5), 0.1).steps, 1u);
  EXPECT_TRUE(std::isnan(final_window({}).frac_pos));
}

TEST(Metrics, ConvergenceStep) {
  // window 10: frac_pos first exceeds 0.7 once 8 of the last 10 are positive
  std::vector<int> rs(20, 0);
  for (int i = 10; i < 20; ++i) rs[i] = 1;
  const auto s = series_of(rs, 10);
  EXPECT_EQ(convergence_step(s, 0.7), 18u);
  EXPECT_FALSE(convergence_step(series_of(std::vector<int>(50, 0), 10)).has_value());
}

TEST(Metrics, MeanSe) {
  const auto m = mean_se({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.se, std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
  EXPECT_EQ(mean_se({7.0}).se, 0.0);
  EXPECT_TRUE(std::isnan(mean_se({}).mean));
}

TEST(Metrics, CsvRoundTrip) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MetricsTracker t(50);
  MetricsSeries s;
  for (int i = 0; i < 300; ++i) {
    const int r = static_cast<int>(rng() % 3) - 1;
    std::optional<LatentReward> lr;
    if (i % 7 != 0) lr = latent_reward_from_int(r);
    s.push_back(t.add(i % 3 == 0 ? -1.0 / 3 : 1.0, lr, u(rng), i % 5 ? std::optional<bool>(r > 0) : std::nullopt,
                      i % 11 ? std::optional<double>(u(rng)) : std::nullopt));
  }
  std::stringstream buf;
  write_metrics(buf, s);
  const auto back = read_metrics(buf);
  ASSERT_EQ(back.size(), s.size());
  auto same = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(back[i].step, s[i].step);
    EXPECT_EQ(back[i].pseudo_reward, s[i].pseudo_reward);
    EXPECT_EQ(back[i].reward, s[i].reward);
    EXPECT_EQ(back[i].frac_neg, s[i].frac_neg);
    EXPECT_EQ(back[i].frac_zero, s[i].frac_zero);
    EXPECT_EQ(back[i].frac_pos, s[i].frac_pos);
    EXPECT_TRUE(same(back[i].ik_posterior, s[i].ik_posterior));
    EXPECT_TRUE(same(back[i].ik_accuracy, s[i].ik_accuracy));
    EXPECT_EQ(back[i].cumulative_regret, s[i].cumulative_regret);
  }
}

TEST(Metrics, ReaderRejectsForeignHeader) {
  std::stringstream bad("step,reward\n1,0\n");
  EXPECT_THROW(read_metrics(bad), MetricsFormatError);
  std::stringstream empty("");
  EXPECT_THROW(read_metrics(empty), MetricsFormatError);
  std::stringstream short_row(std::string(kMetricsHeader) + "\n1,2,3\n");
  EXPECT_THROW(read_metrics(short_row), MetricsFormatError);
}

TEST(Metrics, FormatRealIsShortestRoundTrip) {
  EXPECT_EQ(format_real(0.1), "0.1");
  EXPECT_EQ(format_real(-5.0), "-5");
  EXPECT_EQ(format_real(NAN), "");
  const double x = 1.0 / 3;
  EXPECT_EQ(std::stod(format_real(x)), x);
}
