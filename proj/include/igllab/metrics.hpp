// metrics.hpp
// Per-step metric rows for learning curves, final-window summaries, and the
// CSV schema shared by the run, replay, plot and sweep commands.
#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <deque>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "igllab/core.hpp"

namespace igllab {

inline constexpr const char* kMetricsSchemaLine = "# schema=igllab-metrics/1";
inline constexpr const char* kMetricsHeader =
    "step,pseudo_reward,reward,frac_neg,frac_zero,frac_pos,ik_posterior,ik_accuracy,"
    "cumulative_regret";

struct MetricsRow {
  std::uint64_t step = 0;
  double pseudo_reward = 0.0;
  std::optional<int> reward;
  // Trailing-window fractions of ground-truth reward states.
  std::optional<double> frac_neg;
  std::optional<double> frac_zero;
  std::optional<double> frac_pos;
  double ik_posterior = std::numeric_limits<double>::quiet_NaN();
  // Trailing-window rate at which the IK argmax equals the played action.
  double ik_accuracy = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> cumulative_regret;
};

using MetricsSeries = std::vector<MetricsRow>;

/// Turns a stream of step outcomes into MetricsRows.
class MetricsTracker {
 public:
  explicit MetricsTracker(std::size_t window = 500) : window_(window == 0 ? 1 : window) {}

  /// `ik_hit` is nullopt when the step has no IK prediction (baselines).
  /// `regret_increment` is nullopt when no oracle is available.
  MetricsRow add(double pseudo_reward, std::optional<LatentReward> reward, double ik_posterior,
                 std::optional<bool> ik_hit, std::optional<double> regret_increment) {
    MetricsRow row;
    row.step = ++step_;
    row.pseudo_reward = pseudo_reward;
    row.ik_posterior = ik_posterior;

    if (reward) {
      const int r = value_of(*reward);
      row.reward = r;
      rewards_.push_back(r);
      ++counts_[r + 1];
      if (rewards_.size() > window_) {
        --counts_[rewards_.front() + 1];
        rewards_.pop_front();
      }
      const auto n = static_cast<double>(rewards_.size());
      row.frac_neg = counts_[0] / n;
      row.frac_zero = counts_[1] / n;
      row.frac_pos = counts_[2] / n;
    }

    if (ik_hit) {
      hits_.push_back(*ik_hit ? 1 : 0);
      hit_count_ += *ik_hit ? 1 : 0;
      if (hits_.size() > window_) {
        hit_count_ -= hits_.front();
        hits_.pop_front();
      }
      row.ik_accuracy = static_cast<double>(hit_count_) / static_cast<double>(hits_.size());
    }

    if (regret_increment) {
      regret_ += *regret_increment;
      row.cumulative_regret = regret_;
    }
    return row;
  }

 private:
  std::size_t window_;
  std::uint64_t step_ = 0;
  std::deque<int> rewards_;
  std::uint64_t counts_[3] = {0, 0, 0};
  std::deque<int> hits_;
  std::uint64_t hit_count_ = 0;
  double regret_ = 0.0;
};

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

struct FinalWindow {
  double frac_neg = std::numeric_limits<double>::quiet_NaN();
  double frac_zero = std::numeric_limits<double>::quiet_NaN();
  double frac_pos = std::numeric_limits<double>::quiet_NaN();
  std::size_t steps = 0;
};

/// Fractions of ground-truth reward states over the last `fraction` of the
/// steps (at least one step). NaN fields when ground truth is absent.
inline FinalWindow final_window(const MetricsSeries& series, double fraction = 0.1) {
  FinalWindow fw;
  if (series.empty()) return fw;
  auto n = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(series.size())));
  n = std::max<std::size_t>(1, std::min(n, series.size()));
  std::size_t counts[3] = {0, 0, 0};
  std::size_t seen = 0;
  for (std::size_t i = series.size() - n; i < series.size(); ++i) {
    if (!series[i].reward) continue;
    ++counts[*series[i].reward + 1];
    ++seen;
  }
  fw.steps = seen;
  if (seen == 0) return fw;
  fw.frac_neg = static_cast<double>(counts[0]) / static_cast<double>(seen);
  fw.frac_zero = static_cast<double>(counts[1]) / static_cast<double>(seen);
  fw.frac_pos = static_cast<double>(counts[2]) / static_cast<double>(seen);
  return fw;
}

/// First step whose trailing-window r=+1 fraction exceeds `threshold`.
inline std::optional<std::uint64_t> convergence_step(const MetricsSeries& series,
                                                     double threshold = 0.7) {
  for (const auto& row : series)
    if (row.frac_pos && *row.frac_pos > threshold) return row.step;
  return std::nullopt;
}

struct MeanSe {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
};

/// Mean and standard error (sample sd / sqrt(n)); se is 0 for n == 1.
inline MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe out;
  out.n = xs.size();
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() == 1) {
    out.se = 0.0;
    return out;
  }
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.se = std::sqrt(ss / static_cast<double>(xs.size() - 1)) / std::sqrt(static_cast<double>(xs.size()));
  return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Shortest decimal text that parses back to the same double.
inline std::string format_real(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline void write_metrics_header(std::ostream& out) {
  out << kMetricsSchemaLine << '\n' << kMetricsHeader << '\n';
}

inline void write_metrics_row(std::ostream& out, const MetricsRow& row) {
  auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
  out << row.step << ',' << format_real(row.pseudo_reward) << ','
      << (row.reward ? std::to_string(*row.reward) : std::string()) << ',' << opt(row.frac_neg)
      << ',' << opt(row.frac_zero) << ',' << opt(row.frac_pos) << ','
      << format_real(row.ik_posterior) << ',' << format_real(row.ik_accuracy) << ','
      << opt(row.cumulative_regret) << '\n';
}

inline void write_metrics(std::ostream& out, const MetricsSeries& series) {
  write_metrics_header(out);
  for (const auto& row : series) write_metrics_row(out, row);
}

class MetricsFormatError : public Error {
 public:
  using Error::Error;
};

/// Parses a metrics CSV written by write_metrics. Throws MetricsFormatError
/// when the header differs from the current schema.
inline MetricsSeries read_metrics(std::istream& in) {
  MetricsSeries series;
  std::string line;
  bool header_seen = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != kMetricsHeader)
        throw MetricsFormatError("metrics header mismatch: '" + line + "'");
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != 9)
      throw MetricsFormatError("line " + std::to_string(lineno) + ": expected 9 columns");
    auto real = [](const std::string& s) {
      return s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
    };
    auto opt = [](const std::string& s) {
      return s.empty() ? std::optional<double>() : std::optional<double>(std::stod(s));
    };
    MetricsRow row;
    row.step = std::stoull(cells[0]);
    row.pseudo_reward = real(cells[1]);
    if (!cells[2].empty()) row.reward = std::stoi(cells[2]);
    row.frac_neg = opt(cells[3]);
    row.frac_zero = opt(cells[4]);
    row.frac_pos = opt(cells[5]);
    row.ik_posterior = real(cells[6]);
    row.ik_accuracy = real(cells[7]);
    row.cumulative_regret = opt(cells[8]);
    series.push_back(row);
  }
  if (!header_seen) throw MetricsFormatError("metrics file has no header");
  return series;
}

}  // namespace igllab
