// experiment.hpp
// JSON experiment configs and the run / replay / sweep commands behind the
// igllab CLI. Commands return process exit codes:
//   0 success, 1 configuration error, 2 runtime error.
// Messages go through CommandLog; data goes to files.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "igllab/agents.hpp"
#include "igllab/igl.hpp"
#include "igllab/metrics.hpp"
#include "igllab/parallel.hpp"
#include "igllab/record_io.hpp"
#include "igllab/sim/covertype.hpp"
#include "igllab/sim/emission.hpp"
#include "igllab/sim/sweep.hpp"

namespace igllab {

/// A config problem; `field` is the dotted path of the offending key, or the
/// file path when the file itself is unusable.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error("config error at '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class EnvKind { Covertype, Emission2, Emission3, Logged };

inline const char* to_string(EnvKind k) {
  switch (k) {
    case EnvKind::Covertype: return "covertype";
    case EnvKind::Emission2: return "emission-2";
    case EnvKind::Emission3: return "emission-3";
    case EnvKind::Logged: return "logged";
  }
  return "unknown";
}

struct EnvironmentConfig {
  EnvKind kind = EnvKind::Emission3;

  // emission-2 / emission-3
  std::uint32_t users = 10;
  std::uint32_t actions = 10;
  double pos_fraction = 0.2;
  double neg_fraction = 0.2;
  double dislike_probability = 0.2;

  // covertype
  std::optional<std::string> dataset;  // synthetic data when absent
  DatasetFormat format;
  SyntheticDatasetSpec synthetic;
  std::uint32_t words = 100;

  // logged: the layout of records that come from elsewhere
  std::uint32_t context_dim = 0;
  std::uint32_t feedback_count = 0;
  std::optional<IndexBlock> user_block;

  std::vector<std::uint32_t> dn_signals;
  std::optional<std::uint32_t> click_signal;
};

struct ExperimentConfig {
  EnvironmentConfig environment;
  std::vector<Algorithm> algorithms = {Algorithm::IglP3};
  std::uint64_t horizon = 100000;
  std::vector<std::uint64_t> seeds = {1};
  AgentSettings agent;
  std::size_t metrics_window = 500;
  double final_fraction = 0.1;
  double convergence_threshold = 0.7;
  std::string output_dir = "out";
  bool capture_records = false;
  std::size_t jobs = 1;

  std::vector<double> sweep_p = {0.2, 0.5, 1.0};
  std::uint32_t sweep_runs = 10;
  bool sweep_alpha_equals_p = true;
};

/// Command-line values that take precedence over the file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> horizon;
  std::optional<double> alpha;
  std::optional<double> epsilon;
  std::optional<std::size_t> jobs;
  std::optional<std::string> out;
};

struct CommandLog {
  std::function<void(const std::string&)> info = [](const std::string&) {};
  std::function<void(const std::string&)> error = [](const std::string&) {};
};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace config_detail {

using nlohmann::json;

/// Typed access to one JSON object; remembers which keys were read so that
/// unknown (typically misspelled) keys can be rejected.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  Section sub(const std::string& key) { return Section(raw(key), where(key)); }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    out = convert<T>(obj_.at(key), where(key));
  }

  template <typename T>
  void read(const std::string& key, std::optional<T>& out) {
    if (!has(key)) return;
    out = convert<T>(obj_.at(key), where(key));
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(where(it.key()), "unknown key");
  }

  template <typename T>
  static T convert(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where, "expected true or false");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(where, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) return static_cast<T>(v.get<std::uint64_t>());
        if (v.get<std::int64_t>() < 0) throw ConfigError(where, "must not be negative");
      }
      return static_cast<T>(v.get<std::int64_t>());
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where, "expected a number");
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where, "expected a string");
      return v.get<std::string>();
    } else {
      if (!v.is_array()) throw ConfigError(where, "expected an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(convert<typename T::value_type>(v[i], where + "[" + std::to_string(i) + "]"));
      return out;
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void require(bool ok, const std::string& where, const std::string& what) {
  if (!ok) throw ConfigError(where, what);
}

inline void read_environment(Section s, EnvironmentConfig& env) {
  std::string type = "emission-3";
  s.read("type", type);
  if (type == "covertype") env.kind = EnvKind::Covertype;
  else if (type == "emission-2") env.kind = EnvKind::Emission2;
  else if (type == "emission-3") env.kind = EnvKind::Emission3;
  else if (type == "logged") env.kind = EnvKind::Logged;
  else throw ConfigError(s.where("type"), "unknown environment '" + type + "'");

  if (env.kind == EnvKind::Covertype) {
    env.users = 100;
    s.read("users", env.users);
    s.read("words", env.words);
    s.read("dataset", env.dataset);
    if (s.has("delimiter")) {
      const auto d = Section::convert<std::string>(s.raw("delimiter"), s.where("delimiter"));
      require(d.size() == 1, s.where("delimiter"), "must be a single character");
      env.format.delimiter = d[0];
    }
    s.read("label_offset", env.format.label_offset);
    s.read("standardize", env.format.standardize);
    if (s.has("synthetic")) {
      Section syn = s.sub("synthetic");
      syn.read("examples", env.synthetic.examples);
      syn.read("features", env.synthetic.features);
      syn.read("classes", env.synthetic.classes);
      syn.read("noise", env.synthetic.noise);
      syn.read("seed", env.synthetic.seed);
      syn.finish();
      require(env.synthetic.examples > 0, s.where("synthetic.examples"), "must be positive");
      require(env.synthetic.classes >= 2, s.where("synthetic.classes"), "must be at least 2");
      require(env.synthetic.features > 0, s.where("synthetic.features"), "must be positive");
    }
    require(env.users > 0 && env.users % 2 == 0, s.where("users"), "must be even and positive");
    require(env.words > 0 && env.words % 2 == 0, s.where("words"), "must be even and positive");
  } else if (env.kind == EnvKind::Logged) {
    s.read("context_dim", env.context_dim);
    s.read("feedback_count", env.feedback_count);
    s.read("actions", env.actions);
    if (s.has("user_block")) {
      const auto b = Section::convert<std::vector<std::uint32_t>>(s.raw("user_block"), s.where("user_block"));
      require(b.size() == 2, s.where("user_block"), "expected [offset, size]");
      require(b[0] + b[1] <= env.context_dim, s.where("user_block"), "must lie inside the context");
      env.user_block = IndexBlock{b[0], b[1]};
    }
    require(env.context_dim > 0, s.where("context_dim"), "must be positive");
    require(env.feedback_count > 0, s.where("feedback_count"), "must be positive");
    require(env.actions >= 2, s.where("actions"), "must be at least 2");
  } else {
    s.read("users", env.users);
    s.read("actions", env.actions);
    s.read("pos_fraction", env.pos_fraction);
    if (env.kind == EnvKind::Emission3) {
      s.read("neg_fraction", env.neg_fraction);
      s.read("dislike_probability", env.dislike_probability);
      require(env.dislike_probability > 0.0 && env.dislike_probability <= 1.0,
              s.where("dislike_probability"), "must lie in (0, 1]");
    } else {
      env.neg_fraction = 0.0;
    }
    require(env.users > 0, s.where("users"), "must be positive");
    require(env.actions >= 2, s.where("actions"), "must be at least 2");
    require(env.pos_fraction > 0.0 && env.pos_fraction + env.neg_fraction <= 1.0,
            s.where("pos_fraction"), "reward fractions must form a partition");
    env.dn_signals = env.kind == EnvKind::Emission3 ? std::vector<std::uint32_t>{kDislike}
                                                    : std::vector<std::uint32_t>{};
    env.click_signal = kClick;
  }
  s.read("dn_signals", env.dn_signals);
  s.read("click_signal", env.click_signal);
  s.finish();
}

inline void read_agent(Section s, AgentSettings& a) {
  s.read("alpha", a.alpha);
  s.read("detection_factor", a.detection_factor);
  if (s.has("exploration")) {
    const auto e = Section::convert<std::string>(s.raw("exploration"), s.where("exploration"));
    if (e == "epsilon-greedy") a.exploration = Exploration::EpsilonGreedy;
    else if (e == "softmax") a.exploration = Exploration::Softmax;
    else throw ConfigError(s.where("exploration"), "expected 'epsilon-greedy' or 'softmax'");
  }
  s.read("epsilon", a.epsilon);
  s.read("temperature", a.temperature);
  if (s.has("negative_credit")) {
    const auto n = Section::convert<std::string>(s.raw("negative_credit"), s.where("negative_credit"));
    if (n == "replicate") a.negative_credit = NegativeCredit::Replicate;
    else if (n == "split") a.negative_credit = NegativeCredit::SplitEqually;
    else throw ConfigError(s.where("negative_credit"), "expected 'replicate' or 'split'");
  }
  if (s.has("learning_rate")) {
    a.cb_learning_rate = a.ik_learning_rate =
        Section::convert<double>(s.raw("learning_rate"), s.where("learning_rate"));
  }
  s.read("cb_learning_rate", a.cb_learning_rate);
  s.read("ik_learning_rate", a.ik_learning_rate);
  s.read("batch_size", a.batch_size);
  s.read("hidden_width", a.hidden_width);
  s.read("init_scale", a.init_scale);
  s.read("beta1", a.beta1);
  s.read("beta2", a.beta2);
  s.read("adam_epsilon", a.adam_epsilon);
  s.read("ik_cross_user_feedback", a.ik_cross_user_feedback);
  s.read("ik_gate", a.ik_gate);
  s.read("ik_gate_rank", a.ik_gate_rank);
  s.finish();
}

inline void check_agent(const AgentSettings& a, const std::string& at) {
  require(a.alpha > 0.0 && a.alpha <= 1.0, at + ".alpha", "must lie in (0, 1]");
  require(a.detection_factor > 0.0, at + ".detection_factor", "must be positive");
  require(a.epsilon > 0.0 && a.epsilon <= 1.0, at + ".epsilon", "must lie in (0, 1]");
  require(a.temperature > 0.0, at + ".temperature", "must be positive");
  require(a.cb_learning_rate > 0.0, at + ".cb_learning_rate", "must be positive");
  require(a.ik_learning_rate > 0.0, at + ".ik_learning_rate", "must be positive");
  require(a.batch_size >= 1, at + ".batch_size", "must be at least 1");
  require(a.init_scale > 0.0, at + ".init_scale", "must be positive");
  require(a.beta1 >= 0.0 && a.beta1 < 1.0, at + ".beta1", "must lie in [0, 1)");
  require(a.beta2 >= 0.0 && a.beta2 < 1.0, at + ".beta2", "must lie in [0, 1)");
  require(a.adam_epsilon > 0.0, at + ".adam_epsilon", "must be positive");
  require(a.ik_gate_rank >= 1, at + ".ik_gate_rank", "must be at least 1");
}

}  // namespace config_detail

/// Settings a config starts from before its "agent" section applies.
inline AgentSettings preset_for(EnvKind kind) {
  return kind == EnvKind::Covertype ? covertype_preset() : emission_preset();
}

inline ExperimentConfig parse_config(const nlohmann::json& root) {
  using config_detail::require;
  using config_detail::Section;
  Section s(root, "");
  ExperimentConfig c;
  if (s.has("environment")) config_detail::read_environment(s.sub("environment"), c.environment);
  else config_detail::read_environment(Section(nlohmann::json::object(), "environment"), c.environment);

  std::string preset = "auto";
  s.read("preset", preset);
  if (preset == "auto") c.agent = preset_for(c.environment.kind);
  else if (preset == "emission") c.agent = emission_preset();
  else if (preset == "covertype") c.agent = covertype_preset();
  else if (preset == "none") c.agent = AgentSettings{};
  else throw ConfigError("preset", "expected 'auto', 'emission', 'covertype' or 'none'");
  if (s.has("agent")) config_detail::read_agent(s.sub("agent"), c.agent);
  config_detail::check_agent(c.agent, "agent");

  if (s.has("algorithms")) {
    const auto names = Section::convert<std::vector<std::string>>(s.raw("algorithms"), "algorithms");
    require(!names.empty(), "algorithms", "at least one algorithm is required");
    c.algorithms.clear();
    for (std::size_t i = 0; i < names.size(); ++i) {
      const auto a = parse_algorithm(names[i]);
      require(a.has_value(), "algorithms[" + std::to_string(i) + "]",
              "unknown algorithm '" + names[i] + "' (expected igl-p2, igl-p3 or cb-ctr)");
      c.algorithms.push_back(*a);
    }
  }
  for (auto a : c.algorithms)
    if (a == Algorithm::CbCtr)
      require(c.environment.click_signal.has_value(), "environment.click_signal",
              "cb-ctr needs a click signal for this environment");

  s.read("horizon", c.horizon);
  require(c.horizon >= 1, "horizon", "must be at least 1");
  s.read("seeds", c.seeds);
  require(!c.seeds.empty(), "seeds", "at least one seed is required");
  s.read("metrics_window", c.metrics_window);
  require(c.metrics_window >= 1, "metrics_window", "must be at least 1");
  s.read("final_window_fraction", c.final_fraction);
  require(c.final_fraction > 0.0 && c.final_fraction <= 1.0, "final_window_fraction", "must lie in (0, 1]");
  s.read("convergence_threshold", c.convergence_threshold);
  s.read("output_dir", c.output_dir);
  s.read("capture_records", c.capture_records);
  s.read("jobs", c.jobs);
  require(c.jobs >= 1, "jobs", "must be at least 1");

  if (s.has("sweep")) {
    Section sw = s.sub("sweep");
    sw.read("p_values", c.sweep_p);
    sw.read("runs", c.sweep_runs);
    sw.read("alpha_equals_p", c.sweep_alpha_equals_p);
    sw.finish();
    require(!c.sweep_p.empty(), "sweep.p_values", "at least one value is required");
    for (std::size_t i = 0; i < c.sweep_p.size(); ++i)
      require(c.sweep_p[i] > 0.0 && c.sweep_p[i] <= 1.0, "sweep.p_values[" + std::to_string(i) + "]",
              "must lie in (0, 1]");
    require(c.sweep_runs >= 1, "sweep.runs", "must be at least 1");
  }
  s.finish();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path, std::string("not valid JSON: ") + e.what());
  }
  return parse_config(root);
}

inline void apply_overrides(ExperimentConfig& c, const Overrides& o) {
  if (o.seed) c.seeds = {*o.seed};
  if (o.horizon) {
    config_detail::require(*o.horizon >= 1, "--horizon", "must be at least 1");
    c.horizon = *o.horizon;
  }
  if (o.alpha) c.agent.alpha = *o.alpha;
  if (o.epsilon) c.agent.epsilon = *o.epsilon;
  if (o.jobs) {
    config_detail::require(*o.jobs >= 1, "--jobs", "must be at least 1");
    c.jobs = *o.jobs;
  }
  if (o.out) c.output_dir = *o.out;
  config_detail::check_agent(c.agent, "agent");
}

// ---------------------------------------------------------------------------
// Environments and agents from a config
// ---------------------------------------------------------------------------

/// Builds one environment per run. A covertype dataset is loaded once.
class EnvironmentFactory {
 public:
  explicit EnvironmentFactory(const EnvironmentConfig& config) : config_(config) {
    if (config_.kind == EnvKind::Covertype)
      dataset_ = std::make_shared<const Dataset>(
          config_.dataset ? load_dataset(*config_.dataset, config_.format)
                          : make_synthetic_dataset(config_.synthetic));
  }

  std::unique_ptr<Environment> make(std::uint64_t seed) const {
    switch (config_.kind) {
      case EnvKind::Covertype:
        return std::make_unique<SupervisedToBanditEnv>(*dataset_, config_.users, config_.words, seed);
      case EnvKind::Emission2:
      case EnvKind::Emission3: {
        EmissionSpec spec = config_.kind == EnvKind::Emission2
                                ? default_two_state_spec()
                                : default_three_state_spec(config_.dislike_probability);
        spec.user_count = config_.users;
        spec.action_count = config_.actions;
        spec.pos_fraction = config_.pos_fraction;
        spec.neg_fraction = config_.neg_fraction;
        spec.dn_signals = config_.dn_signals;
        return std::make_unique<EmissionEnv>(std::move(spec), seed);
      }
      case EnvKind::Logged:
        break;
    }
    throw Error("environment 'logged' cannot generate interactions; use replay");
  }

  bool simulated() const noexcept { return config_.kind != EnvKind::Logged; }

 private:
  EnvironmentConfig config_;
  std::shared_ptr<const Dataset> dataset_;
};

using AnyAgent = std::variant<IglAgent, CtrAgent>;

struct AgentShape {
  IkInputLayout layout;
  std::uint32_t action_count = 0;
};

inline AgentShape shape_for(const ExperimentConfig& c, const EnvironmentFactory& factory,
                            std::uint64_t seed) {
  AgentShape shape;
  if (factory.simulated()) {
    const auto env = factory.make(seed);
    shape.layout = ik_layout_for(*env, c.agent);
    shape.action_count = env->action_count();
  } else {
    const auto& e = c.environment;
    shape.layout.context_dim = e.context_dim;
    shape.layout.feedback_count = e.feedback_count;
    shape.layout.user_block = e.user_block;
    shape.layout.cross_user_feedback = c.agent.ik_cross_user_feedback && e.user_block.has_value();
    shape.action_count = e.actions;
  }
  return shape;
}

inline AnyAgent make_agent(Algorithm algorithm, const ExperimentConfig& c, const AgentShape& shape,
                           std::uint64_t seed) {
  if (algorithm == Algorithm::CbCtr)
    return CtrAgent(cb_config_for(shape.layout.context_dim, shape.action_count, c.agent, seed),
                    c.environment.click_signal.value_or(0), shape.layout.feedback_count);
  return make_igl_agent(algorithm, shape.layout, shape.action_count, c.environment.dn_signals, c.agent,
                        seed);
}

// ---------------------------------------------------------------------------
// Summaries and CSV output
// ---------------------------------------------------------------------------

struct CellSummary {
  FinalWindow final;
  std::optional<std::uint64_t> convergence;
};

struct SummaryRow {
  std::string label;
  MeanSe frac_neg;
  MeanSe frac_zero;
  MeanSe frac_pos;
  MeanSe convergence;  // unconverged cells count as the horizon
  std::size_t converged = 0;
  std::size_t cells = 0;
};

inline constexpr const char* kSummaryColumns =
    "frac_neg_mean,frac_neg_se,frac_zero_mean,frac_zero_se,frac_pos_mean,frac_pos_se,"
    "convergence_step_mean,convergence_step_se,converged,cells";

inline SummaryRow summarize(std::string label, const std::vector<CellSummary>& cells,
                            std::uint64_t horizon) {
  SummaryRow row;
  row.label = std::move(label);
  std::vector<double> neg, zero, pos, conv;
  for (const auto& c : cells) {
    neg.push_back(c.final.frac_neg);
    zero.push_back(c.final.frac_zero);
    pos.push_back(c.final.frac_pos);
    conv.push_back(static_cast<double>(c.convergence.value_or(horizon)));
    if (c.convergence) ++row.converged;
  }
  row.frac_neg = mean_se(neg);
  row.frac_zero = mean_se(zero);
  row.frac_pos = mean_se(pos);
  row.convergence = mean_se(conv);
  row.cells = cells.size();
  return row;
}

inline void write_summary_row(std::ostream& out, const SummaryRow& r) {
  auto ms = [](const MeanSe& m) { return format_real(m.mean) + "," + format_real(m.se); };
  out << r.label << ',' << ms(r.frac_neg) << ',' << ms(r.frac_zero) << ',' << ms(r.frac_pos) << ','
      << ms(r.convergence) << ',' << r.converged << ',' << r.cells << '\n';
}

inline std::string cell_file_name(Algorithm a, std::uint64_t seed) {
  return std::string(to_string(a)) + "_seed" + std::to_string(seed) + ".csv";
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// Runs one (algorithm, seed) cell on-policy. `capture`, when given,
/// receives every interaction as a record line.
inline MetricsSeries run_cell(const ExperimentConfig& c, const EnvironmentFactory& factory,
                              Algorithm algorithm, std::uint64_t seed, std::ostream* capture = nullptr) {
  const RunSeeds seeds = run_seeds(seed);
  auto env = factory.make(seeds.env);
  AgentShape shape{ik_layout_for(*env, c.agent), env->action_count()};
  AnyAgent agent = make_agent(algorithm, c, shape, seeds.agent);
  std::optional<RecordWriter> writer;
  if (capture) writer.emplace(*capture);
  DriverOptions opt;
  opt.metrics_window = c.metrics_window;
  if (writer) opt.on_step = [&](const IglStep& step) { writer->write(step.record); };
  return std::visit([&](auto& a) { return run_on_policy(a, *env, c.horizon, seeds.driver, opt); }, agent);
}

/// Runs a configured experiment end to end; returns the exit code.
inline int run_experiment(const ExperimentConfig& c, const CommandLog& log) {
  try {
    const EnvironmentFactory factory(c.environment);
    if (!factory.simulated()) throw ConfigError("environment.type", "'logged' can only be replayed");
    const std::filesystem::path dir(c.output_dir);
    std::filesystem::create_directories(dir);

    const std::size_t n = c.algorithms.size() * c.seeds.size();
    std::vector<CellSummary> cells(n);
    std::mutex log_mu;
    parallel_for(n, c.jobs, [&](std::size_t i) {
      const Algorithm algo = c.algorithms[i / c.seeds.size()];
      const std::uint64_t seed = c.seeds[i % c.seeds.size()];
      std::ofstream records;
      if (c.capture_records) {
        const auto path = dir / (std::string(to_string(algo)) + "_seed" + std::to_string(seed) + ".jsonl");
        records = open_output(path);
      }
      const MetricsSeries series = run_cell(c, factory, algo, seed, c.capture_records ? &records : nullptr);
      auto out = open_output(dir / cell_file_name(algo, seed));
      write_metrics(out, series);
      cells[i] = {final_window(series, c.final_fraction), convergence_step(series, c.convergence_threshold)};
      std::lock_guard<std::mutex> lock(log_mu);
      log.info(std::string(to_string(algo)) + " seed " + std::to_string(seed) + ": final r=+1 fraction " +
               format_real(cells[i].final.frac_pos));
    });

    auto out = open_output(dir / "summary.csv");
    out << "algorithm," << kSummaryColumns << '\n';
    for (std::size_t a = 0; a < c.algorithms.size(); ++a) {
      std::vector<CellSummary> mine(cells.begin() + static_cast<std::ptrdiff_t>(a * c.seeds.size()),
                                    cells.begin() + static_cast<std::ptrdiff_t>((a + 1) * c.seeds.size()));
      write_summary_row(out, summarize(to_string(c.algorithms[a]), mine, c.horizon));
    }
    return 0;
  } catch (const ConfigError& e) {
    log.error(e.what());
    return 1;
  } catch (const std::exception& e) {
    log.error(e.what());
    return 2;
  }
}

inline int cmd_run(const std::string& config_path, const Overrides& overrides, const CommandLog& log) {
  ExperimentConfig c;
  try {
    c = load_config(config_path);
    apply_overrides(c, overrides);
  } catch (const ConfigError& e) {
    log.error(e.what());
    return 1;
  }
  return run_experiment(c, log);
}

/// Replays a record file through the first configured algorithm with the
/// first seed. Writes the metrics CSV to `out_csv`.
inline int replay_records(const ExperimentConfig& c, std::istream& records, const std::string& out_csv,
                          const CommandLog& log) {
  try {
    const EnvironmentFactory factory(c.environment);
    const std::uint64_t seed = c.seeds.front();
    const RunSeeds seeds = run_seeds(seed);
    const AgentShape shape = shape_for(c, factory, seeds.env);
    AnyAgent agent = make_agent(c.algorithms.front(), c, shape, seeds.agent);
    if (c.algorithms.size() > 1)
      log.info("replay uses only the first algorithm, " + std::string(to_string(c.algorithms.front())));

    RecordReader reader(records, shape.layout.feedback_count);
    DriverOptions opt;
    opt.metrics_window = c.metrics_window;
    MetricsSeries series;
    try {
      series = std::visit([&](auto& a) { return run_off_policy(a, reader, opt); }, agent);
    } catch (const ParseError& e) {
      log.error(e.what());
      return 2;
    } catch (const RecordValidationError& e) {
      log.error(e.what());
      return 2;
    } catch (const RecordInvalid& e) {
      log.error(e.what());
      return 2;
    }
    const std::filesystem::path path(out_csv);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto out = open_output(path);
    write_metrics(out, series);
    log.info("replayed " + std::to_string(series.size()) + " records");
    return 0;
  } catch (const ConfigError& e) {
    log.error(e.what());
    return 1;
  } catch (const std::exception& e) {
    log.error(e.what());
    return 2;
  }
}

inline int cmd_replay(const std::string& records_path, const std::string& config_path,
                      const Overrides& overrides, const CommandLog& log) {
  ExperimentConfig c;
  try {
    c = load_config(config_path);
    apply_overrides(c, overrides);
  } catch (const ConfigError& e) {
    log.error(e.what());
    return 1;
  }
  std::ifstream in(records_path);
  if (!in) {
    log.error("cannot open record file '" + records_path + "'");
    return 2;
  }
  const std::string out = overrides.out ? *overrides.out
                                        : (std::filesystem::path(c.output_dir) / "replay.csv").string();
  return replay_records(c, in, out, log);
}

inline int run_sweep(const ExperimentConfig& c, const CommandLog& log) {
  try {
    if (c.environment.kind != EnvKind::Emission3)
      throw ConfigError("environment.type", "the dislike sweep runs on 'emission-3'");
    SweepOptions opt;
    opt.p_values = c.sweep_p;
    opt.runs = c.sweep_runs;
    opt.horizon = c.horizon;
    opt.seed = c.seeds.front();
    opt.settings = c.agent;
    opt.alpha_equals_p = c.sweep_alpha_equals_p;
    opt.convergence_threshold = c.convergence_threshold;
    opt.jobs = c.jobs;
    const SweepResult result = sweep_dislike_probability(opt);

    const std::filesystem::path dir(c.output_dir);
    std::filesystem::create_directories(dir);
    auto out = open_output(dir / "sweep.csv");
    out << "p," << kSummaryColumns << '\n';
    for (const auto& row : result.rows) {
      std::vector<CellSummary> cells;
      for (const auto& run : result.runs)
        if (run.p == row.p) cells.push_back({run.final, run.convergence});
      write_summary_row(out, summarize(format_real(row.p), cells, c.horizon));
      log.info("p=" + format_real(row.p) + ": mean convergence step " + format_real(row.convergence.mean));
    }
    auto runs = open_output(dir / "sweep_runs.csv");
    runs << "p,replicate,frac_neg,frac_zero,frac_pos,convergence_step\n";
    for (const auto& r : result.runs)
      runs << format_real(r.p) << ',' << r.replicate << ',' << format_real(r.final.frac_neg) << ','
           << format_real(r.final.frac_zero) << ',' << format_real(r.final.frac_pos) << ','
           << (r.convergence ? std::to_string(*r.convergence) : std::string()) << '\n';
    return 0;
  } catch (const ConfigError& e) {
    log.error(e.what());
    return 1;
  } catch (const std::exception& e) {
    log.error(e.what());
    return 2;
  }
}

inline int cmd_sweep(const std::string& config_path, const Overrides& overrides, const CommandLog& log) {
  ExperimentConfig c;
  try {
    c = load_config(config_path);
    apply_overrides(c, overrides);
  } catch (const ConfigError& e) {
    log.error(e.what());
    return 1;
  }
  return run_sweep(c, log);
}

}  // namespace igllab
