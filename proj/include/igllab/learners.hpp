// learners.hpp
// Online multinomial logistic regression trained with weighted cross-entropy
// and Adam. The same model class backs the contextual-bandit scorer and the
// inverse-kinematics action-posterior estimator.
//
// Score path, per class c:
//   linear:   s_c = W_c . x + b_c                      (hidden_width == 0)
//   factored: s_c = V_c . (H x) + b_c                  (hidden_width  > 0, identity activation)
//   gated:    z_c = g(x) * s_c,  g(x) = sum_r (E_r . x_left)(F_r . x_right)
// The optional bilinear gate multiplies the class scores by an inner product
// of two learned embeddings of disjoint one-hot blocks of the input (for
// example a user-id block and a feedback-signal block). Without it the model is
// log-linear in x.
//
// All parameters live in one flat buffer so Adam and checkpointing are uniform.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "igllab/core.hpp"

namespace igllab {

class NonFiniteGradient : public Error {
 public:
  NonFiniteGradient() : Error("NonFiniteGradient: gradient has a NaN/Inf entry; check feature scales") {}
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// Bilinear gate over two reserved one-hot blocks of the input.
struct BilinearGate {
  std::uint32_t left_offset = 0;
  std::uint32_t left_size = 0;
  std::uint32_t right_offset = 0;
  std::uint32_t right_size = 0;
  std::uint32_t rank = 2;

  friend bool operator==(const BilinearGate&, const BilinearGate&) = default;
};

struct ModelConfig {
  std::uint32_t input_dim = 0;
  std::uint32_t classes = 2;
  double learning_rate = 2.5e-3;
  std::uint32_t batch_size = 1;
  std::uint32_t hidden_width = 512;
  double init_scale = 0.2;  // Cauchy scale of the first layer; std-dev of gate embeddings
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::optional<BilinearGate> gate;
  std::uint64_t seed = 0;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct WeightedExample {
  FeatureVector input;
  std::uint32_t class_count = 0;
  std::uint32_t label = 0;
  double weight = 1.0;
};

class OnlineSoftmaxModel {
 public:
  OnlineSoftmaxModel() = default;

  explicit OnlineSoftmaxModel(const ModelConfig& config) : config_(config) {
    if (config_.classes < 1) throw Error("ModelConfig: classes must be positive");
    if (config_.batch_size < 1) throw Error("ModelConfig: batch_size must be positive");
    if (config_.gate) {
      const auto& g = *config_.gate;
      if (g.rank < 1 || g.left_offset + g.left_size > config_.input_dim ||
          g.right_offset + g.right_size > config_.input_dim)
        throw Error("ModelConfig: gate blocks must lie inside the input");
    }
    layout();
    params_.assign(param_count_, 0.0);
    m_.assign(param_count_, 0.0);
    v_.assign(param_count_, 0.0);
    grad_.assign(param_count_, 0.0);

    std::mt19937_64 rng(config_.seed);
    std::cauchy_distribution<double> cauchy(0.0, config_.init_scale);
    if (config_.hidden_width > 0)
      for (std::size_t i = 0; i < hidden_size(); ++i) params_[first_offset_ + i] = cauchy(rng);
    // Gaussian rather than Cauchy: heavy-tailed embeddings stall the escape
    // from the all-zero saddle of the gated product.
    if (config_.gate) {
      std::normal_distribution<double> gauss(0.0, config_.init_scale);
      for (std::size_t i = gate_offset_; i < param_count_; ++i) params_[i] = gauss(rng);
    }
  }

  const ModelConfig& config() const noexcept { return config_; }
  std::uint32_t classes() const noexcept { return config_.classes; }
  std::uint64_t steps() const noexcept { return steps_; }
  std::uint32_t pending() const noexcept { return pending_; }

  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> mutable_parameters() noexcept { return params_; }

  /// Softmax over the class scores.
  std::vector<double> predict(const FeatureVector& input, std::uint32_t class_count) const {
    check_input(input, class_count);
    return forward(input).probs;
  }

  /// Weighted cross-entropy of one example.
  double loss(const WeightedExample& ex) const {
    check_example(ex);
    const Forward f = forward(ex.input);
    return -ex.weight * std::log(f.probs[ex.label]);
  }

  /// Analytic gradient of loss(ex) with respect to the flat parameters.
  std::vector<double> gradient(const WeightedExample& ex) const {
    check_example(ex);
    std::vector<double> g(param_count_, 0.0);
    accumulate(ex, g);
    return g;
  }

  /// Accumulates the weighted gradient and takes an Adam step once batch_size
  /// examples are pending. Zero-weight examples are ignored entirely.
  void learn(const WeightedExample& ex) {
    check_example(ex);
    if (ex.weight == 0.0) return;
    accumulate(ex, grad_);
    if (++pending_ >= config_.batch_size) step();
  }

  /// Accumulates several examples as one logical example: their gradients are
  /// summed and they count once toward the batch.
  void learn_group(std::span<const WeightedExample> group) {
    bool any = false;
    for (const auto& ex : group) {
      check_example(ex);
      if (ex.weight == 0.0) continue;
      accumulate(ex, grad_);
      any = true;
    }
    if (any && ++pending_ >= config_.batch_size) step();
  }

  /// Applies a partial batch, if any.
  void flush() {
    if (pending_ > 0) step();
  }

  // Binary checkpoint, see README "Model checkpoint format".
  void save(std::ostream& out) const {
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, config_.input_dim);
    put<std::uint32_t>(out, config_.classes);
    put<std::uint32_t>(out, config_.batch_size);
    put<std::uint32_t>(out, config_.hidden_width);
    put<double>(out, config_.learning_rate);
    put<double>(out, config_.init_scale);
    put<double>(out, config_.beta1);
    put<double>(out, config_.beta2);
    put<double>(out, config_.epsilon);
    put<std::uint64_t>(out, config_.seed);
    put<std::uint32_t>(out, config_.gate ? 1u : 0u);
    const BilinearGate g = config_.gate.value_or(BilinearGate{});
    put<std::uint32_t>(out, g.left_offset);
    put<std::uint32_t>(out, g.left_size);
    put<std::uint32_t>(out, g.right_offset);
    put<std::uint32_t>(out, g.right_size);
    put<std::uint32_t>(out, g.rank);
    put<std::uint64_t>(out, steps_);
    put<std::uint32_t>(out, pending_);
    put<std::uint64_t>(out, param_count_);
    for (const auto* buf : {&params_, &m_, &v_, &grad_})
      out.write(reinterpret_cast<const char*>(buf->data()),
                static_cast<std::streamsize>(buf->size() * sizeof(double)));
    if (!out) throw CheckpointError("checkpoint write failed");
  }

  static OnlineSoftmaxModel load(std::istream& in) {
    char magic[sizeof(kMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
      throw CheckpointError("not an igllab model checkpoint");
    if (get<std::uint32_t>(in) != kVersion) throw CheckpointError("unsupported checkpoint version");
    ModelConfig c;
    c.input_dim = get<std::uint32_t>(in);
    c.classes = get<std::uint32_t>(in);
    c.batch_size = get<std::uint32_t>(in);
    c.hidden_width = get<std::uint32_t>(in);
    c.learning_rate = get<double>(in);
    c.init_scale = get<double>(in);
    c.beta1 = get<double>(in);
    c.beta2 = get<double>(in);
    c.epsilon = get<double>(in);
    c.seed = get<std::uint64_t>(in);
    const bool has_gate = get<std::uint32_t>(in) != 0;
    BilinearGate g;
    g.left_offset = get<std::uint32_t>(in);
    g.left_size = get<std::uint32_t>(in);
    g.right_offset = get<std::uint32_t>(in);
    g.right_size = get<std::uint32_t>(in);
    g.rank = get<std::uint32_t>(in);
    if (has_gate) c.gate = g;
    OnlineSoftmaxModel model(c);
    model.steps_ = get<std::uint64_t>(in);
    model.pending_ = get<std::uint32_t>(in);
    if (get<std::uint64_t>(in) != model.param_count_)
      throw CheckpointError("checkpoint parameter count does not match its config");
    for (auto* buf : {&model.params_, &model.m_, &model.v_, &model.grad_}) {
      in.read(reinterpret_cast<char*>(buf->data()),
              static_cast<std::streamsize>(buf->size() * sizeof(double)));
      if (!in) throw CheckpointError("truncated checkpoint");
    }
    return model;
  }

  friend bool operator==(const OnlineSoftmaxModel& a, const OnlineSoftmaxModel& b) {
    return a.config_ == b.config_ && a.steps_ == b.steps_ && a.pending_ == b.pending_ &&
           a.params_ == b.params_ && a.m_ == b.m_ && a.v_ == b.v_ && a.grad_ == b.grad_;
  }

 private:
  static constexpr char kMagic[8] = {'I', 'G', 'L', 'M', 'O', 'D', 'E', 'L'};
  static constexpr std::uint32_t kVersion = 1;

  struct Forward {
    std::vector<double> hidden;  // H x, factored path only
    std::vector<double> scores;  // s
    std::vector<double> left;    // E x_left, per rank
    std::vector<double> right;   // F x_right, per rank
    double gate = 1.0;
    std::vector<double> probs;
  };

  std::size_t hidden_size() const noexcept {
    return std::size_t{config_.hidden_width} * config_.input_dim;
  }

  void layout() {
    const std::size_t c = config_.classes;
    first_offset_ = 0;
    if (config_.hidden_width == 0) {
      output_offset_ = 0;
      bias_offset_ = c * config_.input_dim;
    } else {
      output_offset_ = hidden_size();
      bias_offset_ = output_offset_ + c * config_.hidden_width;
    }
    gate_offset_ = bias_offset_ + c;
    param_count_ = gate_offset_;
    if (config_.gate) {
      const auto& g = *config_.gate;
      right_emb_offset_ = gate_offset_ + std::size_t{g.rank} * g.left_size;
      param_count_ = right_emb_offset_ + std::size_t{g.rank} * g.right_size;
    }
  }

  void check_input(const FeatureVector& input, std::uint32_t class_count) const {
    if (class_count != config_.classes)
      throw ValidationError(Invariant::DimensionMismatch,
                            "model has " + std::to_string(config_.classes) + " classes, asked for " +
                                std::to_string(class_count));
    if (!input.empty() && input.entries().back().first >= config_.input_dim)
      throw ValidationError(Invariant::DimensionMismatch,
                            "feature index " + std::to_string(input.entries().back().first) +
                                " exceeds model input dimension " +
                                std::to_string(config_.input_dim));
  }

  void check_example(const WeightedExample& ex) const {
    check_input(ex.input, ex.class_count);
    if (ex.label >= ex.class_count)
      throw ValidationError(Invariant::IndexOutOfRange, "label outside class range");
    if (!std::isfinite(ex.weight) || ex.weight < 0.0)
      throw ValidationError(Invariant::InvalidFeature, "example weight must be finite and >= 0");
  }

  Forward forward(const FeatureVector& x) const {
    const std::uint32_t c = config_.classes;
    const std::uint32_t d = config_.input_dim;
    Forward f;
    f.scores.assign(params_.begin() + static_cast<std::ptrdiff_t>(bias_offset_),
                    params_.begin() + static_cast<std::ptrdiff_t>(bias_offset_ + c));
    if (config_.hidden_width == 0) {
      for (std::uint32_t k = 0; k < c; ++k) {
        const double* w = &params_[output_offset_ + std::size_t{k} * d];
        double acc = 0.0;
        for (const auto& [i, val] : x.entries()) acc += w[i] * val;
        f.scores[k] += acc;
      }
    } else {
      const std::uint32_t h = config_.hidden_width;
      f.hidden.assign(h, 0.0);
      for (std::uint32_t j = 0; j < h; ++j) {
        const double* row = &params_[first_offset_ + std::size_t{j} * d];
        double acc = 0.0;
        for (const auto& [i, val] : x.entries()) acc += row[i] * val;
        f.hidden[j] = acc;
      }
      for (std::uint32_t k = 0; k < c; ++k) {
        const double* v = &params_[output_offset_ + std::size_t{k} * h];
        double acc = 0.0;
        for (std::uint32_t j = 0; j < h; ++j) acc += v[j] * f.hidden[j];
        f.scores[k] += acc;
      }
    }

    std::vector<double> z = f.scores;
    if (config_.gate) {
      const auto& g = *config_.gate;
      f.left.assign(g.rank, 0.0);
      f.right.assign(g.rank, 0.0);
      for (const auto& [i, val] : x.entries()) {
        if (i >= g.left_offset && i < g.left_offset + g.left_size)
          for (std::uint32_t r = 0; r < g.rank; ++r)
            f.left[r] += val * params_[left_index(r, i - g.left_offset)];
        if (i >= g.right_offset && i < g.right_offset + g.right_size)
          for (std::uint32_t r = 0; r < g.rank; ++r)
            f.right[r] += val * params_[right_index(r, i - g.right_offset)];
      }
      f.gate = 0.0;
      for (std::uint32_t r = 0; r < g.rank; ++r) f.gate += f.left[r] * f.right[r];
      for (auto& zk : z) zk *= f.gate;
    }

    double zmax = -std::numeric_limits<double>::infinity();
    for (double zk : z) zmax = std::max(zmax, zk);
    f.probs.resize(c);
    double total = 0.0;
    for (std::uint32_t k = 0; k < c; ++k) {
      f.probs[k] = std::exp(z[k] - zmax);
      total += f.probs[k];
    }
    for (auto& p : f.probs) p /= total;
    return f;
  }

  std::size_t left_index(std::uint32_t r, std::uint32_t i) const noexcept {
    return gate_offset_ + std::size_t{r} * config_.gate->left_size + i;
  }
  std::size_t right_index(std::uint32_t r, std::uint32_t j) const noexcept {
    return right_emb_offset_ + std::size_t{r} * config_.gate->right_size + j;
  }

  void accumulate(const WeightedExample& ex, std::vector<double>& g) const {
    const Forward f = forward(ex.input);
    const std::uint32_t c = config_.classes;
    const std::uint32_t d = config_.input_dim;
    const auto& x = ex.input.entries();

    std::vector<double> dz(c);
    for (std::uint32_t k = 0; k < c; ++k)
      dz[k] = ex.weight * (f.probs[k] - (k == ex.label ? 1.0 : 0.0));

    std::vector<double> ds = dz;
    double dgate = 0.0;
    if (config_.gate) {
      for (std::uint32_t k = 0; k < c; ++k) {
        dgate += dz[k] * f.scores[k];
        ds[k] = dz[k] * f.gate;
      }
    }
    for (double v : ds)
      if (!std::isfinite(v)) throw NonFiniteGradient();
    if (!std::isfinite(dgate)) throw NonFiniteGradient();

    for (std::uint32_t k = 0; k < c; ++k) g[bias_offset_ + k] += ds[k];
    if (config_.hidden_width == 0) {
      for (std::uint32_t k = 0; k < c; ++k) {
        double* row = &g[output_offset_ + std::size_t{k} * d];
        for (const auto& [i, val] : x) row[i] += ds[k] * val;
      }
    } else {
      const std::uint32_t h = config_.hidden_width;
      std::vector<double> dh(h, 0.0);
      for (std::uint32_t k = 0; k < c; ++k) {
        const double* v = &params_[output_offset_ + std::size_t{k} * h];
        double* gv = &g[output_offset_ + std::size_t{k} * h];
        for (std::uint32_t j = 0; j < h; ++j) {
          gv[j] += ds[k] * f.hidden[j];
          dh[j] += ds[k] * v[j];
        }
      }
      for (std::uint32_t j = 0; j < h; ++j) {
        double* row = &g[first_offset_ + std::size_t{j} * d];
        for (const auto& [i, val] : x) row[i] += dh[j] * val;
      }
    }

    if (config_.gate) {
      const auto& gt = *config_.gate;
      for (const auto& [i, val] : x) {
        if (i >= gt.left_offset && i < gt.left_offset + gt.left_size)
          for (std::uint32_t r = 0; r < gt.rank; ++r)
            g[left_index(r, i - gt.left_offset)] += dgate * val * f.right[r];
        if (i >= gt.right_offset && i < gt.right_offset + gt.right_size)
          for (std::uint32_t r = 0; r < gt.rank; ++r)
            g[right_index(r, i - gt.right_offset)] += dgate * val * f.left[r];
      }
    }
  }

  void step() {
    const double scale = 1.0 / static_cast<double>(pending_);
    for (double gi : grad_)
      if (!std::isfinite(gi)) {
        std::fill(grad_.begin(), grad_.end(), 0.0);
        pending_ = 0;
        throw NonFiniteGradient();
      }
    ++steps_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    const double lr = config_.learning_rate;
    for (std::size_t i = 0; i < param_count_; ++i) {
      const double gi = grad_[i] * scale;
      m_[i] = b1 * m_[i] + (1.0 - b1) * gi;
      v_[i] = b2 * v_[i] + (1.0 - b2) * gi * gi;
      const double mhat = m_[i] / correction1;
      const double vhat = v_[i] / correction2;
      params_[i] -= lr * mhat / (std::sqrt(vhat) + config_.epsilon);
      grad_[i] = 0.0;
    }
    pending_ = 0;
  }

  template <typename T>
  static void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  template <typename T>
  static T get(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw CheckpointError("truncated checkpoint");
    return value;
  }

  ModelConfig config_;
  std::size_t first_offset_ = 0;
  std::size_t output_offset_ = 0;
  std::size_t bias_offset_ = 0;
  std::size_t gate_offset_ = 0;
  std::size_t right_emb_offset_ = 0;
  std::size_t param_count_ = 0;
  std::vector<double> params_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::vector<double> grad_;
  std::uint64_t steps_ = 0;
  std::uint32_t pending_ = 0;
};

}  // namespace igllab
