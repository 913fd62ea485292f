#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace msrd {

using Vec = std::vector<double>;

// ---------------------------------------------------------------------------
// Deterministic randomness
// ---------------------------------------------------------------------------

/// Seedable generator. The engine is mt19937_64 (bit-exact by standard); the
/// distributions are implemented here because the <random> ones are
/// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller, one draw per call, no caching).
  double normal();
  /// Uniform integer in [0, n).
  std::size_t uniform_int(std::size_t n);
  /// Independent child stream. Advances this generator by one draw.
  Rng fork();

  std::string state() const;
  void set_state(const std::string& s);

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.engine_ == b.engine_;
  }

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Dense networks
// ---------------------------------------------------------------------------

enum class Activation : std::uint8_t { kIdentity = 0, kTanh = 1 };

struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  Vec w;  // out x in, row-major
  Vec b;  // out

  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Fully connected net. Hidden layers use `hidden`, the last layer is linear.
struct MlpParams {
  std::vector<Layer> layers;
  Activation hidden = Activation::kTanh;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in; }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out; }
  std::size_t num_params() const;

  /// Throws ConfigError if dimensions do not chain or entries are non-finite.
  void validate() const;

  /// Zero-filled copy with identical shape (gradient container).
  MlpParams zeros_like() const;
  void set_zero();
  void add_scaled(const MlpParams& other, double scale);

  /// Parameter blocks in a fixed order: w0, b0, w1, b1, ...
  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// sizes = {in, h1, ..., out}. Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
/// zero biases; the final layer's weights are multiplied by `final_scale`.
MlpParams make_mlp(std::span<const std::size_t> sizes, Rng& rng,
                   double final_scale = 1.0);

/// Per-layer inputs recorded by a forward pass; acts[k] feeds layer k and
/// acts.back() is the network output.
struct MlpCache {
  std::vector<Vec> acts;
};

Vec mlp_forward(const MlpParams& params, std::span<const double> input);
Vec mlp_forward(const MlpParams& params, std::span<const double> input,
                MlpCache& cache);

/// Accumulates d<upstream, output>/d(params) into `grad` and, when non-null,
/// writes d<upstream, output>/d(input) into `input_grad`.
void mlp_backward_accumulate(const MlpParams& params, const MlpCache& cache,
                             std::span<const double> upstream, MlpParams& grad,
                             Vec* input_grad = nullptr);

struct MlpGradient {
  MlpParams params;
  Vec input;
};

MlpGradient mlp_backward(const MlpParams& params, std::span<const double> input,
                         std::span<const double> upstream);

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

/// Moment accumulators for a list of parameter blocks.
struct AdamState {
  AdamConfig config;
  std::vector<Vec> m;
  std::vector<Vec> v;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(AdamConfig cfg, std::span<const std::span<const double>> shapes);
  AdamState(AdamConfig cfg, const MlpParams& like);

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Bias-corrected Adam update in place. Throws TrainingError naming the
/// first block holding a non-finite gradient; parameters are untouched then.
void adam_step(AdamState& state, std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads);
void adam_step(AdamState& state, MlpParams& params, const MlpParams& grads);

// ---------------------------------------------------------------------------
// Densities
// ---------------------------------------------------------------------------

inline constexpr double kLog2Pi = 1.8378770664093453;

double gaussian_log_prob(std::span<const double> mean,
                         std::span<const double> log_std,
                         std::span<const double> action);

double log_sum_exp(std::span<const double> xs);
Vec log_softmax(std::span<const double> logits);
Vec softmax(std::span<const double> logits);
double categorical_log_prob(std::span<const double> logits, std::size_t index);

/// Pairwise summation; result depends only on the multiset order given.
double pairwise_sum(std::span<const double> xs);
double mean(std::span<const double> xs);

bool all_finite(std::span<const double> xs);

}  // namespace msrd
