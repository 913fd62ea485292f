#include "msrd/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "msrd/errors.hpp"

namespace msrd {

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::uniform_int(std::size_t n) {
  if (n == 0) throw ConfigError("uniform_int: empty range");
  const std::uint64_t range = n;
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t x = 0;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % range);
}

Rng Rng::fork() {
  // splitmix64 finalizer decorrelates child seeds from the parent stream.
  std::uint64_t z = engine_() + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return Rng(z ^ (z >> 31));
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::set_state(const std::string& s) {
  std::istringstream is(s);
  is >> engine_;
  if (is.fail()) throw FormatError("rng state is not a valid mt19937_64 state");
}

// ---------------------------------------------------------------------------

std::size_t MlpParams::num_params() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.w.size() + l.b.size();
  return n;
}

void MlpParams::validate() const {
  if (layers.empty()) throw ConfigError("network has no layers");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const Layer& l = layers[k];
    if (l.in == 0 || l.out == 0)
      throw ConfigError("layer " + std::to_string(k) + " has a zero dimension");
    if (l.w.size() != l.in * l.out || l.b.size() != l.out)
      throw ConfigError("layer " + std::to_string(k) +
                        " storage does not match its dimensions");
    if (k > 0 && layers[k - 1].out != l.in)
      throw ConfigError("layer " + std::to_string(k) + " input dim " +
                        std::to_string(l.in) + " does not match previous output " +
                        std::to_string(layers[k - 1].out));
    if (!all_finite(l.w) || !all_finite(l.b))
      throw ConfigError("layer " + std::to_string(k) + " has non-finite entries");
  }
}

MlpParams MlpParams::zeros_like() const {
  MlpParams z = *this;
  z.set_zero();
  return z;
}

void MlpParams::set_zero() {
  for (auto& l : layers) {
    std::fill(l.w.begin(), l.w.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  }
}

void MlpParams::add_scaled(const MlpParams& other, double scale) {
  for (std::size_t k = 0; k < layers.size(); ++k) {
    auto& l = layers[k];
    const auto& o = other.layers[k];
    for (std::size_t j = 0; j < l.w.size(); ++j) l.w[j] += scale * o.w[j];
    for (std::size_t j = 0; j < l.b.size(); ++j) l.b[j] += scale * o.b[j];
  }
}

std::vector<std::span<double>> MlpParams::blocks() {
  std::vector<std::span<double>> out;
  for (auto& l : layers) {
    out.emplace_back(l.w);
    out.emplace_back(l.b);
  }
  return out;
}

std::vector<std::span<const double>> MlpParams::blocks() const {
  std::vector<std::span<const double>> out;
  for (const auto& l : layers) {
    out.emplace_back(l.w);
    out.emplace_back(l.b);
  }
  return out;
}

MlpParams make_mlp(std::span<const std::size_t> sizes, Rng& rng,
                   double final_scale) {
  if (sizes.size() < 2) throw ConfigError("network needs at least two sizes");
  MlpParams p;
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    Layer l;
    l.in = sizes[k];
    l.out = sizes[k + 1];
    if (l.in == 0 || l.out == 0) throw ConfigError("zero layer width");
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
    const double scale = (k + 2 == sizes.size()) ? final_scale : 1.0;
    l.w.resize(l.in * l.out);
    for (auto& w : l.w) w = scale * rng.uniform(-bound, bound);
    l.b.assign(l.out, 0.0);
    p.layers.push_back(std::move(l));
  }
  return p;
}

namespace {

void check_input(const MlpParams& params, std::size_t dim) {
  if (params.layers.empty()) throw ConfigError("network has no layers");
  if (dim != params.input_dim())
    throw ConfigError("input dim " + std::to_string(dim) +
                      " does not match network input " +
                      std::to_string(params.input_dim()));
}

void affine(const Layer& l, std::span<const double> x, Vec& y) {
  y.resize(l.out);
  for (std::size_t r = 0; r < l.out; ++r) {
    const double* row = l.w.data() + r * l.in;
    double acc = l.b[r];
    for (std::size_t c = 0; c < l.in; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

}  // namespace

Vec mlp_forward(const MlpParams& params, std::span<const double> input) {
  check_input(params, input.size());
  thread_local Vec cur, next;
  cur.assign(input.begin(), input.end());
  const std::size_t n = params.layers.size();
  for (std::size_t k = 0; k < n; ++k) {
    affine(params.layers[k], cur, next);
    if (k + 1 < n && params.hidden == Activation::kTanh)
      for (auto& v : next) v = std::tanh(v);
    std::swap(cur, next);
  }
  return cur;
}

Vec mlp_forward(const MlpParams& params, std::span<const double> input,
                MlpCache& cache) {
  check_input(params, input.size());
  const std::size_t n = params.layers.size();
  cache.acts.resize(n + 1);
  cache.acts[0].assign(input.begin(), input.end());
  for (std::size_t k = 0; k < n; ++k) {
    affine(params.layers[k], cache.acts[k], cache.acts[k + 1]);
    if (k + 1 < n && params.hidden == Activation::kTanh)
      for (auto& v : cache.acts[k + 1]) v = std::tanh(v);
  }
  return cache.acts[n];
}

void mlp_backward_accumulate(const MlpParams& params, const MlpCache& cache,
                             std::span<const double> upstream, MlpParams& grad,
                             Vec* input_grad) {
  const std::size_t n = params.layers.size();
  if (cache.acts.size() != n + 1)
    throw ConfigError("backward pass without a matching forward cache");
  if (upstream.size() != params.output_dim())
    throw ConfigError("upstream gradient dim " + std::to_string(upstream.size()) +
                      " does not match network output " +
                      std::to_string(params.output_dim()));
  if (grad.layers.size() != n) throw ConfigError("gradient shape mismatch");

  Vec delta(upstream.begin(), upstream.end());
  Vec prev;
  for (std::size_t k = n; k-- > 0;) {
    const Layer& l = params.layers[k];
    Layer& g = grad.layers[k];
    const Vec& x = cache.acts[k];
    for (std::size_t r = 0; r < l.out; ++r) {
      const double d = delta[r];
      g.b[r] += d;
      if (d == 0.0) continue;
      double* grow = g.w.data() + r * l.in;
      for (std::size_t c = 0; c < l.in; ++c) grow[c] += d * x[c];
    }
    if (k == 0 && input_grad == nullptr) break;
    prev.assign(l.in, 0.0);
    for (std::size_t r = 0; r < l.out; ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      const double* row = l.w.data() + r * l.in;
      for (std::size_t c = 0; c < l.in; ++c) prev[c] += row[c] * d;
    }
    if (k > 0 && params.hidden == Activation::kTanh)
      for (std::size_t c = 0; c < l.in; ++c) prev[c] *= 1.0 - x[c] * x[c];
    std::swap(delta, prev);
  }
  if (input_grad != nullptr) *input_grad = delta;
}

MlpGradient mlp_backward(const MlpParams& params, std::span<const double> input,
                         std::span<const double> upstream) {
  MlpCache cache;
  mlp_forward(params, input, cache);
  MlpGradient out{params.zeros_like(), {}};
  mlp_backward_accumulate(params, cache, upstream, out.params, &out.input);
  return out;
}

// ---------------------------------------------------------------------------

AdamState::AdamState(AdamConfig cfg,
                     std::span<const std::span<const double>> shapes)
    : config(cfg) {
  for (const auto& s : shapes) {
    m.emplace_back(s.size(), 0.0);
    v.emplace_back(s.size(), 0.0);
  }
}

AdamState::AdamState(AdamConfig cfg, const MlpParams& like)
    : AdamState(cfg, like.blocks()) {}

void adam_step(AdamState& state, std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ConfigError("adam: block count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].size() != grads[k].size() ||
        params[k].size() != state.m[k].size())
      throw ConfigError("adam: block " + std::to_string(k) + " shape mismatch");
    if (!all_finite(grads[k]))
      throw TrainingError("adam: non-finite gradient in parameter block " +
                          std::to_string(k) + " (layer " +
                          std::to_string(k / 2) + (k % 2 ? " bias)" : " weight)"));
  }
  const auto& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k];
    auto g = grads[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

void adam_step(AdamState& state, MlpParams& params, const MlpParams& grads) {
  auto p = params.blocks();
  auto g = grads.blocks();
  adam_step(state, p, g);
}

// ---------------------------------------------------------------------------

double gaussian_log_prob(std::span<const double> mean,
                         std::span<const double> log_std,
                         std::span<const double> action) {
  if (mean.size() != log_std.size() || mean.size() != action.size())
    throw ConfigError("gaussian_log_prob: dimension mismatch");
  double lp = 0.0;
  for (std::size_t d = 0; d < mean.size(); ++d) {
    const double z = (action[d] - mean[d]) * std::exp(-log_std[d]);
    lp += -0.5 * z * z - log_std[d] - 0.5 * kLog2Pi;
  }
  return lp;
}

double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}

Vec log_softmax(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  Vec out(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j) out[j] = logits[j] - lse;
  return out;
}

Vec softmax(std::span<const double> logits) {
  Vec out = log_softmax(logits);
  for (auto& v : out) v = std::exp(v);
  return out;
}

double categorical_log_prob(std::span<const double> logits, std::size_t index) {
  if (index >= logits.size())
    throw ConfigError("categorical index " + std::to_string(index) +
                      " out of range for " + std::to_string(logits.size()) +
                      " categories");
  return logits[index] - log_sum_exp(logits);
}

double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return pairwise_sum(xs) / static_cast<double>(xs.size());
}

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(),
                     [](double x) { return std::isfinite(x); });
}

}  // namespace msrd
