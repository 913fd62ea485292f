#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "msrd/envs.hpp"
#include "msrd/numcore.hpp"

namespace msrd {

enum class ActionSpace { kGaussian, kCategorical };

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

/// State -> action distribution. Gaussian policies carry a state-independent
/// log_std clamped to [kLogStdMin, kLogStdMax]; their mean is
/// mean_limit * tanh(net(s)) when mean_limit > 0, net(s) otherwise.
struct Policy {
  ActionSpace space = ActionSpace::kGaussian;
  MlpParams net;
  Vec log_std;
  double mean_limit = 0.0;

  std::size_t state_dim() const { return net.input_dim(); }
  /// Gaussian action dimension or number of categories.
  std::size_t action_dim() const { return net.output_dim(); }

  /// Gaussian mean or categorical logits.
  Vec dist_params(std::span<const double> state) const;
  double log_prob(std::span<const double> state,
                  std::span<const double> action) const;

  /// Parameter blocks: net blocks then log_std (Gaussian only).
  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;

  friend bool operator==(const Policy&, const Policy&) = default;
};

Policy make_policy(const EnvModel& env, std::span<const std::size_t> hidden,
                   Rng& rng, double init_log_std = 0.0);

struct ActionSample {
  Vec action;
  double log_prob = 0.0;
};

ActionSample policy_sample(const Policy& policy, std::span<const double> state,
                           Rng& rng);

struct Transition {
  Vec state;
  Vec action;
  double log_prob = 0.0;
  double task_reward = 0.0;
  std::optional<double> pseudo_reward;
  std::optional<double> diversity;  // recorded strategy preference value

  friend bool operator==(const Transition&, const Transition&) = default;
};

struct Trajectory {
  std::vector<Transition> steps;
  std::optional<std::size_t> strategy;

  std::size_t length() const { return steps.size(); }
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// One episode of `env.horizon()` steps. With probability `noise_eps` each
/// action is replaced by a uniform random action (no coin is drawn when
/// noise_eps is 0 or 1).
Trajectory rollout(const Policy& policy, const EnvModel& env, Rng& rng,
                   double noise_eps = 0.0);

std::vector<Trajectory> collect_rollouts(const Policy& policy,
                                         const EnvModel& env, std::size_t count,
                                         Rng& rng);

enum class RewardField { kTask, kPseudo };

/// Reward-to-go minus the batch mean reward-to-go at the same time index.
/// Throws ConfigError when the selected field is missing.
std::vector<Vec> compute_advantages(std::span<const Trajectory> batch,
                                    RewardField field, double gamma);

/// Discounted reward-to-go of one trajectory.
Vec reward_to_go(const Trajectory& traj, RewardField field, double gamma);

struct PolicyUpdateConfig {
  double lr = 1e-3;
  double clip = 0.2;
  double entropy_coef = 0.01;
  std::size_t epochs = 5;
  bool normalize_advantages = true;
};

/// Flattened (state, action, old log-prob, advantage) samples.
struct PolicyBatch {
  std::vector<const Transition*> steps;
  Vec advantages;
};

PolicyBatch make_policy_batch(std::span<const Trajectory> trajs,
                              std::span<const Vec> advantages);

/// Per-sample extra objective on the distribution parameters, maximized
/// alongside the surrogate: returns value and writes d value / d dist_params.
using DistObjective =
    std::function<double(const Transition&, std::span<const double> dist,
                         std::span<double> grad)>;

struct SurrogateResult {
  double loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  std::vector<Vec> grads;  // aligned with Policy::blocks()
};

/// loss = -mean(min(r*A, clip(r)*A)) - entropy_coef * mean entropy
///        - aux_coef * mean aux, with r = exp(logp - logp_old).
SurrogateResult surrogate_loss(const Policy& policy, const PolicyBatch& batch,
                               double clip, double entropy_coef,
                               const DistObjective& aux = {},
                               double aux_coef = 0.0);

/// Mean entropy of the policy over the batch states.
double mean_entropy(const Policy& policy, const PolicyBatch& batch);

struct PolicyLearner {
  Policy policy;
  AdamState adam;

  PolicyLearner() = default;
  PolicyLearner(Policy p, double lr);
  friend bool operator==(const PolicyLearner&, const PolicyLearner&) = default;
};

/// `epochs` full-batch Adam steps on the clipped surrogate. Throws
/// TrainingError with batch statistics on a non-finite loss.
SurrogateResult policy_update(PolicyLearner& learner,
                              std::span<const Trajectory> trajs,
                              std::span<const Vec> advantages,
                              const PolicyUpdateConfig& cfg,
                              const DistObjective& aux = {},
                              double aux_coef = 0.0);

double discounted_task_return(const Trajectory& traj, double gamma);
double mean_task_return(std::span<const Trajectory> trajs, double gamma);

}  // namespace msrd
