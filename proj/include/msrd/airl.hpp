#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "msrd/envs.hpp"
#include "msrd/numcore.hpp"
#include "msrd/policy.hpp"

namespace msrd {

/// f(s, a): scalar reward over the concatenated state and action.
struct RewardNet {
  MlpParams net;

  double operator()(std::span<const double> state,
                    std::span<const double> action) const;
  double operator()(std::span<const double> input) const;

  friend bool operator==(const RewardNet&, const RewardNet&) = default;
};

/// Final layer starts near zero so freshly initialized rewards are ~0.
RewardNet make_reward_net(std::size_t state_dim, std::size_t action_dim,
                          std::span<const std::size_t> hidden, Rng& rng,
                          double final_scale = 0.01);

Vec concat(std::span<const double> a, std::span<const double> b);

/// exp(f) / (exp(f) + pi(a|s)) = sigmoid(f - log_pi), evaluated without
/// overflow.
double discriminator_prob(double f_value, double log_pi);
double log_sigmoid(double x);

/// One discriminator input: s (+) a and the current policy's log pi(a|s).
struct DiscSample {
  Vec input;
  double log_pi = 0.0;
};

/// Cross-entropy -mean log D(expert) - mean log(1 - D(gen)) on given f values
/// and its derivatives w.r.t. each f.
struct CrossEntropyTerms {
  double loss = 0.0;
  Vec d_expert;
  Vec d_gen;
};

CrossEntropyTerms discriminator_cross_entropy(std::span<const double> f_expert,
                                              std::span<const double> lp_expert,
                                              std::span<const double> f_gen,
                                              std::span<const double> lp_gen);

struct DiscriminatorLoss {
  double loss = 0.0;
  MlpParams grad;
};

DiscriminatorLoss airl_discriminator_loss(const RewardNet& reward,
                                          std::span<const DiscSample> expert,
                                          std::span<const DiscSample> gen);

/// Uniform sampling (with replacement) of transitions from trajectory sets.
class TransitionPool {
 public:
  explicit TransitionPool(std::span<const Trajectory> trajs);
  explicit TransitionPool(std::span<const Trajectory* const> trajs);
  std::size_t size() const { return steps_.size(); }
  const Transition& sample(Rng& rng) const;
  std::span<const Transition* const> all() const { return steps_; }

 private:
  std::vector<const Transition*> steps_;
};

/// `count` distinct trajectories (count <= size) in random order.
std::vector<const Trajectory*> sample_trajectories(std::span<const Trajectory> from,
                                                   std::size_t count, Rng& rng);

/// Expert samples carry the current policy's log-density at the expert (s, a);
/// generated samples carry the log-density recorded at collection.
std::vector<DiscSample> expert_samples(const TransitionPool& pool,
                                       const Policy& policy, std::size_t count,
                                       Rng& rng);
std::vector<DiscSample> generated_samples(const TransitionPool& pool,
                                          std::size_t count, Rng& rng);

/// Reservoir of past generator trajectories, uniform over everything offered
/// so far. Keeps early off-distribution rollouts visible to the discriminator.
struct GeneratorReplay {
  std::size_t capacity = 0;
  std::size_t seen = 0;
  std::vector<Trajectory> items;

  void offer(std::span<const Trajectory> trajs, Rng& rng);

  friend bool operator==(const GeneratorReplay&, const GeneratorReplay&) = default;
};

/// Generated samples drawn uniformly from the current rollouts plus the
/// replay, each with the log-density recorded by the policy that produced it.
/// An empty replay reduces to generated_samples on the current rollouts.
std::vector<DiscSample> replay_samples(std::span<const Trajectory> current,
                                       const GeneratorReplay& replay, std::size_t count,
                                       Rng& rng);

struct AdversarialConfig {
  std::size_t iterations = 200;
  std::size_t k_rollouts = 5;
  std::size_t batch_size = 256;
  std::size_t disc_steps = 1;
  double reward_lr = 1e-3;
  std::vector<std::size_t> hidden{32, 32};
  std::vector<std::size_t> policy_hidden{32, 32};
  std::size_t replay_trajectories = 0;
  PolicyUpdateConfig policy;
};

struct TrainLogRow {
  std::size_t iteration = 0;
  std::size_t strategy = 0;
  double disc_loss = 0.0;
  double regularizer = 0.0;
  double mean_pseudo_reward = 0.0;
  double mean_task_return = 0.0;
};

struct AirlResult {
  RewardNet reward;
  Policy policy;
  std::vector<TrainLogRow> log;
};

/// Alternates one discriminator phase (`disc_steps` Adam steps) with one
/// policy update on f(s, a) as the pseudo-reward, for `iterations` rounds.
AirlResult airl_train(const EnvModel& env, std::span<const Trajectory> demos,
                      const AdversarialConfig& cfg, Rng& rng);

}  // namespace msrd
