#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msrd/envs.hpp"
#include "msrd/numcore.hpp"
#include "msrd/policy.hpp"

namespace msrd {

using PolicySet = std::vector<Policy>;

enum class DiversityMode { kDiayn, kKl };

std::string to_string(DiversityMode m);
DiversityMode diversity_mode_from_string(const std::string& s);

/// q(z|s) over N skills plus the prior p(z).
struct SkillClassifier {
  MlpParams net;  // state -> N logits
  Vec prior;

  std::size_t num_skills() const { return net.output_dim(); }
  Vec log_posterior(std::span<const double> state) const;
  void validate() const;

  friend bool operator==(const SkillClassifier&, const SkillClassifier&) = default;
};

SkillClassifier make_classifier(std::size_t state_dim, std::size_t n_skills,
                                std::span<const std::size_t> hidden, Rng& rng);

/// log q(z|s) - log p(z).
double diayn_pseudo_reward(const SkillClassifier& cls,
                           std::span<const double> state, std::size_t z);

struct ClassifierLoss {
  double loss = 0.0;      // mean cross-entropy
  double accuracy = 0.0;  // argmax agreement on the batch
  MlpParams grad;
};

ClassifierLoss classifier_loss(const SkillClassifier& cls,
                               std::span<const Vec> states,
                               std::span<const std::size_t> labels);

/// One Adam step on the mean cross-entropy; returns the pre-step loss.
ClassifierLoss classifier_update(SkillClassifier& cls, AdamState& adam,
                                 std::span<const Vec> states,
                                 std::span<const std::size_t> labels);

/// KL(p || q) between the action distributions of two policies at `state`.
double policy_kl(const Policy& p, const Policy& q, std::span<const double> state);

/// sum_i KL(pi_k(.|s) || pi_i(.|s)) over all i (the i = k term is zero).
double kl_diversity_reward(std::span<const Policy> policies, std::size_t k,
                           std::span<const double> state);

/// Demonstrations grouped by strategy plus how they were produced.
struct DemoSet {
  std::string env_name;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  DiversityMode mode = DiversityMode::kKl;
  double diversity_weight = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::vector<Trajectory>> strategies;  // D^(i)

  std::size_t num_strategies() const { return strategies.size(); }
  /// Smallest per-strategy trajectory count.
  std::size_t min_per_strategy() const;
  void validate() const;

  friend bool operator==(const DemoSet&, const DemoSet&) = default;
};

struct DiversityConfig {
  DiversityMode mode = DiversityMode::kKl;
  std::size_t n_strategies = 4;
  double weight = 0.5;
  std::size_t iterations = 300;
  std::size_t batch_trajectories = 10;
  std::size_t demos_per_strategy = 10;
  std::vector<std::size_t> hidden{32, 32};
  PolicyUpdateConfig policy;
  /// KL mode: also follow the direct gradient of the bonus w.r.t. the
  /// strategy's own action distribution.
  bool kl_pathwise = true;
  double classifier_lr = 1e-3;
  std::size_t classifier_steps = 5;
};

struct HeterogeneousResult {
  PolicySet policies;
  std::optional<SkillClassifier> classifier;
  DemoSet demos;
};

/// Trains one policy per strategy on task reward + weight * diversity reward
/// and rolls each final policy out `demos_per_strategy` times. Diversity
/// rewards for strategy k read a snapshot of the other policies taken at the
/// start of the iteration.
HeterogeneousResult train_heterogeneous_policies(const EnvModel& env,
                                                 const DiversityConfig& cfg,
                                                 Rng& rng);

/// Fills each transition's `diversity` with the preference value of the
/// trajectory's strategy. KL mode needs `policies`, DIAYN mode `classifier`.
void annotate_ground_truth_strategy(Trajectory& traj, DiversityMode mode,
                                    std::span<const Policy> policies,
                                    const SkillClassifier* classifier);

}  // namespace msrd
