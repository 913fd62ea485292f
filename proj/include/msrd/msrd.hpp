#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "msrd/airl.hpp"
#include "msrd/diversity.hpp"
#include "msrd/envs.hpp"
#include "msrd/numcore.hpp"
#include "msrd/policy.hpp"

namespace msrd {

/// kTwoColumn: R_i = R_0 + alpha_i * residual_i.
/// kVanilla:   R_i is a standalone net pulled toward R_0 by an L2 penalty
///             (distillation ablation); alpha is unused.
enum class RewardArchitecture { kTwoColumn, kVanilla };

enum class RegSource { kExpert, kGenerated, kBoth };

std::string to_string(RewardArchitecture a);
std::string to_string(RegSource r);
RegSource reg_source_from_string(const std::string& s);

struct MsrdRewardModel {
  RewardArchitecture arch = RewardArchitecture::kTwoColumn;
  RewardNet task;
  std::vector<RewardNet> strategy;  // residuals, or standalone nets (vanilla)
  Vec alpha;

  std::size_t num_strategies() const { return strategy.size(); }
  void validate() const;

  double task_reward(std::span<const double> state,
                     std::span<const double> action) const;
  /// Strategy-only reward: the residual, or R_i - R_0 for vanilla models.
  double strategy_reward(std::size_t i, std::span<const double> state,
                         std::span<const double> action) const;

  friend bool operator==(const MsrdRewardModel&, const MsrdRewardModel&) = default;
};

/// R_0(s,a) + alpha_i * residual_i(s,a) (vanilla: R_i(s,a)). Throws
/// ConfigError when i is out of range.
double strategy_combined_reward(const MsrdRewardModel& model, std::size_t i,
                                std::span<const double> state,
                                std::span<const double> action);

struct MsrdLoss {
  double loss = 0.0;         // disc_loss + regularizer
  double disc_loss = 0.0;    // AIRL cross-entropy with f = R_i
  double regularizer = 0.0;  // >= 0
  MlpParams task_grad;
  MlpParams strategy_grad;
};

/// Two-column discriminator loss for strategy i:
///   CE(f = R_0 + alpha_i * residual_i) + alpha_i * mean_reg |residual_i|
/// (squared residual when l2_squared). Both nets receive gradients through
/// the discriminator; only the residual sees the regularizer.
MsrdLoss msrd_discriminator_loss(const MsrdRewardModel& model, std::size_t i,
                                 std::span<const DiscSample> expert,
                                 std::span<const DiscSample> gen,
                                 std::span<const Vec> reg_inputs,
                                 bool l2_squared = false);

/// Distillation ablation: CE(f = R_i) + mean_reg |R_i - R_0|.
MsrdLoss vanilla_distill_loss(const RewardNet& task, const RewardNet& combined,
                              std::span<const DiscSample> expert,
                              std::span<const DiscSample> gen,
                              std::span<const Vec> reg_inputs,
                              bool l2_squared = false);

/// Sets pseudo_reward = strategy_combined_reward(model, i, s, a) everywhere.
void assign_pseudo_rewards(const MsrdRewardModel& model, std::size_t i,
                           std::span<Trajectory> trajectories);

struct MsrdConfig {
  AdversarialConfig adv;  // adv.iterations counts epochs (strategy sweeps)
  Vec alpha{0.01};        // one value shared by all strategies, or one each
  RegSource reg_source = RegSource::kBoth;
  bool defer_task_update = true;
  bool l2_squared = false;
  RewardArchitecture arch = RewardArchitecture::kTwoColumn;
};

/// Everything needed to continue training bit-identically.
struct MsrdTrainState {
  MsrdRewardModel model;
  std::vector<PolicyLearner> policies;
  AdamState task_adam;
  std::vector<AdamState> strategy_adam;
  std::vector<GeneratorReplay> replay;
  std::size_t epoch = 0;
  Rng rng;

  friend bool operator==(const MsrdTrainState&, const MsrdTrainState&) = default;
};

/// Initializes nets, policies and optimizers from a fork of rng; the
/// training stream then continues from a copy of rng itself, matching
/// airl_train draw for draw when N = 1.
MsrdTrainState msrd_init(const EnvModel& env, std::size_t n_strategies,
                         const MsrdConfig& cfg, Rng& rng);

/// Runs `epochs` further sweeps over all strategies.
std::vector<TrainLogRow> msrd_run_epochs(MsrdTrainState& state, const EnvModel& env,
                                         const DemoSet& demos, const MsrdConfig& cfg,
                                         std::size_t epochs);

/// msrd_init followed by cfg.adv.iterations epochs; rng is advanced past
/// every draw the run made.
MsrdTrainState msrd_train(const EnvModel& env, const DemoSet& demos,
                          const MsrdConfig& cfg, Rng& rng,
                          std::vector<TrainLogRow>* log = nullptr);

}  // namespace msrd
