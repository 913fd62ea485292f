#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msrd/airl.hpp"
#include "msrd/diversity.hpp"
#include "msrd/envs.hpp"
#include "msrd/msrd.hpp"
#include "msrd/numcore.hpp"
#include "msrd/policy.hpp"

namespace msrd {

/// r(s, a) as seen by the evaluation code.
using RewardFn =
    std::function<double(std::span<const double> state, std::span<const double> action)>;

struct NoisyTrajectory {
  Trajectory traj;
  std::size_t policy = 0;
  double noise = 0.0;
  double true_return = 0.0;  // discounted task return
};

/// Policy-major, then noise level, then `per_level` rollouts, all drawn from
/// one rng stream.
std::vector<NoisyTrajectory> noise_injection_dataset(std::span<const Policy> policies,
                                                     const EnvModel& env,
                                                     std::span<const double> noise_levels,
                                                     std::size_t per_level, Rng& rng);

/// Pearson product-moment correlation. Throws ConfigError for length
/// mismatch, fewer than two points, or a constant sequence.
double pearson(std::span<const double> xs, std::span<const double> ys);

double trajectory_reward_sum(const RewardFn& reward, const Trajectory& traj,
                             double gamma, bool discounted);

/// Max-Ent trajectory distribution over every action sequence of the given
/// horizon, in enumerate_trajectories order: p ~ exp(sum_t gamma^t r).
Vec maxent_likelihood_oracle(const RewardFn& reward, const EnvModel& env,
                             std::size_t horizon);

struct CrossEval {
  std::vector<Vec> raw;         // raw[i][j]: mean undiscounted sum of reward i on D^(j)
  std::vector<Vec> normalized;  // rows mapped affinely to [0, 1]
  std::vector<bool> degenerate_rows;  // constant rows, normalized to 0.5
  std::size_t diagonal_argmax = 0;    // rows whose strict maximum is on the diagonal

  friend bool operator==(const CrossEval&, const CrossEval&) = default;
};

CrossEval cross_eval_matrix(std::span<const RewardFn> rewards, const DemoSet& demos);
/// cross_eval_matrix over the strategy-only rewards of a trained model.
CrossEval strategy_cross_eval(const MsrdRewardModel& model, const DemoSet& demos);

struct SliceCurve {
  std::string label;
  std::size_t varying_dim = 0;
  Vec base_point;
  Vec grid;
  Vec values;

  friend bool operator==(const SliceCurve&, const SliceCurve&) = default;
};

/// Evaluates f over `grid` along `varying_dim`, other inputs held at base_point.
SliceCurve reward_slice(const std::function<double(std::span<const double>)>& f,
                        std::span<const double> base_point, std::size_t varying_dim,
                        std::span<const double> grid);

struct EvalConfig {
  Vec noise_levels{0.0, 0.25, 0.5, 0.75, 1.0};
  std::size_t per_level = 5;
  std::size_t slice_points = 81;
  double slice_half_width = 1.0;
};

struct ScatterPoint {
  std::string method;
  std::size_t policy = 0;
  double noise = 0.0;
  double true_return = 0.0;     // normalized per generating policy
  double learned_return = 0.0;  // normalized per generating policy

  friend bool operator==(const ScatterPoint&, const ScatterPoint&) = default;
};

struct EvalReport {
  std::string env_name;
  std::size_t num_strategies = 0;
  std::string model_method;  // "msrd" or "vanilla_distill"
  /// H1: trajectory-level Pearson r of learned vs true task returns.
  double model_task_r = 0.0;
  Vec airl_task_r;  // one per per-strategy baseline (empty without baselines)
  /// H2: per-step Pearson r of strategy reward vs recorded diversity on D^(i).
  Vec model_strategy_r;
  Vec airl_strategy_r;
  CrossEval cross_eval;
  /// Mean |R0| and mean |strategy-only reward| over all demo transitions.
  double mean_abs_task_reward = 0.0;
  double mean_abs_strategy_reward = 0.0;
  std::vector<SliceCurve> slices;
  std::vector<ScatterPoint> scatter;

  bool operator==(const EvalReport&) const = default;
};

/// `demo_policies` generate the noise-injection set; `airl_baselines[i]` is
/// the AIRL reward trained on D^(i) alone (may be empty). Correlations that
/// are undefined (constant inputs) are reported as NaN.
EvalReport run_h1_h2_report(const EnvModel& env, const DemoSet& demos,
                            std::span<const Policy> demo_policies,
                            const MsrdRewardModel& model,
                            std::span<const RewardNet> airl_baselines,
                            const EvalConfig& cfg, Rng& rng);

/// Pretty-printed JSON (NaN as null) and its inverse.
std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

/// report.json plus scatter.csv, heatmap.csv and slices.csv in `dir`.
void write_report_files(const EvalReport& report, const std::string& dir);

}  // namespace msrd
