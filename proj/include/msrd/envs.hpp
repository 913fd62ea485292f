#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "msrd/numcore.hpp"

namespace msrd {

enum class EnvKind { kPointBalance, kGridWorld };

/// Double integrator on a line: x' = x + dt*v, v' = v + dt*a. The task reward
/// is -|x|, maximal exactly on x = 0.
struct PointBalanceParams {
  double dt = 0.05;
  double init_noise = 0.1;  // x0, v0 ~ U(-init_noise, init_noise)
  double x_limit = 3.0;
  double v_limit = 5.0;
  double action_limit = 2.0;
};

/// Deterministic W x H grid with four moves (up, right, down, left). Moving
/// into a wall keeps the agent in place. Reward is a per-cell table read at
/// the state the action is taken from.
struct GridParams {
  std::size_t width = 5;
  std::size_t height = 5;
  std::size_t start_cell = 0;
  Vec cell_reward;  // width*height; empty means 1.0 at the last cell
};

inline constexpr std::size_t kGridActions = 4;

struct StepResult {
  Vec next_state;
  double task_reward = 0.0;
};

/// Value-semantic environment. States and actions travel as real vectors;
/// the gridworld state is (col, row) and its action is {index}.
class EnvModel {
 public:
  static EnvModel point_balance(const PointBalanceParams& p, std::size_t horizon,
                                double gamma);
  static EnvModel grid_world(const GridParams& p, std::size_t horizon,
                             double gamma);

  EnvKind kind() const { return kind_; }
  std::string name() const;
  std::size_t state_dim() const { return 2; }
  /// Continuous action dimension (1) or discrete action count (4).
  std::size_t action_dim() const;
  bool discrete() const { return kind_ == EnvKind::kGridWorld; }
  std::size_t horizon() const { return horizon_; }
  double gamma() const { return gamma_; }
  double action_limit() const { return pb_.action_limit; }
  const PointBalanceParams& point_params() const { return pb_; }
  const GridParams& grid_params() const { return grid_; }

  Vec reset(Rng& rng) const;
  StepResult step(std::span<const double> state,
                  std::span<const double> action) const;
  double task_reward(std::span<const double> state,
                     std::span<const double> action) const;

  /// Encoded action vector length used by reward networks (1 for both kinds).
  std::size_t action_vec_dim() const { return 1; }

  /// Uniformly random action over the declared action space.
  Vec random_action(Rng& rng) const;

  std::size_t cell_of(std::span<const double> state) const;

 private:
  EnvKind kind_ = EnvKind::kPointBalance;
  std::size_t horizon_ = 100;
  double gamma_ = 0.99;
  PointBalanceParams pb_;
  GridParams grid_;
};

struct EnumeratedTrajectory {
  std::vector<std::size_t> actions;
  std::vector<Vec> states;  // horizon + 1 entries
  Vec rewards;              // horizon entries
  double discounted_return = 0.0;
};

inline constexpr std::size_t kEnumerationBudget = 1'000'000;

/// All |A|^horizon action sequences from the start cell in lexicographic
/// order. Throws ConfigError quoting the required budget when it exceeds
/// kEnumerationBudget.
std::vector<EnumeratedTrajectory> enumerate_trajectories(const EnvModel& env,
                                                         std::size_t horizon);

}  // namespace msrd
