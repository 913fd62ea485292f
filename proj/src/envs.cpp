#include "msrd/envs.hpp"

#include <algorithm>
#include <cmath>

#include "msrd/errors.hpp"

namespace msrd {

EnvModel EnvModel::point_balance(const PointBalanceParams& p,
                                 std::size_t horizon, double gamma) {
  if (horizon < 1) throw ConfigError("env.horizon must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("env.gamma must be in (0,1)");
  if (!(p.dt > 0.0)) throw ConfigError("env.dt must be > 0");
  if (p.init_noise < 0.0) throw ConfigError("env.init_noise must be >= 0");
  if (!(p.action_limit > 0.0)) throw ConfigError("env.action_limit must be > 0");
  EnvModel e;
  e.kind_ = EnvKind::kPointBalance;
  e.horizon_ = horizon;
  e.gamma_ = gamma;
  e.pb_ = p;
  return e;
}

EnvModel EnvModel::grid_world(const GridParams& p, std::size_t horizon,
                              double gamma) {
  if (horizon < 1) throw ConfigError("env.horizon must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("env.gamma must be in (0,1)");
  if (p.width == 0 || p.height == 0) throw ConfigError("grid must be non-empty");
  const std::size_t cells = p.width * p.height;
  if (p.start_cell >= cells) throw ConfigError("grid start cell out of range");
  EnvModel e;
  e.kind_ = EnvKind::kGridWorld;
  e.horizon_ = horizon;
  e.gamma_ = gamma;
  e.grid_ = p;
  if (e.grid_.cell_reward.empty()) {
    e.grid_.cell_reward.assign(cells, 0.0);
    e.grid_.cell_reward.back() = 1.0;
  }
  if (e.grid_.cell_reward.size() != cells)
    throw ConfigError("grid reward table must have width*height entries");
  return e;
}

std::string EnvModel::name() const {
  return kind_ == EnvKind::kPointBalance ? "point_balance" : "gridworld";
}

std::size_t EnvModel::action_dim() const {
  return kind_ == EnvKind::kPointBalance ? 1 : kGridActions;
}

std::size_t EnvModel::cell_of(std::span<const double> state) const {
  const auto col = static_cast<std::size_t>(state[0]);
  const auto row = static_cast<std::size_t>(state[1]);
  return row * grid_.width + col;
}

Vec EnvModel::reset(Rng& rng) const {
  if (kind_ == EnvKind::kGridWorld) {
    return {static_cast<double>(grid_.start_cell % grid_.width),
            static_cast<double>(grid_.start_cell / grid_.width)};
  }
  const double n = pb_.init_noise;
  if (n == 0.0) return {0.0, 0.0};
  const double x = std::clamp(rng.uniform(-n, n), -pb_.x_limit, pb_.x_limit);
  const double v = std::clamp(rng.uniform(-n, n), -pb_.v_limit, pb_.v_limit);
  return {x, v};
}

double EnvModel::task_reward(std::span<const double> state,
                             std::span<const double> /*action*/) const {
  if (kind_ == EnvKind::kPointBalance) return -std::abs(state[0]);
  return grid_.cell_reward[cell_of(state)];
}

StepResult EnvModel::step(std::span<const double> state,
                          std::span<const double> action) const {
  StepResult r;
  r.task_reward = task_reward(state, action);
  if (kind_ == EnvKind::kPointBalance) {
    const double a = std::clamp(action[0], -pb_.action_limit, pb_.action_limit);
    const double x = std::clamp(state[0] + pb_.dt * state[1], -pb_.x_limit, pb_.x_limit);
    const double v = std::clamp(state[1] + pb_.dt * a, -pb_.v_limit, pb_.v_limit);
    r.next_state = {x, v};
    return r;
  }
  auto col = static_cast<long>(state[0]);
  auto row = static_cast<long>(state[1]);
  const auto w = static_cast<long>(grid_.width);
  const auto h = static_cast<long>(grid_.height);
  switch (static_cast<int>(action[0])) {
    case 0: row = std::max(0L, row - 1); break;
    case 1: col = std::min(w - 1, col + 1); break;
    case 2: row = std::min(h - 1, row + 1); break;
    case 3: col = std::max(0L, col - 1); break;
    default: throw ConfigError("grid action out of range");
  }
  r.next_state = {static_cast<double>(col), static_cast<double>(row)};
  return r;
}

Vec EnvModel::random_action(Rng& rng) const {
  if (kind_ == EnvKind::kGridWorld)
    return {static_cast<double>(rng.uniform_int(kGridActions))};
  return {rng.uniform(-pb_.action_limit, pb_.action_limit)};
}

std::vector<EnumeratedTrajectory> enumerate_trajectories(const EnvModel& env,
                                                         std::size_t horizon) {
  if (env.kind() != EnvKind::kGridWorld)
    throw ConfigError("trajectory enumeration needs a discrete environment");
  const std::size_t na = env.action_dim();
  double required = std::pow(static_cast<double>(na), static_cast<double>(horizon));
  if (required > static_cast<double>(kEnumerationBudget))
    throw ConfigError("enumeration needs " + std::to_string(static_cast<long double>(required)) +
                      " trajectories, budget is " + std::to_string(kEnumerationBudget));
  const auto count = static_cast<std::size_t>(required);

  std::vector<EnumeratedTrajectory> out;
  out.reserve(count);
  Rng unused(0);
  const Vec start = env.reset(unused);
  for (std::size_t code = 0; code < count; ++code) {
    EnumeratedTrajectory t;
    t.actions.resize(horizon);
    std::size_t c = code;
    for (std::size_t k = horizon; k-- > 0;) {
      t.actions[k] = c % na;
      c /= na;
    }
    t.states.push_back(start);
    double disc = 1.0;
    for (std::size_t k = 0; k < horizon; ++k) {
      const Vec a{static_cast<double>(t.actions[k])};
      StepResult s = env.step(t.states.back(), a);
      t.rewards.push_back(s.task_reward);
      t.discounted_return += disc * s.task_reward;
      disc *= env.gamma();
      t.states.push_back(std::move(s.next_state));
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace msrd
