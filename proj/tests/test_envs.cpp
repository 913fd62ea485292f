#include <cmath>
#include <set>

#include "doctest.h"
#include "msrd/envs.hpp"
#include "msrd/errors.hpp"

using namespace msrd;

namespace {

EnvModel point(double init_noise) {
  PointBalanceParams p;
  p.init_noise = init_noise;
  return EnvModel::point_balance(p, 100, 0.99);
}

EnvModel grid(std::size_t w, std::size_t h, Vec rewards, double gamma = 0.9) {
  GridParams g;
  g.width = w;
  g.height = h;
  g.cell_reward = std::move(rewards);
  return EnvModel::grid_world(g, 6, gamma);
}

}  // namespace

TEST_CASE("reset without noise starts at the origin") {
  Rng rng(1);
  CHECK(point(0.0).reset(rng) == Vec{0.0, 0.0});
}

TEST_CASE("grid reset returns the start cell") {
  GridParams g;
  g.width = 4;
  g.height = 3;
  g.start_cell = 6;
  const EnvModel env = EnvModel::grid_world(g, 3, 0.9);
  Rng rng(2);
  CHECK(env.reset(rng) == Vec{2.0, 1.0});
  CHECK(env.cell_of(env.reset(rng)) == 6);
}

TEST_CASE("noisy reset is reproducible and bounded") {
  const EnvModel env = point(0.1);
  Rng a(3), b(3);
  for (int i = 0; i < 100; ++i) {
    const Vec s = env.reset(a);
    CHECK(s == env.reset(b));
    CHECK(std::abs(s[0]) <= 0.1);
    CHECK(std::abs(s[1]) <= 0.1);
  }
}

TEST_CASE("point balance step follows the double integrator") {
  const EnvModel env = point(0.0);
  const StepResult still = env.step(Vec{0.0, 0.0}, Vec{0.0});
  CHECK(still.next_state == Vec{0.0, 0.0});
  CHECK(still.task_reward == 0.0);

  const StepResult r = env.step(Vec{0.5, -1.0}, Vec{1.5});
  CHECK(r.next_state[0] == doctest::Approx(0.5 + 0.05 * -1.0));
  CHECK(r.next_state[1] == doctest::Approx(-1.0 + 0.05 * 1.5));
  CHECK(r.task_reward == -0.5);

  for (double a : {-2.0, 0.0, 3.7}) CHECK(env.step(Vec{1.0, 0.0}, Vec{a}).task_reward == -1.0);
}

TEST_CASE("point balance clips actions and states") {
  const EnvModel env = point(0.0);
  const StepResult big = env.step(Vec{0.0, 0.0}, Vec{100.0});
  CHECK(big.next_state[1] == doctest::Approx(0.05 * 2.0));
  const StepResult edge = env.step(Vec{2.99, 5.0}, Vec{2.0});
  CHECK(edge.next_state[0] == 3.0);
  CHECK(edge.next_state[1] == 5.0);
}

TEST_CASE("point balance reward peaks exactly on x = 0") {
  const EnvModel env = point(0.0);
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-3.0, 3.0);
    const double v = rng.uniform(-5.0, 5.0);
    const double r = env.task_reward(Vec{x, v}, Vec{rng.uniform(-2.0, 2.0)});
    CHECK(r <= 0.0);
    CHECK((r == 0.0) == (x == 0.0));
  }
  CHECK(env.task_reward(Vec{0.0, 4.0}, Vec{1.0}) == 0.0);
}

TEST_CASE("grid moves match a hand-written 3x2 table with walls") {
  const EnvModel env = grid(3, 2, {0, 1, 2, 3, 4, 5});
  // next[cell][action], actions up, right, down, left; cells row-major.
  const std::size_t next[6][4] = {
      {0, 1, 3, 0}, {1, 2, 4, 0}, {2, 2, 5, 1},
      {0, 4, 3, 3}, {1, 5, 4, 3}, {2, 5, 5, 4},
  };
  for (std::size_t c = 0; c < 6; ++c) {
    const Vec s{static_cast<double>(c % 3), static_cast<double>(c / 3)};
    for (std::size_t a = 0; a < 4; ++a) {
      const StepResult r = env.step(s, Vec{static_cast<double>(a)});
      CHECK(env.cell_of(r.next_state) == next[c][a]);
      CHECK(r.task_reward == static_cast<double>(c));
    }
  }
  CHECK_THROWS_AS(env.step(Vec{0.0, 0.0}, Vec{4.0}), ConfigError);
}

TEST_CASE("default grid reward sits on the last cell") {
  GridParams g;
  const EnvModel env = EnvModel::grid_world(g, 2, 0.9);
  CHECK(env.task_reward(Vec{4.0, 4.0}, Vec{0.0}) == 1.0);
  CHECK(env.task_reward(Vec{3.0, 4.0}, Vec{0.0}) == 0.0);
}

TEST_CASE("enumeration counts |A|^T distinct sequences") {
  const EnvModel env = grid(5, 5, {});
  CHECK(enumerate_trajectories(env, 1).size() == 4);
  const auto three = enumerate_trajectories(env, 3);
  CHECK(three.size() == 64);
  std::set<std::vector<std::size_t>> unique;
  for (const auto& t : three) {
    unique.insert(t.actions);
    CHECK(t.states.size() == 4);
    CHECK(t.rewards.size() == 3);
  }
  CHECK(unique.size() == 64);
}

TEST_CASE("enumerated returns match a hand computation on a 2x2 grid") {
  const EnvModel env = grid(2, 2, {0.0, 1.0, 2.0, 3.0});
  const auto all = enumerate_trajectories(env, 2);
  REQUIRE(all.size() == 16);
  // Lexicographic order: index = 4 * a0 + a1.
  // right then down: r = 0 (cell 0), then 1 (cell 1) -> 0.9.
  CHECK(all[4 * 1 + 2].actions == std::vector<std::size_t>{1, 2});
  CHECK(all[4 * 1 + 2].discounted_return == doctest::Approx(0.9));
  // down then right: 0 then 2 (cell 2) -> 1.8.
  CHECK(all[4 * 2 + 1].discounted_return == doctest::Approx(1.8));
  // up then left stays in cell 0.
  CHECK(all[4 * 0 + 3].discounted_return == 0.0);
  CHECK(env.cell_of(all[4 * 1 + 2].states.back()) == 3);
}

TEST_CASE("enumeration refuses oversized budgets and continuous envs") {
  const EnvModel env = grid(5, 5, {});
  try {
    enumerate_trajectories(env, 11);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("4194304") != std::string::npos);
  }
  CHECK_THROWS_AS(enumerate_trajectories(point(0.0), 2), ConfigError);
}

TEST_CASE("constructors reject invalid parameters") {
  PointBalanceParams p;
  CHECK_THROWS_AS(EnvModel::point_balance(p, 0, 0.9), ConfigError);
  CHECK_THROWS_AS(EnvModel::point_balance(p, 10, 1.0), ConfigError);
  p.dt = 0.0;
  CHECK_THROWS_AS(EnvModel::point_balance(p, 10, 0.9), ConfigError);
  GridParams g;
  g.start_cell = 25;
  CHECK_THROWS_AS(EnvModel::grid_world(g, 3, 0.9), ConfigError);
  g.start_cell = 0;
  g.cell_reward = {1.0, 2.0};
  CHECK_THROWS_AS(EnvModel::grid_world(g, 3, 0.9), ConfigError);
}

TEST_CASE("random actions respect the action space") {
  Rng rng(5);
  const EnvModel p = point(0.0);
  const EnvModel g = grid(5, 5, {});
  std::set<double> seen;
  for (int i = 0; i < 500; ++i) {
    const Vec a = p.random_action(rng);
    CHECK(std::abs(a[0]) <= p.action_limit());
    seen.insert(g.random_action(rng)[0]);
  }
  CHECK(seen == std::set<double>{0.0, 1.0, 2.0, 3.0});
}
