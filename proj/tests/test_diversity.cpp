#include <cmath>

#include "doctest.h"
#include "msrd/diversity.hpp"
#include "msrd/errors.hpp"
#include "support.hpp"

using namespace msrd;
using msrd::test::max_fd_error;

namespace {

const std::size_t kHidden[] = {8, 8};

EnvModel point() {
  PointBalanceParams p;
  p.init_noise = 0.5;
  return EnvModel::point_balance(p, 20, 0.99);
}

EnvModel grid() { return EnvModel::grid_world(GridParams{}, 4, 0.9); }

// Constant-output policy: mean (or logits) fixed by the final bias.
Policy constant_gaussian(double mean, double log_std) {
  Rng rng(0);
  Policy p = make_policy(point(), kHidden, rng, log_std);
  for (auto& l : p.net.layers) {
    std::fill(l.w.begin(), l.w.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  }
  p.net.layers.back().b[0] = std::atanh(mean / p.mean_limit);
  return p;
}

Policy constant_categorical(const Vec& probs) {
  Rng rng(0);
  Policy p = make_policy(grid(), kHidden, rng);
  for (auto& l : p.net.layers) {
    std::fill(l.w.begin(), l.w.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  }
  for (std::size_t j = 0; j < probs.size(); ++j) p.net.layers.back().b[j] = std::log(probs[j]);
  return p;
}

// Classifier whose posterior is fixed by the final bias.
SkillClassifier constant_classifier(const Vec& posterior) {
  Rng rng(0);
  SkillClassifier c = make_classifier(2, posterior.size(), kHidden, rng);
  for (auto& l : c.net.layers) {
    std::fill(l.w.begin(), l.w.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  }
  for (std::size_t j = 0; j < posterior.size(); ++j)
    c.net.layers.back().b[j] = std::log(posterior[j]);
  return c;
}

}  // namespace

TEST_CASE("DIAYN pseudo-reward examples") {
  const Vec s{0.3, -0.1};
  const SkillClassifier uniform = constant_classifier({0.25, 0.25, 0.25, 0.25});
  for (std::size_t z = 0; z < 4; ++z) CHECK(diayn_pseudo_reward(uniform, s, z) == doctest::Approx(0.0));

  const SkillClassifier sure = constant_classifier({1.0 - 1e-15, 1e-15});
  CHECK(diayn_pseudo_reward(sure, s, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-9));

  const SkillClassifier tilted = constant_classifier({0.7, 0.3});
  CHECK(diayn_pseudo_reward(tilted, s, 0) == doctest::Approx(std::log(0.7) - std::log(0.5)));
  CHECK(diayn_pseudo_reward(tilted, s, 0) == doctest::Approx(0.3365).epsilon(1e-4));
  CHECK_THROWS_AS(diayn_pseudo_reward(tilted, s, 2), ConfigError);
}

TEST_CASE("classifier prior must be a distribution over N >= 2 skills") {
  SkillClassifier c = constant_classifier({0.5, 0.5});
  CHECK_NOTHROW(c.validate());
  c.prior = {0.6, 0.6};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  Rng rng(1);
  CHECK_THROWS_AS(make_classifier(2, 1, kHidden, rng), ConfigError);
}

TEST_CASE("classifier gradient matches finite differences") {
  Rng rng(2);
  SkillClassifier c = make_classifier(2, 3, kHidden, rng);
  for (auto b : c.net.blocks())
    for (auto& x : b) x += 0.3 * rng.normal();
  std::vector<Vec> states;
  std::vector<std::size_t> labels;
  for (int i = 0; i < 12; ++i) {
    states.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
    labels.push_back(rng.uniform_int(3));
  }
  const ClassifierLoss l = classifier_loss(c, states, labels);
  auto loss = [&] { return classifier_loss(c, states, labels).loss; };
  CHECK(max_fd_error(c.net, l.grad, loss) < 1e-4);
}

TEST_CASE("classifier separates two clusters within 500 steps") {
  Rng rng(3);
  SkillClassifier c = make_classifier(2, 2, kHidden, rng);
  AdamState adam(AdamConfig{.lr = 1e-2}, c.net);
  std::vector<Vec> states;
  std::vector<std::size_t> labels;
  for (int i = 0; i < 40; ++i) {
    const std::size_t z = i % 2;
    states.push_back({(z ? 1.5 : -1.5) + 0.2 * rng.normal(), 0.2 * rng.normal()});
    labels.push_back(z);
  }
  for (int step = 0; step < 500; ++step) classifier_update(c, adam, states, labels);
  CHECK(classifier_loss(c, states, labels).accuracy == 1.0);
}

TEST_CASE("repeating one labelled state raises its posterior monotonically") {
  Rng rng(4);
  SkillClassifier c = make_classifier(2, 3, kHidden, rng);
  AdamState adam(AdamConfig{.lr = 1e-3}, c.net);
  const std::vector<Vec> states{{0.4, 0.9}};
  const std::vector<std::size_t> labels{2};
  double last = c.log_posterior(states[0])[2];
  for (int step = 0; step < 50; ++step) {
    classifier_update(c, adam, states, labels);
    const double now = c.log_posterior(states[0])[2];
    CHECK(now > last);
    last = now;
  }
}

TEST_CASE("KL diversity examples") {
  const Vec s{0.2, 0.0};
  const Policy a = constant_gaussian(0.0, 0.0);
  const Policy b = constant_gaussian(1.0, 0.0);
  const std::vector<Policy> pair{a, b};
  CHECK(kl_diversity_reward(pair, 0, s) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(kl_diversity_reward(pair, 1, s) == doctest::Approx(0.5).epsilon(1e-12));

  const std::vector<Policy> same{a, a, a};
  for (std::size_t k = 0; k < 3; ++k) CHECK(kl_diversity_reward(same, k, s) == 0.0);

  const std::vector<Policy> cats{constant_categorical({0.9, 0.1, 1e-300, 1e-300}),
                                 constant_categorical({0.5, 0.5, 1e-300, 1e-300})};
  const double expected = 0.9 * std::log(1.8) + 0.1 * std::log(0.2);
  CHECK(expected == doctest::Approx(0.368).epsilon(1e-3));
  CHECK(kl_diversity_reward(cats, 0, Vec{0.0, 0.0}) == doctest::Approx(expected).epsilon(1e-9));

  CHECK_THROWS_AS(kl_diversity_reward(pair, 2, s), ConfigError);
  const std::vector<Policy> mixed{a, cats[0]};
  CHECK_THROWS_AS(kl_diversity_reward(mixed, 0, s), ConfigError);
}

TEST_CASE("Gaussian KL agrees with numerical integration") {
  const Policy p = constant_gaussian(0.4, -0.3);
  const Policy q = constant_gaussian(-0.7, 0.2);
  const Vec s{0.0, 0.0};
  const double h = 1e-3;
  double kl = 0.0;
  for (double x = -12.0; x < 12.0; x += h) {
    const double lp = p.log_prob(s, Vec{x});
    const double lq = q.log_prob(s, Vec{x});
    kl += std::exp(lp) * (lp - lq) * h;
  }
  CHECK(policy_kl(p, q, s) == doctest::Approx(kl).epsilon(1e-6));
}

TEST_CASE("KL diversity is non-negative and zero only for matching policies") {
  Rng rng(5);
  const EnvModel env = point();
  std::vector<Policy> ps;
  for (int i = 0; i < 4; ++i) ps.push_back(make_policy(env, kHidden, rng, rng.uniform(-1.0, 1.0)));
  for (int t = 0; t < 200; ++t) {
    const Vec s{rng.uniform(-3.0, 3.0), rng.uniform(-5.0, 5.0)};
    for (std::size_t k = 0; k < ps.size(); ++k) CHECK(kl_diversity_reward(ps, k, s) > 0.0);
  }
  const std::vector<Policy> twins{ps[0], ps[0]};
  CHECK(kl_diversity_reward(twins, 1, Vec{1.0, 1.0}) == 0.0);
}

TEST_CASE("annotation recomputes stored values and is idempotent") {
  Rng rng(6);
  const EnvModel env = point();
  std::vector<Policy> ps;
  for (int i = 0; i < 3; ++i) ps.push_back(make_policy(env, kHidden, rng));
  Trajectory t = rollout(ps[1], env, rng);
  t.strategy = 1;
  annotate_ground_truth_strategy(t, DiversityMode::kKl, ps, nullptr);
  for (const auto& tr : t.steps) CHECK(*tr.diversity == kl_diversity_reward(ps, 1, tr.state));
  const Trajectory once = t;
  annotate_ground_truth_strategy(t, DiversityMode::kKl, ps, nullptr);
  CHECK(t == once);

  const SkillClassifier cls = make_classifier(2, 3, kHidden, rng);
  annotate_ground_truth_strategy(t, DiversityMode::kDiayn, ps, &cls);
  for (const auto& tr : t.steps) CHECK(*tr.diversity == diayn_pseudo_reward(cls, tr.state, 1));

  const std::vector<Policy> same{ps[0], ps[0], ps[0]};
  annotate_ground_truth_strategy(t, DiversityMode::kKl, same, nullptr);
  for (const auto& tr : t.steps) CHECK(*tr.diversity == 0.0);
}

TEST_CASE("annotation rejects mismatched artifacts") {
  Rng rng(7);
  const EnvModel env = point();
  const std::vector<Policy> ps{make_policy(env, kHidden, rng), make_policy(env, kHidden, rng)};
  Trajectory t = rollout(ps[0], env, rng);
  CHECK_THROWS_AS(annotate_ground_truth_strategy(t, DiversityMode::kKl, ps, nullptr), ConfigError);
  t.strategy = 2;
  CHECK_THROWS_AS(annotate_ground_truth_strategy(t, DiversityMode::kKl, ps, nullptr), ConfigError);
  t.strategy = 0;
  CHECK_THROWS_AS(annotate_ground_truth_strategy(t, DiversityMode::kDiayn, ps, nullptr), ConfigError);
}

TEST_CASE("closed-form mean gradient of the KL bonus matches finite differences") {
  // d/d(mean_k) of sum_i KL(pi_k || pi_i) = sum_i (mean_k - mean_i) / var_i,
  // checked against a direct difference quotient of kl_diversity_reward.
  std::vector<Policy> ps{constant_gaussian(0.3, -0.2), constant_gaussian(-0.5, 0.1),
                         constant_gaussian(1.1, -0.4)};
  const Vec s{0.0, 0.0};
  const double analytic = (0.3 + 0.5) / std::exp(0.2) + (0.3 - 1.1) / std::exp(-0.8);
  const double h = 1e-6;
  auto at = [&](double m) {
    std::vector<Policy> q = ps;
    q[0] = constant_gaussian(m, -0.2);
    return kl_diversity_reward(q, 0, s);
  };
  CHECK((at(0.3 + h) - at(0.3 - h)) / (2 * h) == doctest::Approx(analytic).epsilon(1e-6));
}

TEST_CASE("small heterogeneous run produces labelled, annotated demos") {
  for (const DiversityMode mode : {DiversityMode::kKl, DiversityMode::kDiayn}) {
    CAPTURE(to_string(mode));
    DiversityConfig cfg;
    cfg.mode = mode;
    cfg.n_strategies = 3;
    cfg.iterations = 3;
    cfg.batch_trajectories = 2;
    cfg.demos_per_strategy = 4;
    cfg.hidden = {8, 8};
    Rng a(8), b(8);
    const HeterogeneousResult r = train_heterogeneous_policies(point(), cfg, a);
    CHECK(r.policies.size() == 3);
    CHECK(r.classifier.has_value() == (mode == DiversityMode::kDiayn));
    CHECK_NOTHROW(r.demos.validate());
    CHECK(r.demos.min_per_strategy() == 4);
    for (std::size_t k = 0; k < 3; ++k)
      for (const auto& t : r.demos.strategies[k]) {
        CHECK(t.strategy == k);
        for (const auto& tr : t.steps) CHECK(tr.diversity.has_value());
      }
    CHECK(train_heterogeneous_policies(point(), cfg, b).demos == r.demos);
  }
  DiversityConfig bad;
  bad.n_strategies = 1;
  Rng rng(9);
  CHECK_THROWS_AS(train_heterogeneous_policies(point(), bad, rng), ConfigError);
}

TEST_CASE("mode names round-trip") {
  CHECK(diversity_mode_from_string(to_string(DiversityMode::kKl)) == DiversityMode::kKl);
  CHECK(diversity_mode_from_string(to_string(DiversityMode::kDiayn)) == DiversityMode::kDiayn);
  CHECK_THROWS_AS(diversity_mode_from_string("gail"), ConfigError);
}
