#include "msrd/diversity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "msrd/errors.hpp"

namespace msrd {

std::string to_string(DiversityMode m) {
  return m == DiversityMode::kDiayn ? "diayn" : "kl";
}

DiversityMode diversity_mode_from_string(const std::string& s) {
  if (s == "diayn") return DiversityMode::kDiayn;
  if (s == "kl") return DiversityMode::kKl;
  throw ConfigError("unknown diversity mode '" + s + "' (expected diayn|kl)");
}

Vec SkillClassifier::log_posterior(std::span<const double> state) const {
  return log_softmax(mlp_forward(net, state));
}

void SkillClassifier::validate() const {
  net.validate();
  if (num_skills() < 2) throw ConfigError("skill classifier needs N >= 2");
  if (prior.size() != num_skills())
    throw ConfigError("skill prior size does not match N");
  double s = 0.0;
  for (double p : prior) {
    if (!(p > 0.0)) throw ConfigError("skill prior entries must be positive");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-9) throw ConfigError("skill prior must sum to 1");
}

SkillClassifier make_classifier(std::size_t state_dim, std::size_t n_skills,
                                std::span<const std::size_t> hidden, Rng& rng) {
  if (n_skills < 2) throw ConfigError("skill classifier needs N >= 2");
  std::vector<std::size_t> sizes{state_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(n_skills);
  SkillClassifier c;
  c.net = make_mlp(sizes, rng, 0.01);
  c.prior.assign(n_skills, 1.0 / static_cast<double>(n_skills));
  return c;
}

double diayn_pseudo_reward(const SkillClassifier& cls,
                           std::span<const double> state, std::size_t z) {
  if (z >= cls.num_skills()) throw ConfigError("skill index out of range");
  return cls.log_posterior(state)[z] - std::log(cls.prior[z]);
}

ClassifierLoss classifier_loss(const SkillClassifier& cls,
                               std::span<const Vec> states,
                               std::span<const std::size_t> labels) {
  if (states.size() != labels.size() || states.empty())
    throw ConfigError("classifier batch: states and labels must align and be non-empty");
  const double inv_n = 1.0 / static_cast<double>(states.size());
  ClassifierLoss out{0.0, 0.0, cls.net.zeros_like()};
  Vec terms(states.size());
  std::size_t correct = 0;
  MlpCache cache;
  for (std::size_t s = 0; s < states.size(); ++s) {
    const std::size_t z = labels[s];
    if (z >= cls.num_skills()) throw ConfigError("skill label out of range");
    const Vec logits = mlp_forward(cls.net, states[s], cache);
    const Vec lp = log_softmax(logits);
    terms[s] = -lp[z];
    const auto best = static_cast<std::size_t>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (best == z) ++correct;
    Vec up(lp.size());
    for (std::size_t j = 0; j < lp.size(); ++j)
      up[j] = (std::exp(lp[j]) - (j == z ? 1.0 : 0.0)) * inv_n;
    mlp_backward_accumulate(cls.net, cache, up, out.grad);
  }
  out.loss = mean(terms);
  out.accuracy = static_cast<double>(correct) * inv_n;
  return out;
}

ClassifierLoss classifier_update(SkillClassifier& cls, AdamState& adam,
                                 std::span<const Vec> states,
                                 std::span<const std::size_t> labels) {
  ClassifierLoss l = classifier_loss(cls, states, labels);
  if (!std::isfinite(l.loss))
    throw TrainingError("classifier_update: non-finite cross-entropy");
  adam_step(adam, cls.net, l.grad);
  return l;
}

namespace {
double kl_from_params(const Policy& p, std::span<const double> dp,
                      const Policy& q, std::span<const double> dq);
}  // namespace

double policy_kl(const Policy& p, const Policy& q, std::span<const double> state) {
  if (p.space != q.space || p.action_dim() != q.action_dim())
    throw ConfigError("policy_kl: policies do not share an action space");
  return kl_from_params(p, p.dist_params(state), q, q.dist_params(state));
}

double kl_diversity_reward(std::span<const Policy> policies, std::size_t k,
                           std::span<const double> state) {
  if (k >= policies.size()) throw ConfigError("strategy index out of range");
  double r = 0.0;
  for (std::size_t i = 0; i < policies.size(); ++i)
    if (i != k) r += policy_kl(policies[k], policies[i], state);
  return r;
}

std::size_t DemoSet::min_per_strategy() const {
  std::size_t m = strategies.empty() ? 0 : strategies.front().size();
  for (const auto& s : strategies) m = std::min(m, s.size());
  return m;
}

void DemoSet::validate() const {
  if (strategies.empty()) throw ConfigError("demo set has no strategies");
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    if (strategies[i].empty())
      throw ConfigError("strategy " + std::to_string(i) + " has no demonstrations");
    for (const auto& t : strategies[i]) {
      if (!t.strategy || *t.strategy != i)
        throw ConfigError("demonstration labelled inconsistently with strategy " +
                          std::to_string(i));
      for (const auto& tr : t.steps)
        if (tr.state.size() != state_dim || tr.action.size() != 1)
          throw ConfigError("demonstration step has wrong dimensions");
    }
  }
}

namespace {

double diversity_value(DiversityMode mode, std::span<const Policy> policies,
                       const SkillClassifier* cls, std::size_t k,
                       std::span<const double> state) {
  if (mode == DiversityMode::kKl) return kl_diversity_reward(policies, k, state);
  if (cls == nullptr) throw ConfigError("DIAYN annotation needs a skill classifier");
  return diayn_pseudo_reward(*cls, state, k);
}

double kl_from_params(const Policy& p, std::span<const double> dp,
                      const Policy& q, std::span<const double> dq) {
  if (p.space == ActionSpace::kCategorical) {
    const Vec lp = log_softmax(dp);
    const Vec lq = log_softmax(dq);
    double kl = 0.0;
    for (std::size_t j = 0; j < lp.size(); ++j) kl += std::exp(lp[j]) * (lp[j] - lq[j]);
    return std::max(kl, 0.0);
  }
  double kl = 0.0;
  for (std::size_t d = 0; d < dp.size(); ++d) {
    const double var_p = std::exp(2.0 * p.log_std[d]);
    const double var_q = std::exp(2.0 * q.log_std[d]);
    const double diff = dp[d] - dq[d];
    kl += q.log_std[d] - p.log_std[d] + (var_p + diff * diff) / (2.0 * var_q) - 0.5;
  }
  return std::max(kl, 0.0);
}

// sum_i KL(p_k || p_i) as a function of p_k's distribution parameters `dist`
// (mean or logits), with the others' parameters precomputed at the same
// state. The gradient w.r.t. `dist` is added to `grad`.
double kl_to_others(const Policy& self, std::span<const double> dist,
                    std::span<const Policy> others, std::span<const Vec> other_dists,
                    std::size_t k, std::span<double> grad) {
  double total = 0.0;
  const bool categorical = self.space == ActionSpace::kCategorical;
  const Vec lp = categorical ? log_softmax(dist) : Vec{};
  for (std::size_t i = 0; i < others.size(); ++i) {
    if (i == k) continue;
    const Vec& dq = other_dists[i];
    if (categorical) {
      const Vec lq = log_softmax(dq);
      double kl = 0.0;
      for (std::size_t j = 0; j < lp.size(); ++j) kl += std::exp(lp[j]) * (lp[j] - lq[j]);
      for (std::size_t j = 0; j < lp.size(); ++j)
        grad[j] += std::exp(lp[j]) * (lp[j] - lq[j] - kl);
      total += kl;
      continue;
    }
    for (std::size_t d = 0; d < dist.size(); ++d) {
      const double var_p = std::exp(2.0 * self.log_std[d]);
      const double var_q = std::exp(2.0 * others[i].log_std[d]);
      const double diff = dist[d] - dq[d];
      total += others[i].log_std[d] - self.log_std[d] +
               (var_p + diff * diff) / (2.0 * var_q) - 0.5;
      grad[d] += diff / var_q;
    }
  }
  return total;
}

}  // namespace

void annotate_ground_truth_strategy(Trajectory& traj, DiversityMode mode,
                                    std::span<const Policy> policies,
                                    const SkillClassifier* classifier) {
  if (!traj.strategy) throw ConfigError("cannot annotate an unlabelled trajectory");
  const std::size_t k = *traj.strategy;
  if (mode == DiversityMode::kKl && k >= policies.size())
    throw ConfigError("KL annotation needs the policy of strategy " + std::to_string(k));
  if (mode == DiversityMode::kDiayn &&
      (classifier == nullptr || k >= classifier->num_skills()))
    throw ConfigError("DIAYN annotation needs a classifier covering strategy " +
                      std::to_string(k));
  for (auto& tr : traj.steps)
    tr.diversity = diversity_value(mode, policies, classifier, k, tr.state);
}

HeterogeneousResult train_heterogeneous_policies(const EnvModel& env,
                                                 const DiversityConfig& cfg,
                                                 Rng& rng) {
  const std::size_t n = cfg.n_strategies;
  if (n < 2) throw ConfigError("diversity.n_strategies must be >= 2");
  if (cfg.demos_per_strategy < 1) throw ConfigError("need at least one demo per strategy");

  std::vector<PolicyLearner> learners;
  for (std::size_t k = 0; k < n; ++k)
    learners.emplace_back(make_policy(env, cfg.hidden, rng), cfg.policy.lr);

  std::optional<SkillClassifier> cls;
  AdamState cls_adam;
  if (cfg.mode == DiversityMode::kDiayn) {
    cls = make_classifier(env.state_dim(), n, cfg.hidden, rng);
    cls_adam = AdamState(AdamConfig{.lr = cfg.classifier_lr}, cls->net);
  }

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    PolicySet snapshot;
    for (const auto& l : learners) snapshot.push_back(l.policy);
    std::vector<Vec> states;
    std::vector<std::size_t> labels;
    for (std::size_t k = 0; k < n; ++k) {
      auto trajs = collect_rollouts(learners[k].policy, env, cfg.batch_trajectories, rng);
      // Snapshot distribution parameters per visited state, shared by the
      // reward and the direct KL gradient.
      std::unordered_map<const Transition*, std::vector<Vec>> dists;
      for (auto& t : trajs) {
        t.strategy = k;
        for (auto& tr : t.steps) {
          double div = 0.0;
          if (cfg.mode == DiversityMode::kKl) {
            std::vector<Vec>& d = dists[&tr];
            for (const auto& p : snapshot) d.push_back(p.dist_params(tr.state));
            for (std::size_t i = 0; i < n; ++i)
              if (i != k) div += kl_from_params(snapshot[k], d[k], snapshot[i], d[i]);
          } else {
            div = diayn_pseudo_reward(*cls, tr.state, k);
            states.push_back(tr.state);
            labels.push_back(k);
          }
          tr.diversity = div;
          tr.pseudo_reward = tr.task_reward + cfg.weight * div;
        }
      }
      const auto adv = compute_advantages(trajs, RewardField::kPseudo, env.gamma());
      if (cfg.mode == DiversityMode::kKl && cfg.kl_pathwise) {
        // The KL bonus depends on pi_k itself: add its direct gradient
        // through the action distribution, others held at the snapshot.
        const Policy& self = learners[k].policy;
        DistObjective aux = [&](const Transition& tr, std::span<const double> dist,
                                std::span<double> grad) {
          return kl_to_others(self, dist, snapshot, dists.at(&tr), k, grad);
        };
        policy_update(learners[k], trajs, adv, cfg.policy, aux, cfg.weight);
      } else {
        policy_update(learners[k], trajs, adv, cfg.policy);
      }
    }
    if (cls)
      for (std::size_t s = 0; s < cfg.classifier_steps; ++s)
        classifier_update(*cls, cls_adam, states, labels);
  }

  HeterogeneousResult out;
  for (auto& l : learners) out.policies.push_back(std::move(l.policy));
  out.classifier = cls;
  out.demos.env_name = env.name();
  out.demos.state_dim = env.state_dim();
  out.demos.action_dim = env.discrete() ? 1 : env.action_dim();
  out.demos.mode = cfg.mode;
  out.demos.diversity_weight = cfg.weight;
  out.demos.strategies.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < cfg.demos_per_strategy; ++j) {
      Trajectory t = rollout(out.policies[k], env, rng);
      t.strategy = k;
      annotate_ground_truth_strategy(t, cfg.mode, out.policies,
                                     cls ? &*cls : nullptr);
      out.demos.strategies[k].push_back(std::move(t));
    }
  }
  return out;
}

}  // namespace msrd
