#include "msrd/policy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "msrd/errors.hpp"

namespace msrd {

namespace {

double clamp_log_std(double x) { return std::clamp(x, kLogStdMin, kLogStdMax); }

Vec squash(const Policy& p, Vec raw) {
  if (p.space == ActionSpace::kGaussian && p.mean_limit > 0.0)
    for (auto& r : raw) r = p.mean_limit * std::tanh(r);
  return raw;
}

}  // namespace

Vec Policy::dist_params(std::span<const double> state) const {
  return squash(*this, mlp_forward(net, state));
}

double Policy::log_prob(std::span<const double> state,
                        std::span<const double> action) const {
  const Vec d = dist_params(state);
  if (space == ActionSpace::kCategorical)
    return categorical_log_prob(d, static_cast<std::size_t>(action[0]));
  return gaussian_log_prob(d, log_std, action);
}

std::vector<std::span<double>> Policy::blocks() {
  auto b = net.blocks();
  if (space == ActionSpace::kGaussian) b.emplace_back(log_std);
  return b;
}

std::vector<std::span<const double>> Policy::blocks() const {
  auto b = net.blocks();
  if (space == ActionSpace::kGaussian) b.emplace_back(log_std);
  return b;
}

Policy make_policy(const EnvModel& env, std::span<const std::size_t> hidden,
                   Rng& rng, double init_log_std) {
  std::vector<std::size_t> sizes{env.state_dim()};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(env.action_dim());
  Policy p;
  p.net = make_mlp(sizes, rng, 0.01);
  if (env.discrete()) {
    p.space = ActionSpace::kCategorical;
  } else {
    p.space = ActionSpace::kGaussian;
    p.log_std.assign(env.action_dim(), clamp_log_std(init_log_std));
    p.mean_limit = env.action_limit();
  }
  return p;
}

ActionSample policy_sample(const Policy& policy, std::span<const double> state,
                           Rng& rng) {
  if (state.size() != policy.state_dim())
    throw ConfigError("policy_sample: state dim mismatch");
  const Vec d = policy.dist_params(state);
  ActionSample s;
  if (policy.space == ActionSpace::kCategorical) {
    const Vec probs = softmax(d);
    const double u = rng.uniform();
    std::size_t idx = probs.size() - 1;
    double acc = 0.0;
    for (std::size_t j = 0; j < probs.size(); ++j) {
      acc += probs[j];
      if (u < acc) {
        idx = j;
        break;
      }
    }
    s.action = {static_cast<double>(idx)};
    s.log_prob = categorical_log_prob(d, idx);
    return s;
  }
  s.action.resize(d.size());
  for (std::size_t j = 0; j < d.size(); ++j)
    s.action[j] = d[j] + std::exp(policy.log_std[j]) * rng.normal();
  s.log_prob = gaussian_log_prob(d, policy.log_std, s.action);
  return s;
}

Trajectory rollout(const Policy& policy, const EnvModel& env, Rng& rng,
                   double noise_eps) {
  Trajectory t;
  t.steps.reserve(env.horizon());
  Vec state = env.reset(rng);
  for (std::size_t k = 0; k < env.horizon(); ++k) {
    Transition tr;
    bool random = noise_eps >= 1.0;
    if (noise_eps > 0.0 && noise_eps < 1.0) random = rng.uniform() < noise_eps;
    if (random) {
      tr.action = env.random_action(rng);
      tr.log_prob = policy.log_prob(state, tr.action);
    } else {
      ActionSample s = policy_sample(policy, state, rng);
      tr.action = std::move(s.action);
      tr.log_prob = s.log_prob;
    }
    StepResult r = env.step(state, tr.action);
    tr.task_reward = r.task_reward;
    tr.state = std::move(state);
    state = std::move(r.next_state);
    t.steps.push_back(std::move(tr));
  }
  return t;
}

std::vector<Trajectory> collect_rollouts(const Policy& policy,
                                         const EnvModel& env, std::size_t count,
                                         Rng& rng) {
  if (count < 1) throw ConfigError("collect_rollouts: count must be >= 1");
  std::vector<Trajectory> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) out.push_back(rollout(policy, env, rng));
  return out;
}

Vec reward_to_go(const Trajectory& traj, RewardField field, double gamma) {
  Vec rtg(traj.length(), 0.0);
  double acc = 0.0;
  for (std::size_t k = traj.length(); k-- > 0;) {
    const Transition& tr = traj.steps[k];
    double r = tr.task_reward;
    if (field == RewardField::kPseudo) {
      if (!tr.pseudo_reward)
        throw ConfigError("compute_advantages: pseudo_reward missing at step " +
                          std::to_string(k));
      r = *tr.pseudo_reward;
    }
    acc = r + gamma * acc;
    rtg[k] = acc;
  }
  return rtg;
}

std::vector<Vec> compute_advantages(std::span<const Trajectory> batch,
                                    RewardField field, double gamma) {
  std::vector<Vec> adv;
  adv.reserve(batch.size());
  std::size_t max_len = 0;
  for (const auto& t : batch) {
    adv.push_back(reward_to_go(t, field, gamma));
    max_len = std::max(max_len, t.length());
  }
  Vec sum(max_len, 0.0);
  std::vector<std::size_t> cnt(max_len, 0);
  for (const auto& a : adv)
    for (std::size_t k = 0; k < a.size(); ++k) {
      sum[k] += a[k];
      ++cnt[k];
    }
  for (auto& a : adv)
    for (std::size_t k = 0; k < a.size(); ++k)
      a[k] -= sum[k] / static_cast<double>(cnt[k]);
  return adv;
}

PolicyBatch make_policy_batch(std::span<const Trajectory> trajs,
                              std::span<const Vec> advantages) {
  if (trajs.size() != advantages.size())
    throw ConfigError("advantages not aligned with trajectories");
  PolicyBatch b;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    if (trajs[i].length() != advantages[i].size())
      throw ConfigError("advantages not aligned with transitions of trajectory " +
                        std::to_string(i));
    for (std::size_t k = 0; k < trajs[i].length(); ++k) {
      b.steps.push_back(&trajs[i].steps[k]);
      b.advantages.push_back(advantages[i][k]);
    }
  }
  return b;
}

double mean_entropy(const Policy& policy, const PolicyBatch& batch) {
  if (policy.space == ActionSpace::kGaussian) {
    double h = 0.0;
    for (double ls : policy.log_std) h += ls + 0.5 * (1.0 + kLog2Pi);
    return h;
  }
  Vec hs;
  hs.reserve(batch.steps.size());
  for (const Transition* tr : batch.steps) {
    const Vec lp = log_softmax(policy.dist_params(tr->state));
    double h = 0.0;
    for (double l : lp) h -= std::exp(l) * l;
    hs.push_back(h);
  }
  return mean(hs);
}

SurrogateResult surrogate_loss(const Policy& policy, const PolicyBatch& batch,
                               double clip, double entropy_coef,
                               const DistObjective& aux, double aux_coef) {
  const std::size_t n = batch.steps.size();
  if (n == 0) throw ConfigError("surrogate_loss: empty batch");
  const double inv_n = 1.0 / static_cast<double>(n);
  const bool gaussian = policy.space == ActionSpace::kGaussian;

  MlpParams net_grad = policy.net.zeros_like();
  Vec log_std_grad(policy.log_std.size(), 0.0);
  Vec terms(n), ent_terms, aux_terms;
  std::size_t clipped = 0;
  MlpCache cache;
  Vec upstream(policy.action_dim());
  Vec aux_grad(policy.action_dim());

  for (std::size_t s = 0; s < n; ++s) {
    const Transition& tr = *batch.steps[s];
    const double adv = batch.advantages[s];
    const Vec raw = mlp_forward(policy.net, tr.state, cache);
    const Vec dist = squash(policy, raw);

    double lp = 0.0;
    Vec probs;
    if (gaussian) {
      lp = gaussian_log_prob(dist, policy.log_std, tr.action);
    } else {
      probs = softmax(dist);
      lp = categorical_log_prob(dist, static_cast<std::size_t>(tr.action[0]));
    }
    const double ratio = std::exp(lp - tr.log_prob);
    const double clipped_ratio = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
    const double unclipped_obj = ratio * adv;
    const double clipped_obj = clipped_ratio * adv;
    terms[s] = std::min(unclipped_obj, clipped_obj);
    const bool active = unclipped_obj <= clipped_obj;
    if (!active) ++clipped;
    // d loss / d logp
    const double g = active ? -adv * ratio * inv_n : 0.0;

    std::fill(upstream.begin(), upstream.end(), 0.0);
    if (gaussian) {
      for (std::size_t d = 0; d < dist.size(); ++d) {
        const double inv_sigma = std::exp(-policy.log_std[d]);
        const double z = (tr.action[d] - dist[d]) * inv_sigma;
        upstream[d] += g * z * inv_sigma;
        log_std_grad[d] += g * (z * z - 1.0);
      }
    } else {
      const auto a = static_cast<std::size_t>(tr.action[0]);
      double h = 0.0;
      for (double p : probs) h -= p > 0.0 ? p * std::log(p) : 0.0;
      ent_terms.push_back(h);
      for (std::size_t j = 0; j < probs.size(); ++j) {
        upstream[j] += g * ((j == a ? 1.0 : 0.0) - probs[j]);
        const double lpj = probs[j] > 0.0 ? std::log(probs[j]) : 0.0;
        upstream[j] += entropy_coef * inv_n * probs[j] * (lpj + h);
      }
    }
    if (aux && aux_coef != 0.0) {
      std::fill(aux_grad.begin(), aux_grad.end(), 0.0);
      aux_terms.push_back(aux(tr, dist, aux_grad));
      for (std::size_t j = 0; j < upstream.size(); ++j)
        upstream[j] -= aux_coef * inv_n * aux_grad[j];
    }
    if (gaussian && policy.mean_limit > 0.0)
      for (std::size_t d = 0; d < upstream.size(); ++d) {
        const double t = dist[d] / policy.mean_limit;
        upstream[d] *= policy.mean_limit * (1.0 - t * t);
      }
    mlp_backward_accumulate(policy.net, cache, upstream, net_grad);
  }

  SurrogateResult r;
  r.entropy = gaussian ? mean_entropy(policy, batch) : mean(ent_terms);
  if (gaussian)
    for (auto& g : log_std_grad) g -= entropy_coef;
  r.loss = -mean(terms) - entropy_coef * r.entropy;
  if (!aux_terms.empty()) r.loss -= aux_coef * mean(aux_terms);
  r.clip_fraction = static_cast<double>(clipped) * inv_n;
  for (auto b : net_grad.blocks()) r.grads.emplace_back(b.begin(), b.end());
  if (gaussian) r.grads.push_back(std::move(log_std_grad));
  return r;
}

PolicyLearner::PolicyLearner(Policy p, double lr)
    : policy(std::move(p)),
      adam(AdamConfig{.lr = lr}, std::as_const(policy).blocks()) {}

SurrogateResult policy_update(PolicyLearner& learner,
                              std::span<const Trajectory> trajs,
                              std::span<const Vec> advantages,
                              const PolicyUpdateConfig& cfg,
                              const DistObjective& aux, double aux_coef) {
  PolicyBatch batch = make_policy_batch(trajs, advantages);
  if (batch.steps.empty()) throw ConfigError("policy_update: empty batch");
  if (cfg.normalize_advantages) {
    const double m = mean(batch.advantages);
    double var = 0.0;
    for (double a : batch.advantages) var += (a - m) * (a - m);
    const double sd = std::sqrt(var / static_cast<double>(batch.advantages.size()));
    if (sd > 1e-12) {
      for (auto& a : batch.advantages) a /= sd;
      // Keep the auxiliary objective in the same (reward) units.
      aux_coef /= sd;
    }
  }
  learner.adam.config.lr = cfg.lr;
  SurrogateResult last;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    last = surrogate_loss(learner.policy, batch, cfg.clip, cfg.entropy_coef, aux,
                          aux_coef);
    if (!std::isfinite(last.loss)) {
      std::ostringstream os;
      os << "policy_update: non-finite surrogate loss at epoch " << e
         << " (batch size " << batch.steps.size() << ", mean advantage "
         << mean(batch.advantages) << ", entropy " << last.entropy << ")";
      throw TrainingError(os.str());
    }
    std::vector<std::span<const double>> g(last.grads.begin(), last.grads.end());
    auto p = learner.policy.blocks();
    adam_step(learner.adam, p, g);
    for (auto& ls : learner.policy.log_std) ls = clamp_log_std(ls);
  }
  return last;
}

double discounted_task_return(const Trajectory& traj, double gamma) {
  double acc = 0.0, disc = 1.0;
  for (const auto& tr : traj.steps) {
    acc += disc * tr.task_reward;
    disc *= gamma;
  }
  return acc;
}

double mean_task_return(std::span<const Trajectory> trajs, double gamma) {
  Vec r;
  for (const auto& t : trajs) r.push_back(discounted_task_return(t, gamma));
  return mean(r);
}

}  // namespace msrd
