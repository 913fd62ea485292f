#include "msrd/airl.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "msrd/errors.hpp"

namespace msrd {

double RewardNet::operator()(std::span<const double> state,
                             std::span<const double> action) const {
  const Vec in = concat(state, action);
  return mlp_forward(net, in)[0];
}

double RewardNet::operator()(std::span<const double> input) const {
  return mlp_forward(net, input)[0];
}

RewardNet make_reward_net(std::size_t state_dim, std::size_t action_dim,
                          std::span<const std::size_t> hidden, Rng& rng,
                          double final_scale) {
  std::vector<std::size_t> sizes{state_dim + action_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return RewardNet{make_mlp(sizes, rng, final_scale)};
}

Vec concat(std::span<const double> a, std::span<const double> b) {
  Vec out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double discriminator_prob(double f_value, double log_pi) {
  const double x = f_value - log_pi;
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

CrossEntropyTerms discriminator_cross_entropy(std::span<const double> f_expert,
                                              std::span<const double> lp_expert,
                                              std::span<const double> f_gen,
                                              std::span<const double> lp_gen) {
  if (f_expert.empty() || f_gen.empty())
    throw ConfigError("discriminator loss needs non-empty expert and generated batches");
  CrossEntropyTerms t;
  const double ne = static_cast<double>(f_expert.size());
  const double ng = static_cast<double>(f_gen.size());
  Vec le(f_expert.size()), lg(f_gen.size());
  t.d_expert.resize(f_expert.size());
  t.d_gen.resize(f_gen.size());
  for (std::size_t j = 0; j < f_expert.size(); ++j) {
    const double x = f_expert[j] - lp_expert[j];
    le[j] = log_sigmoid(x);                           // log D
    t.d_expert[j] = -discriminator_prob(-x, 0.0) / ne;  // -(1 - D) / n
  }
  for (std::size_t j = 0; j < f_gen.size(); ++j) {
    const double x = f_gen[j] - lp_gen[j];
    lg[j] = log_sigmoid(-x);  // log(1 - D)
    t.d_gen[j] = discriminator_prob(x, 0.0) / ng;
  }
  t.loss = -pairwise_sum(le) / ne - pairwise_sum(lg) / ng;
  return t;
}

DiscriminatorLoss airl_discriminator_loss(const RewardNet& reward,
                                          std::span<const DiscSample> expert,
                                          std::span<const DiscSample> gen) {
  std::vector<MlpCache> ce(expert.size()), cg(gen.size());
  Vec fe(expert.size()), le(expert.size()), fg(gen.size()), lg(gen.size());
  for (std::size_t j = 0; j < expert.size(); ++j) {
    fe[j] = mlp_forward(reward.net, expert[j].input, ce[j])[0];
    le[j] = expert[j].log_pi;
  }
  for (std::size_t j = 0; j < gen.size(); ++j) {
    fg[j] = mlp_forward(reward.net, gen[j].input, cg[j])[0];
    lg[j] = gen[j].log_pi;
  }
  const CrossEntropyTerms t = discriminator_cross_entropy(fe, le, fg, lg);
  if (!std::isfinite(t.loss)) throw TrainingError("AIRL discriminator loss is not finite");
  DiscriminatorLoss out{t.loss, reward.net.zeros_like()};
  for (std::size_t j = 0; j < expert.size(); ++j)
    mlp_backward_accumulate(reward.net, ce[j], std::span(&t.d_expert[j], 1), out.grad);
  for (std::size_t j = 0; j < gen.size(); ++j)
    mlp_backward_accumulate(reward.net, cg[j], std::span(&t.d_gen[j], 1), out.grad);
  return out;
}

TransitionPool::TransitionPool(std::span<const Trajectory> trajs) {
  for (const auto& t : trajs)
    for (const auto& s : t.steps) steps_.push_back(&s);
}

TransitionPool::TransitionPool(std::span<const Trajectory* const> trajs) {
  for (const Trajectory* t : trajs)
    for (const auto& s : t->steps) steps_.push_back(&s);
}

const Transition& TransitionPool::sample(Rng& rng) const {
  if (steps_.empty()) throw ConfigError("cannot sample from an empty transition pool");
  return *steps_[rng.uniform_int(steps_.size())];
}

std::vector<const Trajectory*> sample_trajectories(std::span<const Trajectory> from,
                                                   std::size_t count, Rng& rng) {
  if (count > from.size())
    throw ConfigError("cannot sample " + std::to_string(count) + " of " +
                      std::to_string(from.size()) + " trajectories");
  std::vector<std::size_t> idx(from.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<const Trajectory*> out;
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t pick = j + rng.uniform_int(idx.size() - j);
    std::swap(idx[j], idx[pick]);
    out.push_back(&from[idx[j]]);
  }
  return out;
}

std::vector<DiscSample> expert_samples(const TransitionPool& pool,
                                       const Policy& policy, std::size_t count,
                                       Rng& rng) {
  std::vector<DiscSample> out;
  out.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    const Transition& tr = pool.sample(rng);
    out.push_back({concat(tr.state, tr.action), policy.log_prob(tr.state, tr.action)});
  }
  return out;
}

std::vector<DiscSample> generated_samples(const TransitionPool& pool,
                                          std::size_t count, Rng& rng) {
  std::vector<DiscSample> out;
  out.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    const Transition& tr = pool.sample(rng);
    out.push_back({concat(tr.state, tr.action), tr.log_prob});
  }
  return out;
}

void GeneratorReplay::offer(std::span<const Trajectory> trajs, Rng& rng) {
  if (capacity == 0) return;
  for (const auto& t : trajs) {
    ++seen;
    if (items.size() < capacity) {
      items.push_back(t);
    } else {
      const std::size_t slot = rng.uniform_int(seen);
      if (slot < capacity) items[slot] = t;
    }
  }
}

std::vector<DiscSample> replay_samples(std::span<const Trajectory> current,
                                       const GeneratorReplay& replay, std::size_t count,
                                       Rng& rng) {
  std::vector<const Trajectory*> all;
  for (const auto& t : current) all.push_back(&t);
  for (const auto& t : replay.items) all.push_back(&t);
  return generated_samples(TransitionPool{std::span<const Trajectory* const>(all)}, count,
                           rng);
}

AirlResult airl_train(const EnvModel& env, std::span<const Trajectory> demos,
                      const AdversarialConfig& cfg, Rng& rng) {
  if (demos.empty()) throw ConfigError("airl_train: no demonstrations");
  if (cfg.k_rollouts < 1) throw ConfigError("airl_train: k_rollouts must be >= 1");
  const std::size_t k_expert = std::min(cfg.k_rollouts, demos.size());

  Rng init = rng.fork();
  AirlResult out;
  out.reward = make_reward_net(env.state_dim(), env.action_vec_dim(), cfg.hidden, init);
  PolicyLearner learner(make_policy(env, cfg.policy_hidden, init), cfg.policy.lr);
  AdamState reward_adam(AdamConfig{.lr = cfg.reward_lr}, out.reward.net);
  GeneratorReplay replay;
  replay.capacity = cfg.replay_trajectories;

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    auto gen = collect_rollouts(learner.policy, env, cfg.k_rollouts, rng);
    const auto expert = sample_trajectories(demos, k_expert, rng);
    const TransitionPool expert_pool(expert);

    double loss = 0.0;
    for (std::size_t s = 0; s < cfg.disc_steps; ++s) {
      const auto eb = expert_samples(expert_pool, learner.policy, cfg.batch_size, rng);
      const auto gb = replay_samples(gen, replay, cfg.batch_size, rng);
      DiscriminatorLoss d = airl_discriminator_loss(out.reward, eb, gb);
      adam_step(reward_adam, out.reward.net, d.grad);
      loss = d.loss;
    }

    replay.offer(gen, rng);

    Vec pseudo;
    for (auto& t : gen)
      for (auto& tr : t.steps) {
        tr.pseudo_reward = out.reward(tr.state, tr.action);
        pseudo.push_back(*tr.pseudo_reward);
      }
    const auto adv = compute_advantages(gen, RewardField::kPseudo, env.gamma());
    policy_update(learner, gen, adv, cfg.policy);
    out.log.push_back({it, 0, loss, 0.0, mean(pseudo), mean_task_return(gen, env.gamma())});
  }
  out.policy = std::move(learner.policy);
  return out;
}

}  // namespace msrd
