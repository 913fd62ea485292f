#include "msrd/msrd.hpp"

#include <cmath>

#include "msrd/errors.hpp"

namespace msrd {

std::string to_string(RewardArchitecture a) {
  return a == RewardArchitecture::kTwoColumn ? "two_column" : "vanilla";
}

std::string to_string(RegSource r) {
  switch (r) {
    case RegSource::kExpert: return "expert";
    case RegSource::kGenerated: return "generated";
    case RegSource::kBoth: return "both";
  }
  return "both";
}

RegSource reg_source_from_string(const std::string& s) {
  if (s == "expert") return RegSource::kExpert;
  if (s == "generated") return RegSource::kGenerated;
  if (s == "both") return RegSource::kBoth;
  throw ConfigError("unknown reg_source '" + s + "' (expected expert|generated|both)");
}

void MsrdRewardModel::validate() const {
  if (strategy.empty()) throw ConfigError("reward model needs N >= 1 strategies");
  if (alpha.size() != strategy.size())
    throw ConfigError("reward model needs one alpha per strategy");
  task.net.validate();
  for (const auto& s : strategy) {
    s.net.validate();
    if (s.net.input_dim() != task.net.input_dim() || s.net.output_dim() != 1)
      throw ConfigError("strategy reward nets must share the task net's input signature");
  }
  for (double a : alpha)
    if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("alpha must be finite and >= 0");
}

double MsrdRewardModel::task_reward(std::span<const double> state,
                                    std::span<const double> action) const {
  return task(state, action);
}

double MsrdRewardModel::strategy_reward(std::size_t i, std::span<const double> state,
                                        std::span<const double> action) const {
  if (i >= strategy.size()) throw ConfigError("strategy index out of range");
  if (arch == RewardArchitecture::kVanilla)
    return strategy[i](state, action) - task(state, action);
  return strategy[i](state, action);
}

double strategy_combined_reward(const MsrdRewardModel& model, std::size_t i,
                                std::span<const double> state,
                                std::span<const double> action) {
  if (i >= model.num_strategies())
    throw ConfigError("strategy index " + std::to_string(i) + " out of range for " +
                      std::to_string(model.num_strategies()) + " strategies");
  if (model.arch == RewardArchitecture::kVanilla) return model.strategy[i](state, action);
  return model.task(state, action) + model.alpha[i] * model.strategy[i](state, action);
}

namespace {

double norm_value(double x, bool squared) { return squared ? x * x : std::abs(x); }

double norm_grad(double x, bool squared) {
  if (squared) return 2.0 * x;
  return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
}

// f = task + scale * strat on each sample; backprop of the cross-entropy
// into both nets (when their grad pointers are non-null).
double adversarial_term(const RewardNet* task, const RewardNet& strat, double scale,
                        std::span<const DiscSample> expert,
                        std::span<const DiscSample> gen, MlpParams* task_grad,
                        MlpParams& strat_grad) {
  const std::size_t ne = expert.size(), ng = gen.size();
  std::vector<MlpCache> tc(ne + ng), sc(ne + ng);
  Vec fe(ne), le(ne), fg(ng), lg(ng);
  auto f_of = [&](const Vec& in, std::size_t slot) {
    double f = scale * mlp_forward(strat.net, in, sc[slot])[0];
    if (task != nullptr) f = mlp_forward(task->net, in, tc[slot])[0] + f;
    return f;
  };
  for (std::size_t j = 0; j < ne; ++j) {
    fe[j] = f_of(expert[j].input, j);
    le[j] = expert[j].log_pi;
  }
  for (std::size_t j = 0; j < ng; ++j) {
    fg[j] = f_of(gen[j].input, ne + j);
    lg[j] = gen[j].log_pi;
  }
  const CrossEntropyTerms t = discriminator_cross_entropy(fe, le, fg, lg);
  for (std::size_t j = 0; j < ne + ng; ++j) {
    const double d = j < ne ? t.d_expert[j] : t.d_gen[j - ne];
    if (task != nullptr && task_grad != nullptr)
      mlp_backward_accumulate(task->net, tc[j], std::span(&d, 1), *task_grad);
    const double ds = scale * d;
    if (scale != 0.0) mlp_backward_accumulate(strat.net, sc[j], std::span(&ds, 1), strat_grad);
  }
  return t.loss;
}

}  // namespace

MsrdLoss msrd_discriminator_loss(const MsrdRewardModel& model, std::size_t i,
                                 std::span<const DiscSample> expert,
                                 std::span<const DiscSample> gen,
                                 std::span<const Vec> reg_inputs, bool l2_squared) {
  if (i >= model.num_strategies()) throw ConfigError("strategy index out of range");
  if (model.arch != RewardArchitecture::kTwoColumn)
    throw ConfigError("msrd_discriminator_loss needs a two-column model");
  const RewardNet& resid = model.strategy[i];
  const double alpha = model.alpha[i];
  MsrdLoss out;
  out.task_grad = model.task.net.zeros_like();
  out.strategy_grad = resid.net.zeros_like();
  out.disc_loss = adversarial_term(&model.task, resid, alpha, expert, gen,
                                   &out.task_grad, out.strategy_grad);

  if (!reg_inputs.empty() && alpha != 0.0) {
    const double inv_n = 1.0 / static_cast<double>(reg_inputs.size());
    Vec vals(reg_inputs.size());
    MlpCache cache;
    for (std::size_t j = 0; j < reg_inputs.size(); ++j) {
      const double r = mlp_forward(resid.net, reg_inputs[j], cache)[0];
      vals[j] = norm_value(r, l2_squared);
      const double g = alpha * norm_grad(r, l2_squared) * inv_n;
      mlp_backward_accumulate(resid.net, cache, std::span(&g, 1), out.strategy_grad);
    }
    out.regularizer = alpha * pairwise_sum(vals) * inv_n;
  }
  out.loss = out.disc_loss + out.regularizer;
  if (!std::isfinite(out.loss))
    throw TrainingError("MSRD loss for strategy " + std::to_string(i) + " is not finite");
  return out;
}

MsrdLoss vanilla_distill_loss(const RewardNet& task, const RewardNet& combined,
                              std::span<const DiscSample> expert,
                              std::span<const DiscSample> gen,
                              std::span<const Vec> reg_inputs, bool l2_squared) {
  MsrdLoss out;
  out.task_grad = task.net.zeros_like();
  out.strategy_grad = combined.net.zeros_like();
  out.disc_loss = adversarial_term(nullptr, combined, 1.0, expert, gen, nullptr,
                                   out.strategy_grad);
  if (!reg_inputs.empty()) {
    const double inv_n = 1.0 / static_cast<double>(reg_inputs.size());
    Vec vals(reg_inputs.size());
    MlpCache ct, cc;
    for (std::size_t j = 0; j < reg_inputs.size(); ++j) {
      const double diff = mlp_forward(combined.net, reg_inputs[j], cc)[0] -
                          mlp_forward(task.net, reg_inputs[j], ct)[0];
      vals[j] = norm_value(diff, l2_squared);
      const double g = norm_grad(diff, l2_squared) * inv_n;
      const double ng = -g;
      mlp_backward_accumulate(combined.net, cc, std::span(&g, 1), out.strategy_grad);
      mlp_backward_accumulate(task.net, ct, std::span(&ng, 1), out.task_grad);
    }
    out.regularizer = pairwise_sum(vals) * inv_n;
  }
  out.loss = out.disc_loss + out.regularizer;
  if (!std::isfinite(out.loss)) throw TrainingError("distillation loss is not finite");
  return out;
}

void assign_pseudo_rewards(const MsrdRewardModel& model, std::size_t i,
                           std::span<Trajectory> trajectories) {
  if (i >= model.num_strategies()) throw ConfigError("strategy index out of range");
  for (auto& t : trajectories)
    for (auto& tr : t.steps)
      tr.pseudo_reward = strategy_combined_reward(model, i, tr.state, tr.action);
}

MsrdTrainState msrd_init(const EnvModel& env, std::size_t n_strategies,
                         const MsrdConfig& cfg, Rng& rng) {
  if (n_strategies < 1) throw ConfigError("MSRD needs at least one strategy");
  if (cfg.alpha.size() != 1 && cfg.alpha.size() != n_strategies)
    throw ConfigError("msrd.alpha needs 1 or N values");
  // Same fork/initialization order as airl_train, so N = 1 runs line up.
  Rng init = rng.fork();
  MsrdTrainState st;
  st.model.arch = cfg.arch;
  st.model.task = make_reward_net(env.state_dim(), env.action_vec_dim(), cfg.adv.hidden, init);
  for (std::size_t i = 0; i < n_strategies; ++i)
    st.policies.emplace_back(make_policy(env, cfg.adv.policy_hidden, init), cfg.adv.policy.lr);
  for (std::size_t i = 0; i < n_strategies; ++i) {
    st.model.strategy.push_back(
        make_reward_net(env.state_dim(), env.action_vec_dim(), cfg.adv.hidden, init));
    st.strategy_adam.emplace_back(AdamConfig{.lr = cfg.adv.reward_lr},
                                  st.model.strategy.back().net);
    st.model.alpha.push_back(cfg.alpha.size() == 1 ? cfg.alpha[0] : cfg.alpha[i]);
    st.replay.emplace_back().capacity = cfg.adv.replay_trajectories;
  }
  st.task_adam = AdamState(AdamConfig{.lr = cfg.adv.reward_lr}, st.model.task.net);
  st.model.validate();
  st.rng = rng;
  return st;
}

std::vector<TrainLogRow> msrd_run_epochs(MsrdTrainState& st, const EnvModel& env,
                                         const DemoSet& demos, const MsrdConfig& cfg,
                                         std::size_t epochs) {
  const std::size_t n = st.model.num_strategies();
  if (demos.num_strategies() != n)
    throw ConfigError("demo set has " + std::to_string(demos.num_strategies()) +
                      " strategies, model has " + std::to_string(n));
  if (cfg.adv.k_rollouts < 1) throw ConfigError("msrd.k_rollouts must be >= 1");
  const bool two_column = st.model.arch == RewardArchitecture::kTwoColumn;
  Rng& rng = st.rng;
  std::vector<TrainLogRow> log;

  for (std::size_t e = 0; e < epochs; ++e) {
    MlpParams task_acc = st.model.task.net.zeros_like();
    std::size_t task_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      PolicyLearner& pl = st.policies[i];
      auto gen = collect_rollouts(pl.policy, env, cfg.adv.k_rollouts, rng);
      const auto& d_i = demos.strategies[i];
      const auto expert =
          sample_trajectories(d_i, std::min(cfg.adv.k_rollouts, d_i.size()), rng);
      const TransitionPool expert_pool(expert);

      MsrdLoss last;
      for (std::size_t s = 0; s < cfg.adv.disc_steps; ++s) {
        const auto eb = expert_samples(expert_pool, pl.policy, cfg.adv.batch_size, rng);
        const auto gb = replay_samples(gen, st.replay[i], cfg.adv.batch_size, rng);
        std::vector<Vec> reg;
        if (cfg.reg_source != RegSource::kGenerated)
          for (const auto& x : eb) reg.push_back(x.input);
        if (cfg.reg_source != RegSource::kExpert)
          for (const auto& x : gb) reg.push_back(x.input);
        last = two_column
                   ? msrd_discriminator_loss(st.model, i, eb, gb, reg, cfg.l2_squared)
                   : vanilla_distill_loss(st.model.task, st.model.strategy[i], eb, gb,
                                          reg, cfg.l2_squared);
        adam_step(st.strategy_adam[i], st.model.strategy[i].net, last.strategy_grad);
        if (cfg.defer_task_update) {
          task_acc.add_scaled(last.task_grad, 1.0);
          ++task_count;
        } else {
          adam_step(st.task_adam, st.model.task.net, last.task_grad);
        }
      }

      st.replay[i].offer(gen, rng);
      assign_pseudo_rewards(st.model, i, gen);
      Vec pseudo;
      for (const auto& t : gen)
        for (const auto& tr : t.steps) pseudo.push_back(*tr.pseudo_reward);
      const auto adv = compute_advantages(gen, RewardField::kPseudo, env.gamma());
      policy_update(pl, gen, adv, cfg.adv.policy);
      log.push_back({st.epoch, i, last.disc_loss, last.regularizer, mean(pseudo),
                     mean_task_return(gen, env.gamma())});
    }
    if (cfg.defer_task_update && task_count > 0) {
      task_acc.add_scaled(task_acc, 1.0 / static_cast<double>(task_count) - 1.0);
      adam_step(st.task_adam, st.model.task.net, task_acc);
    }
    for (const auto& l : st.model.task.net.layers)
      if (!all_finite(l.w) || !all_finite(l.b))
        throw TrainingError("task reward parameters became non-finite at epoch " +
                            std::to_string(st.epoch));
    ++st.epoch;
  }
  return log;
}

MsrdTrainState msrd_train(const EnvModel& env, const DemoSet& demos,
                          const MsrdConfig& cfg, Rng& rng,
                          std::vector<TrainLogRow>* log) {
  demos.validate();
  if (demos.min_per_strategy() < 1) throw ConfigError("every strategy needs demonstrations");
  MsrdTrainState st = msrd_init(env, demos.num_strategies(), cfg, rng);
  auto rows = msrd_run_epochs(st, env, demos, cfg, cfg.adv.iterations);
  rng = st.rng;
  if (log != nullptr) *log = std::move(rows);
  return st;
}

}  // namespace msrd
