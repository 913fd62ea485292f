#include "msrd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include "json.hpp"

#include "msrd/errors.hpp"

namespace msrd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double pearson_or_nan(std::span<const double> xs, std::span<const double> ys) {
  try {
    return pearson(xs, ys);
  } catch (const ConfigError&) {
    return kNaN;
  }
}

RewardFn as_fn(const RewardNet& net) {
  return [&net](std::span<const double> s, std::span<const double> a) { return net(s, a); };
}

std::pair<double, double> min_max(std::span<const double> v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return {*lo, *hi};
}

double unit_scale(double x, double lo, double hi) {
  return hi > lo ? (x - lo) / (hi - lo) : 0.5;
}

}  // namespace

std::vector<NoisyTrajectory> noise_injection_dataset(std::span<const Policy> policies,
                                                     const EnvModel& env,
                                                     std::span<const double> noise_levels,
                                                     std::size_t per_level, Rng& rng) {
  if (noise_levels.empty()) throw ConfigError("noise_levels must be non-empty");
  for (double e : noise_levels)
    if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("noise levels must lie in [0, 1]");
  std::vector<NoisyTrajectory> out;
  out.reserve(policies.size() * noise_levels.size() * per_level);
  for (std::size_t p = 0; p < policies.size(); ++p)
    for (double eps : noise_levels)
      for (std::size_t j = 0; j < per_level; ++j) {
        NoisyTrajectory nt;
        nt.traj = rollout(policies[p], env, rng, eps);
        nt.policy = p;
        nt.noise = eps;
        nt.true_return = discounted_task_return(nt.traj, env.gamma());
        out.push_back(std::move(nt));
      }
  return out;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size())
    throw ConfigError("pearson: length mismatch " + std::to_string(xs.size()) + " vs " +
                      std::to_string(ys.size()));
  if (xs.size() < 2) throw ConfigError("pearson: need at least two points");
  const double mx = mean(xs), my = mean(ys);
  Vec sxy(xs.size()), sxx(xs.size()), syy(xs.size());
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const double dx = xs[j] - mx, dy = ys[j] - my;
    sxy[j] = dx * dy;
    sxx[j] = dx * dx;
    syy[j] = dy * dy;
  }
  const double vx = pairwise_sum(sxx), vy = pairwise_sum(syy);
  if (!(vx > 0.0) || !(vy > 0.0))
    throw ConfigError("pearson: correlation undefined for a constant sequence");
  const double r = pairwise_sum(sxy) / std::sqrt(vx * vy);
  return std::clamp(r, -1.0, 1.0);
}

double trajectory_reward_sum(const RewardFn& reward, const Trajectory& traj,
                             double gamma, bool discounted) {
  double total = 0.0, w = 1.0;
  for (const auto& tr : traj.steps) {
    total += w * reward(tr.state, tr.action);
    if (discounted) w *= gamma;
  }
  return total;
}

Vec maxent_likelihood_oracle(const RewardFn& reward, const EnvModel& env,
                             std::size_t horizon) {
  const auto trajs = enumerate_trajectories(env, horizon);
  Vec returns(trajs.size());
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    double total = 0.0, w = 1.0;
    for (std::size_t t = 0; t < trajs[k].actions.size(); ++t) {
      const double a = static_cast<double>(trajs[k].actions[t]);
      total += w * reward(trajs[k].states[t], std::span(&a, 1));
      w *= env.gamma();
    }
    returns[k] = total;
  }
  return softmax(returns);
}

CrossEval cross_eval_matrix(std::span<const RewardFn> rewards, const DemoSet& demos) {
  const std::size_t n = rewards.size();
  if (demos.num_strategies() == 0) throw ConfigError("cross evaluation: empty demo set");
  for (const auto& d : demos.strategies)
    if (d.empty()) throw ConfigError("cross evaluation: a strategy has no demonstrations");
  CrossEval ce;
  ce.raw.assign(n, Vec(demos.num_strategies()));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < demos.num_strategies(); ++j) {
      Vec sums;
      for (const auto& t : demos.strategies[j])
        sums.push_back(trajectory_reward_sum(rewards[i], t, 1.0, false));
      ce.raw[i][j] = mean(sums);
    }
  for (std::size_t i = 0; i < n; ++i) {
    const auto [lo, hi] = min_max(ce.raw[i]);
    Vec row(ce.raw[i].size());
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = unit_scale(ce.raw[i][j], lo, hi);
    ce.normalized.push_back(std::move(row));
    ce.degenerate_rows.push_back(!(hi > lo));
    if (i < ce.raw[i].size()) {
      bool strict = true;
      for (std::size_t j = 0; j < ce.raw[i].size(); ++j)
        if (j != i && !(ce.raw[i][i] > ce.raw[i][j])) strict = false;
      if (strict) ++ce.diagonal_argmax;
    }
  }
  return ce;
}

CrossEval strategy_cross_eval(const MsrdRewardModel& model, const DemoSet& demos) {
  std::vector<RewardFn> fns;
  for (std::size_t i = 0; i < model.num_strategies(); ++i)
    fns.push_back([&model, i](std::span<const double> s, std::span<const double> a) {
      return model.strategy_reward(i, s, a);
    });
  return cross_eval_matrix(fns, demos);
}

SliceCurve reward_slice(const std::function<double(std::span<const double>)>& f,
                        std::span<const double> base_point, std::size_t varying_dim,
                        std::span<const double> grid) {
  if (varying_dim >= base_point.size())
    throw ConfigError("reward_slice: dimension " + std::to_string(varying_dim) +
                      " out of range for input of size " +
                      std::to_string(base_point.size()));
  SliceCurve c;
  c.varying_dim = varying_dim;
  c.base_point.assign(base_point.begin(), base_point.end());
  c.grid.assign(grid.begin(), grid.end());
  Vec x = c.base_point;
  for (double g : grid) {
    x[varying_dim] = g;
    c.values.push_back(f(x));
  }
  return c;
}

EvalReport run_h1_h2_report(const EnvModel& env, const DemoSet& demos,
                            std::span<const Policy> demo_policies,
                            const MsrdRewardModel& model,
                            std::span<const RewardNet> airl_baselines,
                            const EvalConfig& cfg, Rng& rng) {
  demos.validate();
  model.validate();
  const std::size_t n = model.num_strategies();
  if (demos.num_strategies() != n)
    throw ConfigError("model has " + std::to_string(n) + " strategies, demos have " +
                      std::to_string(demos.num_strategies()));
  if (!airl_baselines.empty() && airl_baselines.size() != n)
    throw ConfigError("need one AIRL baseline per strategy");

  EvalReport rep;
  rep.env_name = env.name();
  rep.num_strategies = n;
  rep.model_method = model.arch == RewardArchitecture::kTwoColumn ? "msrd" : "vanilla_distill";

  // H1
  const auto noisy =
      noise_injection_dataset(demo_policies, env, cfg.noise_levels, cfg.per_level, rng);
  Vec truth;
  for (const auto& nt : noisy) truth.push_back(nt.true_return);
  auto h1 = [&](const std::string& method, const RewardFn& r) {
    Vec learned;
    for (const auto& nt : noisy) learned.push_back(trajectory_reward_sum(r, nt.traj, env.gamma(), true));
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t k = 0; k < noisy.size(); ++k) groups[noisy[k].policy].push_back(k);
    for (const auto& [p, idx] : groups) {
      Vec t, l;
      for (auto k : idx) {
        t.push_back(truth[k]);
        l.push_back(learned[k]);
      }
      const auto [tlo, thi] = min_max(t);
      const auto [llo, lhi] = min_max(l);
      for (auto k : idx)
        rep.scatter.push_back({method, p, noisy[k].noise, unit_scale(truth[k], tlo, thi),
                               unit_scale(learned[k], llo, lhi)});
    }
    return pearson_or_nan(learned, truth);
  };
  rep.model_task_r = h1(rep.model_method, [&model](std::span<const double> s,
                                                   std::span<const double> a) {
    return model.task_reward(s, a);
  });
  for (std::size_t i = 0; i < airl_baselines.size(); ++i)
    rep.airl_task_r.push_back(h1("airl" + std::to_string(i), as_fn(airl_baselines[i])));

  // H2
  auto h2 = [&](std::size_t i, const RewardFn& r) {
    Vec learned, annotated;
    for (const auto& t : demos.strategies[i])
      for (const auto& tr : t.steps) {
        if (!tr.diversity) continue;
        learned.push_back(r(tr.state, tr.action));
        annotated.push_back(*tr.diversity);
      }
    return pearson_or_nan(learned, annotated);
  };
  for (std::size_t i = 0; i < n; ++i) {
    rep.model_strategy_r.push_back(h2(i, [&model, i](std::span<const double> s,
                                                     std::span<const double> a) {
      return model.strategy_reward(i, s, a);
    }));
    if (!airl_baselines.empty()) rep.airl_strategy_r.push_back(h2(i, as_fn(airl_baselines[i])));
  }

  rep.cross_eval = strategy_cross_eval(model, demos);

  Vec abs_task, abs_strat;
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& t : demos.strategies[i])
      for (const auto& tr : t.steps) {
        abs_task.push_back(std::abs(model.task_reward(tr.state, tr.action)));
        abs_strat.push_back(std::abs(model.strategy_reward(i, tr.state, tr.action)));
      }
  rep.mean_abs_task_reward = mean(abs_task);
  rep.mean_abs_strategy_reward = mean(abs_strat);

  // Slices through the origin of every input dimension.
  const std::size_t in_dim = env.state_dim() + env.action_vec_dim();
  Vec base(in_dim, 0.0);
  if (env.discrete()) base = concat(env.reset(rng), Vec{0.0});
  Vec grid;
  const std::size_t pts = std::max<std::size_t>(cfg.slice_points, 2);
  for (std::size_t k = 0; k < pts; ++k)
    grid.push_back(-cfg.slice_half_width +
                   2.0 * cfg.slice_half_width * static_cast<double>(k) /
                       static_cast<double>(pts - 1));
  auto add_slices = [&](const std::string& label, const MlpParams& net) {
    for (std::size_t d = 0; d < env.state_dim(); ++d) {
      auto c = reward_slice([&net](std::span<const double> x) { return mlp_forward(net, x)[0]; },
                            base, d, grid);
      c.label = label;
      rep.slices.push_back(std::move(c));
    }
  };
  add_slices("task", model.task.net);
  for (std::size_t i = 0; i < n; ++i)
    add_slices("strategy" + std::to_string(i), model.strategy[i].net);
  for (std::size_t i = 0; i < airl_baselines.size(); ++i)
    add_slices("airl" + std::to_string(i), airl_baselines[i].net);
  return rep;
}

namespace {

using nlohmann::json;

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json nums(std::span<const double> v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

double get_num(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

Vec get_nums(const json& j) {
  Vec v;
  for (const auto& x : j) v.push_back(get_num(x));
  return v;
}

}  // namespace

std::string report_to_json(const EvalReport& r) {
  json j;
  j["format"] = "msrd-eval-report";
  j["version"] = 1;
  j["env"] = r.env_name;
  j["num_strategies"] = r.num_strategies;
  j["model_method"] = r.model_method;
  j["h1"] = {{"model_task_r", num(r.model_task_r)}, {"airl_task_r", nums(r.airl_task_r)}};
  j["h2"] = {{"model_strategy_r", nums(r.model_strategy_r)},
             {"airl_strategy_r", nums(r.airl_strategy_r)}};
  json raw = json::array(), norm = json::array();
  for (const auto& row : r.cross_eval.raw) raw.push_back(nums(row));
  for (const auto& row : r.cross_eval.normalized) norm.push_back(nums(row));
  j["cross_eval"] = {{"raw", raw},
                     {"normalized", norm},
                     {"degenerate_rows", r.cross_eval.degenerate_rows},
                     {"diagonal_argmax", r.cross_eval.diagonal_argmax}};
  j["magnitudes"] = {{"mean_abs_task_reward", num(r.mean_abs_task_reward)},
                     {"mean_abs_strategy_reward", num(r.mean_abs_strategy_reward)}};
  json slices = json::array();
  for (const auto& c : r.slices)
    slices.push_back({{"label", c.label},
                      {"varying_dim", c.varying_dim},
                      {"base_point", nums(c.base_point)},
                      {"grid", nums(c.grid)},
                      {"values", nums(c.values)}});
  j["slices"] = slices;
  json scatter = json::array();
  for (const auto& p : r.scatter)
    scatter.push_back({{"method", p.method},
                       {"policy", p.policy},
                       {"noise", num(p.noise)},
                       {"true_return", num(p.true_return)},
                       {"learned_return", num(p.learned_return)}});
  j["scatter"] = scatter;
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("eval report: ") + e.what());
  }
  if (j.value("format", "") != "msrd-eval-report" || j.value("version", 0) != 1)
    throw FormatError("eval report: unrecognized format or version");
  try {
    EvalReport r;
    r.env_name = j.at("env").get<std::string>();
    r.num_strategies = j.at("num_strategies").get<std::size_t>();
    r.model_method = j.at("model_method").get<std::string>();
    r.model_task_r = get_num(j.at("h1").at("model_task_r"));
    r.airl_task_r = get_nums(j.at("h1").at("airl_task_r"));
    r.model_strategy_r = get_nums(j.at("h2").at("model_strategy_r"));
    r.airl_strategy_r = get_nums(j.at("h2").at("airl_strategy_r"));
    const auto& ce = j.at("cross_eval");
    for (const auto& row : ce.at("raw")) r.cross_eval.raw.push_back(get_nums(row));
    for (const auto& row : ce.at("normalized")) r.cross_eval.normalized.push_back(get_nums(row));
    r.cross_eval.degenerate_rows = ce.at("degenerate_rows").get<std::vector<bool>>();
    r.cross_eval.diagonal_argmax = ce.at("diagonal_argmax").get<std::size_t>();
    r.mean_abs_task_reward = get_num(j.at("magnitudes").at("mean_abs_task_reward"));
    r.mean_abs_strategy_reward = get_num(j.at("magnitudes").at("mean_abs_strategy_reward"));
    for (const auto& c : j.at("slices"))
      r.slices.push_back({c.at("label").get<std::string>(), c.at("varying_dim").get<std::size_t>(),
                          get_nums(c.at("base_point")), get_nums(c.at("grid")),
                          get_nums(c.at("values"))});
    for (const auto& p : j.at("scatter"))
      r.scatter.push_back({p.at("method").get<std::string>(), p.at("policy").get<std::size_t>(),
                           get_num(p.at("noise")), get_num(p.at("true_return")),
                           get_num(p.at("learned_return"))});
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("eval report: ") + e.what());
  }
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

std::string fmt(double x) {
  if (!std::isfinite(x)) return "nan";
  return nlohmann::json(x).dump();
}

}  // namespace

void write_report_files(const EvalReport& r, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  const std::filesystem::path root(dir);
  write_text(root / "report.json", report_to_json(r));

  std::string s = "method,policy,noise,true_return_norm,learned_return_norm\n";
  for (const auto& p : r.scatter)
    s += p.method + "," + std::to_string(p.policy) + "," + fmt(p.noise) + "," +
         fmt(p.true_return) + "," + fmt(p.learned_return) + "\n";
  write_text(root / "scatter.csv", s);

  s = "reward,demos,raw,normalized\n";
  for (std::size_t i = 0; i < r.cross_eval.raw.size(); ++i)
    for (std::size_t j = 0; j < r.cross_eval.raw[i].size(); ++j)
      s += std::to_string(i) + "," + std::to_string(j) + "," + fmt(r.cross_eval.raw[i][j]) +
           "," + fmt(r.cross_eval.normalized[i][j]) + "\n";
  write_text(root / "heatmap.csv", s);

  s = "label,varying_dim,x,value\n";
  for (const auto& c : r.slices)
    for (std::size_t k = 0; k < c.grid.size(); ++k)
      s += c.label + "," + std::to_string(c.varying_dim) + "," + fmt(c.grid[k]) + "," +
           fmt(c.values[k]) + "\n";
  write_text(root / "slices.csv", s);
}

}  // namespace msrd
