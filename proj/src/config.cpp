#include "msrd/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "msrd/errors.hpp"
#include "msrd/io.hpp"

namespace msrd {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  if (out.empty()) out.push_back("");
  return out;
}

double to_double(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  double x = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    throw ConfigError(key + ": '" + raw + "' is not a number");
  return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  std::uint64_t x = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    throw ConfigError(key + ": '" + raw + "' is not a non-negative integer");
  return x;
}

bool to_bool(const std::string& key, const std::string& raw) {
  std::string s = trim(raw);
  std::transform(s.begin(), s.end(), s.begin(), ::tolower);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(key + ": '" + raw + "' is not a boolean");
}

std::string fmt_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

template <class T>
std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& f) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? ", " : "") + f(v[k]);
  return out;
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

// Field accessors only read through this; the setters share the same lambda.
RunConfig& mut(const RunConfig& c) { return const_cast<RunConfig&>(c); }

template <class Get>
Field make_real(std::string key, Get ref) {
  return {key, [ref](const RunConfig& c) { return fmt_double(ref(mut(c))); },
          [ref, key](RunConfig& c, const std::string& v) { ref(c) = to_double(key, v); }};
}

template <class Get>
Field make_size(std::string key, Get ref) {
  return {key, [ref](const RunConfig& c) { return std::to_string(ref(mut(c))); },
          [ref, key](RunConfig& c, const std::string& v) {
            ref(c) = static_cast<std::remove_reference_t<decltype(ref(c))>>(to_u64(key, v));
          }};
}

template <class Get>
Field make_bool(std::string key, Get ref) {
  return {key, [ref](const RunConfig& c) { return ref(mut(c)) ? "true" : "false"; },
          [ref, key](RunConfig& c, const std::string& v) { ref(c) = to_bool(key, v); }};
}

template <class Get>
Field make_text(std::string key, Get ref) {
  return {key, [ref](const RunConfig& c) { return ref(mut(c)); },
          [ref](RunConfig& c, const std::string& v) { ref(c) = trim(v); }};
}

template <class Get>
Field make_sizes(std::string key, Get ref) {
  return {key,
          [ref](const RunConfig& c) {
            return join<std::size_t>(ref(mut(c)),
                                     [](const std::size_t& x) { return std::to_string(x); });
          },
          [ref, key](RunConfig& c, const std::string& v) {
            std::vector<std::size_t> out;
            for (const auto& s : split_list(v)) out.push_back(to_u64(key, s));
            ref(c) = out;
          }};
}

template <class Get>
Field make_reals(std::string key, Get ref) {
  return {key,
          [ref](const RunConfig& c) {
            return join<double>(ref(mut(c)), [](const double& x) { return fmt_double(x); });
          },
          [ref, key](RunConfig& c, const std::string& v) {
            Vec out;
            for (const auto& s : split_list(v)) out.push_back(to_double(key, s));
            ref(c) = out;
          }};
}

#define REF(member) [](RunConfig& c) -> auto& { return c.member; }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      make_text("env.name", REF(env.name)),
      make_size("env.horizon", REF(env.horizon)),
      make_real("env.gamma", REF(env.gamma)),
      make_real("env.dt", REF(env.dt)),
      make_real("env.init_noise", REF(env.init_noise)),
      make_real("env.x_limit", REF(env.x_limit)),
      make_real("env.v_limit", REF(env.v_limit)),
      make_real("env.action_limit", REF(env.action_limit)),
      make_size("env.grid_w", REF(env.grid_w)),
      make_size("env.grid_h", REF(env.grid_h)),
      make_sizes("policy.hidden_sizes", REF(policy.hidden_sizes)),
      make_real("policy.lr", REF(policy.lr)),
      make_real("policy.clip", REF(policy.clip)),
      make_real("policy.entropy_coef", REF(policy.entropy_coef)),
      make_size("policy.epochs", REF(policy.epochs)),
      {"diversity.mode", [](const RunConfig& c) { return to_string(c.diversity.mode); },
       [](RunConfig& c, const std::string& v) { c.diversity.mode = diversity_mode_from_string(trim(v)); }},
      make_size("diversity.n_strategies", REF(diversity.n_strategies)),
      make_real("diversity.weight", REF(diversity.weight)),
      make_size("diversity.iterations", REF(diversity.iterations)),
      make_size("diversity.batch_trajectories", REF(diversity.batch_trajectories)),
      make_size("diversity.demos_per_strategy", REF(diversity.demos_per_strategy)),
      make_real("diversity.policy_lr", REF(diversity.policy_lr)),
      make_real("diversity.entropy_coef", REF(diversity.entropy_coef)),
      make_bool("diversity.kl_pathwise", REF(diversity.kl_pathwise)),
      make_real("diversity.classifier_lr", REF(diversity.classifier_lr)),
      make_size("diversity.classifier_steps", REF(diversity.classifier_steps)),
      make_size("airl.iterations", REF(airl.iterations)),
      make_size("airl.k_rollouts", REF(airl.k_rollouts)),
      make_size("airl.batch_size", REF(airl.batch_size)),
      make_size("airl.disc_steps", REF(airl.disc_steps)),
      make_size("airl.replay_trajectories", REF(airl.replay_trajectories)),
      make_real("airl.lr", REF(airl.lr)),
      make_sizes("airl.hidden_sizes", REF(airl.hidden_sizes)),
      make_reals("msrd.alpha", REF(msrd.alpha)),
      {"msrd.reg_source", [](const RunConfig& c) { return to_string(c.msrd.reg_source); },
       [](RunConfig& c, const std::string& v) { c.msrd.reg_source = reg_source_from_string(trim(v)); }},
      make_size("msrd.k_rollouts", REF(msrd.k_rollouts)),
      make_size("msrd.epochs", REF(msrd.epochs)),
      make_bool("msrd.defer_task_update", REF(msrd.defer_task_update)),
      make_bool("msrd.l2_squared", REF(msrd.l2_squared)),
      make_size("msrd.checkpoint_every", REF(msrd.checkpoint_every)),
      make_reals("eval.noise_levels", REF(eval.noise_levels)),
      make_size("eval.per_level", REF(eval.per_level)),
      make_size("eval.slice_points", REF(eval.slice_points)),
      make_real("eval.slice_half_width", REF(eval.slice_half_width)),
      make_size("run.seed", REF(run.seed)),
      make_text("run.out", REF(run.out)),
      make_size("run.jobs", REF(run.jobs)),
  };
  return table;
}

#undef REF

const Field& field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return f;
  throw ConfigError("unknown config key '" + key + "'");
}

void positive(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

void RunConfig::validate() const {
  positive(env.name == "point_balance" || env.name == "gridworld",
           "env.name must be point_balance or gridworld");
  positive(env.horizon >= 1, "env.horizon must be >= 1");
  positive(env.gamma > 0.0 && env.gamma < 1.0, "env.gamma must lie in (0, 1)");
  positive(env.dt > 0.0, "env.dt must be > 0");
  positive(env.init_noise >= 0.0, "env.init_noise must be >= 0");
  positive(env.x_limit > 0.0 && env.v_limit > 0.0 && env.action_limit > 0.0,
           "env limits must be > 0");
  positive(env.grid_w >= 1 && env.grid_h >= 1, "env.grid_w and env.grid_h must be >= 1");
  positive(!policy.hidden_sizes.empty() && !airl.hidden_sizes.empty(), "hidden layer lists must be non-empty");
  for (auto h : policy.hidden_sizes) positive(h >= 1, "policy.hidden_sizes entries must be >= 1");
  for (auto h : airl.hidden_sizes) positive(h >= 1, "airl.hidden_sizes entries must be >= 1");
  positive(policy.clip > 0.0, "policy.clip must be > 0");
  positive(policy.epochs >= 1, "policy.epochs must be >= 1");
  positive(diversity.n_strategies >= 2, "diversity.n_strategies must be >= 2");
  positive(diversity.weight >= 0.0, "diversity.weight must be >= 0");
  positive(diversity.batch_trajectories >= 1, "diversity.batch_trajectories must be >= 1");
  positive(diversity.demos_per_strategy >= 1, "diversity.demos_per_strategy must be >= 1");
  positive(diversity.policy_lr > 0.0 && diversity.classifier_lr > 0.0, "learning rates must be > 0");
  positive(diversity.entropy_coef >= 0.0 && policy.entropy_coef >= 0.0, "entropy_coef must be >= 0");
  positive(airl.k_rollouts >= 1 && msrd.k_rollouts >= 1, "k_rollouts must be >= 1");
  positive(airl.batch_size >= 1 && airl.disc_steps >= 1, "airl.batch_size and airl.disc_steps must be >= 1");
  positive(airl.lr > 0.0 && policy.lr > 0.0, "learning rates must be > 0");
  positive(msrd.k_rollouts <= diversity.demos_per_strategy,
           "msrd.k_rollouts must not exceed diversity.demos_per_strategy (K <= M)");
  positive(msrd.alpha.size() == 1 || msrd.alpha.size() == diversity.n_strategies,
           "msrd.alpha needs one value or one per strategy");
  for (double a : msrd.alpha) positive(a >= 0.0, "msrd.alpha values must be >= 0");
  positive(!eval.noise_levels.empty(), "eval.noise_levels must be non-empty");
  for (double e : eval.noise_levels) positive(e >= 0.0 && e <= 1.0, "eval.noise_levels must lie in [0, 1]");
  positive(eval.per_level >= 1, "eval.per_level must be >= 1");
  positive(eval.slice_points >= 2, "eval.slice_points must be >= 2");
  positive(eval.slice_half_width > 0.0, "eval.slice_half_width must be > 0");
  positive(!run.out.empty(), "run.out must be non-empty");
  positive(run.jobs >= 1, "run.jobs must be >= 1");
}

RunConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError("config key '" + section + "' must sit inside a [section]");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      if (!value.empty()) throw ConfigError("config: nested key under '" + full + "'");
      field(full).set(cfg, value.data());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

std::string to_ini(const RunConfig& cfg) {
  std::string out, section;
  for (const auto& f : fields()) {
    const std::string sec = f.key.substr(0, f.key.find('.'));
    if (sec != section) {
      out += (section.empty() ? "" : "\n") + std::string("[") + sec + "]\n";
      section = sec;
    }
    out += f.key.substr(sec.size() + 1) + " = " + f.get(cfg) + "\n";
  }
  return out;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  field(key).set(cfg, value);
}

std::string get_config_value(const RunConfig& cfg, const std::string& key) {
  return field(key).get(cfg);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

void apply_env_overrides(RunConfig& cfg) {
  if (const char* s = std::getenv("MSRD_SEED")) set_config_value(cfg, "run.seed", s);
  if (const char* s = std::getenv("MSRD_OUT")) set_config_value(cfg, "run.out", s);
}

bool operator==(const RunConfig& a, const RunConfig& b) { return to_ini(a) == to_ini(b); }

EnvModel make_env(const RunConfig& cfg) {
  if (cfg.env.name == "point_balance") {
    PointBalanceParams p;
    p.dt = cfg.env.dt;
    p.init_noise = cfg.env.init_noise;
    p.x_limit = cfg.env.x_limit;
    p.v_limit = cfg.env.v_limit;
    p.action_limit = cfg.env.action_limit;
    return EnvModel::point_balance(p, cfg.env.horizon, cfg.env.gamma);
  }
  if (cfg.env.name == "gridworld") {
    GridParams g;
    g.width = cfg.env.grid_w;
    g.height = cfg.env.grid_h;
    return EnvModel::grid_world(g, cfg.env.horizon, cfg.env.gamma);
  }
  throw ConfigError("unknown env.name '" + cfg.env.name + "'");
}

DiversityConfig diversity_config(const RunConfig& cfg) {
  DiversityConfig d;
  d.mode = cfg.diversity.mode;
  d.n_strategies = cfg.diversity.n_strategies;
  d.weight = cfg.diversity.weight;
  d.iterations = cfg.diversity.iterations;
  d.batch_trajectories = cfg.diversity.batch_trajectories;
  d.demos_per_strategy = cfg.diversity.demos_per_strategy;
  d.hidden = cfg.policy.hidden_sizes;
  d.policy.lr = cfg.diversity.policy_lr;
  d.policy.entropy_coef = cfg.diversity.entropy_coef;
  d.policy.clip = cfg.policy.clip;
  d.policy.epochs = cfg.policy.epochs;
  d.kl_pathwise = cfg.diversity.kl_pathwise;
  d.classifier_lr = cfg.diversity.classifier_lr;
  d.classifier_steps = cfg.diversity.classifier_steps;
  return d;
}

AdversarialConfig airl_config(const RunConfig& cfg) {
  AdversarialConfig a;
  a.iterations = cfg.airl.iterations;
  a.k_rollouts = cfg.airl.k_rollouts;
  a.batch_size = cfg.airl.batch_size;
  a.disc_steps = cfg.airl.disc_steps;
  a.replay_trajectories = cfg.airl.replay_trajectories;
  a.reward_lr = cfg.airl.lr;
  a.hidden = cfg.airl.hidden_sizes;
  a.policy_hidden = cfg.policy.hidden_sizes;
  a.policy.lr = cfg.policy.lr;
  a.policy.entropy_coef = cfg.policy.entropy_coef;
  a.policy.clip = cfg.policy.clip;
  a.policy.epochs = cfg.policy.epochs;
  return a;
}

MsrdConfig msrd_config(const RunConfig& cfg) {
  MsrdConfig m;
  m.adv = airl_config(cfg);
  m.adv.iterations = cfg.msrd.epochs;
  m.adv.k_rollouts = cfg.msrd.k_rollouts;
  m.alpha = cfg.msrd.alpha;
  m.reg_source = cfg.msrd.reg_source;
  m.defer_task_update = cfg.msrd.defer_task_update;
  m.l2_squared = cfg.msrd.l2_squared;
  return m;
}

EvalConfig eval_config(const RunConfig& cfg) {
  EvalConfig e;
  e.noise_levels = cfg.eval.noise_levels;
  e.per_level = cfg.eval.per_level;
  e.slice_points = cfg.eval.slice_points;
  e.slice_half_width = cfg.eval.slice_half_width;
  return e;
}

}  // namespace msrd
