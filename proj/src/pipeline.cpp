#include "msrd/pipeline.hpp"

#include <atomic>
#include <charconv>
#include <exception>
#include <filesystem>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "msrd/airl.hpp"
#include "msrd/diversity.hpp"
#include "msrd/errors.hpp"
#include "msrd/eval.hpp"
#include "msrd/io.hpp"
#include "msrd/msrd.hpp"

namespace msrd {

namespace fs = std::filesystem;

Rng stage_rng(std::uint64_t seed, std::string_view stage) {
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (unsigned char c : stage) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  Rng base(seed);
  return Rng(base.next_u64() ^ h);
}

namespace {

std::string num(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

fs::path out_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.run.out, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.run.out + ": " + ec.message());
  return fs::path(cfg.run.out);
}

// The manifest snapshot leaves out where the run wrote to and how many
// threads it used; neither changes any output byte.
std::string config_snapshot(const RunConfig& cfg) {
  RunConfig c = cfg;
  c.run.out = ".";
  c.run.jobs = 1;
  return to_ini(c);
}

void write_manifest(const fs::path& dir, const std::string& stage, const RunConfig& cfg,
                    const std::vector<std::string>& args,
                    const std::vector<std::pair<std::string, std::string>>& inputs,
                    const std::vector<std::string>& outputs) {
  nlohmann::ordered_json m;
  const std::string snapshot = config_snapshot(cfg);
  m["format"] = "msrd-manifest";
  m["version"] = 1;
  m["stage"] = stage;
  m["seed"] = cfg.run.seed;
  m["rerun"] = args;
  m["config_sha256"] = sha256_hex(snapshot);
  m["config"] = snapshot;
  nlohmann::ordered_json in = nlohmann::ordered_json::object();
  for (const auto& [name, path] : inputs) in[name] = sha256_file(path);
  m["inputs"] = in;
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const auto& name : outputs) out[name] = sha256_file((dir / name).string());
  m["outputs"] = out;
  write_file((dir / ("manifest-" + stage + ".json")).string(), m.dump(2) + "\n");
}

std::string log_header() {
  return "epoch,strategy,disc_loss,regularizer,mean_pseudo_reward,mean_task_return\n";
}

std::string log_rows(const std::vector<TrainLogRow>& rows) {
  std::string s;
  for (const auto& r : rows)
    s += std::to_string(r.iteration) + "," + std::to_string(r.strategy) + "," +
         num(r.disc_loss) + "," + num(r.regularizer) + "," + num(r.mean_pseudo_reward) + "," +
         num(r.mean_task_return) + "\n";
  return s;
}

// Keeps the header and rows with epoch < `before` from an existing log.
std::string log_prefix(const fs::path& path, std::size_t before) {
  if (!fs::exists(path)) return log_header();
  std::istringstream in(read_file(path.string()));
  std::string line, out = log_header();
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::size_t epoch = 0;
    const auto [p, ec] = std::from_chars(line.data(), line.data() + line.size(), epoch);
    if (ec == std::errc() && epoch < before) out += line + "\n";
  }
  return out;
}

DemoSet load_checked_demos(const std::string& path, const EnvModel& env) {
  DemoSet demos = load_demos(path);
  try {
    demos.validate();
  } catch (const ConfigError& e) {
    throw FormatError(path + ": " + e.what());
  }
  if (env_signature(demos) != env_signature(env))
    throw ConfigError("demo file was made for " + env_signature(demos) +
                      " but the config describes " + env_signature(env));
  return demos;
}

void train_airl(const RunConfig& cfg, const EnvModel& env, const DemoSet& demos,
                const fs::path& dir, Rng& rng) {
  const std::size_t n = demos.num_strategies();
  const AdversarialConfig ac = airl_config(cfg);
  if (ac.k_rollouts > demos.min_per_strategy())
    throw ConfigError("airl.k_rollouts exceeds the demonstrations per strategy");
  std::vector<Rng> rngs;
  for (std::size_t i = 0; i < n; ++i) rngs.push_back(rng.fork());
  std::vector<AirlResult> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        results[i] = airl_train(env, demos.strategies[i], ac, rngs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::min<std::size_t>(std::max<std::size_t>(cfg.run.jobs, 1), n);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  AirlCheckpoint ck;
  ck.env_signature = env_signature(env);
  std::vector<TrainLogRow> rows;
  for (std::size_t i = 0; i < n; ++i) {
    ck.rewards.push_back(results[i].reward);
    ck.policies.push_back(results[i].policy);
    for (auto r : results[i].log) {
      r.strategy = i;
      rows.push_back(r);
    }
  }
  write_file((dir / "airl.ckpt").string(), encode_checkpoint(ck));
  write_file((dir / "airl_log.csv").string(), log_header() + log_rows(rows));
}

void train_msrd(const RunConfig& cfg, const EnvModel& env, const DemoSet& demos,
                const fs::path& dir, const std::string& method, const std::string& resume,
                Rng& rng) {
  MsrdConfig mc = msrd_config(cfg);
  mc.arch = method == "msrd" ? RewardArchitecture::kTwoColumn : RewardArchitecture::kVanilla;
  if (mc.adv.k_rollouts > demos.min_per_strategy())
    throw ConfigError("msrd.k_rollouts exceeds the demonstrations per strategy (K > M)");
  const fs::path ckpt = dir / (method + ".ckpt");
  const fs::path log = dir / (method + "_log.csv");

  MsrdTrainState st;
  if (!resume.empty()) {
    std::string sig;
    st = decode_msrd_checkpoint(read_file(resume), &sig);
    if (sig != env_signature(env))
      throw ConfigError("checkpoint was made for " + sig + ", config describes " + env_signature(env));
    if (st.model.arch != mc.arch)
      throw ConfigError("checkpoint architecture does not match method " + method);
    if (st.model.num_strategies() != demos.num_strategies())
      throw ConfigError("checkpoint strategy count does not match the demos");
    if (st.epoch > cfg.msrd.epochs)
      throw ConfigError("checkpoint is already past msrd.epochs");
  } else {
    st = msrd_init(env, demos.num_strategies(), mc, rng);
  }
  std::string log_text = log_prefix(log, st.epoch);
  const std::size_t every = cfg.msrd.checkpoint_every == 0 ? cfg.msrd.epochs : cfg.msrd.checkpoint_every;
  do {
    const std::size_t chunk = std::min(every, cfg.msrd.epochs - st.epoch);
    log_text += log_rows(msrd_run_epochs(st, env, demos, mc, chunk));
    write_file(ckpt.string(), encode_checkpoint(st, env_signature(env)));
    write_file(log.string(), log_text);
  } while (st.epoch < cfg.msrd.epochs);
}

}  // namespace

void cmd_gen_demos(const RunConfig& cfg) {
  cfg.validate();
  const EnvModel env = make_env(cfg);
  const fs::path dir = out_dir(cfg);
  Rng rng = stage_rng(cfg.run.seed, "gen-demos");
  HeterogeneousResult het = train_heterogeneous_policies(env, diversity_config(cfg), rng);
  het.demos.seed = cfg.run.seed;
  write_file((dir / kDemosBinary).string(), encode_demos_binary(het.demos));
  write_file((dir / kDemosText).string(), encode_demos_jsonl(het.demos));
  DemonstratorCheckpoint ck{env_signature(env), cfg.diversity.mode, het.policies, het.classifier};
  write_file((dir / kDemonstrators).string(), encode_checkpoint(ck));
  write_manifest(dir, "gen-demos", cfg, {"gen-demos"}, {},
                 {std::string(kDemosBinary), std::string(kDemosText), std::string(kDemonstrators)});
}

void cmd_train(const RunConfig& cfg, const std::string& demos_path, const std::string& method,
               const std::string& resume_path) {
  cfg.validate();
  if (method != "msrd" && method != "airl" && method != "vanilla_distill")
    throw ConfigError("unknown method '" + method + "' (expected msrd|airl|vanilla_distill)");
  if (method == "airl" && !resume_path.empty())
    throw ConfigError("--resume applies to msrd and vanilla_distill only");
  const EnvModel env = make_env(cfg);
  const DemoSet demos = load_checked_demos(demos_path, env);
  const fs::path dir = out_dir(cfg);
  Rng rng = stage_rng(cfg.run.seed, "train-" + method);
  if (method == "airl")
    train_airl(cfg, env, demos, dir, rng);
  else
    train_msrd(cfg, env, demos, dir, method, resume_path, rng);

  std::vector<std::string> args{"train", "--method", method, "--demos", demos_path};
  std::vector<std::pair<std::string, std::string>> inputs{{"demos", demos_path}};
  if (!resume_path.empty()) {
    args.insert(args.end(), {"--resume", resume_path});
    inputs.emplace_back("resume", resume_path);
  }
  write_manifest(dir, "train-" + method, cfg, args, inputs,
                 {method + ".ckpt", method + "_log.csv"});
}

void cmd_eval(const RunConfig& cfg, const std::string& demos_path,
              const std::string& checkpoint_dir, const std::string& method) {
  cfg.validate();
  if (method != "msrd" && method != "vanilla_distill")
    throw ConfigError("eval method must be msrd or vanilla_distill");
  const EnvModel env = make_env(cfg);
  const DemoSet demos = load_checked_demos(demos_path, env);
  const fs::path ckdir(checkpoint_dir);

  fs::path demo_ckpt = fs::path(demos_path).parent_path() / kDemonstrators;
  if (!fs::exists(demo_ckpt)) demo_ckpt = ckdir / kDemonstrators;
  const auto demonstrators = decode_demonstrator_checkpoint(read_file(demo_ckpt.string()));
  std::string sig;
  const auto model_path = ckdir / (method + ".ckpt");
  const MsrdTrainState st = decode_msrd_checkpoint(read_file(model_path.string()), &sig);
  if (sig != env_signature(env) || demonstrators.env_signature != env_signature(env))
    throw ConfigError("checkpoint signature " + sig + " does not match " + env_signature(env));
  if (demonstrators.policies.size() != demos.num_strategies())
    throw ConfigError("demonstrator checkpoint does not match the demo strategy count");

  std::vector<RewardNet> baselines;
  std::vector<std::pair<std::string, std::string>> inputs{
      {"demos", demos_path}, {"demonstrators", demo_ckpt.string()}, {method, model_path.string()}};
  const fs::path airl_path = ckdir / "airl.ckpt";
  if (fs::exists(airl_path)) {
    const auto airl = decode_airl_checkpoint(read_file(airl_path.string()));
    if (airl.env_signature != env_signature(env))
      throw ConfigError("AIRL checkpoint signature " + airl.env_signature + " does not match");
    baselines = airl.rewards;
    inputs.emplace_back("airl", airl_path.string());
  }

  Rng rng = stage_rng(cfg.run.seed, "eval");
  const EvalReport rep = run_h1_h2_report(env, demos, demonstrators.policies, st.model,
                                          baselines, eval_config(cfg), rng);
  const fs::path dir = out_dir(cfg);
  const fs::path edir = dir / kEvalDir;
  write_report_files(rep, edir.string());
  write_manifest(edir, "eval", cfg,
                 {"eval", "--demos", demos_path, "--checkpoints", checkpoint_dir, "--method", method},
                 inputs, {"report.json", "scatter.csv", "heatmap.csv", "slices.csv"});
}

}  // namespace msrd
