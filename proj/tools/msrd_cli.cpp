// msrd command-line front end; talks to the library only through msrd.h.

#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "msrd/msrd.h"

namespace {

struct Common {
  std::string config_path;
  long long seed = -1;
  std::string out;
  int jobs = 0;
};

int report(msrd_status st) {
  if (st != MSRD_OK) std::fprintf(stderr, "msrd: %s\n", msrd_last_error());
  return static_cast<int>(st);
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "INI config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "run seed (overrides config and MSRD_SEED)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--out", c.out, "output directory (overrides config and MSRD_OUT)");
  cmd->add_option("--jobs", c.jobs, "parallel per-strategy AIRL runs")
      ->check(CLI::PositiveNumber);
}

// Config precedence: defaults < file < environment < flags.
msrd_status build_config(const Common& c, msrd_config** cfg) {
  msrd_status st = c.config_path.empty() ? msrd_config_new(cfg)
                                         : msrd_config_load(c.config_path.c_str(), cfg);
  if (st != MSRD_OK) return st;
  if ((st = msrd_config_apply_env(*cfg)) != MSRD_OK) return st;
  if (c.seed >= 0 &&
      (st = msrd_config_set(*cfg, "run.seed", std::to_string(c.seed).c_str())) != MSRD_OK)
    return st;
  if (!c.out.empty() && (st = msrd_config_set(*cfg, "run.out", c.out.c_str())) != MSRD_OK)
    return st;
  if (c.jobs > 0 &&
      (st = msrd_config_set(*cfg, "run.jobs", std::to_string(c.jobs).c_str())) != MSRD_OK)
    return st;
  return msrd_config_validate(*cfg);
}

std::string config_out(const msrd_config* cfg) {
  char buf[4096];
  size_t needed = 0;
  if (msrd_config_get(cfg, "run.out", buf, sizeof buf, &needed) != MSRD_OK) return "out";
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-strategy reward distillation: gen-demos, train, eval"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(msrd_version()));

  Common common;
  std::string demos, method = "msrd", resume, checkpoints;

  auto* gen = app.add_subcommand("gen-demos", "train demonstrators and write demos");
  add_common(gen, common);

  auto* train = app.add_subcommand("train", "learn rewards from demos");
  add_common(train, common);
  train->add_option("--demos", demos, "demo file (default <out>/demos.msrdtraj)");
  train->add_option("--method", method, "msrd | airl | vanilla_distill")
      ->check(CLI::IsMember({"msrd", "airl", "vanilla_distill"}));
  train->add_option("--resume", resume, "checkpoint to continue from")
      ->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "evaluate trained rewards");
  add_common(eval, common);
  eval->add_option("--demos", demos, "demo file (default <out>/demos.msrdtraj)");
  eval->add_option("--method", method, "msrd | vanilla_distill")
      ->check(CLI::IsMember({"msrd", "vanilla_distill"}));
  eval->add_option("--checkpoints", checkpoints, "directory holding checkpoints (default <out>)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : MSRD_ERR_CONFIG;
  }

  msrd_config* cfg = nullptr;
  msrd_status st = build_config(common, &cfg);
  if (st != MSRD_OK) {
    msrd_config_free(cfg);
    return report(st);
  }
  const std::string out = config_out(cfg);
  const std::string demo_path = demos.empty() ? out + "/demos.msrdtraj" : demos;

  if (gen->parsed()) {
    st = msrd_gen_demos(cfg);
  } else if (train->parsed()) {
    st = msrd_train(cfg, demo_path.c_str(), method.c_str(),
                    resume.empty() ? nullptr : resume.c_str());
  } else {
    const std::string dir = checkpoints.empty() ? out : checkpoints;
    st = msrd_eval(cfg, demo_path.c_str(), dir.c_str(), method.c_str());
  }
  msrd_config_free(cfg);
  return report(st);
}
