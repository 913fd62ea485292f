#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "msrd/msrd.h"

namespace fs = std::filesystem;

namespace {

// Small enough that the whole pipeline runs in seconds.
constexpr const char* kTinyConfig =
    "[env]\nhorizon = 20\n"
    "[policy]\nhidden_sizes = 8\n"
    "[diversity]\nn_strategies = 2\niterations = 3\nbatch_trajectories = 2\n"
    "demos_per_strategy = 3\n"
    "[airl]\niterations = 2\nk_rollouts = 2\nbatch_size = 16\ndisc_steps = 1\n"
    "hidden_sizes = 8\nreplay_trajectories = 2\n"
    "[msrd]\nepochs = 4\nk_rollouts = 2\ncheckpoint_every = 2\n"
    "[eval]\nper_level = 1\nslice_points = 5\n";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Config {
  msrd_config* cfg = nullptr;
  explicit Config(const fs::path& out, const char* text = kTinyConfig) {
    REQUIRE(msrd_config_parse(text, &cfg) == MSRD_OK);
    set("run.out", out.string());
  }
  ~Config() { msrd_config_free(cfg); }
  void set(const char* key, const std::string& value) {
    REQUIRE(msrd_config_set(cfg, key, value.c_str()) == MSRD_OK);
  }
};

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("msrd_c_api_" + name);
  fs::remove_all(p);
  return p;
}

std::string get(const msrd_config* cfg, const char* key) {
  std::size_t need = 0;
  REQUIRE(msrd_config_get(cfg, key, nullptr, 0, &need) == MSRD_OK);
  std::string s(need, '\0');
  REQUIRE(msrd_config_get(cfg, key, s.data(), s.size(), &need) == MSRD_OK);
  s.pop_back();
  return s;
}

// Runs gen-demos and msrd training into dir.
void gen_and_train(const fs::path& dir, const char* method = "msrd") {
  Config c(dir);
  REQUIRE(msrd_gen_demos(c.cfg) == MSRD_OK);
  REQUIRE(msrd_train(c.cfg, (dir / "demos.msrdtraj").string().c_str(), method, nullptr) ==
          MSRD_OK);
}

}  // namespace

TEST_CASE("version and numeric helpers") {
  CHECK(std::string(msrd_version()) == "1.0.0");
  CHECK(msrd_discriminator_prob(0.0, 0.0) == 0.5);
  CHECK(msrd_discriminator_prob(std::log(3.0), 0.0) == doctest::Approx(0.75));
  const double a[] = {1, 2, 3, 4, 5}, b[] = {2, 4, 5, 4, 5};
  double r = 0.0;
  CHECK(msrd_pearson(a, b, 5, &r) == MSRD_OK);
  CHECK(r == doctest::Approx(6.0 / std::sqrt(60.0)));
  CHECK(msrd_pearson(a, b, 1, &r) == MSRD_ERR_CONFIG);
  CHECK(std::string(msrd_last_error()).find("two points") != std::string::npos);
  CHECK(msrd_pearson(nullptr, b, 5, &r) == MSRD_ERR_CONFIG);
}

TEST_CASE("config handles and the buffer protocol") {
  msrd_config* cfg = nullptr;
  REQUIRE(msrd_config_new(&cfg) == MSRD_OK);
  CHECK(msrd_config_set(cfg, "policy.lr", "0.002") == MSRD_OK);
  CHECK(get(cfg, "policy.lr") == "0.002");
  std::size_t need = 0;
  char small[3];
  CHECK(msrd_config_get(cfg, "policy.lr", small, sizeof small, &need) == MSRD_ERR_CONFIG);
  CHECK(need == 6);
  CHECK(msrd_config_get(cfg, "policy.lr", nullptr, 0, nullptr) == MSRD_ERR_CONFIG);
  CHECK(msrd_config_set(cfg, "policy.nope", "1") == MSRD_ERR_CONFIG);
  CHECK(std::string(msrd_last_error()).find("policy.nope") != std::string::npos);
  CHECK(msrd_config_set(cfg, "policy.lr", "fast") == MSRD_ERR_CONFIG);

  REQUIRE(msrd_config_to_ini(cfg, nullptr, 0, &need) == MSRD_OK);
  std::string ini(need, '\0');
  REQUIRE(msrd_config_to_ini(cfg, ini.data(), ini.size(), &need) == MSRD_OK);
  msrd_config* back = nullptr;
  REQUIRE(msrd_config_parse(ini.c_str(), &back) == MSRD_OK);
  CHECK(get(back, "policy.lr") == "0.002");
  msrd_config_free(back);

  CHECK(msrd_config_set(cfg, "policy.lr", "0") == MSRD_OK);
  CHECK(msrd_config_validate(cfg) == MSRD_ERR_CONFIG);
  msrd_config_free(cfg);
  msrd_config_free(nullptr);
}

TEST_CASE("config files and environment overrides") {
  msrd_config* cfg = nullptr;
  CHECK(msrd_config_load("/nonexistent/msrd.ini", &cfg) == MSRD_ERR_IO);
  CHECK(cfg == nullptr);
  CHECK(msrd_config_parse("[policy]\nlr = 1\nlr = 2\n", &cfg) == MSRD_ERR_CONFIG);
  CHECK(msrd_config_new(nullptr) == MSRD_ERR_CONFIG);
  REQUIRE(msrd_config_new(&cfg) == MSRD_OK);
  ::setenv("MSRD_SEED", "77", 1);
  CHECK(msrd_config_apply_env(cfg) == MSRD_OK);
  ::unsetenv("MSRD_SEED");
  CHECK(get(cfg, "run.seed") == "77");
  msrd_config_free(cfg);
}

TEST_CASE("pipeline writes every artifact with manifests") {
  const fs::path dir = fresh_dir("pipeline");
  Config c(dir);
  const std::string demos = (dir / "demos.msrdtraj").string();
  REQUIRE(msrd_gen_demos(c.cfg) == MSRD_OK);
  for (const char* m : {"msrd", "airl", "vanilla_distill"}) {
    CAPTURE(m);
    REQUIRE(msrd_train(c.cfg, demos.c_str(), m, nullptr) == MSRD_OK);
  }
  REQUIRE(msrd_eval(c.cfg, demos.c_str(), dir.string().c_str(), "msrd") == MSRD_OK);
  for (const char* f : {"demos.msrdtraj", "demos.jsonl", "demonstrators.ckpt", "msrd.ckpt",
                        "airl.ckpt", "vanilla_distill.ckpt", "msrd_log.csv", "airl_log.csv",
                        "manifest-gen-demos.json", "manifest-train-msrd.json",
                        "manifest-train-airl.json", "manifest-train-vanilla_distill.json",
                        "eval/report.json", "eval/scatter.csv", "eval/heatmap.csv",
                        "eval/slices.csv", "eval/manifest-eval.json"})
    CHECK_MESSAGE(fs::exists(dir / f), f);
  const std::string manifest = slurp(dir / "manifest-train-msrd.json");
  CHECK(manifest.find("config_sha256") != std::string::npos);
  CHECK(manifest.find("\"demos\"") != std::string::npos);
  const std::string log = slurp(dir / "msrd_log.csv");
  CHECK(std::count(log.begin(), log.end(), '\n') == 1 + 4 * 2);

  msrd_demoset* d = nullptr;
  REQUIRE(msrd_demoset_load(demos.c_str(), &d) == MSRD_OK);
  CHECK(msrd_demoset_num_strategies(d) == 2);
  CHECK(msrd_demoset_state_dim(d) == 2);
  CHECK(msrd_demoset_action_dim(d) == 1);
  std::size_t n = 0, len = 0;
  CHECK(msrd_demoset_num_trajectories(d, 1, &n) == MSRD_OK);
  CHECK(n == 3);
  CHECK(msrd_demoset_trajectory_length(d, 1, 2, &len) == MSRD_OK);
  CHECK(len == 20);
  double ret = 1.0;
  CHECK(msrd_demoset_trajectory_return(d, 0, 0, &ret) == MSRD_OK);
  CHECK(ret <= 0.0);
  CHECK(msrd_demoset_trajectory_length(d, 2, 0, &len) == MSRD_ERR_CONFIG);
  CHECK(msrd_demoset_trajectory_length(d, 0, 3, &len) == MSRD_ERR_CONFIG);
  msrd_demoset_free(d);

  msrd_demoset* text = nullptr;
  REQUIRE(msrd_demoset_load((dir / "demos.jsonl").string().c_str(), &text) == MSRD_OK);
  CHECK(msrd_demoset_num_strategies(text) == 2);
  msrd_demoset_free(text);
  fs::remove_all(dir);
}

TEST_CASE("same seed gives byte-identical outputs") {
  const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
  gen_and_train(a);
  gen_and_train(b);
  for (const char* f : {"demos.msrdtraj", "demos.jsonl", "demonstrators.ckpt", "msrd.ckpt",
                        "msrd_log.csv", "manifest-gen-demos.json"})
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);

  const fs::path other = fresh_dir("det_other");
  {
    Config c(other);
    c.set("run.seed", "2");
    REQUIRE(msrd_gen_demos(c.cfg) == MSRD_OK);
  }
  CHECK(slurp(a / "demos.msrdtraj") != slurp(other / "demos.msrdtraj"));
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(other);
}

TEST_CASE("resuming matches a continuous run bit for bit") {
  const fs::path full = fresh_dir("resume_full"), part = fresh_dir("resume_part");
  gen_and_train(full);
  {
    Config c(part);
    c.set("msrd.epochs", "2");
    REQUIRE(msrd_gen_demos(c.cfg) == MSRD_OK);
    REQUIRE(msrd_train(c.cfg, (part / "demos.msrdtraj").string().c_str(), "msrd", nullptr) ==
            MSRD_OK);
  }
  {
    Config c(part);
    const std::string ck = (part / "msrd.ckpt").string();
    REQUIRE(msrd_train(c.cfg, (part / "demos.msrdtraj").string().c_str(), "msrd", ck.c_str()) ==
            MSRD_OK);
  }
  CHECK(slurp(full / "msrd.ckpt") == slurp(part / "msrd.ckpt"));
  CHECK(slurp(full / "msrd_log.csv") == slurp(part / "msrd_log.csv"));
  fs::remove_all(full);
  fs::remove_all(part);
}

TEST_CASE("pipeline error codes") {
  const fs::path dir = fresh_dir("errors");
  gen_and_train(dir);
  Config c(dir);
  const std::string demos = (dir / "demos.msrdtraj").string();
  const std::string ck = (dir / "msrd.ckpt").string();

  CHECK(msrd_train(c.cfg, demos.c_str(), "gail", nullptr) == MSRD_ERR_CONFIG);
  CHECK(msrd_train(c.cfg, (dir / "missing.msrdtraj").string().c_str(), "msrd", nullptr) ==
        MSRD_ERR_IO);
  CHECK(msrd_train(c.cfg, demos.c_str(), "airl", ck.c_str()) == MSRD_ERR_CONFIG);
  CHECK(msrd_train(c.cfg, demos.c_str(), "vanilla_distill", ck.c_str()) == MSRD_ERR_CONFIG);
  CHECK(msrd_eval(c.cfg, demos.c_str(), (dir / "nowhere").string().c_str(), "msrd") ==
        MSRD_ERR_IO);
  CHECK(msrd_train(nullptr, demos.c_str(), "msrd", nullptr) == MSRD_ERR_CONFIG);

  // A checkpoint made for another environment is refused.
  {
    Config g(fresh_dir("errors_grid"));
    g.set("env.name", "gridworld");
    CHECK(msrd_train(g.cfg, demos.c_str(), "msrd", nullptr) == MSRD_ERR_CONFIG);
    CHECK(std::string(msrd_last_error()).find("gridworld") != std::string::npos);
  }

  // A corrupt demo file is a format error.
  const fs::path bad = dir / "bad.msrdtraj";
  std::ofstream(bad, std::ios::binary) << slurp(dir / "demos.msrdtraj").substr(0, 100);
  CHECK(msrd_train(c.cfg, bad.string().c_str(), "msrd", nullptr) == MSRD_ERR_CONFIG);

  // Runaway learning rates end in a numerical failure.
  const fs::path blow = fresh_dir("errors_blow");
  {
    Config n(blow);
    n.set("airl.lr", "1e200");
    n.set("msrd.epochs", "20");
    CHECK(msrd_train(n.cfg, demos.c_str(), "msrd", nullptr) == MSRD_ERR_NUMERIC);
  }
  fs::remove_all(dir);
  fs::remove_all(blow);
  fs::remove_all(fresh_dir("errors_grid"));
}
