#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msrd/airl.hpp"
#include "msrd/diversity.hpp"
#include "msrd/envs.hpp"
#include "msrd/eval.hpp"
#include "msrd/msrd.hpp"

namespace msrd {

/// Everything a pipeline run reads. Every field has a default; the INI file
/// only needs to name what differs.
struct RunConfig {
  struct Env {
    std::string name = "point_balance";
    std::size_t horizon = 100;
    double gamma = 0.99;
    double dt = 0.05;
    double init_noise = 0.5;
    double x_limit = 3.0;
    double v_limit = 5.0;
    double action_limit = 2.0;
    std::size_t grid_w = 5;
    std::size_t grid_h = 5;
  } env;
  struct Policy {
    // Generator policies of the adversarial learners; the demonstrators
    // share hidden_sizes, clip and epochs but keep their own lr and entropy.
    std::vector<std::size_t> hidden_sizes{32, 32};
    double lr = 3e-4;
    double clip = 0.2;
    double entropy_coef = 0.01;
    std::size_t epochs = 5;
  } policy;
  struct Diversity {
    DiversityMode mode = DiversityMode::kKl;
    std::size_t n_strategies = 4;
    double weight = 0.1;
    std::size_t iterations = 150;
    std::size_t batch_trajectories = 10;
    std::size_t demos_per_strategy = 10;
    double policy_lr = 1e-3;
    double entropy_coef = 0.01;
    bool kl_pathwise = true;
    double classifier_lr = 1e-3;
    std::size_t classifier_steps = 5;
  } diversity;
  struct Airl {
    std::size_t iterations = 200;
    std::size_t k_rollouts = 5;
    std::size_t batch_size = 256;
    std::size_t disc_steps = 5;
    std::size_t replay_trajectories = 50;  // 0 disables the generator replay
    double lr = 3e-3;
    std::vector<std::size_t> hidden_sizes{32, 32};
  } airl;
  struct Msrd {
    Vec alpha{0.1};
    RegSource reg_source = RegSource::kBoth;
    std::size_t k_rollouts = 5;
    std::size_t epochs = 200;
    bool defer_task_update = true;
    bool l2_squared = true;
    std::size_t checkpoint_every = 50;
  } msrd;
  struct Eval {
    Vec noise_levels{0.0, 0.25, 0.5, 0.75, 1.0};
    std::size_t per_level = 5;
    std::size_t slice_points = 81;
    double slice_half_width = 1.0;
  } eval;
  struct Run {
    std::uint64_t seed = 1;
    std::string out = "out";
    std::size_t jobs = 1;
  } run;

  /// Range and consistency checks; throws ConfigError.
  void validate() const;
};

/// Parses INI text ([section] then key = value; ';' or '#' comments).
/// Unknown sections or keys, malformed values and duplicates are errors.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Canonical INI rendering: every key, fixed order, shortest round-trip
/// numbers. parse_config(to_ini(c)) == c.
std::string to_ini(const RunConfig& cfg);

/// "section.key" access with the same parsing rules as the file.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& cfg, const std::string& key);
std::vector<std::string> config_keys();

/// MSRD_SEED and MSRD_OUT, when set, replace run.seed and run.out.
void apply_env_overrides(RunConfig& cfg);

bool operator==(const RunConfig& a, const RunConfig& b);

EnvModel make_env(const RunConfig& cfg);
DiversityConfig diversity_config(const RunConfig& cfg);
AdversarialConfig airl_config(const RunConfig& cfg);
MsrdConfig msrd_config(const RunConfig& cfg);
EvalConfig eval_config(const RunConfig& cfg);

}  // namespace msrd
