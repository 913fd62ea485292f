#include "msrd/msrd.h"

#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "msrd/airl.hpp"
#include "msrd/config.hpp"
#include "msrd/errors.hpp"
#include "msrd/eval.hpp"
#include "msrd/io.hpp"
#include "msrd/pipeline.hpp"

struct msrd_config {
  msrd::RunConfig cfg;
};

struct msrd_demoset {
  msrd::DemoSet demos;
};

namespace {

thread_local std::string g_last_error;

msrd_status fail(msrd_status code, const char* what) {
  g_last_error = what;
  return code;
}

// Runs body and maps the library's exception classes onto status codes.
template <class F>
msrd_status guarded(F&& body) {
  try {
    body();
    return MSRD_OK;
  } catch (const msrd::ConfigError& e) {
    return fail(MSRD_ERR_CONFIG, e.what());
  } catch (const msrd::FormatError& e) {
    return fail(MSRD_ERR_CONFIG, e.what());
  } catch (const msrd::IoError& e) {
    return fail(MSRD_ERR_IO, e.what());
  } catch (const msrd::TrainingError& e) {
    return fail(MSRD_ERR_NUMERIC, e.what());
  } catch (const std::bad_alloc&) {
    return fail(MSRD_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MSRD_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MSRD_ERR_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* message) {
  if (!ok) throw msrd::ConfigError(message);
}

void copy_out(const std::string& s, char* buf, std::size_t cap, std::size_t* needed) {
  if (needed != nullptr) *needed = s.size() + 1;
  if (buf == nullptr) {
    require(needed != nullptr, "null buffer and null size output");
    return;  // size query
  }
  if (cap < s.size() + 1) {
    if (cap > 0) buf[0] = '\0';
    throw msrd::ConfigError("output buffer too small");
  }
  std::memcpy(buf, s.c_str(), s.size() + 1);
}

const msrd::Trajectory& trajectory_at(const msrd_demoset* d, std::size_t strategy,
                                      std::size_t index) {
  require(d != nullptr, "null demo set");
  require(strategy < d->demos.strategies.size(), "strategy index out of range");
  require(index < d->demos.strategies[strategy].size(), "trajectory index out of range");
  return d->demos.strategies[strategy][index];
}

}  // namespace

extern "C" {

const char* msrd_version(void) { return "1.0.0"; }

const char* msrd_last_error(void) { return g_last_error.c_str(); }

msrd_status msrd_config_new(msrd_config** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    *out = new msrd_config{};
  });
}

msrd_status msrd_config_parse(const char* ini_text, msrd_config** out) {
  return guarded([&] {
    require(out != nullptr && ini_text != nullptr, "null argument");
    *out = nullptr;
    auto c = std::make_unique<msrd_config>();
    c->cfg = msrd::parse_config(ini_text);
    *out = c.release();
  });
}

msrd_status msrd_config_load(const char* path, msrd_config** out) {
  return guarded([&] {
    require(out != nullptr && path != nullptr, "null argument");
    *out = nullptr;
    auto c = std::make_unique<msrd_config>();
    c->cfg = msrd::load_config(path);
    *out = c.release();
  });
}

void msrd_config_free(msrd_config* cfg) { delete cfg; }

msrd_status msrd_config_set(msrd_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg != nullptr && key != nullptr && value != nullptr, "null argument");
    msrd::set_config_value(cfg->cfg, key, value);
  });
}

msrd_status msrd_config_get(const msrd_config* cfg, const char* key, char* buf,
                            size_t cap, size_t* needed) {
  return guarded([&] {
    require(cfg != nullptr && key != nullptr, "null argument");
    copy_out(msrd::get_config_value(cfg->cfg, key), buf, cap, needed);
  });
}

msrd_status msrd_config_to_ini(const msrd_config* cfg, char* buf, size_t cap,
                               size_t* needed) {
  return guarded([&] {
    require(cfg != nullptr, "null config");
    copy_out(msrd::to_ini(cfg->cfg), buf, cap, needed);
  });
}

msrd_status msrd_config_apply_env(msrd_config* cfg) {
  return guarded([&] {
    require(cfg != nullptr, "null config");
    msrd::apply_env_overrides(cfg->cfg);
  });
}

msrd_status msrd_config_validate(const msrd_config* cfg) {
  return guarded([&] {
    require(cfg != nullptr, "null config");
    cfg->cfg.validate();
  });
}

msrd_status msrd_gen_demos(const msrd_config* cfg) {
  return guarded([&] {
    require(cfg != nullptr, "null config");
    msrd::cmd_gen_demos(cfg->cfg);
  });
}

msrd_status msrd_train(const msrd_config* cfg, const char* demos_path, const char* method,
                       const char* resume_path) {
  return guarded([&] {
    require(cfg != nullptr && demos_path != nullptr && method != nullptr, "null argument");
    msrd::cmd_train(cfg->cfg, demos_path, method, resume_path ? resume_path : "");
  });
}

msrd_status msrd_eval(const msrd_config* cfg, const char* demos_path,
                      const char* checkpoint_dir, const char* method) {
  return guarded([&] {
    require(cfg != nullptr && demos_path != nullptr && checkpoint_dir != nullptr &&
                method != nullptr,
            "null argument");
    msrd::cmd_eval(cfg->cfg, demos_path, checkpoint_dir, method);
  });
}

msrd_status msrd_demoset_load(const char* path, msrd_demoset** out) {
  return guarded([&] {
    require(out != nullptr && path != nullptr, "null argument");
    *out = nullptr;
    auto d = std::make_unique<msrd_demoset>();
    d->demos = msrd::load_demos(path);
    *out = d.release();
  });
}

void msrd_demoset_free(msrd_demoset* demos) { delete demos; }

size_t msrd_demoset_num_strategies(const msrd_demoset* demos) {
  return demos ? demos->demos.num_strategies() : 0;
}

size_t msrd_demoset_state_dim(const msrd_demoset* demos) {
  return demos ? demos->demos.state_dim : 0;
}

size_t msrd_demoset_action_dim(const msrd_demoset* demos) {
  return demos ? demos->demos.action_dim : 0;
}

msrd_status msrd_demoset_num_trajectories(const msrd_demoset* demos, size_t strategy,
                                          size_t* out) {
  return guarded([&] {
    require(demos != nullptr && out != nullptr, "null argument");
    require(strategy < demos->demos.strategies.size(), "strategy index out of range");
    *out = demos->demos.strategies[strategy].size();
  });
}

msrd_status msrd_demoset_trajectory_length(const msrd_demoset* demos, size_t strategy,
                                           size_t index, size_t* out) {
  return guarded([&] {
    require(out != nullptr, "null output");
    *out = trajectory_at(demos, strategy, index).length();
  });
}

msrd_status msrd_demoset_trajectory_return(const msrd_demoset* demos, size_t strategy,
                                           size_t index, double* out) {
  return guarded([&] {
    require(out != nullptr, "null output");
    const auto& t = trajectory_at(demos, strategy, index);
    msrd::Vec r;
    r.reserve(t.steps.size());
    for (const auto& s : t.steps) r.push_back(s.task_reward);
    *out = msrd::pairwise_sum(r);
  });
}

msrd_status msrd_pearson(const double* a, const double* b, size_t n, double* out) {
  return guarded([&] {
    require(a != nullptr && b != nullptr && out != nullptr, "null argument");
    *out = msrd::pearson(std::span(a, n), std::span(b, n));
  });
}

double msrd_discriminator_prob(double f_value, double log_pi) {
  return msrd::discriminator_prob(f_value, log_pi);
}

}  // extern "C"
