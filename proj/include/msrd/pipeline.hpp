#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "msrd/config.hpp"
#include "msrd/numcore.hpp"

namespace msrd {

/// Output file names inside run.out.
inline constexpr std::string_view kDemosBinary = "demos.msrdtraj";
inline constexpr std::string_view kDemosText = "demos.jsonl";
inline constexpr std::string_view kDemonstrators = "demonstrators.ckpt";
inline constexpr std::string_view kEvalDir = "eval";

/// Independent stream per pipeline stage, derived from the run seed.
Rng stage_rng(std::uint64_t seed, std::string_view stage);

/// Trains the demonstrator policies and writes demos (binary and text),
/// their checkpoint and a manifest into cfg.run.out.
void cmd_gen_demos(const RunConfig& cfg);

/// method: msrd | airl | vanilla_distill. Writes <method>.ckpt,
/// <method>_log.csv and a manifest. resume_path (msrd and vanilla_distill
/// only) continues from a saved checkpoint up to msrd.epochs.
void cmd_train(const RunConfig& cfg, const std::string& demos_path,
               const std::string& method, const std::string& resume_path = "");

/// Evaluates <method>.ckpt (and airl.ckpt when present) from checkpoint_dir
/// against the demos; writes the report into cfg.run.out/eval.
void cmd_eval(const RunConfig& cfg, const std::string& demos_path,
              const std::string& checkpoint_dir, const std::string& method = "msrd");

}  // namespace msrd
