#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "msrd/airl.hpp"
#include "msrd/diversity.hpp"
#include "msrd/envs.hpp"
#include "msrd/msrd.hpp"
#include "msrd/numcore.hpp"
#include "msrd/policy.hpp"

namespace msrd {

/// Little-endian byte buffer writer.
class BinaryWriter {
 public:
  void raw(std::string_view bytes) { buf_.append(bytes); }
  void u8(std::uint8_t x);
  void u32(std::uint32_t x);
  void u64(std::uint64_t x);
  void f64(double x);
  void str(std::string_view s);
  void vec(std::span<const double> v);
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

/// Reader over a byte buffer; throws FormatError on truncation.
class BinaryReader {
 public:
  explicit BinaryReader(std::string data) : data_(std::move(data)) {}
  std::string raw(std::size_t n);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  Vec vec();
  bool at_end() const { return pos_ == data_.size(); }

 private:
  const char* take(std::size_t n);
  std::string data_;
  std::size_t pos_ = 0;
};

/// Whole-file helpers; IoError on failure.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

/// Hex SHA-256 of a byte string or file.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

/// "name/sD/aA" identifying what a checkpoint or demo file was made for.
std::string env_signature(const EnvModel& env);
std::string env_signature(const DemoSet& demos);

void write_mlp(BinaryWriter& w, const MlpParams& p);
MlpParams read_mlp(BinaryReader& r);
void write_policy(BinaryWriter& w, const Policy& p);
Policy read_policy(BinaryReader& r);
void write_adam(BinaryWriter& w, const AdamState& a);
AdamState read_adam(BinaryReader& r);

// Checkpoints: "MSRDCKPT", version, kind, env signature, payload.
inline constexpr std::string_view kCheckpointMagic = "MSRDCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct DemonstratorCheckpoint {
  std::string env_signature;
  DiversityMode mode = DiversityMode::kKl;
  PolicySet policies;
  std::optional<SkillClassifier> classifier;

  friend bool operator==(const DemonstratorCheckpoint&,
                         const DemonstratorCheckpoint&) = default;
};

struct AirlCheckpoint {
  std::string env_signature;
  std::vector<RewardNet> rewards;  // one per strategy
  PolicySet policies;

  friend bool operator==(const AirlCheckpoint&, const AirlCheckpoint&) = default;
};

std::string encode_checkpoint(const DemonstratorCheckpoint& c);
std::string encode_checkpoint(const AirlCheckpoint& c);
std::string encode_checkpoint(const MsrdTrainState& s, const std::string& env_signature);

DemonstratorCheckpoint decode_demonstrator_checkpoint(const std::string& bytes);
AirlCheckpoint decode_airl_checkpoint(const std::string& bytes);
/// Returns the state; writes the stored signature to *env_signature if given.
MsrdTrainState decode_msrd_checkpoint(const std::string& bytes,
                                      std::string* env_signature = nullptr);

// Trajectory files: binary "MSRDTRAJ" or line-delimited JSON.
inline constexpr std::string_view kTrajectoryMagic = "MSRDTRAJ";
inline constexpr std::uint32_t kTrajectoryVersion = 1;

std::string encode_demos_binary(const DemoSet& demos);
DemoSet decode_demos_binary(const std::string& bytes);
std::string encode_demos_jsonl(const DemoSet& demos);
DemoSet decode_demos_jsonl(const std::string& text);
/// Picks the decoder from the leading bytes.
DemoSet load_demos(const std::string& path);

}  // namespace msrd
