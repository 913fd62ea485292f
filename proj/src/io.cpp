#include "msrd/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <openssl/evp.h>

#include "json.hpp"

#include "msrd/errors.hpp"

namespace msrd {

void BinaryWriter::u8(std::uint8_t x) { buf_.push_back(static_cast<char>(x)); }

void BinaryWriter::u32(std::uint32_t x) {
  for (int k = 0; k < 4; ++k) buf_.push_back(static_cast<char>((x >> (8 * k)) & 0xff));
}

void BinaryWriter::u64(std::uint64_t x) {
  for (int k = 0; k < 8; ++k) buf_.push_back(static_cast<char>((x >> (8 * k)) & 0xff));
}

void BinaryWriter::f64(double x) { u64(std::bit_cast<std::uint64_t>(x)); }

void BinaryWriter::str(std::string_view s) {
  u64(s.size());
  buf_.append(s);
}

void BinaryWriter::vec(std::span<const double> v) {
  u64(v.size());
  for (double x : v) f64(x);
}

const char* BinaryReader::take(std::size_t n) {
  if (n > data_.size() - pos_)
    throw FormatError("truncated data: wanted " + std::to_string(n) + " bytes at offset " +
                      std::to_string(pos_) + " of " + std::to_string(data_.size()));
  const char* p = data_.data() + pos_;
  pos_ += n;
  return p;
}

std::string BinaryReader::raw(std::size_t n) { return std::string(take(n), n); }

std::uint8_t BinaryReader::u8() { return static_cast<std::uint8_t>(*take(1)); }

std::uint32_t BinaryReader::u32() {
  const auto* p = reinterpret_cast<const unsigned char*>(take(4));
  std::uint32_t x = 0;
  for (int k = 0; k < 4; ++k) x |= static_cast<std::uint32_t>(p[k]) << (8 * k);
  return x;
}

std::uint64_t BinaryReader::u64() {
  const auto* p = reinterpret_cast<const unsigned char*>(take(8));
  std::uint64_t x = 0;
  for (int k = 0; k < 8; ++k) x |= static_cast<std::uint64_t>(p[k]) << (8 * k);
  return x;
}

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string BinaryReader::str() {
  const std::uint64_t n = u64();
  return raw(n);
}

Vec BinaryReader::vec() {
  const std::uint64_t n = u64();
  if (n > (data_.size() - pos_) / 8) throw FormatError("vector length exceeds remaining data");
  Vec v(n);
  for (auto& x : v) x = f64();
  return v;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for reading");
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (f.bad()) throw IoError("failed reading " + path);
  return data;
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  f.close();
  if (!f) throw IoError("failed writing " + path);
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw IoError("SHA-256 computation failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int k = 0; k < len; ++k) {
    out.push_back(kHex[md[k] >> 4]);
    out.push_back(kHex[md[k] & 0xf]);
  }
  return out;
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

std::string env_signature(const EnvModel& env) {
  return env.name() + "/s" + std::to_string(env.state_dim()) + "/a" +
         std::to_string(env.action_vec_dim());
}

std::string env_signature(const DemoSet& demos) {
  return demos.env_name + "/s" + std::to_string(demos.state_dim) + "/a" +
         std::to_string(demos.action_dim);
}

// ---------------------------------------------------------------------------
// Model pieces
// ---------------------------------------------------------------------------

void write_mlp(BinaryWriter& w, const MlpParams& p) {
  w.u8(static_cast<std::uint8_t>(p.hidden));
  w.u64(p.layers.size());
  for (const auto& l : p.layers) {
    w.u64(l.in);
    w.u64(l.out);
    w.vec(l.w);
    w.vec(l.b);
  }
}

MlpParams read_mlp(BinaryReader& r) {
  MlpParams p;
  const std::uint8_t act = r.u8();
  if (act > 1) throw FormatError("unknown activation code " + std::to_string(act));
  p.hidden = static_cast<Activation>(act);
  const std::uint64_t n = r.u64();
  if (n == 0 || n > 64) throw FormatError("implausible layer count " + std::to_string(n));
  for (std::uint64_t k = 0; k < n; ++k) {
    Layer l;
    l.in = r.u64();
    l.out = r.u64();
    l.w = r.vec();
    l.b = r.vec();
    p.layers.push_back(std::move(l));
  }
  try {
    p.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("stored network is inconsistent: ") + e.what());
  }
  return p;
}

void write_policy(BinaryWriter& w, const Policy& p) {
  w.u8(p.space == ActionSpace::kGaussian ? 0 : 1);
  write_mlp(w, p.net);
  w.vec(p.log_std);
  w.f64(p.mean_limit);
}

Policy read_policy(BinaryReader& r) {
  Policy p;
  const std::uint8_t space = r.u8();
  if (space > 1) throw FormatError("unknown action space code");
  p.space = space == 0 ? ActionSpace::kGaussian : ActionSpace::kCategorical;
  p.net = read_mlp(r);
  p.log_std = r.vec();
  p.mean_limit = r.f64();
  return p;
}

void write_adam(BinaryWriter& w, const AdamState& a) {
  w.f64(a.config.lr);
  w.f64(a.config.beta1);
  w.f64(a.config.beta2);
  w.f64(a.config.eps);
  w.u64(a.step);
  w.u64(a.m.size());
  for (std::size_t k = 0; k < a.m.size(); ++k) {
    w.vec(a.m[k]);
    w.vec(a.v[k]);
  }
}

AdamState read_adam(BinaryReader& r) {
  AdamState a;
  a.config.lr = r.f64();
  a.config.beta1 = r.f64();
  a.config.beta2 = r.f64();
  a.config.eps = r.f64();
  a.step = r.u64();
  const std::uint64_t n = r.u64();
  for (std::uint64_t k = 0; k < n; ++k) {
    a.m.push_back(r.vec());
    a.v.push_back(r.vec());
  }
  return a;
}

namespace {

void write_classifier(BinaryWriter& w, const SkillClassifier& c) {
  write_mlp(w, c.net);
  w.vec(c.prior);
}

SkillClassifier read_classifier(BinaryReader& r) {
  SkillClassifier c;
  c.net = read_mlp(r);
  c.prior = r.vec();
  return c;
}

BinaryWriter checkpoint_header(std::string_view kind, const std::string& signature) {
  BinaryWriter w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.str(kind);
  w.str(signature);
  return w;
}

BinaryReader open_checkpoint(const std::string& bytes, std::string_view kind,
                             std::string& signature) {
  BinaryReader r(bytes);
  if (bytes.size() < kCheckpointMagic.size() ||
      r.raw(kCheckpointMagic.size()) != kCheckpointMagic)
    throw FormatError("not a checkpoint file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const std::string got = r.str();
  if (got != kind)
    throw FormatError("checkpoint holds '" + got + "', expected '" + std::string(kind) + "'");
  signature = r.str();
  return r;
}

void expect_end(const BinaryReader& r) {
  if (!r.at_end()) throw FormatError("trailing bytes after checkpoint payload");
}

}  // namespace

std::string encode_checkpoint(const DemonstratorCheckpoint& c) {
  BinaryWriter w = checkpoint_header("demonstrators", c.env_signature);
  w.u8(c.mode == DiversityMode::kKl ? 0 : 1);
  w.u64(c.policies.size());
  for (const auto& p : c.policies) write_policy(w, p);
  w.u8(c.classifier ? 1 : 0);
  if (c.classifier) write_classifier(w, *c.classifier);
  return w.bytes();
}

DemonstratorCheckpoint decode_demonstrator_checkpoint(const std::string& bytes) {
  DemonstratorCheckpoint c;
  BinaryReader r = open_checkpoint(bytes, "demonstrators", c.env_signature);
  c.mode = r.u8() == 0 ? DiversityMode::kKl : DiversityMode::kDiayn;
  const std::uint64_t n = r.u64();
  for (std::uint64_t k = 0; k < n; ++k) c.policies.push_back(read_policy(r));
  if (r.u8() != 0) c.classifier = read_classifier(r);
  expect_end(r);
  return c;
}

std::string encode_checkpoint(const AirlCheckpoint& c) {
  if (c.rewards.size() != c.policies.size())
    throw ConfigError("AIRL checkpoint needs one policy per reward net");
  BinaryWriter w = checkpoint_header("airl", c.env_signature);
  w.u64(c.rewards.size());
  for (std::size_t k = 0; k < c.rewards.size(); ++k) {
    write_mlp(w, c.rewards[k].net);
    write_policy(w, c.policies[k]);
  }
  return w.bytes();
}

AirlCheckpoint decode_airl_checkpoint(const std::string& bytes) {
  AirlCheckpoint c;
  BinaryReader r = open_checkpoint(bytes, "airl", c.env_signature);
  const std::uint64_t n = r.u64();
  for (std::uint64_t k = 0; k < n; ++k) {
    c.rewards.push_back(RewardNet{read_mlp(r)});
    c.policies.push_back(read_policy(r));
  }
  expect_end(r);
  return c;
}

namespace {

void write_optional(BinaryWriter& w, const std::optional<double>& x) {
  w.u8(x ? 1 : 0);
  if (x) w.f64(*x);
}

std::optional<double> read_optional(BinaryReader& r) {
  const std::uint8_t flag = r.u8();
  if (flag > 1) throw FormatError("bad optional flag");
  if (flag == 0) return std::nullopt;
  return r.f64();
}

void write_trajectory(BinaryWriter& w, const Trajectory& t) {
  w.u8(t.strategy ? 1 : 0);
  if (t.strategy) w.u64(*t.strategy);
  w.u64(t.steps.size());
  for (const auto& tr : t.steps) {
    w.vec(tr.state);
    w.vec(tr.action);
    w.f64(tr.log_prob);
    w.f64(tr.task_reward);
    write_optional(w, tr.pseudo_reward);
    write_optional(w, tr.diversity);
  }
}

Trajectory read_trajectory(BinaryReader& r) {
  Trajectory t;
  const std::uint8_t flag = r.u8();
  if (flag > 1) throw FormatError("bad strategy flag");
  if (flag == 1) t.strategy = r.u64();
  const std::uint64_t len = r.u64();
  for (std::uint64_t j = 0; j < len; ++j) {
    Transition tr;
    tr.state = r.vec();
    tr.action = r.vec();
    tr.log_prob = r.f64();
    tr.task_reward = r.f64();
    tr.pseudo_reward = read_optional(r);
    tr.diversity = read_optional(r);
    t.steps.push_back(std::move(tr));
  }
  return t;
}

void write_replay(BinaryWriter& w, const GeneratorReplay& g) {
  w.u64(g.capacity);
  w.u64(g.seen);
  w.u64(g.items.size());
  for (const auto& t : g.items) write_trajectory(w, t);
}

GeneratorReplay read_replay(BinaryReader& r) {
  GeneratorReplay g;
  g.capacity = r.u64();
  g.seen = r.u64();
  const std::uint64_t n = r.u64();
  if (n > g.capacity) throw FormatError("replay holds more trajectories than its capacity");
  for (std::uint64_t k = 0; k < n; ++k) g.items.push_back(read_trajectory(r));
  return g;
}

}  // namespace

std::string encode_checkpoint(const MsrdTrainState& s, const std::string& signature) {
  BinaryWriter w = checkpoint_header("msrd", signature);
  const auto& m = s.model;
  w.u8(m.arch == RewardArchitecture::kTwoColumn ? 0 : 1);
  w.vec(m.alpha);
  write_mlp(w, m.task.net);
  write_adam(w, s.task_adam);
  w.u64(m.strategy.size());
  for (std::size_t i = 0; i < m.strategy.size(); ++i) {
    write_mlp(w, m.strategy[i].net);
    write_adam(w, s.strategy_adam[i]);
    write_policy(w, s.policies[i].policy);
    write_adam(w, s.policies[i].adam);
    write_replay(w, s.replay[i]);
  }
  w.u64(s.epoch);
  w.str(s.rng.state());
  return w.bytes();
}

MsrdTrainState decode_msrd_checkpoint(const std::string& bytes, std::string* signature) {
  std::string sig;
  BinaryReader r = open_checkpoint(bytes, "msrd", sig);
  MsrdTrainState s;
  s.model.arch = r.u8() == 0 ? RewardArchitecture::kTwoColumn : RewardArchitecture::kVanilla;
  s.model.alpha = r.vec();
  s.model.task.net = read_mlp(r);
  s.task_adam = read_adam(r);
  const std::uint64_t n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    s.model.strategy.push_back(RewardNet{read_mlp(r)});
    s.strategy_adam.push_back(read_adam(r));
    PolicyLearner pl;
    pl.policy = read_policy(r);
    pl.adam = read_adam(r);
    s.policies.push_back(std::move(pl));
    s.replay.push_back(read_replay(r));
  }
  s.epoch = r.u64();
  try {
    s.rng.set_state(r.str());
    s.model.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("inconsistent MSRD checkpoint: ") + e.what());
  }
  expect_end(r);
  if (signature != nullptr) *signature = sig;
  return s;
}

// ---------------------------------------------------------------------------
// Trajectory files
// ---------------------------------------------------------------------------

namespace {

std::size_t record_count(const DemoSet& d) {
  std::size_t n = 0;
  for (const auto& s : d.strategies) n += s.size();
  return n;
}

void check_dims(const DemoSet& d) {
  for (const auto& s : d.strategies)
    for (const auto& t : s)
      for (const auto& tr : t.steps)
        if (tr.state.size() != d.state_dim || tr.action.size() != d.action_dim)
          throw ConfigError("trajectory step dimensions disagree with the demo header");
}

}  // namespace

std::string encode_demos_binary(const DemoSet& d) {
  check_dims(d);
  BinaryWriter w;
  w.raw(kTrajectoryMagic);
  w.u32(kTrajectoryVersion);
  w.str(d.env_name);
  w.u64(d.state_dim);
  w.u64(d.action_dim);
  w.u64(d.num_strategies());
  w.u64(d.strategies.empty() ? 0 : d.min_per_strategy());
  w.str(to_string(d.mode));
  w.f64(d.diversity_weight);
  w.u64(d.seed);
  w.u64(record_count(d));
  for (std::size_t i = 0; i < d.strategies.size(); ++i)
    for (const auto& t : d.strategies[i]) {
      w.u64(i);
      w.u64(t.steps.size());
      for (const auto& tr : t.steps) {
        for (double x : tr.state) w.f64(x);
        for (double x : tr.action) w.f64(x);
        w.f64(tr.log_prob);
        w.f64(tr.task_reward);
        w.u8(tr.diversity ? 1 : 0);
        if (tr.diversity) w.f64(*tr.diversity);
      }
    }
  return w.bytes();
}

DemoSet decode_demos_binary(const std::string& bytes) {
  BinaryReader r(bytes);
  if (bytes.size() < kTrajectoryMagic.size() ||
      r.raw(kTrajectoryMagic.size()) != kTrajectoryMagic)
    throw FormatError("not a trajectory file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kTrajectoryVersion)
    throw FormatError("unsupported trajectory file version " + std::to_string(version));
  DemoSet d;
  d.env_name = r.str();
  d.state_dim = r.u64();
  d.action_dim = r.u64();
  const std::uint64_t n = r.u64();
  const std::uint64_t m = r.u64();
  if (n > 4096 || d.state_dim > 4096 || d.action_dim > 4096)
    throw FormatError("implausible trajectory file header");
  try {
    d.mode = diversity_mode_from_string(r.str());
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  d.diversity_weight = r.f64();
  d.seed = r.u64();
  const std::uint64_t records = r.u64();
  d.strategies.resize(n);
  for (std::uint64_t k = 0; k < records; ++k) {
    const std::uint64_t sid = r.u64();
    if (sid >= n) throw FormatError("record strategy id " + std::to_string(sid) + " out of range");
    const std::uint64_t len = r.u64();
    Trajectory t;
    t.strategy = sid;
    for (std::uint64_t j = 0; j < len; ++j) {
      Transition tr;
      tr.state.resize(d.state_dim);
      tr.action.resize(d.action_dim);
      for (auto& x : tr.state) x = r.f64();
      for (auto& x : tr.action) x = r.f64();
      tr.log_prob = r.f64();
      tr.task_reward = r.f64();
      const std::uint8_t flag = r.u8();
      if (flag > 1) throw FormatError("bad annotation flag");
      if (flag == 1) tr.diversity = r.f64();
      t.steps.push_back(std::move(tr));
    }
    d.strategies[sid].push_back(std::move(t));
  }
  if (!r.at_end()) throw FormatError("record count does not match trajectory file contents");
  if (n > 0 && d.min_per_strategy() != m)
    throw FormatError("per-strategy count does not match trajectory file header");
  return d;
}

namespace {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

}  // namespace

std::string encode_demos_jsonl(const DemoSet& d) {
  check_dims(d);
  ordered h;
  h["format"] = "msrd-trajectories";
  h["version"] = kTrajectoryVersion;
  h["env"] = d.env_name;
  h["state_dim"] = d.state_dim;
  h["action_dim"] = d.action_dim;
  h["strategies"] = d.num_strategies();
  h["per_strategy"] = d.strategies.empty() ? 0 : d.min_per_strategy();
  h["mode"] = to_string(d.mode);
  h["diversity_weight"] = d.diversity_weight;
  h["seed"] = d.seed;
  h["records"] = record_count(d);
  std::string out = h.dump() + "\n";
  for (std::size_t i = 0; i < d.strategies.size(); ++i)
    for (const auto& t : d.strategies[i]) {
      ordered rec;
      rec["strategy"] = i;
      ordered steps = ordered::array();
      for (const auto& tr : t.steps) {
        ordered s;
        s["s"] = tr.state;
        s["a"] = tr.action;
        s["logp"] = tr.log_prob;
        s["r"] = tr.task_reward;
        s["div"] = tr.diversity ? ordered(*tr.diversity) : ordered(nullptr);
        steps.push_back(std::move(s));
      }
      rec["steps"] = std::move(steps);
      out += rec.dump() + "\n";
    }
  return out;
}

DemoSet decode_demos_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty trajectory text file");
  try {
    const json h = json::parse(line);
    if (h.value("format", "") != "msrd-trajectories")
      throw FormatError("not a trajectory text file");
    if (h.at("version").get<std::uint32_t>() != kTrajectoryVersion)
      throw FormatError("unsupported trajectory text version");
    DemoSet d;
    d.env_name = h.at("env").get<std::string>();
    d.state_dim = h.at("state_dim").get<std::size_t>();
    d.action_dim = h.at("action_dim").get<std::size_t>();
    d.mode = diversity_mode_from_string(h.at("mode").get<std::string>());
    d.diversity_weight = h.at("diversity_weight").get<double>();
    d.seed = h.at("seed").get<std::uint64_t>();
    d.strategies.resize(h.at("strategies").get<std::size_t>());
    const auto records = h.at("records").get<std::size_t>();
    std::size_t seen = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json rec = json::parse(line);
      const auto sid = rec.at("strategy").get<std::size_t>();
      if (sid >= d.strategies.size()) throw FormatError("record strategy id out of range");
      Trajectory t;
      t.strategy = sid;
      for (const auto& s : rec.at("steps")) {
        Transition tr;
        tr.state = s.at("s").get<Vec>();
        tr.action = s.at("a").get<Vec>();
        tr.log_prob = s.at("logp").get<double>();
        tr.task_reward = s.at("r").get<double>();
        if (!s.at("div").is_null()) tr.diversity = s.at("div").get<double>();
        t.steps.push_back(std::move(tr));
      }
      d.strategies[sid].push_back(std::move(t));
      ++seen;
    }
    if (seen != records) throw FormatError("record count does not match header");
    check_dims(d);
    return d;
  } catch (const json::exception& e) {
    throw FormatError(std::string("trajectory text file: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("trajectory text file: ") + e.what());
  }
}

DemoSet load_demos(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.compare(0, kTrajectoryMagic.size(), kTrajectoryMagic) == 0)
    return decode_demos_binary(bytes);
  if (!bytes.empty() && bytes[0] == '{') return decode_demos_jsonl(bytes);
  throw FormatError(path + " is neither a binary nor a text trajectory file");
}

}  // namespace msrd
