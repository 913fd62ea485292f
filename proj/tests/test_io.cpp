#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "msrd/errors.hpp"
#include "msrd/io.hpp"

using namespace msrd;

namespace {

const std::size_t kHidden[] = {8, 8};

EnvModel point() {
  PointBalanceParams p;
  p.init_noise = 0.5;
  return EnvModel::point_balance(p, 12, 0.99);
}

DemoSet sample_demos(std::uint64_t seed) {
  const EnvModel env = point();
  Rng rng(seed);
  DemoSet d;
  d.env_name = env.name();
  d.state_dim = 2;
  d.action_dim = 1;
  d.mode = DiversityMode::kDiayn;
  d.diversity_weight = 0.1;
  d.seed = seed;
  for (std::size_t i = 0; i < 3; ++i) {
    auto trajs = collect_rollouts(make_policy(env, kHidden, rng), env, 2, rng);
    for (auto& t : trajs) {
      t.strategy = i;
      for (std::size_t k = 0; k < t.steps.size(); ++k)
        if (k % 3 != 0) t.steps[k].diversity = rng.normal();
    }
    d.strategies.push_back(std::move(trajs));
  }
  // Values that stress the number formatting.
  d.strategies[0][0].steps[0].state = {0.1, -1.0 / 3.0};
  d.strategies[0][0].steps[0].task_reward = 1e-300;
  d.strategies[0][0].steps[1].action = {-0.0};
  return d;
}

MsrdTrainState sample_state() {
  const EnvModel env = point();
  MsrdConfig c;
  c.adv.hidden = {8};
  c.adv.policy_hidden = {8};
  c.adv.replay_trajectories = 2;
  c.adv.k_rollouts = 1;
  c.adv.batch_size = 8;
  c.adv.disc_steps = 1;
  Rng rng(7);
  MsrdTrainState st = msrd_init(env, 2, c, rng);
  DemoSet d = sample_demos(3);
  d.strategies.pop_back();
  msrd_run_epochs(st, env, d, c, 2);
  return st;
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("binary primitives round trip and detect truncation") {
  BinaryWriter w;
  w.u8(200);
  w.u32(0xdeadbeef);
  w.u64(1ull << 60);
  w.f64(-0.0);
  w.f64(std::nan(""));
  w.str("hello");
  w.vec(Vec{1.5, -2.25});
  BinaryReader r(w.bytes());
  CHECK(r.u8() == 200);
  CHECK(r.u32() == 0xdeadbeef);
  CHECK(r.u64() == (1ull << 60));
  const double z = r.f64();
  CHECK(z == 0.0);
  CHECK(std::signbit(z));
  CHECK(std::isnan(r.f64()));
  CHECK(r.str() == "hello");
  CHECK(r.vec() == Vec{1.5, -2.25});
  CHECK(r.at_end());
  CHECK_THROWS_AS(r.u8(), FormatError);
  BinaryReader short_read(std::string("\x01\x02", 2));
  CHECK_THROWS_AS(short_read.u32(), FormatError);
}

TEST_CASE("little-endian layout") {
  BinaryWriter w;
  w.u32(0x04030201);
  CHECK(w.bytes() == std::string("\x01\x02\x03\x04", 4));
}

TEST_CASE("sha256 known answers") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("file helpers") {
  const auto p = temp_file("msrd_test_io_file.bin");
  const std::string bytes("a\0b\xff", 4);
  write_file(p.string(), bytes);
  CHECK(read_file(p.string()) == bytes);
  CHECK(sha256_file(p.string()) == sha256_hex(bytes));
  std::filesystem::remove(p);
  CHECK_THROWS_AS(read_file(p.string()), IoError);
  CHECK_THROWS_AS(write_file("/nonexistent-dir/x/y", "z"), IoError);
}

TEST_CASE("binary trajectory files round trip byte for byte") {
  const DemoSet d = sample_demos(1);
  const std::string bytes = encode_demos_binary(d);
  const DemoSet back = decode_demos_binary(bytes);
  CHECK(back == d);
  CHECK(encode_demos_binary(back) == bytes);
}

TEST_CASE("text trajectory files round trip byte for byte") {
  const DemoSet d = sample_demos(2);
  const std::string text = encode_demos_jsonl(d);
  const DemoSet back = decode_demos_jsonl(text);
  CHECK(back == d);
  CHECK(std::signbit(back.strategies[0][0].steps[1].action[0]));
  CHECK(encode_demos_jsonl(back) == text);
  CHECK(encode_demos_binary(back) == encode_demos_binary(d));
}

TEST_CASE("load_demos picks the format from the contents") {
  const DemoSet d = sample_demos(3);
  const auto bin = temp_file("msrd_test_io_demos.msrdtraj");
  const auto txt = temp_file("msrd_test_io_demos.jsonl");
  write_file(bin.string(), encode_demos_binary(d));
  write_file(txt.string(), encode_demos_jsonl(d));
  CHECK(load_demos(bin.string()) == d);
  CHECK(load_demos(txt.string()) == d);
  std::filesystem::remove(bin);
  std::filesystem::remove(txt);
  CHECK_THROWS_AS(load_demos(bin.string()), IoError);
}

TEST_CASE("corrupt trajectory files are rejected") {
  const std::string bytes = encode_demos_binary(sample_demos(4));
  CHECK_THROWS_AS(decode_demos_binary("NOTATRAJ" + bytes.substr(8)), FormatError);
  for (std::size_t cut : {std::size_t{4}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1})
    CHECK_THROWS_AS(decode_demos_binary(bytes.substr(0, cut)), FormatError);
  CHECK_THROWS_AS(decode_demos_binary(bytes + "x"), FormatError);
  std::string bad_version = bytes;
  bad_version[8] = 9;
  CHECK_THROWS_AS(decode_demos_binary(bad_version), FormatError);
  CHECK_THROWS_AS(decode_demos_jsonl("{\"not\": \"a header\"}\n"), FormatError);
  CHECK_THROWS_AS(decode_demos_jsonl("garbage"), FormatError);
}

TEST_CASE("network, policy and optimizer records round trip") {
  const EnvModel env = point();
  Rng rng(5);
  const Policy p = make_policy(env, kHidden, rng);
  AdamState a(AdamConfig{.lr = 0.01}, p.net);
  a.step = 17;
  a.m[0][0] = 0.5;
  BinaryWriter w;
  write_mlp(w, p.net);
  write_policy(w, p);
  write_adam(w, a);
  BinaryReader r(w.bytes());
  CHECK(read_mlp(r) == p.net);
  CHECK(read_policy(r) == p);
  CHECK(read_adam(r) == a);
  CHECK(r.at_end());
}

TEST_CASE("MSRD checkpoints round trip with their signature") {
  const MsrdTrainState st = sample_state();
  CHECK(st.replay[0].items.size() == 2);
  const std::string bytes = encode_checkpoint(st, "point_balance/s2/a1");
  std::string sig;
  const MsrdTrainState back = decode_msrd_checkpoint(bytes, &sig);
  CHECK(back == st);
  CHECK(sig == "point_balance/s2/a1");
  CHECK(encode_checkpoint(back, sig) == bytes);
}

TEST_CASE("checkpoint kinds and corruption are detected") {
  const std::string bytes = encode_checkpoint(sample_state(), "sig");
  CHECK_THROWS_AS(decode_airl_checkpoint(bytes), FormatError);
  CHECK_THROWS_AS(decode_demonstrator_checkpoint(bytes), FormatError);
  CHECK_THROWS_AS(decode_msrd_checkpoint("XXXXXXXX" + bytes.substr(8)), FormatError);
  CHECK_THROWS_AS(decode_msrd_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  CHECK_THROWS_AS(decode_msrd_checkpoint(bytes + "!"), FormatError);
}

TEST_CASE("AIRL and demonstrator checkpoints round trip") {
  const EnvModel env = point();
  Rng rng(6);
  AirlCheckpoint a;
  a.env_signature = env_signature(env);
  for (int i = 0; i < 2; ++i) {
    a.rewards.push_back(make_reward_net(2, 1, kHidden, rng));
    a.policies.push_back(make_policy(env, kHidden, rng));
  }
  CHECK(decode_airl_checkpoint(encode_checkpoint(a)) == a);
  a.policies.pop_back();
  CHECK_THROWS_AS(encode_checkpoint(a), ConfigError);

  DemonstratorCheckpoint d;
  d.env_signature = env_signature(env);
  d.mode = DiversityMode::kDiayn;
  d.policies.push_back(make_policy(env, kHidden, rng));
  d.classifier = make_classifier(2, 3, kHidden, rng);
  CHECK(decode_demonstrator_checkpoint(encode_checkpoint(d)) == d);
  d.classifier.reset();
  d.mode = DiversityMode::kKl;
  CHECK(decode_demonstrator_checkpoint(encode_checkpoint(d)) == d);
}

TEST_CASE("environment signatures agree between env and demos") {
  const EnvModel env = point();
  const DemoSet d = sample_demos(8);
  CHECK(env_signature(env) == env_signature(d));
  GridParams g;
  CHECK(env_signature(EnvModel::grid_world(g, 3, 0.9)) != env_signature(env));
}
