#include <fstream>
#include <random>

#include "doctest.h"
#include "skelsplit/checkpoint.hpp"
#include "skelsplit/errors.hpp"
#include "test_util.hpp"

using namespace skelsplit;
namespace fs = std::filesystem;

namespace {

Checkpoint sample_checkpoint(std::uint64_t seed, bool mask) {
  Architecture a;
  a.partitions = 4;
  a.mask_enabled = mask;
  a.layers = {{8, 1}, {6, 2}};
  Checkpoint ck;
  ck.model = init_model<float>(a, seed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  ck.model.for_each_tensor([&](const std::string&, std::span<float> t) {
    for (float& v : t) v = n(rng);
  });
  for (float& v : ck.model.input_shift) v = n(rng);
  for (float& v : ck.model.input_scale) v = 1.0f + 0.1f * n(rng);
  ck.strategy = Strategy::full_distance;
  ck.layout_name = "openpose18";
  ck.features = FeatureMode::cg_distance;
  ck.frames = 32;
  ck.tie_rule = TieRule::seeded_random(0x1234567890abcdefull);
  ck.normalization = Normalization::symmetric;
  return ck;
}

std::string bytes_of(const fs::path& p) { return test::read_text(p); }

}  // namespace

TEST_CASE("checkpoint round trip is exact") {
  const fs::path dir = test::scratch_dir("checkpoint_round_trip");
  for (bool mask : {false, true}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const Checkpoint ck = sample_checkpoint(seed, mask);
      const fs::path p = dir / ("m" + std::to_string(seed) + (mask ? "m" : "") + ".ckpt");
      save_checkpoint(p, ck);
      CHECK(fs::exists(manifest_path(p)));
      const Checkpoint back = load_checkpoint(p);
      CHECK(back == ck);
      save_checkpoint(dir / "again.ckpt", back);
      CHECK(bytes_of(dir / "again.ckpt") == bytes_of(p));
    }
  }
}

TEST_CASE("checkpoint header layout") {
  const fs::path dir = test::scratch_dir("checkpoint_header");
  const Checkpoint ck = sample_checkpoint(5, true);
  save_checkpoint(dir / "m.ckpt", ck);
  const std::string b = bytes_of(dir / "m.ckpt");
  REQUIRE(b.size() > 24);
  CHECK(b.substr(0, 4) == "SKCK");
  CHECK(static_cast<unsigned char>(b[4]) == kCheckpointVersion);
  CHECK(static_cast<unsigned char>(b[8]) == static_cast<unsigned>(Strategy::full_distance));
  CHECK(b.substr(12, 10) == "openpose18");
  CHECK(b[22] == '\0');
  std::size_t floats = ck.model.input_shift.size() + ck.model.input_scale.size();
  ck.model.for_each_tensor([&](const std::string&, std::span<const float> t) { floats += t.size(); });
  const std::size_t header = 4 + 4 + 4 + 16 + 4 * 13 + 4 * 2 * ck.model.arch.layers.size();
  CHECK(b.size() == header + 4 * floats);
}

TEST_CASE("manifest lists every tensor with its checksum") {
  const Checkpoint ck = sample_checkpoint(4, true);
  const std::string m = format_checkpoint_manifest(ck);
  CHECK(m.rfind("# checkpoint v1 strategy fulldist layout openpose18\n", 0) == 0);
  CHECK(m.find("\nlayer0.weights 4x8x3 fnv1a64 ") != std::string::npos);
  CHECK(m.find("\nlayer0.mask 18x18 fnv1a64 ") != std::string::npos);
  CHECK(m.find("\nlayer1.temporal 9x6x6 fnv1a64 ") != std::string::npos);
  CHECK(m.find("\nclassifier 3x6 fnv1a64 ") != std::string::npos);
  CHECK(m.find("\ninput_scale 3 fnv1a64 ") != std::string::npos);
  Checkpoint other = ck;
  other.model.classifier[0] += 1.0f;
  CHECK(format_checkpoint_manifest(other) != m);
}

TEST_CASE("manifest mismatch is a consistency error") {
  const fs::path dir = test::scratch_dir("checkpoint_manifest");
  save_checkpoint(dir / "a.ckpt", sample_checkpoint(1, false));
  save_checkpoint(dir / "b.ckpt", sample_checkpoint(2, false));
  fs::copy_file(manifest_path(dir / "b.ckpt"), manifest_path(dir / "a.ckpt"), fs::copy_options::overwrite_existing);
  CHECK_THROWS_AS(load_checkpoint(dir / "a.ckpt"), ConsistencyError);
  fs::remove(manifest_path(dir / "a.ckpt"));
  CHECK(load_checkpoint(dir / "a.ckpt") == sample_checkpoint(1, false));
}

TEST_CASE("corrupt checkpoints are parse errors") {
  const fs::path dir = test::scratch_dir("checkpoint_corrupt");
  save_checkpoint(dir / "m.ckpt", sample_checkpoint(1, false));
  fs::remove(manifest_path(dir / "m.ckpt"));
  const std::string good = bytes_of(dir / "m.ckpt");
  auto load_bytes = [&](const std::string& b) {
    test::write_text(dir / "x.ckpt", b);
    return load_checkpoint(dir / "x.ckpt");
  };
  CHECK_NOTHROW(load_bytes(good));
  std::string magic = good;
  magic[0] = 'X';
  CHECK_THROWS_AS(load_bytes(magic), ParseError);
  std::string version = good;
  version[4] = 9;
  CHECK_THROWS_AS(load_bytes(version), ParseError);
  std::string strategy = good;
  strategy[8] = 7;
  CHECK_THROWS_AS(load_bytes(strategy), ParseError);
  CHECK_THROWS_AS(load_bytes(good.substr(0, good.size() - 2)), ParseError);
  CHECK_THROWS_AS(load_bytes(good.substr(0, 10)), ParseError);
  CHECK_THROWS_AS(load_bytes(good + "z"), ParseError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), Error);
}

TEST_CASE("layout names longer than the header field are rejected") {
  Checkpoint ck = sample_checkpoint(1, false);
  ck.layout_name = std::string(17, 'a');
  CHECK_THROWS_AS(save_checkpoint(test::scratch_dir("checkpoint_name") / "m.ckpt", ck), ConfigError);
}
