#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "skelsplit/adjacency.hpp"
#include "skelsplit/binary_io.hpp"
#include "skelsplit/errors.hpp"
#include "test_util.hpp"

using namespace skelsplit;

namespace {

std::vector<double> a_plus_i(const SkeletonLayout& layout) {
  const std::size_t v = layout.num_joints();
  std::vector<double> out(v * v, 0.0);
  for (std::size_t j = 0; j < v; ++j) out[j * v + j] = 1.0;
  for (const Edge& e : layout.edges()) out[e.a * v + e.b] = out[e.b * v + e.a] = 1.0;
  return out;
}

std::vector<double> slice_sum(const PartitionStack& s) {
  const std::size_t v = s.num_joints();
  std::vector<double> out(v * v, 0.0);
  for (std::size_t k = 0; k < s.num_partitions(); ++k) {
    for (std::size_t i = 0; i < v * v; ++i) out[i] += s.slice(k)[i];
  }
  return out;
}

std::vector<LabelMap> all_maps(const SkeletonLayout& layout, std::mt19937_64& rng) {
  const std::size_t channels = 3;
  const auto frame = test::random_frame(rng, layout.num_joints(), channels);
  DistanceProfile profile{distances_to_center(FrameView(frame, layout.num_joints(), channels))};
  return {spatial_config_labels(layout, profile), full_distance_labels(layout, FrameView(frame, layout.num_joints(), 3)),
          connection_labels(layout), connection_labels(layout, TieRule::seeded_random(rng())), index_labels(layout)};
}

SkeletonSequence repeat_frame(const std::string& layout, std::size_t joints, const std::vector<double>& frame,
                              std::size_t frames) {
  std::vector<double> data;
  for (std::size_t t = 0; t < frames; ++t) data.insert(data.end(), frame.begin(), frame.end());
  return SkeletonSequence(layout, frames, joints, frame.size() / joints, data);
}

}  // namespace

TEST_CASE("Y4 index stack") {
  const PartitionStack s = build_stack(test::y4(), index_labels(test::y4()));
  REQUIRE(s.num_partitions() == 4);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(s(0, r, c) == (r == c ? 1.0 : 0.0));
      const bool one1 = (r == 0 && c == 1) || (r == 1 && c == 0) || (r == 2 && c == 1) || (r == 3 && c == 1);
      CHECK(s(1, r, c) == (one1 ? 1.0 : 0.0));
      CHECK(s(2, r, c) == (r == 1 && c == 2 ? 1.0 : 0.0));
      CHECK(s(3, r, c) == (r == 1 && c == 3 ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("an all-zero label map collapses onto slice 0") {
  const auto layout = builtin_layout("openpose18");
  const PartitionStack s = build_stack(layout, spatial_config_labels(layout, {std::vector<double>(18, 1.0)}));
  CHECK(std::vector<double>(s.slice(0).begin(), s.slice(0).end()) == a_plus_i(layout));
  for (std::size_t k = 1; k < 3; ++k) {
    for (double x : s.slice(k)) CHECK(x == 0.0);
  }
}

TEST_CASE("slices partition A + I with disjoint supports") {
  std::mt19937_64 rng(8);
  std::vector<SkeletonLayout> layouts = {builtin_layout("openpose18"), builtin_layout("ntu25"), test::y4()};
  for (int i = 0; i < 30; ++i) layouts.push_back(test::random_layout(rng, 2 + rng() % 20, rng() % 5));
  for (const auto& layout : layouts) {
    for (const LabelMap& map : all_maps(layout, rng)) {
      const PartitionStack s = build_stack(layout, map);
      CHECK(slice_sum(s) == a_plus_i(layout));
      for (double x : s.values()) CHECK((x == 0.0 || x == 1.0));
      if (map.strategy() != Strategy::spatial_config) {
        for (std::size_t r = 0; r < layout.num_joints(); ++r) {
          for (std::size_t c = 0; c < layout.num_joints(); ++c) CHECK(s(0, r, c) == (r == c ? 1.0 : 0.0));
        }
      }
    }
  }
}

TEST_CASE("label maps that disagree with the layout are rejected") {
  const auto y = test::y4();
  CHECK_THROWS_AS(build_stack(builtin_layout("openpose18"), index_labels(y)), ConsistencyError);
  const SkeletonLayout path("path4", 4, {{0, 1}, {1, 2}, {2, 3}});
  CHECK_THROWS_AS(build_stack(y, index_labels(path)), ConsistencyError);
  std::vector<std::vector<LabelEntry>> roots = {{{0, 0}, {1, 1}}, {{1, 0}, {0, 1}, {2, 2}, {3, 3}}, {{2, 0}, {1, 1}},
                                                {{3, 0}, {1, 1}}};
  roots[1][3].label = 4;
  CHECK_THROWS_AS(build_stack(y, LabelMap(Strategy::index, 4, roots)), ConsistencyError);
}

TEST_CASE("row normalization") {
  PartitionStack s(2, 3);
  s(0, 0, 0) = 1.0;
  s(0, 1, 0) = 1.0;
  s(0, 1, 2) = 1.0;
  s(1, 2, 1) = 1.0;
  const PartitionStack n = normalize(s, Normalization::row);
  CHECK(n(0, 0, 0) == 1.0);
  CHECK(n(0, 1, 0) == 0.5);
  CHECK(n(0, 1, 2) == 0.5);
  for (std::size_t c = 0; c < 3; ++c) CHECK(n(0, 2, c) == 0.0);
  CHECK(n(1, 2, 1) == 1.0);

  PartitionStack identity(1, 4);
  for (std::size_t j = 0; j < 4; ++j) identity(0, j, j) = 1.0;
  CHECK(normalize(identity) == identity);
  CHECK(normalize(s, Normalization::none) == s);
}

TEST_CASE("normalized rows are stochastic or empty") {
  std::mt19937_64 rng(4);
  for (const auto& layout : {builtin_layout("openpose18"), builtin_layout("ntu25")}) {
    for (const LabelMap& map : all_maps(layout, rng)) {
      const PartitionStack n = normalize(build_stack(layout, map));
      for (std::size_t k = 0; k < n.num_partitions(); ++k) {
        for (std::size_t r = 0; r < n.num_joints(); ++r) {
          double sum = 0.0;
          for (std::size_t c = 0; c < n.num_joints(); ++c) sum += n(k, r, c);
          CHECK((sum == 0.0 || std::abs(sum - 1.0) <= 1e-12));
        }
      }
    }
  }
}

TEST_CASE("symmetric normalization matches the degree formula") {
  std::mt19937_64 rng(6);
  const auto layout = builtin_layout("openpose18");
  for (const LabelMap& map : all_maps(layout, rng)) {
    const PartitionStack s = build_stack(layout, map);
    const PartitionStack n = normalize(s, Normalization::symmetric);
    const std::size_t v = s.num_joints();
    for (std::size_t k = 0; k < s.num_partitions(); ++k) {
      std::vector<double> row(v, 0.0), col(v, 0.0);
      for (std::size_t r = 0; r < v; ++r) {
        for (std::size_t c = 0; c < v; ++c) {
          row[r] += s(k, r, c);
          col[c] += s(k, r, c);
        }
      }
      for (std::size_t r = 0; r < v; ++r) {
        for (std::size_t c = 0; c < v; ++c) {
          const double want = s(k, r, c) == 0.0 ? 0.0 : s(k, r, c) / std::sqrt(row[r] * col[c]);
          CHECK(n(k, r, c) == doctest::Approx(want).epsilon(1e-14));
        }
      }
    }
  }
}

TEST_CASE("stacks for a sequence") {
  std::mt19937_64 rng(12);
  const auto layout = builtin_layout("openpose18");
  const auto seq = test::random_sequence(rng, layout, 10);

  const auto index = stacks_for_sequence(layout, Strategy::index, seq, nullptr);
  CHECK(index.stacks.size() == 1);
  CHECK_FALSE(index.time_varying);
  CHECK(index.normalized);
  CHECK(index.stacks[0] == normalize(build_stack(layout, index_labels(layout))));
  CHECK(&index.at_frame(7) == &index.stacks[0]);

  const auto connection = stacks_for_sequence(layout, Strategy::connection, seq, nullptr);
  CHECK(connection.stacks.size() == 1);

  const auto full = stacks_for_sequence(layout, Strategy::full_distance, seq, nullptr);
  CHECK(full.stacks.size() == 10);
  CHECK(full.time_varying);
  for (std::size_t t = 0; t < 10; ++t) {
    CHECK(full.at_frame(t) == normalize(build_stack(layout, full_distance_labels(layout, seq.frame(t)))));
  }

  CHECK_THROWS_AS(stacks_for_sequence(layout, Strategy::spatial_config, seq, nullptr), ConfigError);
  const DistanceProfile profile = average_distances(std::span(&seq, 1), layout);
  const auto spatial = stacks_for_sequence(layout, Strategy::spatial_config, seq, &profile);
  CHECK(spatial.stacks.size() == 1);
  CHECK(spatial.num_partitions() == 3);

  const auto raw = stacks_for_sequence(layout, Strategy::index, seq, nullptr, {TieRule{}, Normalization::none});
  CHECK_FALSE(raw.normalized);
  CHECK(raw.stacks[0] == build_stack(layout, index_labels(layout)));
}

TEST_CASE("repeated frames give identical per-frame stacks") {
  std::mt19937_64 rng(13);
  const auto layout = builtin_layout("openpose18");
  const auto seq = repeat_frame("openpose18", 18, test::random_frame(rng, 18, 3), 6);
  const auto full = stacks_for_sequence(layout, Strategy::full_distance, seq, nullptr);
  REQUIRE(full.stacks.size() == 6);
  for (const auto& s : full.stacks) CHECK(s == full.stacks[0]);
}

TEST_CASE("full distance stacks are unchanged by similarity transforms") {
  std::mt19937_64 rng(14);
  const auto layout = builtin_layout("openpose18");
  for (int trial = 0; trial < 20; ++trial) {
    const auto seq = test::random_sequence(rng, layout, 5);
    const auto motion = test::Similarity2D::random(rng);
    std::vector<double> data;
    for (std::size_t t = 0; t < 5; ++t) {
      const auto f = motion.apply(std::vector<double>(seq.frame(t).values().begin(), seq.frame(t).values().end()), 3);
      data.insert(data.end(), f.begin(), f.end());
    }
    const SkeletonSequence moved("openpose18", 5, 18, 3, data);
    const auto a = stacks_for_sequence(layout, Strategy::full_distance, seq, nullptr);
    const auto b = stacks_for_sequence(layout, Strategy::full_distance, moved, nullptr);
    CHECK(a.stacks == b.stacks);
  }
}

TEST_CASE("binary stack format") {
  std::mt19937_64 rng(15);
  const auto layout = builtin_layout("openpose18");
  const auto seq = test::random_sequence(rng, layout, 3);
  for (Strategy s : {Strategy::index, Strategy::full_distance}) {
    const auto stacks = stacks_for_sequence(layout, s, seq, nullptr);
    std::stringstream buf;
    write_stacks_binary(buf, stacks);
    const std::string bytes = buf.str();
    CHECK(bytes.substr(0, 4) == "SKAJ");
    const std::size_t count = stacks.stacks.size();
    CHECK(bytes.size() == 16 + count * 4 * 18 * 18 * 4);
    std::istringstream header(bytes.substr(4, 12));
    CHECK(binary::read_u32(header) == 4);
    CHECK(binary::read_u32(header) == 18);
    const std::uint32_t flags = binary::read_u32(header);
    CHECK(((flags & kStackFlagTimeVarying) != 0) == (s == Strategy::full_distance));
    CHECK((flags & kStackFlagNormalized) != 0);

    std::istringstream in(bytes);
    const StackSequence back = read_stacks_binary(in);
    CHECK(back.time_varying == stacks.time_varying);
    CHECK(back.normalized);
    REQUIRE(back.stacks.size() == count);
    for (std::size_t f = 0; f < count; ++f) {
      for (std::size_t i = 0; i < back.stacks[f].values().size(); ++i) {
        CHECK(back.stacks[f].values()[i] == static_cast<double>(static_cast<float>(stacks.stacks[f].values()[i])));
      }
    }
  }
  std::istringstream junk("SKXX0000");
  CHECK_THROWS_AS(read_stacks_binary(junk), ParseError);
  std::istringstream truncated(std::string("SKAJ\x02\0\0\0\x02\0\0\0\0\0\0\0\0\0", 18));
  CHECK_THROWS_AS(read_stacks_binary(truncated), ParseError);
}

TEST_CASE("text stack format") {
  StackSequence seq;
  seq.stacks.push_back(normalize(build_stack(test::y4(), index_labels(test::y4()))));
  std::ostringstream out;
  write_stacks_text(out, seq);
  const std::string text = out.str();
  CHECK(text.rfind("stack 0 K 4 V 4\nslice 0\n1.000000 0.000000 0.000000 0.000000\n", 0) == 0);
  CHECK(text.find("slice 1\n0.000000 1.000000 0.000000 0.000000\n1.000000 0.000000 0.000000 0.000000\n") !=
        std::string::npos);
}
