#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "doctest.h"
#include "skelsplit/errors.hpp"
#include "skelsplit/partition.hpp"
#include "test_util.hpp"

using namespace skelsplit;

namespace {

std::map<JointId, std::size_t> labels_of(const LabelMap& map, JointId root) {
  std::map<JointId, std::size_t> out;
  for (const LabelEntry& e : map.entries(root)) out[e.joint] = e.label;
  return out;
}

using Rank = std::function<bool(JointId, JointId)>;

// Neighbors sorted by `before`; the m-th one gets label m.
std::map<JointId, std::size_t> ranked_oracle(const SkeletonLayout& layout, JointId root, const Rank& before) {
  std::vector<JointId> n;
  for (JointId i = 0; i < layout.num_joints(); ++i) {
    if (layout.adjacent(root, i)) n.push_back(i);
  }
  std::sort(n.begin(), n.end(), before);
  std::map<JointId, std::size_t> out{{root, 0}};
  for (std::size_t m = 0; m < n.size(); ++m) out[n[m]] = m + 1;
  return out;
}

std::vector<double> brute_distances(const std::vector<double>& frame, std::size_t joints, std::size_t channels) {
  const std::size_t dims = channels - 1;
  std::vector<double> cg(dims, 0.0);
  for (std::size_t j = 0; j < joints; ++j) {
    for (std::size_t d = 0; d < dims; ++d) cg[d] += frame[j * channels + d] / static_cast<double>(joints);
  }
  std::vector<double> out(joints);
  for (std::size_t j = 0; j < joints; ++j) {
    double s = 0.0;
    for (std::size_t d = 0; d < dims; ++d) s += (frame[j * channels + d] - cg[d]) * (frame[j * channels + d] - cg[d]);
    out[j] = std::sqrt(s);
  }
  return out;
}

void check_bijection(const LabelMap& map, const SkeletonLayout& layout) {
  for (JointId j = 0; j < layout.num_joints(); ++j) {
    const auto entries = map.entries(j);
    REQUIRE(entries.size() == degree(layout, j) + 1);
    CHECK(entries.front().joint == j);
    CHECK(entries.front().label == 0);
    std::vector<std::size_t> labels;
    for (std::size_t e = 1; e < entries.size(); ++e) labels.push_back(entries[e].label);
    std::sort(labels.begin(), labels.end());
    std::vector<std::size_t> expected(labels.size());
    std::iota(expected.begin(), expected.end(), std::size_t{1});
    CHECK(labels == expected);
    for (const auto& e : entries) CHECK(e.label < map.num_partitions());
  }
}

}  // namespace

TEST_CASE("strategy names") {
  for (Strategy s : kAllStrategies) CHECK(parse_strategy(strategy_name(s)) == s);
  CHECK(strategy_name(Strategy::spatial_config) == "spatial");
  CHECK(strategy_name(Strategy::full_distance) == "fulldist");
  CHECK(parse_strategy("full_distance") == Strategy::full_distance);
  CHECK_THROWS_AS(parse_strategy("diagonal"), ConfigError);
}

TEST_CASE("partition counts") {
  const auto op = builtin_layout("openpose18");
  const auto ntu = builtin_layout("ntu25");
  CHECK(partition_count(Strategy::spatial_config, op) == 3);
  CHECK(partition_count(Strategy::spatial_config, ntu) == 3);
  for (Strategy s : {Strategy::full_distance, Strategy::connection, Strategy::index}) {
    CHECK(partition_count(s, op) == 4);
    CHECK(partition_count(s, ntu) == 5);
  }
  CHECK(partition_count(Strategy::index, test::y4()) == 4);
}

TEST_CASE("spatial configuration labels on Y4") {
  const DistanceProfile r{{1.3463, 0.5590, 1.8200, 1.5207}};
  const LabelMap map = spatial_config_labels(test::y4(), r);
  CHECK(map.num_partitions() == 3);
  CHECK(labels_of(map, 1) == std::map<JointId, std::size_t>{{1, 0}, {0, 2}, {2, 2}, {3, 2}});
  CHECK(labels_of(map, 2) == std::map<JointId, std::size_t>{{2, 0}, {1, 1}});
}

TEST_CASE("spatial configuration with a constant profile is all zeros") {
  const auto layout = builtin_layout("openpose18");
  const LabelMap map = spatial_config_labels(layout, DistanceProfile{std::vector<double>(18, 0.7)});
  for (JointId j = 0; j < 18; ++j) {
    for (const auto& e : map.entries(j)) CHECK(e.label == 0);
  }
}

TEST_CASE("spatial configuration matches the comparison rule on random profiles") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> level(0, 4);
  for (const auto& layout : {builtin_layout("openpose18"), builtin_layout("ntu25")}) {
    for (int trial = 0; trial < 50; ++trial) {
      DistanceProfile p;
      for (std::size_t j = 0; j < layout.num_joints(); ++j) p.distances.push_back(0.25 * level(rng));
      const LabelMap map = spatial_config_labels(layout, p);
      for (JointId j = 0; j < layout.num_joints(); ++j) {
        for (const auto& e : map.entries(j)) {
          const double ri = p.distances[e.joint], rj = p.distances[j];
          const std::size_t want = e.joint == j ? 0 : ri < rj ? 1 : ri > rj ? 2 : 0;
          CHECK(e.label == want);
        }
      }
    }
  }
}

TEST_CASE("full distance labels on Y4") {
  const auto values = test::y4_frame_values();
  const LabelMap map = full_distance_labels(test::y4(), FrameView(values, 4, 3));
  CHECK(map.num_partitions() == 4);
  CHECK(labels_of(map, 1) == std::map<JointId, std::size_t>{{1, 0}, {0, 1}, {3, 2}, {2, 3}});
  CHECK(labels_of(map, 0) == std::map<JointId, std::size_t>{{0, 0}, {1, 1}});
}

TEST_CASE("full distance ties resolve by joint id") {
  const auto layout = builtin_layout("openpose18");
  std::vector<double> coincident(18 * 3, 0.5);
  const LabelMap map = full_distance_labels(layout, FrameView(coincident, 18, 3));
  for (JointId j = 0; j < 18; ++j) CHECK(labels_of(map, j) == labels_of(index_labels(layout), j));
}

TEST_CASE("full distance labels match a brute-force distance sort") {
  std::mt19937_64 rng(17);
  for (const auto& layout : {builtin_layout("openpose18"), builtin_layout("ntu25")}) {
    const std::size_t channels = layout.num_joints() == 25 ? 4 : 3;
    for (int trial = 0; trial < 100; ++trial) {
      const auto frame = test::random_frame(rng, layout.num_joints(), channels);
      const auto d = brute_distances(frame, layout.num_joints(), channels);
      const LabelMap map = full_distance_labels(layout, FrameView(frame, layout.num_joints(), channels));
      check_bijection(map, layout);
      for (JointId j = 0; j < layout.num_joints(); ++j) {
        const auto want = ranked_oracle(layout, j, [&](JointId a, JointId b) {
          return d[a] != d[b] ? d[a] < d[b] : a < b;
        });
        CHECK(labels_of(map, j) == want);
      }
    }
  }
}

TEST_CASE("connection labels on Y4 and a star") {
  const auto y = test::y4();
  const LabelMap map = connection_labels(y);
  CHECK(labels_of(map, 1) == std::map<JointId, std::size_t>{{1, 0}, {0, 1}, {2, 2}, {3, 3}});
  CHECK(labels_of(map, 0) == std::map<JointId, std::size_t>{{0, 0}, {1, 1}});

  const SkeletonLayout star("star", 5, {{2, 0}, {2, 1}, {2, 3}, {2, 4}});
  CHECK(labels_of(connection_labels(star), 2) ==
        std::map<JointId, std::size_t>{{2, 0}, {0, 1}, {1, 2}, {3, 3}, {4, 4}});
}

TEST_CASE("connection labels rank by descending degree") {
  std::mt19937_64 rng(23);
  std::vector<SkeletonLayout> layouts = {builtin_layout("openpose18"), builtin_layout("ntu25")};
  for (int i = 0; i < 40; ++i) layouts.push_back(test::random_layout(rng, 3 + rng() % 15, rng() % 5));
  for (const auto& layout : layouts) {
    const LabelMap map = connection_labels(layout);
    check_bijection(map, layout);
    for (JointId j = 0; j < layout.num_joints(); ++j) {
      const auto want = ranked_oracle(layout, j, [&](JointId a, JointId b) {
        const auto da = degree(layout, a), db = degree(layout, b);
        return da != db ? da > db : a < b;
      });
      CHECK(labels_of(map, j) == want);
    }
  }
}

TEST_CASE("seeded random ties permute only equal degrees") {
  const auto layout = builtin_layout("ntu25");
  const LabelMap a = connection_labels(layout, TieRule::seeded_random(42));
  CHECK(a == connection_labels(layout, TieRule::seeded_random(42)));
  check_bijection(a, layout);
  for (JointId j = 0; j < layout.num_joints(); ++j) {
    const auto entries = a.entries(j);
    for (std::size_t x = 1; x < entries.size(); ++x) {
      for (std::size_t y = 1; y < entries.size(); ++y) {
        if (degree(layout, entries[x].joint) > degree(layout, entries[y].joint)) {
          CHECK(entries[x].label < entries[y].label);
        }
      }
    }
  }
  bool differs = false;
  for (std::uint64_t seed = 0; seed < 20 && !differs; ++seed) {
    differs = connection_labels(layout, TieRule::seeded_random(seed)) != connection_labels(layout);
  }
  CHECK(differs);
}

TEST_CASE("index labels") {
  CHECK(labels_of(index_labels(test::y4()), 1) == std::map<JointId, std::size_t>{{1, 0}, {0, 1}, {2, 2}, {3, 3}});
  const SkeletonLayout path("path3", 3, {{0, 1}, {1, 2}});
  CHECK(labels_of(index_labels(path), 1) == std::map<JointId, std::size_t>{{1, 0}, {0, 1}, {2, 2}});

  const auto op = builtin_layout("openpose18");
  const LabelMap map = index_labels(op);
  check_bijection(map, op);
  for (JointId j = 0; j < 18; ++j) {
    if (op.adjacent(j, 1)) CHECK(*map.label(j, 1) == 1);
    CHECK(labels_of(map, j) == ranked_oracle(op, j, std::less<JointId>()));
  }
  CHECK(labels_of(map, 2) == std::map<JointId, std::size_t>{{2, 0}, {1, 1}, {3, 2}, {8, 3}});
}

TEST_CASE("static labels dispatch") {
  const auto op = builtin_layout("openpose18");
  CHECK(static_labels(Strategy::index, op) == index_labels(op));
  CHECK(static_labels(Strategy::connection, op) == connection_labels(op));
  CHECK_THROWS_AS(static_labels(Strategy::full_distance, op), ConfigError);
  CHECK_THROWS_AS(static_labels(Strategy::spatial_config, op), ConfigError);
}

TEST_CASE("label lookup") {
  const LabelMap map = index_labels(test::y4());
  CHECK(map.label(1, 3) == std::optional<std::size_t>(3));
  CHECK_FALSE(map.label(0, 3).has_value());
  CHECK_THROWS_AS(map.entries(7), IndexError);
}

TEST_CASE("average distances") {
  const auto y = test::y4();
  const SkeletonSequence one("y4", 1, 4, 3, test::y4_frame_values());
  const auto single = average_distances(std::span(&one, 1), y);
  CHECK(single.distances == distances_to_center(one.frame(0)));

  // Joint 0 is 1.0 then 3.0 from the center of gravity.
  const SkeletonSequence two("path2", 2, 2, 3, {-1, 0, 1, 1, 0, 1, -3, 0, 1, 3, 0, 1});
  const SkeletonLayout path2("path2", 2, {{0, 1}});
  CHECK(average_distances(std::span(&two, 1), path2).distances == std::vector<double>{2.0, 2.0});

  CHECK_THROWS_AS(average_distances({}, y), EmptyReferenceSetError);
  const SkeletonSequence wrong("openpose18", 1, 4, 3, test::y4_frame_values());
  CHECK_THROWS_AS(average_distances(std::span(&wrong, 1), y), ConsistencyError);
}

TEST_CASE("average distances are invariant under rigid motion") {
  std::mt19937_64 rng(31);
  const auto layout = builtin_layout("openpose18");
  std::vector<SkeletonSequence> set, moved;
  for (int s = 0; s < 5; ++s) {
    const auto seq = test::random_sequence(rng, layout, 6);
    auto motion = test::Similarity2D::random(rng);
    motion.scale = 1.0;
    std::vector<double> data;
    for (std::size_t t = 0; t < 6; ++t) {
      const auto f = motion.apply(std::vector<double>(seq.frame(t).values().begin(), seq.frame(t).values().end()), 3);
      data.insert(data.end(), f.begin(), f.end());
    }
    set.push_back(seq);
    moved.emplace_back("openpose18", 6, 18, 3, data);
  }
  const auto a = average_distances(set, layout);
  const auto b = average_distances(moved, layout);
  for (std::size_t j = 0; j < 18; ++j) CHECK(b.distances[j] == doctest::Approx(a.distances[j]).epsilon(1e-12));
  CHECK(spatial_config_labels(layout, a) == spatial_config_labels(layout, b));
}

TEST_CASE("profile text round trip") {
  const DistanceProfile p{{0.1, 1.0 / 3.0, 2.5e-17, 7.0}};
  CHECK(parse_profile(format_profile(p)).distances == p.distances);
  CHECK_THROWS_AS(parse_profile("profile 3\n1 2\n"), ParseError);
  CHECK_THROWS_AS(parse_profile("profile 2\n1 -2\n"), ParseError);
}

TEST_CASE("label map text format") {
  const LabelMap map = index_labels(test::y4());
  const std::string text = format_label_map(map);
  CHECK(text ==
        "# strategy index K 4\n"
        "root 0: 0=0 1=1\n"
        "root 1: 1=0 0=1 2=2 3=3\n"
        "root 2: 2=0 1=1\n"
        "root 3: 3=0 1=1\n");
  CHECK(parse_label_map(text) == map);
  for (const auto& layout : {builtin_layout("openpose18"), builtin_layout("ntu25")}) {
    const LabelMap c = connection_labels(layout, TieRule::seeded_random(9));
    CHECK(parse_label_map(format_label_map(c)) == c);
  }
  CHECK_THROWS_AS(parse_label_map("root 0: 0=0\n"), ParseError);
}

TEST_CASE("label maps are deterministic") {
  std::mt19937_64 rng(2);
  const auto layout = builtin_layout("ntu25");
  const auto frame = test::random_frame(rng, 25, 4);
  CHECK(full_distance_labels(layout, FrameView(frame, 25, 4)) == full_distance_labels(layout, FrameView(frame, 25, 4)));
  CHECK(connection_labels(layout) == connection_labels(layout));
  CHECK(index_labels(layout) == index_labels(layout));
}
