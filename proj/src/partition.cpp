#include "skelsplit/partition.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <random>
#include <sstream>

#include "skelsplit/errors.hpp"

namespace skelsplit {

std::string_view strategy_name(Strategy strategy) {
  switch (strategy) {
    case Strategy::spatial_config: return "spatial";
    case Strategy::full_distance: return "fulldist";
    case Strategy::connection: return "connection";
    case Strategy::index: return "index";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "spatial" || name == "spatial_config") return Strategy::spatial_config;
  if (name == "fulldist" || name == "full_distance") return Strategy::full_distance;
  if (name == "connection") return Strategy::connection;
  if (name == "index") return Strategy::index;
  throw ConfigError("unknown strategy: " + std::string(name));
}

std::size_t partition_count(Strategy strategy, const SkeletonLayout& layout) {
  if (strategy == Strategy::spatial_config) return 3;
  return 1 + max_degree(layout);
}

LabelMap::LabelMap(Strategy strategy, std::size_t num_partitions, std::vector<std::vector<LabelEntry>> roots)
    : strategy_(strategy), num_partitions_(num_partitions), roots_(std::move(roots)) {
  for (std::size_t j = 0; j < roots_.size(); ++j) {
    const auto& e = roots_[j];
    if (e.empty() || e.front().joint != j || e.front().label != 0) {
      throw ConsistencyError("label map: root " + std::to_string(j) + " must come first with label 0");
    }
    for (const LabelEntry& entry : e) {
      if (entry.label >= num_partitions_) {
        throw ConsistencyError("label map: label " + std::to_string(entry.label) + " of joint " +
                               std::to_string(entry.joint) + " under root " + std::to_string(j) +
                               " exceeds K=" + std::to_string(num_partitions_));
      }
    }
  }
}

std::span<const LabelEntry> LabelMap::entries(JointId root) const {
  if (root >= roots_.size()) throw IndexError("root " + std::to_string(root) + " out of range");
  return roots_[root];
}

std::optional<std::size_t> LabelMap::label(JointId root, JointId joint) const {
  for (const LabelEntry& e : entries(root)) {
    if (e.joint == joint) return e.label;
  }
  return std::nullopt;
}

namespace {

// Root first, then the neighbors (ascending id) with label = 1 + rank in `order`.
std::vector<LabelEntry> ranked_entries(JointId root, std::span<const JointId> ascending,
                                       const std::vector<JointId>& order) {
  std::vector<LabelEntry> out;
  out.reserve(ascending.size() + 1);
  out.push_back({root, 0});
  for (JointId i : ascending) {
    auto pos = std::find(order.begin(), order.end(), i);
    out.push_back({i, static_cast<std::size_t>(pos - order.begin()) + 1});
  }
  return out;
}

}  // namespace

DistanceProfile frame_distance_profile(const FrameView& frame) { return {distances_to_center(frame)}; }

DistanceProfile average_distances(std::span<const SkeletonSequence> sequences, const SkeletonLayout& layout) {
  if (sequences.empty()) throw EmptyReferenceSetError();
  std::vector<double> sum(layout.num_joints(), 0.0);
  std::size_t frames = 0;
  for (const SkeletonSequence& seq : sequences) {
    seq.check_layout(layout);
    for (std::size_t t = 0; t < seq.num_frames(); ++t) {
      const auto d = distances_to_center(seq.frame(t));
      for (std::size_t v = 0; v < d.size(); ++v) sum[v] += d[v];
      ++frames;
    }
  }
  for (double& s : sum) s /= static_cast<double>(frames);
  return {std::move(sum)};
}

std::string format_profile(const DistanceProfile& profile) {
  std::ostringstream out;
  out << "profile " << profile.distances.size() << '\n';
  out.precision(17);
  for (double d : profile.distances) out << d << '\n';
  return out.str();
}

DistanceProfile parse_profile(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string key;
  std::size_t count = 0;
  if (!(in >> key >> count) || key != "profile") throw ParseError("profile: expected 'profile <V>' header");
  DistanceProfile p;
  p.distances.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    double v = 0;
    if (!(in >> v)) throw ParseError("profile: expected " + std::to_string(count) + " distances");
    if (!(v >= 0.0)) throw ParseError("profile: distances must be finite and non-negative");
    p.distances.push_back(v);
  }
  return p;
}

LabelMap spatial_config_labels(const SkeletonLayout& layout, const DistanceProfile& profile) {
  if (profile.distances.size() != layout.num_joints()) {
    throw ConsistencyError("distance profile covers " + std::to_string(profile.distances.size()) +
                           " joints, layout has " + std::to_string(layout.num_joints()));
  }
  const auto& r = profile.distances;
  std::vector<std::vector<LabelEntry>> roots(layout.num_joints());
  for (JointId j = 0; j < layout.num_joints(); ++j) {
    roots[j].push_back({j, 0});
    for (JointId i : layout.neighbors(j)) {
      std::size_t label = 0;
      if (r[i] < r[j]) label = 1;
      else if (r[i] > r[j]) label = 2;
      roots[j].push_back({i, label});
    }
  }
  return LabelMap(Strategy::spatial_config, 3, std::move(roots));
}

LabelMap full_distance_labels(const SkeletonLayout& layout, const FrameView& frame) {
  if (frame.joints() != layout.num_joints()) throw ConsistencyError("frame joint count does not match layout");
  const auto dist = distances_to_center(frame);
  std::vector<std::vector<LabelEntry>> roots(layout.num_joints());
  for (JointId j = 0; j < layout.num_joints(); ++j) {
    auto adjacent = layout.neighbors(j);
    std::vector<JointId> order(adjacent.begin(), adjacent.end());
    std::stable_sort(order.begin(), order.end(), [&](JointId a, JointId b) { return dist[a] < dist[b]; });
    roots[j] = ranked_entries(j, adjacent, order);
  }
  return LabelMap(Strategy::full_distance, partition_count(Strategy::full_distance, layout), std::move(roots));
}

LabelMap connection_labels(const SkeletonLayout& layout, TieRule tie_rule) {
  std::mt19937_64 rng(tie_rule.seed);
  std::vector<std::vector<LabelEntry>> roots(layout.num_joints());
  for (JointId j = 0; j < layout.num_joints(); ++j) {
    auto adjacent = layout.neighbors(j);
    std::vector<JointId> order(adjacent.begin(), adjacent.end());
    std::vector<std::uint64_t> key(layout.num_joints(), 0);
    if (tie_rule.kind == TieRule::Kind::seeded_random) {
      for (JointId i : adjacent) key[i] = rng();
    }
    std::stable_sort(order.begin(), order.end(), [&](JointId a, JointId b) {
      const auto da = degree(layout, a);
      const auto db = degree(layout, b);
      if (da != db) return da > db;
      return key[a] < key[b];
    });
    roots[j] = ranked_entries(j, adjacent, order);
  }
  return LabelMap(Strategy::connection, partition_count(Strategy::connection, layout), std::move(roots));
}

LabelMap index_labels(const SkeletonLayout& layout) {
  std::vector<std::vector<LabelEntry>> roots(layout.num_joints());
  for (JointId j = 0; j < layout.num_joints(); ++j) {
    auto adjacent = layout.neighbors(j);
    std::vector<JointId> order(adjacent.begin(), adjacent.end());
    std::sort(order.begin(), order.end(), [&](JointId a, JointId b) {
      return layout.keypoint_index(a) < layout.keypoint_index(b);
    });
    roots[j] = ranked_entries(j, adjacent, order);
  }
  return LabelMap(Strategy::index, partition_count(Strategy::index, layout), std::move(roots));
}

LabelMap static_labels(Strategy strategy, const SkeletonLayout& layout, TieRule tie_rule) {
  switch (strategy) {
    case Strategy::connection: return connection_labels(layout, tie_rule);
    case Strategy::index: return index_labels(layout);
    default:
      throw ConfigError("strategy '" + std::string(strategy_name(strategy)) + "' depends on joint coordinates");
  }
}

std::string format_label_map(const LabelMap& map) {
  std::ostringstream out;
  out << "# strategy " << strategy_name(map.strategy()) << " K " << map.num_partitions() << '\n';
  for (JointId j = 0; j < map.num_joints(); ++j) {
    out << "root " << j << ':';
    for (const LabelEntry& e : map.entries(j)) out << ' ' << e.joint << '=' << e.label;
    out << '\n';
  }
  return out.str();
}

namespace {

std::size_t to_size(std::string_view tok) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw ParseError("label map: expected an integer, got '" + std::string(tok) + "'");
  }
  return v;
}

}  // namespace

LabelMap parse_label_map(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::optional<Strategy> strategy;
  std::size_t k = 0;
  std::vector<std::vector<LabelEntry>> roots;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string head;
    if (!(ls >> head)) continue;
    if (head == "#") {
      std::string key, name, kkey;
      if (ls >> key >> name >> kkey >> k && key == "strategy" && kkey == "K") strategy = parse_strategy(name);
      continue;
    }
    if (head != "root") throw ParseError("label map: unexpected line '" + line + "'");
    std::string id;
    ls >> id;
    if (id.empty() || id.back() != ':') throw ParseError("label map: malformed root line '" + line + "'");
    id.pop_back();
    if (to_size(id) != roots.size()) throw ParseError("label map: roots must appear in order");
    std::vector<LabelEntry> entries;
    for (std::string pair; ls >> pair;) {
      auto eq = pair.find('=');
      if (eq == std::string::npos) throw ParseError("label map: malformed entry '" + pair + "'");
      entries.push_back({to_size(std::string_view(pair).substr(0, eq)), to_size(std::string_view(pair).substr(eq + 1))});
    }
    roots.push_back(std::move(entries));
  }
  if (!strategy) throw ParseError("label map: missing '# strategy <name> K <K>' header");
  return LabelMap(*strategy, k, std::move(roots));
}

}  // namespace skelsplit
