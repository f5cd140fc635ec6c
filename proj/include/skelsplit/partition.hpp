#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "skelsplit/skeleton.hpp"

namespace skelsplit {

/// Rule that assigns partition labels inside every neighbor set.
enum class Strategy : std::uint32_t {
  spatial_config = 0,  // closer / farther than the root w.r.t. the center of gravity (K = 3)
  full_distance = 1,   // every neighbor ranked by distance to the center of gravity
  connection = 2,      // every neighbor ranked by joint degree
  index = 3,           // every neighbor ranked by keypoint index
};

inline constexpr Strategy kAllStrategies[] = {Strategy::spatial_config, Strategy::full_distance,
                                              Strategy::connection, Strategy::index};

/// Short CLI name: spatial, fulldist, connection, index.
std::string_view strategy_name(Strategy strategy);
/// Accepts the short names and the long enum spellings.
Strategy parse_strategy(std::string_view name);

/// Number of kernel subsets: 3 for spatial_config, 1 + max_degree otherwise.
std::size_t partition_count(Strategy strategy, const SkeletonLayout& layout);

struct LabelEntry {
  JointId joint;
  std::size_t label;

  friend bool operator==(const LabelEntry&, const LabelEntry&) = default;
};

/// Per-root assignment of the neighbor set B(j) ∪ {j} to labels in [0, K).
/// Entries of each root list the root first, then the neighbors ascending by id.
class LabelMap {
 public:
  LabelMap(Strategy strategy, std::size_t num_partitions, std::vector<std::vector<LabelEntry>> roots);

  Strategy strategy() const noexcept { return strategy_; }
  std::size_t num_partitions() const noexcept { return num_partitions_; }
  std::size_t num_joints() const noexcept { return roots_.size(); }
  std::span<const LabelEntry> entries(JointId root) const;
  /// Label of `joint` within the neighbor set of `root`, if it belongs to it.
  std::optional<std::size_t> label(JointId root, JointId joint) const;

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  Strategy strategy_;
  std::size_t num_partitions_;
  std::vector<std::vector<LabelEntry>> roots_;
};

/// Per-joint distance to the center of gravity: either one frame's distances
/// or the average over a reference set of sequences.
struct DistanceProfile {
  std::vector<double> distances;
};

DistanceProfile frame_distance_profile(const FrameView& frame);

/// r_i = mean over every frame of every sequence of ‖u_ti − cg(frame)‖₂.
/// Throws EmptyReferenceSetError on an empty set.
DistanceProfile average_distances(std::span<const SkeletonSequence> sequences, const SkeletonLayout& layout);

/// Text form: `profile <V>` followed by V distances, whitespace separated.
std::string format_profile(const DistanceProfile& profile);
DistanceProfile parse_profile(std::string_view text);

/// Label 1 for neighbors strictly closer to the center than the root,
/// 2 for strictly farther, 0 for equal distance (and for the root itself).
LabelMap spatial_config_labels(const SkeletonLayout& layout, const DistanceProfile& profile);

/// Neighbors ranked by ascending distance to this frame's center of gravity;
/// ties resolve by ascending joint id.
LabelMap full_distance_labels(const SkeletonLayout& layout, const FrameView& frame);

struct TieRule {
  enum class Kind { by_index, seeded_random };
  Kind kind = Kind::by_index;
  std::uint64_t seed = 0;

  static TieRule by_index() { return {}; }
  static TieRule seeded_random(std::uint64_t seed) { return {Kind::seeded_random, seed}; }

  friend bool operator==(const TieRule&, const TieRule&) = default;
};

/// Neighbors ranked by descending degree; equal degrees ordered per `tie_rule`.
LabelMap connection_labels(const SkeletonLayout& layout, TieRule tie_rule = {});

/// Neighbors ranked by ascending keypoint index.
LabelMap index_labels(const SkeletonLayout& layout);

/// Topology-only strategies (connection, index). Throws ConfigError for the others.
LabelMap static_labels(Strategy strategy, const SkeletonLayout& layout, TieRule tie_rule = {});

/// One line per root: `root <j>: <i>=<label> ...`, preceded by a `#` header.
std::string format_label_map(const LabelMap& map);
/// Inverse of format_label_map. Strategy and K come from the header line.
LabelMap parse_label_map(std::string_view text);

}  // namespace skelsplit
