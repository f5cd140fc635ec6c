#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace skelsplit {

using JointId = std::size_t;

struct Edge {
  JointId a;
  JointId b;
};

/// Static joint/edge topology of a skeleton.
///
/// Joint ids double as keypoint indices: the keypoint index of joint j is j.
/// Construction validates the topology (endpoints in range, no self-loops,
/// no duplicate edges, connected) and throws ConsistencyError otherwise.
class SkeletonLayout {
 public:
  SkeletonLayout(std::string name, std::size_t num_joints, std::vector<Edge> edges,
                 std::vector<std::string> keypoint_names = {});

  const std::string& name() const noexcept { return name_; }
  std::size_t num_joints() const noexcept { return num_joints_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<std::string>& keypoint_names() const noexcept { return keypoint_names_; }

  /// 1-hop neighbors of `joint`, ascending by id. Throws IndexError.
  std::span<const JointId> neighbors(JointId joint) const;

  bool adjacent(JointId a, JointId b) const;

  std::size_t keypoint_index(JointId joint) const;

 private:
  std::string name_;
  std::size_t num_joints_;
  std::vector<Edge> edges_;
  std::vector<std::string> keypoint_names_;
  std::vector<std::vector<JointId>> neighbors_;
};

struct NeighborSet {
  JointId root;
  std::vector<JointId> adjacent;  // ascending id, root excluded

  std::size_t size() const noexcept { return adjacent.size(); }
};

/// Layouts shipped with the library: "openpose18" and "ntu25".
SkeletonLayout builtin_layout(std::string_view name);
std::vector<std::string> builtin_layout_names();

/// Parses the line-oriented layout format:
///
///     # comment
///     version 1
///     layout <name>
///     joints <V>
///     name <id> <keypoint-name>     (optional, one per joint)
///     edge <a> <b>                  (one per undirected edge)
///
/// `joints` must precede any `name` or `edge` line.
SkeletonLayout parse_layout(std::string_view text);
SkeletonLayout load_layout_file(const std::string& path);
std::string format_layout(const SkeletonLayout& layout);

NeighborSet neighbor_set(const SkeletonLayout& layout, JointId root);
std::size_t degree(const SkeletonLayout& layout, JointId joint);
std::size_t max_degree(const SkeletonLayout& layout);

/// Read-only V×C view of one frame, row-major by joint.
class FrameView {
 public:
  FrameView(std::span<const double> values, std::size_t joints, std::size_t channels);

  std::size_t joints() const noexcept { return joints_; }
  std::size_t channels() const noexcept { return channels_; }
  /// Coordinate channels; the last channel is confidence.
  std::size_t spatial_channels() const noexcept { return channels_ - 1; }
  double operator()(std::size_t joint, std::size_t channel) const {
    return values_[joint * channels_ + channel];
  }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::span<const double> values_;
  std::size_t joints_;
  std::size_t channels_;
};

/// T×V×C joint coordinates plus confidence (C = 3 for 2D, 4 for 3D).
class SkeletonSequence {
 public:
  SkeletonSequence(std::string layout_name, std::size_t frames, std::size_t joints,
                   std::size_t channels, std::vector<double> data);

  const std::string& layout_name() const noexcept { return layout_name_; }
  std::size_t num_frames() const noexcept { return frames_; }
  std::size_t num_joints() const noexcept { return joints_; }
  std::size_t channels() const noexcept { return channels_; }
  const std::vector<double>& data() const noexcept { return data_; }

  double operator()(std::size_t t, std::size_t v, std::size_t c) const {
    return data_[(t * joints_ + v) * channels_ + c];
  }
  FrameView frame(std::size_t t) const;

  /// Throws ConsistencyError when V or the layout name disagree.
  void check_layout(const SkeletonLayout& layout) const;

  friend bool operator==(const SkeletonSequence&, const SkeletonSequence&) = default;

 private:
  std::string layout_name_;
  std::size_t frames_;
  std::size_t joints_;
  std::size_t channels_;
  std::vector<double> data_;
};

/// Mean of the coordinate channels over all joints. With
/// `confidence_weighted`, joints are weighted by their confidence instead
/// (falls back to the unweighted mean when all confidences are zero).
std::vector<double> center_of_gravity(const FrameView& frame, bool confidence_weighted = false);

/// Euclidean distance of every joint to the frame's center of gravity.
std::vector<double> distances_to_center(const FrameView& frame);

}  // namespace skelsplit
