#include "skelsplit/skeleton.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "builtin_layouts.hpp"
#include "skelsplit/errors.hpp"

namespace skelsplit {

SkeletonLayout::SkeletonLayout(std::string name, std::size_t num_joints, std::vector<Edge> edges,
                               std::vector<std::string> keypoint_names)
    : name_(std::move(name)),
      num_joints_(num_joints),
      edges_(std::move(edges)),
      keypoint_names_(std::move(keypoint_names)),
      neighbors_(num_joints) {
  if (num_joints_ == 0) throw ConsistencyError("layout '" + name_ + "' has no joints");
  if (keypoint_names_.empty()) {
    for (std::size_t j = 0; j < num_joints_; ++j) keypoint_names_.push_back("joint" + std::to_string(j));
  }
  if (keypoint_names_.size() != num_joints_) {
    throw ConsistencyError("layout '" + name_ + "': expected " + std::to_string(num_joints_) +
                           " keypoint names, got " + std::to_string(keypoint_names_.size()));
  }
  for (const Edge& e : edges_) {
    if (e.a >= num_joints_ || e.b >= num_joints_) {
      throw ConsistencyError("layout '" + name_ + "': edge (" + std::to_string(e.a) + "," +
                             std::to_string(e.b) + ") out of range");
    }
    if (e.a == e.b) throw ConsistencyError("layout '" + name_ + "': self-loop at " + std::to_string(e.a));
    auto& na = neighbors_[e.a];
    if (std::find(na.begin(), na.end(), e.b) != na.end()) {
      throw ConsistencyError("layout '" + name_ + "': duplicate edge (" + std::to_string(e.a) + "," +
                             std::to_string(e.b) + ")");
    }
    na.push_back(e.b);
    neighbors_[e.b].push_back(e.a);
  }
  for (auto& n : neighbors_) std::sort(n.begin(), n.end());

  // Connectivity by flood fill from joint 0.
  std::vector<bool> seen(num_joints_, false);
  std::vector<JointId> stack{0};
  seen[0] = true;
  std::size_t reached = 1;
  while (!stack.empty()) {
    JointId j = stack.back();
    stack.pop_back();
    for (JointId i : neighbors_[j]) {
      if (!seen[i]) {
        seen[i] = true;
        ++reached;
        stack.push_back(i);
      }
    }
  }
  if (reached != num_joints_) throw ConsistencyError("layout '" + name_ + "' is not connected");
}

std::span<const JointId> SkeletonLayout::neighbors(JointId joint) const {
  if (joint >= num_joints_) {
    throw IndexError("joint " + std::to_string(joint) + " out of range [0, " + std::to_string(num_joints_) + ")");
  }
  return neighbors_[joint];
}

bool SkeletonLayout::adjacent(JointId a, JointId b) const {
  auto n = neighbors(a);
  return std::binary_search(n.begin(), n.end(), b);
}

std::size_t SkeletonLayout::keypoint_index(JointId joint) const {
  if (joint >= num_joints_) throw IndexError("joint " + std::to_string(joint) + " out of range");
  return joint;
}

namespace {

std::size_t parse_count(const std::string& token, std::size_t line_no) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw ParseError("layout line " + std::to_string(line_no) + ": expected an integer, got '" + token + "'");
  }
  return value;
}

}  // namespace

SkeletonLayout parse_layout(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::string name = "custom";
  std::size_t joints = 0;
  bool have_joints = false;
  std::vector<Edge> edges;
  std::vector<std::string> names;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    std::vector<std::string> args;
    for (std::string tok; ls >> tok;) args.push_back(tok);
    auto need = [&](std::size_t n) {
      if (args.size() != n) {
        throw ParseError("layout line " + std::to_string(line_no) + ": '" + key + "' takes " +
                         std::to_string(n) + " argument(s)");
      }
    };
    if (key == "version") {
      need(1);
      if (parse_count(args[0], line_no) != 1) throw ParseError("unsupported layout file version " + args[0]);
    } else if (key == "layout") {
      need(1);
      name = args[0];
    } else if (key == "joints") {
      need(1);
      joints = parse_count(args[0], line_no);
      have_joints = true;
      names.clear();
      for (std::size_t j = 0; j < joints; ++j) names.push_back("joint" + std::to_string(j));
    } else if (key == "name") {
      need(2);
      if (!have_joints) throw ParseError("layout line " + std::to_string(line_no) + ": 'name' before 'joints'");
      std::size_t id = parse_count(args[0], line_no);
      if (id >= joints) throw ParseError("layout line " + std::to_string(line_no) + ": joint id out of range");
      names[id] = args[1];
    } else if (key == "edge") {
      need(2);
      if (!have_joints) throw ParseError("layout line " + std::to_string(line_no) + ": 'edge' before 'joints'");
      edges.push_back({parse_count(args[0], line_no), parse_count(args[1], line_no)});
    } else {
      throw ParseError("layout line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  if (!have_joints) throw ParseError("layout file has no 'joints' line");
  return SkeletonLayout(name, joints, std::move(edges), std::move(names));
}

SkeletonLayout load_layout_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open layout file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_layout(buf.str());
}

std::string format_layout(const SkeletonLayout& layout) {
  std::ostringstream out;
  out << "version 1\n";
  out << "layout " << layout.name() << '\n';
  out << "joints " << layout.num_joints() << '\n';
  for (std::size_t j = 0; j < layout.num_joints(); ++j) out << "name " << j << ' ' << layout.keypoint_names()[j] << '\n';
  for (const Edge& e : layout.edges()) out << "edge " << e.a << ' ' << e.b << '\n';
  return out.str();
}

SkeletonLayout builtin_layout(std::string_view name) {
  if (name == "openpose18") return parse_layout(detail::kOpenPose18Layout);
  if (name == "ntu25") return parse_layout(detail::kNtu25Layout);
  throw UnknownLayoutError(std::string(name));
}

std::vector<std::string> builtin_layout_names() { return {"openpose18", "ntu25"}; }

NeighborSet neighbor_set(const SkeletonLayout& layout, JointId root) {
  auto n = layout.neighbors(root);
  return NeighborSet{root, std::vector<JointId>(n.begin(), n.end())};
}

std::size_t degree(const SkeletonLayout& layout, JointId joint) { return layout.neighbors(joint).size(); }

std::size_t max_degree(const SkeletonLayout& layout) {
  std::size_t best = 0;
  for (JointId j = 0; j < layout.num_joints(); ++j) best = std::max(best, degree(layout, j));
  return best;
}

FrameView::FrameView(std::span<const double> values, std::size_t joints, std::size_t channels)
    : values_(values), joints_(joints), channels_(channels) {
  if (channels_ < 2) throw ShapeError("a frame needs at least one coordinate channel plus confidence");
  if (values_.size() != joints_ * channels_) throw ShapeError("frame size does not match V×C");
}

SkeletonSequence::SkeletonSequence(std::string layout_name, std::size_t frames, std::size_t joints,
                                   std::size_t channels, std::vector<double> data)
    : layout_name_(std::move(layout_name)),
      frames_(frames),
      joints_(joints),
      channels_(channels),
      data_(std::move(data)) {
  if (frames_ == 0) throw ShapeError("a sequence needs at least one frame");
  if (channels_ < 2) throw ShapeError("a sequence needs at least one coordinate channel plus confidence");
  if (data_.size() != frames_ * joints_ * channels_) {
    throw ShapeError("sequence data has " + std::to_string(data_.size()) + " values, expected " +
                     std::to_string(frames_ * joints_ * channels_));
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw ConsistencyError("sequence contains a non-finite value");
  }
}

FrameView SkeletonSequence::frame(std::size_t t) const {
  if (t >= frames_) throw IndexError("frame " + std::to_string(t) + " out of range");
  return FrameView(std::span<const double>(data_).subspan(t * joints_ * channels_, joints_ * channels_), joints_,
                   channels_);
}

void SkeletonSequence::check_layout(const SkeletonLayout& layout) const {
  if (joints_ != layout.num_joints()) {
    throw ConsistencyError("sequence has " + std::to_string(joints_) + " joints but layout '" + layout.name() +
                           "' has " + std::to_string(layout.num_joints()));
  }
  if (!layout_name_.empty() && layout_name_ != layout.name()) {
    throw ConsistencyError("sequence layout '" + layout_name_ + "' does not match '" + layout.name() + "'");
  }
}

std::vector<double> center_of_gravity(const FrameView& frame, bool confidence_weighted) {
  const std::size_t dims = frame.spatial_channels();
  const std::size_t conf = frame.channels() - 1;
  std::vector<double> cg(dims, 0.0);
  double total_weight = 0.0;
  if (confidence_weighted) {
    for (std::size_t v = 0; v < frame.joints(); ++v) total_weight += frame(v, conf);
  }
  if (confidence_weighted && total_weight > 0.0) {
    for (std::size_t v = 0; v < frame.joints(); ++v) {
      for (std::size_t d = 0; d < dims; ++d) cg[d] += frame(v, conf) * frame(v, d);
    }
    for (double& c : cg) c /= total_weight;
    return cg;
  }
  for (std::size_t v = 0; v < frame.joints(); ++v) {
    for (std::size_t d = 0; d < dims; ++d) cg[d] += frame(v, d);
  }
  for (double& c : cg) c /= static_cast<double>(frame.joints());
  return cg;
}

std::vector<double> distances_to_center(const FrameView& frame) {
  const auto cg = center_of_gravity(frame);
  std::vector<double> out(frame.joints());
  for (std::size_t v = 0; v < frame.joints(); ++v) {
    double sq = 0.0;
    for (std::size_t d = 0; d < cg.size(); ++d) {
      const double diff = frame(v, d) - cg[d];
      sq += diff * diff;
    }
    out[v] = std::sqrt(sq);
  }
  return out;
}

}  // namespace skelsplit
