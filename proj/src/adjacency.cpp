#include "skelsplit/adjacency.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "skelsplit/binary_io.hpp"
#include "skelsplit/errors.hpp"

namespace skelsplit {

PartitionStack::PartitionStack(std::size_t num_partitions, std::size_t num_joints)
    : k_(num_partitions), v_(num_joints), values_(num_partitions * num_joints * num_joints, 0.0) {
  if (k_ == 0 || v_ == 0) throw ShapeError("partition stack needs K ≥ 1 and V ≥ 1");
}

std::span<const double> PartitionStack::slice(std::size_t k) const {
  if (k >= k_) throw IndexError("slice " + std::to_string(k) + " out of range");
  return std::span<const double>(values_).subspan(k * v_ * v_, v_ * v_);
}

PartitionStack build_stack(const SkeletonLayout& layout, const LabelMap& labels) {
  const std::size_t v = layout.num_joints();
  if (labels.num_joints() != v) {
    throw ConsistencyError("label map has " + std::to_string(labels.num_joints()) + " roots, layout has " +
                           std::to_string(v) + " joints");
  }
  PartitionStack stack(labels.num_partitions(), v);
  for (JointId j = 0; j < v; ++j) {
    const auto entries = labels.entries(j);
    const auto adjacent = layout.neighbors(j);
    if (entries.size() != adjacent.size() + 1) {
      throw ConsistencyError("label map neighbor set of root " + std::to_string(j) + " does not match the layout");
    }
    for (const LabelEntry& e : entries) {
      if (e.joint != j && !layout.adjacent(j, e.joint)) {
        throw ConsistencyError("label map lists joint " + std::to_string(e.joint) + " under root " +
                               std::to_string(j) + " but they are not adjacent");
      }
      if (e.label >= stack.num_partitions()) throw ConsistencyError("label exceeds K");
      stack(e.label, j, e.joint) = 1.0;
    }
  }
  return stack;
}

PartitionStack normalize(const PartitionStack& stack, Normalization scheme) {
  if (scheme == Normalization::none) return stack;
  const std::size_t v = stack.num_joints();
  PartitionStack out = stack;
  for (std::size_t k = 0; k < stack.num_partitions(); ++k) {
    std::vector<double> row_sum(v, 0.0), col_sum(v, 0.0);
    for (std::size_t r = 0; r < v; ++r) {
      for (std::size_t c = 0; c < v; ++c) {
        row_sum[r] += stack(k, r, c);
        col_sum[c] += stack(k, r, c);
      }
    }
    for (std::size_t r = 0; r < v; ++r) {
      for (std::size_t c = 0; c < v; ++c) {
        const double a = stack(k, r, c);
        if (a == 0.0) continue;
        if (scheme == Normalization::row) {
          out(k, r, c) = a / row_sum[r];
        } else {
          out(k, r, c) = a / std::sqrt(row_sum[r] * col_sum[c]);
        }
      }
    }
  }
  return out;
}

StackSequence stacks_for_sequence(const SkeletonLayout& layout, Strategy strategy, const SkeletonSequence& sequence,
                                  const DistanceProfile* profile, const StackOptions& options) {
  sequence.check_layout(layout);
  StackSequence result;
  result.normalized = options.normalization != Normalization::none;
  switch (strategy) {
    case Strategy::spatial_config:
      if (profile == nullptr) throw ConfigError("spatial configuration strategy requires a reference distance profile");
      result.stacks.push_back(normalize(build_stack(layout, spatial_config_labels(layout, *profile)),
                                        options.normalization));
      break;
    case Strategy::full_distance:
      result.time_varying = true;
      result.stacks.reserve(sequence.num_frames());
      for (std::size_t t = 0; t < sequence.num_frames(); ++t) {
        result.stacks.push_back(
            normalize(build_stack(layout, full_distance_labels(layout, sequence.frame(t))), options.normalization));
      }
      break;
    case Strategy::connection:
    case Strategy::index:
      result.stacks.push_back(
          normalize(build_stack(layout, static_labels(strategy, layout, options.tie_rule)), options.normalization));
      break;
  }
  return result;
}

void write_stacks_text(std::ostream& out, const StackSequence& stacks) {
  char buf[32];
  for (std::size_t f = 0; f < stacks.stacks.size(); ++f) {
    const PartitionStack& s = stacks.stacks[f];
    out << "stack " << f << " K " << s.num_partitions() << " V " << s.num_joints() << '\n';
    for (std::size_t k = 0; k < s.num_partitions(); ++k) {
      out << "slice " << k << '\n';
      for (std::size_t r = 0; r < s.num_joints(); ++r) {
        for (std::size_t c = 0; c < s.num_joints(); ++c) {
          std::snprintf(buf, sizeof buf, "%.6f", s(k, r, c));
          if (c) out << ' ';
          out << buf;
        }
        out << '\n';
      }
    }
  }
}

void write_stacks_binary(std::ostream& out, const StackSequence& stacks) {
  if (stacks.stacks.empty()) throw ShapeError("no stacks to write");
  const auto k = static_cast<std::uint32_t>(stacks.num_partitions());
  const auto v = static_cast<std::uint32_t>(stacks.num_joints());
  std::uint32_t flags = 0;
  if (stacks.time_varying) flags |= kStackFlagTimeVarying;
  if (stacks.normalized) flags |= kStackFlagNormalized;
  binary::write_magic(out, "SKAJ");
  binary::write_u32(out, k);
  binary::write_u32(out, v);
  binary::write_u32(out, flags);
  for (const PartitionStack& s : stacks.stacks) {
    for (double x : s.values()) binary::write_f32(out, static_cast<float>(x));
  }
}

StackSequence read_stacks_binary(std::istream& in) {
  binary::expect_magic(in, "SKAJ", "adjacency stack");
  const std::uint32_t k = binary::read_u32(in);
  const std::uint32_t v = binary::read_u32(in);
  const std::uint32_t flags = binary::read_u32(in);
  StackSequence result;
  result.time_varying = (flags & kStackFlagTimeVarying) != 0;
  result.normalized = (flags & kStackFlagNormalized) != 0;
  const std::size_t per_stack = static_cast<std::size_t>(k) * v * v;
  while (in.peek() != std::char_traits<char>::eof()) {
    PartitionStack s(k, v);
    for (std::size_t i = 0; i < per_stack; ++i) {
      const std::size_t kk = i / (v * v);
      const std::size_t r = (i / v) % v;
      const std::size_t c = i % v;
      s(kk, r, c) = binary::read_f32(in);
    }
    result.stacks.push_back(std::move(s));
  }
  if (result.stacks.empty()) throw ParseError("adjacency file has no stacks");
  return result;
}

}  // namespace skelsplit
