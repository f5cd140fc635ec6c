#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "skelsplit/partition.hpp"
#include "skelsplit/skeleton.hpp"

namespace skelsplit {

/// K dense V×V slices. Row = root (output) joint, column = input joint:
/// slice(k)(j, i) is non-zero iff joint i carries label k in the neighbor set of root j.
class PartitionStack {
 public:
  PartitionStack(std::size_t num_partitions, std::size_t num_joints);

  std::size_t num_partitions() const noexcept { return k_; }
  std::size_t num_joints() const noexcept { return v_; }
  double operator()(std::size_t k, std::size_t row, std::size_t col) const { return values_[(k * v_ + row) * v_ + col]; }
  double& operator()(std::size_t k, std::size_t row, std::size_t col) { return values_[(k * v_ + row) * v_ + col]; }
  std::span<const double> slice(std::size_t k) const;
  /// K×V×V, slice-major then row-major.
  const std::vector<double>& values() const noexcept { return values_; }

  friend bool operator==(const PartitionStack&, const PartitionStack&) = default;

 private:
  std::size_t k_;
  std::size_t v_;
  std::vector<double> values_;
};

/// Binary 0/1 stack; slices sum to A + I. Throws ConsistencyError on a label map
/// that does not match the layout.
PartitionStack build_stack(const SkeletonLayout& layout, const LabelMap& labels);

enum class Normalization {
  none,
  row,        // Λ_k⁻¹ A_k, every non-zero row sums to 1
  symmetric,  // Λ_k⁻½ A_k Λ_k⁻½ with row/column degrees of the slice
};

PartitionStack normalize(const PartitionStack& stack, Normalization scheme = Normalization::row);

/// Adjacency for a whole sequence: one stack reused for every frame, or one
/// stack per frame (full-distance split).
struct StackSequence {
  std::vector<PartitionStack> stacks;
  bool time_varying = false;
  bool normalized = false;

  std::size_t num_partitions() const { return stacks.front().num_partitions(); }
  std::size_t num_joints() const { return stacks.front().num_joints(); }
  const PartitionStack& at_frame(std::size_t t) const { return time_varying ? stacks.at(t) : stacks.front(); }
};

struct StackOptions {
  TieRule tie_rule{};
  Normalization normalization = Normalization::row;
};

/// full_distance → one stack per frame; other strategies → a single static stack.
/// spatial_config needs `profile` (ConfigError otherwise).
StackSequence stacks_for_sequence(const SkeletonLayout& layout, Strategy strategy, const SkeletonSequence& sequence,
                                  const DistanceProfile* profile, const StackOptions& options = {});

/// Text: for every stack, `stack <f> K <K> V <V>` then per slice `slice <k>`
/// followed by V rows of V values with 6 decimals.
void write_stacks_text(std::ostream& out, const StackSequence& stacks);

/// Binary: 16-byte header {magic "SKAJ", u32 K, u32 V, u32 flags} then
/// every stack's K×V×V values as little-endian f32. Flag bit 0 = time varying,
/// bit 1 = normalized. The stack count follows from the payload size.
void write_stacks_binary(std::ostream& out, const StackSequence& stacks);
StackSequence read_stacks_binary(std::istream& in);

inline constexpr std::uint32_t kStackFlagTimeVarying = 1u << 0;
inline constexpr std::uint32_t kStackFlagNormalized = 1u << 1;

}  // namespace skelsplit
