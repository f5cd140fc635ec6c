#pragma once

#include <filesystem>
#include <string>

#include "skelsplit/adjacency.hpp"
#include "skelsplit/network.hpp"
#include "skelsplit/partition.hpp"

namespace skelsplit {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams<float> model;
  Strategy strategy = Strategy::index;
  std::string layout_name;
  // How training inputs were prepared; evaluation repeats it.
  FeatureMode features = FeatureMode::raw;
  std::size_t frames = 64;
  TieRule tie_rule{};
  Normalization normalization = Normalization::row;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Binary layout, little endian:
///   "SKCK", u32 version, u32 strategy id, layout name (16 bytes, NUL padded),
///   u32 K, u32 class count, u32 input channels, u32 joints, u32 temporal kernel,
///   u32 mask flag, u32 feature mode, u32 frames, u32 tie rule, u64 tie seed (two u32, low first),
///   u32 normalization, u32 layer count, then (u32 out channels, u32 stride) per layer,
///   then every tensor in for_each_tensor order followed by input shift and scale, as f32.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Reads a checkpoint. When the manifest beside it exists its checksums are verified.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// `<path>.manifest`: one line per tensor, "<name> <shape> fnv1a64 <hex>".
std::filesystem::path manifest_path(const std::filesystem::path& checkpoint);
std::string format_checkpoint_manifest(const Checkpoint& checkpoint);

}  // namespace skelsplit
