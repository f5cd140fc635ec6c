#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "skelsplit/skeleton.hpp"

namespace skelsplit {

struct LabeledSample {
  SkeletonSequence sequence;
  std::size_t label = 0;
  std::string sample_id;
};

inline constexpr std::size_t kOpenPoseJoints = 18;
inline constexpr std::size_t kOpenPoseValues = kOpenPoseJoints * 3;

/// One frame of Open Pose output: 18 × (X, Y, C) in file order.
struct OpenPoseFrame {
  std::vector<double> values;  // 54 values, zeros when nobody was detected
  bool person_detected = false;
};

/// Parses an Open Pose keypoint JSON record. Reads the first entry of
/// `people` and its `pose_keypoints_2d` (or legacy `pose_keypoints`) array.
/// Throws ArityError when the array does not hold 54 values, ParseError on
/// malformed JSON or non-numeric values.
OpenPoseFrame parse_openpose_frame(std::string_view text);

enum class SequenceFormat {
  openpose_dir,     // one keypoint JSON file per frame, lexicographic order
  internal,         // text format below
  internal_binary,  // little-endian f32 payload
};

struct LoadReport {
  std::vector<std::string> files;
  std::vector<std::size_t> empty_frames;  // frames without a detected person (zero filled)
};

SkeletonSequence load_sequence(const std::filesystem::path& path, SequenceFormat format,
                               LoadReport* report = nullptr);

/// Internal text format:
///
///     skelseq 1
///     layout <name>
///     frames <T>
///     joints <V>
///     channels <C>
///     <T·V lines of C values, shortest round-trip decimal>
std::string format_sequence(const SkeletonSequence& sequence);
SkeletonSequence parse_sequence(std::string_view text);
void save_sequence(const std::filesystem::path& path, const SkeletonSequence& sequence);

/// Binary variant: {magic "SKSQ", u32 T, u32 V, u32 C, u32 name length, name bytes}
/// followed by T·V·C little-endian f32 values.
void save_sequence_binary(const std::filesystem::path& path, const SkeletonSequence& sequence);
SkeletonSequence load_sequence_binary(const std::filesystem::path& path);

struct ManifestEntry {
  std::string path;  // relative paths resolve against the manifest's directory
  std::size_t label = 0;
};

/// One `<path> <label>` pair per line; `#` starts a comment.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
/// Loads every sample listed in the manifest (internal text format, or
/// internal_binary for `.sksb` files, or an Open Pose directory).
std::vector<LabeledSample> load_manifest(const std::filesystem::path& path);

/// Writes each sample as `<dir>/<sample_id>.skseq` and returns the manifest entries.
std::vector<ManifestEntry> save_samples(const std::filesystem::path& dir, const std::vector<LabeledSample>& samples);

}  // namespace skelsplit
