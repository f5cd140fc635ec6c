#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skelsplit/data_io.hpp"

namespace skelsplit {

/// Procedural openpose18 action clips used for desk-scale training.
///
/// Classes, in order: raise right arm, raise left arm, squat, raise both arms,
/// wave right hand, lean left. Every class is a fixed trajectory; the only
/// per-sample variation is isotropic Gaussian noise on the coordinates.
struct SynthSpec {
  std::size_t num_classes = 3;
  std::size_t samples_per_class = 40;
  std::size_t frames = 16;
  double noise_sigma = 0.02;  // normalized image units
  std::uint64_t seed = 7;

  void validate() const;
};

inline constexpr std::size_t kMaxSynthClasses = 6;

struct SynthDataset {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> validation;
  std::size_t num_classes = 0;
};

/// Per class, the first samples_per_class − ⌊samples_per_class/4⌋ samples
/// go to training and the rest to validation (3:1).
SynthDataset synth_dataset(const SynthSpec& spec);

std::string synth_class_name(std::size_t label);

}  // namespace skelsplit
