#include "skelsplit/synth.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "skelsplit/errors.hpp"

namespace skelsplit {

namespace {

struct Point {
  double x;
  double y;
};

using Pose = std::array<Point, kOpenPoseJoints>;

// Standing person facing the camera; y grows downward, the person's right side is image left.
constexpr Pose kRestPose = {{
    {0.50, 0.20}, {0.50, 0.30}, {0.42, 0.30}, {0.40, 0.42}, {0.39, 0.53}, {0.58, 0.30},
    {0.60, 0.42}, {0.61, 0.53}, {0.45, 0.55}, {0.45, 0.70}, {0.45, 0.85}, {0.55, 0.55},
    {0.55, 0.70}, {0.55, 0.85}, {0.48, 0.18}, {0.52, 0.18}, {0.46, 0.19}, {0.54, 0.19},
}};

constexpr double kUpperArm = 0.12;
constexpr double kArm = 0.23;

// angle 0 = hanging down, π = straight up; side −1 = right arm, +1 = left arm.
void place_arm(Pose& pose, int side, double angle, double wrist_dx = 0.0) {
  const std::size_t shoulder = side < 0 ? 2 : 5;
  const Point s = pose[shoulder];
  const double dx = side * std::sin(angle);
  const double dy = std::cos(angle);
  pose[shoulder + 1] = {s.x + kUpperArm * dx, s.y + kUpperArm * dy};
  pose[shoulder + 2] = {s.x + kArm * dx + wrist_dx, s.y + kArm * dy};
}

Pose pose_at(std::size_t label, double progress) {
  Pose pose = kRestPose;
  const double pi = std::numbers::pi;
  switch (label) {
    case 0: place_arm(pose, -1, progress * pi); break;
    case 1: place_arm(pose, +1, progress * pi); break;
    case 2: {
      const double depth = 0.15 * progress;
      for (std::size_t j : {0, 1, 2, 3, 4, 5, 6, 7, 8, 11, 14, 15, 16, 17}) pose[j].y += depth;
      pose[9] = {pose[9].x - 0.04 * progress, pose[9].y + depth / 2};
      pose[12] = {pose[12].x + 0.04 * progress, pose[12].y + depth / 2};
      break;
    }
    case 3:
      place_arm(pose, -1, progress * pi);
      place_arm(pose, +1, progress * pi);
      break;
    case 4: place_arm(pose, -1, 0.75 * pi, 0.05 * std::sin(4.0 * pi * progress)); break;
    case 5: {
      const double angle = 0.3 * progress;
      const Point pivot{0.50, 0.55};
      for (std::size_t j : {0, 1, 2, 3, 4, 5, 6, 7, 14, 15, 16, 17}) {
        const double x = pose[j].x - pivot.x;
        const double y = pose[j].y - pivot.y;
        pose[j] = {pivot.x + x * std::cos(angle) - y * std::sin(angle), pivot.y + x * std::sin(angle) + y * std::cos(angle)};
      }
      break;
    }
    default: throw ConfigError("no synthetic motion for class " + std::to_string(label));
  }
  return pose;
}

}  // namespace

void SynthSpec::validate() const {
  if (num_classes == 0 || samples_per_class == 0 || frames == 0) {
    throw ConfigError("synth: class, sample and frame counts must be at least 1");
  }
  if (num_classes > kMaxSynthClasses) {
    throw ConfigError("synth: at most " + std::to_string(kMaxSynthClasses) + " classes are available");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("synth: noise sigma must be ≥ 0");
}

std::string synth_class_name(std::size_t label) {
  static const char* names[kMaxSynthClasses] = {"raise-right-arm", "raise-left-arm", "squat",
                                                "raise-both-arms", "wave-right",     "lean-left"};
  if (label >= kMaxSynthClasses) throw IndexError("no synthetic class " + std::to_string(label));
  return names[label];
}

SynthDataset synth_dataset(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  SynthDataset out;
  out.num_classes = spec.num_classes;
  const std::size_t val_count = spec.samples_per_class / 4;
  const std::size_t train_count = spec.samples_per_class - val_count;

  for (std::size_t label = 0; label < spec.num_classes; ++label) {
    std::vector<Pose> clip(spec.frames);
    for (std::size_t t = 0; t < spec.frames; ++t) {
      clip[t] = pose_at(label, static_cast<double>(t + 1) / static_cast<double>(spec.frames));
    }
    for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
      std::vector<double> data;
      data.reserve(spec.frames * kOpenPoseValues);
      for (const Pose& pose : clip) {
        for (const Point& p : pose) {
          data.push_back(p.x + spec.noise_sigma * noise(rng));
          data.push_back(p.y + spec.noise_sigma * noise(rng));
          data.push_back(1.0);
        }
      }
      char id[32];
      std::snprintf(id, sizeof id, "c%zu_s%03zu", label, s);
      LabeledSample sample{SkeletonSequence("openpose18", spec.frames, kOpenPoseJoints, 3, std::move(data)), label,
                           id};
      (s < train_count ? out.train : out.validation).push_back(std::move(sample));
    }
  }
  return out;
}

}  // namespace skelsplit
