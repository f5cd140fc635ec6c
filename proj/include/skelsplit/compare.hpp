#pragma once

#include <functional>
#include <string>
#include <vector>

#include "skelsplit/trainer.hpp"

namespace skelsplit {

struct ComparisonArm {
  Strategy strategy = Strategy::index;
  bool mask = false;

  friend bool operator==(const ComparisonArm&, const ComparisonArm&) = default;
};

/// The four strategies with the mask off, then the index split with the mask on.
std::vector<ComparisonArm> default_arms();

/// Two 64-channel layers, temporal stride 1.
std::vector<LayerSpec> toy_layers();

/// TrainConfig defaults with batch size 16 and 40 epochs.
TrainConfig toy_train_config();

struct CompareConfig {
  std::string layout = "openpose18";
  TrainConfig train = toy_train_config();
  std::vector<LayerSpec> layers = toy_layers();
  std::size_t temporal_kernel = 9;
  bool normalize_inputs = true;
  std::vector<ComparisonArm> arms = default_arms();
};

struct ComparisonRow {
  ComparisonArm arm;
  bool failed = false;
  std::string error;
  double top1 = 0.0;
  double top5 = 0.0;  // top-min(5, classes)
  double final_loss = 0.0;  // training loss of the last epoch
  double accuracy_variance = 0.0;  // validation accuracy over the last 10 epochs
  std::vector<EpochMetrics> history;
  double seconds = 0.0;
};

using ArmCallback = std::function<void(const ComparisonRow&)>;

/// Trains one model per arm from the same seed and configuration and scores it on `validation_samples`.
/// A diverging arm is reported as failed; the remaining arms still run.
std::vector<ComparisonRow> run_comparison(const CompareConfig& config, std::span<const LabeledSample> train_samples,
                                          std::span<const LabeledSample> validation_samples, std::size_t num_classes,
                                          const ArmCallback& on_arm = {}, const EpochCallback& on_epoch = {});

/// Aligned text table: strategy, mask, top-1, top-5, final loss, accuracy variance.
std::string format_comparison_table(std::span<const ComparisonRow> rows);
/// Same columns as comma-separated values with a header row.
std::string format_comparison_csv(std::span<const ComparisonRow> rows);
/// Per-epoch metrics of every arm, comma-separated with a header row.
std::string format_history_csv(std::span<const ComparisonRow> rows);

}  // namespace skelsplit
