#include "skelsplit/compare.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

#include "skelsplit/errors.hpp"

namespace skelsplit {

std::vector<ComparisonArm> default_arms() {
  std::vector<ComparisonArm> arms;
  for (Strategy s : kAllStrategies) arms.push_back({s, false});
  arms.push_back({Strategy::index, true});
  return arms;
}

std::vector<LayerSpec> toy_layers() { return {{64, 1}, {64, 1}}; }

TrainConfig toy_train_config() {
  TrainConfig c;
  c.batch_size = 16;
  c.epochs = 40;
  return c;
}

std::vector<ComparisonRow> run_comparison(const CompareConfig& config, std::span<const LabeledSample> train_samples,
                                          std::span<const LabeledSample> validation_samples, std::size_t num_classes,
                                          const ArmCallback& on_arm, const EpochCallback& on_epoch) {
  config.train.validate();
  if (train_samples.empty() || validation_samples.empty()) throw EmptyDatasetError();
  if (config.arms.empty()) throw ConfigError("compare: no arms to run");
  const SkeletonLayout& layout = builtin_layout(config.layout);

  std::vector<SkeletonSequence> reference;
  reference.reserve(train_samples.size());
  for (const auto& s : train_samples) reference.push_back(s.sequence);
  const DistanceProfile profile = average_distances(reference, layout);

  PrepareOptions prep;
  prep.frames = config.train.frames;
  prep.features = config.train.features;

  std::vector<ComparisonRow> rows;
  for (const ComparisonArm& arm : config.arms) {
    ComparisonRow row;
    row.arm = arm;
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto train_set = prepare_samples<float>(train_samples, layout, arm.strategy, &profile, prep);
      const auto val_set = prepare_samples<float>(validation_samples, layout, arm.strategy, &profile, prep);

      Architecture arch;
      arch.in_channels = train_samples.front().sequence.channels();
      arch.joints = layout.num_joints();
      arch.partitions = partition_count(arm.strategy, layout);
      arch.num_classes = num_classes;
      arch.temporal_kernel = config.temporal_kernel;
      arch.mask_enabled = arm.mask;
      arch.layers = config.layers;

      auto model = init_model<float>(arch, config.train.seed);
      if (config.normalize_inputs) {
        std::vector<Features<float>> features;
        features.reserve(train_set.size());
        for (const auto& s : train_set) features.push_back(s.features);
        fit_input_normalization<float>(model, features);
      }
      TrainConfig tc = config.train;
      tc.mask_enabled = arm.mask;
      auto result = train<float>(std::move(model), train_set, val_set, tc, on_epoch);

      row.history = std::move(result.history);
      row.top1 = evaluate<float>(result.model, val_set, 1);
      row.top5 = evaluate<float>(result.model, val_set, std::min<std::size_t>(5, num_classes));
      row.final_loss = row.history.empty() ? 0.0 : row.history.back().train_loss;
      row.accuracy_variance = accuracy_variance(row.history, 10);
    } catch (const DivergenceError& e) {
      row.failed = true;
      row.error = e.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (on_arm) on_arm(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string format_comparison_table(std::span<const ComparisonRow> rows) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %-5s %8s %8s %11s %13s\n", "strategy", "mask", "top1", "top5", "final_loss",
                "acc_var_last10");
  out += line;
  for (const auto& r : rows) {
    const std::string name(strategy_name(r.arm.strategy));
    const char* mask = r.arm.mask ? "on" : "off";
    if (r.failed) {
      std::snprintf(line, sizeof line, "%-12s %-5s %8s %8s %11s %13s\n", name.c_str(), mask, "failed", "-", "-", "-");
    } else {
      std::snprintf(line, sizeof line, "%-12s %-5s %8.4f %8.4f %11.6f %13.6f\n", name.c_str(), mask, r.top1, r.top5,
                    r.final_loss, r.accuracy_variance);
    }
    out += line;
  }
  return out;
}

std::string format_comparison_csv(std::span<const ComparisonRow> rows) {
  std::string out = "strategy,mask,status,top1,top5,final_loss,acc_var_last10\n";
  for (const auto& r : rows) {
    out += std::string(strategy_name(r.arm.strategy)) + "," + (r.arm.mask ? "on" : "off") + ",";
    if (r.failed) {
      out += "failed,,,,\n";
    } else {
      out += "ok," + fixed(r.top1, 6) + "," + fixed(r.top5, 6) + "," + fixed(r.final_loss, 6) + "," +
             fixed(r.accuracy_variance, 6) + "\n";
    }
  }
  return out;
}

std::string format_history_csv(std::span<const ComparisonRow> rows) {
  std::string out = "strategy,mask,epoch,lr,train_loss,train_accuracy,val_loss,val_accuracy\n";
  for (const auto& r : rows) {
    const std::string prefix = std::string(strategy_name(r.arm.strategy)) + "," + (r.arm.mask ? "on" : "off") + ",";
    for (const auto& m : r.history) {
      out += prefix + std::to_string(m.epoch) + "," + fixed(m.lr, 6) + "," + fixed(m.train_loss, 6) + "," + fixed(m.train_accuracy, 6) + "," +
             fixed(m.val_loss, 6) + "," + fixed(m.val_accuracy, 6) + "\n";
    }
  }
  return out;
}

}  // namespace skelsplit
