#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "skelsplit/adjacency.hpp"
#include "skelsplit/data_io.hpp"
#include "skelsplit/network.hpp"

namespace skelsplit {

struct TrainConfig {
  double initial_lr = 0.1;
  double decay_factor = 0.1;
  std::vector<std::size_t> decay_epochs{10, 50};
  double weight_decay = 1e-4;
  double dropout = 0.5;
  std::size_t epochs = 80;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  std::size_t frames = 64;  // every sequence is truncated or padded to this length
  bool mask_enabled = false;
  FeatureMode features = FeatureMode::raw;

  void validate() const;
};

/// initial_lr × decay_factor^(number of decay epochs ≤ epoch), epochs counted from 0.
double learning_rate(const TrainConfig& config, std::size_t epoch);

/// Network-ready sample: fixed-length features plus the adjacency for its strategy.
template <class S>
struct PreparedSample {
  Features<S> features;
  GraphInput<S> graph;
  std::size_t label = 0;
};

struct PrepareOptions {
  std::size_t frames = 64;
  FeatureMode features = FeatureMode::raw;
  StackOptions stacks{};
};

/// Fits every sequence to `frames` and builds its partition stacks.
/// spatial_config needs `profile` (see average_distances).
template <class S>
std::vector<PreparedSample<S>> prepare_samples(std::span<const LabeledSample> samples, const SkeletonLayout& layout,
                                               Strategy strategy, const DistanceProfile* profile,
                                               const PrepareOptions& options);

/// Mean cross-entropy over `batch` and its gradient with respect to every parameter.
template <class S>
struct BatchGradients {
  double loss = 0.0;
  std::size_t correct = 0;
  ModelParams<S> gradients;
};

template <class S>
BatchGradients<S> batch_gradients(const ModelParams<S>& model, std::span<const PreparedSample<S>* const> batch,
                                  const ForwardOptions& options, std::span<const std::uint64_t> dropout_seeds = {});

/// p ← p − lr·(g + weight_decay·p); masks are clamped to ≥ 0 afterwards.
template <class S>
void sgd_step(ModelParams<S>& model, const ModelParams<S>& gradients, double lr, double weight_decay);

struct EpochMetrics {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

template <class S>
struct TrainResult {
  ModelParams<S> model;
  std::vector<EpochMetrics> history;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Mini-batch SGD. Throws EmptyDatasetError for an empty training set and
/// DivergenceError when the loss becomes non-finite.
template <class S>
TrainResult<S> train(ModelParams<S> model, std::span<const PreparedSample<S>> train_set,
                     std::span<const PreparedSample<S>> validation_set, const TrainConfig& config,
                     const EpochCallback& on_epoch = {});

/// Classes ranked by descending probability, ties by ascending class id.
template <class S>
std::vector<std::size_t> rank_classes(std::span<const S> probabilities);

/// Fraction of samples whose label is among the top_n ranked classes.
/// Throws ConfigError when top_n is 0 or exceeds the class count.
template <class S>
double evaluate(const ModelParams<S>& model, std::span<const PreparedSample<S>> samples, std::size_t top_n);

struct EvalSummary {
  double loss = 0.0;
  double top1 = 0.0;
};

template <class S>
EvalSummary evaluate_summary(const ModelParams<S>& model, std::span<const PreparedSample<S>> samples);

/// Population variance of the validation accuracy over the last `window` epochs.
double accuracy_variance(std::span<const EpochMetrics> history, std::size_t window = 10);

}  // namespace skelsplit
