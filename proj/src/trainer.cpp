#include "skelsplit/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "skelsplit/errors.hpp"

namespace skelsplit {

void TrainConfig::validate() const {
  if (!(initial_lr > 0.0) || !std::isfinite(initial_lr)) throw ConfigError("learning rate must be positive");
  if (!(decay_factor > 0.0)) throw ConfigError("decay factor must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (frames == 0) throw ConfigError("frame count must be positive");
}

double learning_rate(const TrainConfig& config, std::size_t epoch) {
  const auto passed = std::count_if(config.decay_epochs.begin(), config.decay_epochs.end(),
                                    [&](std::size_t d) { return d <= epoch; });
  return config.initial_lr * std::pow(config.decay_factor, static_cast<double>(passed));
}

template <class S>
std::vector<PreparedSample<S>> prepare_samples(std::span<const LabeledSample> samples, const SkeletonLayout& layout,
                                               Strategy strategy, const DistanceProfile* profile,
                                               const PrepareOptions& options) {
  std::vector<PreparedSample<S>> out;
  out.reserve(samples.size());
  std::optional<GraphInput<S>> shared;
  for (const LabeledSample& sample : samples) {
    sample.sequence.check_layout(layout);
    const SkeletonSequence fitted = fit_frames(sample.sequence, options.frames);
    PreparedSample<S> p;
    p.features = make_features<S>(fitted, options.features);
    p.label = sample.label;
    if (strategy == Strategy::full_distance) {
      p.graph = to_graph_input<S>(stacks_for_sequence(layout, strategy, fitted, profile, options.stacks));
    } else {
      if (!shared) shared = to_graph_input<S>(stacks_for_sequence(layout, strategy, fitted, profile, options.stacks));
      p.graph = *shared;
    }
    out.push_back(std::move(p));
  }
  return out;
}

template <class S>
BatchGradients<S> batch_gradients(const ModelParams<S>& model, std::span<const PreparedSample<S>* const> batch,
                                  const ForwardOptions& options, std::span<const std::uint64_t> dropout_seeds) {
  BatchGradients<S> result{0.0, 0, model.zeros_like()};
  if (batch.empty()) return result;
  const S scale = S(1) / static_cast<S>(batch.size());
  std::vector<S> grad_logits(model.arch.num_classes);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const PreparedSample<S>& sample = *batch[i];
    ForwardOptions opts = options;
    if (i < dropout_seeds.size()) opts.dropout_seed = dropout_seeds[i];
    ForwardCache<S> cache;
    const auto probs = forward(model, sample.features, sample.graph, opts, &cache);
    result.loss += static_cast<double>(cross_entropy<S>(probs, sample.label));
    if (rank_classes<S>(probs).front() == sample.label) ++result.correct;
    for (std::size_t k = 0; k < probs.size(); ++k) {
      grad_logits[k] = (probs[k] - (k == sample.label ? S(1) : S(0))) * scale;
    }
    backward<S>(model, cache, grad_logits, result.gradients);
  }
  result.loss /= static_cast<double>(batch.size());
  return result;
}

template <class S>
void sgd_step(ModelParams<S>& model, const ModelParams<S>& gradients, double lr, double weight_decay) {
  std::vector<std::span<const S>> grads;
  gradients.for_each_tensor([&](const std::string&, std::span<const S> g) { grads.push_back(g); });
  std::size_t index = 0;
  const S rate = static_cast<S>(lr);
  const S decay = static_cast<S>(weight_decay);
  model.for_each_tensor([&](const std::string& name, std::span<S> p) {
    const auto g = grads[index++];
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= rate * (g[i] + decay * p[i]);
    if (name.ends_with(".mask")) {
      for (S& m : p) m = std::max(m, S(0));
    }
  });
}

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

template <class S>
TrainResult<S> train(ModelParams<S> model, std::span<const PreparedSample<S>> train_set,
                     std::span<const PreparedSample<S>> validation_set, const TrainConfig& config,
                     const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw EmptyDatasetError();
  for (const auto& s : train_set) {
    if (s.label >= model.arch.num_classes) throw ConsistencyError("training label exceeds the class count");
  }
  TrainResult<S> result{std::move(model), {}};
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = learning_rate(config, epoch);
    std::mt19937_64 rng(mix(config.seed, epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    ForwardOptions options{true, config.dropout, 0};
    for (std::size_t start = 0, batch_no = 0; start < order.size(); start += config.batch_size, ++batch_no) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<const PreparedSample<S>*> batch;
      std::vector<std::uint64_t> seeds;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&train_set[order[i]]);
        seeds.push_back(mix(mix(config.seed, epoch), order[i]));
      }
      auto bg = batch_gradients<S>(result.model, batch, options, seeds);
      if (!std::isfinite(bg.loss)) {
        throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batch_no) + " (lr " + std::to_string(lr) + ")");
      }
      sgd_step(result.model, bg.gradients, lr, config.weight_decay);
      loss_sum += bg.loss * static_cast<double>(batch.size());
      correct += bg.correct;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr;
    m.train_loss = loss_sum / static_cast<double>(train_set.size());
    m.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
    if (!validation_set.empty()) {
      const auto v = evaluate_summary(result.model, validation_set);
      m.val_loss = v.loss;
      m.val_accuracy = v.top1;
    }
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return result;
}

template <class S>
std::vector<std::size_t> rank_classes(std::span<const S> probabilities) {
  std::vector<std::size_t> idx(probabilities.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return probabilities[a] > probabilities[b]; });
  return idx;
}

template <class S>
double evaluate(const ModelParams<S>& model, std::span<const PreparedSample<S>> samples, std::size_t top_n) {
  if (top_n == 0) throw ConfigError("top-n must be at least 1");
  if (top_n > model.arch.num_classes) {
    throw ConfigError("top-" + std::to_string(top_n) + " exceeds the " + std::to_string(model.arch.num_classes) +
                      " classes");
  }
  if (samples.empty()) throw EmptyDatasetError();
  long hits = 0;
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
#pragma omp parallel for reduction(+ : hits) schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    const auto probs = forward(model, s.features, s.graph);
    const auto ranked = rank_classes<S>(probs);
    if (std::find(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(top_n), s.label) !=
        ranked.begin() + static_cast<std::ptrdiff_t>(top_n)) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

template <class S>
EvalSummary evaluate_summary(const ModelParams<S>& model, std::span<const PreparedSample<S>> samples) {
  if (samples.empty()) throw EmptyDatasetError();
  std::vector<double> losses(samples.size());
  std::vector<int> hit(samples.size());
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    const auto probs = forward(model, s.features, s.graph);
    losses[static_cast<std::size_t>(i)] = static_cast<double>(cross_entropy<S>(probs, s.label));
    hit[static_cast<std::size_t>(i)] = rank_classes<S>(probs).front() == s.label;
  }
  EvalSummary out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out.loss += losses[i];
    out.top1 += hit[i];
  }
  out.loss /= static_cast<double>(samples.size());
  out.top1 /= static_cast<double>(samples.size());
  return out;
}

double accuracy_variance(std::span<const EpochMetrics> history, std::size_t window) {
  if (history.empty() || window == 0) return 0.0;
  const std::size_t n = std::min(window, history.size());
  const auto tail = history.subspan(history.size() - n);
  double mean = 0.0;
  for (const auto& m : tail) mean += m.val_accuracy;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const auto& m : tail) var += (m.val_accuracy - mean) * (m.val_accuracy - mean);
  return var / static_cast<double>(n);
}

#define SKELSPLIT_INSTANTIATE(S)                                                                                  \
  template std::vector<PreparedSample<S>> prepare_samples<S>(std::span<const LabeledSample>, const SkeletonLayout&, \
                                                             Strategy, const DistanceProfile*, const PrepareOptions&); \
  template BatchGradients<S> batch_gradients<S>(const ModelParams<S>&, std::span<const PreparedSample<S>* const>,  \
                                                const ForwardOptions&, std::span<const std::uint64_t>);            \
  template void sgd_step<S>(ModelParams<S>&, const ModelParams<S>&, double, double);                            \
  template TrainResult<S> train<S>(ModelParams<S>, std::span<const PreparedSample<S>>,                          \
                                   std::span<const PreparedSample<S>>, const TrainConfig&, const EpochCallback&); \
  template std::vector<std::size_t> rank_classes<S>(std::span<const S>);                                        \
  template double evaluate<S>(const ModelParams<S>&, std::span<const PreparedSample<S>>, std::size_t);          \
  template EvalSummary evaluate_summary<S>(const ModelParams<S>&, std::span<const PreparedSample<S>>);

SKELSPLIT_INSTANTIATE(float)
SKELSPLIT_INSTANTIATE(double)
#undef SKELSPLIT_INSTANTIATE

}  // namespace skelsplit
