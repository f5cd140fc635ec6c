#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "skelsplit/adjacency.hpp"
#include "skelsplit/checkpoint.hpp"
#include "skelsplit/compare.hpp"
#include "skelsplit/data_io.hpp"
#include "skelsplit/errors.hpp"
#include "skelsplit/synth.hpp"
#include "skelsplit/trainer.hpp"

namespace fs = std::filesystem;
using namespace skelsplit;

namespace {

enum ExitCode { kOk = 0, kRuntime = 1, kUsage = 2, kArmFailed = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path default_out_dir() {
  const char* env = std::getenv("SKELSPLIT_OUT_DIR");
  return env && *env ? fs::path(env) : fs::path(".");
}

fs::path out_or_default(const std::string& out, const std::string& fallback) {
  return out.empty() ? default_out_dir() / fallback : fs::path(out);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

const std::map<std::string, Strategy> kStrategyNames = {{"spatial", Strategy::spatial_config},
                                                        {"fulldist", Strategy::full_distance},
                                                        {"connection", Strategy::connection},
                                                        {"index", Strategy::index}};
const std::map<std::string, bool> kOnOff = {{"on", true}, {"off", false}};
const std::map<std::string, Normalization> kNormalizations = {
    {"none", Normalization::none}, {"row", Normalization::row}, {"symmetric", Normalization::symmetric}};
const std::map<std::string, FeatureMode> kFeatureModes = {
    {"raw", FeatureMode::raw}, {"centered", FeatureMode::centered}, {"cg_distance", FeatureMode::cg_distance}};

std::vector<std::string> builtin_names() { return builtin_layout_names(); }

SequenceFormat format_for(const fs::path& p) {
  if (fs::is_directory(p)) return SequenceFormat::openpose_dir;
  if (p.extension() == ".sksb") return SequenceFormat::internal_binary;
  return SequenceFormat::internal;
}

// Layout, strategy and the inputs a strategy needs.
struct GraphArgs {
  std::string layout = "openpose18";
  std::string layout_file;
  Strategy strategy = Strategy::index;
  std::string frame_json;
  std::string sequence;
  std::optional<std::size_t> frame_index;
  std::string profile;
  std::string manifest;
  std::string tie_rule = "index";
  std::uint64_t seed = 0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--layout", layout, "Built-in layout")->check(CLI::IsMember(builtin_names()));
    cmd->add_option("--layout-file", layout_file, "Layout file (overrides --layout)")->check(CLI::ExistingFile);
    cmd->add_option("--strategy", strategy, "Partition strategy")
        ->required()
        ->transform(CLI::CheckedTransformer(kStrategyNames));
    cmd->add_option("--frame", frame_json, "Keypoint JSON file with one frame (fulldist)")->check(CLI::ExistingFile);
    cmd->add_option("--sequence", sequence, "Sequence file or keypoint directory (fulldist)")->check(CLI::ExistingPath);
    cmd->add_option("--frame-index", frame_index, "Frame of --sequence to use");
    cmd->add_option("--profile", profile, "Reference distance profile (spatial)")->check(CLI::ExistingFile);
    cmd->add_option("--manifest", manifest, "Training manifest for the reference profile (spatial)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--tie-rule", tie_rule, "Equal-degree order for connection")
        ->check(CLI::IsMember({"index", "random"}));
    cmd->add_option("--seed", seed, "Seed of the random tie rule");
  }

  SkeletonLayout resolve_layout() const {
    return layout_file.empty() ? builtin_layout(layout) : load_layout_file(layout_file);
  }

  TieRule resolve_tie_rule() const {
    return tie_rule == "random" ? TieRule::seeded_random(seed) : TieRule::by_index();
  }

  // Sequence for fulldist: one frame from --frame, or --sequence (optionally one frame of it).
  SkeletonSequence frames() const {
    if (!frame_json.empty() && !sequence.empty()) throw UsageError("--frame and --sequence are exclusive");
    if (!frame_json.empty()) {
      const auto f = parse_openpose_frame(read_text(frame_json));
      return SkeletonSequence("openpose18", 1, kOpenPoseJoints, 3, f.values);
    }
    if (sequence.empty()) throw UsageError("strategy fulldist needs --frame or --sequence");
    SkeletonSequence seq = load_sequence(sequence, format_for(sequence));
    if (!frame_index) return seq;
    if (*frame_index >= seq.num_frames()) {
      throw UsageError("--frame-index " + std::to_string(*frame_index) + " out of range (" +
                       std::to_string(seq.num_frames()) + " frames)");
    }
    const std::size_t per = seq.num_joints() * seq.channels();
    const auto first = seq.data().begin() + static_cast<std::ptrdiff_t>(*frame_index * per);
    return SkeletonSequence(seq.layout_name(), 1, seq.num_joints(), seq.channels(),
                            std::vector<double>(first, first + static_cast<std::ptrdiff_t>(per)));
  }

  DistanceProfile reference_profile(const SkeletonLayout& l) const {
    if (!profile.empty()) return parse_profile(read_text(profile));
    if (manifest.empty()) throw UsageError("strategy spatial needs --profile or --manifest");
    const auto samples = load_manifest(manifest);
    std::vector<SkeletonSequence> seqs;
    for (const auto& s : samples) seqs.push_back(s.sequence);
    return average_distances(seqs, l);
  }
};

// --- layout ------------------------------------------------------------------

struct LayoutArgs {
  std::string layout = "openpose18";
  std::string layout_file;
};

int cmd_layout(const LayoutArgs& args) {
  const SkeletonLayout l = args.layout_file.empty() ? builtin_layout(args.layout) : load_layout_file(args.layout_file);
  std::cout << format_layout(l);
  std::cout << "# max_degree " << max_degree(l) << "\n# K";
  for (Strategy s : kAllStrategies) std::cout << ' ' << strategy_name(s) << '=' << partition_count(s, l);
  std::cout << '\n';
  return kOk;
}

// --- labels ------------------------------------------------------------------

struct LabelsArgs {
  GraphArgs graph;
  std::string out;
};

int cmd_labels(const LabelsArgs& args) {
  const SkeletonLayout layout = args.graph.resolve_layout();
  std::optional<LabelMap> map;
  switch (args.graph.strategy) {
    case Strategy::spatial_config:
      map = spatial_config_labels(layout, args.graph.reference_profile(layout));
      break;
    case Strategy::full_distance: {
      const auto seq = args.graph.frames();
      if (seq.num_frames() != 1 && !args.graph.frame_index) {
        throw UsageError("labels needs a single frame; pass --frame-index with --sequence");
      }
      seq.check_layout(layout);
      map = full_distance_labels(layout, seq.frame(0));
      break;
    }
    default:
      map = static_labels(args.graph.strategy, layout, args.graph.resolve_tie_rule());
  }
  const std::string text = format_label_map(*map);
  if (args.out.empty()) {
    std::cout << text;
  } else {
    write_text(args.out, text);
  }
  return kOk;
}

// --- adjacency ---------------------------------------------------------------

struct AdjacencyArgs {
  GraphArgs graph;
  std::string format = "text";
  Normalization normalization = Normalization::row;
  std::string out;
};

int cmd_adjacency(const AdjacencyArgs& args) {
  const SkeletonLayout layout = args.graph.resolve_layout();
  StackOptions options{args.graph.resolve_tie_rule(), args.normalization};
  std::optional<DistanceProfile> profile;
  if (args.graph.strategy == Strategy::spatial_config) profile = args.graph.reference_profile(layout);

  std::optional<SkeletonSequence> seq;
  if (args.graph.strategy == Strategy::full_distance) {
    seq = args.graph.frames();
  } else {
    seq = SkeletonSequence(layout.name(), 1, layout.num_joints(), 3,
                           std::vector<double>(layout.num_joints() * 3, 0.0));
  }
  const StackSequence stacks =
      stacks_for_sequence(layout, args.graph.strategy, *seq, profile ? &*profile : nullptr, options);

  if (args.format == "binary") {
    const fs::path path = out_or_default(args.out, "adjacency.bin");
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    write_stacks_binary(out, stacks);
    return kOk;
  }
  std::ostringstream text;
  write_stacks_text(text, stacks);
  if (args.out.empty()) {
    std::cout << text.str();
  } else {
    write_text(args.out, text.str());
  }
  return kOk;
}

// --- data sources --------------------------------------------------------------

struct DataArgs {
  SynthSpec synth;
  std::string train_manifest;
  std::string val_manifest;

  void add_synth(CLI::App* cmd) {
    cmd->add_option("--classes", synth.num_classes, "Synthetic classes")->capture_default_str();
    cmd->add_option("--samples-per-class", synth.samples_per_class, "Synthetic samples per class")
        ->capture_default_str();
    cmd->add_option("--synth-frames", synth.frames, "Synthetic clip length")->capture_default_str();
    cmd->add_option("--noise", synth.noise_sigma, "Synthetic coordinate noise")->capture_default_str();
    cmd->add_option("--synth-seed", synth.seed, "Synthetic data seed")->capture_default_str();
  }

  void add_manifests(CLI::App* cmd) {
    auto* t = cmd->add_option("--train-manifest", train_manifest, "Training manifest")->check(CLI::ExistingFile);
    auto* v = cmd->add_option("--val-manifest", val_manifest, "Validation manifest")->check(CLI::ExistingFile);
    t->needs(v);
    v->needs(t);
  }

  bool from_manifests() const { return !train_manifest.empty(); }

  struct Loaded {
    std::vector<LabeledSample> train;
    std::vector<LabeledSample> validation;
    std::size_t num_classes = 0;
    std::size_t natural_frames = 64;
  };

  Loaded load() const {
    Loaded d;
    if (from_manifests()) {
      d.train = load_manifest(train_manifest);
      d.validation = load_manifest(val_manifest);
      for (const auto* set : {&d.train, &d.validation}) {
        for (const auto& s : *set) d.num_classes = std::max(d.num_classes, s.label + 1);
      }
    } else {
      auto ds = synth_dataset(synth);
      d.train = std::move(ds.train);
      d.validation = std::move(ds.validation);
      d.num_classes = ds.num_classes;
      d.natural_frames = synth.frames;
    }
    return d;
  }
};

// --- synth -------------------------------------------------------------------

struct SynthArgs {
  DataArgs data;
  std::string out;
};

int cmd_synth(const SynthArgs& args) {
  const fs::path dir = out_or_default(args.out, "synth");
  const auto ds = synth_dataset(args.data.synth);
  for (const auto& [split, samples] : {std::pair{"train", &ds.train}, std::pair{"val", &ds.validation}}) {
    auto entries = save_samples(dir / split, *samples);
    for (auto& e : entries) e.path = std::string(split) + "/" + e.path;
    write_manifest(dir / (std::string(split) + ".manifest"), entries);
  }
  std::cout << "classes " << ds.num_classes << '\n';
  for (std::size_t c = 0; c < ds.num_classes; ++c) std::cout << "class " << c << ' ' << synth_class_name(c) << '\n';
  std::cout << "train " << ds.train.size() << "\nval " << ds.validation.size() << '\n';
  std::cout << "manifests " << (dir / "train.manifest").string() << ' ' << (dir / "val.manifest").string() << '\n';
  return kOk;
}

// --- training options --------------------------------------------------------

struct TrainArgs {
  TrainConfig config = toy_train_config();
  std::optional<std::size_t> frames;
  std::string arch = "toy";
  std::string layers;
  bool normalize_inputs = true;
  std::size_t temporal_kernel = 9;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--epochs", config.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--batch-size", config.batch_size, "Mini-batch size")->capture_default_str();
    cmd->add_option("--lr", config.initial_lr, "Initial learning rate")->capture_default_str();
    cmd->add_option("--decay-epochs", config.decay_epochs, "Epochs at which the learning rate decays")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--decay-factor", config.decay_factor, "Learning-rate decay factor")->capture_default_str();
    cmd->add_option("--weight-decay", config.weight_decay, "L2 weight decay")->capture_default_str();
    cmd->add_option("--dropout", config.dropout, "Dropout probability")->capture_default_str();
    cmd->add_option("--seed", config.seed, "Initialization, shuffling and dropout seed")->capture_default_str();
    cmd->add_option("--frames", frames, "Fixed clip length (default: synthetic clip length, else 64)");
    cmd->add_option("--features", config.features, "Input features")->transform(CLI::CheckedTransformer(kFeatureModes));
    cmd->add_option("--arch", arch, "Layer preset")->check(CLI::IsMember({"toy", "full"}))->capture_default_str();
    cmd->add_option("--layers", layers, "Explicit layers, e.g. 64,64,128:2 (channels[:stride])");
    cmd->add_option("--temporal-kernel", temporal_kernel, "Temporal kernel size (odd)")->capture_default_str();
    cmd->add_option("--normalize-inputs", normalize_inputs, "Standardize input channels with training statistics")
        ->transform(CLI::CheckedTransformer(kOnOff));
  }

  std::vector<LayerSpec> resolve_layers() const {
    if (layers.empty()) return arch == "full" ? Architecture::default_layers() : toy_layers();
    std::vector<LayerSpec> out;
    std::stringstream ss(layers);
    std::string item;
    while (std::getline(ss, item, ',')) {
      LayerSpec spec;
      const auto colon = item.find(':');
      try {
        spec.out_channels = std::stoul(item.substr(0, colon));
        if (colon != std::string::npos) spec.temporal_stride = std::stoul(item.substr(colon + 1));
      } catch (const std::exception&) {
        throw UsageError("--layers: cannot parse '" + item + "'");
      }
      out.push_back(spec);
    }
    if (out.empty()) throw UsageError("--layers is empty");
    return out;
  }
};

void print_epoch(const EpochMetrics& m) {
  std::cout << "epoch " << m.epoch << " lr " << fmt(m.lr) << " train_loss " << fmt(m.train_loss) << " train_acc "
            << fmt(m.train_accuracy) << " val_loss " << fmt(m.val_loss) << " val_acc " << fmt(m.val_accuracy) << '\n';
}

fs::path profile_path(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  p += ".profile";
  return p;
}

// --- train -------------------------------------------------------------------

struct TrainCmdArgs {
  DataArgs data;
  TrainArgs train;
  std::string layout = "openpose18";
  Strategy strategy = Strategy::index;
  bool mask = false;
  std::string tie_rule = "index";
  std::uint64_t tie_seed = 0;
  Normalization normalization = Normalization::row;
  std::string out;
  std::string history;
  bool quiet = false;
};

int cmd_train(const TrainCmdArgs& args) {
  const SkeletonLayout layout = builtin_layout(args.layout);
  const auto data = args.data.load();
  const std::size_t frames = args.train.frames.value_or(data.natural_frames);

  std::optional<DistanceProfile> profile;
  if (args.strategy == Strategy::spatial_config) {
    std::vector<SkeletonSequence> seqs;
    for (const auto& s : data.train) seqs.push_back(s.sequence);
    profile = average_distances(seqs, layout);
  }
  PrepareOptions prep;
  prep.frames = frames;
  prep.features = args.train.config.features;
  prep.stacks.tie_rule = args.tie_rule == "random" ? TieRule::seeded_random(args.tie_seed) : TieRule::by_index();
  prep.stacks.normalization = args.normalization;
  const auto train_set = prepare_samples<float>(data.train, layout, args.strategy, profile ? &*profile : nullptr, prep);
  const auto val_set =
      prepare_samples<float>(data.validation, layout, args.strategy, profile ? &*profile : nullptr, prep);

  Architecture arch;
  arch.in_channels = data.train.empty() ? 3 : data.train.front().sequence.channels();
  arch.joints = layout.num_joints();
  arch.partitions = partition_count(args.strategy, layout);
  arch.num_classes = data.num_classes;
  arch.temporal_kernel = args.train.temporal_kernel;
  arch.mask_enabled = args.mask;
  arch.layers = args.train.resolve_layers();

  TrainConfig config = args.train.config;
  config.frames = frames;
  config.mask_enabled = args.mask;

  auto model = init_model<float>(arch, config.seed);
  if (args.train.normalize_inputs && !train_set.empty()) {
    std::vector<Features<float>> features;
    for (const auto& s : train_set) features.push_back(s.features);
    fit_input_normalization<float>(model, features);
  }
  auto result = train<float>(std::move(model), train_set, val_set, config, [&](const EpochMetrics& m) {
    if (!args.quiet) print_epoch(m);
  });

  Checkpoint ck{std::move(result.model), args.strategy, layout.name(), config.features, frames, prep.stacks.tie_rule,
                args.normalization};
  const fs::path path = out_or_default(args.out, "model.ckpt");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_checkpoint(path, ck);
  if (profile) write_text(profile_path(path), format_profile(*profile));
  if (!args.history.empty()) {
    ComparisonRow row;
    row.arm = {args.strategy, args.mask};
    row.history = result.history;
    write_text(args.history, format_history_csv(std::span<const ComparisonRow>(&row, 1)));
  }
  if (!val_set.empty()) {
    const auto summary = evaluate_summary<float>(ck.model, val_set);
    std::cout << "val_top1 " << fmt(summary.top1) << " val_loss " << fmt(summary.loss) << '\n';
  }
  std::cout << "checkpoint " << path.string() << '\n';
  return kOk;
}

// --- eval --------------------------------------------------------------------

struct EvalArgs {
  DataArgs data;
  std::string checkpoint;
  std::string manifest;
  std::string split = "val";
  std::size_t top_n = 1;
};

int cmd_eval(const EvalArgs& args) {
  const Checkpoint ck = load_checkpoint(args.checkpoint);
  const SkeletonLayout layout = builtin_layout(ck.layout_name);
  std::vector<LabeledSample> samples;
  if (!args.manifest.empty()) {
    samples = load_manifest(args.manifest);
  } else {
    auto ds = synth_dataset(args.data.synth);
    samples = args.split == "train" ? std::move(ds.train) : std::move(ds.validation);
  }
  for (const auto& s : samples) {
    if (s.label >= ck.model.arch.num_classes) throw ConsistencyError("sample label exceeds the model's class count");
  }
  std::optional<DistanceProfile> profile;
  if (ck.strategy == Strategy::spatial_config) {
    const fs::path p = profile_path(args.checkpoint);
    if (!fs::exists(p)) throw Error("spatial checkpoint without profile file " + p.string());
    profile = parse_profile(read_text(p));
  }
  PrepareOptions prep;
  prep.frames = ck.frames;
  prep.features = ck.features;
  prep.stacks.tie_rule = ck.tie_rule;
  prep.stacks.normalization = ck.normalization;
  const auto set = prepare_samples<float>(samples, layout, ck.strategy, profile ? &*profile : nullptr, prep);
  if (args.top_n == 0 || args.top_n > ck.model.arch.num_classes) {
    throw UsageError("--top-n must lie in [1, " + std::to_string(ck.model.arch.num_classes) + "]");
  }
  const double acc = evaluate<float>(ck.model, set, args.top_n);
  const auto summary = evaluate_summary<float>(ck.model, set);
  std::cout << "samples " << set.size() << '\n';
  std::cout << "top" << args.top_n << ' ' << fmt(acc) << '\n';
  std::cout << "loss " << fmt(summary.loss) << '\n';
  return kOk;
}

// --- compare -----------------------------------------------------------------

struct CompareArgs {
  DataArgs data;
  TrainArgs train;
  std::string layout = "openpose18";
  std::vector<std::string> arms;
  std::string out;
};

std::vector<ComparisonArm> parse_arms(const std::vector<std::string>& specs) {
  if (specs.empty()) return default_arms();
  std::vector<ComparisonArm> arms;
  for (const auto& spec : specs) {
    const auto colon = spec.find(':');
    const std::string name = spec.substr(0, colon);
    const std::string mask = colon == std::string::npos ? "off" : spec.substr(colon + 1);
    const auto it = kStrategyNames.find(name);
    if (it == kStrategyNames.end() || (mask != "on" && mask != "off")) {
      throw UsageError("--arms: expected <strategy>[:on|off], got '" + spec + "'");
    }
    arms.push_back({it->second, mask == "on"});
  }
  return arms;
}

int cmd_compare(const CompareArgs& args) {
  const auto data = args.data.load();
  CompareConfig config;
  config.layout = args.layout;
  config.train = args.train.config;
  config.train.frames = args.train.frames.value_or(data.natural_frames);
  config.layers = args.train.resolve_layers();
  config.temporal_kernel = args.train.temporal_kernel;
  config.normalize_inputs = args.train.normalize_inputs;
  config.arms = parse_arms(args.arms);

  const auto rows = run_comparison(config, data.train, data.validation, data.num_classes, [](const ComparisonRow& r) {
    std::cerr << strategy_name(r.arm.strategy) << " mask " << (r.arm.mask ? "on" : "off") << ": "
              << (r.failed ? "failed (" + r.error + ")" : "top1 " + fmt(r.top1)) << " in " << fmt(r.seconds)
              << " s\n";
  });
  const std::string table = format_comparison_table(rows);
  const fs::path dir = out_or_default(args.out, "compare");
  fs::create_directories(dir);
  write_text(dir / "compare.txt", table);
  write_text(dir / "compare.csv", format_comparison_csv(rows));
  write_text(dir / "history.csv", format_history_csv(rows));
  std::cout << table;
  const bool any_failed = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.failed; });
  return any_failed ? kArmFailed : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Skeleton graph partition strategies and a small spatial-temporal GCN"};
  app.require_subcommand(1);
  std::function<int()> run;

  LayoutArgs layout_args;
  auto* layout = app.add_subcommand("layout", "Print a skeleton layout with its degree and partition counts");
  layout->add_option("--layout", layout_args.layout, "Built-in layout")->check(CLI::IsMember(builtin_names()));
  layout->add_option("--layout-file", layout_args.layout_file, "Layout file")->check(CLI::ExistingFile);
  layout->callback([&] { run = [&] { return cmd_layout(layout_args); }; });

  LabelsArgs labels_args;
  auto* labels = app.add_subcommand("labels", "Print the label map of a strategy");
  labels_args.graph.add_to(labels);
  labels->add_option("--out", labels_args.out, "Write to a file instead of standard output");
  labels->callback([&] { run = [&] { return cmd_labels(labels_args); }; });

  AdjacencyArgs adjacency_args;
  auto* adjacency = app.add_subcommand("adjacency", "Emit the normalized partition stacks");
  adjacency_args.graph.add_to(adjacency);
  adjacency->add_option("--format", adjacency_args.format, "Output format")
      ->check(CLI::IsMember({"text", "binary"}))
      ->capture_default_str();
  adjacency->add_option("--normalization", adjacency_args.normalization, "Slice normalization")
      ->transform(CLI::CheckedTransformer(kNormalizations));
  adjacency->add_option("--out", adjacency_args.out, "Output file (binary default: $SKELSPLIT_OUT_DIR/adjacency.bin)");
  adjacency->callback([&] { run = [&] { return cmd_adjacency(adjacency_args); }; });

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Write the synthetic dataset with train/val manifests");
  synth_args.data.add_synth(synth);
  synth->add_option("--out", synth_args.out, "Output directory (default: $SKELSPLIT_OUT_DIR/synth)");
  synth->callback([&] { run = [&] { return cmd_synth(synth_args); }; });

  TrainCmdArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train one model and write a checkpoint");
  train_args.data.add_synth(train_cmd);
  train_args.data.add_manifests(train_cmd);
  train_args.train.add_to(train_cmd);
  train_cmd->add_option("--layout", train_args.layout, "Built-in layout")->check(CLI::IsMember(builtin_names()));
  train_cmd->add_option("--strategy", train_args.strategy, "Partition strategy")
      ->required()
      ->transform(CLI::CheckedTransformer(kStrategyNames));
  train_cmd->add_option("--mask", train_args.mask, "Learnable edge-importance mask")
      ->transform(CLI::CheckedTransformer(kOnOff));
  train_cmd->add_option("--tie-rule", train_args.tie_rule, "Equal-degree order for connection")
      ->check(CLI::IsMember({"index", "random"}));
  train_cmd->add_option("--tie-seed", train_args.tie_seed, "Seed of the random tie rule");
  train_cmd->add_option("--normalization", train_args.normalization, "Slice normalization")
      ->transform(CLI::CheckedTransformer(kNormalizations));
  train_cmd->add_option("--out", train_args.out, "Checkpoint path (default: $SKELSPLIT_OUT_DIR/model.ckpt)");
  train_cmd->add_option("--history", train_args.history, "Per-epoch metrics CSV");
  train_cmd->add_flag("--quiet", train_args.quiet, "Do not print per-epoch metrics");
  train_cmd->callback([&] { run = [&] { return cmd_train(train_args); }; });

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Top-n accuracy of a checkpoint");
  eval_args.data.add_synth(eval);
  eval->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--manifest", eval_args.manifest, "Samples to score (default: synthetic split)")
      ->check(CLI::ExistingFile);
  eval->add_option("--split", eval_args.split, "Synthetic split")->check(CLI::IsMember({"train", "val"}));
  eval->add_option("--top-n", eval_args.top_n, "Rank cut-off")->capture_default_str();
  eval->callback([&] { run = [&] { return cmd_eval(eval_args); }; });

  CompareArgs compare_args;
  auto* compare = app.add_subcommand("compare", "Train every strategy under one configuration and tabulate");
  compare_args.data.add_synth(compare);
  compare_args.data.add_manifests(compare);
  compare_args.train.add_to(compare);
  compare->add_option("--layout", compare_args.layout, "Built-in layout")->check(CLI::IsMember(builtin_names()));
  compare->add_option("--arms", compare_args.arms, "Arms as strategy[:on|off] (default: all four off, index on)")
      ->delimiter(',');
  compare->add_option("--out", compare_args.out, "Output directory (default: $SKELSPLIT_OUT_DIR/compare)");
  compare->callback([&] { run = [&] { return cmd_compare(compare_args); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    return run();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}
