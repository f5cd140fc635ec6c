#include "skelsplit/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "skelsplit/binary_io.hpp"
#include "skelsplit/errors.hpp"

namespace skelsplit {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kNameBytes = 16;

struct TensorInfo {
  std::string name;
  std::string shape;
  std::span<const float> values;
};

std::vector<TensorInfo> tensors_of(const ModelParams<float>& m) {
  const Architecture& a = m.arch;
  auto dims = [](std::initializer_list<std::size_t> d) {
    std::string s;
    for (std::size_t x : d) s += (s.empty() ? "" : "x") + std::to_string(x);
    return s;
  };
  std::vector<TensorInfo> out;
  m.for_each_tensor([&](const std::string& name, std::span<const float> values) {
    std::string shape;
    const auto dot = name.find('.');
    if (dot != std::string::npos) {
      const auto& l = m.layers[std::stoul(name.substr(5, dot - 5))];
      const std::string field = name.substr(dot + 1);
      if (field == "weights") shape = dims({a.partitions, l.out_channels, l.in_channels});
      else if (field == "mask") shape = dims({a.joints, a.joints});
      else if (field == "temporal") shape = dims({a.temporal_kernel, l.out_channels, l.out_channels});
      else shape = dims({l.out_channels});
    } else if (name == "classifier") {
      shape = dims({a.num_classes, m.layers.empty() ? a.in_channels : m.layers.back().out_channels});
    } else {
      shape = dims({a.num_classes});
    }
    out.push_back({name, shape, values});
  });
  out.push_back({"input_shift", dims({a.in_channels}), m.input_shift});
  out.push_back({"input_scale", dims({a.in_channels}), m.input_scale});
  return out;
}

std::uint64_t checksum(std::span<const float> values) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (float v : values) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    const unsigned char bytes[4] = {static_cast<unsigned char>(bits & 0xff), static_cast<unsigned char>(bits >> 8),
                                    static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
    h = binary::fnv1a(bytes, h);
  }
  return h;
}

std::uint32_t narrow(std::size_t v, const char* what) {
  if (v > 0xffffffffu) throw ConfigError(std::string("checkpoint: ") + what + " too large");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

fs::path manifest_path(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  p += ".manifest";
  return p;
}

std::string format_checkpoint_manifest(const Checkpoint& ck) {
  std::string out = "# checkpoint v" + std::to_string(kCheckpointVersion) + " strategy " +
                    std::string(strategy_name(ck.strategy)) + " layout " + ck.layout_name + "\n";
  char hex[24];
  for (const auto& t : tensors_of(ck.model)) {
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(checksum(t.values)));
    out += t.name + " " + t.shape + " fnv1a64 " + hex + "\n";
  }
  return out;
}

void save_checkpoint(const fs::path& path, const Checkpoint& ck) {
  const Architecture& a = ck.model.arch;
  if (ck.layout_name.size() > kNameBytes) throw ConfigError("checkpoint: layout name longer than 16 bytes");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  binary::write_magic(out, "SKCK");
  binary::write_u32(out, kCheckpointVersion);
  binary::write_u32(out, static_cast<std::uint32_t>(ck.strategy));
  std::string name = ck.layout_name;
  name.resize(kNameBytes, '\0');
  out.write(name.data(), kNameBytes);
  binary::write_u32(out, narrow(a.partitions, "K"));
  binary::write_u32(out, narrow(a.num_classes, "class count"));
  binary::write_u32(out, narrow(a.in_channels, "channel count"));
  binary::write_u32(out, narrow(a.joints, "joint count"));
  binary::write_u32(out, narrow(a.temporal_kernel, "temporal kernel"));
  binary::write_u32(out, a.mask_enabled ? 1u : 0u);
  binary::write_u32(out, static_cast<std::uint32_t>(ck.features));
  binary::write_u32(out, narrow(ck.frames, "frame count"));
  binary::write_u32(out, static_cast<std::uint32_t>(ck.tie_rule.kind));
  binary::write_u32(out, static_cast<std::uint32_t>(ck.tie_rule.seed & 0xffffffffu));
  binary::write_u32(out, static_cast<std::uint32_t>(ck.tie_rule.seed >> 32));
  binary::write_u32(out, static_cast<std::uint32_t>(ck.normalization));
  binary::write_u32(out, narrow(a.layers.size(), "layer count"));
  for (const LayerSpec& l : a.layers) {
    binary::write_u32(out, narrow(l.out_channels, "channel count"));
    binary::write_u32(out, narrow(l.temporal_stride, "stride"));
  }
  for (const auto& t : tensors_of(ck.model)) {
    for (float v : t.values) binary::write_f32(out, v);
  }
  if (!out) throw Error("write failed: " + path.string());
  out.close();

  std::ofstream manifest(manifest_path(path));
  if (!manifest) throw Error("cannot write " + manifest_path(path).string());
  manifest << format_checkpoint_manifest(ck);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  binary::expect_magic(in, "SKCK", "checkpoint");
  const std::uint32_t version = binary::read_u32(in);
  if (version != kCheckpointVersion) throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  const std::uint32_t strategy = binary::read_u32(in);
  if (strategy > static_cast<std::uint32_t>(Strategy::index)) throw ParseError("checkpoint: unknown strategy id");
  Checkpoint ck;
  ck.strategy = static_cast<Strategy>(strategy);
  char name[kNameBytes];
  if (!in.read(name, kNameBytes)) throw ParseError("checkpoint: truncated header");
  ck.layout_name.assign(name, strnlen(name, kNameBytes));

  Architecture a;
  a.partitions = binary::read_u32(in);
  a.num_classes = binary::read_u32(in);
  a.in_channels = binary::read_u32(in);
  a.joints = binary::read_u32(in);
  a.temporal_kernel = binary::read_u32(in);
  a.mask_enabled = binary::read_u32(in) != 0;
  const std::uint32_t features = binary::read_u32(in);
  if (features > static_cast<std::uint32_t>(FeatureMode::cg_distance)) throw ParseError("checkpoint: unknown feature mode");
  ck.features = static_cast<FeatureMode>(features);
  ck.frames = binary::read_u32(in);
  const std::uint32_t tie = binary::read_u32(in);
  if (tie > 1) throw ParseError("checkpoint: unknown tie rule");
  ck.tie_rule.kind = static_cast<TieRule::Kind>(tie);
  const std::uint64_t seed_lo = binary::read_u32(in);
  ck.tie_rule.seed = seed_lo | (static_cast<std::uint64_t>(binary::read_u32(in)) << 32);
  const std::uint32_t normalization = binary::read_u32(in);
  if (normalization > static_cast<std::uint32_t>(Normalization::symmetric)) {
    throw ParseError("checkpoint: unknown normalization");
  }
  ck.normalization = static_cast<Normalization>(normalization);
  const std::uint32_t layers = binary::read_u32(in);
  if (layers > 1024) throw ParseError("checkpoint: implausible layer count");
  a.layers.resize(layers);
  for (LayerSpec& l : a.layers) {
    l.out_channels = binary::read_u32(in);
    l.temporal_stride = binary::read_u32(in);
  }
  try {
    a.validate();
  } catch (const ConfigError& e) {
    throw ParseError(std::string("checkpoint: invalid architecture: ") + e.what());
  }

  ck.model = init_model<float>(a, 0);
  ck.model.for_each_tensor([&](const std::string&, std::span<float> values) {
    for (float& v : values) v = binary::read_f32(in);
  });
  for (float& v : ck.model.input_shift) v = binary::read_f32(in);
  for (float& v : ck.model.input_scale) v = binary::read_f32(in);
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError("checkpoint: trailing data");

  const fs::path mp = manifest_path(path);
  if (fs::exists(mp)) {
    std::ifstream m(mp);
    std::stringstream buf;
    buf << m.rdbuf();
    if (buf.str() != format_checkpoint_manifest(ck)) {
      throw ConsistencyError("checkpoint " + path.string() + " does not match its manifest");
    }
  }
  return ck;
}

}  // namespace skelsplit
