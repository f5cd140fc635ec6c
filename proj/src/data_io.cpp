#include "skelsplit/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "skelsplit/binary_io.hpp"
#include "skelsplit/errors.hpp"

namespace skelsplit {

namespace fs = std::filesystem;

OpenPoseFrame parse_openpose_frame(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed keypoint record: ") + e.what());
  }
  OpenPoseFrame frame;
  frame.values.assign(kOpenPoseValues, 0.0);
  if (!doc.is_object() || !doc.contains("people") || !doc["people"].is_array()) {
    throw ParseError("keypoint record has no 'people' array");
  }
  const auto& people = doc["people"];
  if (people.empty()) return frame;

  const auto& person = people.front();
  const nlohmann::json* keypoints = nullptr;
  for (const char* key : {"pose_keypoints_2d", "pose_keypoints"}) {
    if (person.contains(key)) {
      keypoints = &person[key];
      break;
    }
  }
  if (keypoints == nullptr || !keypoints->is_array()) throw ParseError("person record has no pose keypoint array");
  if (keypoints->size() != kOpenPoseValues) throw ArityError(kOpenPoseValues, keypoints->size());
  for (std::size_t i = 0; i < kOpenPoseValues; ++i) {
    const auto& v = (*keypoints)[i];
    if (!v.is_number()) throw ParseError("keypoint value " + std::to_string(i) + " is not numeric");
    frame.values[i] = v.get<double>();
    if (!std::isfinite(frame.values[i])) throw ParseError("keypoint value " + std::to_string(i) + " is not finite");
  }
  frame.person_detected = true;
  return frame;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

SkeletonSequence load_openpose_dir(const fs::path& dir, LoadReport* report) {
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  if (files.empty()) throw NoFramesError("no frames in " + dir.string());
  std::sort(files.begin(), files.end());

  std::vector<double> data;
  data.reserve(files.size() * kOpenPoseValues);
  LoadReport local;
  LoadReport& rep = report ? *report : local;
  rep = {};
  for (std::size_t t = 0; t < files.size(); ++t) {
    OpenPoseFrame frame;
    try {
      frame = parse_openpose_frame(read_file(files[t]));
    } catch (const ArityError& e) {
      throw ArityError(e.expected(), e.found(), files[t].filename().string());
    } catch (const ParseError& e) {
      throw ParseError(files[t].filename().string() + ": " + e.what());
    }
    if (!frame.person_detected) rep.empty_frames.push_back(t);
    rep.files.push_back(files[t].filename().string());
    data.insert(data.end(), frame.values.begin(), frame.values.end());
  }
  return SkeletonSequence("openpose18", files.size(), kOpenPoseJoints, 3, std::move(data));
}

}  // namespace

SkeletonSequence load_sequence(const fs::path& path, SequenceFormat format, LoadReport* report) {
  switch (format) {
    case SequenceFormat::openpose_dir: return load_openpose_dir(path, report);
    case SequenceFormat::internal: return parse_sequence(read_file(path));
    case SequenceFormat::internal_binary: return load_sequence_binary(path);
  }
  throw ConfigError("unknown sequence format");
}

std::string format_sequence(const SkeletonSequence& seq) {
  std::string out;
  out += "skelseq 1\n";
  out += "layout " + (seq.layout_name().empty() ? std::string("-") : seq.layout_name()) + "\n";
  out += "frames " + std::to_string(seq.num_frames()) + "\n";
  out += "joints " + std::to_string(seq.num_joints()) + "\n";
  out += "channels " + std::to_string(seq.channels()) + "\n";
  char buf[32];
  const auto& d = seq.data();
  for (std::size_t r = 0; r < seq.num_frames() * seq.num_joints(); ++r) {
    for (std::size_t c = 0; c < seq.channels(); ++c) {
      auto res = std::to_chars(buf, buf + sizeof buf, d[r * seq.channels() + c]);
      if (c) out += ' ';
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

SkeletonSequence parse_sequence(std::string_view text) {
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string_view {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    return text.substr(start, pos - start);
  };
  auto expect_key = [&](std::string_view key) {
    const auto tok = next_token();
    if (tok != key) throw ParseError("sequence file: expected '" + std::string(key) + "', got '" + std::string(tok) + "'");
  };
  auto read_count = [&](std::string_view key) {
    expect_key(key);
    const auto tok = next_token();
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
      throw ParseError("sequence file: bad value for '" + std::string(key) + "'");
    }
    return v;
  };
  if (read_count("skelseq") != 1) throw ParseError("sequence file: unsupported version");
  expect_key("layout");
  std::string layout(next_token());
  if (layout == "-") layout.clear();
  const std::size_t frames = read_count("frames");
  const std::size_t joints = read_count("joints");
  const std::size_t channels = read_count("channels");
  std::vector<double> data(frames * joints * channels);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto tok = next_token();
    if (tok.empty()) throw ParseError("sequence file: expected " + std::to_string(data.size()) + " values, found " + std::to_string(i));
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), data[i]);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
      throw ParseError("sequence file: non-numeric value '" + std::string(tok) + "'");
    }
  }
  if (!next_token().empty()) throw ParseError("sequence file: trailing data");
  return SkeletonSequence(layout, frames, joints, channels, std::move(data));
}

void save_sequence(const fs::path& path, const SkeletonSequence& sequence) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << format_sequence(sequence);
}

void save_sequence_binary(const fs::path& path, const SkeletonSequence& seq) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  binary::write_magic(out, "SKSQ");
  binary::write_u32(out, static_cast<std::uint32_t>(seq.num_frames()));
  binary::write_u32(out, static_cast<std::uint32_t>(seq.num_joints()));
  binary::write_u32(out, static_cast<std::uint32_t>(seq.channels()));
  binary::write_u32(out, static_cast<std::uint32_t>(seq.layout_name().size()));
  out.write(seq.layout_name().data(), static_cast<std::streamsize>(seq.layout_name().size()));
  for (double v : seq.data()) binary::write_f32(out, static_cast<float>(v));
}

SkeletonSequence load_sequence_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  binary::expect_magic(in, "SKSQ", "binary sequence");
  const std::uint32_t frames = binary::read_u32(in);
  const std::uint32_t joints = binary::read_u32(in);
  const std::uint32_t channels = binary::read_u32(in);
  const std::uint32_t name_len = binary::read_u32(in);
  if (name_len > 256) throw ParseError("binary sequence: layout name too long");
  std::string name(name_len, '\0');
  if (!in.read(name.data(), name_len)) throw ParseError("binary sequence: truncated header");
  std::vector<double> data(static_cast<std::size_t>(frames) * joints * channels);
  for (double& v : data) v = binary::read_f32(in);
  return SkeletonSequence(name, frames, joints, channels, std::move(data));
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    ManifestEntry e;
    if (!(ls >> e.path)) continue;
    long long label = -1;
    if (!(ls >> label) || label < 0) {
      throw ParseError("manifest " + path.string() + " line " + std::to_string(line_no) + ": expected '<path> <label>'");
    }
    e.label = static_cast<std::size_t>(label);
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest " + path.string());
  for (const auto& e : entries) out << e.path << ' ' << e.label << '\n';
}

std::vector<LabeledSample> load_manifest(const fs::path& path) {
  const auto entries = read_manifest(path);
  const fs::path base = path.parent_path();
  std::vector<LabeledSample> samples;
  samples.reserve(entries.size());
  for (const auto& e : entries) {
    fs::path p = e.path;
    if (p.is_relative()) p = base / p;
    SequenceFormat format = SequenceFormat::internal;
    if (fs::is_directory(p)) format = SequenceFormat::openpose_dir;
    else if (p.extension() == ".sksb") format = SequenceFormat::internal_binary;
    samples.push_back({load_sequence(p, format), e.label, p.stem().string()});
  }
  return samples;
}

std::vector<ManifestEntry> save_samples(const fs::path& dir, const std::vector<LabeledSample>& samples) {
  fs::create_directories(dir);
  std::vector<ManifestEntry> entries;
  for (const auto& s : samples) {
    const std::string file = s.sample_id + ".skseq";
    save_sequence(dir / file, s.sequence);
    entries.push_back({file, s.label});
  }
  return entries;
}

}  // namespace skelsplit
