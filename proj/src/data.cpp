#include "skelfall/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace skelfall {

namespace {

int parse_field(const std::string& name, size_t pos, char tag) {
  if (name.size() < pos + 4 || name[pos] != tag)
    fail(ErrorCode::format, "sample id '" + name + "' does not match SsssCcccPpppRrrrAaaa");
  int value = 0;
  for (size_t i = pos + 1; i < pos + 4; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(name[i])))
      fail(ErrorCode::format, "sample id '" + name + "' does not match SsssCcccPpppRrrrAaaa");
    value = value * 10 + (name[i] - '0');
  }
  return value;
}

}  // namespace

SampleId SampleId::parse(const std::string& name) {
  if (name.size() != 20)
    fail(ErrorCode::format, "sample id '" + name + "' does not match SsssCcccPpppRrrrAaaa");
  SampleId id;
  id.setup = parse_field(name, 0, 'S');
  id.camera = parse_field(name, 4, 'C');
  id.subject = parse_field(name, 8, 'P');
  id.replication = parse_field(name, 12, 'R');
  id.action = parse_field(name, 16, 'A');
  return id;
}

std::string SampleId::str() const {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "S%03dC%03dP%03dR%03dA%03d", setup, camera, subject,
                replication, action);
  return buf;
}

namespace {

/// Whitespace tokenizer over the file, tracking line numbers for errors.
class SkeletonReader {
 public:
  SkeletonReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) fail(ErrorCode::io, "cannot open skeleton file: " + path);
  }

  [[noreturn]] void error(const std::string& what) {
    fail(ErrorCode::format, path_ + ":" + std::to_string(line_) + ": " + what);
  }

  std::string next_token(const char* what) {
    while (pos_ >= tokens_.size()) {
      std::string line;
      if (!std::getline(in_, line)) error(std::string("unexpected end of file, expected ") + what);
      ++line_;
      tokens_.clear();
      pos_ = 0;
      std::istringstream ls(line);
      std::string tok;
      while (ls >> tok) tokens_.push_back(tok);
    }
    return tokens_[pos_++];
  }

  long long next_int(const char* what) {
    const std::string tok = next_token(what);
    try {
      size_t used = 0;
      const long long v = std::stoll(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      error("expected integer " + std::string(what) + ", got '" + tok + "'");
    }
  }

  double next_real(const char* what) {
    const std::string tok = next_token(what);
    try {
      size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      error("expected number " + std::string(what) + ", got '" + tok + "'");
    }
  }

 private:
  std::string path_;
  std::ifstream in_;
  std::vector<std::string> tokens_;
  size_t pos_ = 0;
  int line_ = 0;
};

struct TrackedBody {
  int first_frame;
  // frame -> V xyz triples
  std::map<int, std::vector<std::array<double, 3>>> frames;
};

}  // namespace

RawSample parse_skeleton_file(const std::string& path, int expected_joints) {
  SkeletonReader reader(path);
  const long long frame_count = reader.next_int("frame count");
  if (frame_count <= 0) reader.error("frame count must be positive");

  std::map<long long, TrackedBody> tracked;
  for (int t = 0; t < frame_count; ++t) {
    const long long body_count = reader.next_int("body count");
    if (body_count < 0 || body_count > 64) reader.error("implausible body count");
    for (int b = 0; b < body_count; ++b) {
      const long long body_id = reader.next_int("body id");
      for (int k = 0; k < 9; ++k) reader.next_real("body metadata");
      const long long joints = reader.next_int("joint count");
      if (joints != expected_joints)
        reader.error("joint count " + std::to_string(joints) + " != expected " +
                     std::to_string(expected_joints));
      auto [it, inserted] = tracked.try_emplace(body_id);
      if (inserted) it->second.first_frame = t;
      auto& frame_joints = it->second.frames[t];
      frame_joints.resize(static_cast<size_t>(expected_joints));
      for (int v = 0; v < expected_joints; ++v) {
        // Coordinates are float32-precision text; quantize through float so
        // write + parse round-trips bit-exactly.
        frame_joints[v][0] = static_cast<float>(reader.next_real("x"));
        frame_joints[v][1] = static_cast<float>(reader.next_real("y"));
        frame_joints[v][2] = static_cast<float>(reader.next_real("z"));
        for (int k = 0; k < 9; ++k) reader.next_real("joint metadata");
      }
    }
  }

  // Rank bodies by summed frame-to-frame displacement; keep the top two.
  struct Ranked {
    double energy;
    int first_frame;
    long long id;
    const TrackedBody* body;
  };
  std::vector<Ranked> ranked;
  for (const auto& [id, body] : tracked) {
    double energy = 0;
    const std::vector<std::array<double, 3>>* prev = nullptr;
    for (const auto& [t, joints] : body.frames) {
      if (prev)
        for (size_t v = 0; v < joints.size(); ++v)
          for (int c = 0; c < 3; ++c) energy += std::abs(joints[v][c] - (*prev)[v][c]);
      prev = &joints;
    }
    ranked.push_back({energy, body.first_frame, id, &body});
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.energy != b.energy) return a.energy > b.energy;
    if (a.first_frame != b.first_frame) return a.first_frame < b.first_frame;
    return a.id < b.id;
  });
  const int bodies = std::max(1, std::min<int>(2, static_cast<int>(ranked.size())));

  RawSample sample;
  const std::string stem = std::filesystem::path(path).stem().string();
  sample.id = stem;
  sample.meta = SampleId::parse(stem);
  sample.action_class = sample.meta.action;
  sample.seq = SkeletonSequence::zeros(3, static_cast<int>(frame_count), expected_joints, bodies);
  for (int m = 0; m < std::min<int>(2, static_cast<int>(ranked.size())); ++m)
    for (const auto& [t, joints] : ranked[static_cast<size_t>(m)].body->frames)
      for (int v = 0; v < expected_joints; ++v)
        for (int c = 0; c < 3; ++c)
          sample.seq.at(c, t, v, m) = static_cast<real>(joints[static_cast<size_t>(v)][c]);
  sample.seq.refresh_valid_frames();
  return sample;
}

const std::vector<int>& ntu60_xsub_train_subjects() {
  // NTU RGB+D cross-subject protocol training performers.
  static const std::vector<int> subjects = {1,  2,  4,  5,  8,  9,  13, 14, 15, 16,
                                            17, 18, 19, 25, 27, 28, 31, 34, 35, 38};
  return subjects;
}

const std::vector<int>& ntu120_xsub_train_subjects() {
  // NTU RGB+D 120 cross-subject protocol training performers.
  static const std::vector<int> subjects = {
      1,  2,  4,  5,  8,  9,  13, 14, 15, 16, 17, 18, 19, 25, 27, 28, 31, 34,
      35, 38, 45, 46, 47, 49, 50, 52, 53, 54, 55, 56, 57, 58, 59, 70, 74, 78,
      80, 81, 82, 83, 84, 85, 86, 89, 91, 92, 93, 94, 95, 97, 98, 100, 103};
  return subjects;
}

DatasetSplit make_split(const std::string& name, const std::vector<std::string>& all_ids) {
  enum class Rule { subject60, camera, subject120, setup_parity, uwa3, uwa4 };
  Rule rule;
  if (name == "xsub60") rule = Rule::subject60;
  else if (name == "xview60") rule = Rule::camera;
  else if (name == "xsub120") rule = Rule::subject120;
  else if (name == "xset120") rule = Rule::setup_parity;
  else if (name == "uwa_val3") rule = Rule::uwa3;
  else if (name == "uwa_val4") rule = Rule::uwa4;
  else
    fail(ErrorCode::invalid_argument,
         "unknown split '" + name +
             "' (expected xsub60, xview60, xsub120, xset120, uwa_val3 or uwa_val4)");

  const std::set<int> sub60(ntu60_xsub_train_subjects().begin(), ntu60_xsub_train_subjects().end());
  const std::set<int> sub120(ntu120_xsub_train_subjects().begin(),
                             ntu120_xsub_train_subjects().end());
  DatasetSplit split;
  split.name = name;
  for (const auto& id : all_ids) {
    const SampleId meta = SampleId::parse(id);
    bool in_train = false, in_test = false;
    switch (rule) {
      case Rule::subject60: in_train = sub60.count(meta.subject) > 0; in_test = !in_train; break;
      case Rule::camera: in_train = meta.camera == 2 || meta.camera == 3; in_test = !in_train; break;
      case Rule::subject120: in_train = sub120.count(meta.subject) > 0; in_test = !in_train; break;
      case Rule::setup_parity: in_train = meta.setup % 2 == 0; in_test = !in_train; break;
      case Rule::uwa3:
        in_train = meta.camera == 1 || meta.camera == 2;
        in_test = meta.camera == 3;
        break;
      case Rule::uwa4:
        in_train = meta.camera == 1 || meta.camera == 2;
        in_test = meta.camera == 4;
        break;
    }
    if (in_train) split.train_ids.push_back(id);
    else if (in_test) split.test_ids.push_back(id);
  }
  return split;
}

int binarize_label(int action_class, int fall_class) {
  if (action_class < 1 || action_class > 120)
    fail(ErrorCode::label, "action class " + std::to_string(action_class) + " outside [1, 120]");
  return action_class == fall_class ? 1 : 0;
}

Dataset load_dataset(const std::string& dir, int fall_class, int expected_joints) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) fail(ErrorCode::io, "not a directory: " + dir);
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".skeleton")
      paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) fail(ErrorCode::io, "no .skeleton files under " + dir);

  Dataset ds;
  ds.samples.reserve(paths.size());
  for (const auto& path : paths) {
    RawSample raw = parse_skeleton_file(path, expected_joints);
    DataSample sample;
    sample.id = raw.id;
    sample.meta = raw.meta;
    sample.action_class = raw.action_class;
    sample.label = binarize_label(raw.action_class, fall_class);
    sample.seq = std::move(raw.seq);
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

SplitView split_dataset(const Dataset& ds, const DatasetSplit& split) {
  std::map<std::string, const DataSample*> by_id;
  for (const auto& s : ds.samples) by_id[s.id] = &s;
  SplitView view;
  for (const auto& id : split.train_ids)
    if (auto it = by_id.find(id); it != by_id.end()) view.train.push_back(it->second);
  for (const auto& id : split.test_ids)
    if (auto it = by_id.find(id); it != by_id.end()) view.test.push_back(it->second);
  return view;
}

void write_id_list(const std::string& path, const std::vector<std::string>& ids) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write " + path);
  for (const auto& id : ids) out << id << "\n";
}

}  // namespace skelfall
