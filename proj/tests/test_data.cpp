#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "skelfall/data.hpp"
#include "skelfall/synthetic.hpp"

using namespace skelfall;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("sample ids round-trip") {
  const std::string name = "S003C002P015R001A043";
  const SampleId id = SampleId::parse(name);
  CHECK(id.setup == 3);
  CHECK(id.camera == 2);
  CHECK(id.subject == 15);
  CHECK(id.replication == 1);
  CHECK(id.action == 43);
  CHECK(id.str() == name);
  CHECK_THROWS_AS(SampleId::parse("S003C002P015R001"), Error);
  CHECK_THROWS_AS(SampleId::parse("X003C002P015R001A043"), Error);
}

TEST_CASE("skeleton files round-trip through write + parse") {
  TempDir dir("skelfall_parse_test");
  SyntheticSpec spec;
  spec.n_fall = 1;
  spec.n_other = 2;
  spec.min_frames = 6;
  spec.max_frames = 9;
  spec.seed = 21;
  const auto samples = generate_synthetic(spec);
  write_corpus(samples, dir.path.string());

  for (const auto& sample : samples) {
    const RawSample parsed =
        parse_skeleton_file((dir.path / (sample.id + ".skeleton")).string());
    CHECK(parsed.id == sample.id);
    CHECK(parsed.action_class == sample.action_class);
    REQUIRE(parsed.seq.frames == sample.seq.frames);
    REQUIRE(parsed.seq.joints == 25);
    // Values survive the float32 text precision bit-for-bit.
    for (int c = 0; c < 3; ++c)
      for (int t = 0; t < parsed.seq.frames; ++t)
        for (int v = 0; v < 25; ++v)
          CHECK(parsed.seq.at(c, t, v, 0) ==
                static_cast<real>(static_cast<float>(sample.seq.at(c, t, v, 0))));
  }
}

TEST_CASE("parser failure modes carry line context") {
  TempDir dir("skelfall_parse_errors");
  const auto write = [&dir](const char* name, const char* content) {
    std::ofstream out(dir.path / name);
    out << content;
    return (dir.path / name).string();
  };
  CHECK_THROWS_AS(parse_skeleton_file(write("S001C001P001R001A001.skeleton", "")), Error);
  CHECK_THROWS_AS(
      parse_skeleton_file(write("S001C001P001R002A001.skeleton", "1\n1\n1 0 0 0 0 0 0 0 0 2\n7\n")),
      Error);  // joint count != 25
  CHECK_THROWS_WITH_AS(
      parse_skeleton_file(write("S001C001P001R001A002.skeleton", "1\n1\nbogus")),
      doctest::Contains(":3:"), Error);
  CHECK_THROWS_AS(parse_skeleton_file((dir.path / "missing.skeleton").string()), Error);
}

TEST_CASE("three tracked bodies collapse to the two most energetic") {
  TempDir dir("skelfall_bodies");
  const fs::path file = dir.path / "S001C001P001R001A001.skeleton";
  {
    std::ofstream out(file);
    out << "2\n";  // two frames
    for (int t = 0; t < 2; ++t) {
      out << "3\n";  // three bodies per frame
      for (int b = 0; b < 3; ++b) {
        out << (b + 1) << " 0 0 0 0 0 0 0 0 2\n25\n";
        for (int v = 0; v < 25; ++v) {
          // Body 1 barely moves; bodies 2 and 3 sweep further every frame.
          const double x = b == 0 ? 0.001 * t : 0.5 * b * (t + 1);
          out << x << " " << 0.1 * b << " 1.0 0 0 0 0 0 0 0 0 2\n";
        }
      }
    }
  }
  const RawSample parsed = parse_skeleton_file(file.string());
  CHECK(parsed.seq.bodies == 2);
  // Highest-energy body (id 3) lands in slot 0.
  CHECK(parsed.seq.at(0, 1, 0, 0) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("split protocols route by the right metadata field") {
  std::vector<std::string> ids;
  for (int cam = 1; cam <= 3; ++cam)
    for (int subj : {1, 3, 34}) {
      SampleId id;
      id.setup = subj;  // reuse as setup too: odd/even mix
      id.camera = cam;
      id.subject = subj;
      id.replication = 1;
      id.action = 43;
      ids.push_back(id.str());
    }

  const DatasetSplit xview = make_split("xview60", ids);
  for (const auto& sid : xview.train_ids) {
    const int cam = SampleId::parse(sid).camera;
    CHECK((cam == 2 || cam == 3));
  }
  for (const auto& sid : xview.test_ids) CHECK(SampleId::parse(sid).camera == 1);
  CHECK(xview.train_ids.size() + xview.test_ids.size() == ids.size());

  const DatasetSplit xsub = make_split("xsub60", ids);
  for (const auto& sid : xsub.train_ids) {
    const int subj = SampleId::parse(sid).subject;
    CHECK((subj == 1 || subj == 34));  // both in the protocol's training list
  }
  for (const auto& sid : xsub.test_ids) CHECK(SampleId::parse(sid).subject == 3);

  const DatasetSplit xset = make_split("xset120", ids);
  for (const auto& sid : xset.train_ids) CHECK(SampleId::parse(sid).setup % 2 == 0);
  for (const auto& sid : xset.test_ids) CHECK(SampleId::parse(sid).setup % 2 == 1);

  const DatasetSplit val3 = make_split("uwa_val3", ids);
  for (const auto& sid : val3.test_ids) CHECK(SampleId::parse(sid).camera == 3);

  CHECK_THROWS_AS(make_split("nonsense", ids), Error);
}

TEST_CASE("splits are disjoint and stable") {
  SyntheticSpec spec;
  spec.min_frames = 6;
  spec.max_frames = 8;
  const auto samples = generate_synthetic(spec);
  std::vector<std::string> ids;
  for (const auto& s : samples) ids.push_back(s.id);
  for (const char* name : {"xsub60", "xview60", "xsub120", "xset120", "uwa_val3", "uwa_val4"}) {
    const DatasetSplit a = make_split(name, ids);
    const DatasetSplit b = make_split(name, ids);
    CHECK(a.train_ids == b.train_ids);
    CHECK(a.test_ids == b.test_ids);
    std::set<std::string> train(a.train_ids.begin(), a.train_ids.end());
    for (const auto& sid : a.test_ids) CHECK(train.count(sid) == 0);
  }
}

TEST_CASE("label binarization") {
  CHECK(binarize_label(43, 43) == 1);
  CHECK(binarize_label(1, 43) == 0);
  CHECK(binarize_label(43, 80) == 0);
  CHECK_THROWS_AS(binarize_label(0, 43), Error);
  CHECK_THROWS_AS(binarize_label(121, 43), Error);
}

TEST_CASE("synthetic corpora are deterministic and class-separable") {
  SyntheticSpec spec;
  spec.n_fall = 6;
  spec.n_other = 54;
  spec.min_frames = 30;
  spec.max_frames = 50;
  spec.seed = 99;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].seq.data == b[i].seq.data);  // bit-identical
  }

  int falls = 0;
  for (const auto& s : a) falls += s.label;
  CHECK(falls == 6);

  // Noise-free corpora separate perfectly on max per-frame displacement.
  spec.noise_std = 0;
  const auto clean = generate_synthetic(spec);
  real max_other = 0, min_fall = real(1e9);
  for (const auto& s : clean) {
    const real stat = max_frame_displacement(s.seq);
    if (s.label == 1) min_fall = std::min(min_fall, stat);
    else max_other = std::max(max_other, stat);
  }
  CHECK(max_other < min_fall);

  // Fall transitions complete in under half the frames of slow transitions.
  CHECK(real(1) / spec.fall_speed_range[0] < real(0.5) / spec.other_speed_range[1]);
}

TEST_CASE("fall counts over an NTU-like id set match the configured positives") {
  SyntheticSpec spec;
  spec.n_fall = 9;
  spec.n_other = 91;
  spec.min_frames = 6;
  spec.max_frames = 8;
  const auto samples = generate_synthetic(spec);
  int by_label = 0, by_class = 0;
  for (const auto& s : samples) {
    by_label += s.label;
    by_class += binarize_label(SampleId::parse(s.id).action, spec.fall_class);
  }
  CHECK(by_label == 9);
  CHECK(by_class == 9);
}

TEST_CASE("generator rejects inverted speed ranges") {
  SyntheticSpec spec;
  spec.fall_speed_range = {real(0.04), real(0.05)};  // not faster than other range
  CHECK_THROWS_AS(validate_spec(spec), Error);
}

TEST_CASE("dataset loading wires labels and ids") {
  TempDir dir("skelfall_dataset");
  SyntheticSpec spec;
  spec.n_fall = 2;
  spec.n_other = 10;
  spec.min_frames = 6;
  spec.max_frames = 9;
  const auto samples = generate_synthetic(spec);
  write_corpus(samples, dir.path.string());
  const Dataset ds = load_dataset(dir.path.string(), spec.fall_class);
  REQUIRE(ds.samples.size() == samples.size());
  int falls = 0;
  for (const auto& s : ds.samples) falls += s.label;
  CHECK(falls == 2);

  std::vector<std::string> ids;
  for (const auto& s : ds.samples) ids.push_back(s.id);
  const DatasetSplit split = make_split("xview60", ids);
  const SplitView view = split_dataset(ds, split);
  CHECK(view.train.size() == split.train_ids.size());
  CHECK(view.test.size() == split.test_ids.size());
}
