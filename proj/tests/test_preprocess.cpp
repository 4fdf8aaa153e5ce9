#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "skelfall/preprocess.hpp"
#include "skelfall/synthetic.hpp"

using namespace skelfall;

namespace {

SkeletonSequence random_sequence(int frames, int joints, std::mt19937_64& rng, int bodies = 1) {
  SkeletonSequence seq = SkeletonSequence::zeros(3, frames, joints, bodies);
  for (int c = 0; c < 3; ++c)
    for (int t = 0; t < frames; ++t)
      for (int v = 0; v < joints; ++v)
        seq.at(c, t, v, 0) = static_cast<real>(0.2 + oracles::uniform_double(rng));
  seq.refresh_valid_frames();
  return seq;
}

SkeletonSequence synthetic_person(int frames, uint64_t seed) {
  SyntheticSpec spec;
  spec.n_fall = 1;
  spec.n_other = 1;
  spec.min_frames = frames;
  spec.max_frames = frames;
  spec.seed = seed;
  return generate_synthetic(spec)[0].seq;
}

double pair_distance(const SkeletonSequence& seq, int t, int a, int b) {
  double sq = 0;
  for (int c = 0; c < 3; ++c) {
    const double d = static_cast<double>(seq.at(c, t, a, 0) - seq.at(c, t, b, 0));
    sq += d * d;
  }
  return std::sqrt(sq);
}

}  // namespace

TEST_CASE("discard_empty_frames removes exactly the all-zero frames") {
  std::mt19937_64 rng(3);
  SkeletonSequence seq = random_sequence(3, 4, rng);
  for (int c = 0; c < 3; ++c)
    for (int v = 0; v < 4; ++v) seq.at(c, 1, v, 0) = 0;
  seq.refresh_valid_frames();
  const SkeletonSequence out = discard_empty_frames(seq);
  REQUIRE(out.frames == 2);
  for (int c = 0; c < 3; ++c)
    for (int v = 0; v < 4; ++v) {
      CHECK(out.at(c, 0, v, 0) == seq.at(c, 0, v, 0));
      CHECK(out.at(c, 1, v, 0) == seq.at(c, 2, v, 0));
    }

  const SkeletonSequence untouched = discard_empty_frames(out);
  CHECK(untouched.frames == out.frames);
  CHECK(untouched.data == out.data);
}

TEST_CASE("discard_empty_frames matches a per-frame scan oracle") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    SkeletonSequence seq = random_sequence(12, 3, rng);
    int zeroed = 0;
    for (int t = 0; t < seq.frames; ++t)
      if (rng() % 3 == 0 && zeroed < 11) {
        for (int c = 0; c < 3; ++c)
          for (int v = 0; v < 3; ++v) seq.at(c, t, v, 0) = 0;
        ++zeroed;
      }
    seq.refresh_valid_frames();
    int expected = 0;
    for (int t = 0; t < seq.frames; ++t)
      if (!seq.frame_empty(t)) ++expected;
    CHECK(discard_empty_frames(seq).frames == expected);
  }
}

TEST_CASE("discard_empty_frames rejects fully empty sequences") {
  SkeletonSequence seq = SkeletonSequence::zeros(3, 4, 2, 1);
  CHECK_THROWS_AS(discard_empty_frames(seq), Error);
}

TEST_CASE("replay tiles short sequences and truncates long ones") {
  std::mt19937_64 rng(7);
  const SkeletonSequence seq = random_sequence(100, 2, rng);
  const SkeletonSequence out = replay_to_length(seq, 300);
  REQUIRE(out.frames == 300);
  for (int t = 0; t < 300; ++t)
    for (int c = 0; c < 3; ++c)
      for (int v = 0; v < 2; ++v) CHECK(out.at(c, t, v, 0) == seq.at(c, t % 100, v, 0));

  const SkeletonSequence exact = random_sequence(300, 2, rng);
  CHECK(replay_to_length(exact, 300).data == exact.data);

  const SkeletonSequence longer = random_sequence(400, 2, rng);
  const SkeletonSequence cut = replay_to_length(longer, 300);
  REQUIRE(cut.frames == 300);
  for (int t = 0; t < 300; ++t)
    for (int c = 0; c < 3; ++c) CHECK(cut.at(c, t, 0, 0) == longer.at(c, t, 0, 0));
}

TEST_CASE("view-invariant transform pins the reference frame") {
  const SkeletonSequence seq = synthetic_person(20, 11);
  const ReferenceJoints ref;
  bool warn = true;
  const SkeletonSequence out = view_invariant_transform(seq, ref, &warn);
  CHECK_FALSE(warn);

  for (int c = 0; c < 3; ++c) CHECK(std::abs(out.at(c, 0, ref.spine, 0)) < 1e-9);
  // Shoulder bone on the x axis: y and z components vanish.
  CHECK(std::abs(out.at(1, 0, ref.shoulder_left, 0) - out.at(1, 0, ref.shoulder_right, 0)) < 1e-9);
  CHECK(std::abs(out.at(2, 0, ref.shoulder_left, 0) - out.at(2, 0, ref.shoulder_right, 0)) < 1e-9);
  CHECK(out.at(0, 0, ref.shoulder_left, 0) > out.at(0, 0, ref.shoulder_right, 0));

  // Rigidity: all pairwise distances preserved.
  double worst = 0;
  for (int t = 0; t < seq.frames; t += 5)
    for (int a = 0; a < seq.joints; ++a)
      for (int b = a + 1; b < seq.joints; ++b)
        worst = std::max(worst, std::abs(pair_distance(seq, t, a, b) - pair_distance(out, t, a, b)));
  CHECK(worst < 1e-9);
}

TEST_CASE("view-invariant transform is idempotent") {
  const SkeletonSequence seq = synthetic_person(16, 13);
  const ReferenceJoints ref;
  const SkeletonSequence once = view_invariant_transform(seq, ref);
  const SkeletonSequence twice = view_invariant_transform(once, ref);
  double worst = 0;
  for (size_t i = 0; i < once.data.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(once.data[i] - twice.data[i])));
  CHECK(worst < 1e-6);
}

TEST_CASE("degenerate reference bones fall back to translation only") {
  SkeletonSequence seq = SkeletonSequence::zeros(3, 2, 10, 1);
  // Shoulders coincide: zero-length shoulder bone.
  for (int t = 0; t < 2; ++t)
    for (int v = 0; v < 10; ++v) {
      seq.at(0, t, v, 0) = real(1);
      seq.at(1, t, v, 0) = real(2);
      seq.at(2, t, v, 0) = real(v + 1);
    }
  seq.refresh_valid_frames();
  ReferenceJoints ref;
  ref.spine = 1;
  ref.hip = 0;
  ref.shoulder_left = 4;
  ref.shoulder_right = 5;
  seq.at(2, 0, 5, 0) = seq.at(2, 0, 4, 0);  // same point
  bool warn = false;
  const SkeletonSequence out = view_invariant_transform(seq, ref, &warn);
  CHECK(warn);
  CHECK(std::abs(out.at(0, 0, ref.spine, 0)) < 1e-12);
}

TEST_CASE("window draws are uniform, deterministic and bounded") {
  std::mt19937_64 rng(17);
  // Chi-square over the 51 possible starts for T=300, window=250.
  std::vector<int> counts(51, 0);
  const int draws = 10200;
  for (int i = 0; i < draws; ++i) {
    const int s = draw_window_start(300, 250, rng);
    REQUIRE(s >= 0);
    REQUIRE(s <= 50);
    ++counts[s];
  }
  const double expected = static_cast<double>(draws) / 51.0;
  double chi2 = 0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 76.154);  // df=50 critical value at p=0.01

  CHECK(draw_window_start(250, 250, rng) == 0);
  CHECK_THROWS_AS(draw_window_start(100, 250, rng), Error);

  std::mt19937_64 r1(99), r2(99);
  for (int i = 0; i < 32; ++i) CHECK(draw_window_start(300, 250, r1) == draw_window_start(300, 250, r2));
}

TEST_CASE("normalization statistics whiten the training set") {
  std::mt19937_64 rng(19);
  std::vector<SkeletonSequence> seqs;
  for (int i = 0; i < 8; ++i) seqs.push_back(random_sequence(40, 5, rng));
  const NormStats stats = compute_norm_stats(seqs);
  double sum = 0, sumsq = 0;
  int64_t count = 0;
  for (const auto& seq : seqs) {
    const SkeletonSequence norm = normalize_joints(seq, stats);
    for (int c = 0; c < 3; ++c)
      for (int t = 0; t < norm.frames; ++t)
        for (int v = 0; v < norm.joints; ++v) {
          sum += static_cast<double>(norm.at(c, t, v, 0));
          sumsq += static_cast<double>(norm.at(c, t, v, 0)) * norm.at(c, t, v, 0);
          ++count;
        }
  }
  const double mean = sum / count;
  const double sd = std::sqrt(sumsq / count - mean * mean);
  CHECK(std::abs(mean) < 1e-6);
  CHECK(sd > 1 - 1e-3);
  CHECK(sd < 1 + 1e-3);
}

TEST_CASE("normalization degenerate cases") {
  SkeletonSequence seq = SkeletonSequence::zeros(3, 3, 2, 1);
  for (int t = 0; t < 3; ++t)
    for (int v = 0; v < 2; ++v)
      for (int c = 0; c < 3; ++c) seq.at(c, t, v, 0) = real(4);  // constant channels
  seq.refresh_valid_frames();
  const NormStats stats = compute_norm_stats({seq});
  const SkeletonSequence out = normalize_joints(seq, stats);
  for (real v : out.data) CHECK(v == real(0));  // sigma floor maps constants to zero

  NormStats identity;
  const SkeletonSequence same = normalize_joints(seq, identity);
  CHECK(same.data == seq.data);
}

TEST_CASE("velocity is the zero-prepended frame difference") {
  SkeletonSequence seq = SkeletonSequence::zeros(1, 3, 1, 1);
  seq.at(0, 0, 0, 0) = 1;
  seq.at(0, 1, 0, 0) = 3;
  seq.at(0, 2, 0, 0) = 6;
  seq.refresh_valid_frames();
  const SkeletonSequence vel = compute_velocity(seq);
  CHECK(vel.at(0, 0, 0, 0) == real(0));
  CHECK(vel.at(0, 1, 0, 0) == real(2));
  CHECK(vel.at(0, 2, 0, 0) == real(3));

  std::mt19937_64 rng(23);
  const SkeletonSequence still = random_sequence(1, 4, rng);
  const SkeletonSequence rep = replay_to_length(still, 10);
  for (real v : compute_velocity(rep).data) CHECK(v == real(0));
}

TEST_CASE("cumulative sum of velocity reconstructs the joints exactly") {
  std::mt19937_64 rng(29);
  const SkeletonSequence seq = random_sequence(25, 4, rng);
  const SkeletonSequence vel = compute_velocity(seq);
  for (int c = 0; c < 3; ++c)
    for (int v = 0; v < seq.joints; ++v) {
      real acc = seq.at(c, 0, v, 0);
      for (int t = 1; t < seq.frames; ++t) {
        acc += vel.at(c, t, v, 0);
        CHECK(std::abs(static_cast<double>(acc - seq.at(c, t, v, 0))) < 1e-12);
      }
    }
}

TEST_CASE("full pipeline emits inputs satisfying the model-input invariants") {
  const SkeletonSequence raw = synthetic_person(30, 31);
  PreprocessConfig cfg;
  cfg.max_frames = 40;
  cfg.window = 32;
  const SkeletonSequence prepared = prepare_sequence(raw, cfg);
  REQUIRE(prepared.frames == 40);
  const NormStats stats = compute_norm_stats({prepared});
  std::mt19937_64 rng = sample_rng(1, 0, 0);
  const int start = draw_window_start(prepared.frames, cfg.window, rng);
  const ModelInput input = finalize_sample(prepared, stats, 1, start, cfg.window);
  CHECK(input.joints.frames == cfg.window);
  CHECK(input.label == 1);
  for (int c = 0; c < 3; ++c)
    for (int v = 0; v < input.joints.joints; ++v) {
      CHECK(input.velocity.at(c, 0, v, 0) == real(0));
      for (int t = 1; t < cfg.window; ++t)
        CHECK(input.velocity.at(c, t, v, 0) ==
              input.joints.at(c, t, v, 0) - input.joints.at(c, t - 1, v, 0));
    }
}

TEST_CASE("sample rng streams are stable and distinct") {
  std::mt19937_64 a = sample_rng(5, 10, 2);
  std::mt19937_64 b = sample_rng(5, 10, 2);
  CHECK(a() == b());
  std::mt19937_64 c = sample_rng(5, 11, 2);
  std::mt19937_64 d = sample_rng(5, 10, 3);
  CHECK(a() != c());  // overwhelmingly likely distinct streams
  CHECK(b() != d());
}
