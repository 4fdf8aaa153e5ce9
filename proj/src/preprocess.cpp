#include "skelfall/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace skelfall {

namespace {

using Vec3 = std::array<real, 3>;

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
real dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
real norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
Vec3 scaled(const Vec3& a, real s) { return {a[0] * s, a[1] * s, a[2] * s}; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

}  // namespace

SkeletonSequence SkeletonSequence::zeros(int c, int t, int v, int m) {
  SkeletonSequence seq;
  seq.channels = c;
  seq.frames = t;
  seq.joints = v;
  seq.bodies = m;
  seq.data.assign(static_cast<size_t>(c) * t * v * m, real(0));
  seq.valid_frames.assign(static_cast<size_t>(t), 0);
  return seq;
}

bool SkeletonSequence::body_present(int t, int m) const {
  for (int c = 0; c < channels; ++c)
    for (int v = 0; v < joints; ++v)
      if (at(c, t, v, m) != real(0)) return true;
  return false;
}

bool SkeletonSequence::frame_empty(int t) const {
  for (int m = 0; m < bodies; ++m)
    if (body_present(t, m)) return false;
  return true;
}

void SkeletonSequence::refresh_valid_frames() {
  valid_frames.assign(static_cast<size_t>(frames), 0);
  for (int t = 0; t < frames; ++t) valid_frames[t] = frame_empty(t) ? 0 : 1;
}

SkeletonSequence discard_empty_frames(const SkeletonSequence& seq) {
  std::vector<int> keep;
  for (int t = 0; t < seq.frames; ++t)
    if (!seq.frame_empty(t)) keep.push_back(t);
  if (keep.empty()) fail(ErrorCode::empty_sample, "sequence has no frames with a skeleton");
  SkeletonSequence out = SkeletonSequence::zeros(seq.channels, static_cast<int>(keep.size()),
                                                 seq.joints, seq.bodies);
  for (int c = 0; c < seq.channels; ++c)
    for (size_t ti = 0; ti < keep.size(); ++ti)
      for (int v = 0; v < seq.joints; ++v)
        for (int m = 0; m < seq.bodies; ++m)
          out.at(c, static_cast<int>(ti), v, m) = seq.at(c, keep[ti], v, m);
  out.refresh_valid_frames();
  return out;
}

SkeletonSequence replay_to_length(const SkeletonSequence& seq, int max_frames) {
  if (seq.frames == 0) fail(ErrorCode::empty_sample, "cannot replay an empty sequence");
  if (max_frames < 1) fail(ErrorCode::invalid_argument, "max_frames must be positive");
  SkeletonSequence out = SkeletonSequence::zeros(seq.channels, max_frames, seq.joints, seq.bodies);
  for (int c = 0; c < seq.channels; ++c)
    for (int t = 0; t < max_frames; ++t) {
      const int src = t % seq.frames;
      for (int v = 0; v < seq.joints; ++v)
        for (int m = 0; m < seq.bodies; ++m) out.at(c, t, v, m) = seq.at(c, src, v, m);
    }
  for (int t = 0; t < max_frames; ++t) out.valid_frames[t] = seq.valid_frames[t % seq.frames];
  return out;
}

SkeletonSequence view_invariant_transform(const SkeletonSequence& seq,
                                          const ReferenceJoints& ref, bool* translation_only) {
  if (seq.channels != 3) fail(ErrorCode::invalid_argument, "view transform needs 3-channel coordinates");
  const int maxref = std::max({ref.spine, ref.hip, ref.shoulder_left, ref.shoulder_right});
  if (maxref >= seq.joints || std::min({ref.spine, ref.hip, ref.shoulder_left, ref.shoulder_right}) < 0)
    fail(ErrorCode::invalid_argument, "reference joint index out of range");

  int f0 = -1;
  for (int t = 0; t < seq.frames && f0 < 0; ++t)
    if (seq.body_present(t, 0)) f0 = t;
  if (f0 < 0) fail(ErrorCode::empty_sample, "no frame with body 0 present");

  auto joint = [&](int v) -> Vec3 {
    return {seq.at(0, f0, v, 0), seq.at(1, f0, v, 0), seq.at(2, f0, v, 0)};
  };
  const Vec3 origin = joint(ref.spine);
  const Vec3 shoulder = sub(joint(ref.shoulder_left), joint(ref.shoulder_right));
  const Vec3 up = sub(joint(ref.spine), joint(ref.hip));

  constexpr real kDegenerate = real(1e-8);
  bool rotate = true;
  Vec3 ex{1, 0, 0}, ey{0, 1, 0}, ez{0, 0, 1};
  const real slen = norm(shoulder);
  if (slen < kDegenerate) {
    rotate = false;
  } else {
    ex = scaled(shoulder, real(1) / slen);
    Vec3 zr = sub(up, scaled(ex, dot(up, ex)));
    const real zlen = norm(zr);
    if (zlen < kDegenerate) {
      rotate = false;
    } else {
      ez = scaled(zr, real(1) / zlen);
      ey = cross(ez, ex);
    }
  }
  if (translation_only) *translation_only = !rotate;

  SkeletonSequence out = seq;
  for (int t = 0; t < seq.frames; ++t)
    for (int m = 0; m < seq.bodies; ++m) {
      if (!seq.body_present(t, m)) continue;  // padding stays exactly zero
      for (int v = 0; v < seq.joints; ++v) {
        const Vec3 p = {seq.at(0, t, v, m), seq.at(1, t, v, m), seq.at(2, t, v, m)};
        const Vec3 q = sub(p, origin);
        if (rotate) {
          out.at(0, t, v, m) = dot(q, ex);
          out.at(1, t, v, m) = dot(q, ey);
          out.at(2, t, v, m) = dot(q, ez);
        } else {
          out.at(0, t, v, m) = q[0];
          out.at(1, t, v, m) = q[1];
          out.at(2, t, v, m) = q[2];
        }
      }
    }
  return out;
}

SkeletonSequence window_at(const SkeletonSequence& seq, int start, int window) {
  if (window < 1 || window > seq.frames || start < 0 || start + window > seq.frames)
    fail(ErrorCode::invalid_argument,
         "window [" + std::to_string(start) + ", " + std::to_string(start + window) +
             ") outside sequence of " + std::to_string(seq.frames) + " frames");
  SkeletonSequence out = SkeletonSequence::zeros(seq.channels, window, seq.joints, seq.bodies);
  for (int c = 0; c < seq.channels; ++c)
    for (int t = 0; t < window; ++t)
      for (int v = 0; v < seq.joints; ++v)
        for (int m = 0; m < seq.bodies; ++m) out.at(c, t, v, m) = seq.at(c, start + t, v, m);
  for (int t = 0; t < window; ++t) out.valid_frames[t] = seq.valid_frames[start + t];
  return out;
}

int draw_window_start(int frames, int window, std::mt19937_64& rng) {
  if (window > frames)
    fail(ErrorCode::invalid_argument, "window " + std::to_string(window) +
                                          " longer than sequence of " + std::to_string(frames));
  const uint64_t range = static_cast<uint64_t>(frames - window) + 1;
  return static_cast<int>(rng() % range);
}

NormStats compute_norm_stats(const std::vector<SkeletonSequence>& train_seqs) {
  NormStats stats;
  for (int c = 0; c < 3; ++c) {
    double sum = 0, sumsq = 0;
    int64_t count = 0;
    for (const auto& seq : train_seqs)
      for (int t = 0; t < seq.frames; ++t)
        for (int m = 0; m < seq.bodies; ++m) {
          if (!seq.body_present(t, m)) continue;
          for (int v = 0; v < seq.joints; ++v) {
            const double x = static_cast<double>(seq.at(c, t, v, m));
            sum += x;
            sumsq += x * x;
            ++count;
          }
        }
    if (count == 0) continue;
    const double mean = sum / static_cast<double>(count);
    const double var = std::max(0.0, sumsq / static_cast<double>(count) - mean * mean);
    stats.mean[c] = static_cast<real>(mean);
    stats.stddev[c] = static_cast<real>(std::sqrt(var));
  }
  return stats;
}

SkeletonSequence normalize_joints(const SkeletonSequence& seq, const NormStats& stats) {
  SkeletonSequence out = seq;
  constexpr real kStdFloor = real(1e-8);
  for (int t = 0; t < seq.frames; ++t)
    for (int m = 0; m < seq.bodies; ++m) {
      if (!seq.body_present(t, m)) continue;
      for (int c = 0; c < 3; ++c) {
        const real sd = std::max(stats.stddev[c], kStdFloor);
        for (int v = 0; v < seq.joints; ++v)
          out.at(c, t, v, m) = (seq.at(c, t, v, m) - stats.mean[c]) / sd;
      }
    }
  return out;
}

SkeletonSequence compute_velocity(const SkeletonSequence& joints) {
  SkeletonSequence vel = SkeletonSequence::zeros(joints.channels, joints.frames, joints.joints,
                                                 joints.bodies);
  for (int c = 0; c < joints.channels; ++c)
    for (int t = 1; t < joints.frames; ++t)
      for (int v = 0; v < joints.joints; ++v)
        for (int m = 0; m < joints.bodies; ++m)
          vel.at(c, t, v, m) = joints.at(c, t, v, m) - joints.at(c, t - 1, v, m);
  vel.valid_frames = joints.valid_frames;
  return vel;
}

SkeletonSequence prepare_sequence(const SkeletonSequence& seq, const PreprocessConfig& cfg,
                                  bool* translation_only) {
  SkeletonSequence s = discard_empty_frames(seq);
  s = view_invariant_transform(s, cfg.ref, translation_only);
  return replay_to_length(s, cfg.max_frames);
}

ModelInput finalize_sample(const SkeletonSequence& prepared, const NormStats& stats, int label,
                           int window_start, int window) {
  ModelInput input;
  input.joints = normalize_joints(window_at(prepared, window_start, window), stats);
  input.velocity = compute_velocity(input.joints);
  input.label = label;
  return input;
}

std::pair<Tensor, Tensor> to_model_tensors(const std::vector<ModelInput>& batch, int bodies) {
  if (batch.empty()) fail(ErrorCode::invalid_argument, "empty batch");
  const int c = batch[0].joints.channels;
  const int t = batch[0].joints.frames;
  const int v = batch[0].joints.joints;
  const int64_t n = static_cast<int64_t>(batch.size());
  Tensor joints = Tensor::zeros({n * bodies, c, t, v});
  Tensor velocity = Tensor::zeros({n * bodies, c, t, v});
  for (int64_t i = 0; i < n; ++i) {
    const auto& s = batch[static_cast<size_t>(i)];
    if (s.joints.channels != c || s.joints.frames != t || s.joints.joints != v)
      fail(ErrorCode::dimension, "ragged batch: sample shapes differ");
    const int m_copy = std::min(bodies, s.joints.bodies);
    for (int m = 0; m < m_copy; ++m) {
      const int64_t row = i * bodies + m;
      for (int cc = 0; cc < c; ++cc)
        for (int tt = 0; tt < t; ++tt)
          for (int vv = 0; vv < v; ++vv) {
            const int64_t dst = ((row * c + cc) * t + tt) * v + vv;
            joints.data()[dst] = s.joints.at(cc, tt, vv, m);
            velocity.data()[dst] = s.velocity.at(cc, tt, vv, m);
          }
    }
  }
  return {joints, velocity};
}

std::mt19937_64 sample_rng(uint64_t seed, uint64_t sample_index, uint64_t epoch) {
  // splitmix64 over the three keys
  uint64_t z = seed;
  for (uint64_t key : {sample_index + 1, epoch + 1}) {
    z += 0x9E3779B97F4A7C15ull * key;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z = z ^ (z >> 31);
  }
  return std::mt19937_64(z);
}

}  // namespace skelfall
