#include "skelfall/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <filesystem>
#include <fstream>

namespace skelfall {

namespace {

using Pose = std::array<std::array<real, 3>, 25>;

// Upright Kinect-v2 style figure, meters, z up.
const Pose& standing_pose() {
  static const Pose pose = {{
      {0.00, 0.00, 0.95},   // 0  spine base
      {0.00, 0.00, 1.15},   // 1  spine mid
      {0.00, 0.00, 1.50},   // 2  neck
      {0.00, 0.02, 1.65},   // 3  head
      {0.20, 0.00, 1.40},   // 4  shoulder left
      {0.25, 0.00, 1.12},   // 5  elbow left
      {0.27, 0.00, 0.88},   // 6  wrist left
      {0.28, 0.00, 0.80},   // 7  hand left
      {-0.20, 0.00, 1.40},  // 8  shoulder right
      {-0.25, 0.00, 1.12},  // 9  elbow right
      {-0.27, 0.00, 0.88},  // 10 wrist right
      {-0.28, 0.00, 0.80},  // 11 hand right
      {0.10, 0.00, 0.92},   // 12 hip left
      {0.11, 0.00, 0.50},   // 13 knee left
      {0.12, 0.00, 0.08},   // 14 ankle left
      {0.13, 0.08, 0.02},   // 15 foot left
      {-0.10, 0.00, 0.92},  // 16 hip right
      {-0.11, 0.00, 0.50},  // 17 knee right
      {-0.12, 0.00, 0.08},  // 18 ankle right
      {-0.13, 0.08, 0.02},  // 19 foot right
      {0.00, 0.00, 1.40},   // 20 spine shoulder
      {0.29, 0.00, 0.74},   // 21 hand tip left
      {0.25, 0.04, 0.78},   // 22 thumb left
      {-0.29, 0.00, 0.74},  // 23 hand tip right
      {-0.25, 0.04, 0.78},  // 24 thumb right
  }};
  return pose;
}

// Body flat on the floor along +y.
Pose lying_pose() {
  Pose lie;
  const Pose& stand = standing_pose();
  for (int v = 0; v < 25; ++v) {
    lie[v][0] = stand[v][0];
    lie[v][1] = real(0.90) * stand[v][2];
    lie[v][2] = real(0.12);
  }
  return lie;
}

real uniform_in(std::mt19937_64& rng, real lo, real hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return static_cast<real>(lo + (hi - lo) * static_cast<real>(u));
}

real gaussian(std::mt19937_64& rng) {
  // Box-Muller on explicit raw draws for cross-platform determinism.
  double u1 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  u1 = std::max(u1, 1e-12);
  return static_cast<real>(std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2));
}

// Gentle arm wave; per-frame displacement stays well under the slow
// transition rate so the displacement threshold keeps separating classes.
void apply_wave(Pose& pose, int t, real amplitude, real freq, bool left_arm) {
  const real offset = amplitude * std::sin(real(6.283185307179586) * freq * static_cast<real>(t));
  const int arm[] = {5, 6, 7, 21, 22};
  const int arm_right[] = {9, 10, 11, 23, 24};
  for (int v : (left_arm ? arm : arm_right)) {
    pose[v][1] += offset;
    pose[v][2] += offset * real(0.5);
  }
}

}  // namespace

void validate_spec(const SyntheticSpec& spec) {
  if (spec.n_fall < 1 || spec.n_other < 1)
    fail(ErrorCode::config, "synthetic spec needs at least one sample per class");
  if (spec.fall_speed_range[0] > spec.fall_speed_range[1] ||
      spec.other_speed_range[0] > spec.other_speed_range[1])
    fail(ErrorCode::config, "synthetic speed ranges must be ordered");
  if (spec.fall_speed_range[0] <= spec.other_speed_range[1])
    fail(ErrorCode::config, "fall speed range must be strictly faster than other speed range");
  if (spec.noise_std < 0) fail(ErrorCode::config, "noise_std must be >= 0");
  if (spec.min_frames < 2 || spec.max_frames < spec.min_frames)
    fail(ErrorCode::config, "bad synthetic frame range");
  if (spec.fall_class < 1 || spec.fall_class > 120)
    fail(ErrorCode::config, "fall class outside [1, 120]");
}

std::vector<SyntheticSample> generate_synthetic(const SyntheticSpec& spec) {
  validate_spec(spec);
  const int total = spec.n_fall + spec.n_other;
  const int stride = std::max(1, total / spec.n_fall);
  // Jitter the fall positions off the stride grid so they never alias with
  // the camera/setup/subject cycles and every split sees both classes.
  std::set<int> fall_at;
  for (int k = 0; k < spec.n_fall; ++k)
    fall_at.insert(k * stride + (stride >= 3 ? k % 3 : k % stride));
  const Pose& stand = standing_pose();
  const Pose lie = lying_pose();

  // Non-fall action ids; 8 plays the slow stand-to-lie transition.
  const int other_actions[] = {8, 1, 9, 10, 23};

  std::vector<SyntheticSample> out;
  out.reserve(static_cast<size_t>(total));
  for (int i = 0; i < total; ++i) {
    const bool is_fall = fall_at.count(i) > 0;
    std::mt19937_64 rng = sample_rng(spec.seed, static_cast<uint64_t>(i), 0);

    const int frames = spec.min_frames +
                       static_cast<int>(rng() % static_cast<uint64_t>(spec.max_frames - spec.min_frames + 1));
    int action;
    bool transition;
    real speed = 0;
    real wave_amp = 0, wave_freq = 0;
    if (is_fall) {
      action = spec.fall_class;
      transition = true;
      speed = uniform_in(rng, spec.fall_speed_range[0], spec.fall_speed_range[1]);
    } else {
      action = other_actions[i % 5];
      transition = action == 8;
      if (transition) {
        speed = uniform_in(rng, spec.other_speed_range[0], spec.other_speed_range[1]);
      } else {
        wave_amp = uniform_in(rng, real(0.03), real(0.07));
        wave_freq = uniform_in(rng, real(0.03), real(0.08));
      }
    }
    const int start = transition ? 4 + static_cast<int>(rng() % static_cast<uint64_t>(frames / 3))
                                 : 0;

    SyntheticSample sample;
    sample.action_class = action;
    sample.label = is_fall ? 1 : 0;
    SampleId meta;
    meta.setup = (i % 32) + 1;
    meta.camera = (i % 3) + 1;
    meta.subject = (i % 40) + 1;
    meta.replication = (i % 2) + 1;
    meta.action = action;
    sample.id = meta.str();

    sample.seq = SkeletonSequence::zeros(3, frames, 25, 1);
    const bool left = (i % 2) == 0;
    for (int t = 0; t < frames; ++t) {
      Pose pose = stand;
      if (transition) {
        const real alpha = std::clamp(speed * static_cast<real>(t - start), real(0), real(1));
        for (int v = 0; v < 25; ++v)
          for (int c = 0; c < 3; ++c)
            pose[v][c] = (real(1) - alpha) * stand[v][c] + alpha * lie[v][c];
      } else {
        apply_wave(pose, t, wave_amp, wave_freq, left);
      }
      for (int v = 0; v < 25; ++v)
        for (int c = 0; c < 3; ++c) {
          real value = pose[v][c];
          if (spec.noise_std > 0) value += spec.noise_std * gaussian(rng);
          sample.seq.at(c, t, v, 0) = value;
        }
    }
    sample.seq.refresh_valid_frames();
    out.push_back(std::move(sample));
  }
  return out;
}

void write_skeleton_file(const std::string& path, const SkeletonSequence& seq) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write " + path);
  char buf[64];
  out << seq.frames << "\n";
  for (int t = 0; t < seq.frames; ++t) {
    int present = 0;
    for (int m = 0; m < seq.bodies; ++m)
      if (seq.body_present(t, m)) ++present;
    out << present << "\n";
    for (int m = 0; m < seq.bodies; ++m) {
      if (!seq.body_present(t, m)) continue;
      out << (m + 1) << " 0 0 0 0 0 0 0 0 2\n";
      out << seq.joints << "\n";
      for (int v = 0; v < seq.joints; ++v) {
        std::string line;
        for (int c = 0; c < 3; ++c) {
          std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(static_cast<float>(seq.at(c, t, v, m))));
          line += buf;
          line += ' ';
        }
        out << line << "0 0 0 0 0 0 0 0 2\n";
      }
    }
  }
  if (!out) fail(ErrorCode::io, "write failed: " + path);
}

void write_corpus(const std::vector<SyntheticSample>& samples, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create directory " + dir);
  for (const auto& sample : samples)
    write_skeleton_file((fs::path(dir) / (sample.id + ".skeleton")).string(), sample.seq);
}

real max_frame_displacement(const SkeletonSequence& seq) {
  real best = 0;
  for (int t = 1; t < seq.frames; ++t)
    for (int v = 0; v < seq.joints; ++v) {
      real sq = 0;
      for (int c = 0; c < 3; ++c) {
        const real d = seq.at(c, t, v, 0) - seq.at(c, t - 1, v, 0);
        sq += d * d;
      }
      best = std::max(best, std::sqrt(sq));
    }
  return best;
}

}  // namespace skelfall
