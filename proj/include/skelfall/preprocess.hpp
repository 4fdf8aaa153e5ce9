#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "skelfall/tensor.hpp"

namespace skelfall {

/// Dense joint-coordinate recording: C x T x V x M (channels, frames, joints,
/// bodies), meters. Absent bodies are exactly zero and frames with no body are
/// flagged invalid.
struct SkeletonSequence {
  int channels = 3;
  int frames = 0;
  int joints = 0;
  int bodies = 0;
  std::vector<real> data;
  std::vector<uint8_t> valid_frames;

  static SkeletonSequence zeros(int c, int t, int v, int m);

  int64_t index(int c, int t, int v, int m) const {
    return ((static_cast<int64_t>(c) * frames + t) * joints + v) * bodies + m;
  }
  real& at(int c, int t, int v, int m) { return data[index(c, t, v, m)]; }
  real at(int c, int t, int v, int m) const { return data[index(c, t, v, m)]; }

  bool body_present(int t, int m) const;
  bool frame_empty(int t) const;
  void refresh_valid_frames();
};

/// Joint indices consumed by the view-invariant transform (NTU defaults).
struct ReferenceJoints {
  int spine = 1;
  int hip = 0;
  int shoulder_left = 4;
  int shoulder_right = 8;
};

struct PreprocessConfig {
  int max_frames = 300;
  int window = 250;
  ReferenceJoints ref;
};

/// Per-channel normalization statistics, computed on the training split only.
struct NormStats {
  std::array<real, 3> mean{0, 0, 0};
  std::array<real, 3> stddev{1, 1, 1};
};

/// Model-ready sample: windowed normalized joints plus the velocity stream.
struct ModelInput {
  SkeletonSequence joints;
  SkeletonSequence velocity;
  int label = 0;
};

/// Removes frames with no skeleton in any body; order preserved.
SkeletonSequence discard_empty_frames(const SkeletonSequence& seq);

/// Tiles the sequence until max_frames, truncating past it.
SkeletonSequence replay_to_length(const SkeletonSequence& seq, int max_frames);

/// One rigid transform from the first valid frame of body 0: spine to origin,
/// shoulder bone to +x, hip-to-spine bone to +z (orthogonalized). Falls back
/// to translation only on degenerate reference bones, setting the flag.
SkeletonSequence view_invariant_transform(const SkeletonSequence& seq,
                                          const ReferenceJoints& ref,
                                          bool* translation_only = nullptr);

/// Contiguous slice [start, start + window).
SkeletonSequence window_at(const SkeletonSequence& seq, int start, int window);
/// Uniform start in [0, T - window]; deterministic under a fixed rng.
int draw_window_start(int frames, int window, std::mt19937_64& rng);

NormStats compute_norm_stats(const std::vector<SkeletonSequence>& train_seqs);
/// (x - mean_c) / std_c per channel on present-body entries; padding stays 0.
SkeletonSequence normalize_joints(const SkeletonSequence& seq, const NormStats& stats);

/// Frame difference with an all-zero first frame.
SkeletonSequence compute_velocity(const SkeletonSequence& joints);

/// discard -> view-invariant transform -> replay; the deterministic prefix of
/// the pipeline, shared between stats computation and sample finalization.
SkeletonSequence prepare_sequence(const SkeletonSequence& seq, const PreprocessConfig& cfg,
                                  bool* translation_only = nullptr);

/// window -> normalize -> velocity on a prepared sequence.
ModelInput finalize_sample(const SkeletonSequence& prepared, const NormStats& stats,
                           int label, int window_start, int window);

/// Packs samples into N*M x C x T x V tensors, bodies folded into the batch
/// axis, zero-padded or truncated to `bodies` slots per sample.
std::pair<Tensor, Tensor> to_model_tensors(const std::vector<ModelInput>& batch, int bodies);

/// Deterministic per-sample stream: mixes (seed, sample, epoch) so parallel
/// workers draw identical windows regardless of scheduling.
std::mt19937_64 sample_rng(uint64_t seed, uint64_t sample_index, uint64_t epoch);

}  // namespace skelfall
