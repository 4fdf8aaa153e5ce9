#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "skelfall/error.hpp"

namespace skelfall {

#ifdef SKELFALL_REAL32
using real = float;
#else
using real = double;
#endif

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// One node of the dynamic computation graph. Owned via shared_ptr by the
/// Tensor value wrapper and by downstream nodes that need it for backward.
struct TensorImpl {
  Shape shape;
  std::vector<real> data;
  std::vector<real> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backward_fn;

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), real(0));
  }
};

/// Dense n-dimensional array with reverse-mode differentiation. Plain value
/// semantics over a shared node; copying a Tensor copies the handle.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor ones(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, real value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<real> data,
                          bool requires_grad = false);
  static Tensor scalar(real value);
  /// Fan-in-scaled uniform init in [-bound, bound].
  static Tensor uniform(Shape shape, real bound, std::mt19937_64& rng,
                        bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int64_t dim(size_t i) const { return impl_->shape[i]; }
  size_t ndim() const { return impl_->shape.size(); }
  int64_t numel() const { return impl_->numel(); }

  std::vector<real>& data() { return impl_->data; }
  const std::vector<real>& data() const { return impl_->data; }
  std::vector<real>& grad() {
    impl_->ensure_grad();
    return impl_->grad;
  }
  bool has_grad() const { return !impl_->grad.empty(); }
  void zero_grad() {
    if (!impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), real(0));
  }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool v) { impl_->requires_grad = v; }

  real item() const;

  /// Reverse pass from a scalar. Accumulates into grad fields of every
  /// reachable node that requires grad; never mutates data.
  void backward() const;

  /// Drops graph edges so this tensor behaves as a leaf.
  Tensor detach() const;

  std::shared_ptr<TensorImpl>& impl() { return impl_; }
  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// Thread-local switch: when grad mode is off, ops do not record the graph.
bool grad_mode_enabled();
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  bool prev;
};

// ---- ops ------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose2d(const Tensor& a);

/// Elementwise sum. b may also be a trailing-suffix shape of a, in which case
/// it is broadcast over a's leading extents.
Tensor add(const Tensor& a, const Tensor& b);
/// Elementwise product, same shapes only.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& x);
/// x: N x C x ... ; bias: C, added per channel.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);
Tensor reshape(const Tensor& x, Shape new_shape);

struct Conv2dOpts {
  int64_t stride_t = 1;
  int64_t pad_t = 0;
  int64_t pad_v = 0;
};
/// Cross-correlation over the (time, joint) plane.
/// x: N x C x T x V, w: C' x C x kt x kv -> N x C' x T' x V'.
Tensor conv2d(const Tensor& x, const Tensor& w, const Conv2dOpts& opts);

/// Per-channel batch norm state for N x C x T x V inputs.
struct BatchNorm {
  Tensor gamma;  // learnable scale
  Tensor beta;   // learnable shift
  std::vector<real> running_mean;
  std::vector<real> running_var;
  real eps = real(1e-5);
  real momentum = real(0.1);

  static BatchNorm make(int64_t channels);
  int64_t channels() const { return gamma.numel(); }
};
/// Train mode normalizes with batch statistics over (N, T, V) and updates the
/// running estimates in `state`; eval mode uses the running estimates.
Tensor batch_norm(const Tensor& x, BatchNorm& state, bool training);

/// x: N x C x T x V -> N x C, mean over T and V.
Tensor global_avg_pool(const Tensor& x);
/// x: (N*M) x C -> N x C, mean over groups of M consecutive rows.
Tensor group_mean(const Tensor& x, int64_t group);
/// x: N x C, w: C x K, b: K -> N x K.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
/// Mean over the batch of -log softmax(logits)[label]; max-stabilized.
Tensor softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels);
/// Row-wise softmax probabilities (no graph; evaluation helper).
std::vector<real> softmax_rows(const Tensor& logits);

/// A named trainable tensor. Names are path-like and unique per network;
/// momentum buffers live with the optimizer, keyed by name.
struct Parameter {
  std::string name;
  Tensor tensor;
};

namespace detail {
/// Worker cap from SKELFALL_THREADS (default: hardware concurrency, max 8).
int max_threads();
/// Deterministic chunked parallel loop; fn(begin, end) over disjoint ranges.
void parallel_for(int64_t n, int64_t grain,
                  const std::function<void(int64_t, int64_t)>& fn);
/// Row-major C[m x n] = A[m x k] * B[k x n]; accumulate adds into C.
void mm(int64_t m, int64_t n, int64_t k, const real* a, const real* b, real* c,
        bool accumulate);
bool all_finite(const std::vector<real>& v);
}  // namespace detail

}  // namespace skelfall
