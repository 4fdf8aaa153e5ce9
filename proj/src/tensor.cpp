#include "skelfall/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>
#include <unordered_set>

namespace skelfall {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  for (int64_t d : shape) {
    if (d <= 0) fail(ErrorCode::dimension, "non-positive extent in shape " + shape_str(shape));
  }
}

thread_local bool g_grad_enabled = true;

std::shared_ptr<TensorImpl> make_impl(Shape shape, std::vector<real> data,
                                      bool requires_grad) {
  check_shape(shape);
  if (shape_numel(shape) != static_cast<int64_t>(data.size()))
    fail(ErrorCode::dimension, "data size does not match shape " + shape_str(shape));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return impl;
}

// Records the graph edge only when gradients can flow.
Tensor make_result(Shape shape, std::vector<real> data,
                   std::vector<Tensor> inputs,
                   std::function<void(TensorImpl&)> backward) {
  auto impl = make_impl(std::move(shape), std::move(data), false);
  if (grad_mode_enabled()) {
    bool track = false;
    for (const auto& t : inputs) track = track || t.requires_grad();
    if (track) {
      impl->requires_grad = true;
      for (auto& t : inputs) impl->parents.push_back(t.impl());
      impl->backward_fn = std::move(backward);
    }
  }
  return Tensor(std::move(impl));
}

}  // namespace

bool grad_mode_enabled() { return g_grad_enabled; }
NoGradGuard::NoGradGuard() : prev(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), real(0), requires_grad);
}

Tensor Tensor::ones(Shape shape, bool requires_grad) {
  return full(std::move(shape), real(1), requires_grad);
}

Tensor Tensor::full(Shape shape, real value, bool requires_grad) {
  check_shape(shape);
  std::vector<real> data(static_cast<size_t>(shape_numel(shape)), value);
  return Tensor(make_impl(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<real> data,
                         bool requires_grad) {
  return Tensor(make_impl(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(real value) {
  return Tensor(make_impl({1}, {value}, false));
}

Tensor Tensor::uniform(Shape shape, real bound, std::mt19937_64& rng,
                       bool requires_grad) {
  check_shape(shape);
  std::vector<real> data(static_cast<size_t>(shape_numel(shape)));
  // Explicit mapping from raw 64-bit draws keeps init identical across
  // standard library implementations.
  for (auto& v : data) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0,1)
    v = static_cast<real>((2.0 * u - 1.0) * static_cast<double>(bound));
  }
  return Tensor(make_impl(std::move(shape), std::move(data), requires_grad));
}

real Tensor::item() const {
  if (numel() != 1) fail(ErrorCode::invalid_argument, "item() on non-scalar tensor " + shape_str(shape()));
  return impl_->data[0];
}

Tensor Tensor::detach() const {
  auto impl = make_impl(impl_->shape, impl_->data, false);
  return Tensor(std::move(impl));
}

void Tensor::backward() const {
  if (numel() != 1) fail(ErrorCode::invalid_argument, "backward() requires a scalar root");
  // Iterative post-order topological sort over parent links.
  std::vector<TensorImpl*> topo;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<TensorImpl*, size_t>> stack;
  stack.push_back({impl_.get(), 0});
  visited.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorImpl* p = node->parents[next++].get();
      if (!visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }
  impl_->ensure_grad();
  impl_->grad[0] += real(1);
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

namespace detail {

int max_threads() {
  static const int cached = [] {
    if (const char* env = std::getenv("SKELFALL_THREADS")) {
      int v = std::atoi(env);
      if (v >= 1) return v;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return static_cast<int>(std::clamp(hc, 1u, 8u));
  }();
  return cached;
}

void parallel_for(int64_t n, int64_t grain,
                  const std::function<void(int64_t, int64_t)>& fn) {
  const int threads = max_threads();
  if (threads <= 1 || n < 2 * grain) {
    fn(0, n);
    return;
  }
  const int64_t chunks = std::min<int64_t>(threads, (n + grain - 1) / grain);
  const int64_t per = (n + chunks - 1) / chunks;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(chunks));
  for (int64_t c = 0; c < chunks; ++c) {
    const int64_t b = c * per;
    const int64_t e = std::min(n, b + per);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& t : pool) t.join();
}

void mm(int64_t m, int64_t n, int64_t k, const real* a, const real* b, real* c,
        bool accumulate) {
  parallel_for(m, 16, [&](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i) {
      real* crow = c + i * n;
      if (!accumulate) std::fill(crow, crow + n, real(0));
      const real* arow = a + i * k;
      for (int64_t l = 0; l < k; ++l) {
        const real av = arow[l];
        if (av == real(0)) continue;
        const real* brow = b + l * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  });
}

bool all_finite(const std::vector<real>& v) {
  for (real x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace detail

// ---- matmul / transpose ----------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    fail(ErrorCode::dimension,
         "matmul shape mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<real> out(static_cast<size_t>(m * n));
  detail::mm(m, n, k, a.data().data(), b.data().data(), out.data(), false);
  Tensor ta = a, tb = b;
  return make_result({m, n}, std::move(out), {a, b}, [ta, tb, m, k, n](TensorImpl& self) {
    // dA = g * B^T, dB = A^T * g
    if (ta.impl()->requires_grad) {
      ta.impl()->ensure_grad();
      const real* g = self.grad.data();
      const real* bd = tb.impl()->data.data();
      real* da = ta.impl()->grad.data();
      detail::parallel_for(m, 16, [&](int64_t i0, int64_t i1) {
        for (int64_t i = i0; i < i1; ++i)
          for (int64_t l = 0; l < k; ++l) {
            real s = 0;
            const real* grow = g + i * n;
            const real* brow = bd + l * n;
            for (int64_t j = 0; j < n; ++j) s += grow[j] * brow[j];
            da[i * k + l] += s;
          }
      });
    }
    if (tb.impl()->requires_grad) {
      tb.impl()->ensure_grad();
      const real* g = self.grad.data();
      const real* ad = ta.impl()->data.data();
      real* db = tb.impl()->grad.data();
      detail::parallel_for(k, 16, [&](int64_t l0, int64_t l1) {
        for (int64_t l = l0; l < l1; ++l) {
          real* dbrow = db + l * n;
          for (int64_t i = 0; i < m; ++i) {
            const real av = ad[i * k + l];
            if (av == real(0)) continue;
            const real* grow = g + i * n;
            for (int64_t j = 0; j < n; ++j) dbrow[j] += av * grow[j];
          }
        }
      });
    }
  });
}

Tensor transpose2d(const Tensor& a) {
  if (a.ndim() != 2) fail(ErrorCode::dimension, "transpose2d needs a 2-d tensor, got " + shape_str(a.shape()));
  const int64_t m = a.dim(0), n = a.dim(1);
  std::vector<real> out(static_cast<size_t>(m * n));
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out[j * m + i] = a.data()[i * n + j];
  Tensor ta = a;
  return make_result({n, m}, std::move(out), {a}, [ta, m, n](TensorImpl& self) {
    if (!ta.impl()->requires_grad) return;
    ta.impl()->ensure_grad();
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j)
        ta.impl()->grad[i * n + j] += self.grad[j * m + i];
  });
}

// ---- elementwise -----------------------------------------------------------

namespace {
bool is_trailing_suffix(const Shape& big, const Shape& small) {
  if (small.size() > big.size()) return false;
  const size_t off = big.size() - small.size();
  for (size_t i = 0; i < small.size(); ++i)
    if (big[off + i] != small[i]) return false;
  return true;
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() && !is_trailing_suffix(a.shape(), b.shape()))
    fail(ErrorCode::dimension,
         "add broadcast mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const int64_t na = a.numel(), nb = b.numel();
  std::vector<real> out(static_cast<size_t>(na));
  const real* ad = a.data().data();
  const real* bd = b.data().data();
  for (int64_t i = 0; i < na; ++i) out[i] = ad[i] + bd[i % nb];
  Tensor ta = a, tb = b;
  return make_result(a.shape(), std::move(out), {a, b}, [ta, tb, na, nb](TensorImpl& self) {
    if (ta.impl()->requires_grad) {
      ta.impl()->ensure_grad();
      for (int64_t i = 0; i < na; ++i) ta.impl()->grad[i] += self.grad[i];
    }
    if (tb.impl()->requires_grad) {
      tb.impl()->ensure_grad();
      for (int64_t i = 0; i < na; ++i) tb.impl()->grad[i % nb] += self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    fail(ErrorCode::dimension,
         "mul shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const int64_t n = a.numel();
  std::vector<real> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[i] = a.data()[i] * b.data()[i];
  Tensor ta = a, tb = b;
  return make_result(a.shape(), std::move(out), {a, b}, [ta, tb, n](TensorImpl& self) {
    if (ta.impl()->requires_grad) {
      ta.impl()->ensure_grad();
      for (int64_t i = 0; i < n; ++i)
        ta.impl()->grad[i] += self.grad[i] * tb.impl()->data[i];
    }
    if (tb.impl()->requires_grad) {
      tb.impl()->ensure_grad();
      for (int64_t i = 0; i < n; ++i)
        tb.impl()->grad[i] += self.grad[i] * ta.impl()->data[i];
    }
  });
}

Tensor relu(const Tensor& x) {
  const int64_t n = x.numel();
  std::vector<real> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[i] = x.data()[i] > real(0) ? x.data()[i] : real(0);
  Tensor tx = x;
  return make_result(x.shape(), std::move(out), {x}, [tx, n](TensorImpl& self) {
    if (!tx.impl()->requires_grad) return;
    tx.impl()->ensure_grad();
    // Subgradient at exactly 0 is 0.
    for (int64_t i = 0; i < n; ++i)
      if (tx.impl()->data[i] > real(0)) tx.impl()->grad[i] += self.grad[i];
  });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  if (x.ndim() < 2 || bias.ndim() != 1 || x.dim(1) != bias.dim(0))
    fail(ErrorCode::dimension,
         "channel bias mismatch: " + shape_str(x.shape()) + " vs " + shape_str(bias.shape()));
  const int64_t n0 = x.dim(0), c = x.dim(1);
  const int64_t inner = x.numel() / (n0 * c);
  std::vector<real> out(x.data());
  for (int64_t i = 0; i < n0; ++i)
    for (int64_t ch = 0; ch < c; ++ch) {
      const real bv = bias.data()[ch];
      real* row = out.data() + (i * c + ch) * inner;
      for (int64_t j = 0; j < inner; ++j) row[j] += bv;
    }
  Tensor tx = x, tb = bias;
  return make_result(x.shape(), std::move(out), {x, bias},
                     [tx, tb, n0, c, inner](TensorImpl& self) {
    if (tx.impl()->requires_grad) {
      tx.impl()->ensure_grad();
      const int64_t n = tx.impl()->numel();
      for (int64_t i = 0; i < n; ++i) tx.impl()->grad[i] += self.grad[i];
    }
    if (tb.impl()->requires_grad) {
      tb.impl()->ensure_grad();
      for (int64_t i = 0; i < n0; ++i)
        for (int64_t ch = 0; ch < c; ++ch) {
          real s = 0;
          const real* row = self.grad.data() + (i * c + ch) * inner;
          for (int64_t j = 0; j < inner; ++j) s += row[j];
          tb.impl()->grad[ch] += s;
        }
    }
  });
}

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.numel())
    fail(ErrorCode::dimension,
         "reshape " + shape_str(x.shape()) + " -> " + shape_str(new_shape) + " changes element count");
  std::vector<real> out(x.data());
  Tensor tx = x;
  return make_result(std::move(new_shape), std::move(out), {x}, [tx](TensorImpl& self) {
    if (!tx.impl()->requires_grad) return;
    tx.impl()->ensure_grad();
    const int64_t n = tx.impl()->numel();
    for (int64_t i = 0; i < n; ++i) tx.impl()->grad[i] += self.grad[i];
  });
}

// ---- batch norm -------------------------------------------------------------

BatchNorm BatchNorm::make(int64_t channels) {
  BatchNorm bn;
  bn.gamma = Tensor::ones({channels}, true);
  bn.beta = Tensor::zeros({channels}, true);
  bn.running_mean.assign(static_cast<size_t>(channels), real(0));
  bn.running_var.assign(static_cast<size_t>(channels), real(1));
  return bn;
}

Tensor batch_norm(const Tensor& x, BatchNorm& state, bool training) {
  if (x.ndim() != 4 || x.dim(1) != state.channels())
    fail(ErrorCode::dimension, "batch_norm expects N x C x T x V with C == " +
                                   std::to_string(state.channels()) + ", got " + shape_str(x.shape()));
  const int64_t n = x.dim(0), c = x.dim(1), t = x.dim(2), v = x.dim(3);
  const int64_t inner = t * v;
  const int64_t count = n * inner;  // reduction size per channel

  std::vector<real> mean(static_cast<size_t>(c)), var(static_cast<size_t>(c));
  if (training) {
    for (int64_t ch = 0; ch < c; ++ch) {
      real s = 0;
      for (int64_t i = 0; i < n; ++i) {
        const real* row = x.data().data() + (i * c + ch) * inner;
        for (int64_t j = 0; j < inner; ++j) s += row[j];
      }
      mean[ch] = s / static_cast<real>(count);
      real sq = 0;
      for (int64_t i = 0; i < n; ++i) {
        const real* row = x.data().data() + (i * c + ch) * inner;
        for (int64_t j = 0; j < inner; ++j) {
          const real d = row[j] - mean[ch];
          sq += d * d;
        }
      }
      var[ch] = sq / static_cast<real>(count);
      state.running_mean[ch] =
          (real(1) - state.momentum) * state.running_mean[ch] + state.momentum * mean[ch];
      state.running_var[ch] =
          (real(1) - state.momentum) * state.running_var[ch] + state.momentum * var[ch];
    }
  } else {
    for (int64_t ch = 0; ch < c; ++ch) {
      mean[ch] = state.running_mean[ch];
      var[ch] = state.running_var[ch];
    }
  }

  std::vector<real> invstd(static_cast<size_t>(c));
  for (int64_t ch = 0; ch < c; ++ch)
    invstd[ch] = real(1) / std::sqrt(var[ch] + state.eps);

  auto xhat = std::make_shared<std::vector<real>>(static_cast<size_t>(x.numel()));
  std::vector<real> out(static_cast<size_t>(x.numel()));
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch) {
      const real* row = x.data().data() + (i * c + ch) * inner;
      real* hrow = xhat->data() + (i * c + ch) * inner;
      real* orow = out.data() + (i * c + ch) * inner;
      const real g = state.gamma.data()[ch], b = state.beta.data()[ch];
      const real mu = mean[ch], is = invstd[ch];
      for (int64_t j = 0; j < inner; ++j) {
        hrow[j] = (row[j] - mu) * is;
        orow[j] = g * hrow[j] + b;
      }
    }

  Tensor tx = x, tg = state.gamma, tb = state.beta;
  return make_result(
      x.shape(), std::move(out), {x, state.gamma, state.beta},
      [tx, tg, tb, xhat, invstd, training, n, c, inner, count](TensorImpl& self) {
        // dgamma = sum g*xhat, dbeta = sum g per channel.
        std::vector<real> sum_g(static_cast<size_t>(c), 0),
            sum_gx(static_cast<size_t>(c), 0);
        for (int64_t i = 0; i < n; ++i)
          for (int64_t ch = 0; ch < c; ++ch) {
            const real* grow = self.grad.data() + (i * c + ch) * inner;
            const real* hrow = xhat->data() + (i * c + ch) * inner;
            for (int64_t j = 0; j < inner; ++j) {
              sum_g[ch] += grow[j];
              sum_gx[ch] += grow[j] * hrow[j];
            }
          }
        if (tg.impl()->requires_grad) {
          tg.impl()->ensure_grad();
          for (int64_t ch = 0; ch < c; ++ch) tg.impl()->grad[ch] += sum_gx[ch];
        }
        if (tb.impl()->requires_grad) {
          tb.impl()->ensure_grad();
          for (int64_t ch = 0; ch < c; ++ch) tb.impl()->grad[ch] += sum_g[ch];
        }
        if (tx.impl()->requires_grad) {
          tx.impl()->ensure_grad();
          for (int64_t i = 0; i < n; ++i)
            for (int64_t ch = 0; ch < c; ++ch) {
              const real* grow = self.grad.data() + (i * c + ch) * inner;
              const real* hrow = xhat->data() + (i * c + ch) * inner;
              real* dxrow = tx.impl()->grad.data() + (i * c + ch) * inner;
              const real gis = tg.impl()->data[ch] * invstd[ch];
              if (training) {
                const real mg = sum_g[ch] / static_cast<real>(count);
                const real mgx = sum_gx[ch] / static_cast<real>(count);
                for (int64_t j = 0; j < inner; ++j)
                  dxrow[j] += gis * (grow[j] - mg - hrow[j] * mgx);
              } else {
                for (int64_t j = 0; j < inner; ++j) dxrow[j] += gis * grow[j];
              }
            }
        }
      });
}

// ---- reductions / head ------------------------------------------------------

Tensor global_avg_pool(const Tensor& x) {
  if (x.ndim() != 4) fail(ErrorCode::dimension, "global_avg_pool expects N x C x T x V, got " + shape_str(x.shape()));
  const int64_t n = x.dim(0), c = x.dim(1), inner = x.dim(2) * x.dim(3);
  std::vector<real> out(static_cast<size_t>(n * c));
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ch = 0; ch < c; ++ch) {
      real s = 0;
      const real* row = x.data().data() + (i * c + ch) * inner;
      for (int64_t j = 0; j < inner; ++j) s += row[j];
      out[i * c + ch] = s / static_cast<real>(inner);
    }
  Tensor tx = x;
  return make_result({n, c}, std::move(out), {x}, [tx, n, c, inner](TensorImpl& self) {
    if (!tx.impl()->requires_grad) return;
    tx.impl()->ensure_grad();
    for (int64_t i = 0; i < n; ++i)
      for (int64_t ch = 0; ch < c; ++ch) {
        const real g = self.grad[i * c + ch] / static_cast<real>(inner);
        real* dxrow = tx.impl()->grad.data() + (i * c + ch) * inner;
        for (int64_t j = 0; j < inner; ++j) dxrow[j] += g;
      }
  });
}

Tensor group_mean(const Tensor& x, int64_t group) {
  if (x.ndim() != 2 || group < 1 || x.dim(0) % group != 0)
    fail(ErrorCode::dimension, "group_mean: rows of " + shape_str(x.shape()) +
                                   " not divisible by group " + std::to_string(group));
  const int64_t n = x.dim(0) / group, c = x.dim(1);
  std::vector<real> out(static_cast<size_t>(n * c), real(0));
  for (int64_t i = 0; i < n; ++i)
    for (int64_t m = 0; m < group; ++m)
      for (int64_t ch = 0; ch < c; ++ch)
        out[i * c + ch] += x.data()[(i * group + m) * c + ch] / static_cast<real>(group);
  Tensor tx = x;
  return make_result({n, c}, std::move(out), {x}, [tx, n, c, group](TensorImpl& self) {
    if (!tx.impl()->requires_grad) return;
    tx.impl()->ensure_grad();
    for (int64_t i = 0; i < n; ++i)
      for (int64_t m = 0; m < group; ++m)
        for (int64_t ch = 0; ch < c; ++ch)
          tx.impl()->grad[(i * group + m) * c + ch] +=
              self.grad[i * c + ch] / static_cast<real>(group);
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.ndim() != 2 || w.ndim() != 2 || b.ndim() != 1 || x.dim(1) != w.dim(0) ||
      w.dim(1) != b.dim(0))
    fail(ErrorCode::dimension, "linear shape mismatch: " + shape_str(x.shape()) + " x " +
                                   shape_str(w.shape()) + " + " + shape_str(b.shape()));
  const int64_t n = x.dim(0), c = x.dim(1), k = w.dim(1);
  std::vector<real> out(static_cast<size_t>(n * k));
  detail::mm(n, k, c, x.data().data(), w.data().data(), out.data(), false);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < k; ++j) out[i * k + j] += b.data()[j];
  Tensor tx = x, tw = w, tb = b;
  return make_result({n, k}, std::move(out), {x, w, b}, [tx, tw, tb, n, c, k](TensorImpl& self) {
    const real* g = self.grad.data();
    if (tx.impl()->requires_grad) {
      tx.impl()->ensure_grad();
      for (int64_t i = 0; i < n; ++i)
        for (int64_t l = 0; l < c; ++l) {
          real s = 0;
          for (int64_t j = 0; j < k; ++j) s += g[i * k + j] * tw.impl()->data[l * k + j];
          tx.impl()->grad[i * c + l] += s;
        }
    }
    if (tw.impl()->requires_grad) {
      tw.impl()->ensure_grad();
      for (int64_t l = 0; l < c; ++l)
        for (int64_t i = 0; i < n; ++i) {
          const real xv = tx.impl()->data[i * c + l];
          if (xv == real(0)) continue;
          for (int64_t j = 0; j < k; ++j) tw.impl()->grad[l * k + j] += xv * g[i * k + j];
        }
    }
    if (tb.impl()->requires_grad) {
      tb.impl()->ensure_grad();
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < k; ++j) tb.impl()->grad[j] += g[i * k + j];
    }
  });
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.ndim() != 2 || static_cast<int64_t>(labels.size()) != logits.dim(0))
    fail(ErrorCode::dimension, "softmax_cross_entropy: logits " + shape_str(logits.shape()) +
                                   " vs " + std::to_string(labels.size()) + " labels");
  const int64_t n = logits.dim(0), k = logits.dim(1);
  for (int lab : labels)
    if (lab < 0 || lab >= k)
      fail(ErrorCode::label, "label " + std::to_string(lab) + " outside [0, " + std::to_string(k) + ")");
  auto probs = std::make_shared<std::vector<real>>(static_cast<size_t>(n * k));
  real loss = 0;
  for (int64_t i = 0; i < n; ++i) {
    const real* row = logits.data().data() + i * k;
    real mx = row[0];
    for (int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    real denom = 0;
    for (int64_t j = 0; j < k; ++j) denom += std::exp(row[j] - mx);
    const real logz = mx + std::log(denom);
    for (int64_t j = 0; j < k; ++j) (*probs)[i * k + j] = std::exp(row[j] - logz);
    loss -= (row[labels[static_cast<size_t>(i)]] - logz);
  }
  loss /= static_cast<real>(n);
  Tensor tl = logits;
  auto labs = labels;
  return make_result({1}, {loss}, {logits}, [tl, probs, labs, n, k](TensorImpl& self) {
    if (!tl.impl()->requires_grad) return;
    tl.impl()->ensure_grad();
    const real g = self.grad[0] / static_cast<real>(n);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < k; ++j) {
        const real onehot = (j == labs[static_cast<size_t>(i)]) ? real(1) : real(0);
        tl.impl()->grad[i * k + j] += g * ((*probs)[i * k + j] - onehot);
      }
  });
}

std::vector<real> softmax_rows(const Tensor& logits) {
  if (logits.ndim() != 2) fail(ErrorCode::dimension, "softmax_rows expects 2-d logits");
  const int64_t n = logits.dim(0), k = logits.dim(1);
  std::vector<real> out(static_cast<size_t>(n * k));
  for (int64_t i = 0; i < n; ++i) {
    const real* row = logits.data().data() + i * k;
    real mx = row[0];
    for (int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    real denom = 0;
    for (int64_t j = 0; j < k; ++j) denom += std::exp(row[j] - mx);
    for (int64_t j = 0; j < k; ++j) out[i * k + j] = std::exp(row[j] - mx) / denom;
  }
  return out;
}

}  // namespace skelfall
