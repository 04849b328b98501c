#pragma once

// Dense f64 tensor with reverse-mode autodiff on a per-forward-pass tape.
// The operator set is closed: exactly what the segmentation model needs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace aost {

// Exact multiply-accumulate accounting, used as timing-independent cost
// evidence by the benchmark harness.
struct OpCounter {
  unsigned long long macs = 0;
  unsigned long long slstt_forwards = 0;
  void reset() { macs = 0; slstt_forwards = 0; }
};

inline OpCounter& op_counter() {
  thread_local OpCounter c;
  return c;
}

inline void count_macs(unsigned long long n) { op_counter().macs += n; }

namespace detail {

inline std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

inline size_t shape_numel(const std::vector<int>& s) {
  size_t n = 1;
  for (int e : s) {
    if (e < 0) throw std::invalid_argument("negative extent in shape " + shape_str(s));
    n *= static_cast<size_t>(e);
  }
  return n;
}

}  // namespace detail

struct TensorNode {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool on_tape = false;
};

class Tensor {
 public:
  Tensor() : n_(std::make_shared<TensorNode>()) {}

  explicit Tensor(std::vector<int> shape, double fill = 0.0)
      : n_(std::make_shared<TensorNode>()) {
    n_->shape = std::move(shape);
    n_->data.assign(detail::shape_numel(n_->shape), fill);
  }

  static Tensor from(std::vector<int> shape, std::vector<double> values) {
    Tensor t;
    t.n_->shape = std::move(shape);
    if (values.size() != detail::shape_numel(t.n_->shape))
      throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                  " does not fill shape " + detail::shape_str(t.n_->shape));
    t.n_->data = std::move(values);
    return t;
  }

  static Tensor scalar(double v) { return from({}, {v}); }

  const std::vector<int>& shape() const { return n_->shape; }
  int dim(size_t i) const { return n_->shape.at(i); }
  int ndim() const { return static_cast<int>(n_->shape.size()); }
  size_t size() const { return n_->data.size(); }

  // Tensor is a handle; constness is shallow and accessors reach the shared
  // node so backward closures can accumulate through by-value captures.
  std::vector<double>& data() const { return n_->data; }
  double& operator[](size_t i) const { return n_->data[i]; }

  double value() const {
    if (n_->data.size() != 1)
      throw std::logic_error("value() on non-scalar tensor " + detail::shape_str(n_->shape));
    return n_->data[0];
  }

  bool requires_grad() const { return n_->requires_grad; }
  const Tensor& set_requires_grad(bool b) const {
    n_->requires_grad = b;
    return *this;
  }

  bool tracked() const { return n_->requires_grad || n_->on_tape; }

  bool has_grad() const { return !n_->grad.empty(); }
  std::vector<double>& grad() const {
    if (n_->grad.empty()) n_->grad.assign(n_->data.size(), 0.0);
    return n_->grad;
  }
  void zero_grad() const { n_->grad.clear(); }

  std::shared_ptr<TensorNode> node() const { return n_; }

  bool same_shape(const Tensor& o) const { return n_->shape == o.n_->shape; }

 private:
  std::shared_ptr<TensorNode> n_;
};

// Records backward closures in forward order; backward() replays them in
// reverse exactly once. One tape per forward pass, confined to one worker.
class Tape {
 public:
  Tape() : prev_(slot()) { slot() = this; }
  ~Tape() { slot() = prev_; }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() { return slot(); }

  void record(std::function<void()> fn) { ops_.push_back(std::move(fn)); }

  size_t size() const { return ops_.size(); }

  void backward(Tensor loss) {
    if (loss.size() != 1)
      throw std::invalid_argument("backward() needs a scalar loss, got " +
                                  detail::shape_str(loss.shape()));
    if (!loss.tracked())
      throw std::invalid_argument("backward() on a loss that is not tape-connected");
    loss.grad()[0] += 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    ops_.clear();
  }

 private:
  static Tape*& slot() {
    thread_local Tape* t = nullptr;
    return t;
  }
  std::vector<std::function<void()>> ops_;
  Tape* prev_;
};

namespace detail {

inline bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::active()) return false;
  for (const Tensor* t : inputs)
    if (t->tracked()) return true;
  return false;
}

inline void record(Tensor& out, std::function<void()> fn) {
  out.node()->on_tape = true;
  Tape::active()->record(std::move(fn));
}

// Adds out.grad (if any) into dst.grad through `fn(out_grad, dst_grad)`.
inline void accumulate(const Tensor& dst, const std::vector<double>& contribution) {
  auto& g = dst.grad();
  for (size_t i = 0; i < g.size(); ++i) g[i] += contribution[i];
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "add");
  Tensor out(a.shape());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  if (detail::should_record({&a, &b})) {
    detail::record(out, [a, b, out]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      if (a.tracked()) detail::accumulate(a, g);
      if (b.tracked()) detail::accumulate(b, g);
    });
  }
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "sub");
  Tensor out(a.shape());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  if (detail::should_record({&a, &b})) {
    detail::record(out, [a, b, out]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      if (a.tracked()) detail::accumulate(a, g);
      if (b.tracked()) {
        auto& gb = b.grad();
        for (size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "mul");
  Tensor out(a.shape());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  count_macs(a.size());
  if (detail::should_record({&a, &b})) {
    detail::record(out, [a, b, out]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      if (a.tracked()) {
        auto& ga = a.grad();
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * b[i];
      }
      if (b.tracked()) {
        auto& gb = b.grad();
        for (size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * a[i];
      }
    });
  }
  return out;
}

inline Tensor div_elem(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "div_elem");
  Tensor out(a.shape());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] / b[i];
  count_macs(a.size());
  if (detail::should_record({&a, &b})) {
    detail::record(out, [a, b, out]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      if (a.tracked()) {
        auto& ga = a.grad();
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] / b[i];
      }
      if (b.tracked()) {
        auto& gb = b.grad();
        for (size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i] * a[i] / (b[i] * b[i]);
      }
    });
  }
  return out;
}

inline Tensor scale(const Tensor& a, double s) {
  Tensor out(a.shape());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  count_macs(a.size());
  if (detail::should_record({&a})) {
    detail::record(out, [a, out, s]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      auto& ga = a.grad();
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * s;
    });
  }
  return out;
}

inline Tensor add_scalar(const Tensor& a, double s) {
  Tensor out(a.shape());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] + s;
  if (detail::should_record({&a})) {
    detail::record(out, [a, out]() mutable {
      if (!out.has_grad()) return;
      detail::accumulate(a, out.grad());
    });
  }
  return out;
}

inline Tensor tanh_op(const Tensor& a) {
  Tensor out(a.shape());
  for (size_t i = 0; i < a.size(); ++i) out[i] = std::tanh(a[i]);
  if (detail::should_record({&a})) {
    detail::record(out, [a, out]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      auto& ga = a.grad();
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * (1.0 - out[i] * out[i]);
    });
  }
  return out;
}

// Exact GELU: x * Phi(x) with Phi the standard normal CDF.
inline Tensor gelu(const Tensor& a) {
  Tensor out(a.shape());
  for (size_t i = 0; i < a.size(); ++i) {
    double phi = 0.5 * (1.0 + std::erf(a[i] / std::sqrt(2.0)));
    out[i] = a[i] * phi;
  }
  if (detail::should_record({&a})) {
    detail::record(out, [a, out]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      auto& ga = a.grad();
      constexpr double inv_sqrt_2pi = 0.3989422804014327;
      for (size_t i = 0; i < ga.size(); ++i) {
        double x = a[i];
        double cdf = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
        double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
        ga[i] += g[i] * (cdf + x * pdf);
      }
    });
  }
  return out;
}

// log(x + eps); the offset keeps perfect one-hot predictions finite.
inline Tensor log_eps(const Tensor& a, double eps = 1e-12) {
  Tensor out(a.shape());
  for (size_t i = 0; i < a.size(); ++i) out[i] = std::log(a[i] + eps);
  if (detail::should_record({&a})) {
    detail::record(out, [a, out, eps]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      auto& ga = a.grad();
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] / (a[i] + eps);
    });
  }
  return out;
}

// Elementwise min/max against a constant tensor; gradient flows only to `a`
// (to the a-side on ties, which keeps zero-loss fixed points quiet).
inline Tensor min_with_const(const Tensor& a, const Tensor& c) {
  detail::check_same_shape(a, c, "min_with_const");
  Tensor out(a.shape());
  for (size_t i = 0; i < a.size(); ++i) out[i] = std::min(a[i], c[i]);
  if (detail::should_record({&a})) {
    detail::record(out, [a, c, out]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      auto& ga = a.grad();
      for (size_t i = 0; i < ga.size(); ++i)
        if (a[i] <= c[i]) ga[i] += g[i];
    });
  }
  return out;
}

inline Tensor max_with_const(const Tensor& a, const Tensor& c) {
  detail::check_same_shape(a, c, "max_with_const");
  Tensor out(a.shape());
  for (size_t i = 0; i < a.size(); ++i) out[i] = std::max(a[i], c[i]);
  if (detail::should_record({&a})) {
    detail::record(out, [a, c, out]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      auto& ga = a.grad();
      for (size_t i = 0; i < ga.size(); ++i)
        if (a[i] >= c[i]) ga[i] += g[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Broadcast helpers (rows x cols layouts)

// x:[r,c] + v:[c], broadcast over rows.
inline Tensor add_rowvec(const Tensor& x, const Tensor& v) {
  if (x.ndim() != 2 || v.ndim() != 1 || x.dim(1) != v.dim(0))
    throw std::invalid_argument("add_rowvec: " + detail::shape_str(x.shape()) + " + " +
                                detail::shape_str(v.shape()));
  const int r = x.dim(0), c = x.dim(1);
  Tensor out(x.shape());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] + v[j];
  if (detail::should_record({&x, &v})) {
    detail::record(out, [x, v, out, r, c]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      if (x.tracked()) detail::accumulate(x, g);
      if (v.tracked()) {
        auto& gv = v.grad();
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) gv[j] += g[i * c + j];
      }
    });
  }
  return out;
}

// x:[r,c] * g:[r,1], the per-row scalar broadcast over channels (key gating).
inline Tensor mul_colvec(const Tensor& x, const Tensor& s) {
  if (x.ndim() != 2 || s.ndim() != 2 || s.dim(1) != 1 || x.dim(0) != s.dim(0))
    throw std::invalid_argument("mul_colvec: " + detail::shape_str(x.shape()) + " * " +
                                detail::shape_str(s.shape()));
  const int r = x.dim(0), c = x.dim(1);
  Tensor out(x.shape());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] * s[i];
  count_macs(static_cast<unsigned long long>(r) * c);
  if (detail::should_record({&x, &s})) {
    detail::record(out, [x, s, out, r, c]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      if (x.tracked()) {
        auto& gx = x.grad();
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) gx[i * c + j] += g[i * c + j] * s[i];
      }
      if (s.tracked()) {
        auto& gs = s.grad();
        for (int i = 0; i < r; ++i) {
          double acc = 0.0;
          for (int j = 0; j < c; ++j) acc += g[i * c + j] * x[i * c + j];
          gs[i] += acc;
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear algebra

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    throw std::invalid_argument("matmul: dimension mismatch " + detail::shape_str(a.shape()) +
                                " x " + detail::shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    const double* ar = a.data().data() + static_cast<size_t>(i) * k;
    double* or_ = out.data().data() + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = ar[p];
      const double* br = b.data().data() + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) or_[j] += av * br[j];
    }
  }
  count_macs(static_cast<unsigned long long>(m) * k * n);
  if (detail::should_record({&a, &b})) {
    detail::record(out, [a, b, out, m, k, n]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      if (a.tracked()) {
        auto& ga = a.grad();
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            double acc = 0.0;
            const double* gr = g.data() + static_cast<size_t>(i) * n;
            const double* br = b.data().data() + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) acc += gr[j] * br[j];
            ga[static_cast<size_t>(i) * k + p] += acc;
          }
      }
      if (b.tracked()) {
        auto& gb = b.grad();
        for (int p = 0; p < k; ++p)
          for (int i = 0; i < m; ++i) {
            const double av = a[static_cast<size_t>(i) * k + p];
            const double* gr = g.data() + static_cast<size_t>(i) * n;
            double* gbr = gb.data() + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) gbr[j] += av * gr[j];
          }
      }
    });
  }
  return out;
}

inline Tensor transpose(const Tensor& a) {
  if (a.ndim() != 2)
    throw std::invalid_argument("transpose: need 2-d tensor, got " +
                                detail::shape_str(a.shape()));
  const int m = a.dim(0), n = a.dim(1);
  Tensor out({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out[static_cast<size_t>(j) * m + i] = a[static_cast<size_t>(i) * n + j];
  if (detail::should_record({&a})) {
    detail::record(out, [a, out, m, n]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      auto& ga = a.grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) ga[static_cast<size_t>(i) * n + j] += g[static_cast<size_t>(j) * m + i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalizations and reductions

// Softmax over the last dimension with max-subtraction.
inline Tensor softmax_lastdim(const Tensor& x) {
  if (x.ndim() < 1 || x.dim(x.ndim() - 1) < 1)
    throw std::invalid_argument("softmax_lastdim: need a trailing dimension >= 1");
  const int d = x.dim(x.ndim() - 1);
  const size_t rows = x.size() / d;
  Tensor out(x.shape());
  for (size_t r = 0; r < rows; ++r) {
    const double* xr = x.data().data() + r * d;
    double* yr = out.data().data() + r * d;
    double mx = xr[0];
    for (int j = 1; j < d; ++j) mx = std::max(mx, xr[j]);
    if (std::isnan(mx))
      throw std::domain_error("softmax_lastdim: NaN input");
    double sum = 0.0;
    for (int j = 0; j < d; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      sum += yr[j];
    }
    for (int j = 0; j < d; ++j) yr[j] /= sum;
  }
  if (detail::should_record({&x})) {
    detail::record(out, [x, out, d, rows]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      auto& gx = x.grad();
      for (size_t r = 0; r < rows; ++r) {
        const double* yr = out.data().data() + r * d;
        const double* gr = g.data() + r * d;
        double dot = 0.0;
        for (int j = 0; j < d; ++j) dot += yr[j] * gr[j];
        for (int j = 0; j < d; ++j) gx[r * d + j] += yr[j] * (gr[j] - dot);
      }
    });
  }
  return out;
}

// Per-position normalization over the channel (last) axis, then affine.
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         double eps = 1e-5) {
  if (x.ndim() < 1) throw std::invalid_argument("layer_norm: rank-0 input");
  const int c = x.dim(x.ndim() - 1);
  if (gamma.ndim() != 1 || gamma.dim(0) != c || beta.ndim() != 1 || beta.dim(0) != c)
    throw std::invalid_argument("layer_norm: affine params must be [" + std::to_string(c) + "]");
  const size_t rows = x.size() / c;
  Tensor out(x.shape());
  std::vector<double> inv_std(rows), means(rows);
  for (size_t r = 0; r < rows; ++r) {
    const double* xr = x.data().data() + r * c;
    double mean = 0.0;
    for (int j = 0; j < c; ++j) mean += xr[j];
    mean /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= c;
    const double is = 1.0 / std::sqrt(var + eps);
    means[r] = mean;
    inv_std[r] = is;
    double* yr = out.data().data() + r * c;
    for (int j = 0; j < c; ++j) yr[j] = (xr[j] - mean) * is * gamma[j] + beta[j];
  }
  count_macs(2ull * x.size());
  if (detail::should_record({&x, &gamma, &beta})) {
    detail::record(out, [x, gamma, beta, out, c, rows, means, inv_std]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      for (size_t r = 0; r < rows; ++r) {
        const double* xr = x.data().data() + r * c;
        const double* gr = g.data() + r * c;
        const double is = inv_std[r];
        const double mean = means[r];
        if (gamma.tracked() || beta.tracked()) {
          auto& gg = gamma.grad();
          auto& gb = beta.grad();
          for (int j = 0; j < c; ++j) {
            const double xhat = (xr[j] - mean) * is;
            gg[j] += gr[j] * xhat;
            gb[j] += gr[j];
          }
        }
        if (x.tracked()) {
          auto& gx = x.grad();
          double sum_gy = 0.0, sum_gy_xhat = 0.0;
          for (int j = 0; j < c; ++j) {
            const double xhat = (xr[j] - mean) * is;
            const double gy = gr[j] * gamma[j];
            sum_gy += gy;
            sum_gy_xhat += gy * xhat;
          }
          for (int j = 0; j < c; ++j) {
            const double xhat = (xr[j] - mean) * is;
            const double gy = gr[j] * gamma[j];
            gx[r * c + j] += is * (gy - sum_gy / c - xhat * sum_gy_xhat / c);
          }
        }
      }
    });
  }
  return out;
}

inline Tensor sum_all(const Tensor& x) {
  double s = std::accumulate(x.data().begin(), x.data().end(), 0.0);
  Tensor out = Tensor::scalar(s);
  if (detail::should_record({&x})) {
    detail::record(out, [x, out]() mutable {
      if (!out.has_grad()) return;
      const double g = out.grad()[0];
      auto& gx = x.grad();
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
  }
  return out;
}

inline Tensor mean_all(const Tensor& x) {
  if (x.size() == 0) throw std::invalid_argument("mean_all: empty tensor");
  return scale(sum_all(x), 1.0 / static_cast<double>(x.size()));
}

// Column sums of a [r,c] matrix -> [c].
inline Tensor sum_rows(const Tensor& x) {
  if (x.ndim() != 2) throw std::invalid_argument("sum_rows: need 2-d tensor");
  const int r = x.dim(0), c = x.dim(1);
  Tensor out({c});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[j] += x[static_cast<size_t>(i) * c + j];
  if (detail::should_record({&x})) {
    detail::record(out, [x, out, r, c]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      auto& gx = x.grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) gx[static_cast<size_t>(i) * c + j] += g[j];
    });
  }
  return out;
}

// Mean of the k largest entries of a vector (bootstrapped loss selection).
inline Tensor topk_mean(const Tensor& x, int k) {
  if (x.ndim() != 1) throw std::invalid_argument("topk_mean: need 1-d tensor");
  const int n = x.dim(0);
  if (k < 1 || k > n)
    throw std::invalid_argument("topk_mean: k=" + std::to_string(k) + " out of [1," +
                                std::to_string(n) + "]");
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int i, int j) { return x[i] > x[j]; });
  idx.resize(k);
  double s = 0.0;
  for (int i : idx) s += x[i];
  Tensor out = Tensor::scalar(s / k);
  if (detail::should_record({&x})) {
    detail::record(out, [x, out, idx, k]() mutable {
      if (!out.has_grad()) return;
      const double g = out.grad()[0] / k;
      auto& gx = x.grad();
      for (int i : idx) gx[i] += g;
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shape ops

inline Tensor reshape(const Tensor& x, std::vector<int> shape) {
  if (detail::shape_numel(shape) != x.size())
    throw std::invalid_argument("reshape: cannot view " + detail::shape_str(x.shape()) +
                                " as " + detail::shape_str(shape));
  Tensor out = Tensor::from(std::move(shape), x.data());
  if (detail::should_record({&x})) {
    detail::record(out, [x, out]() mutable {
      if (!out.has_grad()) return;
      detail::accumulate(x, out.grad());
    });
  }
  return out;
}

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty input list");
  const int c = parts[0].dim(1);
  int rows = 0;
  for (const auto& p : parts) {
    if (p.ndim() != 2 || p.dim(1) != c)
      throw std::invalid_argument("concat_rows: incompatible part " + detail::shape_str(p.shape()));
    rows += p.dim(0);
  }
  Tensor out({rows, c});
  size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.data().begin(), p.data().end(), out.data().begin() + off);
    off += p.size();
  }
  bool rec = false;
  for (const auto& p : parts) rec |= detail::should_record({&p});
  if (rec) {
    detail::record(out, [parts, out]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      size_t off = 0;
      for (auto& p : parts) {
        if (p.tracked()) {
          auto& gp = const_cast<Tensor&>(p).grad();
          for (size_t i = 0; i < gp.size(); ++i) gp[i] += g[off + i];
        }
        off += p.size();
      }
    });
  }
  return out;
}

inline Tensor slice_rows(const Tensor& x, int r0, int r1) {
  if (x.ndim() != 2 || r0 < 0 || r1 > x.dim(0) || r0 >= r1)
    throw std::invalid_argument("slice_rows: bad range [" + std::to_string(r0) + "," +
                                std::to_string(r1) + ") for " + detail::shape_str(x.shape()));
  const int c = x.dim(1);
  Tensor out({r1 - r0, c});
  std::copy(x.data().begin() + static_cast<size_t>(r0) * c,
            x.data().begin() + static_cast<size_t>(r1) * c, out.data().begin());
  if (detail::should_record({&x})) {
    detail::record(out, [x, out, r0, c]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      auto& gx = x.grad();
      for (size_t i = 0; i < g.size(); ++i) gx[static_cast<size_t>(r0) * c + i] += g[i];
    });
  }
  return out;
}

inline Tensor slice_cols(const Tensor& x, int c0, int c1) {
  if (x.ndim() != 2 || c0 < 0 || c1 > x.dim(1) || c0 >= c1)
    throw std::invalid_argument("slice_cols: bad range [" + std::to_string(c0) + "," +
                                std::to_string(c1) + ") for " + detail::shape_str(x.shape()));
  const int r = x.dim(0), c = x.dim(1), w = c1 - c0;
  Tensor out({r, w});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < w; ++j) out[static_cast<size_t>(i) * w + j] = x[static_cast<size_t>(i) * c + c0 + j];
  if (detail::should_record({&x})) {
    detail::record(out, [x, out, r, c, c0, w]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      auto& gx = x.grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < w; ++j) gx[static_cast<size_t>(i) * c + c0 + j] += g[static_cast<size_t>(i) * w + j];
    });
  }
  return out;
}

inline Tensor gather_rows(const Tensor& x, const std::vector<int>& indices) {
  if (x.ndim() != 2) throw std::invalid_argument("gather_rows: need 2-d tensor");
  const int r = x.dim(0), c = x.dim(1);
  Tensor out({static_cast<int>(indices.size()), c});
  for (size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= r)
      throw std::out_of_range("gather_rows: index " + std::to_string(indices[i]));
    std::copy(x.data().begin() + static_cast<size_t>(indices[i]) * c,
              x.data().begin() + static_cast<size_t>(indices[i] + 1) * c,
              out.data().begin() + i * c);
  }
  if (detail::should_record({&x})) {
    detail::record(out, [x, out, indices, c]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      auto& gx = x.grad();
      for (size_t i = 0; i < indices.size(); ++i)
        for (int j = 0; j < c; ++j)
          gx[static_cast<size_t>(indices[i]) * c + j] += g[i * c + j];
    });
  }
  return out;
}

// Per-row element pick: out[i] = x[i, idx[i]].
inline Tensor gather_elem(const Tensor& x, const std::vector<int>& idx) {
  if (x.ndim() != 2 || static_cast<int>(idx.size()) != x.dim(0))
    throw std::invalid_argument("gather_elem: need one index per row");
  const int c = x.dim(1);
  Tensor out({x.dim(0)});
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= c)
      throw std::out_of_range("gather_elem: index " + std::to_string(idx[i]));
    out[i] = x[i * c + idx[i]];
  }
  if (detail::should_record({&x})) {
    detail::record(out, [x, out, idx, c]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      auto& gx = x.grad();
      for (size_t i = 0; i < idx.size(); ++i) gx[i * c + idx[i]] += g[i];
    });
  }
  return out;
}

}  // namespace aost
