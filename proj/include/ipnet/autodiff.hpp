#pragma once

// A small reverse-mode automatic-differentiation engine over real-valued
// (batch x features) tensors: dense, batch-norm, ReLU, Tanh and row-power-
// normalization layers, the Adam optimizer, and a reduce-on-plateau
// learning-rate schedule.
//
// Determinism contract: every floating-point reduction accumulates in a
// fixed sequential order per output element. The OpenMP parallel loops only
// split work across independent output elements, so results are bitwise
// identical for any thread count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ipnet/errors.hpp"
#include "ipnet/rng.hpp"

namespace ipnet {

enum class Mode { kTraining, kInference };

/// Caps the number of worker threads used by the tensor kernels.
inline void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

/// Row-major (batch x features) tensor of doubles.
struct Tensor {
  std::size_t batch = 0;
  std::size_t features = 0;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::size_t b, std::size_t f) : batch(b), features(f), values(b * f) {}

  double& at(std::size_t b, std::size_t f) { return values[b * features + f]; }
  double at(std::size_t b, std::size_t f) const {
    return values[b * features + f];
  }
  double* row(std::size_t b) { return values.data() + b * features; }
  const double* row(std::size_t b) const { return values.data() + b * features; }
};

namespace detail {

constexpr std::size_t kParallelCutoff = 1u << 15;

/// Dot product with eight fixed-pattern accumulators. The summation order
/// is a constant of the implementation (run-to-run deterministic); the
/// independent chains let the compiler vectorize without reassociation.
inline double dot8(const double* a, const double* b, std::size_t n) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
    s4 += a[i + 4] * b[i + 4];
    s5 += a[i + 5] * b[i + 5];
    s6 += a[i + 6] * b[i + 6];
    s7 += a[i + 7] * b[i + 7];
  }
  double acc = ((s0 + s4) + (s1 + s5)) + ((s2 + s6) + (s3 + s7));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

/// C[r,c] (+)= bias[c] + dot(A_row_r, B_row_c). B rows are processed in
/// L2-sized chunks so each chunk is reused across all of A; the row range
/// of A is split contiguously across threads. Every C element is produced
/// by exactly one thread with a fixed accumulation order.
inline void gemm_nt(const double* a, const double* b_mat, const double* bias,
                    double* c_mat, std::size_t rows_a, std::size_t rows_b,
                    std::size_t n, bool accumulate) {
  const std::size_t chunk =
      std::clamp<std::size_t>((std::size_t{1} << 20) / (8 * n), 16, rows_b);
  const bool par = rows_a * rows_b * n > kParallelCutoff;
#pragma omp parallel if (par)
  {
#ifdef _OPENMP
    const std::size_t tid = omp_get_thread_num();
    const std::size_t nt = omp_get_num_threads();
#else
    const std::size_t tid = 0, nt = 1;
#endif
    const std::size_t r0 = rows_a * tid / nt;
    const std::size_t r1 = rows_a * (tid + 1) / nt;
    for (std::size_t c0 = 0; c0 < rows_b; c0 += chunk) {
      const std::size_t c1 = std::min(rows_b, c0 + chunk);
      for (std::size_t r = r0; r < r1; ++r) {
        const double* ar = a + r * n;
        double* cr = c_mat + r * rows_b;
        for (std::size_t c = c0; c < c1; ++c) {
          double v = dot8(ar, b_mat + c * n, n);
          if (bias) v += bias[c];
          cr[c] = accumulate ? cr[c] + v : v;
        }
      }
    }
  }
}

/// y[b,o] = bias[o] + sum_i x[b,i] * w[o,i]   (w row-major out x in)
inline void dense_forward_kernel(const double* x, const double* w,
                                 const double* bias, double* y,
                                 std::size_t batch, std::size_t in,
                                 std::size_t out) {
  gemm_nt(x, w, bias, y, batch, out, in, /*accumulate=*/false);
}

inline void transpose(const double* src, double* dst, std::size_t rows,
                      std::size_t cols) {
  constexpr std::size_t kTile = 64;
  const bool par = rows * cols > kParallelCutoff;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t rb = 0; rb < static_cast<std::ptrdiff_t>(rows);
       rb += kTile) {
    const std::size_t r1 = std::min<std::size_t>(rb + kTile, rows);
    for (std::size_t cb = 0; cb < cols; cb += kTile) {
      const std::size_t c1 = std::min(cb + kTile, cols);
      for (std::size_t r = rb; r < r1; ++r)
        for (std::size_t c = cb; c < c1; ++c)
          dst[c * rows + r] = src[r * cols + c];
    }
  }
}

/// dx[b,i] = sum_o dy[b,o] * w[o,i], computed as contiguous dot products
/// against the transposed weight (scratch is caller-provided, sized in*out).
inline void dense_backward_data_kernel(const double* dy, const double* w,
                                       double* dx, double* w_t,
                                       std::size_t batch, std::size_t in,
                                       std::size_t out) {
  transpose(w, w_t, out, in);
  gemm_nt(dy, w_t, nullptr, dx, batch, in, out, /*accumulate=*/false);
}

/// dw[o,i] += sum_b dy[b,o] * x[b,i];  db[o] += sum_b dy[b,o].
/// Scratch holds transposed copies of dy (out x batch) and x (in x batch).
inline void dense_backward_param_kernel(const double* dy, const double* x,
                                        double* dw, double* db, double* dy_t,
                                        double* x_t, std::size_t batch,
                                        std::size_t in, std::size_t out) {
  transpose(dy, dy_t, batch, out);
  transpose(x, x_t, batch, in);
  for (std::size_t o = 0; o < out; ++o) {
    const double* dyr = dy_t + o * batch;
    double acc_b = 0.0;
    for (std::size_t b = 0; b < batch; ++b) acc_b += dyr[b];
    db[o] += acc_b;
  }
  gemm_nt(dy_t, x_t, nullptr, dw, out, in, batch, /*accumulate=*/true);
}

inline void check_finite(const Tensor& t, const std::string& where) {
  // Branch-free exponent test so the scan vectorizes.
  std::uint64_t bad = 0;
  for (double v : t.values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    bad += ((bits >> 52) & 0x7FF) == 0x7FF;
  }
  if (bad != 0)
    throw NumericError("non-finite value after " + where);
}

}  // namespace detail

/// A named slice of parameters with its gradient buffer.
struct ParamView {
  std::string name;
  double* value = nullptr;
  double* grad = nullptr;
  std::size_t size = 0;
  bool trainable = true;
};

class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  const std::string& name() const { return name_; }

  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual void collect_params(std::vector<ParamView>& out) { (void)out; }
  virtual std::uint64_t trainable_params() const { return 0; }
  virtual std::uint64_t non_trainable_params() const { return 0; }
  /// Feature count this layer emits for a given input feature count.
  virtual std::size_t out_features(std::size_t in) const { return in; }

 private:
  std::string name_;
};

/// Fully-connected layer, weight stored row-major (out x in).
class DenseLayer : public Layer {
 public:
  DenseLayer(std::size_t in, std::size_t out, std::string name)
      : Layer(std::move(name)),
        in_(in),
        out_(out),
        weight_(in * out),
        bias_(out),
        wgrad_(in * out),
        bgrad_(out) {
    if (in == 0 || out == 0) throw ValidationError("dense: zero width");
  }

  /// Symmetric uniform init, +-sqrt(6/(fan_in+fan_out)); zero biases.
  /// Weights are drawn in row-major storage order.
  void init_glorot(std::uint64_t seed) {
    Xoshiro256pp rng(seed);
    const double limit = std::sqrt(6.0 / static_cast<double>(in_ + out_));
    for (double& w : weight_) w = (2.0 * rng.uniform01() - 1.0) * limit;
    std::fill(bias_.begin(), bias_.end(), 0.0);
  }

  Tensor forward(const Tensor& x, Mode mode) override {
    if (x.features != in_)
      throw ShapeError(name() + ": expected " + std::to_string(in_) +
                       " input features, got " + std::to_string(x.features));
    if (mode == Mode::kTraining) cached_input_ = x;
    Tensor y(x.batch, out_);
    detail::dense_forward_kernel(x.values.data(), weight_.data(), bias_.data(),
                                 y.values.data(), x.batch, in_, out_);
    return y;
  }

  Tensor backward(const Tensor& dy) override {
    if (cached_input_.batch == 0)
      throw StateError(name() + ": backward without recorded forward");
    if (dy.batch != cached_input_.batch || dy.features != out_)
      throw ShapeError(name() + ": gradient shape mismatch");
    scratch_.resize(std::max(in_ * out_, (in_ + out_) * dy.batch));
    detail::dense_backward_param_kernel(
        dy.values.data(), cached_input_.values.data(), wgrad_.data(),
        bgrad_.data(), scratch_.data(), scratch_.data() + out_ * dy.batch,
        dy.batch, in_, out_);
    Tensor dx(dy.batch, in_);
    detail::dense_backward_data_kernel(dy.values.data(), weight_.data(),
                                       dx.values.data(), scratch_.data(),
                                       dy.batch, in_, out_);
    return dx;
  }

  void collect_params(std::vector<ParamView>& out) override {
    out.push_back({name() + ".weight", weight_.data(), wgrad_.data(),
                   weight_.size(), true});
    out.push_back(
        {name() + ".bias", bias_.data(), bgrad_.data(), bias_.size(), true});
  }

  std::uint64_t trainable_params() const override {
    return weight_.size() + bias_.size();
  }
  std::size_t out_features(std::size_t) const override { return out_; }
  std::size_t in_features() const { return in_; }

  std::span<double> weight() { return weight_; }
  std::span<double> bias() { return bias_; }

 private:
  std::size_t in_, out_;
  std::vector<double> weight_, bias_, wgrad_, bgrad_;
  std::vector<double> scratch_;
  Tensor cached_input_;
};

/// Batch normalization with trainable scale/shift and running statistics
/// kept by exponential moving average (momentum 0.9, biased in-batch
/// variance). Training batches must hold at least 2 samples.
class BatchNormLayer : public Layer {
 public:
  BatchNormLayer(std::size_t features, std::string name, double momentum = 0.9,
                 double epsilon = 1e-5)
      : Layer(std::move(name)),
        features_(features),
        momentum_(momentum),
        epsilon_(epsilon),
        gamma_(features, 1.0),
        beta_(features, 0.0),
        ggrad_(features, 0.0),
        bgrad_(features, 0.0),
        running_mean_(features, 0.0),
        running_var_(features, 1.0) {}

  Tensor forward(const Tensor& x, Mode mode) override {
    if (x.features != features_)
      throw ShapeError(name() + ": feature count mismatch");
    Tensor y(x.batch, features_);
    if (mode == Mode::kTraining) {
      if (x.batch < 2)
        throw ValidationError(
            name() + ": training batch must hold at least 2 samples "
                     "(batch variance undefined)");
      const double inv_n = 1.0 / static_cast<double>(x.batch);
      xhat_ = Tensor(x.batch, features_);
      invstd_.assign(features_, 0.0);
      const bool par = x.batch * features_ > detail::kParallelCutoff;
#pragma omp parallel for schedule(static) if (par)
      for (std::ptrdiff_t f = 0; f < static_cast<std::ptrdiff_t>(features_);
           ++f) {
        double mean = 0.0;
        for (std::size_t b = 0; b < x.batch; ++b) mean += x.at(b, f);
        mean *= inv_n;
        double var = 0.0;
        for (std::size_t b = 0; b < x.batch; ++b) {
          const double d = x.at(b, f) - mean;
          var += d * d;
        }
        var *= inv_n;
        const double istd = 1.0 / std::sqrt(var + epsilon_);
        invstd_[f] = istd;
        for (std::size_t b = 0; b < x.batch; ++b) {
          const double xh = (x.at(b, f) - mean) * istd;
          xhat_.at(b, f) = xh;
          y.at(b, f) = gamma_[f] * xh + beta_[f];
        }
        running_mean_[f] = momentum_ * running_mean_[f] + (1.0 - momentum_) * mean;
        running_var_[f] = momentum_ * running_var_[f] + (1.0 - momentum_) * var;
      }
      have_training_cache_ = true;
    } else {
      const bool par = x.batch * features_ > detail::kParallelCutoff;
#pragma omp parallel for schedule(static) if (par)
      for (std::ptrdiff_t f = 0; f < static_cast<std::ptrdiff_t>(features_);
           ++f) {
        const double istd = 1.0 / std::sqrt(running_var_[f] + epsilon_);
        const double mean = running_mean_[f];
        for (std::size_t b = 0; b < x.batch; ++b)
          y.at(b, f) = gamma_[f] * (x.at(b, f) - mean) * istd + beta_[f];
      }
    }
    return y;
  }

  Tensor backward(const Tensor& dy) override {
    if (!have_training_cache_)
      throw StateError(name() + ": backward without recorded forward");
    if (dy.batch != xhat_.batch || dy.features != features_)
      throw ShapeError(name() + ": gradient shape mismatch");
    const std::size_t n = dy.batch;
    const double inv_n = 1.0 / static_cast<double>(n);
    Tensor dx(n, features_);
    const bool par = n * features_ > detail::kParallelCutoff;
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t f = 0; f < static_cast<std::ptrdiff_t>(features_);
         ++f) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        sum_dy += dy.at(b, f);
        sum_dy_xhat += dy.at(b, f) * xhat_.at(b, f);
      }
      ggrad_[f] += sum_dy_xhat;
      bgrad_[f] += sum_dy;
      const double scale = gamma_[f] * invstd_[f];
      for (std::size_t b = 0; b < n; ++b)
        dx.at(b, f) = scale * (dy.at(b, f) - inv_n * sum_dy -
                               xhat_.at(b, f) * inv_n * sum_dy_xhat);
    }
    return dx;
  }

  void collect_params(std::vector<ParamView>& out) override {
    out.push_back(
        {name() + ".gamma", gamma_.data(), ggrad_.data(), features_, true});
    out.push_back(
        {name() + ".beta", beta_.data(), bgrad_.data(), features_, true});
    out.push_back({name() + ".running_mean", running_mean_.data(), nullptr,
                   features_, false});
    out.push_back({name() + ".running_var", running_var_.data(), nullptr,
                   features_, false});
  }

  std::uint64_t trainable_params() const override { return 2 * features_; }
  std::uint64_t non_trainable_params() const override { return 2 * features_; }

  std::span<const double> running_mean() const { return running_mean_; }
  std::span<const double> running_var() const { return running_var_; }

 private:
  std::size_t features_;
  double momentum_, epsilon_;
  std::vector<double> gamma_, beta_, ggrad_, bgrad_;
  std::vector<double> running_mean_, running_var_;
  Tensor xhat_;
  std::vector<double> invstd_;
  bool have_training_cache_ = false;
};

class ReluLayer : public Layer {
 public:
  explicit ReluLayer(std::string name) : Layer(std::move(name)) {}

  Tensor forward(const Tensor& x, Mode mode) override {
    Tensor y = x;
    for (double& v : y.values) v = v > 0.0 ? v : 0.0;
    if (mode == Mode::kTraining) cached_input_ = x;
    return y;
  }

  Tensor backward(const Tensor& dy) override {
    if (cached_input_.batch == 0)
      throw StateError(name() + ": backward without recorded forward");
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.values.size(); ++i)
      if (cached_input_.values[i] <= 0.0) dx.values[i] = 0.0;
    return dx;
  }

 private:
  Tensor cached_input_;
};

class TanhLayer : public Layer {
 public:
  explicit TanhLayer(std::string name) : Layer(std::move(name)) {}

  Tensor forward(const Tensor& x, Mode mode) override {
    Tensor y = x;
    for (double& v : y.values) v = std::tanh(v);
    if (mode == Mode::kTraining) cached_output_ = y;
    return y;
  }

  Tensor backward(const Tensor& dy) override {
    if (cached_output_.batch == 0)
      throw StateError(name() + ": backward without recorded forward");
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.values.size(); ++i) {
      const double t = cached_output_.values[i];
      dx.values[i] *= 1.0 - t * t;
    }
    return dx;
  }

 private:
  Tensor cached_output_;
};

/// Power normalization: scales every row to Euclidean norm `target_norm`.
/// Rows whose norm falls below the 1e-12 floor are scaled as if their norm
/// were the floor, which keeps gradients bounded near a zero output.
class RowNormalizeLayer : public Layer {
 public:
  RowNormalizeLayer(double target_norm, std::string name)
      : Layer(std::move(name)), target_(target_norm) {}

  void set_target_norm(double t) { target_ = t; }
  double target_norm() const { return target_; }

  static constexpr double kNormFloor = 1e-12;

  Tensor forward(const Tensor& x, Mode mode) override {
    Tensor y(x.batch, x.features);
    norms_.assign(x.batch, 0.0);
    clamped_.assign(x.batch, 0);
    for (std::size_t b = 0; b < x.batch; ++b) {
      double n2 = 0.0;
      const double* xr = x.row(b);
      for (std::size_t f = 0; f < x.features; ++f) n2 += xr[f] * xr[f];
      double n = std::sqrt(n2);
      if (n < kNormFloor) {
        n = kNormFloor;
        clamped_[b] = 1;
      }
      norms_[b] = n;
      const double s = target_ / n;
      double* yr = y.row(b);
      for (std::size_t f = 0; f < x.features; ++f) yr[f] = s * xr[f];
    }
    if (mode == Mode::kTraining) cached_input_ = x;
    return y;
  }

  Tensor backward(const Tensor& dy) override {
    if (cached_input_.batch == 0)
      throw StateError(name() + ": backward without recorded forward");
    Tensor dx(dy.batch, dy.features);
    for (std::size_t b = 0; b < dy.batch; ++b) {
      const double n = norms_[b];
      const double* xr = cached_input_.row(b);
      const double* dyr = dy.row(b);
      double* dxr = dx.row(b);
      const double c_over_n = target_ / n;
      if (clamped_[b]) {
        // Norm pinned at the floor: the scale is locally constant.
        for (std::size_t f = 0; f < dy.features; ++f)
          dxr[f] = c_over_n * dyr[f];
        continue;
      }
      double x_dot_dy = 0.0;
      for (std::size_t f = 0; f < dy.features; ++f) x_dot_dy += xr[f] * dyr[f];
      const double proj = target_ * x_dot_dy / (n * n * n);
      for (std::size_t f = 0; f < dy.features; ++f)
        dxr[f] = c_over_n * dyr[f] - proj * xr[f];
    }
    return dx;
  }

 private:
  double target_;
  Tensor cached_input_;
  std::vector<double> norms_;
  std::vector<char> clamped_;
};

/// An ordered stack of layers with shared forward/backward plumbing and a
/// NaN guard after every pass.
class FeedForward {
 public:
  Layer* add(std::unique_ptr<Layer> layer) {
    layers_.push_back(std::move(layer));
    return layers_.back().get();
  }

  Tensor forward(const Tensor& input, Mode mode) {
    detail::check_finite(input, "network input");
    Tensor x = input;
    for (auto& layer : layers_) {
      x = layer->forward(x, mode);
      detail::check_finite(x, layer->name());
    }
    if (mode == Mode::kTraining) forward_recorded_ = true;
    return x;
  }

  /// Propagates d(loss)/d(output) back to every parameter gradient;
  /// returns d(loss)/d(input).
  Tensor backward(const Tensor& grad_output) {
    if (!forward_recorded_)
      throw StateError("backward called without a recorded training forward");
    Tensor g = grad_output;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
      g = (*it)->backward(g);
      detail::check_finite(g, (*it)->name() + " (backward)");
    }
    forward_recorded_ = false;
    return g;
  }

  std::vector<ParamView> params() {
    std::vector<ParamView> out;
    for (auto& layer : layers_) layer->collect_params(out);
    return out;
  }

  void zero_grads() {
    for (const ParamView& p : params())
      if (p.grad) std::fill(p.grad, p.grad + p.size, 0.0);
  }

  std::uint64_t trainable_params() const {
    std::uint64_t n = 0;
    for (const auto& l : layers_) n += l->trainable_params();
    return n;
  }

  std::uint64_t non_trainable_params() const {
    std::uint64_t n = 0;
    for (const auto& l : layers_) n += l->non_trainable_params();
    return n;
  }

  /// Seeds every dense layer from its own substream; resets BN state.
  void init(std::uint64_t seed) {
    std::uint64_t dense_index = 0;
    for (auto& layer : layers_) {
      if (auto* d = dynamic_cast<DenseLayer*>(layer.get()))
        d->init_glorot(stream_seed(seed, dense_index++));
    }
  }

  /// Flat state: trainable parameters in layer order, then non-trainable
  /// (BN running) state in layer order. Matches the checkpoint layout.
  std::vector<double> export_state() {
    std::vector<double> out;
    auto ps = params();
    for (const ParamView& p : ps)
      if (p.trainable) out.insert(out.end(), p.value, p.value + p.size);
    for (const ParamView& p : ps)
      if (!p.trainable) out.insert(out.end(), p.value, p.value + p.size);
    return out;
  }

  void import_state(std::span<const double> state) {
    auto ps = params();
    std::size_t pos = 0;
    auto copy_group = [&](bool trainable) {
      for (const ParamView& p : ps) {
        if (p.trainable != trainable) continue;
        if (pos + p.size > state.size())
          throw FormatError("network state blob too short");
        std::copy(state.begin() + pos, state.begin() + pos + p.size, p.value);
        pos += p.size;
      }
    };
    copy_group(true);
    copy_group(false);
    if (pos != state.size())
      throw FormatError("network state blob size mismatch");
  }

  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  bool forward_recorded_ = false;
};

// --- optimizer ---------------------------------------------------------------

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction; updates trainable parameters in registration
/// order.
class Adam {
 public:
  explicit Adam(std::vector<ParamView> params, AdamConfig cfg = {})
      : cfg_(cfg) {
    for (ParamView& p : params) {
      if (!p.trainable) continue;
      params_.push_back(p);
      m_.emplace_back(p.size, 0.0);
      v_.emplace_back(p.size, 0.0);
    }
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t p = 0; p < params_.size(); ++p) {
      double* value = params_[p].value;
      const double* grad = params_[p].grad;
      double* m = m_[p].data();
      double* v = v_[p].data();
      const std::size_t n = params_[p].size;
      const bool par = n > detail::kParallelCutoff;
#pragma omp parallel for schedule(static) if (par)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        const double g = grad[i];
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        value[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
      }
    }
  }

  std::uint64_t step_count() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<ParamView> params_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t t_ = 0;
};

// --- learning-rate schedule --------------------------------------------------

/// Reduce-on-plateau: when the validation metric fails to beat the best
/// value seen so far for `patience` consecutive epochs (strictly-greater
/// improvement test), the learning rate is multiplied by `factor` and the
/// patience counter resets.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(double initial_lr, int patience = 3,
                            double factor = 0.1)
      : lr_(initial_lr), patience_(patience), factor_(factor) {}

  double observe(double metric) {
    if (metric > best_) {
      best_ = metric;
      streak_ = 0;
    } else if (++streak_ >= patience_) {
      lr_ *= factor_;
      streak_ = 0;
    }
    return lr_;
  }

  double lr() const { return lr_; }

 private:
  double lr_;
  int patience_;
  double factor_;
  double best_ = -std::numeric_limits<double>::infinity();
  int streak_ = 0;
};

/// Replays a validation-metric history through the plateau rule starting
/// from `lr` and returns the resulting learning rate.
inline double plateau_schedule(std::span<const double> history, double lr) {
  if (history.empty())
    throw ValidationError("plateau_schedule: need at least one epoch");
  PlateauScheduler sched(lr);
  double out = lr;
  for (double metric : history) out = sched.observe(metric);
  return out;
}

}  // namespace ipnet
