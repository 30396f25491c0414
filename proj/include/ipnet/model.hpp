#pragma once

// The neural precoder: a model-driven CSI-augmentation stage feeding a
// dense network whose output is power-normalized into a precoding matrix.
//
// Three variants share one body (four Dense+BN+ReLU blocks, one
// Dense+BN+Tanh block, power normalization):
//   * ipnet       input 6MK  = augmented CSI  [H Zd, H Z, H], vectorized
//   * ipnet-half  input 6MK, hidden widths halved
//   * blackbox    input 2MK  = raw vectorized H
//
// Training is unsupervised: the loss is the negative batch-mean sum rate of
// the emitted precoders, always evaluated against the true channel even
// when the network input is an estimated channel.

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ipnet/autodiff.hpp"
#include "ipnet/channel.hpp"
#include "ipnet/errors.hpp"
#include "ipnet/io.hpp"
#include "ipnet/linalg.hpp"
#include "ipnet/precoding.hpp"
#include "ipnet/vectorize.hpp"

namespace ipnet {

enum class Variant : std::uint8_t { kIpnet = 0, kIpnetHalf = 1, kBlackBox = 2 };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kIpnet:
      return "ipnet";
    case Variant::kIpnetHalf:
      return "ipnet-half";
    case Variant::kBlackBox:
      return "blackbox";
  }
  return "?";
}

inline Variant variant_from_name(const std::string& s) {
  if (s == "ipnet") return Variant::kIpnet;
  if (s == "ipnet-half") return Variant::kIpnetHalf;
  if (s == "blackbox") return Variant::kBlackBox;
  throw ValidationError("unknown variant: " + s +
                        " (expected ipnet | ipnet-half | blackbox)");
}

/// Power expressed in millibels (1 mB = 0.01 dB); the canonical fixed-point
/// representation used in file headers so power budgets round-trip exactly.
inline std::int64_t millibels_from_db(double db) {
  return std::llround(100.0 * db);
}

inline double power_from_millibels(std::int64_t mb) {
  return std::pow(10.0, static_cast<double>(mb) / 1000.0);
}

struct NetworkSpec {
  Variant variant = Variant::kIpnet;
  std::uint32_t m = 0;
  std::uint32_t k = 0;
  std::int64_t pt_millibels = 0;
  /// Layer widths from input to output, length 6.
  std::vector<std::uint32_t> widths;

  static NetworkSpec make(Variant variant, std::uint32_t m, std::uint32_t k,
                          std::int64_t pt_millibels) {
    if (m == 0 || k == 0)
      throw ValidationError("NetworkSpec: dimensions must be positive");
    const std::uint32_t mk = m * k;
    NetworkSpec s;
    s.variant = variant;
    s.m = m;
    s.k = k;
    s.pt_millibels = pt_millibels;
    switch (variant) {
      case Variant::kIpnet:
        s.widths = {6 * mk, 64 * mk, 32 * mk, 16 * mk, 8 * mk, 2 * mk};
        break;
      case Variant::kIpnetHalf:
        s.widths = {6 * mk, 32 * mk, 16 * mk, 8 * mk, 4 * mk, 2 * mk};
        break;
      case Variant::kBlackBox:
        s.widths = {2 * mk, 64 * mk, 32 * mk, 16 * mk, 8 * mk, 2 * mk};
        break;
    }
    return s;
  }

  std::uint32_t input_features() const { return widths.front(); }
  std::uint32_t output_features() const { return widths.back(); }
  double power_budget() const { return power_from_millibels(pt_millibels); }
  bool uses_augmented_input() const { return variant != Variant::kBlackBox; }

  bool operator==(const NetworkSpec&) const = default;
};

struct ParamCounts {
  std::uint64_t total = 0;
  std::uint64_t trainable = 0;
  std::uint64_t non_trainable = 0;
};

// --- CSI augmentation --------------------------------------------------------

/// Augmented CSI: Hc = [H Zd, H Z, H] stacked into a 3M x K matrix with
/// Z = H^H H + rho I and Zd its diagonal part, plus the 6MK-real
/// vectorization. A fixed transformation with no trainable content.
struct AugmentedCsi {
  CMatrix hc;
  std::vector<double> real_vector;
  double rho_used = 0.0;
};

inline AugmentedCsi augment(const CMatrix& h, double rho) {
  if (!(rho > 0.0)) throw ValidationError("augment: rho must be positive");
  const std::size_t m = h.rows(), k = h.cols();
  CMatrix z = matmul(hermitian(h), h);
  for (std::size_t i = 0; i < k; ++i) z(i, i) += rho;
  CMatrix zd(k, k);
  for (std::size_t i = 0; i < k; ++i) zd(i, i) = z(i, i);
  const CMatrix hzd = matmul(h, zd);
  const CMatrix hz = matmul(h, z);
  CMatrix hc(3 * m, k);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < m; ++i) {
      hc(i, j) = hzd(i, j);
      hc(m + i, j) = hz(i, j);
      hc(2 * m + i, j) = h(i, j);
    }
  return {hc, cmat_to_realvec(hc), rho};
}

// --- network -----------------------------------------------------------------

class PrecoderNet {
 public:
  explicit PrecoderNet(NetworkSpec spec) : spec_(std::move(spec)) {
    if (spec_.widths.size() != 6)
      throw ValidationError("NetworkSpec: expected 6 layer widths");
    for (std::uint32_t w : spec_.widths)
      if (w == 0) throw ValidationError("NetworkSpec: zero layer width");
    power_budget_ = spec_.power_budget();
    for (int l = 1; l <= 4; ++l) {
      const std::string idx = std::to_string(l);
      net_.add(std::make_unique<DenseLayer>(spec_.widths[l - 1],
                                            spec_.widths[l], "dense" + idx));
      net_.add(std::make_unique<BatchNormLayer>(spec_.widths[l], "bn" + idx));
      net_.add(std::make_unique<ReluLayer>("relu" + idx));
    }
    net_.add(std::make_unique<DenseLayer>(spec_.widths[4], spec_.widths[5],
                                          "dense5"));
    net_.add(std::make_unique<BatchNormLayer>(spec_.widths[5], "bn5"));
    net_.add(std::make_unique<TanhLayer>("tanh5"));
    pn_ = static_cast<RowNormalizeLayer*>(net_.add(
        std::make_unique<RowNormalizeLayer>(std::sqrt(power_budget_), "pn")));
  }

  const NetworkSpec& spec() const { return spec_; }
  double power_budget() const { return power_budget_; }

  /// Deployment-time power budget override (rescales the PN layer only).
  void set_power_budget(double p_t) {
    if (!(p_t > 0.0)) throw ValidationError("power budget must be positive");
    power_budget_ = p_t;
    pn_->set_target_norm(std::sqrt(p_t));
  }

  void init(std::uint64_t seed) { net_.init(seed); }

  Tensor forward(const Tensor& features, Mode mode) {
    if (features.features != spec_.input_features())
      throw ShapeError("network input has " + std::to_string(features.features) +
                       " features, spec wants " +
                       std::to_string(spec_.input_features()));
    return net_.forward(features, mode);
  }

  Tensor backward(const Tensor& grad_output) { return net_.backward(grad_output); }
  void zero_grads() { net_.zero_grads(); }
  std::vector<ParamView> params() { return net_.params(); }

  ParamCounts counts() const {
    ParamCounts c;
    c.trainable = net_.trainable_params();
    c.non_trainable = net_.non_trainable_params();
    c.total = c.trainable + c.non_trainable;
    return c;
  }

  /// Input feature vector for one channel matrix under this variant.
  std::vector<double> input_features(const CMatrix& channel, double rho) const {
    if (channel.rows() != spec_.m || channel.cols() != spec_.k)
      throw ShapeError("channel dimensions do not match network spec");
    if (spec_.uses_augmented_input()) return augment(channel, rho).real_vector;
    return cmat_to_realvec(channel);
  }

  /// Single-channel inference: features -> forward (inference mode) -> W.
  PrecoderMatrix infer_one(const CMatrix& channel, double rho) {
    Tensor in(1, spec_.input_features());
    auto f = input_features(channel, rho);
    std::copy(f.begin(), f.end(), in.values.begin());
    Tensor out = net_.forward(in, Mode::kInference);
    CMatrix w = realvec_to_cmat(out.values, spec_.m, spec_.k);
    return PrecoderMatrix(std::move(w), power_budget_);
  }

  std::vector<double> export_trainable() {
    return export_group(/*trainable=*/true);
  }
  std::vector<double> export_running() {
    return export_group(/*trainable=*/false);
  }

  void import_state(std::span<const double> trainable,
                    std::span<const double> running) {
    std::vector<double> all;
    all.reserve(trainable.size() + running.size());
    all.insert(all.end(), trainable.begin(), trainable.end());
    all.insert(all.end(), running.begin(), running.end());
    net_.import_state(all);
  }

 private:
  std::vector<double> export_group(bool trainable) {
    std::vector<double> out;
    for (const ParamView& p : net_.params())
      if (p.trainable == trainable)
        out.insert(out.end(), p.value, p.value + p.size);
    return out;
  }

  NetworkSpec spec_;
  FeedForward net_;
  RowNormalizeLayer* pn_ = nullptr;
  double power_budget_ = 1.0;
};

inline PrecoderNet build_network(const NetworkSpec& spec) {
  return PrecoderNet(spec);
}

// --- power normalization (matrix-level API) ----------------------------------

/// sqrt(P_T) * W / ||W||_F. The differentiable counterpart used in training
/// is RowNormalizeLayer; this is the strict matrix-level operation, which
/// rejects an exactly-zero input.
inline PrecoderMatrix power_normalize(const CMatrix& w_raw, double p_t) {
  if (!(p_t > 0.0)) throw ValidationError("power_normalize: P_T must be > 0");
  const double norm = frobenius_norm(w_raw);
  if (norm == 0.0)
    throw DegenerateInputError("power_normalize: zero matrix");
  CMatrix w = w_raw;
  const double s = std::sqrt(p_t) / norm;
  for (cplx& v : w.entries()) v *= s;
  return PrecoderMatrix(std::move(w), p_t);
}

// --- unsupervised loss -------------------------------------------------------

namespace detail {

/// Sum rate of one (true channel, precoder) pair plus, optionally, the loss
/// gradient with respect to the precoder's real vectorization. Math lives
/// here (rather than reusing sum_rate) so the backward path is one
/// self-contained derivation.
inline double rate_and_grad(const CMatrix& h, const CMatrix& w, double sigma2,
                            double grad_scale, double* grad_row) {
  const std::size_t m = h.rows(), k = h.cols();
  // c[u*k + j] = h_u^H w_j
  std::vector<cplx> c(k * k);
  for (std::size_t u = 0; u < k; ++u)
    for (std::size_t j = 0; j < k; ++j) {
      cplx s{};
      for (std::size_t i = 0; i < m; ++i) s += std::conj(h(i, u)) * w(i, j);
      c[u * k + j] = s;
    }
  constexpr double kLn2 = 0.69314718055994530942;
  std::vector<double> d_num(k), d_den(k);
  double rate = 0.0;
  for (std::size_t u = 0; u < k; ++u) {
    const double num = std::norm(c[u * k + u]);
    double den = sigma2;
    for (std::size_t j = 0; j < k; ++j)
      if (j != u) den += std::norm(c[u * k + j]);
    rate += std::log2(1.0 + num / den);
    if (grad_row) {
      d_num[u] = 1.0 / (kLn2 * (num + den));
      d_den[u] = -num / (kLn2 * (num + den) * den);
    }
  }
  if (grad_row) {
    const std::size_t mk = m * k;
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < m; ++i) {
        cplx g{};  // conjugate (Wirtinger) gradient of the rate w.r.t. w_j[i]
        for (std::size_t u = 0; u < k; ++u) {
          const double coef = (u == j) ? d_num[u] : d_den[u];
          g += coef * c[u * k + j] * h(i, u);
        }
        // d/dRe = 2 Re(g), d/dIm = 2 Im(g); column-major real layout.
        grad_row[j * m + i] += grad_scale * 2.0 * g.real();
        grad_row[mk + j * m + i] += grad_scale * 2.0 * g.imag();
      }
    }
  }
  return rate;
}

}  // namespace detail

/// Negative batch-mean sum rate of already power-normalized precoder rows,
/// evaluated against the true channels.
inline double sum_rate_loss(const Tensor& w_rows,
                            std::span<const CMatrix* const> true_h,
                            double sigma2) {
  if (w_rows.batch != true_h.size())
    throw ShapeError("sum_rate_loss: batch size mismatch");
  if (w_rows.batch == 0) throw ValidationError("sum_rate_loss: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < w_rows.batch; ++i) {
    const CMatrix& h = *true_h[i];
    if (2 * h.rows() * h.cols() != w_rows.features)
      throw ShapeError("sum_rate_loss: output width mismatch");
    CMatrix w = realvec_to_cmat(
        std::span<const double>(w_rows.row(i), w_rows.features), h.rows(),
        h.cols());
    total += detail::rate_and_grad(h, w, sigma2, 0.0, nullptr);
  }
  return -total / static_cast<double>(w_rows.batch);
}

/// Convenience form over (true H, predicted W) matrix pairs.
inline double sum_rate_loss(
    std::span<const std::pair<CMatrix, CMatrix>> batch, double sigma2) {
  if (batch.empty()) throw ValidationError("sum_rate_loss: empty batch");
  double total = 0.0;
  for (const auto& [h, w] : batch)
    total += detail::rate_and_grad(h, w, sigma2, 0.0, nullptr);
  return -total / static_cast<double>(batch.size());
}

/// Loss plus its gradient with respect to the precoder rows.
inline std::pair<double, Tensor> sum_rate_loss_grad(
    const Tensor& w_rows, std::span<const CMatrix* const> true_h,
    double sigma2) {
  if (w_rows.batch != true_h.size())
    throw ShapeError("sum_rate_loss_grad: batch size mismatch");
  if (w_rows.batch == 0)
    throw ValidationError("sum_rate_loss_grad: empty batch");
  Tensor grad(w_rows.batch, w_rows.features);
  const double inv_t = 1.0 / static_cast<double>(w_rows.batch);
  double total = 0.0;
  for (std::size_t i = 0; i < w_rows.batch; ++i) {
    const CMatrix& h = *true_h[i];
    CMatrix w = realvec_to_cmat(
        std::span<const double>(w_rows.row(i), w_rows.features), h.rows(),
        h.cols());
    total += detail::rate_and_grad(h, w, sigma2, -inv_t, grad.row(i));
  }
  return {-total / static_cast<double>(w_rows.batch), std::move(grad)};
}

// --- checkpoints -------------------------------------------------------------

struct TrainingMeta {
  std::uint64_t seed = 0;
  std::uint32_t epochs_run = 0;
  std::int64_t train_snr_millibels = 0;
  PnrSpec train_pnr;
  double best_val_sum_rate = 0.0;
  std::vector<double> lr_history;

  bool operator==(const TrainingMeta&) const = default;
};

struct Checkpoint {
  NetworkSpec spec;
  std::vector<double> trainable;
  std::vector<double> running;
  TrainingMeta meta;
};

inline constexpr char kCheckpointMagic[9] = "IPNETCK1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& c) {
  ByteWriter w;
  w.put_magic(kCheckpointMagic);
  w.put_u32(kCheckpointVersion);
  w.put_u8(static_cast<std::uint8_t>(c.spec.variant));
  w.put_u32(c.spec.m);
  w.put_u32(c.spec.k);
  w.put_i64(c.spec.pt_millibels);
  w.put_u32(static_cast<std::uint32_t>(c.spec.widths.size()));
  for (std::uint32_t width : c.spec.widths) w.put_u32(width);
  w.put_u64(c.meta.seed);
  w.put_u32(c.meta.epochs_run);
  w.put_i64(c.meta.train_snr_millibels);
  w.put_u8(c.meta.train_pnr.perfect ? 1 : 0);
  w.put_i64(c.meta.train_pnr.perfect ? 0 : c.meta.train_pnr.millidb);
  w.put_f64(c.meta.best_val_sum_rate);
  w.put_u32(static_cast<std::uint32_t>(c.meta.lr_history.size()));
  for (double lr : c.meta.lr_history) w.put_f64(lr);
  w.put_u64(c.trainable.size());
  for (double v : c.trainable) w.put_f64(v);
  w.put_u64(c.running.size());
  for (double v : c.running) w.put_f64(v);
  w.finish_with_crc();
  return w.bytes();
}

inline void save_checkpoint(const Checkpoint& c,
                            const std::filesystem::path& path) {
  write_file(path, serialize_checkpoint(c));
}

inline Checkpoint parse_checkpoint(std::span<const std::uint8_t> file) {
  auto payload = check_crc_trailer(file);
  ByteReader r(payload);
  char magic[8];
  r.get_magic(magic);
  if (std::string_view(magic, 8) != std::string_view(kCheckpointMagic, 8))
    throw FormatError("not a checkpoint file (bad magic)");
  std::uint32_t version = r.get_u32();
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(version));
  Checkpoint c;
  std::uint8_t variant = r.get_u8();
  if (variant > 2) throw FormatError("checkpoint: bad variant tag");
  c.spec.variant = static_cast<Variant>(variant);
  c.spec.m = r.get_u32();
  c.spec.k = r.get_u32();
  c.spec.pt_millibels = r.get_i64();
  std::uint32_t n_widths = r.get_u32();
  if (n_widths != 6) throw FormatError("checkpoint: bad width count");
  c.spec.widths.resize(n_widths);
  for (auto& width : c.spec.widths) width = r.get_u32();
  c.meta.seed = r.get_u64();
  c.meta.epochs_run = r.get_u32();
  c.meta.train_snr_millibels = r.get_i64();
  c.meta.train_pnr.perfect = r.get_u8() != 0;
  c.meta.train_pnr.millidb = r.get_i64();
  if (c.meta.train_pnr.perfect) c.meta.train_pnr.millidb = 0;
  c.meta.best_val_sum_rate = r.get_f64();
  std::uint32_t n_lr = r.get_u32();
  c.meta.lr_history.resize(n_lr);
  for (auto& lr : c.meta.lr_history) lr = r.get_f64();
  c.trainable.resize(r.get_u64());
  for (auto& v : c.trainable) v = r.get_f64();
  c.running.resize(r.get_u64());
  for (auto& v : c.running) v = r.get_f64();
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes");
  return c;
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto data = read_file(path);
  return parse_checkpoint(data);
}

/// Rebuilds the network a checkpoint describes and restores its state.
inline PrecoderNet net_from_checkpoint(const Checkpoint& c) {
  NetworkSpec expected = NetworkSpec::make(c.spec.variant, c.spec.m, c.spec.k,
                                           c.spec.pt_millibels);
  if (expected.widths != c.spec.widths)
    throw FormatError("checkpoint widths do not match its variant");
  PrecoderNet net(c.spec);
  ParamCounts counts = net.counts();
  if (c.trainable.size() != counts.trainable ||
      c.running.size() != counts.non_trainable)
    throw FormatError("checkpoint parameter blob size mismatch");
  net.import_state(c.trainable, c.running);
  return net;
}

/// One-shot inference from a checkpoint: augmentation (or raw
/// vectorization) -> forward in inference mode -> power normalization.
/// rho defaults to sigma^2 / P_T at the checkpoint's training SNR.
inline PrecoderMatrix infer(const Checkpoint& c, const CMatrix& h_input,
                            std::optional<double> rho = std::nullopt,
                            std::optional<double> p_t = std::nullopt) {
  PrecoderNet net = net_from_checkpoint(c);
  if (p_t) net.set_power_budget(*p_t);
  const double r = rho ? *rho : 1.0 / std::pow(10.0, static_cast<double>(
                                 c.meta.train_snr_millibels) / 1000.0);
  return net.infer_one(h_input, r);
}

}  // namespace ipnet
