#pragma once

// Link-level experiment harness: mean-sum-rate sweeps over SNR or PNR
// grids, generalization tests of fixed checkpoints across mismatched test
// conditions, QPSK bit-error-rate curves, and the multiuser
// multiple-receive-antenna single-stream extension with a
// maximum-eigenvector combiner.
//
// Reproducibility: point p of a sweep uses point_seed = stream_seed(seed, p);
// trial t draws its true channel from substream 2t and its estimation noise
// from substream 2t+1 of point_seed (BER symbol/noise streams start at
// substream 2*channels + t). Results are therefore independent of scheduling
// and identical across reruns.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ipnet/channel.hpp"
#include "ipnet/errors.hpp"
#include "ipnet/io.hpp"
#include "ipnet/linalg.hpp"
#include "ipnet/model.hpp"
#include "ipnet/precoding.hpp"
#include "ipnet/vectorize.hpp"

namespace ipnet {

// --- schemes -----------------------------------------------------------------

/// A precoding scheme under test: a closed-form baseline or a trained
/// network checkpoint.
struct Scheme {
  enum class Kind { kMmse, kZf, kMrt, kTaylorMmse, kNetwork };
  std::string name;
  Kind kind = Kind::kMmse;
  std::shared_ptr<Checkpoint> checkpoint;  // kNetwork only
  std::string checkpoint_path;             // for manifests; may be empty
};

inline Scheme scheme_mmse() { return {"mmse", Scheme::Kind::kMmse, nullptr, ""}; }
inline Scheme scheme_zf() { return {"zf", Scheme::Kind::kZf, nullptr, ""}; }
inline Scheme scheme_mrt() { return {"mrt", Scheme::Kind::kMrt, nullptr, ""}; }
inline Scheme scheme_taylor_mmse() {
  return {"taylor", Scheme::Kind::kTaylorMmse, nullptr, ""};
}
inline Scheme scheme_network(std::string name, Checkpoint ck,
                             std::string path = "") {
  return {std::move(name), Scheme::Kind::kNetwork,
          std::make_shared<Checkpoint>(std::move(ck)), std::move(path)};
}

// --- results -----------------------------------------------------------------

struct SweepPoint {
  double axis_db = 0.0;
  double mean = 0.0;
  double stderr_ = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t excluded = 0;  // BER: user-trials dropped for zero gain
};

struct SchemeCurve {
  std::string scheme;
  std::vector<SweepPoint> points;
};

struct SweepResult {
  std::string axis_name;    // "snr_db" | "pnr_db"
  std::string metric_name;  // "sum_rate" | "ber"
  std::uint64_t seed = 0;
  std::vector<SchemeCurve> curves;

  const SchemeCurve& curve(const std::string& name) const {
    for (const auto& c : curves)
      if (c.scheme == name) return c;
    throw ValidationError("no curve for scheme " + name);
  }
};

// --- configuration -----------------------------------------------------------

struct SweepConfig {
  std::uint32_t m = 4;
  std::uint32_t k = 4;
  std::string axis = "snr_db";  // snr_db | pnr_db
  std::vector<double> grid;
  std::uint64_t trials = 5000;
  std::uint64_t seed = 1;
  double sigma2 = 1.0;
  double fixed_snr_db = 10.0;                  // when axis == pnr_db
  PnrSpec fixed_pnr = PnrSpec::perfect_csi();  // when axis == snr_db
};

/// Draws the true channel of one trial from a per-point seed.
using ChannelGenerator =
    std::function<CMatrix(std::uint64_t point_seed, std::uint64_t trial)>;

inline ChannelGenerator rayleigh_generator(std::uint32_t m, std::uint32_t k) {
  return [m, k](std::uint64_t point_seed, std::uint64_t trial) {
    Xoshiro256pp rng(stream_seed(point_seed, 2 * trial));
    return detail::draw_channel(m, k, rng);
  };
}

namespace detail {

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
};

inline MeanStderr mean_stderr(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double var = xs.size() > 1 ? ss / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

/// Per-scheme precoder evaluation state; networks are built once per sweep.
class SchemeRunner {
 public:
  SchemeRunner(const Scheme& scheme, std::uint32_t m, std::uint32_t k)
      : scheme_(scheme) {
    if (scheme.kind == Scheme::Kind::kNetwork) {
      if (!scheme.checkpoint)
        throw ValidationError("network scheme without checkpoint: " +
                              scheme.name);
      if (scheme.checkpoint->spec.m != m || scheme.checkpoint->spec.k != k)
        throw ShapeError("checkpoint " + scheme.name +
                         " dimensions do not match the experiment");
      net_.emplace(net_from_checkpoint(*scheme.checkpoint));
    }
  }

  const std::string& name() const { return scheme_.name; }

  /// Precoders for a whole point, batched for network schemes.
  std::vector<CMatrix> precode_all(const std::vector<CMatrix>& est,
                                   const LinkConfig& link) {
    std::vector<CMatrix> ws;
    ws.reserve(est.size());
    switch (scheme_.kind) {
      case Scheme::Kind::kMmse:
        for (const CMatrix& h : est) ws.push_back(mmse_precode(h, link).w);
        break;
      case Scheme::Kind::kZf:
        for (const CMatrix& h : est)
          ws.push_back(zf_precode(h, link.power_budget).w);
        break;
      case Scheme::Kind::kMrt:
        for (const CMatrix& h : est)
          ws.push_back(mrt_precode(h, link.power_budget).w);
        break;
      case Scheme::Kind::kTaylorMmse:
        for (const CMatrix& h : est)
          ws.push_back(taylor_mmse_precode(h, link).w);
        break;
      case Scheme::Kind::kNetwork: {
        net_->set_power_budget(link.power_budget);
        const auto& spec = net_->spec();
        Tensor in(est.size(), spec.input_features());
        for (std::size_t t = 0; t < est.size(); ++t) {
          auto f = net_->input_features(est[t], link.rho);
          std::copy(f.begin(), f.end(), in.row(t));
        }
        Tensor out = net_->forward(in, Mode::kInference);
        for (std::size_t t = 0; t < est.size(); ++t)
          ws.push_back(realvec_to_cmat(
              std::span<const double>(out.row(t), out.features), spec.m,
              spec.k));
        break;
      }
    }
    return ws;
  }

 private:
  Scheme scheme_;
  std::optional<PrecoderNet> net_;
};

}  // namespace detail

// --- sum-rate sweeps ---------------------------------------------------------

inline SweepResult sweep_sum_rate(const std::vector<Scheme>& schemes,
                                  const SweepConfig& cfg,
                                  ChannelGenerator generator = nullptr) {
  if (cfg.grid.empty()) throw ValidationError("sweep: empty grid");
  if (cfg.trials == 0) throw ValidationError("sweep: zero trials");
  if (cfg.axis != "snr_db" && cfg.axis != "pnr_db")
    throw ValidationError("sweep: axis must be snr_db or pnr_db");
  if (!generator) generator = rayleigh_generator(cfg.m, cfg.k);

  std::vector<detail::SchemeRunner> runners;
  runners.reserve(schemes.size());
  for (const Scheme& s : schemes) runners.emplace_back(s, cfg.m, cfg.k);

  SweepResult result;
  result.axis_name = cfg.axis;
  result.metric_name = "sum_rate";
  result.seed = cfg.seed;
  result.curves.resize(schemes.size());
  for (std::size_t s = 0; s < schemes.size(); ++s)
    result.curves[s].scheme = schemes[s].name;

  for (std::size_t p = 0; p < cfg.grid.size(); ++p) {
    const std::uint64_t point_seed = stream_seed(cfg.seed, p);
    const double snr_db = cfg.axis == "snr_db" ? cfg.grid[p] : cfg.fixed_snr_db;
    const PnrSpec pnr = cfg.axis == "pnr_db" ? PnrSpec::from_db(cfg.grid[p])
                                             : cfg.fixed_pnr;
    const double p_t = std::pow(10.0, snr_db / 10.0) * cfg.sigma2;
    const LinkConfig link = LinkConfig::from_snr(p_t, cfg.sigma2);

    std::vector<CMatrix> true_h, est_h;
    true_h.reserve(cfg.trials);
    est_h.reserve(cfg.trials);
    for (std::uint64_t t = 0; t < cfg.trials; ++t) {
      true_h.push_back(generator(point_seed, t));
      est_h.push_back(pnr.perfect
                          ? true_h.back()
                          : lmmse_estimate(true_h.back(), pnr.linear(),
                                           stream_seed(point_seed, 2 * t + 1)));
    }

    for (std::size_t s = 0; s < runners.size(); ++s) {
      std::vector<CMatrix> ws = runners[s].precode_all(est_h, link);
      std::vector<double> rates(cfg.trials);
      for (std::uint64_t t = 0; t < cfg.trials; ++t)
        rates[t] = sum_rate(true_h[t], ws[t], cfg.sigma2);
      auto ms = detail::mean_stderr(rates);
      result.curves[s].points.push_back(
          {cfg.grid[p], ms.mean, ms.stderr_, cfg.trials, 0});
    }
  }
  return result;
}

/// Evaluates fixed checkpoints across a PNR grid without retraining. The
/// fixed SNR is taken from the network checkpoints' training metadata
/// (which must agree); with no network scheme, cfg.fixed_snr_db applies.
inline SweepResult generalization_test(const std::vector<Scheme>& schemes,
                                       const std::vector<double>& pnr_grid_db,
                                       SweepConfig cfg) {
  cfg.axis = "pnr_db";
  cfg.grid = pnr_grid_db;
  std::optional<std::int64_t> snr_mdb;
  for (const Scheme& s : schemes) {
    if (s.kind != Scheme::Kind::kNetwork) continue;
    const std::int64_t v = s.checkpoint->meta.train_snr_millibels;
    if (snr_mdb && *snr_mdb != v)
      throw ValidationError(
          "generalization_test: checkpoints trained at different SNRs");
    snr_mdb = v;
  }
  if (snr_mdb) cfg.fixed_snr_db = static_cast<double>(*snr_mdb) / 100.0;
  return sweep_sum_rate(schemes, cfg);
}

// --- QPSK bit error rate -----------------------------------------------------

struct BerConfig {
  std::uint32_t m = 4;
  std::uint32_t k = 4;
  std::vector<double> snr_grid_db;
  std::uint64_t channels = 200;
  std::uint64_t vectors_per_channel = 100;
  std::uint64_t seed = 1;
  double sigma2 = 1.0;  // 0 = noiseless
  PnrSpec pnr = PnrSpec::perfect_csi();
};

/// Gray-mapped QPSK downlink BER. Per trial the transmitter precodes with
/// the scheme under test; each user detects its own symbol after
/// compensating by the known effective gain h_k^H w_k. Bit decisions are
/// per-quadrature sign tests (two bits per symbol). User-trials whose
/// effective gain is numerically zero are excluded and counted.
inline SweepResult ber_qpsk(const std::vector<Scheme>& schemes,
                            const BerConfig& cfg,
                            ChannelGenerator generator = nullptr) {
  if (cfg.snr_grid_db.empty()) throw ValidationError("ber: empty grid");
  if (cfg.channels == 0 || cfg.vectors_per_channel == 0)
    throw ValidationError("ber: zero trial counts");
  if (cfg.sigma2 < 0.0) throw ValidationError("ber: negative noise variance");
  if (!generator) generator = rayleigh_generator(cfg.m, cfg.k);

  std::vector<detail::SchemeRunner> runners;
  runners.reserve(schemes.size());
  for (const Scheme& s : schemes) runners.emplace_back(s, cfg.m, cfg.k);

  SweepResult result;
  result.axis_name = "snr_db";
  result.metric_name = "ber";
  result.seed = cfg.seed;
  result.curves.resize(schemes.size());
  for (std::size_t s = 0; s < schemes.size(); ++s)
    result.curves[s].scheme = schemes[s].name;

  constexpr double inv_sqrt2 = 0.70710678118654752440;
  const double sigma = std::sqrt(cfg.sigma2);

  for (std::size_t p = 0; p < cfg.snr_grid_db.size(); ++p) {
    const std::uint64_t point_seed = stream_seed(cfg.seed, p);
    const double reference_noise = cfg.sigma2 > 0.0 ? cfg.sigma2 : 1.0;
    const double p_t =
        std::pow(10.0, cfg.snr_grid_db[p] / 10.0) * reference_noise;
    // rho needs a positive noise variance; noiseless runs use the ZF limit.
    const double rho = cfg.sigma2 > 0.0 ? cfg.sigma2 / p_t : 1e-12;
    const LinkConfig link = LinkConfig::with_rho(p_t, reference_noise, rho);

    std::vector<CMatrix> true_h, est_h;
    for (std::uint64_t t = 0; t < cfg.channels; ++t) {
      true_h.push_back(generator(point_seed, t));
      est_h.push_back(cfg.pnr.perfect
                          ? true_h.back()
                          : lmmse_estimate(true_h.back(), cfg.pnr.linear(),
                                           stream_seed(point_seed, 2 * t + 1)));
    }
    std::vector<std::vector<CMatrix>> ws(runners.size());
    for (std::size_t s = 0; s < runners.size(); ++s)
      ws[s] = runners[s].precode_all(est_h, link);

    std::vector<std::vector<double>> trial_ber(runners.size());
    std::vector<std::uint64_t> excluded(runners.size(), 0);

    std::vector<cplx> d(cfg.k), x(cfg.m), noise(cfg.k);
    std::vector<char> bits(2 * cfg.k);
    for (std::uint64_t t = 0; t < cfg.channels; ++t) {
      const CMatrix& h = true_h[t];
      // Effective gains per scheme/user; zero-gain users are excluded.
      std::vector<std::vector<cplx>> gains(runners.size());
      for (std::size_t s = 0; s < runners.size(); ++s) {
        gains[s].resize(cfg.k);
        for (std::uint32_t u = 0; u < cfg.k; ++u) {
          cplx g{};
          for (std::uint32_t i = 0; i < cfg.m; ++i)
            g += std::conj(h(i, u)) * ws[s][t](i, u);
          gains[s][u] = g;
        }
      }
      std::vector<std::uint64_t> errors(runners.size(), 0);
      std::vector<std::uint64_t> counted_bits(runners.size(), 0);
      Xoshiro256pp sym_rng(stream_seed(point_seed, 2 * cfg.channels + t));
      for (std::uint64_t v = 0; v < cfg.vectors_per_channel; ++v) {
        for (std::uint32_t u = 0; u < cfg.k; ++u) {
          bits[2 * u] = sym_rng.uniform01() < 0.5 ? 0 : 1;
          bits[2 * u + 1] = sym_rng.uniform01() < 0.5 ? 0 : 1;
          d[u] = cplx{(1.0 - 2.0 * bits[2 * u]) * inv_sqrt2,
                      (1.0 - 2.0 * bits[2 * u + 1]) * inv_sqrt2};
        }
        if (cfg.sigma2 > 0.0)
          for (std::uint32_t u = 0; u < cfg.k; ++u)
            noise[u] = sigma * sym_rng.cgaussian();
        else
          std::fill(noise.begin(), noise.end(), cplx{});
        for (std::size_t s = 0; s < runners.size(); ++s) {
          const CMatrix& w = ws[s][t];
          for (std::uint32_t i = 0; i < cfg.m; ++i) {
            cplx acc{};
            for (std::uint32_t u = 0; u < cfg.k; ++u) acc += w(i, u) * d[u];
            x[i] = acc;
          }
          for (std::uint32_t u = 0; u < cfg.k; ++u) {
            const cplx g = gains[s][u];
            if (std::abs(g) < 1e-12) {
              ++excluded[s];
              continue;
            }
            cplx y{};
            for (std::uint32_t i = 0; i < cfg.m; ++i)
              y += std::conj(h(i, u)) * x[i];
            y += noise[u];
            const cplx shat = y / g;
            const bool b0_hat = shat.real() < 0.0;
            const bool b1_hat = shat.imag() < 0.0;
            errors[s] += (b0_hat != (bits[2 * u] != 0)) ? 1u : 0u;
            errors[s] += (b1_hat != (bits[2 * u + 1] != 0)) ? 1u : 0u;
            counted_bits[s] += 2;
          }
        }
      }
      for (std::size_t s = 0; s < runners.size(); ++s)
        if (counted_bits[s] > 0)
          trial_ber[s].push_back(static_cast<double>(errors[s]) /
                                 static_cast<double>(counted_bits[s]));
    }

    for (std::size_t s = 0; s < runners.size(); ++s) {
      auto ms = detail::mean_stderr(trial_ber[s]);
      result.curves[s].points.push_back({cfg.snr_grid_db[p], ms.mean,
                                         ms.stderr_, trial_ber[s].size(),
                                         excluded[s]});
    }
  }
  return result;
}

// --- multi-antenna single-stream extension -----------------------------------

struct MultiAntennaScenario {
  std::uint32_t m = 4;  // BS antennas
  std::uint32_t k = 2;  // users
  std::uint32_t n = 2;  // receive antennas per user
};

/// Per-trial effective channel: user j's BS-side block A_j (M x N, one
/// CN(0,1) column per receive antenna) is combined with the unit-norm
/// maximum eigenvector u_j of A_j^H A_j; effective column j = A_j u_j.
/// With n = 1 this reduces exactly to the base Rayleigh generator.
inline ChannelGenerator effective_channel_generator(
    const MultiAntennaScenario& sc) {
  return [sc](std::uint64_t point_seed, std::uint64_t trial) {
    Xoshiro256pp rng(stream_seed(point_seed, 2 * trial));
    CMatrix h(sc.m, sc.k);
    for (std::uint32_t j = 0; j < sc.k; ++j) {
      CMatrix a = detail::draw_channel(sc.m, sc.n, rng);
      CMatrix u = max_eigenvector(matmul(hermitian(a), a));
      CMatrix col = matmul(a, u);
      for (std::uint32_t i = 0; i < sc.m; ++i) h(i, j) = col(i, 0);
    }
    return h;
  };
}

/// Sum-rate sweep on effective combined channels; any M x K scheme (closed
/// form or trained on effective channels) applies unchanged.
inline SweepResult multiantenna_single_stream(const MultiAntennaScenario& sc,
                                              const std::vector<Scheme>& schemes,
                                              SweepConfig cfg) {
  if (sc.n == 0) throw ValidationError("scenario: need >= 1 receive antenna");
  cfg.m = sc.m;
  cfg.k = sc.k;
  return sweep_sum_rate(schemes, cfg, effective_channel_generator(sc));
}

/// Effective-channel dataset for training spec-matched networks for the
/// multi-antenna scenario (perfect CSI).
inline Dataset generate_effective_dataset(const MultiAntennaScenario& sc,
                                          std::uint64_t count,
                                          std::uint64_t seed) {
  if (count == 0) throw ValidationError("sample count must be positive");
  Dataset d;
  d.m = sc.m;
  d.k = sc.k;
  d.seed = seed;
  d.pnr = PnrSpec::perfect_csi();
  d.split = SplitRanges::standard(count);
  auto gen = effective_channel_generator(sc);
  d.samples.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    // Matches the per-sample substream layout of generate_channels.
    Xoshiro256pp rng(stream_seed(seed, 2 * i));
    CMatrix h(sc.m, sc.k);
    for (std::uint32_t j = 0; j < sc.k; ++j) {
      CMatrix a = detail::draw_channel(sc.m, sc.n, rng);
      CMatrix u = max_eigenvector(matmul(hermitian(a), a));
      CMatrix col = matmul(a, u);
      for (std::uint32_t i2 = 0; i2 < sc.m; ++i2) h(i2, j) = col(i2, 0);
    }
    d.samples.push_back({h, h, PnrSpec::perfect_csi()});
  }
  return d;
}

// --- output files ------------------------------------------------------------

inline void write_results_csv(const SweepResult& r,
                              const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw IoError("cannot open for writing: " + path.string());
  std::fprintf(f, "scheme,axis_name,axis_db,metric_name,mean,stderr,trials,seed\n");
  for (const SchemeCurve& c : r.curves)
    for (const SweepPoint& pt : c.points)
      std::fprintf(f, "%s,%s,%.17g,%s,%.17g,%.17g,%llu,%llu\n",
                   c.scheme.c_str(), r.axis_name.c_str(), pt.axis_db,
                   r.metric_name.c_str(), pt.mean, pt.stderr_,
                   static_cast<unsigned long long>(pt.trials),
                   static_cast<unsigned long long>(r.seed));
  std::fclose(f);
}

/// Machine-readable run manifest: the fully-resolved configuration plus
/// content hashes of every checkpoint consumed and every file produced.
inline void write_run_manifest(const std::filesystem::path& path,
                               const nlohmann::json& config_echo,
                               const std::vector<Scheme>& schemes,
                               const std::vector<std::string>& output_files) {
  nlohmann::json manifest;
  manifest["config"] = config_echo;
  manifest["checkpoints"] = nlohmann::json::array();
  for (const Scheme& s : schemes) {
    if (s.kind != Scheme::Kind::kNetwork || s.checkpoint_path.empty()) continue;
    manifest["checkpoints"].push_back(
        {{"scheme", s.name},
         {"path", s.checkpoint_path},
         {"content_sha1", file_sha1(s.checkpoint_path)}});
  }
  manifest["outputs"] = nlohmann::json::array();
  for (const std::string& out : output_files) {
    manifest["outputs"].push_back(
        {{"path", out}, {"content_sha1", file_sha1(out)}});
  }
  const std::string text = manifest.dump(2) + "\n";
  write_file(path, std::span<const std::uint8_t>(
                       reinterpret_cast<const std::uint8_t*>(text.data()),
                       text.size()));
}

}  // namespace ipnet
