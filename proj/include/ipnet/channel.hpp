#pragma once

// Channel simulation: i.i.d. Rayleigh downlink channels, scalar LMMSE
// channel estimates at a given pilot-to-noise ratio, and a seeded,
// bit-reproducible dataset container with on-disk persistence.
//
// Sample i of a dataset draws its true channel from the substream
// stream_seed(seed, 2*i) and its estimation noise from stream_seed(seed,
// 2*i+1), so regeneration is independent of iteration or thread order.
// Matrix entries are drawn column by column (one user channel vector at a
// time).

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ipnet/errors.hpp"
#include "ipnet/io.hpp"
#include "ipnet/linalg.hpp"
#include "ipnet/rng.hpp"

namespace ipnet {

/// Pilot-to-noise ratio: either the perfect-CSI sentinel or a dB value
/// canonicalized to milli-dB so the on-disk form round-trips exactly.
struct PnrSpec {
  bool perfect = true;
  std::int64_t millidb = 0;

  static PnrSpec perfect_csi() { return {}; }

  static PnrSpec from_db(double db) {
    if (!std::isfinite(db)) throw ValidationError("PNR dB must be finite");
    PnrSpec p;
    p.perfect = false;
    p.millidb = std::llround(db * 1000.0);
    return p;
  }

  double db() const { return static_cast<double>(millidb) / 1000.0; }
  double linear() const { return std::pow(10.0, db() / 10.0); }

  bool operator==(const PnrSpec&) const = default;
};

struct ChannelSample {
  CMatrix true_channel;
  CMatrix estimated_channel;
  PnrSpec pnr;
};

/// Index ranges [0,train_end), [train_end,val_end), [val_end,count).
struct SplitRanges {
  std::uint64_t train_end = 0;
  std::uint64_t val_end = 0;
  std::uint64_t count = 0;

  std::uint64_t train_count() const { return train_end; }
  std::uint64_t val_count() const { return val_end - train_end; }
  std::uint64_t test_count() const { return count - val_end; }

  /// 90% train / 5% validation / remainder test.
  static SplitRanges standard(std::uint64_t count) {
    SplitRanges s;
    s.count = count;
    s.train_end = count * 90 / 100;
    s.val_end = s.train_end + count * 5 / 100;
    return s;
  }

  bool operator==(const SplitRanges&) const = default;
};

struct Dataset {
  std::uint32_t m = 0;
  std::uint32_t k = 0;
  std::uint64_t seed = 0;
  PnrSpec pnr;
  SplitRanges split;
  std::vector<ChannelSample> samples;
};

namespace detail {
/// Fills an m x k matrix with i.i.d. CN(0,1) entries, column-major order.
inline CMatrix draw_channel(std::size_t m, std::size_t k, Xoshiro256pp& rng) {
  CMatrix h(m, k);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < m; ++i) h(i, j) = rng.cgaussian();
  return h;
}
}  // namespace detail

/// Scalar LMMSE estimate of a unit-variance Rayleigh channel observed
/// through one unit-power pilot at PNR gamma:
///   Hhat = gamma/(1+gamma) * (H + N/sqrt(gamma)),  N ~ i.i.d. CN(0,1).
inline CMatrix lmmse_estimate(const CMatrix& h, double pnr_linear,
                              std::uint64_t noise_seed) {
  if (!(pnr_linear > 0.0))
    throw ValidationError("lmmse_estimate: PNR must be positive");
  Xoshiro256pp rng(noise_seed);
  const double shrink = pnr_linear / (1.0 + pnr_linear);
  const double noise_scale = 1.0 / std::sqrt(pnr_linear);
  CMatrix est(h.rows(), h.cols());
  for (std::size_t j = 0; j < h.cols(); ++j)
    for (std::size_t i = 0; i < h.rows(); ++i)
      est(i, j) = shrink * (h(i, j) + noise_scale * rng.cgaussian());
  return est;
}

/// Generates `count` true channels (estimates set equal: perfect CSI).
inline Dataset generate_channels(std::uint32_t m, std::uint32_t k,
                                 std::uint64_t count, std::uint64_t seed) {
  if (m == 0 || k == 0) throw ValidationError("dimensions must be positive");
  if (count == 0) throw ValidationError("sample count must be positive");
  Dataset d;
  d.m = m;
  d.k = k;
  d.seed = seed;
  d.pnr = PnrSpec::perfect_csi();
  d.split = SplitRanges::standard(count);
  d.samples.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Xoshiro256pp rng(stream_seed(seed, 2 * i));
    CMatrix h = detail::draw_channel(m, k, rng);
    d.samples.push_back({h, h, PnrSpec::perfect_csi()});
  }
  return d;
}

/// Generates channels plus LMMSE estimates at the given PNR (or perfect CSI).
inline Dataset generate_dataset(std::uint32_t m, std::uint32_t k,
                                std::uint64_t count, std::uint64_t seed,
                                PnrSpec pnr) {
  Dataset d = generate_channels(m, k, count, seed);
  if (pnr.perfect) return d;
  d.pnr = pnr;
  const double gamma = pnr.linear();
  for (std::uint64_t i = 0; i < count; ++i) {
    d.samples[i].pnr = pnr;
    d.samples[i].estimated_channel =
        lmmse_estimate(d.samples[i].true_channel, gamma,
                       stream_seed(seed, 2 * i + 1));
  }
  return d;
}

// --- persistence -------------------------------------------------------------
//
// Layout (all little-endian):
//   magic "IPNETDS1" | u32 version | u32 m | u32 k | u64 count | u64 seed
//   | u8 perfect_flag | i64 pnr_millidb | u64 train_end | u64 val_end
//   | per sample: true channel then estimate, each entry as (re,im) f64
//     in row-major storage order
//   | u64 CRC-64 over all preceding bytes

inline constexpr char kDatasetMagic[9] = "IPNETDS1";
inline constexpr std::uint32_t kDatasetVersion = 1;

inline std::vector<std::uint8_t> serialize_dataset(const Dataset& d) {
  ByteWriter w;
  w.put_magic(kDatasetMagic);
  w.put_u32(kDatasetVersion);
  w.put_u32(d.m);
  w.put_u32(d.k);
  w.put_u64(d.samples.size());
  w.put_u64(d.seed);
  w.put_u8(d.pnr.perfect ? 1 : 0);
  w.put_i64(d.pnr.perfect ? 0 : d.pnr.millidb);
  w.put_u64(d.split.train_end);
  w.put_u64(d.split.val_end);
  for (const ChannelSample& s : d.samples) {
    for (const cplx& v : s.true_channel.entries()) {
      w.put_f64(v.real());
      w.put_f64(v.imag());
    }
    for (const cplx& v : s.estimated_channel.entries()) {
      w.put_f64(v.real());
      w.put_f64(v.imag());
    }
  }
  w.finish_with_crc();
  return w.bytes();
}

inline void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  write_file(path, serialize_dataset(d));
}

inline Dataset parse_dataset(std::span<const std::uint8_t> file) {
  auto payload = check_crc_trailer(file);
  ByteReader r(payload);
  char magic[8];
  r.get_magic(magic);
  if (std::string_view(magic, 8) != std::string_view(kDatasetMagic, 8))
    throw FormatError("not a dataset file (bad magic)");
  std::uint32_t version = r.get_u32();
  if (version != kDatasetVersion)
    throw FormatError("unsupported dataset version " + std::to_string(version));
  Dataset d;
  d.m = r.get_u32();
  d.k = r.get_u32();
  std::uint64_t count = r.get_u64();
  d.seed = r.get_u64();
  d.pnr.perfect = r.get_u8() != 0;
  d.pnr.millidb = r.get_i64();
  if (d.pnr.perfect) d.pnr.millidb = 0;
  d.split.count = count;
  d.split.train_end = r.get_u64();
  d.split.val_end = r.get_u64();
  if (d.m == 0 || d.k == 0) throw FormatError("dataset header: zero dims");
  if (d.split.train_end > d.split.val_end || d.split.val_end > count)
    throw FormatError("dataset header: invalid split ranges");
  const std::size_t entries = std::size_t{d.m} * d.k;
  d.samples.reserve(count);
  for (std::uint64_t s = 0; s < count; ++s) {
    std::vector<cplx> te(entries), ee(entries);
    for (auto& v : te) {
      double re = r.get_f64();
      double im = r.get_f64();
      v = {re, im};
    }
    for (auto& v : ee) {
      double re = r.get_f64();
      double im = r.get_f64();
      v = {re, im};
    }
    d.samples.push_back({CMatrix(d.m, d.k, std::move(te)),
                         CMatrix(d.m, d.k, std::move(ee)), d.pnr});
  }
  if (r.remaining() != 0) throw FormatError("dataset file: trailing bytes");
  return d;
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  auto data = read_file(path);
  return parse_dataset(data);
}

}  // namespace ipnet
