#pragma once

// Unsupervised training of the neural precoder: Adam over shuffled
// mini-batches of the negative-sum-rate loss, validation sum rate per epoch
// driving a reduce-on-plateau learning-rate schedule, best-validation
// checkpoint selection, and a per-epoch metrics trace.
//
// Substream layout of the master seed: stream 0 initializes the weights,
// stream e (e >= 1) shuffles the batches of epoch e. The network always
// consumes the dataset's estimated channels while the loss scores the
// emitted precoders against the true channels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ipnet/autodiff.hpp"
#include "ipnet/channel.hpp"
#include "ipnet/errors.hpp"
#include "ipnet/model.hpp"

namespace ipnet {

struct TrainConfig {
  std::uint32_t epochs = 100;
  std::uint32_t batch_size = 500;
  double lr0 = 0.01;
  double min_lr = 1e-6;  // stop once plateau reductions push lr below this
  double sigma2 = 1.0;   // noise variance, normalized to unity
  std::uint64_t seed = 1;
  bool deterministic = true;
  AdamConfig adam;
};

struct EpochMetrics {
  std::uint32_t epoch = 0;
  double lr = 0.0;
  double train_sum_rate = 0.0;
  double val_sum_rate = 0.0;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochMetrics> metrics;
};

namespace detail {

inline Tensor gather_rows(const Tensor& all, std::span<const std::uint64_t> idx) {
  Tensor t(idx.size(), all.features);
  for (std::size_t r = 0; r < idx.size(); ++r)
    std::copy(all.row(idx[r]), all.row(idx[r]) + all.features, t.row(r));
  return t;
}

inline void fisher_yates(std::vector<std::uint64_t>& v, Xoshiro256pp& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    // Unbiased bounded draw via rejection on the top 53 bits.
    const std::uint64_t bound = i;
    std::uint64_t j;
    const std::uint64_t limit = (~0ULL >> 11) / bound * bound;
    do {
      j = rng.next() >> 11;
    } while (j >= limit);
    std::swap(v[i - 1], v[j % bound]);
  }
}

/// Mean inference-mode sum rate over the given sample range.
inline double mean_sum_rate_on(PrecoderNet& net, const Tensor& features,
                               const Dataset& data, std::uint64_t begin,
                               std::uint64_t end, double sigma2) {
  if (end <= begin) throw ValidationError("empty evaluation range");
  std::vector<std::uint64_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  Tensor in = gather_rows(features, idx);
  Tensor out = net.forward(in, Mode::kInference);
  std::vector<const CMatrix*> hs(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i)
    hs[i] = &data.samples[idx[i]].true_channel;
  return -sum_rate_loss(out, hs, sigma2);
}

}  // namespace detail

inline TrainResult train(const NetworkSpec& spec, const Dataset& data,
                         const TrainConfig& cfg) {
  if (data.m != spec.m || data.k != spec.k)
    throw ShapeError("dataset dimensions do not match network spec");
  if (data.split.train_count() < 2)
    throw ValidationError("train: need at least 2 training samples");
  if (data.split.val_count() < 1)
    throw ValidationError("train: need a non-empty validation split");
  if (cfg.batch_size < 2)
    throw ValidationError("train: batch size must be at least 2");
  if (!(cfg.sigma2 > 0.0) || !(cfg.lr0 > 0.0))
    throw ValidationError("train: sigma2 and lr0 must be positive");

  PrecoderNet net(spec);
  net.init(stream_seed(cfg.seed, 0));
  const double p_t = spec.power_budget();
  const double rho = cfg.sigma2 / p_t;

  // Features are a fixed function of the estimated channels; build once.
  const std::uint64_t count = data.samples.size();
  Tensor features(count, spec.input_features());
  for (std::uint64_t i = 0; i < count; ++i) {
    auto f = net.input_features(data.samples[i].estimated_channel, rho);
    std::copy(f.begin(), f.end(), features.row(i));
  }

  Adam adam(net.params(), cfg.adam);
  PlateauScheduler sched(cfg.lr0);

  TrainResult result;
  double best_val = -std::numeric_limits<double>::infinity();
  std::vector<double> best_trainable, best_running;
  std::vector<double> lr_history;

  std::vector<std::uint64_t> order(data.split.train_count());
  std::iota(order.begin(), order.end(), 0);

  for (std::uint32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = sched.lr();
    Xoshiro256pp shuffle_rng(stream_seed(cfg.seed, epoch));
    detail::fisher_yates(order, shuffle_rng);

    double rate_sum = 0.0;
    std::uint64_t rate_count = 0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t n =
          std::min<std::size_t>(cfg.batch_size, order.size() - start);
      if (n < 2) break;  // batch-norm needs >= 2 samples
      std::span<const std::uint64_t> idx(order.data() + start, n);
      Tensor in = detail::gather_rows(features, idx);
      std::vector<const CMatrix*> hs(n);
      for (std::size_t i = 0; i < n; ++i)
        hs[i] = &data.samples[idx[i]].true_channel;
      net.zero_grads();
      Tensor out = net.forward(in, Mode::kTraining);
      auto [loss, grad] = sum_rate_loss_grad(out, hs, cfg.sigma2);
      if (!std::isfinite(loss)) throw NumericError("training loss is not finite");
      net.backward(grad);
      adam.step(lr);
      rate_sum += -loss * static_cast<double>(n);
      rate_count += n;
    }

    const double train_sr = rate_sum / static_cast<double>(rate_count);
    const double val_sr = detail::mean_sum_rate_on(
        net, features, data, data.split.train_end, data.split.val_end,
        cfg.sigma2);
    result.metrics.push_back({epoch, lr, train_sr, val_sr});
    lr_history.push_back(lr);

    if (val_sr > best_val) {
      best_val = val_sr;
      best_trainable = net.export_trainable();
      best_running = net.export_running();
    }
    if (sched.observe(val_sr) < cfg.min_lr) break;
  }

  Checkpoint best;
  best.spec = spec;
  best.trainable = std::move(best_trainable);
  best.running = std::move(best_running);
  best.meta.seed = cfg.seed;
  best.meta.epochs_run = static_cast<std::uint32_t>(result.metrics.size());
  best.meta.train_snr_millibels =
      std::llround(1000.0 * std::log10(p_t / cfg.sigma2));
  best.meta.train_pnr = data.pnr;
  best.meta.best_val_sum_rate = best_val;
  best.meta.lr_history = std::move(lr_history);
  result.best = std::move(best);
  return result;
}

inline void write_metrics_csv(const std::filesystem::path& path,
                              std::span<const EpochMetrics> metrics) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw IoError("cannot open for writing: " + path.string());
  std::fprintf(f, "epoch,lr,train_sum_rate,val_sum_rate\n");
  for (const EpochMetrics& m : metrics)
    std::fprintf(f, "%u,%.17g,%.17g,%.17g\n", m.epoch, m.lr, m.train_sum_rate,
                 m.val_sum_rate);
  std::fclose(f);
}

}  // namespace ipnet
