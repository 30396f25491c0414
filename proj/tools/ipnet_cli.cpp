// Command-line front end: dataset generation, training, evaluation and
// checkpoint inspection as reproducible, config-driven runs.
//
// Every command writes a <output>.manifest.json echoing its fully-resolved
// configuration and the content hashes of the files it consumed and
// produced. All dB quantities accept decimals and are converted to linear
// scale exactly once, at parse time. Exit code 0 means the run completed
// and every enabled assertion passed; failures emit a machine-readable
// JSON report on stderr.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ipnet/ipnet.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOpts {
  int threads = 0;
  bool deterministic = true;
  std::string outdir;
};

fs::path resolve_out(const GlobalOpts& g, const std::string& path) {
  fs::path p(path);
  if (p.is_absolute() || g.outdir.empty()) return p;
  return fs::path(g.outdir) / p;
}

void write_manifest_json(const fs::path& for_file, const json& j) {
  const std::string text = j.dump(2) + "\n";
  fs::path path = for_file;
  path += ".manifest.json";
  ipnet::write_file(path,
                    std::span<const std::uint8_t>(
                        reinterpret_cast<const std::uint8_t*>(text.data()),
                        text.size()));
}

std::vector<double> parse_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw ipnet::ValidationError("empty dB grid");
  return grid;
}

// --- gen ---------------------------------------------------------------------

struct GenOpts {
  std::uint32_t m = 4, k = 4;
  std::uint64_t count = 100000;
  std::uint64_t seed = 1;
  double pnr_db = 0.0;
  bool has_pnr = false;
  std::string out = "dataset.bin";
};

int run_gen(const GlobalOpts& g, const GenOpts& o) {
  const ipnet::PnrSpec pnr = o.has_pnr ? ipnet::PnrSpec::from_db(o.pnr_db)
                                       : ipnet::PnrSpec::perfect_csi();
  ipnet::Dataset d = ipnet::generate_dataset(o.m, o.k, o.count, o.seed, pnr);
  const fs::path out = resolve_out(g, o.out);
  ipnet::save_dataset(d, out);
  json echo = {{"command", "gen"},
               {"m", o.m},
               {"k", o.k},
               {"count", o.count},
               {"seed", o.seed},
               {"pnr", pnr.perfect ? json("perfect") : json(pnr.db())},
               {"out", out.string()}};
  json manifest = {{"config", echo},
                   {"outputs",
                    json::array({{{"path", out.string()},
                                  {"content_sha1", ipnet::file_sha1(out)}}})}};
  write_manifest_json(out, manifest);
  std::printf("wrote %s: %llu samples of %ux%u (seed %llu, %s)\n",
              out.string().c_str(), (unsigned long long)o.count, o.m, o.k,
              (unsigned long long)o.seed,
              pnr.perfect ? "perfect CSI"
                          : ("PNR " + std::to_string(pnr.db()) + " dB").c_str());
  return 0;
}

// --- train ---------------------------------------------------------------------

struct TrainOpts {
  std::string data;
  std::string variant = "ipnet";
  std::uint32_t epochs = 100;
  std::uint32_t batch = 500;
  double lr = 0.01;
  double snr_db = 10.0;
  std::uint64_t seed = 1;
  std::string out = "model.ckpt";
  std::string metrics = "";
};

int run_train(const GlobalOpts& g, const TrainOpts& o) {
  ipnet::Dataset data = ipnet::load_dataset(o.data);
  ipnet::NetworkSpec spec =
      ipnet::NetworkSpec::make(ipnet::variant_from_name(o.variant), data.m,
                               data.k, ipnet::millibels_from_db(o.snr_db));
  ipnet::TrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch;
  cfg.lr0 = o.lr;
  cfg.seed = o.seed;
  cfg.deterministic = g.deterministic;

  ipnet::PrecoderNet probe(spec);
  const ipnet::ParamCounts counts = probe.counts();
  std::printf("training %s on %s: %llu samples, %llu trainable / %llu "
              "non-trainable parameters\n",
              o.variant.c_str(), o.data.c_str(),
              (unsigned long long)data.samples.size(),
              (unsigned long long)counts.trainable,
              (unsigned long long)counts.non_trainable);

  ipnet::TrainResult r = ipnet::train(spec, data, cfg);
  const fs::path out = resolve_out(g, o.out);
  ipnet::save_checkpoint(r.best, out);

  const fs::path metrics_path =
      o.metrics.empty() ? fs::path(out).replace_extension(".metrics.csv")
                        : resolve_out(g, o.metrics);
  ipnet::write_metrics_csv(metrics_path, r.metrics);

  json echo = {{"command", "train"},   {"data", o.data},
               {"variant", o.variant}, {"epochs", o.epochs},
               {"batch", o.batch},     {"lr", o.lr},
               {"snr_db", o.snr_db},   {"seed", o.seed},
               {"out", out.string()},  {"metrics", metrics_path.string()}};
  json manifest = {
      {"config", echo},
      {"parameters",
       {{"total", counts.total},
        {"trainable", counts.trainable},
        {"non_trainable", counts.non_trainable}}},
      {"training",
       {{"epochs_run", r.best.meta.epochs_run},
        {"best_val_sum_rate", r.best.meta.best_val_sum_rate}}},
      {"inputs",
       json::array({{{"path", o.data},
                     {"content_sha1", ipnet::file_sha1(o.data)}}})},
      {"outputs",
       json::array({{{"path", out.string()},
                     {"content_sha1", ipnet::file_sha1(out)}},
                    {{"path", metrics_path.string()},
                     {"content_sha1", ipnet::file_sha1(metrics_path)}}})}};
  write_manifest_json(out, manifest);
  std::printf("best validation sum rate %.4f after %u epochs -> %s\n",
              r.best.meta.best_val_sum_rate, r.best.meta.epochs_run,
              out.string().c_str());
  return 0;
}

// --- eval --------------------------------------------------------------------

struct EvalOpts {
  std::string exp = "sumrate-snr";
  std::vector<std::string> schemes = {"mmse"};
  std::vector<std::string> checkpoints;  // name=path
  std::vector<double> grid;
  std::uint64_t trials = 5000;
  std::uint64_t channels = 200;
  std::uint64_t vectors = 100;
  std::uint64_t seed = 1;
  double snr_db = 10.0;
  double pnr_db = 0.0;
  bool has_pnr = false;
  bool noiseless = false;
  double train_pnr_db = 0.0;
  bool has_train_pnr = false;
  std::uint32_t m = 4, k = 4, n = 2;
  bool assert_order = false;
  std::string out = "results.csv";
};

std::vector<ipnet::Scheme> build_schemes(const EvalOpts& o) {
  std::vector<ipnet::Scheme> schemes;
  for (const std::string& s : o.schemes) {
    if (s == "mmse")
      schemes.push_back(ipnet::scheme_mmse());
    else if (s == "zf")
      schemes.push_back(ipnet::scheme_zf());
    else if (s == "mrt")
      schemes.push_back(ipnet::scheme_mrt());
    else if (s == "taylor")
      schemes.push_back(ipnet::scheme_taylor_mmse());
    else
      throw ipnet::ValidationError(
          "unknown scheme '" + s +
          "' (expected mmse | zf | mrt | taylor; networks via --checkpoint)");
  }
  for (const std::string& spec : o.checkpoints) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos)
      throw ipnet::ValidationError("--checkpoint expects name=path, got " +
                                   spec);
    const std::string name = spec.substr(0, eq);
    const std::string path = spec.substr(eq + 1);
    schemes.push_back(
        ipnet::scheme_network(name, ipnet::load_checkpoint(path), path));
  }
  if (schemes.empty()) throw ipnet::ValidationError("no schemes selected");
  return schemes;
}

int run_eval(const GlobalOpts& g, const EvalOpts& o) {
  std::vector<ipnet::Scheme> schemes = build_schemes(o);
  const fs::path out = resolve_out(g, o.out);

  json echo = {{"command", "eval"},     {"experiment", o.exp},
               {"schemes", o.schemes},  {"checkpoints", o.checkpoints},
               {"grid", o.grid},        {"trials", o.trials},
               {"seed", o.seed},        {"snr_db", o.snr_db},
               {"m", o.m},              {"k", o.k},
               {"out", out.string()}};

  ipnet::SweepResult result;
  std::vector<std::string> assertion_failures;

  if (o.exp == "sumrate-snr" || o.exp == "sumrate-pnr") {
    ipnet::SweepConfig cfg;
    cfg.m = o.m;
    cfg.k = o.k;
    cfg.axis = o.exp == "sumrate-snr" ? "snr_db" : "pnr_db";
    cfg.grid = parse_grid(o.grid);
    cfg.trials = o.trials;
    cfg.seed = o.seed;
    cfg.fixed_snr_db = o.snr_db;
    if (o.has_pnr) cfg.fixed_pnr = ipnet::PnrSpec::from_db(o.pnr_db);
    result = ipnet::sweep_sum_rate(schemes, cfg);
  } else if (o.exp == "generalization") {
    ipnet::SweepConfig cfg;
    cfg.m = o.m;
    cfg.k = o.k;
    cfg.trials = o.trials;
    cfg.seed = o.seed;
    cfg.fixed_snr_db = o.snr_db;
    if (o.has_train_pnr) {
      const ipnet::PnrSpec want = ipnet::PnrSpec::from_db(o.train_pnr_db);
      for (const auto& s : schemes)
        if (s.kind == ipnet::Scheme::Kind::kNetwork &&
            !(s.checkpoint->meta.train_pnr == want))
          throw ipnet::ValidationError(
              "checkpoint " + s.name + " was not trained at PNR " +
              std::to_string(o.train_pnr_db) + " dB");
      echo["train_pnr_db"] = o.train_pnr_db;
    }
    result = ipnet::generalization_test(schemes, parse_grid(o.grid), cfg);
    // Ordering summary between the first two network schemes (e.g. the
    // augmented-input network vs the raw-input baseline).
    std::vector<const ipnet::SchemeCurve*> nets;
    for (const auto& s : schemes)
      if (s.kind == ipnet::Scheme::Kind::kNetwork)
        nets.push_back(&result.curve(s.name));
    if (nets.size() >= 2) {
      std::printf("ordering summary (%s vs %s):\n", nets[0]->scheme.c_str(),
                  nets[1]->scheme.c_str());
      for (std::size_t p = 0; p < nets[0]->points.size(); ++p) {
        const auto& a = nets[0]->points[p];
        const auto& b = nets[1]->points[p];
        const bool ok = a.mean >= b.mean - 2.0 * (a.stderr_ + b.stderr_);
        std::printf("  %6.1f dB: %.4f vs %.4f  %s\n", a.axis_db, a.mean,
                    b.mean, ok ? "ok" : "VIOLATED");
        if (!ok)
          assertion_failures.push_back(
              nets[0]->scheme + " < " + nets[1]->scheme + " at " +
              std::to_string(a.axis_db) + " dB");
      }
    }
  } else if (o.exp == "ber") {
    ipnet::BerConfig cfg;
    cfg.m = o.m;
    cfg.k = o.k;
    cfg.snr_grid_db = parse_grid(o.grid);
    cfg.channels = o.channels;
    cfg.vectors_per_channel = o.vectors;
    cfg.seed = o.seed;
    cfg.sigma2 = o.noiseless ? 0.0 : 1.0;
    if (o.has_pnr) cfg.pnr = ipnet::PnrSpec::from_db(o.pnr_db);
    echo["channels"] = o.channels;
    echo["vectors"] = o.vectors;
    echo["noiseless"] = o.noiseless;
    result = ipnet::ber_qpsk(schemes, cfg);
  } else if (o.exp == "multiantenna") {
    ipnet::MultiAntennaScenario sc{o.m, o.k, o.n};
    ipnet::SweepConfig cfg;
    cfg.trials = o.trials;
    cfg.seed = o.seed;
    cfg.axis = "snr_db";
    cfg.grid = parse_grid(o.grid);
    echo["n"] = o.n;
    result = ipnet::multiantenna_single_stream(sc, schemes, cfg);
  } else {
    throw ipnet::ValidationError(
        "unknown experiment '" + o.exp +
        "' (sumrate-snr | sumrate-pnr | generalization | ber | multiantenna)");
  }

  ipnet::write_results_csv(result, out);
  fs::path manifest_path = out;
  manifest_path += ".manifest.json";
  ipnet::write_run_manifest(manifest_path, echo, schemes, {out.string()});
  std::printf("wrote %s (%zu schemes x %zu points)\n", out.string().c_str(),
              result.curves.size(),
              result.curves.empty() ? 0 : result.curves[0].points.size());

  if (!assertion_failures.empty() && o.assert_order) {
    json report = {{"failed_assertions", assertion_failures}};
    std::fprintf(stderr, "%s\n", report.dump().c_str());
    return 2;
  }
  return 0;
}

// --- inspect -------------------------------------------------------------------

int run_inspect(const std::string& path) {
  ipnet::Checkpoint c = ipnet::load_checkpoint(path);
  ipnet::PrecoderNet net(c.spec);
  const ipnet::ParamCounts counts = net.counts();
  json j = {
      {"path", path},
      {"content_sha1", ipnet::file_sha1(path)},
      {"variant", ipnet::variant_name(c.spec.variant)},
      {"m", c.spec.m},
      {"k", c.spec.k},
      {"power_budget", c.spec.power_budget()},
      {"widths", c.spec.widths},
      {"parameters",
       {{"total", counts.total},
        {"trainable", counts.trainable},
        {"non_trainable", counts.non_trainable}}},
      {"training",
       {{"seed", c.meta.seed},
        {"epochs_run", c.meta.epochs_run},
        {"snr_db", static_cast<double>(c.meta.train_snr_millibels) / 100.0},
        {"pnr", c.meta.train_pnr.perfect ? json("perfect")
                                         : json(c.meta.train_pnr.db())},
        {"best_val_sum_rate", c.meta.best_val_sum_rate},
        {"lr_history", c.meta.lr_history}}}};
  std::printf("%s\n", j.dump(2).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"iPNet neural precoder toolkit"};
  app.set_config("--config", "", "Config file (INI, one section per command)");
  app.allow_config_extras(false);
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--threads", g.threads, "Worker thread cap (0 = hardware)");
  app.add_flag("--deterministic,!--no-deterministic", g.deterministic,
               "Force ordered reductions (default on)");
  app.add_option("--outdir", g.outdir, "Directory for relative output paths")
      ->envname("IPNET_OUTDIR");

  GenOpts gen;
  CLI::App* cgen = app.add_subcommand("gen", "Generate a channel dataset");
  cgen->add_option("--m", gen.m, "BS antennas")->check(CLI::PositiveNumber);
  cgen->add_option("--k", gen.k, "Users")->check(CLI::PositiveNumber);
  cgen->add_option("--count", gen.count, "Sample count")
      ->check(CLI::PositiveNumber);
  cgen->add_option("--seed", gen.seed, "Master seed");
  cgen->add_option("--pnr", gen.pnr_db, "Pilot-to-noise ratio in dB")
      ->trigger_on_parse();
  cgen->add_option("--out", gen.out, "Output dataset file");

  TrainOpts tr;
  CLI::App* ctrain = app.add_subcommand("train", "Train a precoder network");
  ctrain->add_option("--data", tr.data, "Dataset file")->required();
  ctrain->add_option("--variant", tr.variant,
                     "ipnet | ipnet-half | blackbox");
  ctrain->add_option("--epochs", tr.epochs, "Epoch cap")
      ->check(CLI::PositiveNumber);
  ctrain->add_option("--batch", tr.batch, "Batch size");
  ctrain->add_option("--lr", tr.lr, "Initial learning rate");
  ctrain->add_option("--snr", tr.snr_db, "Training SNR in dB");
  ctrain->add_option("--seed", tr.seed, "Master seed");
  ctrain->add_option("--out", tr.out, "Checkpoint file");
  ctrain->add_option("--metrics", tr.metrics, "Metrics CSV path");

  EvalOpts ev;
  CLI::App* ceval = app.add_subcommand("eval", "Run an experiment");
  ceval->add_option("--exp", ev.exp,
                    "sumrate-snr | sumrate-pnr | generalization | ber | "
                    "multiantenna");
  ceval->add_option("--schemes", ev.schemes,
                    "Closed-form schemes (mmse,zf,mrt,taylor)")
      ->delimiter(',');
  ceval->add_option("--checkpoint", ev.checkpoints,
                    "Network scheme as name=path (repeatable)");
  ceval->add_option("--grid", ev.grid, "dB grid points")->delimiter(',');
  ceval->add_option("--trials", ev.trials, "Channels per grid point");
  ceval->add_option("--channels", ev.channels, "BER: channels per point");
  ceval->add_option("--vectors", ev.vectors, "BER: symbol vectors per channel");
  ceval->add_option("--seed", ev.seed, "Master seed");
  ceval->add_option("--snr", ev.snr_db, "Fixed SNR in dB (PNR sweeps)");
  ceval->add_option("--pnr", ev.pnr_db, "Fixed PNR in dB (default perfect)");
  ceval->add_flag("--noiseless", ev.noiseless, "BER: zero noise variance");
  ceval->add_option("--train-pnr", ev.train_pnr_db,
                    "Assert checkpoints were trained at this PNR (dB)");
  ceval->add_option("--m", ev.m, "BS antennas");
  ceval->add_option("--k", ev.k, "Users");
  ceval->add_option("--n", ev.n, "Receive antennas per user (multiantenna)");
  ceval->add_flag("--assert", ev.assert_order,
                  "Nonzero exit when ordering assertions fail");
  ceval->add_option("--out", ev.out, "Results CSV path");

  std::string inspect_path;
  CLI::App* cinspect =
      app.add_subcommand("inspect", "Print checkpoint metadata");
  cinspect->add_option("--ckpt", inspect_path, "Checkpoint file")->required();

  CLI11_PARSE(app, argc, argv);

  ev.has_pnr = ceval->count("--pnr") > 0;
  ev.has_train_pnr = ceval->count("--train-pnr") > 0;
  gen.has_pnr = cgen->count("--pnr") > 0;

  const int threads = g.threads > 0
                          ? g.threads
                          : static_cast<int>(std::thread::hardware_concurrency());
  ipnet::set_threads(threads);

  try {
    if (cgen->parsed()) return run_gen(g, gen);
    if (ctrain->parsed()) return run_train(g, tr);
    if (ceval->parsed()) return run_eval(g, ev);
    if (cinspect->parsed()) return run_inspect(inspect_path);
  } catch (const ipnet::Error& e) {
    json err = {{"error", "ipnet"}, {"message", e.what()}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 1;
  } catch (const std::exception& e) {
    json err = {{"error", "internal"}, {"message", e.what()}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 1;
  }
  return 0;
}
