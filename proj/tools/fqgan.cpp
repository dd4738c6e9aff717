// fqgan command-line entry point.
//
// Exit codes: 0 success, 1 internal error, 2 configuration error, 3 divergence,
// 4 I/O error.

#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fqgan/config.hpp"
#include "fqgan/harness.hpp"
#include "fqgan/io.hpp"
#include "fqgan/metrics.hpp"

namespace {

using namespace fqgan;

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kDivergence = 3;
constexpr int kIoError = 4;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "key=value config file (defaults apply to missing keys)");
  cmd->add_option("-s,--set", c.overrides, "override one key, e.g. --set codebook_bits=2")
      ->type_name("KEY=VALUE");
}

TrainConfig resolve(const Common& c) {
  TrainConfig config = c.config_path.empty() ? TrainConfig{} : load_config(c.config_path);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    apply_setting(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return config;
}

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const auto v = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<T>(v));
    } catch (const std::logic_error&) {
      throw ConfigError(std::string("bad ") + what + " '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError(std::string("empty ") + what + " list");
  return out;
}

std::vector<std::uint64_t> seed_list(const std::string& seeds, std::size_t count) {
  if (!seeds.empty()) return parse_list<std::uint64_t>(seeds, "seed");
  std::vector<std::uint64_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = i;
  return out;
}

void print_record(const RunRecord& r) {
  std::printf("iter %zu  modes %zu  hq %.3f  frechet %.4g  feature_mmd %.4g  d %.4f  g %.4f%s\n",
              r.iteration, r.modes_covered, r.high_quality_fraction, r.frechet, r.feature_mmd, r.d_loss,
              r.g_loss, r.diverged ? "  DIVERGED" : "");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature-quantized GAN on low-dimensional data"};
  app.require_subcommand(1);

  Common train_opts;
  std::string train_out = "run", resume;
  std::size_t stop_after = 0;
  bool keep = false;
  auto* train = app.add_subcommand("train", "train one run");
  add_common(train, train_opts);
  train->add_option("-o,--out", train_out, "output directory")->capture_default_str();
  train->add_option("--resume", resume, "continue from a checkpoint file");
  train->add_option("--stop-after", stop_after, "stop after this iteration (0: run to the end)");
  train->add_flag("--keep-checkpoints", keep, "keep every checkpoint, not only the latest");

  Common sweep_opts;
  std::string sweep_out = "sweep", axis = "none", values, sweep_seeds;
  std::size_t sweep_seed_count = 1, sweep_jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "grid sweep over one axis and several seeds");
  add_common(sweep, sweep_opts);
  sweep->add_option("-o,--out", sweep_out, "output directory")->capture_default_str();
  sweep->add_option("--axis", axis, "none | P | lambda | alpha | fq_position")->capture_default_str();
  sweep->add_option("--values", values, "comma-separated axis values");
  sweep->add_option("--seeds", sweep_seeds, "comma-separated seeds (default 0..N-1)");
  sweep->add_option("-n,--num-seeds", sweep_seed_count, "seed count when --seeds is absent")->capture_default_str();
  sweep->add_option("-j,--jobs", sweep_jobs, "parallel runs")->capture_default_str();

  Common cmp_opts;
  std::string cmp_out = "compare", cmp_seeds, bits;
  std::size_t cmp_seed_count = 5, cmp_jobs = 1;
  auto* compare = app.add_subcommand("compare", "paired FQ vs plain GAN runs");
  add_common(compare, cmp_opts);
  compare->add_option("-o,--out", cmp_out, "output directory")->capture_default_str();
  compare->add_option("--seeds", cmp_seeds, "comma-separated seeds (default 0..N-1)");
  compare->add_option("-n,--num-seeds", cmp_seed_count, "seed count when --seeds is absent")->capture_default_str();
  compare->add_option("--bits", bits, "comma-separated codebook_bits arms (default: the config's)");
  compare->add_option("-j,--jobs", cmp_jobs, "parallel runs")->capture_default_str();

  std::string eval_ckpt;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint and print its metrics row");
  eval->add_option("checkpoint", eval_ckpt, "checkpoint file")->required();

  std::string dump_ckpt;
  std::size_t dump_layer = 0;
  auto* dump = app.add_subcommand("dump-codebook", "print the codebook record(s) of a checkpoint");
  dump->add_option("checkpoint", dump_ckpt, "checkpoint file")->required();
  dump->add_option("--layer", dump_layer, "hidden layer of the FQ module (0: all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*train) {
      RunOptions options{.out_dir = train_out, .keep_checkpoints = keep};
      TrainConfig config;
      if (!resume.empty()) options.resume = resume;
      else config = resolve(train_opts);
      if (stop_after > 0) options.stop_after = stop_after;
      const RunResult r = run_training(config, options);
      if (!r.records.empty()) print_record(r.records.back());
      return r.summary.diverged ? kDivergence : kOk;
    }
    if (*sweep) {
      Experiment e;
      e.config = resolve(sweep_opts);
      e.axis = parse_sweep_axis(axis);
      std::stringstream in(values);
      for (std::string v; std::getline(in, v, ',');)
        if (!trim(v).empty()) e.values.push_back(trim(v));
      e.seeds = seed_list(sweep_seeds, sweep_seed_count);
      e.out_dir = sweep_out;
      e.jobs = sweep_jobs;
      const auto points = run_experiment(e);
      bool diverged = false;
      for (const auto& p : points) {
        std::printf("%s=%s  median last-k: modes %.2f  hq %.3f  frechet %.4g  feature_mmd %.4g\n",
                    to_string(e.axis).c_str(), p.value.c_str(), p.median_last_k.modes_covered,
                    p.median_last_k.high_quality_fraction, p.median_last_k.frechet,
                    p.median_last_k.feature_mmd);
        for (const auto& r : p.runs) diverged = diverged || r.diverged;
      }
      return diverged ? kDivergence : kOk;
    }
    if (*compare) {
      const TrainConfig config = resolve(cmp_opts);
      const auto seeds = seed_list(cmp_seeds, cmp_seed_count);
      const auto arms = bits.empty() ? std::vector<std::size_t>{} : parse_list<std::size_t>(bits, "bits");
      const Comparison c = compare_baseline(config, seeds, cmp_out, arms, cmp_jobs);
      std::printf("baseline  median final: modes %.1f  frechet %.4g  feature_mmd %.4g\n",
                  c.baseline_median.modes_covered, c.baseline_median.frechet, c.baseline_median.feature_mmd);
      for (const auto& a : c.arms)
        std::printf("FQ P=%zu    median final: modes %.1f  frechet %.4g  feature_mmd %.4g  "
                    "(mmd sign test %zu:%zu, p=%.3g)\n",
                    a.codebook_bits, a.median.modes_covered, a.median.frechet, a.median.feature_mmd,
                    a.feature_mmd.fq_better, a.feature_mmd.baseline_better, a.feature_mmd.p_value);
      return kOk;
    }
    if (*eval) {
      const Checkpoint cp = load_checkpoint(eval_ckpt);
      std::cout << metrics_header() << '\n' << to_csv_row(evaluate(cp.state).record) << '\n';
      return kOk;
    }
    if (*dump) {
      const Checkpoint cp = load_checkpoint(dump_ckpt);
      bool any = false;
      for (const FqLayer& l : cp.state.discriminator.fq_layers()) {
        if (dump_layer != 0 && l.after_hidden != dump_layer) continue;
        std::cout << "layer " << l.after_hidden << " positions " << l.positions << '\n';
        l.codebook.write(std::cout);
        any = true;
      }
      if (!any) throw ConfigError("checkpoint has no FQ layer" +
                                  (dump_layer ? " after hidden layer " + std::to_string(dump_layer) : std::string()));
      return kOk;
    }
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "fqgan: %s\n", e.what());
    return kDivergence;
  } catch (const IoError& e) {
    std::fprintf(stderr, "fqgan: %s\n", e.what());
    return kIoError;
  } catch (const CsvError& e) {
    std::fprintf(stderr, "fqgan: %s\n", e.what());
    return kIoError;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "fqgan: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fqgan: internal error: %s\n", e.what());
    return 1;
  }
  return kOk;
}
