#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fqgan/train.hpp"

namespace fqgan {

/// One evaluation point of a run.
struct RunRecord {
  std::size_t iteration = 0;
  double alpha = 0.0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  std::vector<double> commit_loss;  ///< per FQ layer
  std::size_t modes_covered = 0;
  double high_quality_fraction = 0.0;
  double frechet = 0.0;
  double feature_mmd = 0.0;        ///< quantized features on an FQ layer, hidden features otherwise
  std::vector<double> perplexity;  ///< per FQ layer
  double wall_seconds = 0.0;       ///< not written to metrics.csv
  bool diverged = false;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

/// iteration,alpha,d_loss,g_loss,commit_loss,modes_covered,high_quality_fraction,
/// frechet,feature_mmd,perplexity,status
std::string_view metrics_header();
/// Per-layer lists are ';'-joined; reals use shortest round-trip text.
std::string to_csv_row(const RunRecord& record);
RunRecord parse_csv_row(std::string_view row);
std::string metrics_csv(const std::vector<RunRecord>& records);

struct Evaluation {
  RunRecord record;
  Tensor samples;  ///< generated points used for the mode and Frechet metrics
};

/// Metrics of the current state. Draws come from a stream derived from
/// (seed, iteration), so evaluation never perturbs training and a resumed run
/// evaluates identically. Losses are copied from `last` when given, NaN otherwise.
Evaluation evaluate(const TrainState& state, const StepMetrics* last = nullptr);

struct MetricSet {
  double modes_covered = 0.0;
  double high_quality_fraction = 0.0;
  double frechet = 0.0;
  double feature_mmd = 0.0;
};

struct RunSummary {
  std::uint64_t seed = 0;
  std::size_t iterations = 0;  ///< iterations completed
  bool diverged = false;
  std::size_t divergence_iteration = 0;
  RunRecord final;          ///< last non-divergent record
  MetricSet last_k_mean;    ///< over the last k checkpoint evaluations
  MetricSet best;           ///< max coverage/quality, min frechet/mmd over every evaluation
};

RunSummary summarize(const TrainConfig& config, const std::vector<RunRecord>& records);

/// Metrics a comparison scores a run by; a diverged run gets the worst value
/// of each (0 modes, infinite distances).
MetricSet scored_final(const RunSummary& summary);

// ---- checkpoints ----

struct Checkpoint {
  TrainState state;
  std::vector<RunRecord> records;
};

/// Versioned text record of everything a run mutates, reals as hex floats.
void save_checkpoint(const std::filesystem::path& path, const TrainState& state,
                     const std::vector<RunRecord>& records);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ---- runs ----

struct RunOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume = std::nullopt;
  std::optional<std::size_t> stop_after = std::nullopt;  ///< halt after this iteration, as if killed
  bool keep_checkpoints = false;  ///< also keep checkpoints/ckpt_<iter>.txt
};

struct RunResult {
  std::vector<RunRecord> records;
  RunSummary summary;
  TrainState state;
};

/// Trains, evaluating every eval_interval and checkpointing every
/// checkpoint_interval iterations (and at the last one). Writes metrics.csv,
/// summary.json, timing.csv, config.resolved, checkpoint.txt,
/// samples_<iter>.csv and codebook_<iter>.txt under out_dir. A divergence
/// ends the run with a final "diverged" row instead of throwing.
RunResult run_training(const TrainConfig& config, const RunOptions& options);

// ---- sweeps and comparisons ----

enum class SweepAxis { None, P, Lambda, Alpha, FqPosition };
SweepAxis parse_sweep_axis(std::string_view text);
std::string to_string(SweepAxis axis);

struct Experiment {
  TrainConfig config;
  SweepAxis axis = SweepAxis::None;
  std::vector<std::string> values;
  std::vector<std::uint64_t> seeds = {0};
  std::filesystem::path out_dir;
  std::size_t jobs = 1;
};

/// Config of one sweep point; throws ConfigError for a value invalid on its axis.
TrainConfig sweep_point(const TrainConfig& base, SweepAxis axis, std::string_view value);
/// Sweep values with the alpha = 0 control added to alpha sweeps.
std::vector<std::string> sweep_values(const Experiment& experiment);

struct SweepPoint {
  std::string value;
  std::vector<RunSummary> runs;  ///< one per seed, in seed order
  MetricSet median_last_k;
  MetricSet median_best;
};

/// Runs every (value, seed) pair into out_dir/<axis>=<value>/seed=<seed> and
/// writes out_dir/summary.json.
std::vector<SweepPoint> run_experiment(const Experiment& experiment);

struct SignTest {
  std::size_t fq_better = 0;
  std::size_t baseline_better = 0;
  std::size_t ties = 0;
  double p_value = 1.0;  ///< two-sided, ties dropped
};
SignTest sign_test(std::size_t fq_better, std::size_t baseline_better, std::size_t ties);

struct ComparisonArm {
  std::size_t codebook_bits = 0;
  std::vector<RunSummary> runs;
  std::vector<MetricSet> differences;  ///< FQ minus baseline, per seed
  MetricSet median;
  SignTest modes;
  SignTest frechet;
  SignTest feature_mmd;
};

struct Comparison {
  std::vector<std::uint64_t> seeds;
  std::vector<RunSummary> baseline;
  MetricSet baseline_median;
  std::vector<ComparisonArm> arms;
};

/// Paired runs per seed: fq_layers empty against FQ with each codebook size
/// in `bits` (default: the config's). Both arms share initial weights and
/// data streams. Writes out_dir/comparison.json.
Comparison compare_baseline(const TrainConfig& config, const std::vector<std::uint64_t>& seeds,
                            const std::filesystem::path& out_dir,
                            std::vector<std::size_t> bits = {}, std::size_t jobs = 1);

double median(std::vector<double> values);

}  // namespace fqgan
