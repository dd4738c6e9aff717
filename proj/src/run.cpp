#include <chrono>
#include <filesystem>
#include <limits>
#include <optional>
#include <sstream>

#include "fqgan/config.hpp"
#include "fqgan/datasets.hpp"
#include "fqgan/harness.hpp"
#include "fqgan/io.hpp"
#include "json_out.hpp"

namespace fqgan {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string() + ": cannot create directory: " + ec.message());
}

std::string timing_csv(const std::vector<RunRecord>& records) {
  std::string out = "iteration,wall_seconds\n";
  for (const auto& r : records) out += std::to_string(r.iteration) + "," + format_double(r.wall_seconds) + "\n";
  return out;
}

void write_codebooks(const fs::path& path, const FqDiscriminator& d) {
  std::ostringstream out;
  for (const FqLayer& l : d.fq_layers()) {
    out << "layer " << l.after_hidden << " positions " << l.positions << '\n';
    l.codebook.write(out);
  }
  write_file_atomic(path, out.str());
}

void write_snapshot(const fs::path& dir, const TrainState& st, const Evaluation& ev,
                    const std::vector<RunRecord>& records, const RunOptions& options) {
  const std::string it = std::to_string(st.iteration);
  save_checkpoint(dir / "checkpoint.txt", st, records);
  if (options.keep_checkpoints) {
    ensure_dir(dir / "checkpoints");
    save_checkpoint(dir / "checkpoints" / ("ckpt_" + it + ".txt"), st, records);
  }
  save_csv(dir / ("samples_" + it + ".csv"), ev.samples);
  if (!st.discriminator.fq_layers().empty()) write_codebooks(dir / ("codebook_" + it + ".txt"), st.discriminator);
  write_file_atomic(dir / "metrics.csv", metrics_csv(records));
}

}  // namespace

RunResult run_training(const TrainConfig& config, const RunOptions& options) {
  std::optional<Checkpoint> resumed;
  if (options.resume) resumed = load_checkpoint(*options.resume);
  RunResult result{{}, {}, resumed ? std::move(resumed->state) : TrainState::create(config)};
  if (resumed) result.records = std::move(resumed->records);
  TrainState& st = result.state;
  const TrainConfig& c = st.config;
  std::vector<RunRecord>& records = result.records;
  const fs::path& dir = options.out_dir;
  ensure_dir(dir);
  write_file_atomic(dir / "config.resolved", to_config_text(c));

  const auto start = std::chrono::steady_clock::now();
  const double wall_offset = records.empty() ? 0.0 : records.back().wall_seconds;
  const bool was_diverged = !records.empty() && records.back().diverged;
  while (!was_diverged && st.iteration < c.iterations) {
    if (options.stop_after && st.iteration >= *options.stop_after) break;
    StepMetrics m;
    try {
      m = train_step(st);
    } catch (const DivergenceError& e) {
      RunRecord r;
      r.iteration = e.iteration() + 1;
      r.alpha = anneal_alpha(e.iteration(), c.warmup(), c.alpha);
      r.d_loss = r.g_loss = r.frechet = r.feature_mmd = r.high_quality_fraction =
          std::numeric_limits<double>::quiet_NaN();
      r.diverged = true;
      r.wall_seconds = wall_offset + std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      records.push_back(r);
      break;
    }
    const std::size_t it = st.iteration;
    const bool last = it == c.iterations;
    const bool checkpoint = it % c.checkpoint_interval == 0 || last;
    if (it % c.eval_interval == 0 || checkpoint) {
      Evaluation ev = evaluate(st, &m);
      ev.record.wall_seconds =
          wall_offset + std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      records.push_back(ev.record);
      if (checkpoint) write_snapshot(dir, st, ev, records, options);
    }
  }

  result.summary = summarize(c, records);
  write_file_atomic(dir / "metrics.csv", metrics_csv(records));
  write_file_atomic(dir / "timing.csv", timing_csv(records));
  write_file_atomic(dir / "summary.json", json::summary(c, result.summary).dump(2) + "\n");
  return result;
}

}  // namespace fqgan
