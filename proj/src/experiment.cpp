#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

#include "fqgan/config.hpp"
#include "fqgan/harness.hpp"
#include "fqgan/io.hpp"
#include "json_out.hpp"

namespace fqgan {

namespace fs = std::filesystem;

namespace {

// Runs tasks on up to `jobs` threads; the first exception is rethrown.
void run_parallel(std::vector<std::function<void()>>& tasks, std::size_t jobs) {
  jobs = std::max<std::size_t>(1, std::min(jobs, tasks.size()));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < tasks.size();) {
      try {
        tasks[i]();
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = tasks.size();
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

MetricSet median_of(const std::vector<MetricSet>& sets) {
  std::vector<double> a, b, c, d;
  for (const auto& s : sets) {
    a.push_back(s.modes_covered);
    b.push_back(s.high_quality_fraction);
    c.push_back(s.frechet);
    d.push_back(s.feature_mmd);
  }
  return {median(a), median(b), median(c), median(d)};
}

template <class Better>
SignTest paired(const std::vector<MetricSet>& fq, const std::vector<MetricSet>& base,
                double MetricSet::*field, Better better) {
  std::size_t w = 0, l = 0, t = 0;
  for (std::size_t i = 0; i < fq.size(); ++i) {
    if (better(fq[i].*field, base[i].*field)) ++w;
    else if (better(base[i].*field, fq[i].*field)) ++l;
    else ++t;
  }
  return sign_test(w, l, t);
}

std::string seed_dir(std::uint64_t seed) { return "seed=" + std::to_string(seed); }

}  // namespace

SweepAxis parse_sweep_axis(std::string_view text) {
  if (text == "none") return SweepAxis::None;
  if (text == "P") return SweepAxis::P;
  if (text == "lambda") return SweepAxis::Lambda;
  if (text == "alpha") return SweepAxis::Alpha;
  if (text == "fq_position") return SweepAxis::FqPosition;
  throw ConfigError("unknown sweep axis '" + std::string(text) + "' (none|P|lambda|alpha|fq_position)");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::None: return "none";
    case SweepAxis::P: return "P";
    case SweepAxis::Lambda: return "lambda";
    case SweepAxis::Alpha: return "alpha";
    case SweepAxis::FqPosition: return "fq_position";
  }
  return "none";
}

TrainConfig sweep_point(const TrainConfig& base, SweepAxis axis, std::string_view value) {
  TrainConfig c = base;
  const std::string v = trim(value);
  auto bad = [&](const char* why) -> ConfigError {
    return ConfigError("sweep " + to_string(axis) + " value '" + v + "': " + why);
  };
  switch (axis) {
    case SweepAxis::None:
      break;
    case SweepAxis::P:
      apply_setting(c, "codebook_bits", v);
      if (c.codebook_bits < 1) throw bad("P must be >= 1");
      break;
    case SweepAxis::Lambda:
      apply_setting(c, "lambda", v);
      if (!(c.lambda > 0.0 && c.lambda < 1.0)) throw bad("lambda must lie in (0, 1)");
      break;
    case SweepAxis::Alpha:
      apply_setting(c, "alpha", v);
      if (!(c.alpha >= 0.0)) throw bad("alpha must be >= 0");
      break;
    case SweepAxis::FqPosition:
      apply_setting(c, "fq_layers", v);
      if (c.fq_layers.size() != 1 || c.fq_layers[0] < 1 || c.fq_layers[0] > c.hidden_layers)
        throw bad("position must be one hidden layer index");
      c.mmd_layer = c.fq_layers[0];
      break;
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw bad(e.what());
  }
  return c;
}

std::vector<std::string> sweep_values(const Experiment& e) {
  if (e.axis == SweepAxis::None) return {"-"};
  std::vector<std::string> values = e.values;
  if (values.empty()) throw ConfigError("sweep over " + to_string(e.axis) + " needs values");
  if (e.axis == SweepAxis::Alpha) {
    const bool has_zero = std::any_of(values.begin(), values.end(), [](const std::string& v) {
      double x = 1.0;
      return parse_double(trim(v), x) && x == 0.0;
    });
    if (!has_zero) values.insert(values.begin(), "0");
  }
  return values;
}

std::vector<SweepPoint> run_experiment(const Experiment& e) {
  if (e.seeds.empty()) throw ConfigError("experiment needs at least one seed");
  const auto values = sweep_values(e);
  std::vector<SweepPoint> points(values.size());
  std::vector<std::function<void()>> tasks;
  for (std::size_t i = 0; i < values.size(); ++i) {
    points[i].value = values[i];
    points[i].runs.resize(e.seeds.size());
    const TrainConfig point = sweep_point(e.config, e.axis, values[i]);
    const fs::path dir = e.axis == SweepAxis::None
                             ? e.out_dir
                             : e.out_dir / (to_string(e.axis) + "=" + trim(values[i]));
    for (std::size_t s = 0; s < e.seeds.size(); ++s) {
      TrainConfig c = point;
      c.seed = e.seeds[s];
      tasks.emplace_back([c, dir, s, &slot = points[i].runs[s]] {
        slot = run_training(c, {.out_dir = dir / seed_dir(c.seed)}).summary;
      });
    }
  }
  run_parallel(tasks, e.jobs);

  json::ordered_json out;
  out["axis"] = to_string(e.axis);
  out["points"] = json::ordered_json::array();
  for (SweepPoint& p : points) {
    std::vector<MetricSet> last, best;
    json::ordered_json runs = json::ordered_json::array();
    for (const RunSummary& r : p.runs) {
      last.push_back(r.last_k_mean);
      best.push_back(r.best);
      runs.push_back(json::run(r));
    }
    p.median_last_k = median_of(last);
    p.median_best = median_of(best);
    out["points"].push_back({{"value", p.value},
                             {"median_last_k_mean", json::metrics(p.median_last_k)},
                             {"median_best", json::metrics(p.median_best)},
                             {"runs", runs}});
  }
  write_file_atomic(e.out_dir / "summary.json", out.dump(2) + "\n");
  return points;
}

SignTest sign_test(std::size_t fq_better, std::size_t baseline_better, std::size_t ties) {
  SignTest t{fq_better, baseline_better, ties, 1.0};
  const std::size_t n = fq_better + baseline_better;
  if (n == 0) return t;
  const std::size_t k = std::min(fq_better, baseline_better);
  // two-sided exact binomial(n, 1/2) tail
  double tail = 0.0;
  for (std::size_t i = 0; i <= k; ++i)
    tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) -
                     static_cast<double>(n) * std::log(2.0));
  t.p_value = std::min(1.0, 2.0 * tail);
  return t;
}

Comparison compare_baseline(const TrainConfig& config, const std::vector<std::uint64_t>& seeds,
                            const fs::path& out_dir, std::vector<std::size_t> bits, std::size_t jobs) {
  if (seeds.empty()) throw ConfigError("comparison needs at least one seed");
  if (config.fq_layers.empty()) throw ConfigError("comparison needs an FQ layer in the config");
  if (bits.empty()) bits = {config.codebook_bits};

  Comparison cmp;
  cmp.seeds = seeds;
  cmp.baseline.resize(seeds.size());
  cmp.arms.resize(bits.size());
  std::vector<std::function<void()>> tasks;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    TrainConfig base = config;
    base.seed = seeds[s];
    base.fq_layers.clear();
    base.validate();
    tasks.emplace_back([base, dir = out_dir / "baseline" / seed_dir(seeds[s]), &slot = cmp.baseline[s]] {
      slot = run_training(base, {.out_dir = dir}).summary;
    });
  }
  for (std::size_t a = 0; a < bits.size(); ++a) {
    cmp.arms[a].codebook_bits = bits[a];
    cmp.arms[a].runs.resize(seeds.size());
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      TrainConfig fq = sweep_point(config, SweepAxis::P, std::to_string(bits[a]));
      fq.seed = seeds[s];
      const fs::path dir = out_dir / ("fq_P=" + std::to_string(bits[a])) / seed_dir(seeds[s]);
      tasks.emplace_back([fq, dir, &slot = cmp.arms[a].runs[s]] {
        slot = run_training(fq, {.out_dir = dir}).summary;
      });
    }
  }
  run_parallel(tasks, jobs);

  std::vector<MetricSet> base_scores;
  for (const auto& r : cmp.baseline) base_scores.push_back(scored_final(r));
  cmp.baseline_median = median_of(base_scores);

  json::ordered_json out;
  out["seeds"] = seeds;
  json::ordered_json base_runs = json::ordered_json::array();
  for (const auto& r : cmp.baseline) base_runs.push_back(json::run(r));
  out["baseline"] = {{"median_final", json::metrics(cmp.baseline_median)}, {"runs", base_runs}};
  out["arms"] = json::ordered_json::array();
  for (ComparisonArm& arm : cmp.arms) {
    std::vector<MetricSet> scores;
    json::ordered_json runs = json::ordered_json::array(), diffs = json::ordered_json::array();
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      scores.push_back(scored_final(arm.runs[s]));
      const MetricSet& f = scores.back();
      const MetricSet& b = base_scores[s];
      arm.differences.push_back({f.modes_covered - b.modes_covered,
                                 f.high_quality_fraction - b.high_quality_fraction,
                                 f.frechet - b.frechet, f.feature_mmd - b.feature_mmd});
      runs.push_back(json::run(arm.runs[s]));
      json::ordered_json d = json::metrics(arm.differences.back());
      d["seed"] = seeds[s];
      diffs.push_back(d);
    }
    arm.median = median_of(scores);
    arm.modes = paired(scores, base_scores, &MetricSet::modes_covered, std::greater<>());
    arm.frechet = paired(scores, base_scores, &MetricSet::frechet, std::less<>());
    arm.feature_mmd = paired(scores, base_scores, &MetricSet::feature_mmd, std::less<>());
    out["arms"].push_back({{"codebook_bits", arm.codebook_bits},
                           {"median_final", json::metrics(arm.median)},
                           {"paired_differences", diffs},
                           {"sign_test",
                            {{"modes_covered", json::sign(arm.modes)},
                             {"frechet", json::sign(arm.frechet)},
                             {"feature_mmd", json::sign(arm.feature_mmd)}}},
                           {"runs", runs}});
  }
  write_file_atomic(out_dir / "comparison.json", out.dump(2) + "\n");
  return cmp;
}

}  // namespace fqgan
