#pragma once

#include <cmath>

#include <json.hpp>

#include "fqgan/harness.hpp"

namespace fqgan::json {

using nlohmann::ordered_json;

// Non-finite reals become null.
inline ordered_json real(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

inline ordered_json reals(const std::vector<double>& v) {
  ordered_json out = ordered_json::array();
  for (double x : v) out.push_back(real(x));
  return out;
}

inline ordered_json metrics(const MetricSet& m) {
  return {{"modes_covered", real(m.modes_covered)},
          {"high_quality_fraction", real(m.high_quality_fraction)},
          {"frechet", real(m.frechet)},
          {"feature_mmd", real(m.feature_mmd)}};
}

inline ordered_json record(const RunRecord& r) {
  return {{"iteration", r.iteration},
          {"alpha", real(r.alpha)},
          {"d_loss", real(r.d_loss)},
          {"g_loss", real(r.g_loss)},
          {"commit_loss", reals(r.commit_loss)},
          {"modes_covered", r.modes_covered},
          {"high_quality_fraction", real(r.high_quality_fraction)},
          {"frechet", real(r.frechet)},
          {"feature_mmd", real(r.feature_mmd)},
          {"perplexity", reals(r.perplexity)},
          {"status", r.diverged ? "diverged" : "ok"}};
}

inline ordered_json run(const RunSummary& s) {
  return {{"seed", s.seed},
          {"iterations", s.iterations},
          {"diverged", s.diverged},
          {"divergence_iteration", s.diverged ? ordered_json(s.divergence_iteration) : ordered_json(nullptr)},
          {"final", record(s.final)},
          {"last_k_mean", metrics(s.last_k_mean)},
          {"best", metrics(s.best)}};
}

inline ordered_json summary(const TrainConfig& c, const RunSummary& s) {
  ordered_json out = run(s);
  out["last_k"] = c.last_k;
  return out;
}

inline ordered_json sign(const SignTest& t) {
  return {{"fq_better", t.fq_better},
          {"baseline_better", t.baseline_better},
          {"ties", t.ties},
          {"p_value", real(t.p_value)}};
}

}  // namespace fqgan::json
