#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fqgan/config.hpp"
#include "fqgan/harness.hpp"
#include "fqgan/io.hpp"
#include "fqgan/metrics.hpp"
#include "fqgan/quantize.hpp"

namespace fqgan {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + format_double(v[i]);
  return s;
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = text.find(sep, pos);
    out.emplace_back(text.substr(pos, next == std::string_view::npos ? text.npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

double real_field(const std::string& s) {
  double v = 0.0;
  if (!parse_double(s, v)) throw std::invalid_argument("metrics row: bad number '" + s + "'");
  return v;
}

std::vector<double> list_field(const std::string& s) {
  std::vector<double> out;
  if (s.empty()) return out;
  for (const auto& part : split(s, ';')) out.push_back(real_field(part));
  return out;
}

Tensor stack(const Tensor& a, const Tensor& b) {
  std::vector<double> v(a.values().begin(), a.values().end());
  v.insert(v.end(), b.values().begin(), b.values().end());
  return Tensor({a.rows() + b.rows(), a.cols()}, std::move(v));
}

}  // namespace

std::string_view metrics_header() {
  return "iteration,alpha,d_loss,g_loss,commit_loss,modes_covered,high_quality_fraction,frechet,"
         "feature_mmd,perplexity,status";
}

std::string to_csv_row(const RunRecord& r) {
  return std::to_string(r.iteration) + "," + format_double(r.alpha) + "," + format_double(r.d_loss) +
         "," + format_double(r.g_loss) + "," + join(r.commit_loss) + "," +
         std::to_string(r.modes_covered) + "," + format_double(r.high_quality_fraction) + "," +
         format_double(r.frechet) + "," + format_double(r.feature_mmd) + "," + join(r.perplexity) +
         "," + (r.diverged ? "diverged" : "ok");
}

RunRecord parse_csv_row(std::string_view row) {
  const auto f = split(trim(row), ',');
  if (f.size() != 11)
    throw std::invalid_argument("metrics row: expected 11 fields, got " + std::to_string(f.size()));
  RunRecord r;
  r.iteration = static_cast<std::size_t>(std::stoull(f[0]));
  r.alpha = real_field(f[1]);
  r.d_loss = real_field(f[2]);
  r.g_loss = real_field(f[3]);
  r.commit_loss = list_field(f[4]);
  r.modes_covered = static_cast<std::size_t>(std::stoull(f[5]));
  r.high_quality_fraction = real_field(f[6]);
  r.frechet = real_field(f[7]);
  r.feature_mmd = real_field(f[8]);
  r.perplexity = list_field(f[9]);
  if (f[10] != "ok" && f[10] != "diverged")
    throw std::invalid_argument("metrics row: bad status '" + f[10] + "'");
  r.diverged = f[10] == "diverged";
  return r;
}

std::string metrics_csv(const std::vector<RunRecord>& records) {
  std::string out(metrics_header());
  out += '\n';
  for (const auto& r : records) out += to_csv_row(r) + '\n';
  return out;
}

Evaluation evaluate(const TrainState& st, const StepMetrics* last) {
  const TrainConfig& c = st.config;
  Rng rng = Rng::stream(c.seed, streams::kEval + (static_cast<std::uint64_t>(st.iteration) << 8));
  Evaluation ev;
  RunRecord& r = ev.record;
  r.iteration = st.iteration;
  if (last) {
    r.alpha = last->alpha;
    r.d_loss = last->d_loss;
    r.g_loss = last->g_loss;
    r.commit_loss = last->commit_loss;
  } else {
    r.alpha = anneal_alpha(st.iteration, c.warmup(), c.alpha);
    r.d_loss = r.g_loss = kNaN;
  }

  ev.samples = st.generate(sample_latent(c.eval_samples, c.latent_dim, rng));
  const Tensor real = st.data.draw(c.eval_samples, rng);
  if (st.data.mixture) {
    const ModeReport m = mode_coverage(ev.samples, *st.data.mixture);
    r.modes_covered = m.modes_covered;
    r.high_quality_fraction = m.high_quality_fraction;
  } else {
    r.high_quality_fraction = kNaN;
  }
  r.frechet = c.data_dim == 2 ? frechet_2d(ev.samples, real).value : kNaN;

  // mmd_samples counts feature vectors, so wide position layouts stay cheap.
  const FqDiscriminator& d = st.discriminator;
  const FqLayer* probe = d.fq_at(c.mmd_layer);
  const std::size_t positions = probe ? probe->positions : c.fq_positions;
  const std::size_t rows = std::max<std::size_t>(2, (c.mmd_samples + positions - 1) / positions);
  const Tensor real_m = st.data.draw(rows, rng);
  const Tensor fake_m = st.generate(sample_latent(rows, c.latent_dim, rng));
  if (probe)
    r.feature_mmd = quantized_feature_mmd(d, real_m, fake_m, c.mmd_layer);
  else
    r.feature_mmd = hidden_feature_mmd(d, real_m, fake_m, c.mmd_layer, positions);

  const Tensor both = stack(real_m, fake_m);
  for (const FqLayer& l : d.fq_layers()) {
    const Tensor h = layer_features(d, both, l.after_hidden, false);
    r.perplexity.push_back(vq::usage_stats(vq::assign(h, 1, l.codebook).counts).perplexity);
  }
  return ev;
}

RunSummary summarize(const TrainConfig& config, const std::vector<RunRecord>& records) {
  RunSummary s;
  s.seed = config.seed;
  std::vector<const RunRecord*> ok;
  for (const auto& r : records) {
    if (r.diverged) {
      s.diverged = true;
      s.divergence_iteration = r.iteration;
    } else {
      ok.push_back(&r);
    }
  }
  s.iterations = records.empty() ? 0 : records.back().iteration;
  if (ok.empty()) {
    s.last_k_mean = s.best = {0.0, 0.0, kInf, kInf};
    return s;
  }
  s.final = *ok.back();

  std::vector<const RunRecord*> saved;
  for (const RunRecord* r : ok)
    if (r->iteration % config.checkpoint_interval == 0 || r->iteration == config.iterations)
      saved.push_back(r);
  if (saved.empty()) saved.push_back(ok.back());
  const std::size_t k = std::min(config.last_k, saved.size());
  MetricSet mean{};
  for (std::size_t i = saved.size() - k; i < saved.size(); ++i) {
    mean.modes_covered += static_cast<double>(saved[i]->modes_covered);
    mean.high_quality_fraction += saved[i]->high_quality_fraction;
    mean.frechet += saved[i]->frechet;
    mean.feature_mmd += saved[i]->feature_mmd;
  }
  const double kk = static_cast<double>(k);
  s.last_k_mean = {mean.modes_covered / kk, mean.high_quality_fraction / kk, mean.frechet / kk,
                   mean.feature_mmd / kk};

  s.best = {0.0, 0.0, kInf, kInf};
  for (const RunRecord* r : ok) {
    s.best.modes_covered = std::max(s.best.modes_covered, static_cast<double>(r->modes_covered));
    s.best.high_quality_fraction = std::max(s.best.high_quality_fraction, r->high_quality_fraction);
    s.best.frechet = std::min(s.best.frechet, r->frechet);
    s.best.feature_mmd = std::min(s.best.feature_mmd, r->feature_mmd);
  }
  return s;
}

MetricSet scored_final(const RunSummary& s) {
  if (s.diverged) return {0.0, 0.0, kInf, kInf};
  return {static_cast<double>(s.final.modes_covered), s.final.high_quality_fraction, s.final.frechet,
          s.final.feature_mmd};
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace fqgan
