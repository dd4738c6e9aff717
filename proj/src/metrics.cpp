#include "fqgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fqgan {

namespace {

std::size_t nearest_mode(double x, double y, const MixtureSpec& spec, double& dist2) {
  std::size_t best = 0;
  dist2 = 0.0;
  for (std::size_t m = 0; m < spec.means.size(); ++m) {
    const double dx = x - spec.means[m][0];
    const double dy = y - spec.means[m][1];
    const double d2 = dx * dx + dy * dy;
    if (m == 0 || d2 < dist2) {
      best = m;
      dist2 = d2;
    }
  }
  return best;
}

void require_points(const Tensor& t, std::size_t min_rows, const char* what) {
  if (t.shape().size() != 2 || t.rows() < min_rows)
    throw std::invalid_argument(std::string(what) + " needs at least " + std::to_string(min_rows) +
                                " rows");
}

double squared_distance(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double diff = a[j] - b[j];
    s += diff * diff;
  }
  return s;
}

// Pooled Gram matrix, a's rows first.
std::vector<double> pooled_gram(const Tensor& a, const Tensor& b, double bandwidth) {
  const std::size_t na = a.rows(), nb = b.rows(), n = na + nb, d = a.cols();
  auto point = [&](std::size_t i) { return i < na ? a.data() + i * d : b.data() + (i - na) * d; };
  const double scale = 1.0 / (2.0 * bandwidth * bandwidth);
  std::vector<double> k(n * n, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      k[i * n + j] = k[j * n + i] = std::exp(-squared_distance(point(i), point(j), d) * scale);
  return k;
}

// U-statistic over a Gram matrix given a membership mask (true = first set).
double mmd_from_gram(const std::vector<double>& k, const std::vector<char>& first, std::size_t n) {
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  std::size_t na = 0;
  for (std::size_t i = 0; i < n; ++i) na += first[i] ? 1 : 0;
  const std::size_t nb = n - na;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = k.data() + i * n;
    double to_a = 0.0, to_b = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (first[j]) to_a += row[j];
      else to_b += row[j];
    }
    if (first[i]) {
      saa += to_a;
      sab += to_b;
    } else {
      sbb += to_b;
    }
  }
  const double fa = static_cast<double>(na), fb = static_cast<double>(nb);
  return saa / (fa * (fa - 1.0)) + sbb / (fb * (fb - 1.0)) - 2.0 * sab / (fa * fb);
}

}  // namespace

ModeReport mode_coverage(const Tensor& samples, const MixtureSpec& spec, double threshold_sigmas,
                         std::optional<std::size_t> min_count) {
  if (samples.shape().size() != 2 || samples.cols() != 2)
    throw DimensionError("mode_coverage expects [n x 2] samples");
  if (samples.rows() == 0) throw std::invalid_argument("mode_coverage: empty sample set");
  if (!(threshold_sigmas > 0.0)) throw std::invalid_argument("threshold_sigmas must be > 0");
  if (spec.means.empty()) throw std::invalid_argument("mode_coverage: mixture has no modes");
  const std::size_t n = samples.rows();
  const std::size_t modes = spec.means.size();
  const std::size_t needed =
      min_count ? *min_count
                : std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(
                                               0.01 * static_cast<double>(n) / static_cast<double>(modes))));
  const double radius = threshold_sigmas * spec.stddev;
  const double radius2 = radius * radius;

  ModeReport r;
  r.total_modes = modes;
  r.counts.assign(modes, 0);
  r.within.assign(modes, 0);
  std::size_t good = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double d2 = 0.0;
    const std::size_t m = nearest_mode(samples.at(i, 0), samples.at(i, 1), spec, d2);
    ++r.counts[m];
    if (d2 <= radius2) {
      ++r.within[m];
      ++good;
    }
  }
  for (std::size_t m = 0; m < modes; ++m)
    if (r.within[m] >= needed) ++r.modes_covered;
  r.high_quality_fraction = static_cast<double>(good) / static_cast<double>(n);
  return r;
}

double rbf_kernel(std::span<const double> a, std::span<const double> b, double bandwidth) {
  if (a.size() != b.size()) throw DimensionError("rbf_kernel: dimension mismatch");
  return std::exp(-squared_distance(a.data(), b.data(), a.size()) / (2.0 * bandwidth * bandwidth));
}

double mmd2_unbiased(const Tensor& a, const Tensor& b, double bandwidth) {
  require_points(a, 2, "mmd2_unbiased");
  require_points(b, 2, "mmd2_unbiased");
  if (a.cols() != b.cols()) throw DimensionError("mmd2_unbiased: dimension mismatch");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("mmd2_unbiased: bandwidth must be > 0");
  const std::size_t na = a.rows(), nb = b.rows(), d = a.cols();
  const double scale = 1.0 / (2.0 * bandwidth * bandwidth);
  auto kern = [&](const double* x, const double* y) {
    return std::exp(-squared_distance(x, y, d) * scale);
  };
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = i + 1; j < na; ++j) saa += kern(a.data() + i * d, a.data() + j * d);
  for (std::size_t i = 0; i < nb; ++i)
    for (std::size_t j = i + 1; j < nb; ++j) sbb += kern(b.data() + i * d, b.data() + j * d);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j) sab += kern(a.data() + i * d, b.data() + j * d);
  const double fa = static_cast<double>(na), fb = static_cast<double>(nb);
  return 2.0 * saa / (fa * (fa - 1.0)) + 2.0 * sbb / (fb * (fb - 1.0)) - 2.0 * sab / (fa * fb);
}

double median_bandwidth(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) throw DimensionError("median_bandwidth: dimension mismatch");
  const std::size_t na = a.rows(), n = na + b.rows(), d = a.cols();
  auto point = [&](std::size_t i) { return i < na ? a.data() + i * d : b.data() + (i - na) * d; };
  std::vector<double> dist;
  dist.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) dist.push_back(std::sqrt(squared_distance(point(i), point(j), d)));
  if (dist.empty()) return 0.0;
  auto median_of = [](std::vector<double>& v) {
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
  };
  const double m = median_of(dist);
  if (m > 0.0) return m;
  std::vector<double> positive;
  for (double v : dist)
    if (v > 0.0) positive.push_back(v);
  return positive.empty() ? 0.0 : median_of(positive);
}

PermutationTest mmd_permutation_test(const Tensor& a, const Tensor& b, double bandwidth,
                                     std::size_t permutations, Rng& rng) {
  require_points(a, 2, "mmd_permutation_test");
  require_points(b, 2, "mmd_permutation_test");
  if (a.cols() != b.cols()) throw DimensionError("mmd_permutation_test: dimension mismatch");
  const std::size_t na = a.rows(), n = na + b.rows();
  const std::vector<double> k = pooled_gram(a, b, bandwidth);
  std::vector<char> first(n, 0);
  std::fill(first.begin(), first.begin() + static_cast<std::ptrdiff_t>(na), 1);
  PermutationTest out;
  out.statistic = mmd_from_gram(k, first, n);
  std::size_t exceed = 0;
  for (std::size_t p = 0; p < permutations; ++p) {
    for (std::size_t i = n - 1; i > 0; --i) std::swap(first[i], first[rng.index(i + 1)]);
    if (mmd_from_gram(k, first, n) >= out.statistic) ++exceed;
  }
  out.p_value = static_cast<double>(1 + exceed) / static_cast<double>(1 + permutations);
  return out;
}

Gaussian2 fit_gaussian(const Tensor& samples) {
  if (samples.shape().size() != 2 || samples.cols() != 2)
    throw DimensionError("fit_gaussian expects [n x 2] samples");
  const std::size_t n = samples.rows();
  if (n < 2) throw std::invalid_argument("fit_gaussian needs at least 2 samples");
  Gaussian2 g;
  for (std::size_t i = 0; i < n; ++i) {
    g.mean[0] += samples.at(i, 0);
    g.mean[1] += samples.at(i, 1);
  }
  g.mean[0] /= static_cast<double>(n);
  g.mean[1] /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = samples.at(i, 0) - g.mean[0];
    const double dy = samples.at(i, 1) - g.mean[1];
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  const double denom = static_cast<double>(n - 1);
  g.cov = {sxx / denom, sxy / denom, sxy / denom, syy / denom};
  return g;
}

FrechetScore frechet_2d(const Tensor& a, const Tensor& b) {
  require_points(a, 3, "frechet_2d");
  require_points(b, 3, "frechet_2d");
  FrechetScore s;
  s.a = fit_gaussian(a);
  s.b = fit_gaussian(b);
  if (s.a == s.b) return s;  // identical statistics: exactly zero

  constexpr double kEps = 1e-10;
  auto det = [](const std::array<double, 4>& c) { return c[0] * c[3] - c[1] * c[2]; };
  std::array<double, 4> ca = s.a.cov, cb = s.b.cov;
  for (auto* c : {&ca, &cb}) {
    if (det(*c) <= 0.0) {
      (*c)[0] += kEps;
      (*c)[3] += kEps;
      s.regularized = true;
    }
  }
  const double dx = s.a.mean[0] - s.b.mean[0];
  const double dy = s.a.mean[1] - s.b.mean[1];
  // Tr(ca * cb) for symmetric 2x2 matrices.
  const double tr_prod = ca[0] * cb[0] + ca[1] * cb[2] + ca[2] * cb[1] + ca[3] * cb[3];
  const double det_prod = std::max(0.0, det(ca) * det(cb));
  const double tr_sqrt = std::sqrt(std::max(0.0, tr_prod + 2.0 * std::sqrt(det_prod)));
  const double value = dx * dx + dy * dy + ca[0] + ca[3] + cb[0] + cb[3] - 2.0 * tr_sqrt;
  s.value = std::max(0.0, value);
  return s;
}

std::vector<std::optional<double>> per_mode_frechet(const Tensor& generated, const Tensor& real,
                                                    const MixtureSpec& spec) {
  const std::size_t modes = spec.means.size();
  auto split = [&](const Tensor& t) {
    std::vector<std::vector<double>> buckets(modes);
    for (std::size_t i = 0; i < t.rows(); ++i) {
      double d2 = 0.0;
      const std::size_t m = nearest_mode(t.at(i, 0), t.at(i, 1), spec, d2);
      buckets[m].push_back(t.at(i, 0));
      buckets[m].push_back(t.at(i, 1));
    }
    return buckets;
  };
  const auto gen = split(generated);
  const auto ref = split(real);
  std::vector<std::optional<double>> out(modes);
  for (std::size_t m = 0; m < modes; ++m) {
    if (gen[m].size() < 6 || ref[m].size() < 6) continue;
    const Tensor g({gen[m].size() / 2, 2}, gen[m]);
    const Tensor r({ref[m].size() / 2, 2}, ref[m]);
    out[m] = frechet_2d(g, r).value;
  }
  return out;
}

Tensor layer_features(const FqDiscriminator& model, const Tensor& x, std::size_t layer,
                      bool quantized, std::size_t positions) {
  if (layer < 1 || layer > model.net().hidden_layers())
    throw std::out_of_range("feature layer outside the hidden layers");
  const FqLayer* fq = model.fq_at(layer);
  if (quantized && !fq)
    throw std::invalid_argument("no FQ codebook after hidden layer " + std::to_string(layer));
  if (positions == 0) positions = fq ? fq->positions : 1;
  ad::Tape tape;
  const auto bound = model.net().bind(tape, false);
  const auto fwd = model.forward(bound, tape.leaf(x));
  const Tensor* h = &fwd.hidden[layer - 1].value();
  if (quantized)
    for (std::size_t j = 0; j < model.fq_layers().size(); ++j)
      if (model.fq_layers()[j].after_hidden == layer) h = &fwd.quantized[j].quantized;
  if (h->cols() % positions != 0)
    throw DimensionError("hidden width is not divisible into " + std::to_string(positions) +
                         " positions");
  return h->reshaped({h->rows() * positions, h->cols() / positions});
}

double quantized_feature_mmd(const FqDiscriminator& model, const Tensor& real, const Tensor& fake,
                             std::size_t layer) {
  const Tensor a = layer_features(model, real, layer, true);
  const Tensor b = layer_features(model, fake, layer, true);
  const double bw = median_bandwidth(a, b);
  // Every vector is the same code: both sets are one identical point mass.
  if (bw == 0.0) return mmd2_unbiased(a, b, 1.0);
  return mmd2_unbiased(a, b, bw);
}

double hidden_feature_mmd(const FqDiscriminator& model, const Tensor& real, const Tensor& fake,
                          std::size_t layer, std::size_t positions) {
  const Tensor a = layer_features(model, real, layer, false, positions);
  const Tensor b = layer_features(model, fake, layer, false, positions);
  const double bw = median_bandwidth(a, b);
  if (bw == 0.0) return mmd2_unbiased(a, b, 1.0);
  return mmd2_unbiased(a, b, bw);
}

}  // namespace fqgan
