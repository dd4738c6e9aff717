#include "fqgan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace fqgan::ad {

namespace kernel {

namespace {

// Eight doubles; lowered to whatever SIMD width the target offers.
typedef double Lane8 __attribute__((vector_size(64)));

constexpr std::size_t kRowBlock = 4;
constexpr std::size_t kColBlock = 16;

Lane8 load8(const double* p) {
  Lane8 v;
  __builtin_memcpy(&v, p, sizeof v);
  return v;
}

void store8(double* p, Lane8 v, bool accumulate) {
  if (accumulate) v += load8(p);
  __builtin_memcpy(p, &v, sizeof v);
}

// c[m x n] (+)= a[m x k] * b[k x n]. Every output element is summed over p in
// increasing order starting from zero, in the SIMD block and the scalar tail
// alike, so a row of the result never depends on the other rows of `a`.
void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
          std::size_t n, bool accumulate) {
  const std::size_t m_full = m - m % kRowBlock;
  const std::size_t n_full = n - n % kColBlock;
  for (std::size_t i0 = 0; i0 < m_full; i0 += kRowBlock) {
    const double* a0 = a + i0 * k;
    const double* a1 = a0 + k;
    const double* a2 = a1 + k;
    const double* a3 = a2 + k;
    for (std::size_t j0 = 0; j0 < n_full; j0 += kColBlock) {
      Lane8 c00 = {}, c01 = {}, c10 = {}, c11 = {}, c20 = {}, c21 = {}, c30 = {}, c31 = {};
      for (std::size_t p = 0; p < k; ++p) {
        const Lane8 b0 = load8(b + p * n + j0);
        const Lane8 b1 = load8(b + p * n + j0 + 8);
        c00 += a0[p] * b0;
        c01 += a0[p] * b1;
        c10 += a1[p] * b0;
        c11 += a1[p] * b1;
        c20 += a2[p] * b0;
        c21 += a2[p] * b1;
        c30 += a3[p] * b0;
        c31 += a3[p] * b1;
      }
      double* c0 = c + i0 * n + j0;
      store8(c0, c00, accumulate);
      store8(c0 + 8, c01, accumulate);
      store8(c0 + n, c10, accumulate);
      store8(c0 + n + 8, c11, accumulate);
      store8(c0 + 2 * n, c20, accumulate);
      store8(c0 + 2 * n + 8, c21, accumulate);
      store8(c0 + 3 * n, c30, accumulate);
      store8(c0 + 3 * n + 8, c31, accumulate);
    }
  }
  auto scalar = [&](std::size_t i, std::size_t j) {
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
    c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
  };
  for (std::size_t i = 0; i < m_full; ++i)
    for (std::size_t j = n_full; j < n; ++j) scalar(i, j);
  for (std::size_t i = m_full; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) scalar(i, j);
}

std::vector<double> transpose(const double* x, std::size_t rows, std::size_t cols) {
  std::vector<double> t(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = x[i * cols + j];
  return t;
}

}  // namespace

void matmul(const double* a, const double* b, double* out, std::size_t m, std::size_t k,
            std::size_t n) {
  gemm(a, b, out, m, k, n, false);
}

void matmul_grad_a(const double* g, const double* b, double* out, std::size_t m, std::size_t k,
                   std::size_t n) {
  const std::vector<double> bt = transpose(b, k, n);
  gemm(g, bt.data(), out, m, n, k, true);
}

void matmul_grad_b(const double* a, const double* g, double* out, std::size_t m, std::size_t k,
                   std::size_t n) {
  const std::vector<double> at = transpose(a, m, k);
  gemm(at.data(), g, out, k, m, n, true);
}

double softplus(double x) noexcept { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace kernel

namespace {

Tape& tape_of(Var v) {
  if (!v.valid()) throw TapeError("use of an unbound Var");
  return *v.tape();
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
}

void require_matrix(const char* op, Var x) {
  if (x.shape().size() != 2)
    throw DimensionError(std::string(op) + ": expected a matrix, got " + to_string(x.shape()));
}

// Elementwise map with a derivative expressed in terms of input and output.
// Node values are never modified once recorded and a Tensor keeps its buffer
// when the tape's node vector grows, so the closure reads them in place.
template <typename Fwd, typename Deriv>
Var unary(Var x, Fwd fwd, Deriv deriv) {
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  const double* in_data = in.data();
  const double* out_data = out.data();
  const Var parents[] = {x};
  return tape_of(x).record(
      std::move(out), parents,
      [in_data, out_data, deriv](const Tensor& g, std::span<Tensor* const> pg) {
        if (!pg[0]) return;
        Tensor& dx = *pg[0];
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * deriv(in_data[i], out_data[i]);
      });
}

}  // namespace

Var matmul(Var a, Var b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k)
    throw DimensionError("matmul: inner extents disagree " + to_string(a.shape()) + " * " +
                         to_string(b.shape()));
  Tensor out({m, n});
  kernel::matmul(a.value().data(), b.value().data(), out.data(), m, k, n);
  const Var parents[] = {a, b};
  Tape& tape = tape_of(a);
  // Operands are read back from the tape, which outlives the closure's use.
  return tape.record(std::move(out), parents,
                     [&tape, a, b, m, k, n](const Tensor& g, std::span<Tensor* const> pg) {
                       if (pg[0]) kernel::matmul_grad_a(g.data(), tape.value(b).data(),
                                                        pg[0]->data(), m, k, n);
                       if (pg[1]) kernel::matmul_grad_b(tape.value(a).data(), g.data(),
                                                        pg[1]->data(), m, k, n);
                     });
}

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const Var parents[] = {a, b};
  return tape_of(a).record(std::move(out), parents,
                           [](const Tensor& g, std::span<Tensor* const> pg) {
                             for (Tensor* d : pg)
                               if (d)
                                 for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += g[i];
                           });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const Var parents[] = {a, b};
  return tape_of(a).record(std::move(out), parents,
                           [](const Tensor& g, std::span<Tensor* const> pg) {
                             if (pg[0])
                               for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
                             if (pg[1])
                               for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] -= g[i];
                           });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const Var parents[] = {a, b};
  Tape& tape = tape_of(a);
  return tape.record(std::move(out), parents,
                     [&tape, a, b](const Tensor& g, std::span<Tensor* const> pg) {
                       const Tensor& av = tape.value(a);
                       const Tensor& bv = tape.value(b);
                       if (pg[0])
                         for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] * bv[i];
                       if (pg[1])
                         for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] += g[i] * av[i];
                     });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  const Var parents[] = {a};
  return tape_of(a).record(std::move(out), parents,
                           [factor](const Tensor& g, std::span<Tensor* const> pg) {
                             if (pg[0])
                               for (std::size_t i = 0; i < g.size(); ++i)
                                 (*pg[0])[i] += g[i] * factor;
                           });
}

Var add_bias(Var x, Var bias) {
  require_matrix("add_bias", x);
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  const Shape& bs = bias.shape();
  const bool vector_like = bs.size() == 1 || (bs.size() == 2 && bs[0] == 1);
  if (!vector_like || bias.value().size() != n)
    throw DimensionError("add_bias: bias " + to_string(bias.shape()) + " does not match " +
                         to_string(x.shape()));
  Tensor out = x.value();
  const Tensor& b = bias.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += b[j];
  const Var parents[] = {x, bias};
  return tape_of(x).record(std::move(out), parents,
                           [m, n](const Tensor& g, std::span<Tensor* const> pg) {
                             if (pg[0])
                               for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
                             if (pg[1])
                               for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t j = 0; j < n; ++j)
                                   (*pg[1])[j] += g[i * n + j];
                           });
}

Var relu(Var x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var x, double slope) {
  return unary(
      x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double in, double) { return in > 0.0 ? 1.0 : slope; });
}

Var tanh(Var x) {
  return unary(
      x, [](double v) { return std::tanh(v); },
      [](double, double out) { return 1.0 - out * out; });
}

Var sigmoid(Var x) {
  return unary(
      x, [](double v) { return kernel::sigmoid(v); },
      [](double, double out) { return out * (1.0 - out); });
}

Var log(Var x) {
  for (double v : x.value().values())
    if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
  return unary(
      x, [](double v) { return std::log(v); }, [](double in, double) { return 1.0 / in; });
}

Var softplus(Var x) {
  return unary(
      x, [](double v) { return kernel::softplus(v); },
      [](double in, double) { return kernel::sigmoid(in); });
}

Var log_sigmoid(Var x) {
  return unary(
      x, [](double v) { return -kernel::softplus(-v); },
      [](double in, double) { return kernel::sigmoid(-in); });
}

Var square(Var x) {
  return unary(
      x, [](double v) { return v * v; }, [](double in, double) { return 2.0 * in; });
}

Var sum(Var x) {
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  const Var parents[] = {x};
  return tape_of(x).record(Tensor::scalar(total), parents,
                           [](const Tensor& g, std::span<Tensor* const> pg) {
                             if (pg[0])
                               for (double& d : pg[0]->values()) d += g[0];
                           });
}

Var sum_squared_difference(Var a, Var b) {
  require_same_shape("sum_squared_difference", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  double total = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    total += d * d;
  }
  const Var parents[] = {a, b};
  Tape& tape = tape_of(a);
  return tape.record(Tensor::scalar(total), parents,
                     [&tape, a, b](const Tensor& g, std::span<Tensor* const> pg) {
                       const Tensor& av = tape.value(a);
                       const Tensor& bv = tape.value(b);
                       for (std::size_t i = 0; i < av.size(); ++i) {
                         const double d = g[0] * (2.0 * (av[i] - bv[i]));
                         if (pg[0]) (*pg[0])[i] += d;
                         if (pg[1]) (*pg[1])[i] -= d;
                       }
                     });
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  const Var parents[] = {x};
  return tape_of(x).record(std::move(out), parents,
                           [](const Tensor& g, std::span<Tensor* const> pg) {
                             if (pg[0])
                               for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
                           });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no operands");
  Tape& tape = tape_of(parts[0]);
  const std::size_t cols = parts[0].value().cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    require_matrix("concat_rows", p);
    if (p.value().cols() != cols)
      throw DimensionError("concat_rows: column mismatch " + to_string(p.shape()));
    rows += p.value().rows();
  }
  std::vector<double> values;
  values.reserve(rows * cols);
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    offsets.push_back(values.size());
    values.insert(values.end(), p.value().values().begin(), p.value().values().end());
  }
  return tape.record(Tensor({rows, cols}, std::move(values)), parts,
                     [offsets](const Tensor& g, std::span<Tensor* const> pg) {
                       for (std::size_t k = 0; k < pg.size(); ++k) {
                         if (!pg[k]) continue;
                         Tensor& d = *pg[k];
                         for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[offsets[k] + i];
                       }
                     });
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  require_matrix("slice_rows", x);
  const std::size_t cols = x.value().cols();
  if (count == 0 || begin + count > x.value().rows())
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of " + to_string(x.shape()));
  const auto src = x.value().values().subspan(begin * cols, count * cols);
  Tensor out({count, cols}, std::vector<double>(src.begin(), src.end()));
  const Var parents[] = {x};
  return tape_of(x).record(std::move(out), parents,
                           [offset = begin * cols](const Tensor& g, std::span<Tensor* const> pg) {
                             if (pg[0])
                               for (std::size_t i = 0; i < g.size(); ++i)
                                 (*pg[0])[offset + i] += g[i];
                           });
}

Var gather_rows(Var table, std::span<const std::size_t> indices) {
  require_matrix("gather_rows", table);
  if (indices.empty()) throw DimensionError("gather_rows: no indices");
  const std::size_t cols = table.value().cols();
  Tensor out({indices.size(), cols});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= table.value().rows())
      throw DimensionError("gather_rows: index " + std::to_string(indices[i]) + " out of range");
    const auto src = table.value().row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  const Var parents[] = {table};
  return tape_of(table).record(
      std::move(out), parents,
      [idx = std::vector<std::size_t>(indices.begin(), indices.end()), cols](
          const Tensor& g, std::span<Tensor* const> pg) {
        if (!pg[0]) return;
        for (std::size_t i = 0; i < idx.size(); ++i)
          for (std::size_t j = 0; j < cols; ++j) (*pg[0])[idx[i] * cols + j] += g[i * cols + j];
      });
}

Var stop_gradient(Var x) {
  if (!x.requires_grad()) return x;
  return tape_of(x).leaf(x.value(), false);
}

Var straight_through(Var quantized, Var original) {
  require_same_shape("straight_through", quantized, original);
  const Var parents[] = {quantized, original};
  return tape_of(original).record(quantized.value(), parents,
                                  [](const Tensor& g, std::span<Tensor* const> pg) {
                                    if (pg[1])
                                      for (std::size_t i = 0; i < g.size(); ++i)
                                        (*pg[1])[i] += g[i];
                                  });
}

}  // namespace fqgan::ad
