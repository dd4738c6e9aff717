#pragma once

#include <cstddef>
#include <span>

#include "fqgan/tape.hpp"

// Differentiable operations on tape variables.
//
// Broadcasting is limited to `add_bias`, which adds a length-`cols` vector to
// every row of a matrix. Every other binary op requires equal shapes; use
// `reshape` for anything else.

namespace fqgan::ad {

/// [m x k] * [k x n] -> [m x n].
Var matmul(Var a, Var b);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// Adds `bias` (shape [n] or [1 x n]) to every row of `x` ([m x n]).
Var add_bias(Var x, Var bias);

Var relu(Var x);
Var leaky_relu(Var x, double slope);
Var tanh(Var x);
Var sigmoid(Var x);
/// Natural log; throws DomainError if any input is <= 0.
Var log(Var x);
/// log(1 + exp(x)), evaluated without overflow.
Var softplus(Var x);
/// log(sigmoid(x)) = -softplus(-x).
Var log_sigmoid(Var x);
Var square(Var x);

/// Sum of all elements, shape [1].
Var sum(Var x);
/// sum((a - b)^2) as one node, shape [1].
Var sum_squared_difference(Var a, Var b);
/// Mean of all elements, shape [1].
Var mean(Var x);

Var reshape(Var x, Shape shape);
/// Stacks matrices with equal column counts along rows.
Var concat_rows(std::span<const Var> parts);
/// Rows [begin, begin + count) of a matrix.
Var slice_rows(Var x, std::size_t begin, std::size_t count);
/// Row `indices[i]` of `table` becomes row i of the result; backward scatter-adds.
Var gather_rows(Var table, std::span<const std::size_t> indices);

/// Forward identity whose backward contributes nothing to `x`. Returns `x`
/// itself when it already carries no gradient.
Var stop_gradient(Var x);
/// Forward value is exactly `quantized`; the gradient passes to `original`
/// unchanged and nothing reaches `quantized`. Equivalent to
/// original + stop_gradient(quantized - original) without the rounding of
/// the add/subtract pair.
Var straight_through(Var quantized, Var original);

/// Raw kernels shared with tape-free code paths.
namespace kernel {
/// out[m x n] = a[m x k] * b[k x n]
void matmul(const double* a, const double* b, double* out, std::size_t m, std::size_t k,
            std::size_t n);
/// out[m x k] += g[m x n] * b[k x n]^T
void matmul_grad_a(const double* g, const double* b, double* out, std::size_t m, std::size_t k,
                   std::size_t n);
/// out[k x n] += a[m x k]^T * g[m x n]
void matmul_grad_b(const double* a, const double* g, double* out, std::size_t m, std::size_t k,
                   std::size_t n);
double softplus(double x) noexcept;
double sigmoid(double x) noexcept;
}  // namespace kernel

}  // namespace fqgan::ad
