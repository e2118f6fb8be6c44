#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "seqbench/rng.hpp"
#include "seqbench/tensor.hpp"

namespace seqbench {

// Max-subtracted softmax; rejects empty or non-finite input. Output sums to 1.
std::vector<double> stable_softmax(std::span<const double> x);

// In-place softmax over x[0..n). -inf entries are allowed and map to exactly
// zero weight; at least one entry must be finite.
void softmax_masked_inplace(double* x, std::size_t n);

// Exact x * Phi(x) via erf, not the tanh approximation.
double gelu(double x);
void gelu_inplace(double* x, std::size_t n);

// Population-variance layer norm: gain * (x - mean)/sqrt(var + eps) + bias.
std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gain,
                               std::span<const double> bias, double eps = 1e-5);

// Dense product with fixed, deterministic loop order.
Matrix matmul(const Matrix& a, const Matrix& b);

// i.i.d. N(0, std^2) entries from the given stream.
Matrix gaussian_init(Rng& rng, std::size_t rows, std::size_t cols, double std_dev);

// Raw-pointer building blocks shared by matmul and the mechanism forwards.
// All operate on row-major storage.
namespace detail {
// c (ra x rb) = a (ra x n) * b^T where b is (rb x n).
void gemm_nt(double* c, const double* a, const double* b, std::size_t ra, std::size_t rb,
             std::size_t n);
// c (ra x cb) += a (ra x ca) * b (ca x cb).
void gemm_nn_acc(double* c, const double* a, const double* b, std::size_t ra, std::size_t ca,
                 std::size_t cb);
// y (rows) = a (rows x cols) * x (cols).
void matvec(double* y, const double* a, const double* x, std::size_t rows, std::size_t cols);
}  // namespace detail

}  // namespace seqbench
