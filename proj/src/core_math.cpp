#include "seqbench/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "seqbench/kernels.hpp"
#include "seqbench/memory.hpp"

namespace seqbench {

bool SequenceTensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

void SequenceTensor::require_finite(const char* what) const {
  if (!all_finite()) throw ContractViolation(std::string(what) + ": non-finite entry");
}

std::vector<double> stable_softmax(std::span<const double> x) {
  if (x.empty()) throw ContractViolation("stable_softmax: empty input");
  for (double v : x)
    if (!std::isfinite(v)) throw ContractViolation("stable_softmax: non-finite input");
  std::vector<double> out(x.begin(), x.end());
  softmax_masked_inplace(out.data(), out.size());
  return out;
}

void softmax_masked_inplace(double* x, std::size_t n) {
  const double m = kernels::max(x, n);
  if (!std::isfinite(m))
    throw ContractViolation("softmax: no finite entry in masked row");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // exp(-inf - m) == 0, so masked entries drop out exactly.
    x[i] = std::exp(x[i] - m);
    s += x[i];
  }
  kernels::scale(x, 1.0 / s, n);
}

double gelu(double x) { return x * 0.5 * (1.0 + std::erf(x * M_SQRT1_2)); }

void gelu_inplace(double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = gelu(x[i]);
}

std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gain,
                               std::span<const double> bias, double eps) {
  const std::size_t n = x.size();
  if (n < 2) throw ContractViolation("layer_norm: need at least 2 elements");
  if (gain.size() != n || bias.size() != n)
    throw ContractViolation("layer_norm: gain/bias size mismatch");
  if (eps < 0.0) throw ContractViolation("layer_norm: eps must be nonnegative");
  const double mean = kernels::sum(x.data(), n) / static_cast<double>(n);
  double var = 0.0;
  for (double v : x) {
    const double dev = v - mean;
    var += dev * dev;
  }
  var /= static_cast<double>(n);  // population variance
  const double inv = 1.0 / std::sqrt(var + eps);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = gain[i] * (x[i] - mean) * inv + bias[i];
  return out;
}

namespace detail {

namespace {
constexpr std::size_t kRowTile = 16;
}

void gemm_nt(double* c, const double* a, const double* b, std::size_t ra, std::size_t rb,
             std::size_t n) {
  // Tile rows of a so each row of b is streamed once per tile.
  for (std::size_t i0 = 0; i0 < ra; i0 += kRowTile) {
    const std::size_t i1 = std::min(i0 + kRowTile, ra);
    for (std::size_t j = 0; j < rb; ++j) {
      const double* bj = b + j * n;
      for (std::size_t i = i0; i < i1; ++i) {
        c[i * rb + j] = kernels::dot(a + i * n, bj, n);
      }
    }
  }
}

void gemm_nn_acc(double* c, const double* a, const double* b, std::size_t ra, std::size_t ca,
                 std::size_t cb) {
  for (std::size_t i0 = 0; i0 < ra; i0 += kRowTile) {
    const std::size_t i1 = std::min(i0 + kRowTile, ra);
    for (std::size_t k = 0; k < ca; ++k) {
      const double* bk = b + k * cb;
      for (std::size_t i = i0; i < i1; ++i) {
        kernels::axpy(c + i * cb, a[i * ca + k], bk, cb);
      }
    }
  }
}

void matvec(double* y, const double* a, const double* x, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) y[i] = kernels::dot(a + i * cols, x, cols);
}

}  // namespace detail

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw ContractViolation("matmul: inner dimension mismatch");
  Matrix c(a.rows, b.cols);
  detail::gemm_nn_acc(c.data.data(), a.data.data(), b.data.data(), a.rows, a.cols, b.cols);
  return c;
}

Matrix gaussian_init(Rng& rng, std::size_t rows, std::size_t cols, double std_dev) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = std_dev * rng.gaussian();
  return m;
}

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * M_PI * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

Rng Rng::child(std::uint64_t tag) const {
  // splitmix64 finalizer over (seed, tag) so sub-streams are decorrelated.
  std::uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return Rng(z ^ (z >> 31));
}

MemoryAccountant& accountant() {
  thread_local MemoryAccountant acc;
  return acc;
}

}  // namespace seqbench
