#pragma once

#include <cstddef>

// Data-parallel inner-loop kernels. Scalar reference implementations live in
// kernels::scalar; an AVX2/FMA variant is selected at runtime when the CPU
// supports it. Both variants are equivalence-tested against each other.
namespace seqbench::kernels {

enum class Backend { Scalar, Avx2 };

// Backend actually in use (after dispatch).
Backend active_backend();

// Force a backend, mainly for equivalence tests. Avx2 on a machine without
// AVX2 falls back to Scalar.
void set_backend(Backend b);

// Reset to the best backend the CPU supports.
void autodetect_backend();

double dot(const double* a, const double* b, std::size_t n);
void axpy(double* y, double a, const double* x, std::size_t n);             // y += a*x
void axpby(double* y, double a, double b, const double* x, std::size_t n);  // y = a*y + b*x
void scale(double* y, double a, std::size_t n);                             // y *= a
double sum(const double* x, std::size_t n);
double max(const double* x, std::size_t n);  // n >= 1

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double* y, double a, const double* x, std::size_t n);
void axpby(double* y, double a, double b, const double* x, std::size_t n);
void scale(double* y, double a, std::size_t n);
double sum(const double* x, std::size_t n);
double max(const double* x, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define SEQBENCH_HAVE_AVX2_BUILD 1
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double* y, double a, const double* x, std::size_t n);
void axpby(double* y, double a, double b, const double* x, std::size_t n);
void scale(double* y, double a, std::size_t n);
double sum(const double* x, std::size_t n);
double max(const double* x, std::size_t n);
}  // namespace avx2
#else
#define SEQBENCH_HAVE_AVX2_BUILD 0
#endif

}  // namespace seqbench::kernels
