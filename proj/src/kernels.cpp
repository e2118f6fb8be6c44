#include "seqbench/kernels.hpp"

namespace seqbench::kernels {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 += a[i] * b[i];
    acc1 += a[i + 1] * b[i + 1];
    acc2 += a[i + 2] * b[i + 2];
    acc3 += a[i + 3] * b[i + 3];
  }
  double acc = (acc0 + acc1) + (acc2 + acc3);
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double* y, double a, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void axpby(double* y, double a, double b, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a * y[i] + b * x[i];
}

void scale(double* y, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= a;
}

double sum(const double* x, std::size_t n) {
  double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 += x[i];
    acc1 += x[i + 1];
    acc2 += x[i + 2];
    acc3 += x[i + 3];
  }
  double acc = (acc0 + acc1) + (acc2 + acc3);
  for (; i < n; ++i) acc += x[i];
  return acc;
}

double max(const double* x, std::size_t n) {
  double m = x[0];
  for (std::size_t i = 1; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

}  // namespace scalar

namespace {

struct Vtable {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double*, double, const double*, std::size_t);
  void (*axpby)(double*, double, double, const double*, std::size_t);
  void (*scale)(double*, double, std::size_t);
  double (*sum)(const double*, std::size_t);
  double (*max)(const double*, std::size_t);
};

constexpr Vtable kScalar = {scalar::dot, scalar::axpy, scalar::axpby,
                            scalar::scale, scalar::sum, scalar::max};

#if SEQBENCH_HAVE_AVX2_BUILD
constexpr Vtable kAvx2 = {avx2::dot, avx2::axpy, avx2::axpby,
                          avx2::scale, avx2::sum, avx2::max};

bool cpu_has_avx2() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

Vtable g_vt = kScalar;
Backend g_backend = Backend::Scalar;
bool g_initialized = false;

void ensure_init() {
  if (!g_initialized) {
    autodetect_backend();
  }
}

}  // namespace

void autodetect_backend() {
  g_initialized = true;
#if SEQBENCH_HAVE_AVX2_BUILD
  if (cpu_has_avx2()) {
    g_vt = kAvx2;
    g_backend = Backend::Avx2;
    return;
  }
#endif
  g_vt = kScalar;
  g_backend = Backend::Scalar;
}

void set_backend(Backend b) {
  g_initialized = true;
#if SEQBENCH_HAVE_AVX2_BUILD
  if (b == Backend::Avx2 && cpu_has_avx2()) {
    g_vt = kAvx2;
    g_backend = Backend::Avx2;
    return;
  }
#endif
  (void)b;
  g_vt = kScalar;
  g_backend = Backend::Scalar;
}

Backend active_backend() {
  ensure_init();
  return g_backend;
}

double dot(const double* a, const double* b, std::size_t n) {
  ensure_init();
  return g_vt.dot(a, b, n);
}
void axpy(double* y, double a, const double* x, std::size_t n) {
  ensure_init();
  g_vt.axpy(y, a, x, n);
}
void axpby(double* y, double a, double b, const double* x, std::size_t n) {
  ensure_init();
  g_vt.axpby(y, a, b, x, n);
}
void scale(double* y, double a, std::size_t n) {
  ensure_init();
  g_vt.scale(y, a, n);
}
double sum(const double* x, std::size_t n) {
  ensure_init();
  return g_vt.sum(x, n);
}
double max(const double* x, std::size_t n) {
  ensure_init();
  return g_vt.max(x, n);
}

}  // namespace seqbench::kernels
