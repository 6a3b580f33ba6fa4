#pragma once

// Dense double-precision kernels used by the scorers and the imitation
// network. Each kernel has a scalar reference implementation and vector
// variants (AVX2+FMA on x86-64, NEON on AArch64); the variant is chosen once
// at startup from CPUID, or forced with RANKPROP_SIMD=scalar|avx2|neon.
//
// Vector variants reassociate sums, so results agree with the scalar
// reference to rounding, not bitwise. Within one process the active backend
// is fixed unless set_backend is called, so results are reproducible.

#include <cstddef>
#include <span>
#include <string_view>

namespace rankprop::simd {

enum class Backend { kScalar, kAvx2, kNeon };

std::string_view backend_name(Backend b);
bool backend_supported(Backend b);
Backend active_backend();

/// Switches the process-wide backend. Throws std::invalid_argument when the
/// CPU or build does not support it. Not meant to be called concurrently
/// with running kernels.
void set_backend(Backend b);

/// Restores set_backend(previous) on scope exit.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend b) : previous_(active_backend()) { set_backend(b); }
  ~ScopedBackend() { set_backend(previous_); }
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

double dot(std::span<const double> a, std::span<const double> b);

/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

/// y = W x, W row-major rows x cols.
void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y);

/// y += W^T g, W row-major rows x cols, g of length rows, y of length cols.
void gemv_transposed_acc(std::span<const double> w, std::size_t rows, std::size_t cols,
                         std::span<const double> g, std::span<double> y);

/// W += alpha * g x^T (rank-1 update), W row-major rows x cols.
void ger(double alpha, std::span<const double> g, std::span<const double> x,
         std::span<double> w);

/// x[i] = tanh(x[i]). Vector variants agree with std::tanh to a few 1e-16
/// absolute.
void tanh_inplace(std::span<double> x);

// Raw per-backend entry points, exposed for equivalence tests.
namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y);
void gemv_transposed_acc(const double* w, std::size_t rows, std::size_t cols, const double* g,
                         double* y);
void ger(double alpha, const double* g, std::size_t rows, const double* x, std::size_t cols,
         double* w);
void tanh_inplace(double* x, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y);
void gemv_transposed_acc(const double* w, std::size_t rows, std::size_t cols, const double* g,
                         double* y);
void ger(double alpha, const double* g, std::size_t rows, const double* x, std::size_t cols,
         double* w);
void tanh_inplace(double* x, std::size_t n);
}  // namespace avx2
#endif

#if defined(__aarch64__)
namespace neon {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y);
void gemv_transposed_acc(const double* w, std::size_t rows, std::size_t cols, const double* g,
                         double* y);
void ger(double alpha, const double* g, std::size_t rows, const double* x, std::size_t cols,
         double* w);
void tanh_inplace(double* x, std::size_t n);
}  // namespace neon
#endif

}  // namespace rankprop::simd
