#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "rankprop/simd/kernels.hpp"

namespace rankprop::simd {

namespace {

struct KernelTable {
  Backend backend;
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*gemv)(const double*, std::size_t, std::size_t, const double*, double*);
  void (*gemv_t)(const double*, std::size_t, std::size_t, const double*, double*);
  void (*ger)(double, const double*, std::size_t, const double*, std::size_t, double*);
  void (*tanh)(double*, std::size_t);
};

#define RANKPROP_TABLE(B, NS) \
  KernelTable { B, &NS::dot, &NS::axpy, &NS::gemv, &NS::gemv_transposed_acc, &NS::ger, &NS::tanh_inplace }

constexpr KernelTable kScalarTable = RANKPROP_TABLE(Backend::kScalar, scalar);
#if defined(__x86_64__) || defined(_M_X64)
constexpr KernelTable kAvx2Table = RANKPROP_TABLE(Backend::kAvx2, avx2);
#endif
#if defined(__aarch64__)
constexpr KernelTable kNeonTable = RANKPROP_TABLE(Backend::kNeon, neon);
#endif

const KernelTable* table_for(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return &kScalarTable;
    case Backend::kAvx2:
#if defined(__x86_64__) || defined(_M_X64)
      return &kAvx2Table;
#else
      return nullptr;
#endif
    case Backend::kNeon:
#if defined(__aarch64__)
      return &kNeonTable;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

const KernelTable* detect() {
  if (const char* forced = std::getenv("RANKPROP_SIMD")) {
    const std::string name(forced);
    for (Backend b : {Backend::kScalar, Backend::kAvx2, Backend::kNeon}) {
      if (name == backend_name(b) && backend_supported(b)) return table_for(b);
    }
  }
  if (backend_supported(Backend::kAvx2)) return table_for(Backend::kAvx2);
  if (backend_supported(Backend::kNeon)) return table_for(Backend::kNeon);
  return &kScalarTable;
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{detect()};
  return table;
}

inline const KernelTable& kernels() { return *active().load(std::memory_order_relaxed); }

void require_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": size mismatch");
}

}  // namespace

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::kScalar: return "scalar";
    case Backend::kAvx2: return "avx2";
    case Backend::kNeon: return "neon";
  }
  return "unknown";
}

bool backend_supported(Backend b) {
  switch (b) {
    case Backend::kScalar:
      return true;
    case Backend::kAvx2:
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::kNeon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend active_backend() { return kernels().backend; }

void set_backend(Backend b) {
  if (!backend_supported(b)) {
    throw std::invalid_argument("SIMD backend '" + std::string(backend_name(b)) +
                                "' is not supported on this CPU/build");
  }
  active().store(table_for(b), std::memory_order_relaxed);
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same(a.size(), b.size(), "dot");
  return kernels().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require_same(x.size(), y.size(), "axpy");
  kernels().axpy(alpha, x.data(), y.data(), x.size());
}

void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y) {
  require_same(w.size(), rows * cols, "gemv");
  require_same(x.size(), cols, "gemv");
  require_same(y.size(), rows, "gemv");
  kernels().gemv(w.data(), rows, cols, x.data(), y.data());
}

void gemv_transposed_acc(std::span<const double> w, std::size_t rows, std::size_t cols,
                         std::span<const double> g, std::span<double> y) {
  require_same(w.size(), rows * cols, "gemv_transposed_acc");
  require_same(g.size(), rows, "gemv_transposed_acc");
  require_same(y.size(), cols, "gemv_transposed_acc");
  kernels().gemv_t(w.data(), rows, cols, g.data(), y.data());
}

void ger(double alpha, std::span<const double> g, std::span<const double> x,
         std::span<double> w) {
  require_same(w.size(), g.size() * x.size(), "ger");
  kernels().ger(alpha, g.data(), g.size(), x.data(), x.size(), w.data());
}

void tanh_inplace(std::span<double> x) { kernels().tanh(x.data(), x.size()); }

}  // namespace rankprop::simd
