#include "kernels.hpp"

#include <cstring>

namespace prism::kernels {

namespace {
// Below this many multiply-adds the OpenMP fork/join overhead dominates.
constexpr int64_t kParallelThreshold = 1 << 15;

inline int64_t work(int m, int k, int n) {
  return static_cast<int64_t>(m) * k * n;
}
}  // namespace

namespace serial {

void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n,
             bool accumulate) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<int64_t>(i) * n;
    if (!accumulate) std::memset(ci, 0, sizeof(double) * n);
    const double* ai = a + static_cast<int64_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b + static_cast<int64_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n,
             bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<int64_t>(i) * k;
    double* ci = c + static_cast<int64_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + static_cast<int64_t>(j) * k;
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
      if (accumulate)
        ci[j] += s;
      else
        ci[j] = s;
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n,
             bool accumulate) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<int64_t>(i) * n;
    if (!accumulate) std::memset(ci, 0, sizeof(double) * n);
    for (int p = 0; p < k; ++p) {
      const double api = a[static_cast<int64_t>(p) * m + i];
      const double* bp = b + static_cast<int64_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

}  // namespace serial

// The parallel variants split whole output rows across threads; each c[i][j]
// is produced by exactly one thread with the same reduction order as the
// serial reference, so results match it bit for bit.

void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n,
             bool accumulate) {
  if (work(m, k, n) < kParallelThreshold) {
    serial::gemm_nn(a, b, c, m, k, n, accumulate);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    serial::gemm_nn(a + static_cast<int64_t>(i) * k, b,
                    c + static_cast<int64_t>(i) * n, 1, k, n, accumulate);
  }
}

void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n,
             bool accumulate) {
  if (work(m, k, n) < kParallelThreshold) {
    serial::gemm_nt(a, b, c, m, k, n, accumulate);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    serial::gemm_nt(a + static_cast<int64_t>(i) * k, b,
                    c + static_cast<int64_t>(i) * n, 1, k, n, accumulate);
  }
}

void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n,
             bool accumulate) {
  if (work(m, k, n) < kParallelThreshold) {
    serial::gemm_tn(a, b, c, m, k, n, accumulate);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<int64_t>(i) * n;
    if (!accumulate)
      for (int j = 0; j < n; ++j) ci[j] = 0.0;
    for (int p = 0; p < k; ++p) {
      const double api = a[static_cast<int64_t>(p) * m + i];
      const double* bp = b + static_cast<int64_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

}  // namespace prism::kernels
