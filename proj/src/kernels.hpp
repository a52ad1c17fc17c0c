#pragma once

#include <cstdint>

namespace prism::kernels {

// Row-major dense GEMM family used by the autodiff tape.
//
// The default entry points parallelize over output rows with OpenMP but keep
// the serial per-element reduction order, so their results are bit-identical
// to the serial reference implementations in kernels::serial (which stay
// around for tests and the benchmark target).
//
//   gemm_nn: c[m x n] (+)= a[m x k] * b[k x n]
//   gemm_nt: c[m x n] (+)= a[m x k] * b[n x k]^T
//   gemm_tn: c[m x n] (+)= a[k x m]^T * b[k x n]

void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n,
             bool accumulate = false);
void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n,
             bool accumulate = false);
void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n,
             bool accumulate = false);

namespace serial {
void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n,
             bool accumulate = false);
void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n,
             bool accumulate = false);
void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n,
             bool accumulate = false);
}  // namespace serial

}  // namespace prism::kernels
