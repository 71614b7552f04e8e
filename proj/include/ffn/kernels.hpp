#pragma once

#include <cstddef>

namespace ffn::kernel {

// Dense row-major kernels shared by the tensor ops and the fused recurrence
// code. All of them accumulate into C, callers zero the output first when
// they want a plain product.

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n);

// C[m x k] += A[m x n] * B[k x n]^T   (rows of A dotted with rows of B)
void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t n, std::size_t k);

// C[k x n] += A[m x k]^T * B[m x n]
void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n);

// y[n] += x[k] * B[k x n]
void gemv(const double* x, const double* b, double* y,
          std::size_t k, std::size_t n);

}  // namespace ffn::kernel
