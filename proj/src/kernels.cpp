#include "ffn/kernels.hpp"

namespace ffn::kernel {

// i-k-j loop order: the inner loop streams rows of B and a row of C, which
// auto-vectorizes cleanly and keeps the B panel hot across rows of A. The
// k loop is unrolled by four so each C-row load amortizes over four B rows.
void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        std::size_t l = 0;
        for (; l + 4 <= k; l += 4) {
            const double a0 = arow[l], a1 = arow[l + 1], a2 = arow[l + 2], a3 = arow[l + 3];
            const double* b0 = b + l * n;
            const double* b1 = b0 + n;
            const double* b2 = b1 + n;
            const double* b3 = b2 + n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
            }
        }
        for (; l < k; ++l) {
            const double av = arow[l];
            const double* brow = b + l * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t n, std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * n;
        double* crow = c + i * k;
        std::size_t l = 0;
        for (; l + 4 <= k; l += 4) {
            const double* b0 = b + l * n;
            const double* b1 = b0 + n;
            const double* b2 = b1 + n;
            const double* b3 = b2 + n;
            double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double av = arow[j];
                s0 += av * b0[j];
                s1 += av * b1[j];
                s2 += av * b2[j];
                s3 += av * b3[j];
            }
            crow[l] += s0;
            crow[l + 1] += s1;
            crow[l + 2] += s2;
            crow[l + 3] += s3;
        }
        for (; l < k; ++l) {
            const double* brow = b + l * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                acc += arow[j] * brow[j];
            }
            crow[l] += acc;
        }
    }
}

void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        const double* a0 = a + i * k;
        const double* a1 = a0 + k;
        const double* a2 = a1 + k;
        const double* a3 = a2 + k;
        const double* b0 = b + i * n;
        const double* b1 = b0 + n;
        const double* b2 = b1 + n;
        const double* b3 = b2 + n;
        for (std::size_t l = 0; l < k; ++l) {
            const double v0 = a0[l], v1 = a1[l], v2 = a2[l], v3 = a3[l];
            double* crow = c + l * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += v0 * b0[j] + v1 * b1[j] + v2 * b2[j] + v3 * b3[j];
            }
        }
    }
    for (; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        for (std::size_t l = 0; l < k; ++l) {
            const double av = arow[l];
            double* crow = c + l * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

void gemv(const double* x, const double* b, double* y,
          std::size_t k, std::size_t n) {
    for (std::size_t l = 0; l < k; ++l) {
        const double xv = x[l];
        const double* brow = b + l * n;
        for (std::size_t j = 0; j < n; ++j) {
            y[j] += xv * brow[j];
        }
    }
}

}  // namespace ffn::kernel
