#pragma once

#include "ffn/rng.hpp"
#include "ffn/tensor.hpp"

namespace ffn {

// Inverted dropout: kept entries are scaled by 1/(1-rate) so eval needs no
// rescaling. Masks are constants, they never require grad.

inline Tensor dropout_mask(Shape shape, double rate, Rng& rng) {
    Tensor m(std::move(shape));
    const double keep = 1.0 / (1.0 - rate);
    for (double& v : m.data()) v = rng.bernoulli(rate) ? 0.0 : keep;
    return m;
}

// One mask row sampled once and repeated for every row: the variational
// scheme, where a sequence sees the same mask at every time step.
inline Tensor variational_row_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
    std::vector<double> row(cols);
    const double keep = 1.0 / (1.0 - rate);
    for (double& v : row) v = rng.bernoulli(rate) ? 0.0 : keep;
    Tensor m(Shape{rows, cols});
    for (std::size_t i = 0; i < rows; ++i) {
        std::copy(row.begin(), row.end(), m.data().begin() + i * cols);
    }
    return m;
}

inline Tensor dropout(const Tensor& x, double rate, bool training, Rng* rng,
                      bool variational = false) {
    if (!training || rate <= 0.0) return x;
    Tensor m = variational ? variational_row_mask(x.rows(), x.cols(), rate, *rng)
                           : dropout_mask(x.shape(), rate, *rng);
    return mul(x, m);
}

}  // namespace ffn
