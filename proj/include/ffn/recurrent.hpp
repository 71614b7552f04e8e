#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ffn/rng.hpp"
#include "ffn/tensor.hpp"

namespace ffn {

// SRU layer weights. The recurrence needs the gate input and the highway
// bypass to share the hidden width, so a projection W_res is carried
// exactly when d_in != d_hidden.
struct SruLayerParams {
    Tensor w;      // [d_in x d_h]
    Tensor w_f;    // [d_in x d_h]
    Tensor b_f;    // [d_h]
    Tensor w_r;    // [d_in x d_h]
    Tensor b_r;    // [d_h]
    Tensor w_res;  // [d_in x d_h], defined iff d_in != d_h

    std::size_t d_in() const { return w.rows(); }
    std::size_t d_hidden() const { return w.cols(); }
    bool has_residual_projection() const { return w_res.defined(); }
};

SruLayerParams make_sru_params(std::size_t d_in, std::size_t d_h, Rng& rng);

struct RecurrentState {
    Tensor c;  // [1 x d_h]
    Tensor h;  // [1 x d_h]
};

struct SruOutput {
    Tensor h;        // [T x d_h]
    Tensor c_final;  // [1 x d_h]
};

// Full SRU layer:
//   x~ = x W,  f = sigmoid(x W_f + b_f),  r = sigmoid(x W_r + b_r)
// computed as batched matmuls over all steps, then the sequential part
//   c_t = f_t * c_{t-1} + (1 - f_t) * x~_t
//   h_t = r_t * tanh(c_t) + (1 - r_t) * x'_t
// where x' is x itself or x W_res. dropout_mask, when given, is a width
// d_in vector applied to every step of x (variational).
SruOutput sru_forward(const SruLayerParams& params, const Tensor& x, const Tensor& c0,
                      const Tensor* dropout_mask = nullptr);

// The time loop of sru_forward as one taped op with a hand-written backward
// rule. Gate activations are fused into the loop the way the reference SRU
// kernel does it: f_lin/r_lin are the pre-sigmoid gate matmuls, the biases
// and sigmoids are applied per element in place.
SruOutput sru_recurrence(const Tensor& x_tilde, const Tensor& f_lin, const Tensor& r_lin,
                         const Tensor& b_f, const Tensor& b_r, const Tensor& x_res,
                         const Tensor& c0);

// A mask is valid per step; only a contiguous all-ones prefix is accepted.
std::size_t valid_prefix(const std::vector<std::uint8_t>& mask);

// Forward and time-reversed SRU passes over the valid prefix, concatenated
// per step into [T x 2 d_h]. Padded steps are zero.
Tensor bi_sru(const SruLayerParams& fwd, const SruLayerParams& bwd, const Tensor& x,
              const std::vector<std::uint8_t>& mask);

struct BiSruLayer {
    SruLayerParams fwd;
    SruLayerParams bwd;
};

struct StackedBiSruParams {
    std::vector<BiSruLayer> layers;

    std::size_t d_in() const { return layers.front().fwd.d_in(); }
    std::size_t d_out() const { return 2 * layers.back().fwd.d_hidden(); }
};

StackedBiSruParams make_stacked_bi_sru(std::size_t d_in, std::size_t d_h, std::size_t n_layers,
                                       Rng& rng);

// Composition of bi_sru layers with variational dropout on each layer input
// while training.
Tensor stacked_bi_sru(const StackedBiSruParams& params, const Tensor& x,
                      const std::vector<std::uint8_t>& mask, bool training = false,
                      Rng* rng = nullptr, double dropout_rate = 0.2);

// ---- baselines for the benchmark and the answer layer ----------------------

// Gate order i, f, g, o. The input projection is hoisted out of the time
// loop; the h-side matmul stays per step.
struct LstmParams {
    Tensor w_ih;  // [d_in x 4 d_h]
    Tensor w_hh;  // [d_h x 4 d_h]
    Tensor bias;  // [4 d_h]

    std::size_t d_in() const { return w_ih.rows(); }
    std::size_t d_hidden() const { return w_hh.rows(); }
};

LstmParams make_lstm_params(std::size_t d_in, std::size_t d_h, Rng& rng);

Tensor lstm_forward(const LstmParams& params, const Tensor& x);

// Classic GRU: z and r gates, candidate tanh(x W_xn + (r * h) W_hn + b_n),
// new state h' = z * h + (1 - z) * n.
struct GruParams {
    Tensor w_xz, w_hz, b_z;  // [d_in x d_h], [d_h x d_h], [d_h]
    Tensor w_xr, w_hr, b_r;
    Tensor w_xn, w_hn, b_n;

    std::size_t d_in() const { return w_xz.rows(); }
    std::size_t d_hidden() const { return w_hz.rows(); }
};

GruParams make_gru_params(std::size_t d_in, std::size_t d_h, Rng& rng);

// One step; input and hidden are [1 x d] row vectors.
Tensor gru_cell(const GruParams& params, const Tensor& input, const Tensor& hidden);

Tensor gru_forward(const GruParams& params, const Tensor& x);

// Analytic operation counts used by the benchmark report.
struct OpCounts {
    std::size_t matmuls = 0;
    std::size_t sequential_steps = 0;
};

OpCounts sru_op_counts(const SruLayerParams& params, std::size_t t);
OpCounts bi_sru_op_counts(const SruLayerParams& fwd, const SruLayerParams& bwd, std::size_t t);
OpCounts lstm_op_counts(std::size_t t);
OpCounts gru_op_counts(std::size_t t);

}  // namespace ffn
