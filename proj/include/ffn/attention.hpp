#pragma once

#include <cstdint>
#include <vector>

#include "ffn/rng.hpp"
#include "ffn/tensor.hpp"

namespace ffn {

// Shared projection applied to both query and key:
//   score(i, j) = relu(Q_i W) . relu(K_j W)
struct AttnParams {
    Tensor w;  // [d_qk x d_attn]

    std::size_t d_qk() const { return w.rows(); }
    std::size_t d_attn() const { return w.cols(); }
};

AttnParams make_attn_params(std::size_t d_qk, std::size_t d_attn, Rng& rng);

// Scores through a row softmax over unmasked keys, output rows are convex
// combinations of V rows. key_mask (optional) flags valid keys.
Tensor attn(const AttnParams& params, const Tensor& query, const Tensor& key,
            const Tensor& value, const std::vector<std::uint8_t>* key_mask = nullptr);

// Attn(C_glove, Q_glove, Q_glove): each context word as a mixture of
// question words in embedding space.
Tensor word_level_soft_match(const AttnParams& params, const Tensor& c_glove,
                             const Tensor& q_glove,
                             const std::vector<std::uint8_t>* q_mask = nullptr);

struct SummaryParams {
    Tensor v;  // [1 x d]
};

SummaryParams make_summary_params(std::size_t d, Rng& rng);

// Weighted sum of question vectors, weights = softmax(v . Q_j).
// Returns [1 x d].
Tensor question_summary(const SummaryParams& params, const Tensor& q_understanding,
                        const std::vector<std::uint8_t>* mask = nullptr);

}  // namespace ffn
