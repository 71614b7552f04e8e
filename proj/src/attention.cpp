#include "ffn/attention.hpp"

#include <cmath>

#include "ffn/error.hpp"

namespace ffn {

AttnParams make_attn_params(std::size_t d_qk, std::size_t d_attn, Rng& rng) {
    const double b = std::sqrt(1.0 / static_cast<double>(d_qk));
    return {Tensor::uniform({d_qk, d_attn}, -b, b, rng, /*requires_grad=*/true)};
}

namespace {

Tensor tile_key_mask(std::size_t n, const std::vector<std::uint8_t>& key_mask) {
    Tensor m(Shape{n, key_mask.size()});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < key_mask.size(); ++j) {
            m.at(i, j) = key_mask[j] ? 1.0 : 0.0;
        }
    }
    return m;
}

}  // namespace

Tensor attn(const AttnParams& params, const Tensor& query, const Tensor& key,
            const Tensor& value, const std::vector<std::uint8_t>* key_mask) {
    if (query.cols() != params.d_qk() || key.cols() != params.d_qk()) {
        throw DimensionError("attn: query/key width " + std::to_string(query.cols()) + "/" +
                             std::to_string(key.cols()) + " does not match projection width " +
                             std::to_string(params.d_qk()));
    }
    if (key.rows() != value.rows()) {
        throw DimensionError("attn: key and value must agree on the number of rows");
    }
    if (key_mask && key_mask->size() != key.rows()) {
        throw DimensionError("attn: key mask length mismatch");
    }

    Tensor q_proj = relu(matmul(query, params.w));
    // self-attention passes the same tensor as query and key; reuse the projection
    Tensor k_proj = query.node() == key.node() ? q_proj : relu(matmul(key, params.w));
    Tensor scores = matmul(q_proj, transpose(k_proj));

    Tensor weights;
    if (key_mask) {
        Tensor mask = tile_key_mask(query.rows(), *key_mask);
        weights = softmax_rows(scores, &mask);
    } else {
        weights = softmax_rows(scores);
    }
    return matmul(weights, value);
}

Tensor word_level_soft_match(const AttnParams& params, const Tensor& c_glove,
                             const Tensor& q_glove,
                             const std::vector<std::uint8_t>* q_mask) {
    return attn(params, c_glove, q_glove, q_glove, q_mask);
}

SummaryParams make_summary_params(std::size_t d, Rng& rng) {
    const double b = std::sqrt(1.0 / static_cast<double>(d));
    return {Tensor::uniform({1, d}, -b, b, rng, /*requires_grad=*/true)};
}

Tensor question_summary(const SummaryParams& params, const Tensor& q_understanding,
                        const std::vector<std::uint8_t>* mask) {
    const std::size_t m = q_understanding.rows(), d = q_understanding.cols();
    if (m == 0) throw DegenerateError("question_summary: empty question");
    if (params.v.cols() != d) {
        throw DimensionError("question_summary: width " + std::to_string(d) +
                             " does not match summary parameter width " +
                             std::to_string(params.v.cols()));
    }
    if (mask && mask->size() != m) {
        throw DimensionError("question_summary: mask length mismatch");
    }

    // [1 x m] scores, then a single-row softmax.
    Tensor scores = matmul(params.v, transpose(q_understanding));
    Tensor weights;
    if (mask) {
        Tensor mask_row = tile_key_mask(1, *mask);
        weights = softmax_rows(scores, &mask_row);
    } else {
        weights = softmax_rows(scores);
    }
    return matmul(weights, q_understanding);
}

}  // namespace ffn
