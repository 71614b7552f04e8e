#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ffn/attention.hpp"
#include "ffn/features.hpp"
#include "ffn/recurrent.hpp"
#include "ffn/tensor.hpp"

namespace ffn {

struct ModelConfig {
    std::size_t hidden = 125;  // per-direction SRU hidden size
    std::size_t layers_per_block = 2;
    double dropout_input = 0.4;  // embeddings and attention inputs
    double dropout_sru = 0.2;    // variational, on SRU layer inputs
    std::size_t max_span_len = 15;

    std::size_t feature_width() const { return 2 * hidden; }
    // history of word: [glove; low; high]
    std::size_t history_width() const { return kGloveDim + 2 * feature_width(); }
    // second history: [glove; low; high; fused low/high/understanding; v]
    std::size_t history2_width() const { return kGloveDim + 6 * feature_width(); }
};

// One trainable tensor with a stable name; tunable_rows, when set, lists the
// only rows the optimizer may update (embedding fine-tuning).
struct NamedParam {
    std::string name;
    Tensor tensor;
    const std::vector<int>* tunable_rows = nullptr;
};

struct Model {
    ModelConfig cfg;
    Vocabulary vocab;
    TagVocab tag_vocab;
    TagEmbeddings tags;

    AttnParams word_match;  // soft-match over embeddings

    StackedBiSruParams low_c, low_q;    // 624 / 300 -> 2H
    StackedBiSruParams high_c, high_q;  // 2H -> 2H
    StackedBiSruParams qu;              // [Q_low; Q_high] -> 2H
    StackedBiSruParams cv_block;        // 5 * 2H -> 2H
    StackedBiSruParams cu_block;        // 2 * 2H -> 2H

    AttnParams fa_low, fa_high, fa_underst;  // query/key width 300 + 4H
    AttnParams self_attn;                    // query/key width 300 + 12H

    SummaryParams summary;  // [1 x 2H]
    Tensor w_start, w_end;  // [2H x 2H]
    GruParams answer_gru;   // 2H -> 2H

    std::vector<NamedParam> trainable() const;
};

// Builds all parameters and verifies the width chain of the whole stack.
Model make_model(const ModelConfig& cfg, Vocabulary vocab, TagVocab tag_vocab,
                 std::uint64_t seed);

// Throws when any parameter shape disagrees with the stack equations.
void validate_widths(const Model& model);

struct RunOpts {
    bool training = false;
    Rng* rng = nullptr;
};

// Intermediate products of the encoder, staged so the profiler can time
// each component separately.
struct EncodeTrace {
    Tensor c_glove, q_glove;
    Tensor c_low, q_low;
    Tensor c_high, q_high;
    Tensor q_underst;
    Tensor fused_low, fused_high, fused_underst;  // context attended over question
    Tensor c_v;
    Tensor c_u;
    Tensor q_summary;  // [1 x 2H]
};

void stage_low(const Model& m, const FeaturizedPair& in, const RunOpts& opts, EncodeTrace& t);
void stage_high(const Model& m, const FeaturizedPair& in, const RunOpts& opts, EncodeTrace& t);
void stage_question_understanding(const Model& m, const FeaturizedPair& in, const RunOpts& opts,
                                  EncodeTrace& t);
void stage_qc_attention(const Model& m, const FeaturizedPair& in, const RunOpts& opts,
                        EncodeTrace& t);
void stage_self_attention(const Model& m, const FeaturizedPair& in, const RunOpts& opts,
                          EncodeTrace& t);

// All stages in order; fills the trace through q_summary.
EncodeTrace encode(const Model& m, const FeaturizedPair& in, const RunOpts& opts = {});

struct AnswerScores {
    Tensor start;  // [1 x n]
    Tensor end;    // [1 x n]
};

AnswerScores answer_scores(const Model& m, const Tensor& c_u, const Tensor& q_summary,
                           const std::vector<std::uint8_t>& c_mask);

struct SpanPrediction {
    std::size_t start_token;
    std::size_t end_token;
    double score;
    std::size_t char_begin = 0;
    std::size_t char_end = 0;
    std::string text;
};

// Argmax of start[i]*end[j] over i <= j < i + max_len; ties go to the
// smallest i, then the smallest j.
SpanPrediction span_search(const Tensor& start, const Tensor& end, std::size_t max_len = 15);

SpanPrediction predict(const Model& m, const std::string& context, const std::string& question,
                       const TagRecord* tags = nullptr);

}  // namespace ffn
