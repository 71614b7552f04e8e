#include "ffn/model.hpp"

#include <cmath>

#include "ffn/dropout.hpp"
#include "ffn/error.hpp"

namespace ffn {

namespace {

void push_sru(std::vector<NamedParam>& out, const std::string& prefix,
              const SruLayerParams& p) {
    out.push_back({prefix + ".w", p.w});
    out.push_back({prefix + ".w_f", p.w_f});
    out.push_back({prefix + ".b_f", p.b_f});
    out.push_back({prefix + ".w_r", p.w_r});
    out.push_back({prefix + ".b_r", p.b_r});
    if (p.has_residual_projection()) out.push_back({prefix + ".w_res", p.w_res});
}

void push_stack(std::vector<NamedParam>& out, const std::string& prefix,
                const StackedBiSruParams& p) {
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        push_sru(out, prefix + "." + std::to_string(i) + ".fwd", p.layers[i].fwd);
        push_sru(out, prefix + "." + std::to_string(i) + ".bwd", p.layers[i].bwd);
    }
}

void push_gru(std::vector<NamedParam>& out, const std::string& prefix, const GruParams& p) {
    out.push_back({prefix + ".w_xz", p.w_xz});
    out.push_back({prefix + ".w_hz", p.w_hz});
    out.push_back({prefix + ".b_z", p.b_z});
    out.push_back({prefix + ".w_xr", p.w_xr});
    out.push_back({prefix + ".w_hr", p.w_hr});
    out.push_back({prefix + ".b_r", p.b_r});
    out.push_back({prefix + ".w_xn", p.w_xn});
    out.push_back({prefix + ".w_hn", p.w_hn});
    out.push_back({prefix + ".b_n", p.b_n});
}

void expect(bool ok, const std::string& what) {
    if (!ok) throw DimensionError("model configuration: " + what);
}

}  // namespace

std::vector<NamedParam> Model::trainable() const {
    std::vector<NamedParam> out;
    out.push_back({"embeddings", vocab.embeddings, &vocab.tune_rows});
    out.push_back({"pos_table", tags.pos_table});
    out.push_back({"ner_table", tags.ner_table});
    out.push_back({"word_match.w", word_match.w});
    push_stack(out, "low_c", low_c);
    push_stack(out, "low_q", low_q);
    push_stack(out, "high_c", high_c);
    push_stack(out, "high_q", high_q);
    push_stack(out, "qu", qu);
    push_stack(out, "cv_block", cv_block);
    push_stack(out, "cu_block", cu_block);
    out.push_back({"fa_low.w", fa_low.w});
    out.push_back({"fa_high.w", fa_high.w});
    out.push_back({"fa_underst.w", fa_underst.w});
    out.push_back({"self_attn.w", self_attn.w});
    out.push_back({"summary.v", summary.v});
    out.push_back({"w_start", w_start});
    out.push_back({"w_end", w_end});
    push_gru(out, "answer_gru", answer_gru);
    return out;
}

Model make_model(const ModelConfig& cfg, Vocabulary vocab, TagVocab tag_vocab,
                 std::uint64_t seed) {
    Rng rng(seed);
    Model m;
    m.cfg = cfg;
    m.vocab = std::move(vocab);
    m.tag_vocab = std::move(tag_vocab);
    m.tags = make_tag_embeddings(m.tag_vocab, rng);

    const std::size_t h = cfg.hidden;
    const std::size_t fw = cfg.feature_width();  // 2H
    const std::size_t d_attn = fw;
    const std::size_t layers = cfg.layers_per_block;

    m.word_match = make_attn_params(kGloveDim, d_attn, rng);

    m.low_c = make_stacked_bi_sru(kInputDim, h, layers, rng);
    m.low_q = make_stacked_bi_sru(kGloveDim, h, layers, rng);
    m.high_c = make_stacked_bi_sru(fw, h, layers, rng);
    m.high_q = make_stacked_bi_sru(fw, h, layers, rng);
    m.qu = make_stacked_bi_sru(2 * fw, h, layers, rng);

    m.fa_low = make_attn_params(cfg.history_width(), d_attn, rng);
    m.fa_high = make_attn_params(cfg.history_width(), d_attn, rng);
    m.fa_underst = make_attn_params(cfg.history_width(), d_attn, rng);
    m.cv_block = make_stacked_bi_sru(5 * fw, h, layers, rng);

    m.self_attn = make_attn_params(cfg.history2_width(), d_attn, rng);
    m.cu_block = make_stacked_bi_sru(2 * fw, h, layers, rng);

    m.summary = make_summary_params(fw, rng);
    const double b = std::sqrt(1.0 / static_cast<double>(fw));
    m.w_start = Tensor::uniform({fw, fw}, -b, b, rng, true);
    m.w_end = Tensor::uniform({fw, fw}, -b, b, rng, true);
    m.answer_gru = make_gru_params(fw, fw, rng);

    validate_widths(m);
    return m;
}

void validate_widths(const Model& m) {
    const std::size_t fw = m.cfg.feature_width();
    expect(m.vocab.embeddings.cols() == kGloveDim, "embedding width must be 300");
    expect(m.tags.pos_table.cols() == kPosDim, "POS embedding width must be 12");
    expect(m.tags.ner_table.cols() == kNerDim, "NER embedding width must be 8");
    expect(m.word_match.d_qk() == kGloveDim, "soft-match projection expects 300-d inputs");

    expect(m.low_c.d_in() == kInputDim, "low-level context encoder must take 624-d input");
    expect(m.low_q.d_in() == kGloveDim, "low-level question encoder must take 300-d input");
    for (const StackedBiSruParams* s : {&m.low_c, &m.low_q, &m.high_c, &m.high_q, &m.qu,
                                        &m.cv_block, &m.cu_block}) {
        expect(s->d_out() == fw, "every BiSRU block must output " + std::to_string(fw));
        // layer widths chain inside the stack
        std::size_t cur = s->d_in();
        for (const BiSruLayer& l : s->layers) {
            expect(l.fwd.d_in() == cur && l.bwd.d_in() == cur, "stacked layer width chain");
            cur = 2 * l.fwd.d_hidden();
        }
    }
    expect(m.high_c.d_in() == fw && m.high_q.d_in() == fw,
           "high-level encoders take low-level output");
    expect(m.qu.d_in() == 2 * fw, "question understanding takes [Q_low; Q_high]");

    const std::size_t his = m.cfg.history_width();
    expect(his == kGloveDim + 2 * fw, "history width is glove + low + high");
    for (const AttnParams* a : {&m.fa_low, &m.fa_high, &m.fa_underst}) {
        expect(a->d_qk() == his, "fully-aware attention keys on the history of word");
    }
    expect(m.cv_block.d_in() == 5 * fw, "fusion block takes [low; high; 3 attended]");

    const std::size_t his2 = m.cfg.history2_width();
    expect(his2 == kGloveDim + 6 * fw, "second history width");
    expect(m.self_attn.d_qk() == his2, "self-attention keys on the second history");
    expect(m.cu_block.d_in() == 2 * fw, "final block takes [C_v; attended C_v]");

    expect(m.summary.v.cols() == fw, "summary weight width");
    expect(m.w_start.rows() == fw && m.w_start.cols() == fw, "start bilinear shape");
    expect(m.w_end.rows() == fw && m.w_end.cols() == fw, "end bilinear shape");
    expect(m.answer_gru.d_in() == fw && m.answer_gru.d_hidden() == fw, "answer GRU shape");
}

// ---- encoder stages ----------------------------------------------------------

namespace {

Tensor attn_input_dropout(const Tensor& x, const ModelConfig& cfg, const RunOpts& opts) {
    return dropout(x, cfg.dropout_input, opts.training, opts.rng);
}

}  // namespace

void stage_low(const Model& m, const FeaturizedPair& in, const RunOpts& opts, EncodeTrace& t) {
    t.c_glove = slice_cols(in.c_in, 0, kGloveDim);
    t.q_glove = in.q_in;
    t.c_low = stacked_bi_sru(m.low_c, in.c_in, in.c_mask, opts.training, opts.rng,
                             m.cfg.dropout_sru);
    t.q_low = stacked_bi_sru(m.low_q, in.q_in, in.q_mask, opts.training, opts.rng,
                             m.cfg.dropout_sru);
}

void stage_high(const Model& m, const FeaturizedPair& in, const RunOpts& opts, EncodeTrace& t) {
    t.c_high = stacked_bi_sru(m.high_c, t.c_low, in.c_mask, opts.training, opts.rng,
                              m.cfg.dropout_sru);
    t.q_high = stacked_bi_sru(m.high_q, t.q_low, in.q_mask, opts.training, opts.rng,
                              m.cfg.dropout_sru);
}

void stage_question_understanding(const Model& m, const FeaturizedPair& in, const RunOpts& opts,
                                  EncodeTrace& t) {
    t.q_underst = stacked_bi_sru(m.qu, concat_cols({t.q_low, t.q_high}), in.q_mask,
                                 opts.training, opts.rng, m.cfg.dropout_sru);
}

void stage_qc_attention(const Model& m, const FeaturizedPair& in, const RunOpts& opts,
                        EncodeTrace& t) {
    Tensor c_history = concat_cols({t.c_glove, t.c_low, t.c_high});
    Tensor q_history = concat_cols({t.q_glove, t.q_low, t.q_high});
    c_history = attn_input_dropout(c_history, m.cfg, opts);
    q_history = attn_input_dropout(q_history, m.cfg, opts);

    t.fused_low = attn(m.fa_low, c_history, q_history,
                       attn_input_dropout(t.q_low, m.cfg, opts), &in.q_mask);
    t.fused_high = attn(m.fa_high, c_history, q_history,
                        attn_input_dropout(t.q_high, m.cfg, opts), &in.q_mask);
    t.fused_underst = attn(m.fa_underst, c_history, q_history,
                           attn_input_dropout(t.q_underst, m.cfg, opts), &in.q_mask);

    Tensor fusion_in =
        concat_cols({t.c_low, t.c_high, t.fused_low, t.fused_high, t.fused_underst});
    t.c_v = stacked_bi_sru(m.cv_block, fusion_in, in.c_mask, opts.training, opts.rng,
                           m.cfg.dropout_sru);
}

void stage_self_attention(const Model& m, const FeaturizedPair& in, const RunOpts& opts,
                          EncodeTrace& t) {
    Tensor history2 = concat_cols({t.c_glove, t.c_low, t.c_high, t.fused_low, t.fused_high,
                                   t.fused_underst, t.c_v});
    history2 = attn_input_dropout(history2, m.cfg, opts);
    Tensor value = attn_input_dropout(t.c_v, m.cfg, opts);
    Tensor fused_v = attn(m.self_attn, history2, history2, value, &in.c_mask);
    t.c_u = stacked_bi_sru(m.cu_block, concat_cols({t.c_v, fused_v}), in.c_mask, opts.training,
                           opts.rng, m.cfg.dropout_sru);
}

EncodeTrace encode(const Model& m, const FeaturizedPair& in, const RunOpts& opts) {
    EncodeTrace t;
    stage_low(m, in, opts, t);
    stage_high(m, in, opts, t);
    stage_question_understanding(m, in, opts, t);
    stage_qc_attention(m, in, opts, t);
    stage_self_attention(m, in, opts, t);
    t.q_summary = question_summary(m.summary, t.q_underst, &in.q_mask);
    return t;
}

AnswerScores answer_scores(const Model& m, const Tensor& c_u, const Tensor& q_summary,
                           const std::vector<std::uint8_t>& c_mask) {
    if (c_u.rows() == 0) throw DegenerateError("answer_scores: empty context");
    if (c_mask.size() != c_u.rows()) {
        throw DimensionError("answer_scores: mask length mismatch");
    }

    Tensor mask_row(Shape{1, c_u.rows()});
    for (std::size_t j = 0; j < c_mask.size(); ++j) mask_row[j] = c_mask[j] ? 1.0 : 0.0;

    // s_i = softmax_i(q W_start . C_i)
    Tensor start_logits = matmul(matmul(q_summary, m.w_start), transpose(c_u));
    Tensor s = softmax_rows(start_logits, &mask_row);

    // z = sum_i s_i C_i, refined question via one GRU step
    Tensor z = matmul(s, c_u);
    Tensor q_refined = gru_cell(m.answer_gru, z, q_summary);

    Tensor end_logits = matmul(matmul(q_refined, m.w_end), transpose(c_u));
    Tensor e = softmax_rows(end_logits, &mask_row);
    return {s, e};
}

SpanPrediction span_search(const Tensor& start, const Tensor& end, std::size_t max_len) {
    const std::size_t n = start.size();
    if (n == 0) throw DegenerateError("span_search: empty distributions");
    if (end.size() != n) throw DimensionError("span_search: start/end length mismatch");
    if (max_len == 0) throw ContractError("span_search: max_len must be at least 1");

    SpanPrediction best{0, 0, -1.0, 0, 0, ""};
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j_end = std::min(n, i + max_len);
        for (std::size_t j = i; j < j_end; ++j) {
            const double score = start[i] * end[j];
            if (score > best.score) {
                best.start_token = i;
                best.end_token = j;
                best.score = score;
            }
        }
    }
    return best;
}

SpanPrediction predict(const Model& m, const std::string& context, const std::string& question,
                       const TagRecord* tags) {
    NoGradGuard no_grad;
    FeaturizeOptions fopts;
    fopts.tags = tags;
    FeaturizedPair in = build_inputs(context, question, m.vocab, m.tag_vocab, m.tags,
                                     m.word_match, fopts);
    EncodeTrace t = encode(m, in);
    AnswerScores scores = answer_scores(m, t.c_u, t.q_summary, in.c_mask);
    SpanPrediction span = span_search(scores.start, scores.end, m.cfg.max_span_len);
    span.char_begin = in.c_tokens[span.start_token].begin;
    span.char_end = in.c_tokens[span.end_token].end;
    span.text = context.substr(span.char_begin, span.char_end - span.char_begin);
    return span;
}

}  // namespace ffn
