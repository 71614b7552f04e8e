#include "ffn/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ffn/error.hpp"

namespace ffn {

void OptimState::init(const std::vector<NamedParam>& params) {
    step = 0;
    m1.clear();
    m2.clear();
    for (const NamedParam& p : params) {
        m1.emplace_back(p.tensor.size(), 0.0);
        m2.emplace_back(p.tensor.size(), 0.0);
    }
}

Tensor span_loss(const Tensor& start, const Tensor& end, std::size_t gold_start,
                 std::size_t gold_end) {
    if (gold_start >= start.size() || gold_end >= end.size()) {
        throw DataError("span_loss: gold span (" + std::to_string(gold_start) + ", " +
                        std::to_string(gold_end) + ") out of range for length " +
                        std::to_string(start.size()));
    }
    Tensor nll_start = scale(log(pick(start, gold_start)), -1.0);
    Tensor nll_end = scale(log(pick(end, gold_end)), -1.0);
    return add(nll_start, nll_end);
}

void apply_freeze(const std::vector<NamedParam>& params) {
    for (const NamedParam& p : params) {
        if (!p.tunable_rows || !p.tensor.has_grad()) continue;
        Tensor t = p.tensor;
        const std::size_t cols = t.cols();
        std::vector<double>& g = t.grad();
        std::vector<std::uint8_t> keep(t.rows(), 0);
        for (int r : *p.tunable_rows) keep[static_cast<std::size_t>(r)] = 1;
        for (std::size_t r = 0; r < t.rows(); ++r) {
            if (!keep[r]) std::fill_n(g.begin() + r * cols, cols, 0.0);
        }
    }
}

double clip_gradients(const std::vector<NamedParam>& params, double max_norm) {
    if (!(max_norm > 0.0)) throw ContractError("clip_gradients: max_norm must be positive");
    double sum_sq = 0.0;
    for (const NamedParam& p : params) {
        if (!p.tensor.has_grad()) continue;
        for (double g : p.tensor.node()->grad) {
            if (!std::isfinite(g)) {
                throw NumericError("clip_gradients: non-finite gradient in " + p.name);
            }
            sum_sq += g * g;
        }
    }
    const double norm = std::sqrt(sum_sq);
    if (norm <= max_norm) return 1.0;
    const double scale = max_norm / norm;
    for (const NamedParam& p : params) {
        if (!p.tensor.has_grad()) continue;
        for (double& g : p.tensor.node()->grad) g *= scale;
    }
    return scale;
}

void adam_step(OptimState& opt, const std::vector<NamedParam>& params) {
    if (opt.m1.size() != params.size()) {
        throw ContractError("adam_step: optimizer state does not match the parameter list");
    }
    opt.step += 1;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));

    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor t = params[pi].tensor;
        if (!t.has_grad()) continue;
        std::vector<double>& data = t.data();
        const std::vector<double>& grad = t.node()->grad;
        std::vector<double>& m1 = opt.m1[pi];
        std::vector<double>& m2 = opt.m2[pi];
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double g = grad[i];
            m1[i] = opt.beta1 * m1[i] + (1.0 - opt.beta1) * g;
            m2[i] = opt.beta2 * m2[i] + (1.0 - opt.beta2) * g * g;
            if (g == 0.0 && m1[i] == 0.0 && m2[i] == 0.0) continue;
            const double m_hat = m1[i] / bc1;
            const double v_hat = m2[i] / bc2;
            data[i] -= opt.alpha * m_hat / (std::sqrt(v_hat) + opt.eps);
        }
    }
}

void zero_grads(const std::vector<NamedParam>& params) {
    for (const NamedParam& p : params) {
        Tensor t = p.tensor;
        t.zero_grad();
    }
}

EvalResult evaluate(const Model& model, const std::vector<QaExample>& examples) {
    EvalResult res;
    for (const QaExample& ex : examples) {
        SpanPrediction pred = predict(model, ex.context, ex.question);
        std::vector<std::string> golds;
        for (const Answer& a : ex.answers) golds.push_back(a.text);
        F1Em score = f1_em(pred.text, golds);
        res.f1 += score.f1;
        res.em += score.em;
    }
    res.n = examples.size();
    if (res.n > 0) {
        res.f1 /= static_cast<double>(res.n);
        res.em /= static_cast<double>(res.n);
    }
    return res;
}

void TrainLogger::step_line(std::size_t step, double loss, double grad_norm, double clip_scale) {
    if (!out) return;
    (*out) << "step\t" << step << '\t' << loss << '\t' << grad_norm << '\t' << clip_scale
           << '\n';
}

void TrainLogger::epoch_line(std::size_t epoch, double mean_loss, const EvalResult& dev) {
    if (!out) return;
    (*out) << "epoch\t" << epoch << '\t' << mean_loss << '\t' << dev.f1 << '\t' << dev.em
           << '\n';
    out->flush();
}

namespace {

struct AlignedExample {
    const QaExample* example;
    std::size_t gold_start;
    std::size_t gold_end;
};

AlignedExample align_for_training(const QaExample& ex) {
    if (ex.answers.empty()) throw DataError("train: example " + ex.id + " has no answers");
    const std::vector<Token> tokens = tokenize(ex.context);
    SpanAlignment a = align_answer_span(ex.answers.front(), tokens);
    return {&ex, a.start_token, a.end_token};
}

}  // namespace

EpochMetrics train_epoch(Model& model, const std::vector<QaExample>& train,
                         const std::vector<QaExample>& dev, const TrainConfig& cfg,
                         OptimState& opt, Rng& rng, TrainLogger* log,
                         std::vector<double>* step_losses) {
    if (train.empty()) throw DataError("train_epoch: empty dataset");
    const std::vector<NamedParam> params = model.trainable();

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t base = 0; base < order.size(); base += cfg.batch_size) {
        const std::size_t batch_n = std::min(cfg.batch_size, order.size() - base);
        double batch_loss = 0.0;

        for (std::size_t k = 0; k < batch_n; ++k) {
            const QaExample& ex = train[order[base + k]];
            AlignedExample aligned = align_for_training(ex);

            Tape tape;
            Tape::Scope scope(tape);
            FeaturizeOptions fopts;
            fopts.training = true;
            fopts.embedding_dropout = model.cfg.dropout_input;
            fopts.rng = &rng;
            FeaturizedPair in = build_inputs(ex.context, ex.question, model.vocab,
                                             model.tag_vocab, model.tags, model.word_match,
                                             fopts);
            RunOpts ropts{true, &rng};
            EncodeTrace trace = encode(model, in, ropts);
            AnswerScores scores = answer_scores(model, trace.c_u, trace.q_summary, in.c_mask);
            Tensor loss = scale(span_loss(scores.start, scores.end, aligned.gold_start,
                                          aligned.gold_end),
                                1.0 / static_cast<double>(batch_n));
            batch_loss += loss.value();
            tape.backward(loss);
        }

        apply_freeze(params);
        double norm_before = 0.0;
        for (const NamedParam& p : params) {
            if (!p.tensor.has_grad()) continue;
            for (double g : p.tensor.node()->grad) norm_before += g * g;
        }
        norm_before = std::sqrt(norm_before);
        const double clip_scale = clip_gradients(params, cfg.clip_norm);
        adam_step(opt, params);
        zero_grads(params);

        loss_sum += batch_loss;
        n_batches += 1;
        if (step_losses) step_losses->push_back(batch_loss);
        if (log) log->step_line(opt.step, batch_loss, norm_before, clip_scale);
    }

    EpochMetrics metrics;
    metrics.mean_loss = loss_sum / static_cast<double>(n_batches);
    metrics.dev = evaluate(model, dev);
    return metrics;
}

TrainResult train_run(Model& model, const std::vector<QaExample>& train,
                      const std::vector<QaExample>& dev, const TrainConfig& cfg,
                      TrainLogger* log) {
    TrainResult result;
    Rng rng(cfg.seed);
    OptimState opt;
    opt.init(model.trainable());

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        EpochMetrics metrics =
            train_epoch(model, train, dev, cfg, opt, rng, log, &result.step_losses);
        result.epochs.push_back(metrics);
        if (log) log->epoch_line(epoch, metrics.mean_loss, metrics.dev);
        if (cfg.target_em >= 0.0 && metrics.dev.em >= cfg.target_em) {
            result.reached_target = true;
            break;
        }
    }
    if (cfg.target_em < 0.0) result.reached_target = true;
    return result;
}

// ---- synthetic task -----------------------------------------------------------

std::vector<QaExample> synth_task(std::size_t n_examples, std::uint64_t seed) {
    if (n_examples < 1) throw ContractError("synth_task: need at least one example");
    Rng rng(seed);

    std::vector<std::string> pool;
    for (int i = 0; i < 80; ++i) {
        std::ostringstream w;
        w << "w" << (i < 10 ? "0" : "") << i;
        pool.push_back(w.str());
    }

    auto count_matches = [](const std::vector<std::string>& words,
                            const std::vector<std::string>& seq) {
        std::size_t count = 0;
        for (std::size_t i = 0; i + seq.size() <= words.size(); ++i) {
            bool match = true;
            for (std::size_t j = 0; j < seq.size(); ++j) {
                if (words[i + j] != seq[j]) {
                    match = false;
                    break;
                }
            }
            if (match) ++count;
        }
        return count;
    };

    std::vector<QaExample> examples;
    examples.reserve(n_examples);
    for (std::size_t k = 0; k < n_examples; ++k) {
        while (true) {
            const std::size_t len = 20 + rng.below(41);       // 20..60 tokens
            const std::size_t span_len = 1 + rng.below(5);    // 1..5 tokens
            std::vector<std::string> words(len);
            for (std::string& w : words) w = pool[rng.below(pool.size())];
            const std::size_t start = rng.below(len - span_len + 1);
            std::vector<std::string> span(words.begin() + start,
                                          words.begin() + start + span_len);
            if (count_matches(words, span) != 1) continue;
            // tokens flanking the span must not belong to it, otherwise the
            // exact boundary is ambiguous to any matching-based reader
            auto in_span = [&](const std::string& w) {
                for (const std::string& s : span) {
                    if (s == w) return true;
                }
                return false;
            };
            if (start > 0 && in_span(words[start - 1])) continue;
            if (start + span_len < len && in_span(words[start + span_len])) continue;

            std::string context;
            std::size_t char_start = 0;
            for (std::size_t i = 0; i < words.size(); ++i) {
                if (i == start) char_start = context.size();
                context += words[i];
                if (i + 1 < words.size()) context += ' ';
            }
            std::string answer_text;
            for (std::size_t i = 0; i < span.size(); ++i) {
                if (i) answer_text += ' ';
                answer_text += span[i];
            }
            std::string question = "find";
            for (const std::string& w : span) question += ' ' + w;
            question += " ?";

            QaExample ex;
            ex.id = "synth-" + std::to_string(k);
            ex.context = std::move(context);
            ex.question = std::move(question);
            ex.answers.push_back({answer_text, char_start});
            examples.push_back(std::move(ex));
            break;
        }
    }
    return examples;
}

std::vector<std::string> corpus_texts(const std::vector<QaExample>& examples) {
    std::vector<std::string> texts;
    texts.reserve(2 * examples.size());
    for (const QaExample& ex : examples) {
        texts.push_back(ex.context);
        texts.push_back(ex.question);
    }
    return texts;
}

}  // namespace ffn
