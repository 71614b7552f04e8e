#include "ffn/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "ffn/error.hpp"

namespace ffn {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

double elapsed_ns(Clock::time_point a, Clock::time_point b) {
    return static_cast<double>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(b - a).count());
}

double checksum(const Tensor& t) {
    double s = 0.0;
    std::size_t i = 0;
    for (double v : t.data()) s += v * static_cast<double>(++i % 97);
    return s;
}

}  // namespace

double median_of(std::vector<double> values) {
    if (values.empty()) throw ContractError("median_of: empty sample");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double p90_of(std::vector<double> values) {
    if (values.empty()) throw ContractError("p90_of: empty sample");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    std::size_t idx = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(n)));
    if (idx > 0) --idx;
    return values[std::min(idx, n - 1)];
}

namespace {

struct BlockRunner {
    std::function<Tensor()> run;
    OpCounts counts;
};

BlockRunner make_block_runner(const std::string& block, std::size_t seq_len,
                              std::size_t hidden, Rng& rng) {
    Tensor x = Tensor::uniform({seq_len, hidden}, -1.0, 1.0, rng);
    if (block == "sru") {
        SruLayerParams p = make_sru_params(hidden, hidden, rng);
        Tensor c0(Shape{1, hidden});
        return {[p, x, c0] { return sru_forward(p, x, c0).h; }, sru_op_counts(p, seq_len)};
    }
    if (block == "bi_sru") {
        SruLayerParams pf = make_sru_params(hidden, hidden, rng);
        SruLayerParams pb = make_sru_params(hidden, hidden, rng);
        std::vector<std::uint8_t> mask(seq_len, 1);
        return {[pf, pb, x, mask] { return bi_sru(pf, pb, x, mask); },
                bi_sru_op_counts(pf, pb, seq_len)};
    }
    if (block == "lstm") {
        LstmParams p = make_lstm_params(hidden, hidden, rng);
        return {[p, x] { return lstm_forward(p, x); }, lstm_op_counts(seq_len)};
    }
    if (block == "gru") {
        GruParams p = make_gru_params(hidden, hidden, rng);
        return {[p, x] { return gru_forward(p, x); }, gru_op_counts(seq_len)};
    }
    throw ContractError("bench_block: unknown block \"" + block + "\"");
}

}  // namespace

BenchReport bench_block(const std::string& block, std::size_t seq_len, std::size_t hidden,
                        std::size_t trials, std::size_t warmup, std::uint64_t seed) {
    if (trials < 5) throw ContractError("bench_block: need at least 5 trials");
    if (warmup < 1) throw ContractError("bench_block: need at least 1 warmup pass");
    if (seq_len < 1 || hidden < 1) throw ContractError("bench_block: empty shape");

    Rng rng(seed);
    BlockRunner runner = make_block_runner(block, seq_len, hidden, rng);
    const std::function<Tensor()>& run = runner.run;
    const OpCounts counts = runner.counts;

    NoGradGuard no_grad;
    double sum_ref = 0.0;
    for (std::size_t i = 0; i < warmup; ++i) sum_ref = checksum(run());

    std::vector<double> times;
    times.reserve(trials);
    for (std::size_t i = 0; i < trials; ++i) {
        const auto t0 = Clock::now();
        Tensor out = run();
        const auto t1 = Clock::now();
        const double sum = checksum(out);
        if (sum != sum_ref) {
            throw NumericError("bench_block: outputs differ across trials, timing untrusted");
        }
        times.push_back(elapsed_ns(t0, t1));
    }

    BenchReport report;
    report.block = block;
    report.seq_len = seq_len;
    report.hidden = hidden;
    report.trials = trials;
    report.warmup = warmup;
    report.median_ns = median_of(times);
    report.mean_ns = 0.0;
    for (double t : times) report.mean_ns += t;
    report.mean_ns /= static_cast<double>(times.size());
    report.p90_ns = p90_of(times);
    report.op_counts = counts;
    report.output_checksum = sum_ref;
    return report;
}

double paired_latency_ratio(const std::string& block_a, const std::string& block_b,
                            std::size_t seq_len, std::size_t hidden, std::size_t pairs,
                            std::size_t warmup, std::uint64_t seed) {
    if (pairs < 5) throw ContractError("paired_latency_ratio: need at least 5 pairs");
    if (warmup < 1) throw ContractError("paired_latency_ratio: need at least 1 warmup pass");

    Rng rng(seed);
    BlockRunner a = make_block_runner(block_a, seq_len, hidden, rng);
    BlockRunner b = make_block_runner(block_b, seq_len, hidden, rng);

    NoGradGuard no_grad;
    double sum_a = 0.0, sum_b = 0.0;
    for (std::size_t i = 0; i < warmup; ++i) {
        sum_a = checksum(a.run());
        sum_b = checksum(b.run());
    }

    std::vector<double> ratios;
    ratios.reserve(pairs);
    for (std::size_t i = 0; i < pairs; ++i) {
        const auto t0 = Clock::now();
        Tensor out_a = a.run();
        const auto t1 = Clock::now();
        Tensor out_b = b.run();
        const auto t2 = Clock::now();
        if (checksum(out_a) != sum_a || checksum(out_b) != sum_b) {
            throw NumericError("paired_latency_ratio: outputs differ across trials");
        }
        ratios.push_back(elapsed_ns(t0, t1) / elapsed_ns(t1, t2));
    }
    return median_of(ratios);
}

std::string BenchReport::to_json() const {
    json j{{"schema_version", "1"},
           {"block", block},
           {"seq_len", seq_len},
           {"hidden", hidden},
           {"trials", trials},
           {"warmup", warmup},
           {"median_ns", median_ns},
           {"mean_ns", mean_ns},
           {"p90_ns", p90_ns},
           {"op_counts", {{"matmuls", op_counts.matmuls},
                          {"sequential_steps", op_counts.sequential_steps}}},
           {"output_checksum", output_checksum}};
    return j.dump(2);
}

BenchReport BenchReport::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("BenchReport: ") + e.what());
    }
    if (j.value("schema_version", "") != "1") {
        throw ParseError("BenchReport: unsupported schema_version");
    }
    BenchReport r;
    r.block = j.at("block").get<std::string>();
    r.seq_len = j.at("seq_len").get<std::size_t>();
    r.hidden = j.at("hidden").get<std::size_t>();
    r.trials = j.at("trials").get<std::size_t>();
    r.warmup = j.at("warmup").get<std::size_t>();
    r.median_ns = j.at("median_ns").get<double>();
    r.mean_ns = j.at("mean_ns").get<double>();
    r.p90_ns = j.at("p90_ns").get<double>();
    r.op_counts.matmuls = j.at("op_counts").at("matmuls").get<std::size_t>();
    r.op_counts.sequential_steps = j.at("op_counts").at("sequential_steps").get<std::size_t>();
    r.output_checksum = j.at("output_checksum").get<double>();
    return r;
}

std::string BenchReport::to_table() const {
    std::ostringstream os;
    os << "block      seq_len hidden   median_ms     mean_ms      p90_ms  matmuls  seq_steps\n";
    char line[160];
    std::snprintf(line, sizeof(line), "%-10s %7zu %6zu %11.3f %11.3f %11.3f %8zu %10zu\n",
                  block.c_str(), seq_len, hidden, median_ns / 1e6, mean_ns / 1e6, p90_ns / 1e6,
                  op_counts.matmuls, op_counts.sequential_steps);
    os << line;
    return os.str();
}

// ---- component profile ---------------------------------------------------------

ComponentProfile profile_components(const Model& model, const std::string& context,
                                    const std::string& question, std::size_t trials) {
    if (trials < 1) throw ContractError("profile_components: need at least 1 trial");
    NoGradGuard no_grad;

    const std::vector<std::string> names = {
        "featurize",          "low_level_encoding",  "high_level_encoding",
        "question_understanding", "qc_attention",    "self_attention",
        "answer_layer"};
    std::vector<std::vector<double>> samples(names.size());

    for (std::size_t trial = 0; trial < trials; ++trial) {
        std::vector<Clock::time_point> marks;
        marks.reserve(names.size() + 1);

        marks.push_back(Clock::now());
        FeaturizedPair in = build_inputs(context, question, model.vocab, model.tag_vocab,
                                         model.tags, model.word_match);
        marks.push_back(Clock::now());
        EncodeTrace t;
        RunOpts opts;
        stage_low(model, in, opts, t);
        marks.push_back(Clock::now());
        stage_high(model, in, opts, t);
        marks.push_back(Clock::now());
        stage_question_understanding(model, in, opts, t);
        marks.push_back(Clock::now());
        stage_qc_attention(model, in, opts, t);
        marks.push_back(Clock::now());
        stage_self_attention(model, in, opts, t);
        marks.push_back(Clock::now());
        t.q_summary = question_summary(model.summary, t.q_underst, &in.q_mask);
        AnswerScores scores = answer_scores(model, t.c_u, t.q_summary, in.c_mask);
        SpanPrediction span = span_search(scores.start, scores.end, model.cfg.max_span_len);
        (void)span;
        marks.push_back(Clock::now());

        for (std::size_t i = 0; i < names.size(); ++i) {
            samples[i].push_back(elapsed_ns(marks[i], marks[i + 1]));
        }
    }

    ComponentProfile profile;
    double total = 0.0;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const double med = median_of(samples[i]);
        profile.components.push_back({names[i], med, 0.0});
        total += med;
    }
    profile.total_ns = total;
    for (auto& entry : profile.components) entry.pct = 100.0 * entry.ns / total;
    return profile;
}

std::string ComponentProfile::to_json() const {
    json comps = json::array();
    for (const Entry& e : components) {
        comps.push_back({{"name", e.name}, {"ns", e.ns}, {"pct", e.pct}});
    }
    json j{{"schema_version", "1"}, {"components", comps}, {"total_ns", total_ns}};
    return j.dump(2);
}

std::string ComponentProfile::to_table() const {
    std::ostringstream os;
    os << "component                      median_ms     pct\n";
    for (const Entry& e : components) {
        char line[120];
        std::snprintf(line, sizeof(line), "%-28s %11.3f %6.1f%%\n", e.name.c_str(), e.ns / 1e6,
                      e.pct);
        os << line;
    }
    char line[120];
    std::snprintf(line, sizeof(line), "%-28s %11.3f\n", "total", total_ns / 1e6);
    os << line;
    return os.str();
}

// ---- single-example latency ------------------------------------------------------

LatencyReport latency_1example(const Model& model, const std::vector<QaExample>& examples,
                               std::size_t n_examples) {
    if (n_examples < 20) throw ContractError("latency_1example: need at least 20 examples");
    if (examples.empty()) throw DataError("latency_1example: empty dataset");

    NoGradGuard no_grad;
    std::vector<double> times;
    times.reserve(n_examples);
    for (std::size_t i = 0; i < n_examples; ++i) {
        const QaExample& ex = examples[i % examples.size()];
        const auto t0 = Clock::now();
        SpanPrediction span = predict(model, ex.context, ex.question);
        const auto t1 = Clock::now();
        (void)span;
        times.push_back(elapsed_ns(t0, t1));
    }

    LatencyReport report;
    report.median_ns = median_of(times);
    report.p90_ns = p90_of(times);
    report.n = n_examples;
    return report;
}

std::string LatencyReport::to_json() const {
    json j{{"schema_version", "1"},
           {"median_ns", median_ns},
           {"p90_ns", p90_ns},
           {"n", n}};
    return j.dump(2);
}

}  // namespace ffn
