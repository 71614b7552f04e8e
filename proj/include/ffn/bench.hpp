#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ffn/model.hpp"
#include "ffn/recurrent.hpp"
#include "ffn/squad.hpp"

namespace ffn {

// Wall-clock statistics for one recurrent block at a fixed input shape.
// Timing is single-threaded; outputs are checksummed every trial and must be
// identical before the numbers are trusted.
struct BenchReport {
    std::string block;  // sru | bi_sru | lstm | gru
    std::size_t seq_len = 0;
    std::size_t hidden = 0;
    std::size_t trials = 0;
    std::size_t warmup = 0;
    double median_ns = 0.0;
    double mean_ns = 0.0;
    double p90_ns = 0.0;
    OpCounts op_counts;
    double output_checksum = 0.0;

    std::string to_json() const;
    static BenchReport from_json(const std::string& text);
    std::string to_table() const;
};

BenchReport bench_block(const std::string& block, std::size_t seq_len, std::size_t hidden,
                        std::size_t trials, std::size_t warmup, std::uint64_t seed = 42);

struct ComponentProfile {
    struct Entry {
        std::string name;
        double ns = 0.0;
        double pct = 0.0;
    };
    std::vector<Entry> components;
    double total_ns = 0.0;

    std::string to_json() const;
    std::string to_table() const;
};

// Per-component medians over trials, with strict sequential barriers between
// components; percentages are taken against the summed component time.
ComponentProfile profile_components(const Model& model, const std::string& context,
                                    const std::string& question, std::size_t trials);

struct LatencyReport {
    double median_ns = 0.0;
    double p90_ns = 0.0;
    std::size_t n = 0;

    std::string to_json() const;
};

// End-to-end predict() per example at batch size one, featurization included.
LatencyReport latency_1example(const Model& model, const std::vector<QaExample>& examples,
                               std::size_t n_examples);

double median_of(std::vector<double> values);
double p90_of(std::vector<double> values);

// Median of per-pair latency ratios block_a/block_b with the two forwards
// interleaved trial by trial, so clock-speed drift cancels out of the
// comparison. Same deterministic-output verification as bench_block.
double paired_latency_ratio(const std::string& block_a, const std::string& block_b,
                            std::size_t seq_len, std::size_t hidden, std::size_t pairs,
                            std::size_t warmup, std::uint64_t seed = 42);

}  // namespace ffn
