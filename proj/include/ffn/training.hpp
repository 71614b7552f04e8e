#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "ffn/model.hpp"
#include "ffn/squad.hpp"

namespace ffn {

// Adam with bias correction; alpha comes from the training recipe, the
// remaining constants are the standard defaults.
struct OptimState {
    double alpha = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t step = 0;
    std::vector<std::vector<double>> m1;  // parallel to the parameter list
    std::vector<std::vector<double>> m2;

    void init(const std::vector<NamedParam>& params);
};

struct TrainConfig {
    std::size_t batch_size = 32;
    double clip_norm = 20.0;
    std::size_t epochs = 30;
    std::uint64_t seed = 0;
    // stop once dev EM reaches this (ignored when negative)
    double target_em = -1.0;
};

// -log s[gold_start] - log e[gold_end] for one example; callers scale by
// 1/batch to average.
Tensor span_loss(const Tensor& start, const Tensor& end, std::size_t gold_start,
                 std::size_t gold_end);

// Zeroes gradients of frozen embedding rows so they never train and never
// contribute to the clip norm.
void apply_freeze(const std::vector<NamedParam>& params);

// Global l2 clip; returns the applied scale (1.0 when under the limit).
double clip_gradients(const std::vector<NamedParam>& params, double max_norm);

void adam_step(OptimState& opt, const std::vector<NamedParam>& params);

void zero_grads(const std::vector<NamedParam>& params);

struct EvalResult {
    double f1 = 0.0;
    double em = 0.0;
    std::size_t n = 0;
};

EvalResult evaluate(const Model& model, const std::vector<QaExample>& examples);

// Tab-separated, line-oriented: "step\t<k>\t<loss>\t<grad_norm>\t<clip_scale>"
// and "epoch\t<k>\t<mean_loss>\t<dev_f1>\t<dev_em>".
struct TrainLogger {
    std::ostream* out = nullptr;

    void step_line(std::size_t step, double loss, double grad_norm, double clip_scale);
    void epoch_line(std::size_t epoch, double mean_loss, const EvalResult& dev);
};

struct EpochMetrics {
    double mean_loss = 0.0;
    EvalResult dev;
};

EpochMetrics train_epoch(Model& model, const std::vector<QaExample>& train,
                         const std::vector<QaExample>& dev, const TrainConfig& cfg,
                         OptimState& opt, Rng& rng, TrainLogger* log = nullptr,
                         std::vector<double>* step_losses = nullptr);

struct TrainResult {
    std::vector<double> step_losses;  // one per optimizer step, in order
    std::vector<EpochMetrics> epochs;
    bool reached_target = false;
};

TrainResult train_run(Model& model, const std::vector<QaExample>& train,
                      const std::vector<QaExample>& dev, const TrainConfig& cfg,
                      TrainLogger* log = nullptr);

// Desk-scale stand-in for SQuAD: contexts of 20-60 pool words with a planted
// answer span of 1-5 words that the question sequence matches uniquely.
std::vector<QaExample> synth_task(std::size_t n_examples, std::uint64_t seed);

// Vocabulary sources for a dataset (contexts + questions).
std::vector<std::string> corpus_texts(const std::vector<QaExample>& examples);

}  // namespace ffn
