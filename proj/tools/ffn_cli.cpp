// fastfusion: train, evaluate, and benchmark the reading-comprehension model.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ffn/bench.hpp"
#include "ffn/checkpoint.hpp"
#include "ffn/error.hpp"
#include "ffn/model.hpp"
#include "ffn/squad.hpp"
#include "ffn/training.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

ffn::Model random_model(std::size_t hidden, std::uint64_t seed) {
    // a model over the synthetic pool vocabulary, for profiling without a checkpoint
    std::vector<ffn::QaExample> sample = ffn::synth_task(50, seed);
    ffn::Vocabulary vocab = ffn::build_vocabulary(ffn::corpus_texts(sample));
    ffn::ModelConfig cfg;
    cfg.hidden = hidden;
    return ffn::make_model(cfg, std::move(vocab), ffn::make_default_tag_vocab(), seed);
}

std::string synth_context(std::size_t n_tokens, std::uint64_t seed) {
    ffn::Rng rng(seed);
    std::ostringstream os;
    for (std::size_t i = 0; i < n_tokens; ++i) {
        if (i) os << ' ';
        os << 'w' << (rng.below(80) < 10 ? "0" : "") << rng.below(80);
    }
    return os.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ffn::DataError("cannot open " + path + " for writing");
    out << text;
}

int run_bench(const std::string& block, std::size_t seq_len, std::size_t hidden,
              std::size_t trials, std::size_t warmup, const std::string& out_path,
              bool table) {
    ffn::BenchReport report = ffn::bench_block(block, seq_len, hidden, trials, warmup);
    if (table) {
        std::cout << report.to_table();
    } else {
        std::cout << report.to_json() << "\n";
    }
    if (!out_path.empty()) write_file(out_path, report.to_json() + "\n");
    return kExitOk;
}

int run_profile(const std::string& checkpoint, std::size_t context_len, std::size_t hidden,
                std::size_t trials, bool table) {
    ffn::Model model = checkpoint.empty() ? random_model(hidden, 7)
                                          : ffn::load_checkpoint(checkpoint);
    const std::string context = synth_context(context_len, 11);
    const std::string question = "find " + context.substr(0, 3) + " ?";
    ffn::ComponentProfile profile = ffn::profile_components(model, context, question, trials);
    std::cout << (table ? profile.to_table() : profile.to_json() + "\n");
    return kExitOk;
}

int run_train(const std::string& data_path, std::size_t synth_n, std::size_t epochs,
              std::uint64_t seed, const std::string& out_path, std::size_t hidden,
              std::size_t dev_count, double target_em, const std::string& log_path,
              const std::string& embeddings_path) {
    std::vector<ffn::QaExample> all;
    if (synth_n > 0) {
        all = ffn::synth_task(synth_n, seed);
    } else {
        ffn::SquadDataset ds = ffn::load_squad_json(data_path);
        for (const std::string& id : ds.alignment_warnings) {
            std::cerr << "warning: answer offset mismatch in example " << id << "\n";
        }
        all = std::move(ds.examples);
    }
    if (all.size() < 2) throw ffn::DataError("train: need at least 2 examples");

    dev_count = std::min(dev_count, all.size() / 5 + 1);
    std::vector<ffn::QaExample> dev(all.end() - static_cast<long>(dev_count), all.end());
    all.resize(all.size() - dev_count);

    ffn::Vocabulary vocab = ffn::build_vocabulary(ffn::corpus_texts(all), embeddings_path);
    ffn::ModelConfig cfg;
    cfg.hidden = hidden;
    ffn::Model model = ffn::make_model(cfg, std::move(vocab), ffn::make_default_tag_vocab(),
                                       seed);

    ffn::TrainConfig tcfg;
    tcfg.epochs = epochs;
    tcfg.seed = seed;
    tcfg.target_em = target_em;

    std::ofstream log_file;
    ffn::TrainLogger logger;
    if (!log_path.empty()) {
        log_file.open(log_path);
        if (!log_file) throw ffn::DataError("train: cannot open log " + log_path);
        logger.out = &log_file;
    } else {
        logger.out = &std::cout;
    }

    ffn::TrainResult result = ffn::train_run(model, all, dev, tcfg, &logger);
    const ffn::EpochMetrics& last = result.epochs.back();
    std::cout << "trained " << result.epochs.size() << " epochs, dev F1 " << last.dev.f1
              << ", dev EM " << last.dev.em << "\n";
    if (!out_path.empty()) {
        ffn::save_checkpoint(model, out_path);
        std::cout << "checkpoint written to " << out_path << "\n";
    }
    return kExitOk;
}

int run_eval(const std::string& checkpoint, const std::string& data_path,
             const std::string& predictions_out) {
    ffn::Model model = ffn::load_checkpoint(checkpoint);
    ffn::SquadDataset ds = ffn::load_squad_json(data_path);

    nlohmann::json predictions = nlohmann::json::object();
    double f1 = 0.0, em = 0.0;
    for (const ffn::QaExample& ex : ds.examples) {
        ffn::SpanPrediction pred = ffn::predict(model, ex.context, ex.question);
        predictions[ex.id] = pred.text;
        std::vector<std::string> golds;
        for (const ffn::Answer& a : ex.answers) golds.push_back(a.text);
        if (!golds.empty()) {
            ffn::F1Em score = ffn::f1_em(pred.text, golds);
            f1 += score.f1;
            em += score.em;
        }
    }
    const double n = static_cast<double>(ds.examples.size());
    std::cout << "n " << ds.examples.size() << "  F1 " << (n ? f1 / n : 0.0) << "  EM "
              << (n ? em / n : 0.0) << "\n";
    if (!predictions_out.empty()) write_file(predictions_out, predictions.dump(2) + "\n");
    return kExitOk;
}

int run_predict(const std::string& checkpoint, const std::string& context,
                const std::string& question) {
    ffn::Model model = ffn::load_checkpoint(checkpoint);
    ffn::SpanPrediction pred = ffn::predict(model, context, question);
    nlohmann::json j{{"answer", pred.text},
                     {"start_token", pred.start_token},
                     {"end_token", pred.end_token},
                     {"char_begin", pred.char_begin},
                     {"char_end", pred.char_end},
                     {"score", pred.score}};
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int run_latency(const std::string& checkpoint, const std::string& data_path, std::size_t n) {
    ffn::Model model = ffn::load_checkpoint(checkpoint);
    std::vector<ffn::QaExample> examples;
    if (data_path.empty()) {
        examples = ffn::synth_task(n, 3);
    } else {
        examples = ffn::load_squad_json(data_path).examples;
    }
    ffn::LatencyReport report = ffn::latency_1example(model, examples, n);
    std::cout << report.to_json() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FastFusionNet reading comprehension: training, inference, benchmarks"};
    app.require_subcommand(1);

    // bench
    auto* bench = app.add_subcommand("bench", "Time one recurrent block");
    std::string bench_block_name = "sru";
    std::size_t bench_seq = 64, bench_hidden = 128, bench_trials = 30, bench_warmup = 3;
    std::string bench_out;
    bool bench_table = false;
    bench->add_option("--block", bench_block_name, "sru|bi_sru|lstm|gru")
        ->check(CLI::IsMember({"sru", "bi_sru", "lstm", "gru"}));
    bench->add_option("--seq-len", bench_seq, "sequence length");
    bench->add_option("--hidden", bench_hidden, "input and hidden width");
    bench->add_option("--trials", bench_trials, "timed trials");
    bench->add_option("--warmup", bench_warmup, "discarded warmup passes");
    bench->add_option("--out", bench_out, "write the JSON report here");
    bench->add_flag("--table", bench_table, "print an aligned text table");

    // profile
    auto* profile = app.add_subcommand("profile", "Per-component inference profile");
    std::string profile_ckpt;
    std::size_t profile_ctx = 400, profile_hidden = 125, profile_trials = 5;
    bool profile_table = false;
    profile->add_option("--checkpoint", profile_ckpt, "model checkpoint (optional)");
    profile->add_option("--context-len", profile_ctx, "synthetic context length");
    profile->add_option("--hidden", profile_hidden, "hidden size when no checkpoint is given");
    profile->add_option("--trials", profile_trials, "profiling repetitions");
    profile->add_flag("--table", profile_table, "print an aligned text table");

    // train
    auto* train = app.add_subcommand("train", "Train on SQuAD-format data or the synthetic task");
    std::string train_data, train_out, train_log, train_embeddings;
    std::size_t train_synth = 0, train_epochs = 30, train_hidden = 125, train_dev = 200;
    std::uint64_t train_seed = 0;
    double train_target_em = -1.0;
    train->add_option("--data", train_data, "SQuAD v1.1 JSON file");
    train->add_option("--synth", train_synth, "generate N synthetic examples instead");
    train->add_option("--epochs", train_epochs, "epoch budget");
    train->add_option("--seed", train_seed, "random seed");
    train->add_option("--out", train_out, "checkpoint output path");
    train->add_option("--hidden", train_hidden, "SRU hidden size");
    train->add_option("--dev-count", train_dev, "held-out examples for per-epoch metrics");
    train->add_option("--target-em", train_target_em, "stop early at this dev EM");
    train->add_option("--log", train_log, "training log path (default stdout)");
    train->add_option("--embeddings", train_embeddings, "embedding text file (token f1..f300)");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on SQuAD-format data");
    std::string eval_ckpt, eval_data, eval_pred;
    eval->add_option("--checkpoint", eval_ckpt)->required();
    eval->add_option("--data", eval_data)->required();
    eval->add_option("--predictions-out", eval_pred, "JSON map id -> answer");

    // predict
    auto* predict = app.add_subcommand("predict", "Answer one question");
    std::string pred_ckpt, pred_context, pred_question;
    predict->add_option("--checkpoint", pred_ckpt)->required();
    predict->add_option("--context", pred_context)->required();
    predict->add_option("--question", pred_question)->required();

    // latency
    auto* latency = app.add_subcommand("latency", "Median/p90 single-example latency");
    std::string lat_ckpt, lat_data;
    std::size_t lat_n = 50;
    latency->add_option("--checkpoint", lat_ckpt)->required();
    latency->add_option("--data", lat_data, "SQuAD JSON (synthetic examples when omitted)");
    latency->add_option("--n", lat_n, "examples to time");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (bench->parsed()) {
            return run_bench(bench_block_name, bench_seq, bench_hidden, bench_trials,
                             bench_warmup, bench_out, bench_table);
        }
        if (profile->parsed()) {
            return run_profile(profile_ckpt, profile_ctx, profile_hidden, profile_trials,
                               profile_table);
        }
        if (train->parsed()) {
            if (train_data.empty() && train_synth == 0) {
                std::cerr << "train: either --data or --synth is required\n";
                return kExitUsage;
            }
            return run_train(train_data, train_synth, train_epochs, train_seed, train_out,
                             train_hidden, train_dev, train_target_em, train_log,
                             train_embeddings);
        }
        if (eval->parsed()) return run_eval(eval_ckpt, eval_data, eval_pred);
        if (predict->parsed()) return run_predict(pred_ckpt, pred_context, pred_question);
        if (latency->parsed()) return run_latency(lat_ckpt, lat_data, lat_n);
        std::cerr << app.help();
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
