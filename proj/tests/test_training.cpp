#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ffn/dropout.hpp"
#include "ffn/training.hpp"

using namespace ffn;

namespace {

Model small_model(const std::vector<QaExample>& data, std::size_t hidden, std::uint64_t seed) {
    ModelConfig cfg;
    cfg.hidden = hidden;
    return make_model(cfg, build_vocabulary(corpus_texts(data)), make_default_tag_vocab(),
                      seed);
}

std::vector<NamedParam> single_param(Tensor t) {
    return {{"p", std::move(t)}};
}

}  // namespace

TEST_CASE("span loss: one-hot gold is zero, uniform is 2 ln n") {
    Tensor onehot_s = Tensor::from_data({4}, {0, 1, 0, 0});
    Tensor onehot_e = Tensor::from_data({4}, {0, 0, 1, 0});
    CHECK(span_loss(onehot_s, onehot_e, 1, 2).value() == doctest::Approx(0.0).epsilon(1e-12));

    Tensor uniform({4}, 0.25);
    CHECK(span_loss(uniform, uniform, 0, 3).value() ==
          doctest::Approx(2.0 * std::log(4.0)).epsilon(1e-12));

    // random case against direct log computation
    Rng rng(1);
    std::vector<double> s(5), e(5);
    double ssum = 0, esum = 0;
    for (double& v : s) ssum += (v = rng.uniform(0.05, 1.0));
    for (double& v : e) esum += (v = rng.uniform(0.05, 1.0));
    for (double& v : s) v /= ssum;
    for (double& v : e) v /= esum;
    Tensor st = Tensor::from_data({5}, s), et = Tensor::from_data({5}, e);
    CHECK(span_loss(st, et, 3, 4).value() ==
          doctest::Approx(-std::log(s[3]) - std::log(e[4])).epsilon(1e-12));

    CHECK_THROWS_AS(span_loss(st, et, 5, 0), DataError);
}

TEST_CASE("span loss backpropagates into the distributions") {
    Rng rng(2);
    Tensor logits = Tensor::uniform({1, 6}, -1, 1, rng);
    auto f = [&](const Tensor& in) {
        Tensor probs = softmax_rows(in);
        return span_loss(probs, probs, 2, 4);
    };
    CHECK(finite_diff_check(f, logits, 1e-6) < 1e-4);
}

TEST_CASE("gradient clipping: exact scale and norm") {
    // total norm 40 across two tensors -> scale 0.5, post-norm 20
    Tensor a(Shape{2, 2}, 0.0, true);
    Tensor b(Shape{4}, 0.0, true);
    a.ensure_grad();
    b.ensure_grad();
    // 8 coordinates of sqrt(200) gives norm sqrt(8 * 200) = 40
    const double g = std::sqrt(200.0);
    for (double& v : a.grad()) v = g;
    for (double& v : b.grad()) v = g;

    std::vector<NamedParam> params = {{"a", a}, {"b", b}};
    const double scale = clip_gradients(params, 20.0);
    CHECK(scale == doctest::Approx(0.5).epsilon(1e-12));
    double norm = 0;
    for (double v : a.grad()) norm += v * v;
    for (double v : b.grad()) norm += v * v;
    CHECK(std::sqrt(norm) == doctest::Approx(20.0).epsilon(1e-9));

    // small gradients untouched
    for (double& v : a.grad()) v = 1.0;
    for (double& v : b.grad()) v = 1.0;
    CHECK(clip_gradients(params, 20.0) == 1.0);
    for (double v : a.grad()) CHECK(v == 1.0);
}

TEST_CASE("gradient clipping: random norms and idempotence") {
    Rng rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        Tensor t(Shape{3, 5}, 0.0, true);
        t.ensure_grad();
        for (double& v : t.grad()) v = rng.uniform(-10, 10);
        double before = 0;
        for (double v : t.grad()) before += v * v;
        before = std::sqrt(before);

        std::vector<NamedParam> params = single_param(t);
        clip_gradients(params, 20.0);
        double after = 0;
        for (double v : t.grad()) after += v * v;
        after = std::sqrt(after);
        CHECK(after == doctest::Approx(std::min(before, 20.0)).epsilon(1e-9));

        std::vector<double> once = t.grad();
        clip_gradients(params, 20.0);
        for (std::size_t i = 0; i < once.size(); ++i) {
            CHECK(t.grad()[i] == doctest::Approx(once[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("gradient clipping aborts on NaN") {
    Tensor t(Shape{2}, 0.0, true);
    t.ensure_grad();
    t.grad()[0] = std::nan("");
    std::vector<NamedParam> params = single_param(t);
    CHECK_THROWS_AS(clip_gradients(params, 20.0), NumericError);
}

TEST_CASE("adam: first step moves by about alpha in the gradient direction") {
    Tensor t = Tensor::from_data({3}, {1.0, -2.0, 0.5}, true);
    t.ensure_grad();
    t.grad() = {0.3, -0.7, 2.0};
    std::vector<NamedParam> params = single_param(t);
    OptimState opt;
    opt.init(params);
    adam_step(opt, params);
    CHECK(t[0] == doctest::Approx(1.0 - 0.001).epsilon(1e-6));
    CHECK(t[1] == doctest::Approx(-2.0 + 0.001).epsilon(1e-6));
    CHECK(t[2] == doctest::Approx(0.5 - 0.001).epsilon(1e-6));
    CHECK(opt.step == 1);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    Tensor t = Tensor::from_data({3}, {1.0, -2.0, 0.5}, true);
    t.ensure_grad();
    std::vector<NamedParam> params = single_param(t);
    OptimState opt;
    opt.init(params);
    adam_step(opt, params);
    CHECK(t[0] == 1.0);
    CHECK(t[1] == -2.0);
    CHECK(t[2] == 0.5);
}

TEST_CASE("adam: three steps on f(w)=w^2 shrink w") {
    Tensor w = Tensor::from_data({1}, {1.0}, true);
    std::vector<NamedParam> params = single_param(w);
    OptimState opt;
    opt.init(params);
    double prev = 1.0;
    for (int i = 0; i < 3; ++i) {
        w.ensure_grad();
        w.grad() = {2.0 * w[0]};
        adam_step(opt, params);
        CHECK(std::abs(w[0]) < std::abs(prev));
        prev = w[0];
        w.zero_grad();
    }
}

TEST_CASE("frozen embedding rows never move, tuned rows do") {
    std::vector<QaExample> data = synth_task(12, 42);
    Model m = small_model(data, 8, 1);

    // snapshot
    const std::vector<double> before = m.vocab.embeddings.data();
    const std::size_t v_rows = m.vocab.embeddings.rows();

    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.epochs = 1;
    cfg.seed = 7;
    OptimState opt;
    opt.init(m.trainable());
    Rng rng(cfg.seed);
    train_epoch(m, data, {data[0]}, cfg, opt, rng);

    const std::vector<double>& after = m.vocab.embeddings.data();
    double tuned_delta = 0.0;
    for (std::size_t r = 0; r < v_rows; ++r) {
        const bool tunable = m.vocab.is_tunable(static_cast<int>(r));
        for (std::size_t j = 0; j < kGloveDim; ++j) {
            const double d = std::abs(after[r * kGloveDim + j] - before[r * kGloveDim + j]);
            if (!tunable) {
                CHECK(d == 0.0);
            } else {
                tuned_delta += d;
            }
        }
    }
    CHECK(tuned_delta > 0.0);
}

TEST_CASE("a fixed batch overfits: loss decreases over 50 steps") {
    std::vector<QaExample> batch = synth_task(4, 11);
    Model m = small_model(batch, 8, 2);
    const std::vector<NamedParam> params = m.trainable();
    OptimState opt;
    opt.init(params);
    Rng rng(1);

    auto batch_loss = [&](bool train_mode) {
        double total = 0.0;
        for (const QaExample& ex : batch) {
            Tape tape;
            Tape::Scope scope(tape);
            FeaturizeOptions fopts;
            fopts.training = train_mode;
            fopts.rng = &rng;
            FeaturizedPair in = build_inputs(ex.context, ex.question, m.vocab, m.tag_vocab,
                                             m.tags, m.word_match, fopts);
            auto tokens = tokenize(ex.context);
            SpanAlignment a = align_answer_span(ex.answers[0], tokens);
            RunOpts ropts{train_mode, &rng};
            EncodeTrace t = encode(m, in, ropts);
            AnswerScores s = answer_scores(m, t.c_u, t.q_summary, in.c_mask);
            Tensor loss = scale(span_loss(s.start, s.end, a.start_token, a.end_token), 0.25);
            total += loss.value();
            if (train_mode) tape.backward(loss);
        }
        return total;
    };

    const double initial = batch_loss(false);
    for (int step = 0; step < 50; ++step) {
        batch_loss(true);
        apply_freeze(params);
        clip_gradients(params, 20.0);
        adam_step(opt, params);
        zero_grads(params);
    }
    const double final_loss = batch_loss(false);
    CHECK(final_loss < 0.5 * initial);
}

TEST_CASE("learning rate zero leaves every parameter bit-identical") {
    std::vector<QaExample> data = synth_task(6, 13);
    Model m = small_model(data, 8, 3);
    const std::vector<NamedParam> params = m.trainable();

    std::vector<std::vector<double>> before;
    for (const NamedParam& p : params) before.push_back(p.tensor.data());

    TrainConfig cfg;
    cfg.batch_size = 3;
    cfg.epochs = 1;
    OptimState opt;
    opt.alpha = 0.0;
    opt.init(params);
    Rng rng(5);
    train_epoch(m, data, {data[0]}, cfg, opt, rng);

    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::vector<double>& now = params[i].tensor.data();
        for (std::size_t j = 0; j < now.size(); ++j) CHECK(now[j] == before[i][j]);
    }
}

TEST_CASE("same seed, same losses, bit for bit") {
    std::vector<QaExample> data = synth_task(10, 17);

    auto run = [&]() {
        Model m = small_model(data, 8, 4);
        TrainConfig cfg;
        cfg.batch_size = 5;
        cfg.epochs = 2;
        cfg.seed = 99;
        std::vector<QaExample> dev(data.begin(), data.begin() + 2);
        return train_run(m, data, dev, cfg).step_losses;
    };
    const std::vector<double> a = run();
    const std::vector<double> b = run();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("variational dropout holds one mask across time steps") {
    Rng rng(7);
    Tensor vm = variational_row_mask(2, 16, 0.4, rng);
    for (std::size_t j = 0; j < 16; ++j) CHECK(vm.at(0, j) == vm.at(1, j));

    // masks differ across draws (step to step), overwhelmingly likely
    Tensor other = variational_row_mask(2, 16, 0.4, rng);
    bool any_diff = false;
    for (std::size_t j = 0; j < 16; ++j) any_diff = any_diff || vm.at(0, j) != other.at(0, j);
    CHECK(any_diff);
}

TEST_CASE("synthetic task invariants") {
    std::vector<QaExample> data = synth_task(200, 23);
    CHECK(data.size() == 200);
    for (const QaExample& ex : data) {
        REQUIRE(ex.answers.size() == 1);
        const Answer& a = ex.answers[0];
        CHECK(ex.context.substr(a.char_start, a.text.size()) == a.text);
        // spans are 1..5 words, well under the search limit
        const std::size_t words = 1 + std::count(a.text.begin(), a.text.end(), ' ');
        CHECK(words >= 1);
        CHECK(words <= 5);
        // context length in tokens
        const std::size_t n = tokenize(ex.context).size();
        CHECK(n >= 20);
        CHECK(n <= 60);
    }
}

TEST_CASE("training logger format") {
    std::ostringstream os;
    TrainLogger log{&os};
    log.step_line(3, 1.5, 10.0, 1.0);
    EvalResult dev{0.5, 0.25, 4};
    log.epoch_line(1, 2.0, dev);
    CHECK(os.str() == "step\t3\t1.5\t10\t1\nepoch\t1\t2\t0.5\t0.25\n");
}

TEST_CASE("empty dataset is a data error") {
    std::vector<QaExample> data = synth_task(2, 29);
    Model m = small_model(data, 8, 5);
    TrainConfig cfg;
    OptimState opt;
    opt.init(m.trainable());
    Rng rng(1);
    CHECK_THROWS_AS(train_epoch(m, {}, data, cfg, opt, rng), DataError);
}
