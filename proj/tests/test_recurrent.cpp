#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ffn/recurrent.hpp"
#include "oracles.hpp"

using namespace ffn;

namespace {

// per-step refactoring of the SRU forward pass: the matmuls are done one
// time step at a time instead of batched, everything else is identical
Tensor sru_forward_stepwise(const SruLayerParams& p, const Tensor& x, const Tensor& c0) {
    std::vector<Tensor> rows;
    Tensor c = reshape(c0, {1, p.d_hidden()});
    for (std::size_t t = 0; t < x.rows(); ++t) {
        Tensor xt = slice_rows(x, t, 1);
        Tensor x_tilde = matmul(xt, p.w);
        Tensor f = sigmoid(add_row_bias(matmul(xt, p.w_f), p.b_f));
        Tensor r = sigmoid(add_row_bias(matmul(xt, p.w_r), p.b_r));
        Tensor x_res = p.has_residual_projection() ? matmul(xt, p.w_res) : xt;
        c = add(mul(f, c), mul(one_minus(f), x_tilde));
        rows.push_back(add(mul(r, tanh(c)), mul(one_minus(r), x_res)));
    }
    return concat_rows(rows);
}

}  // namespace

TEST_CASE("sru: zero input, zero biases, zero state stays zero") {
    Rng rng(1);
    SruLayerParams p = make_sru_params(3, 3, rng);
    Tensor x({4, 3});
    Tensor c0({1, 3});
    SruOutput out = sru_forward(p, x, c0);
    for (double v : out.h.data()) CHECK(v == 0.0);
    for (double v : out.c_final.data()) CHECK(v == 0.0);
}

TEST_CASE("sru: T=1 equals one manual application of the equations") {
    Rng rng(2);
    SruLayerParams p = make_sru_params(3, 3, rng);
    Tensor x = Tensor::uniform({1, 3}, -1, 1, rng);
    Tensor c0 = Tensor::uniform({1, 3}, -1, 1, rng);
    SruOutput out = sru_forward(p, x, c0);

    for (std::size_t j = 0; j < 3; ++j) {
        double xt = 0, fp = 0, rp = 0;
        for (std::size_t i = 0; i < 3; ++i) {
            xt += x[i] * p.w.at(i, j);
            fp += x[i] * p.w_f.at(i, j);
            rp += x[i] * p.w_r.at(i, j);
        }
        const double f = 1.0 / (1.0 + std::exp(-(fp + p.b_f[j])));
        const double r = 1.0 / (1.0 + std::exp(-(rp + p.b_r[j])));
        const double c = f * c0[j] + (1 - f) * xt;
        const double h = r * std::tanh(c) + (1 - r) * x[j];
        CHECK(out.h[j] == doctest::Approx(h).epsilon(1e-14));
        CHECK(out.c_final[j] == doctest::Approx(c).epsilon(1e-14));
    }
}

TEST_CASE("sru matches the naive per-timestep oracle") {
    Rng rng(3);
    SruLayerParams p = make_sru_params(3, 3, rng);
    Tensor x = Tensor::uniform({4, 3}, -1, 1, rng);
    Tensor c0({1, 3});
    SruOutput out = sru_forward(p, x, c0);
    auto ref = oracle::sru(p, oracle::to_mat(x), {0, 0, 0});
    for (std::size_t t = 0; t < 4; ++t) {
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(out.h.at(t, j) == doctest::Approx(ref[t][j]).epsilon(1e-12));
        }
    }
}

TEST_CASE("sru with residual projection matches the oracle") {
    Rng rng(4);
    SruLayerParams p = make_sru_params(5, 3, rng);
    CHECK(p.has_residual_projection());
    Tensor x = Tensor::uniform({6, 5}, -1, 1, rng);
    Tensor c0({1, 3});
    SruOutput out = sru_forward(p, x, c0);
    auto ref = oracle::sru(p, oracle::to_mat(x), {0, 0, 0});
    for (std::size_t t = 0; t < 6; ++t) {
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(out.h.at(t, j) == doctest::Approx(ref[t][j]).epsilon(1e-12));
        }
    }
}

TEST_CASE("parallel/sequential split is a pure refactoring") {
    Rng rng(5);
    for (std::size_t d_in : {4ul, 6ul}) {
        SruLayerParams p = make_sru_params(d_in, 4, rng);
        Tensor x = Tensor::uniform({7, d_in}, -1, 1, rng);
        Tensor c0({1, 4});
        Tensor batched = sru_forward(p, x, c0).h;
        Tensor stepwise = sru_forward_stepwise(p, x, c0);
        for (std::size_t i = 0; i < batched.size(); ++i) {
            CHECK(batched[i] == doctest::Approx(stepwise[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("sru gradient check") {
    Rng rng(6);
    SruLayerParams p = make_sru_params(8, 8, rng);
    Tensor x = Tensor::uniform({5, 8}, -1, 1, rng);
    Tensor c0({1, 8});
    auto f = [&](const Tensor& in) { return sum_all(sru_forward(p, in, c0).h); };
    CHECK(finite_diff_check(f, x, 1e-5) < 1e-4);

    // parameters too
    auto fw = [&](const Tensor&) { return sum_all(sru_forward(p, x, c0).h); };
    CHECK(finite_diff_check(fw, p.w_f, 1e-5) < 1e-4);
    CHECK(finite_diff_check(fw, p.b_r, 1e-5) < 1e-4);
    CHECK(finite_diff_check(fw, p.w, 1e-5) < 1e-4);
}

TEST_CASE("sru recurrence uses c_final gradient") {
    Rng rng(7);
    SruLayerParams p = make_sru_params(4, 4, rng);
    Tensor x = Tensor::uniform({5, 4}, -1, 1, rng);
    Tensor c0({1, 4});
    auto f = [&](const Tensor& in) { return sum_all(sru_forward(p, in, c0).c_final); };
    CHECK(finite_diff_check(f, x, 1e-5) < 1e-4);
}

TEST_CASE("bi_sru: reversing the input swaps direction halves") {
    Rng rng(8);
    SruLayerParams pf = make_sru_params(3, 2, rng);
    SruLayerParams pb = make_sru_params(3, 2, rng);
    Tensor x = Tensor::uniform({5, 3}, -1, 1, rng);
    std::vector<std::uint8_t> mask(5, 1);

    Tensor fwd = bi_sru(pf, pb, x, mask);
    Tensor swapped = bi_sru(pb, pf, reverse_rows(x), mask);
    // forward half on x == time-reversed backward half on reversed x
    for (std::size_t t = 0; t < 5; ++t) {
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(fwd.at(t, j) == doctest::Approx(swapped.at(4 - t, 2 + j)).epsilon(1e-12));
            CHECK(fwd.at(t, 2 + j) == doctest::Approx(swapped.at(4 - t, j)).epsilon(1e-12));
        }
    }
}

TEST_CASE("bi_sru: T=1 gives both directions the same step") {
    Rng rng(9);
    SruLayerParams pf = make_sru_params(3, 2, rng);
    SruLayerParams pb = make_sru_params(3, 2, rng);
    Tensor x = Tensor::uniform({1, 3}, -1, 1, rng);
    Tensor c0({1, 2});
    Tensor out = bi_sru(pf, pb, x, {1});
    Tensor f_only = sru_forward(pf, x, c0).h;
    Tensor b_only = sru_forward(pb, x, c0).h;
    for (std::size_t j = 0; j < 2; ++j) {
        CHECK(out.at(0, j) == f_only.at(0, j));
        CHECK(out.at(0, 2 + j) == b_only.at(0, j));
    }
}

TEST_CASE("bi_sru: trailing pads do not contaminate the valid steps") {
    Rng rng(10);
    SruLayerParams pf = make_sru_params(3, 2, rng);
    SruLayerParams pb = make_sru_params(3, 2, rng);
    Tensor x = Tensor::uniform({7, 3}, -1, 1, rng);
    std::vector<std::uint8_t> mask = {1, 1, 1, 1, 0, 0, 0};

    Tensor padded = bi_sru(pf, pb, x, mask);
    Tensor truncated = bi_sru(pf, pb, slice_rows(x, 0, 4), {1, 1, 1, 1});
    for (std::size_t t = 0; t < 4; ++t) {
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(padded.at(t, j) == truncated.at(t, j));
        }
    }
    for (std::size_t t = 4; t < 7; ++t) {
        for (std::size_t j = 0; j < 4; ++j) CHECK(padded.at(t, j) == 0.0);
    }
}

TEST_CASE("bi_sru rejects non-contiguous masks") {
    Rng rng(11);
    SruLayerParams pf = make_sru_params(3, 2, rng);
    SruLayerParams pb = make_sru_params(3, 2, rng);
    Tensor x({4, 3});
    CHECK_THROWS_AS(bi_sru(pf, pb, x, {1, 0, 1, 0}), ContractError);
}

TEST_CASE("bi_sru gradient check") {
    Rng rng(12);
    SruLayerParams pf = make_sru_params(8, 4, rng);
    SruLayerParams pb = make_sru_params(8, 4, rng);
    Tensor x = Tensor::uniform({5, 8}, -1, 1, rng);
    std::vector<std::uint8_t> mask(5, 1);
    auto f = [&](const Tensor& in) { return sum_all(bi_sru(pf, pb, in, mask)); };
    CHECK(finite_diff_check(f, x, 1e-5) < 1e-4);
}

TEST_CASE("stacked_bi_sru output width is 2*hidden regardless of input width") {
    Rng rng(13);
    for (std::size_t d_in : {10ul, 33ul}) {
        StackedBiSruParams stack = make_stacked_bi_sru(d_in, 125, 2, rng);
        Tensor x = Tensor::uniform({3, d_in}, -1, 1, rng);
        std::vector<std::uint8_t> mask(3, 1);
        Tensor out = stacked_bi_sru(stack, x, mask);
        CHECK(out.cols() == 250);
        CHECK(out.rows() == 3);
    }
}

TEST_CASE("stacked_bi_sru composes bi_sru layers") {
    Rng rng(14);
    StackedBiSruParams stack = make_stacked_bi_sru(5, 3, 2, rng);
    Tensor x = Tensor::uniform({4, 5}, -1, 1, rng);
    std::vector<std::uint8_t> mask(4, 1);

    Tensor composed = stacked_bi_sru(stack, x, mask);
    Tensor manual = bi_sru(stack.layers[1].fwd, stack.layers[1].bwd,
                           bi_sru(stack.layers[0].fwd, stack.layers[0].bwd, x, mask), mask);
    for (std::size_t i = 0; i < composed.size(); ++i) CHECK(composed[i] == manual[i]);

    StackedBiSruParams single = make_stacked_bi_sru(5, 3, 1, rng);
    Tensor one = stacked_bi_sru(single, x, mask);
    Tensor direct = bi_sru(single.layers[0].fwd, single.layers[0].bwd, x, mask);
    for (std::size_t i = 0; i < one.size(); ++i) CHECK(one[i] == direct[i]);
}

TEST_CASE("deterministic outputs across repeated calls") {
    Rng rng(15);
    StackedBiSruParams stack = make_stacked_bi_sru(4, 3, 2, rng);
    Tensor x = Tensor::uniform({6, 4}, -1, 1, rng);
    std::vector<std::uint8_t> mask(6, 1);
    Tensor a = stacked_bi_sru(stack, x, mask);
    Tensor b = stacked_bi_sru(stack, x, mask);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("lstm: zero parameters give zero outputs") {
    Rng rng(16);
    LstmParams p = make_lstm_params(3, 4, rng);
    for (double& v : p.w_ih.data()) v = 0.0;
    for (double& v : p.w_hh.data()) v = 0.0;
    Tensor x = Tensor::uniform({5, 3}, -1, 1, rng);
    Tensor out = lstm_forward(p, x);
    for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("lstm matches the naive per-step oracle, T=1 and random") {
    Rng rng(17);
    LstmParams p = make_lstm_params(3, 3, rng);
    for (double& v : p.bias.data()) v = rng.uniform(-0.5, 0.5);

    Tensor x1 = Tensor::uniform({1, 3}, -1, 1, rng);
    auto ref1 = oracle::lstm(p, oracle::to_mat(x1));
    Tensor out1 = lstm_forward(p, x1);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(out1[j] == doctest::Approx(ref1[0][j]).epsilon(1e-12));
    }

    Tensor x = Tensor::uniform({4, 3}, -1, 1, rng);
    auto ref = oracle::lstm(p, oracle::to_mat(x));
    Tensor out = lstm_forward(p, x);
    for (std::size_t t = 0; t < 4; ++t) {
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(out.at(t, j) == doctest::Approx(ref[t][j]).epsilon(1e-12));
        }
    }
}

TEST_CASE("lstm gradient check") {
    Rng rng(18);
    LstmParams p = make_lstm_params(8, 4, rng);
    Tensor x = Tensor::uniform({5, 8}, -1, 1, rng);
    auto f = [&](const Tensor& in) { return sum_all(lstm_forward(p, in)); };
    CHECK(finite_diff_check(f, x, 1e-5) < 1e-4);
    auto fw = [&](const Tensor&) { return sum_all(lstm_forward(p, x)); };
    CHECK(finite_diff_check(fw, p.w_hh, 1e-5) < 1e-4);
}

TEST_CASE("gru cell: saturated update gate keeps the hidden state") {
    Rng rng(19);
    GruParams p = make_gru_params(3, 3, rng);
    for (double& v : p.b_z.data()) v = 40.0;  // z -> 1
    Tensor x = Tensor::uniform({1, 3}, -1, 1, rng);
    Tensor h = Tensor::uniform({1, 3}, -1, 1, rng);
    Tensor out = gru_cell(p, x, h);
    for (std::size_t j = 0; j < 3; ++j) CHECK(out[j] == doctest::Approx(h[j]).epsilon(1e-9));
}

TEST_CASE("gru cell: zero input, hidden, and biases give zero output") {
    Rng rng(20);
    GruParams p = make_gru_params(3, 3, rng);
    Tensor x({1, 3});
    Tensor h({1, 3});
    Tensor out = gru_cell(p, x, h);
    for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("gru cell matches the scalar oracle") {
    Rng rng(21);
    GruParams p = make_gru_params(4, 3, rng);
    for (Tensor* b : {&p.b_z, &p.b_r, &p.b_n}) {
        for (double& v : b->data()) v = rng.uniform(-0.3, 0.3);
    }
    Tensor x = Tensor::uniform({1, 4}, -1, 1, rng);
    Tensor h = Tensor::uniform({1, 3}, -1, 1, rng);
    Tensor out = gru_cell(p, x, h);
    auto ref = oracle::gru_cell(p, x.data(), h.data());
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(out[j] == doctest::Approx(ref[j]).epsilon(1e-12));
    }
}

TEST_CASE("gru_forward equals iterated gru_cell") {
    Rng rng(22);
    GruParams p = make_gru_params(3, 3, rng);
    Tensor x = Tensor::uniform({5, 3}, -1, 1, rng);
    Tensor seq = gru_forward(p, x);
    Tensor h({1, 3});
    for (std::size_t t = 0; t < 5; ++t) {
        h = gru_cell(p, slice_rows(x, t, 1), h);
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(seq.at(t, j) == doctest::Approx(h[j]).epsilon(1e-12));
        }
    }
}

TEST_CASE("gru cell gradient check") {
    Rng rng(23);
    GruParams p = make_gru_params(8, 8, rng);
    Tensor x = Tensor::uniform({1, 8}, -1, 1, rng);
    Tensor h = Tensor::uniform({1, 8}, -1, 1, rng);
    auto f = [&](const Tensor& in) { return sum_all(gru_cell(p, in, h)); };
    CHECK(finite_diff_check(f, x, 1e-5) < 1e-4);
    auto fh = [&](const Tensor& in) { return sum_all(gru_cell(p, x, in)); };
    CHECK(finite_diff_check(fh, h, 1e-5) < 1e-4);
}

TEST_CASE("analytic op counts") {
    Rng rng(24);
    SruLayerParams same = make_sru_params(8, 8, rng);
    SruLayerParams proj = make_sru_params(6, 8, rng);
    CHECK(sru_op_counts(same, 16).matmuls == 3);
    CHECK(sru_op_counts(same, 16).sequential_steps == 16);
    CHECK(sru_op_counts(proj, 16).matmuls == 4);
    CHECK(bi_sru_op_counts(same, same, 16).matmuls == 6);
    CHECK(bi_sru_op_counts(same, same, 16).sequential_steps == 32);
    CHECK(lstm_op_counts(16).matmuls == 17);
    CHECK(lstm_op_counts(16).sequential_steps == 16);
    CHECK(gru_op_counts(16).matmuls == 3 + 48);
    // doubling T doubles the sequential step count exactly
    CHECK(sru_op_counts(same, 32).sequential_steps == 2 * sru_op_counts(same, 16).sequential_steps);
}

TEST_CASE("dimension errors on mismatched inputs") {
    Rng rng(25);
    SruLayerParams p = make_sru_params(4, 4, rng);
    Tensor bad({3, 5});
    Tensor c0({1, 4});
    CHECK_THROWS_AS(sru_forward(p, bad, c0), DimensionError);
    LstmParams lp = make_lstm_params(4, 4, rng);
    CHECK_THROWS_AS(lstm_forward(lp, bad), DimensionError);
    GruParams gp = make_gru_params(4, 4, rng);
    CHECK_THROWS_AS(gru_cell(gp, Tensor({1, 5}), Tensor({1, 4})), DimensionError);
}
