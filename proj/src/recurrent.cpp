#include "ffn/recurrent.hpp"

#include <cmath>

#include "ffn/dropout.hpp"
#include "ffn/error.hpp"

namespace ffn {

namespace {

double init_bound(std::size_t d_in) { return std::sqrt(1.0 / static_cast<double>(d_in)); }

Tensor init_matrix(std::size_t r, std::size_t c, Rng& rng) {
    const double b = init_bound(r);
    return Tensor::uniform({r, c}, -b, b, rng, /*requires_grad=*/true);
}

void check_state(const Tensor& c0, std::size_t d_h, const char* op) {
    if (c0.size() != d_h) {
        throw DimensionError(std::string(op) + ": state width " + std::to_string(c0.size()) +
                             " does not match hidden size " + std::to_string(d_h));
    }
}

}  // namespace

SruLayerParams make_sru_params(std::size_t d_in, std::size_t d_h, Rng& rng) {
    SruLayerParams p;
    p.w = init_matrix(d_in, d_h, rng);
    p.w_f = init_matrix(d_in, d_h, rng);
    p.b_f = Tensor(Shape{d_h}, 0.0, true);
    p.w_r = init_matrix(d_in, d_h, rng);
    p.b_r = Tensor(Shape{d_h}, 0.0, true);
    if (d_in != d_h) p.w_res = init_matrix(d_in, d_h, rng);
    return p;
}

SruOutput sru_recurrence(const Tensor& x_tilde, const Tensor& f_lin, const Tensor& r_lin,
                         const Tensor& b_f, const Tensor& b_r, const Tensor& x_res,
                         const Tensor& c0) {
    const std::size_t t_len = x_tilde.rows(), d = x_tilde.cols();
    if (f_lin.shape() != x_tilde.shape() || r_lin.shape() != x_tilde.shape() ||
        x_res.shape() != x_tilde.shape()) {
        throw DimensionError("sru_recurrence: gate tensors must share the input shape");
    }
    if (b_f.size() != d || b_r.size() != d) {
        throw DimensionError("sru_recurrence: bias width mismatch");
    }
    check_state(c0, d, "sru_recurrence");
    if (t_len == 0) throw ContractError("sru_recurrence: empty sequence");

    Tensor h(Shape{t_len, d});
    Tensor c_final(Shape{1, d});
    // c_t is kept for the backward pass; gates are recomputed there.
    std::vector<double> c_seq(t_len * d);

    const double* xt = x_tilde.data().data();
    const double* fl = f_lin.data().data();
    const double* rl = r_lin.data().data();
    const double* xr = x_res.data().data();
    const double* bf = b_f.data().data();
    const double* br = b_r.data().data();
    const double* c0d = c0.data().data();
    double* hd = h.data().data();

    // time-outer, unit-inner: the carried state row stays in L1 while the
    // gate matrices stream linearly
    std::vector<double> c(c0d, c0d + d);
    for (std::size_t t = 0; t < t_len; ++t) {
        const std::size_t row = t * d;
        for (std::size_t u = 0; u < d; ++u) {
            const std::size_t i = row + u;
            const double f = 1.0 / (1.0 + std::exp(-(fl[i] + bf[u])));
            const double r = 1.0 / (1.0 + std::exp(-(rl[i] + br[u])));
            c[u] = f * c[u] + (1.0 - f) * xt[i];
            c_seq[i] = c[u];
            hd[i] = r * std::tanh(c[u]) + (1.0 - r) * xr[i];
        }
    }
    std::copy(c.begin(), c.end(), c_final.data().begin());

    if (tape_active({&x_tilde, &f_lin, &r_lin, &b_f, &b_r, &x_res, &c0})) {
        h.set_requires_grad(true);
        h.ensure_grad();
        c_final.set_requires_grad(true);
        c_final.ensure_grad();
        for (const Tensor* in : {&x_tilde, &f_lin, &r_lin, &b_f, &b_r, &x_res, &c0}) {
            if (in->requires_grad()) const_cast<Tensor*>(in)->ensure_grad();
        }
        auto xtn = x_tilde.node(), fn = f_lin.node(), rn = r_lin.node(), bfn = b_f.node(),
             brn = b_r.node(), xrn = x_res.node(), c0n = c0.node(), hn = h.node(),
             cfn = c_final.node();
        Tape::current()->record([xtn, fn, rn, bfn, brn, xrn, c0n, hn, cfn,
                                 c_seq = std::move(c_seq), t_len, d] {
            const double* dh = hn->grad.data();
            const double* dcf = cfn->grad.data();
            std::vector<double> dc(dcf, dcf + d);
            for (std::size_t t = t_len; t-- > 0;) {
                const std::size_t row = t * d;
                for (std::size_t u = 0; u < d; ++u) {
                    const std::size_t i = row + u;
                    const double f = 1.0 / (1.0 + std::exp(-(fn->data[i] + bfn->data[u])));
                    const double r = 1.0 / (1.0 + std::exp(-(rn->data[i] + brn->data[u])));
                    const double g = std::tanh(c_seq[i]);
                    const double dh_i = dh[i];
                    const double dr = dh_i * (g - xrn->data[i]) * r * (1.0 - r);
                    if (rn->requires_grad) rn->grad[i] += dr;
                    if (brn->requires_grad) brn->grad[u] += dr;
                    if (xrn->requires_grad) xrn->grad[i] += dh_i * (1.0 - r);
                    const double dct = dc[u] + dh_i * r * (1.0 - g * g);
                    const double c_prev = t > 0 ? c_seq[i - d] : c0n->data[u];
                    const double df = dct * (c_prev - xtn->data[i]) * f * (1.0 - f);
                    if (fn->requires_grad) fn->grad[i] += df;
                    if (bfn->requires_grad) bfn->grad[u] += df;
                    if (xtn->requires_grad) xtn->grad[i] += dct * (1.0 - f);
                    dc[u] = dct * f;
                }
            }
            if (c0n->requires_grad) {
                for (std::size_t u = 0; u < d; ++u) c0n->grad[u] += dc[u];
            }
        });
    }
    return {h, c_final};
}

SruOutput sru_forward(const SruLayerParams& params, const Tensor& x, const Tensor& c0,
                      const Tensor* dropout_mask) {
    const std::size_t d_in = params.d_in(), d_h = params.d_hidden();
    if (x.cols() != d_in) {
        throw DimensionError("sru_forward: input width " + std::to_string(x.cols()) +
                             " does not match parameter width " + std::to_string(d_in));
    }
    check_state(c0, d_h, "sru_forward");

    Tensor xin = x;
    if (dropout_mask) {
        if (dropout_mask->size() != d_in) {
            throw DimensionError("sru_forward: dropout mask width mismatch");
        }
        Tensor tiled(Shape{x.rows(), d_in});
        for (std::size_t t = 0; t < x.rows(); ++t) {
            for (std::size_t j = 0; j < d_in; ++j) tiled.at(t, j) = (*dropout_mask)[j];
        }
        xin = mul(x, tiled);
    }

    Tensor x_tilde = matmul(xin, params.w);
    Tensor f_lin = matmul(xin, params.w_f);
    Tensor r_lin = matmul(xin, params.w_r);
    Tensor x_res = params.has_residual_projection() ? matmul(xin, params.w_res) : xin;
    return sru_recurrence(x_tilde, f_lin, r_lin, params.b_f, params.b_r, x_res, c0);
}

std::size_t valid_prefix(const std::vector<std::uint8_t>& mask) {
    std::size_t len = 0;
    while (len < mask.size() && mask[len] == 1) ++len;
    for (std::size_t i = len; i < mask.size(); ++i) {
        if (mask[i] != 0) {
            throw ContractError("mask: valid steps must form a contiguous prefix");
        }
    }
    return len;
}

Tensor bi_sru(const SruLayerParams& fwd, const SruLayerParams& bwd, const Tensor& x,
              const std::vector<std::uint8_t>& mask) {
    if (mask.size() != x.rows()) {
        throw DimensionError("bi_sru: mask length " + std::to_string(mask.size()) +
                             " does not match " + std::to_string(x.rows()) + " steps");
    }
    const std::size_t len = valid_prefix(mask);
    if (len == 0) throw DegenerateError("bi_sru: no valid steps");
    const std::size_t d_h = fwd.d_hidden();

    Tensor xv = len == x.rows() ? x : slice_rows(x, 0, len);
    Tensor c0(Shape{1, d_h});
    Tensor h_fwd = sru_forward(fwd, xv, c0).h;
    Tensor h_bwd = reverse_rows(sru_forward(bwd, reverse_rows(xv), c0).h);
    Tensor out = concat_cols({h_fwd, h_bwd});
    return len == x.rows() ? out : pad_rows(out, x.rows());
}

StackedBiSruParams make_stacked_bi_sru(std::size_t d_in, std::size_t d_h, std::size_t n_layers,
                                       Rng& rng) {
    StackedBiSruParams p;
    std::size_t cur = d_in;
    for (std::size_t i = 0; i < n_layers; ++i) {
        p.layers.push_back({make_sru_params(cur, d_h, rng), make_sru_params(cur, d_h, rng)});
        cur = 2 * d_h;
    }
    return p;
}

Tensor stacked_bi_sru(const StackedBiSruParams& params, const Tensor& x,
                      const std::vector<std::uint8_t>& mask, bool training, Rng* rng,
                      double dropout_rate) {
    if (params.layers.empty()) throw ContractError("stacked_bi_sru: no layers");
    Tensor cur = x;
    for (const BiSruLayer& layer : params.layers) {
        cur = dropout(cur, dropout_rate, training, rng, /*variational=*/true);
        cur = bi_sru(layer.fwd, layer.bwd, cur, mask);
    }
    return cur;
}

// ---- LSTM ------------------------------------------------------------------

LstmParams make_lstm_params(std::size_t d_in, std::size_t d_h, Rng& rng) {
    LstmParams p;
    p.w_ih = init_matrix(d_in, 4 * d_h, rng);
    p.w_hh = init_matrix(d_h, 4 * d_h, rng);
    p.bias = Tensor(Shape{4 * d_h}, 0.0, true);
    return p;
}

Tensor lstm_forward(const LstmParams& params, const Tensor& x) {
    const std::size_t d_h = params.d_hidden();
    if (x.cols() != params.d_in()) {
        throw DimensionError("lstm_forward: input width " + std::to_string(x.cols()) +
                             " does not match parameter width " + std::to_string(params.d_in()));
    }
    Tensor gates_in = add_row_bias(matmul(x, params.w_ih), params.bias);

    Tensor h(Shape{1, d_h});
    Tensor c(Shape{1, d_h});
    std::vector<Tensor> steps;
    steps.reserve(x.rows());
    for (std::size_t t = 0; t < x.rows(); ++t) {
        Tensor gates = add(slice_rows(gates_in, t, 1), matmul(h, params.w_hh));
        Tensor i = sigmoid(slice_cols(gates, 0, d_h));
        Tensor f = sigmoid(slice_cols(gates, d_h, d_h));
        Tensor g = tanh(slice_cols(gates, 2 * d_h, d_h));
        Tensor o = sigmoid(slice_cols(gates, 3 * d_h, d_h));
        c = add(mul(f, c), mul(i, g));
        h = mul(o, tanh(c));
        steps.push_back(h);
    }
    return concat_rows(steps);
}

// ---- GRU -------------------------------------------------------------------

GruParams make_gru_params(std::size_t d_in, std::size_t d_h, Rng& rng) {
    GruParams p;
    p.w_xz = init_matrix(d_in, d_h, rng);
    p.w_hz = init_matrix(d_h, d_h, rng);
    p.b_z = Tensor(Shape{d_h}, 0.0, true);
    p.w_xr = init_matrix(d_in, d_h, rng);
    p.w_hr = init_matrix(d_h, d_h, rng);
    p.b_r = Tensor(Shape{d_h}, 0.0, true);
    p.w_xn = init_matrix(d_in, d_h, rng);
    p.w_hn = init_matrix(d_h, d_h, rng);
    p.b_n = Tensor(Shape{d_h}, 0.0, true);
    return p;
}

Tensor gru_cell(const GruParams& params, const Tensor& input, const Tensor& hidden) {
    if (input.cols() != params.d_in() || hidden.cols() != params.d_hidden()) {
        throw DimensionError("gru_cell: input/hidden widths do not match parameters");
    }
    Tensor z = sigmoid(add_row_bias(add(matmul(input, params.w_xz), matmul(hidden, params.w_hz)),
                                    params.b_z));
    Tensor r = sigmoid(add_row_bias(add(matmul(input, params.w_xr), matmul(hidden, params.w_hr)),
                                    params.b_r));
    Tensor n = tanh(add_row_bias(
        add(matmul(input, params.w_xn), matmul(mul(r, hidden), params.w_hn)), params.b_n));
    return add(mul(z, hidden), mul(one_minus(z), n));
}

Tensor gru_forward(const GruParams& params, const Tensor& x) {
    const std::size_t d_h = params.d_hidden();
    if (x.cols() != params.d_in()) {
        throw DimensionError("gru_forward: input width mismatch");
    }
    Tensor xz = add_row_bias(matmul(x, params.w_xz), params.b_z);
    Tensor xr = add_row_bias(matmul(x, params.w_xr), params.b_r);
    Tensor xn = add_row_bias(matmul(x, params.w_xn), params.b_n);

    Tensor h(Shape{1, d_h});
    std::vector<Tensor> steps;
    steps.reserve(x.rows());
    for (std::size_t t = 0; t < x.rows(); ++t) {
        Tensor z = sigmoid(add(slice_rows(xz, t, 1), matmul(h, params.w_hz)));
        Tensor r = sigmoid(add(slice_rows(xr, t, 1), matmul(h, params.w_hr)));
        Tensor n = tanh(add(slice_rows(xn, t, 1), matmul(mul(r, h), params.w_hn)));
        h = add(mul(z, h), mul(one_minus(z), n));
        steps.push_back(h);
    }
    return concat_rows(steps);
}

// ---- op counts ---------------------------------------------------------------

OpCounts sru_op_counts(const SruLayerParams& params, std::size_t t) {
    return {params.has_residual_projection() ? 4u : 3u, t};
}

OpCounts bi_sru_op_counts(const SruLayerParams& fwd, const SruLayerParams& bwd, std::size_t t) {
    OpCounts a = sru_op_counts(fwd, t), b = sru_op_counts(bwd, t);
    return {a.matmuls + b.matmuls, a.sequential_steps + b.sequential_steps};
}

OpCounts lstm_op_counts(std::size_t t) { return {1 + t, t}; }

OpCounts gru_op_counts(std::size_t t) { return {3 + 3 * t, t}; }

}  // namespace ffn
