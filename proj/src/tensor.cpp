#include "ffn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "ffn/kernels.hpp"

namespace ffn {

namespace {

thread_local Tape* g_current_tape = nullptr;
thread_local bool g_grad_enabled = true;

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

[[noreturn]] void dim_error(const char* op, const Shape& a, const Shape& b) {
    throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a) +
                         " and " + shape_str(b));
}

void require_2d(const Tensor& t, const char* op) {
    if (t.ndim() != 2) {
        throw DimensionError(std::string(op) + ": expected a 2-d tensor, got " +
                             shape_str(t.shape()));
    }
}

using NodePtr = std::shared_ptr<detail::TensorNode>;

void ensure_node_grad(const NodePtr& n) {
    if (n->grad.empty()) n->grad.assign(n->data.size(), 0.0);
}

// Marks out as a tape participant and pre-allocates the grad buffers the
// recorded closure will touch.
void prepare_record(Tensor& out, std::initializer_list<const Tensor*> inputs) {
    out.set_requires_grad(true);
    out.ensure_grad();
    for (const Tensor* t : inputs) {
        if (t->requires_grad()) const_cast<Tensor*>(t)->ensure_grad();
    }
}

}  // namespace

// ---- Tensor ----------------------------------------------------------------

Tensor::Tensor(Shape shape, double fill, bool requires_grad) {
    node_ = std::make_shared<detail::TensorNode>();
    node_->shape = std::move(shape);
    node_->data.assign(shape_numel(node_->shape), fill);
    node_->requires_grad = requires_grad;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw DimensionError("Tensor::from_data: shape " + shape_str(shape) + " needs " +
                             std::to_string(shape_numel(shape)) + " values, got " +
                             std::to_string(data.size()));
    }
    Tensor t;
    t.node_ = std::make_shared<detail::TensorNode>();
    t.node_->shape = std::move(shape);
    t.node_->data = std::move(data);
    t.node_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::scalar(double v) { return from_data({1}, {v}); }

Tensor Tensor::uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad) {
    Tensor t(std::move(shape), 0.0, requires_grad);
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

std::size_t Tensor::rows() const {
    require_2d(*this, "rows");
    return node_->shape[0];
}

std::size_t Tensor::cols() const {
    require_2d(*this, "cols");
    return node_->shape[1];
}

double& Tensor::at(std::size_t r, std::size_t c) {
    require_2d(*this, "at");
    return node_->data[r * node_->shape[1] + c];
}

double Tensor::at(std::size_t r, std::size_t c) const {
    require_2d(*this, "at");
    return node_->data[r * node_->shape[1] + c];
}

double Tensor::value() const {
    if (!is_scalar()) {
        throw ContractError("value: tensor of shape " + shape_str(shape()) + " is not a scalar");
    }
    return node_->data[0];
}

void Tensor::set_requires_grad(bool rg) { node_->requires_grad = rg; }

std::vector<double>& Tensor::grad() {
    ensure_grad();
    return node_->grad;
}

const std::vector<double>& Tensor::grad() const {
    if (node_->grad.empty()) {
        throw ContractError("grad: no gradient recorded for this tensor");
    }
    return node_->grad;
}

void Tensor::ensure_grad() { ensure_node_grad(node_); }

void Tensor::zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::check_finite(const char* context) const {
    for (double v : node_->data) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(context) + ": non-finite value in tensor " +
                               shape_str(shape()));
        }
    }
}

// ---- Tape ------------------------------------------------------------------

Tape::Scope::Scope(Tape& tape) : prev_(g_current_tape) { g_current_tape = &tape; }
Tape::Scope::~Scope() { g_current_tape = prev_; }

Tape* Tape::current() { return g_current_tape; }

void Tape::record(std::function<void()> backward_step) {
    steps_.push_back(std::move(backward_step));
}

void Tape::backward(const Tensor& loss) {
    if (!loss.is_scalar()) {
        throw ContractError("backward: loss must be a scalar, got shape of size " +
                            std::to_string(loss.size()));
    }
    if (!loss.requires_grad()) {
        throw ContractError("backward: loss was not produced on this tape");
    }
    const_cast<Tensor&>(loss).ensure_grad();
    loss.node()->grad[0] = 1.0;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    steps_.clear();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

bool tape_active(std::initializer_list<const Tensor*> inputs) {
    if (!g_grad_enabled || g_current_tape == nullptr) return false;
    for (const Tensor* t : inputs) {
        if (t->requires_grad()) return true;
    }
    return false;
}

// ---- matmul / transpose ----------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    if (a.cols() != b.rows()) dim_error("matmul", a.shape(), b.shape());
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();

    Tensor out(Shape{m, n});
    kernel::gemm_nn(a.data().data(), b.data().data(), out.data().data(), m, k, n);

    if (tape_active({&a, &b})) {
        prepare_record(out, {&a, &b});
        NodePtr an = a.node(), bn = b.node(), on = out.node();
        Tape::current()->record([an, bn, on, m, k, n] {
            const double* dout = on->grad.data();
            if (an->requires_grad) {
                kernel::gemm_nt(dout, bn->data.data(), an->grad.data(), m, n, k);
            }
            if (bn->requires_grad) {
                kernel::gemm_tn(an->data.data(), dout, bn->grad.data(), m, k, n);
            }
        });
    }
    return out;
}

Tensor transpose(const Tensor& x) {
    require_2d(x, "transpose");
    const std::size_t r = x.rows(), c = x.cols();
    Tensor out(Shape{c, r});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out.at(j, i) = x.at(i, j);
    }
    if (tape_active({&x})) {
        prepare_record(out, {&x});
        NodePtr xn = x.node(), on = out.node();
        Tape::current()->record([xn, on, r, c] {
            if (!xn->requires_grad) return;
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    xn->grad[i * c + j] += on->grad[j * r + i];
                }
            }
        });
    }
    return out;
}

// ---- elementwise binary ----------------------------------------------------

namespace {

enum class Bin { add, sub, mul };

Tensor binary_op(const Tensor& a, const Tensor& b, Bin op, const char* name) {
    const bool a_scalar = a.is_scalar() && b.size() != 1;
    const bool b_scalar = b.is_scalar() && a.size() != 1;
    if (!a_scalar && !b_scalar && a.shape() != b.shape()) dim_error(name, a.shape(), b.shape());

    const Tensor& big = a_scalar ? b : a;
    Tensor out(big.shape());
    const std::size_t n = out.size();
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    double* od = out.data().data();
    for (std::size_t i = 0; i < n; ++i) {
        const double av = a_scalar ? ad[0] : ad[i];
        const double bv = b_scalar ? bd[0] : bd[i];
        od[i] = op == Bin::add ? av + bv : op == Bin::sub ? av - bv : av * bv;
    }

    if (tape_active({&a, &b})) {
        prepare_record(out, {&a, &b});
        NodePtr an = a.node(), bn = b.node(), on = out.node();
        Tape::current()->record([an, bn, on, op, a_scalar, b_scalar, n] {
            const double* dout = on->grad.data();
            if (an->requires_grad) {
                for (std::size_t i = 0; i < n; ++i) {
                    double g = dout[i];
                    if (op == Bin::mul) g *= b_scalar ? bn->data[0] : bn->data[i];
                    an->grad[a_scalar ? 0 : i] += g;
                }
            }
            if (bn->requires_grad) {
                for (std::size_t i = 0; i < n; ++i) {
                    double g = dout[i];
                    if (op == Bin::sub) g = -g;
                    if (op == Bin::mul) g = dout[i] * (a_scalar ? an->data[0] : an->data[i]);
                    bn->grad[b_scalar ? 0 : i] += g;
                }
            }
        });
    }
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, Bin::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, Bin::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, Bin::mul, "mul"); }

// ---- elementwise unary -----------------------------------------------------

namespace {

// df(in, out) -> local derivative
Tensor unary_op(const Tensor& x, const char* /*name*/, double (*f)(double),
                double (*df)(double, double)) {
    Tensor out(x.shape());
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) out[i] = f(x[i]);

    if (tape_active({&x})) {
        prepare_record(out, {&x});
        NodePtr xn = x.node(), on = out.node();
        Tape::current()->record([xn, on, df, n] {
            if (!xn->requires_grad) return;
            for (std::size_t i = 0; i < n; ++i) {
                xn->grad[i] += on->grad[i] * df(xn->data[i], on->data[i]);
            }
        });
    }
    return out;
}

}  // namespace

Tensor sigmoid(const Tensor& x) {
    return unary_op(
        x, "sigmoid", [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
        [](double, double o) { return o * (1.0 - o); });
}

Tensor tanh(const Tensor& x) {
    return unary_op(
        x, "tanh", [](double v) { return std::tanh(v); },
        [](double, double o) { return 1.0 - o * o; });
}

Tensor relu(const Tensor& x) {
    return unary_op(
        x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
        [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Tensor one_minus(const Tensor& x) {
    return unary_op(
        x, "one_minus", [](double v) { return 1.0 - v; },
        [](double, double) { return -1.0; });
}

Tensor log(const Tensor& x) {
    for (double v : x.data()) {
        if (!(v > 0.0)) throw NumericError("log: input must be strictly positive");
    }
    return unary_op(
        x, "log", [](double v) { return std::log(v); },
        [](double in, double) { return 1.0 / in; });
}

Tensor scale(const Tensor& x, double s) {
    Tensor out(x.shape());
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * s;
    if (tape_active({&x})) {
        prepare_record(out, {&x});
        NodePtr xn = x.node(), on = out.node();
        Tape::current()->record([xn, on, s, n] {
            if (!xn->requires_grad) return;
            for (std::size_t i = 0; i < n; ++i) xn->grad[i] += on->grad[i] * s;
        });
    }
    return out;
}

Tensor add_row_bias(const Tensor& x, const Tensor& b) {
    require_2d(x, "add_row_bias");
    const std::size_t m = x.rows(), n = x.cols();
    if (b.size() != n) dim_error("add_row_bias", x.shape(), b.shape());

    Tensor out(x.shape());
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] + b[j];
    }
    if (tape_active({&x, &b})) {
        prepare_record(out, {&x, &b});
        NodePtr xn = x.node(), bn = b.node(), on = out.node();
        Tape::current()->record([xn, bn, on, m, n] {
            if (xn->requires_grad) {
                for (std::size_t i = 0; i < m * n; ++i) xn->grad[i] += on->grad[i];
            }
            if (bn->requires_grad) {
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t j = 0; j < n; ++j) bn->grad[j] += on->grad[i * n + j];
                }
            }
        });
    }
    return out;
}

// ---- softmax ---------------------------------------------------------------

Tensor softmax_rows(const Tensor& x, const Tensor* mask) {
    require_2d(x, "softmax_rows");
    const std::size_t r = x.rows(), c = x.cols();
    if (mask) {
        if (mask->shape() != x.shape()) dim_error("softmax_rows", x.shape(), mask->shape());
        for (double v : mask->data()) {
            if (v != 0.0 && v != 1.0) {
                throw ContractError("softmax_rows: mask entries must be 0 or 1");
            }
        }
    }
    const double* md = mask ? mask->data().data() : nullptr;

    Tensor out(x.shape());
    for (std::size_t i = 0; i < r; ++i) {
        const double* xrow = x.data().data() + i * c;
        double* orow = out.data().data() + i * c;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < c; ++j) {
            if (!md || md[i * c + j] != 0.0) mx = std::max(mx, xrow[j]);
        }
        if (mx == -std::numeric_limits<double>::infinity()) {
            throw DegenerateError("softmax_rows: row " + std::to_string(i) + " is fully masked");
        }
        double denom = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            if (!md || md[i * c + j] != 0.0) {
                orow[j] = std::exp(xrow[j] - mx);
                denom += orow[j];
            } else {
                orow[j] = 0.0;
            }
        }
        for (std::size_t j = 0; j < c; ++j) orow[j] /= denom;
    }

    if (tape_active({&x})) {
        prepare_record(out, {&x});
        NodePtr xn = x.node(), on = out.node();
        Tape::current()->record([xn, on, r, c] {
            if (!xn->requires_grad) return;
            for (std::size_t i = 0; i < r; ++i) {
                const double* y = on->data.data() + i * c;
                const double* dy = on->grad.data() + i * c;
                double dot = 0.0;
                for (std::size_t j = 0; j < c; ++j) dot += dy[j] * y[j];
                for (std::size_t j = 0; j < c; ++j) {
                    xn->grad[i * c + j] += y[j] * (dy[j] - dot);
                }
            }
        });
    }
    return out;
}

// ---- concatenation / slicing -----------------------------------------------

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no parts");
    const std::size_t m = parts[0].rows();
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        require_2d(p, "concat_cols");
        if (p.rows() != m) dim_error("concat_cols", parts[0].shape(), p.shape());
        total += p.cols();
    }

    Tensor out(Shape{m, total});
    std::size_t off = 0;
    for (const Tensor& p : parts) {
        const std::size_t pc = p.cols();
        for (std::size_t i = 0; i < m; ++i) {
            std::copy_n(p.data().data() + i * pc, pc, out.data().data() + i * total + off);
        }
        off += pc;
    }

    bool any_rg = false;
    for (const Tensor& p : parts) any_rg = any_rg || p.requires_grad();
    if (grad_enabled() && Tape::current() && any_rg) {
        out.set_requires_grad(true);
        out.ensure_grad();
        std::vector<NodePtr> nodes;
        for (const Tensor& p : parts) {
            if (p.requires_grad()) const_cast<Tensor&>(p).ensure_grad();
            nodes.push_back(p.node());
        }
        NodePtr on = out.node();
        Tape::current()->record([nodes, on, m, total] {
            std::size_t off2 = 0;
            for (const NodePtr& pn : nodes) {
                const std::size_t pc = pn->shape[1];
                if (pn->requires_grad) {
                    for (std::size_t i = 0; i < m; ++i) {
                        for (std::size_t j = 0; j < pc; ++j) {
                            pn->grad[i * pc + j] += on->grad[i * total + off2 + j];
                        }
                    }
                }
                off2 += pc;
            }
        });
    }
    return out;
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t len) {
    require_2d(x, "slice_cols");
    const std::size_t m = x.rows(), n = x.cols();
    if (start + len > n) {
        throw DimensionError("slice_cols: [" + std::to_string(start) + ", " +
                             std::to_string(start + len) + ") out of range for width " +
                             std::to_string(n));
    }
    Tensor out(Shape{m, len});
    for (std::size_t i = 0; i < m; ++i) {
        std::copy_n(x.data().data() + i * n + start, len, out.data().data() + i * len);
    }
    if (tape_active({&x})) {
        prepare_record(out, {&x});
        NodePtr xn = x.node(), on = out.node();
        Tape::current()->record([xn, on, m, n, start, len] {
            if (!xn->requires_grad) return;
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < len; ++j) {
                    xn->grad[i * n + start + j] += on->grad[i * len + j];
                }
            }
        });
    }
    return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_rows: no parts");
    const std::size_t c = parts[0].cols();
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        require_2d(p, "concat_rows");
        if (p.cols() != c) dim_error("concat_rows", parts[0].shape(), p.shape());
        total += p.rows();
    }

    Tensor out(Shape{total, c});
    std::size_t off = 0;
    for (const Tensor& p : parts) {
        std::copy_n(p.data().data(), p.size(), out.data().data() + off * c);
        off += p.rows();
    }

    bool any_rg = false;
    for (const Tensor& p : parts) any_rg = any_rg || p.requires_grad();
    if (grad_enabled() && Tape::current() && any_rg) {
        out.set_requires_grad(true);
        out.ensure_grad();
        std::vector<NodePtr> nodes;
        for (const Tensor& p : parts) {
            if (p.requires_grad()) const_cast<Tensor&>(p).ensure_grad();
            nodes.push_back(p.node());
        }
        NodePtr on = out.node();
        Tape::current()->record([nodes, on, c] {
            std::size_t off2 = 0;
            for (const NodePtr& pn : nodes) {
                const std::size_t sz = pn->data.size();
                if (pn->requires_grad) {
                    for (std::size_t i = 0; i < sz; ++i) pn->grad[i] += on->grad[off2 * c + i];
                }
                off2 += pn->shape[0];
            }
        });
    }
    return out;
}

Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t len) {
    require_2d(x, "slice_rows");
    const std::size_t m = x.rows(), n = x.cols();
    if (start + len > m) {
        throw DimensionError("slice_rows: [" + std::to_string(start) + ", " +
                             std::to_string(start + len) + ") out of range for " +
                             std::to_string(m) + " rows");
    }
    Tensor out(Shape{len, n});
    std::copy_n(x.data().data() + start * n, len * n, out.data().data());
    if (tape_active({&x})) {
        prepare_record(out, {&x});
        NodePtr xn = x.node(), on = out.node();
        Tape::current()->record([xn, on, n, start, len] {
            if (!xn->requires_grad) return;
            for (std::size_t i = 0; i < len * n; ++i) xn->grad[start * n + i] += on->grad[i];
        });
    }
    return out;
}

Tensor pad_rows(const Tensor& x, std::size_t total_rows) {
    require_2d(x, "pad_rows");
    const std::size_t m = x.rows(), n = x.cols();
    if (total_rows < m) {
        throw DimensionError("pad_rows: target " + std::to_string(total_rows) +
                             " smaller than input " + std::to_string(m));
    }
    Tensor out(Shape{total_rows, n});
    std::copy_n(x.data().data(), m * n, out.data().data());
    if (tape_active({&x})) {
        prepare_record(out, {&x});
        NodePtr xn = x.node(), on = out.node();
        Tape::current()->record([xn, on, m, n] {
            if (!xn->requires_grad) return;
            for (std::size_t i = 0; i < m * n; ++i) xn->grad[i] += on->grad[i];
        });
    }
    return out;
}

Tensor reverse_rows(const Tensor& x) {
    require_2d(x, "reverse_rows");
    const std::size_t m = x.rows(), n = x.cols();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < m; ++i) {
        std::copy_n(x.data().data() + i * n, n, out.data().data() + (m - 1 - i) * n);
    }
    if (tape_active({&x})) {
        prepare_record(out, {&x});
        NodePtr xn = x.node(), on = out.node();
        Tape::current()->record([xn, on, m, n] {
            if (!xn->requires_grad) return;
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    xn->grad[i * n + j] += on->grad[(m - 1 - i) * n + j];
                }
            }
        });
    }
    return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.size()) dim_error("reshape", x.shape(), shape);
    Tensor out = Tensor::from_data(std::move(shape), x.data());
    if (tape_active({&x})) {
        prepare_record(out, {&x});
        NodePtr xn = x.node(), on = out.node();
        const std::size_t n = x.size();
        Tape::current()->record([xn, on, n] {
            if (!xn->requires_grad) return;
            for (std::size_t i = 0; i < n; ++i) xn->grad[i] += on->grad[i];
        });
    }
    return out;
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& indices) {
    require_2d(table, "gather_rows");
    const std::size_t v = table.rows(), d = table.cols();
    for (int idx : indices) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= v) {
            throw DataError("gather_rows: index " + std::to_string(idx) +
                            " out of range for table with " + std::to_string(v) + " rows");
        }
    }
    Tensor out(Shape{indices.size(), d});
    for (std::size_t i = 0; i < indices.size(); ++i) {
        std::copy_n(table.data().data() + static_cast<std::size_t>(indices[i]) * d, d,
                    out.data().data() + i * d);
    }
    if (tape_active({&table})) {
        prepare_record(out, {&table});
        NodePtr tn = table.node(), on = out.node();
        std::vector<int> idx = indices;
        Tape::current()->record([tn, on, idx, d] {
            if (!tn->requires_grad) return;
            for (std::size_t i = 0; i < idx.size(); ++i) {
                const std::size_t r = static_cast<std::size_t>(idx[i]);
                for (std::size_t j = 0; j < d; ++j) {
                    tn->grad[r * d + j] += on->grad[i * d + j];
                }
            }
        });
    }
    return out;
}

Tensor sum_all(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    Tensor out = Tensor::scalar(s);
    if (tape_active({&x})) {
        prepare_record(out, {&x});
        NodePtr xn = x.node(), on = out.node();
        const std::size_t n = x.size();
        Tape::current()->record([xn, on, n] {
            if (!xn->requires_grad) return;
            for (std::size_t i = 0; i < n; ++i) xn->grad[i] += on->grad[0];
        });
    }
    return out;
}

Tensor pick(const Tensor& x, std::size_t flat_index) {
    if (flat_index >= x.size()) {
        throw DataError("pick: index " + std::to_string(flat_index) + " out of range for " +
                        std::to_string(x.size()) + " elements");
    }
    Tensor out = Tensor::scalar(x[flat_index]);
    if (tape_active({&x})) {
        prepare_record(out, {&x});
        NodePtr xn = x.node(), on = out.node();
        Tape::current()->record([xn, on, flat_index] {
            if (!xn->requires_grad) return;
            xn->grad[flat_index] += on->grad[0];
        });
    }
    return out;
}

// ---- finite differences ------------------------------------------------------

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                         double eps, std::size_t max_coords, Rng* rng) {
    if (!(eps > 0.0)) throw ContractError("finite_diff_check: eps must be positive");

    x.set_requires_grad(true);
    x.ensure_grad();
    x.zero_grad();
    std::vector<double> analytic;
    {
        Tape tape;
        Tape::Scope scope(tape);
        Tensor y = f(x);
        if (!y.is_scalar()) throw ContractError("finite_diff_check: f must return a scalar");
        tape.backward(y);
        analytic = x.grad();
    }

    std::vector<std::size_t> coords(x.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (max_coords > 0 && max_coords < coords.size()) {
        if (!rng) throw ContractError("finite_diff_check: sampling requires an rng");
        rng->shuffle(coords);
        coords.resize(max_coords);
    }

    NoGradGuard no_grad;
    double worst = 0.0;
    for (std::size_t i : coords) {
        const double saved = x[i];
        x[i] = saved + eps;
        const double up = f(x).value();
        x[i] = saved - eps;
        const double down = f(x).value();
        x[i] = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double a = analytic[i];
        const double err = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-8);
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace ffn
