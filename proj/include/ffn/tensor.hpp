#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "ffn/error.hpp"
#include "ffn/rng.hpp"

namespace ffn {

using Shape = std::vector<std::size_t>;

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until the tensor joins a taped op
    bool requires_grad = false;
};

}  // namespace detail

// Dense row-major tensor of 64-bit floats. Copying a Tensor copies the
// handle, not the storage; ops always allocate fresh outputs.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);

    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double v);
    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    // Uniform in [lo, hi); the usual parameter init path.
    static Tensor uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t ndim() const { return node_->shape.size(); }
    std::size_t size() const { return node_->data.size(); }
    std::size_t rows() const;
    std::size_t cols() const;
    bool is_scalar() const { return size() == 1; }

    std::vector<double>& data() { return node_->data; }
    const std::vector<double>& data() const { return node_->data; }
    double& operator[](std::size_t i) { return node_->data[i]; }
    double operator[](std::size_t i) const { return node_->data[i]; }
    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;
    double value() const;  // scalar tensors only

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool rg);

    // Gradient buffer; allocated zero-filled on demand.
    bool has_grad() const { return node_ && !node_->grad.empty(); }
    std::vector<double>& grad();
    const std::vector<double>& grad() const;
    void ensure_grad();
    void zero_grad();

    void check_finite(const char* context) const;

    // Internal node handle, used by the tape and by fused ops.
    const std::shared_ptr<detail::TensorNode>& node() const { return node_; }

private:
    std::shared_ptr<detail::TensorNode> node_;
};

// Records the backward rule of every taped op, in execution order (which is
// a topological order by construction). backward() replays the list once in
// reverse and then discards it; a Tape is meant to live for one forward pass.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Installs a tape as the thread-local recording target.
    class Scope {
    public:
        explicit Scope(Tape& tape);
        ~Scope();
        Scope(const Scope&) = delete;

    private:
        Tape* prev_;
    };

    static Tape* current();

    void record(std::function<void()> backward_step);
    std::size_t size() const { return steps_.size(); }

    // Seeds d(loss)/d(loss) = 1 and propagates to every requires_grad
    // tensor reachable from it. Gradients accumulate additively.
    void backward(const Tensor& loss);

private:
    std::vector<std::function<void()>> steps_;
};

// Thread-local switch; ops record onto the tape only while enabled.
bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// True when the next op should record a backward step for these inputs.
bool tape_active(std::initializer_list<const Tensor*> inputs);

// ---- ops ------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

// Equal shapes, or one side a scalar.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor one_minus(const Tensor& x);
Tensor log(const Tensor& x);
Tensor scale(const Tensor& x, double s);

// out[i,j] = x[i,j] + b[j]
Tensor add_row_bias(const Tensor& x, const Tensor& b);

// Row-wise softmax with max subtraction. mask, when given, has x's shape
// with entries in {0,1}; masked entries come out exactly 0 and a fully
// masked row is an error.
Tensor softmax_rows(const Tensor& x, const Tensor* mask = nullptr);

// Column-wise concatenation of matrices sharing the leading dimension.
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t len);

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t len);
// Appends zero rows up to total_rows.
Tensor pad_rows(const Tensor& x, std::size_t total_rows);
Tensor reverse_rows(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);

// out row r = table row indices[r]; gradient scatters back into the table.
Tensor gather_rows(const Tensor& table, const std::vector<int>& indices);

Tensor sum_all(const Tensor& x);
Tensor pick(const Tensor& x, std::size_t flat_index);

// Max over coordinates of the relative disagreement between the analytic
// gradient of f at x and a central finite difference with step eps.
// f must map x to a scalar and be deterministic. max_coords > 0 checks a
// random subsample of coordinates (rng required then).
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                         double eps, std::size_t max_coords = 0, Rng* rng = nullptr);

}  // namespace ffn
