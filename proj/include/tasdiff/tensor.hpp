#pragma once

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "tasdiff/error.hpp"

namespace tasdiff {

// Dense rank-<=3 tensor, time-major then channel. Values are 64-bit reals;
// an InferencePrecisionScope can round op outputs through IEEE float when a
// 32-bit inference pipeline is wanted.
struct TensorImpl {
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated on first use, same size as value
    bool requires_grad = false;
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape, bool requires_grad = false);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double v);
    static Tensor from(std::vector<int> shape, std::vector<double> data,
                       bool requires_grad = false);
    static Tensor randn(std::vector<int> shape, std::mt19937_64& rng, double stddev = 1.0,
                        bool requires_grad = false);

    bool defined() const { return static_cast<bool>(p_); }
    const std::vector<int>& shape() const { return p_->shape; }
    int rank() const { return static_cast<int>(p_->shape.size()); }
    int dim(int i) const { return p_->shape[static_cast<std::size_t>(i)]; }
    int rows() const;
    int cols() const;
    int size() const { return static_cast<int>(p_->value.size()); }

    double* data() { return p_->value.data(); }
    const double* data() const { return p_->value.data(); }
    std::vector<double>& values() { return p_->value; }
    const std::vector<double>& values() const { return p_->value; }

    double at(int r, int c) const { return p_->value[static_cast<std::size_t>(r) * cols() + c]; }
    double& at(int r, int c) { return p_->value[static_cast<std::size_t>(r) * cols() + c]; }
    double item() const;  // scalar tensors only

    bool requires_grad() const { return p_->requires_grad; }
    void set_requires_grad(bool v) { p_->requires_grad = v; }
    std::vector<double>& grad();
    const std::vector<double>* grad_if_any() const;
    void zero_grad();

    bool all_finite() const;
    void validate_finite(const std::string& what) const;  // throws ValidationError

    Tensor detached_clone() const;

    const std::shared_ptr<TensorImpl>& impl() const { return p_; }

private:
    std::shared_ptr<TensorImpl> p_;
};

bool same_shape(const Tensor& a, const Tensor& b);

// Execution trace for reverse-mode differentiation. Nodes are appended in
// forward order, which is already a topological order of the graph.
class GradTape {
public:
    struct Node {
        const char* op;
        std::vector<std::shared_ptr<TensorImpl>> inputs;
        std::shared_ptr<TensorImpl> output;
        std::function<void()> backward;
    };

    void record(Node node) { nodes_.push_back(std::move(node)); }
    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    // Seeds d(loss)/d(loss)=1 and sweeps the trace in reverse.
    void backward(const Tensor& scalar_loss);

private:
    std::vector<Node> nodes_;
};

// Thread-local recording target; ops record only while a scope is active.
class TapeScope {
public:
    explicit TapeScope(GradTape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    GradTape* prev_;
};

GradTape* active_tape();

// While alive, op results are rounded through 32-bit floats (inference mode).
class InferencePrecisionScope {
public:
    InferencePrecisionScope();
    ~InferencePrecisionScope();
    InferencePrecisionScope(const InferencePrecisionScope&) = delete;
    InferencePrecisionScope& operator=(const InferencePrecisionScope&) = delete;

private:
    bool prev_;
};

bool inference_f32_active();

namespace autodiff {
// Registers a custom differentiable op on the active tape (no-op when none is
// active or no input requires grad). Modules use this for fused ops such as
// the training losses.
void record(const char* op, const std::vector<Tensor>& inputs, const Tensor& output,
            std::function<void()> backward);
bool recording(const std::vector<Tensor>& inputs);
// Applies the active precision mode to freshly computed op output.
void finalize(Tensor& t);
}  // namespace autodiff

// ---- differentiable operations --------------------------------------------

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor pointwise_conv1d(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernel, int dilation);
Tensor maxpool1d_same(const Tensor& x, int window);
Tensor global_avgpool_time(const Tensor& x);
Tensor broadcast_time(const Tensor& x, int length);
Tensor relu(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor slice_channels(const Tensor& x, int from, int to);
Tensor scale_rows(const Tensor& x, const std::vector<double>& row_gains);
Tensor instance_norm_time(const Tensor& x, const Tensor& gain, const Tensor& bias,
                          double eps = 1e-5);
Tensor softmax_channels(const Tensor& x);
Tensor log_softmax_channels(const Tensor& x);
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v);
Tensor sum_all(const Tensor& x);

}  // namespace tasdiff
