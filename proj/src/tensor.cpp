#include "tasdiff/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <utility>

#include "tasdiff/kernels.hpp"

namespace tasdiff {

namespace {

thread_local GradTape* t_tape = nullptr;
thread_local bool t_infer_f32 = false;

int shape_product(const std::vector<int>& shape) {
    int n = 1;
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor dims must be positive");
        n *= d;
    }
    return n;
}

void check_rank(const std::vector<int>& shape) {
    if (shape.empty() || shape.size() > 3)
        throw ShapeError("tensor rank must be between 1 and 3");
}

void axpy(std::vector<double>& dst, const std::vector<double>& src, double s = 1.0) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
}

}  // namespace

Tensor::Tensor(std::vector<int> shape, bool requires_grad) {
    check_rank(shape);
    const int n = shape_product(shape);
    p_ = std::make_shared<TensorImpl>();
    p_->shape = std::move(shape);
    p_->value.assign(static_cast<std::size_t>(n), 0.0);
    p_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    std::fill(t.p_->value.begin(), t.p_->value.end(), v);
    return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    check_rank(shape);
    if (static_cast<int>(data.size()) != shape_product(shape))
        throw ShapeError("data length does not match shape");
    Tensor t;
    t.p_ = std::make_shared<TensorImpl>();
    t.p_->shape = std::move(shape);
    t.p_->value = std::move(data);
    t.p_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::randn(std::vector<int> shape, std::mt19937_64& rng, double stddev,
                     bool requires_grad) {
    Tensor t(std::move(shape), requires_grad);
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : t.p_->value) v = dist(rng);
    return t;
}

int Tensor::rows() const {
    if (rank() != 2) throw ShapeError("rows() requires a rank-2 tensor");
    return p_->shape[0];
}

int Tensor::cols() const {
    if (rank() != 2) throw ShapeError("cols() requires a rank-2 tensor");
    return p_->shape[1];
}

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item() requires a scalar tensor");
    return p_->value[0];
}

std::vector<double>& Tensor::grad() {
    if (p_->grad.size() != p_->value.size()) p_->grad.assign(p_->value.size(), 0.0);
    return p_->grad;
}

const std::vector<double>* Tensor::grad_if_any() const {
    return p_->grad.empty() ? nullptr : &p_->grad;
}

void Tensor::zero_grad() {
    if (!p_->grad.empty()) std::fill(p_->grad.begin(), p_->grad.end(), 0.0);
}

bool Tensor::all_finite() const {
    for (double v : p_->value)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor::validate_finite(const std::string& what) const {
    if (!all_finite()) throw ValidationError(what + ": non-finite values");
}

Tensor Tensor::detached_clone() const {
    Tensor t;
    t.p_ = std::make_shared<TensorImpl>();
    t.p_->shape = p_->shape;
    t.p_->value = p_->value;
    t.p_->requires_grad = false;
    return t;
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape() == b.shape(); }

void GradTape::backward(const Tensor& scalar_loss) {
    if (scalar_loss.size() != 1) throw ShapeError("backward() requires a scalar loss");
    auto& impl = *scalar_loss.impl();
    impl.grad.assign(1, 1.0);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->output->grad.empty()) continue;  // branch never reached the loss
        it->backward();
    }
}

TapeScope::TapeScope(GradTape& tape) : prev_(t_tape) { t_tape = &tape; }
TapeScope::~TapeScope() { t_tape = prev_; }
GradTape* active_tape() { return t_tape; }

InferencePrecisionScope::InferencePrecisionScope() : prev_(t_infer_f32) { t_infer_f32 = true; }
InferencePrecisionScope::~InferencePrecisionScope() { t_infer_f32 = prev_; }
bool inference_f32_active() { return t_infer_f32; }

namespace autodiff {

bool recording(const std::vector<Tensor>& inputs) {
    if (t_tape == nullptr) return false;
    for (const auto& in : inputs)
        if (in.requires_grad()) return true;
    return false;
}

void record(const char* op, const std::vector<Tensor>& inputs, const Tensor& output,
            std::function<void()> backward) {
    if (!recording(inputs)) return;
    output.impl()->requires_grad = true;
    GradTape::Node node;
    node.op = op;
    node.inputs.reserve(inputs.size());
    for (const auto& in : inputs) node.inputs.push_back(in.impl());
    node.output = output.impl();
    node.backward = std::move(backward);
    t_tape->record(std::move(node));
}

void finalize(Tensor& t) {
    if (!t_infer_f32) return;
    for (double& v : t.values()) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace autodiff

// ---------------------------------------------------------------------------
// ops
// ---------------------------------------------------------------------------

namespace {

// shared forward/backward for linear and pointwise_conv1d
Tensor frame_affine(const char* op, const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.rank() != 2 || w.rank() != 2) throw ShapeError(std::string(op) + ": rank-2 operands required");
    const int len = x.rows(), cin = x.cols(), cout = w.cols();
    if (w.rows() != cin) throw ShapeError(std::string(op) + ": inner dims differ");
    if (b.size() != cout) throw ShapeError(std::string(op) + ": bias size mismatch");

    Tensor y({len, cout});
    kernels::matmul(x.data(), w.data(), y.data(), len, cin, cout, false, false);
    for (int t = 0; t < len; ++t)
        for (int c = 0; c < cout; ++c) y.data()[t * cout + c] += b.data()[c];
    autodiff::finalize(y);

    auto xi = x.impl(), wi = w.impl(), bi = b.impl(), yi = y.impl();
    autodiff::record(op, {x, w, b}, y, [xi, wi, bi, yi, len, cin, cout]() {
        const auto& dy = yi->grad;
        if (xi->requires_grad) {
            std::vector<double> dx(xi->value.size());
            kernels::matmul(dy.data(), wi->value.data(), dx.data(), len, cout, cin, false, true);
            if (xi->grad.empty()) xi->grad.assign(xi->value.size(), 0.0);
            axpy(xi->grad, dx);
        }
        if (wi->requires_grad) {
            std::vector<double> dw(wi->value.size());
            kernels::matmul(xi->value.data(), dy.data(), dw.data(), cin, len, cout, true, false);
            if (wi->grad.empty()) wi->grad.assign(wi->value.size(), 0.0);
            axpy(wi->grad, dw);
        }
        if (bi->requires_grad) {
            if (bi->grad.empty()) bi->grad.assign(bi->value.size(), 0.0);
            for (int t = 0; t < len; ++t)
                for (int c = 0; c < cout; ++c) bi->grad[c] += dy[t * cout + c];
        }
    });
    return y;
}

}  // namespace

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    return frame_affine("linear", x, w, b);
}

Tensor pointwise_conv1d(const Tensor& x, const Tensor& w, const Tensor& b) {
    return frame_affine("pointwise_conv1d", x, w, b);
}

Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernel, int dilation) {
    if (x.rank() != 2 || kernel.rank() != 2) throw ShapeError("depthwise_conv1d: rank-2 operands required");
    const int len = x.rows(), ch = x.cols(), w = kernel.rows();
    if (kernel.cols() != ch) throw ShapeError("depthwise_conv1d: channel mismatch");
    if (w % 2 == 0) throw ConfigError("depthwise_conv1d: window must be odd");
    if (dilation < 1) throw ConfigError("depthwise_conv1d: dilation must be >= 1");

    Tensor y({len, ch});
    kernels::depthwise_conv1d(x.data(), kernel.data(), y.data(), len, ch, w, dilation);
    autodiff::finalize(y);

    auto xi = x.impl(), ki = kernel.impl(), yi = y.impl();
    autodiff::record("depthwise_conv1d", {x, kernel}, y, [xi, ki, yi, len, ch, w, dilation]() {
        const auto& dy = yi->grad;
        if (xi->requires_grad) {
            std::vector<double> dx(xi->value.size());
            kernels::depthwise_conv1d_grad_input(dy.data(), ki->value.data(), dx.data(), len, ch, w, dilation);
            if (xi->grad.empty()) xi->grad.assign(xi->value.size(), 0.0);
            axpy(xi->grad, dx);
        }
        if (ki->requires_grad) {
            std::vector<double> dk(ki->value.size());
            kernels::depthwise_conv1d_grad_kernel(dy.data(), xi->value.data(), dk.data(), len, ch, w, dilation);
            if (ki->grad.empty()) ki->grad.assign(ki->value.size(), 0.0);
            axpy(ki->grad, dk);
        }
    });
    return y;
}

Tensor maxpool1d_same(const Tensor& x, int window) {
    if (x.rank() != 2) throw ShapeError("maxpool1d_same: rank-2 input required");
    if (window % 2 == 0 || window < 1) throw ConfigError("maxpool1d_same: window must be odd");
    const int len = x.rows(), ch = x.cols();

    Tensor y({len, ch});
    auto argmax = std::make_shared<std::vector<int>>(static_cast<std::size_t>(len) * ch);
    kernels::maxpool1d_same(x.data(), y.data(), argmax->data(), len, ch, window);
    autodiff::finalize(y);

    auto xi = x.impl(), yi = y.impl();
    autodiff::record("maxpool1d_same", {x}, y, [xi, yi, argmax, len, ch, window]() {
        std::vector<double> dx(xi->value.size());
        kernels::maxpool1d_same_grad(yi->grad.data(), argmax->data(), dx.data(), len, ch, window);
        if (xi->grad.empty()) xi->grad.assign(xi->value.size(), 0.0);
        axpy(xi->grad, dx);
    });
    return y;
}

Tensor global_avgpool_time(const Tensor& x) {
    if (x.rank() != 2) throw ShapeError("global_avgpool_time: rank-2 input required");
    const int len = x.rows(), ch = x.cols();
    Tensor y({1, ch});
    for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int t = 0; t < len; ++t) acc += x.data()[t * ch + c];
        y.data()[c] = acc / len;
    }
    autodiff::finalize(y);

    auto xi = x.impl(), yi = y.impl();
    autodiff::record("global_avgpool_time", {x}, y, [xi, yi, len, ch]() {
        if (xi->grad.empty()) xi->grad.assign(xi->value.size(), 0.0);
        for (int c = 0; c < ch; ++c) {
            const double g = yi->grad[c] / len;
            for (int t = 0; t < len; ++t) xi->grad[t * ch + c] += g;
        }
    });
    return y;
}

Tensor broadcast_time(const Tensor& x, int length) {
    if (x.rank() != 2 || x.rows() != 1) throw ShapeError("broadcast_time: input must be 1 x C");
    if (length < 1) throw ShapeError("broadcast_time: length must be positive");
    const int ch = x.cols();
    Tensor y({length, ch});
    for (int t = 0; t < length; ++t)
        for (int c = 0; c < ch; ++c) y.data()[t * ch + c] = x.data()[c];
    autodiff::finalize(y);

    auto xi = x.impl(), yi = y.impl();
    autodiff::record("broadcast_time", {x}, y, [xi, yi, length, ch]() {
        if (xi->grad.empty()) xi->grad.assign(xi->value.size(), 0.0);
        for (int t = 0; t < length; ++t)
            for (int c = 0; c < ch; ++c) xi->grad[c] += yi->grad[t * ch + c];
    });
    return y;
}

Tensor relu(const Tensor& x) {
    Tensor y(x.shape());
    const int n = x.size();
    for (int i = 0; i < n; ++i) y.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
    autodiff::finalize(y);

    auto xi = x.impl(), yi = y.impl();
    autodiff::record("relu", {x}, y, [xi, yi, n]() {
        if (xi->grad.empty()) xi->grad.assign(xi->value.size(), 0.0);
        for (int i = 0; i < n; ++i)
            if (xi->value[i] > 0.0) xi->grad[i] += yi->grad[i];
    });
    return y;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!same_shape(a, b)) throw ShapeError("add: shape mismatch");
    Tensor y(a.shape());
    const int n = a.size();
    for (int i = 0; i < n; ++i) y.data()[i] = a.data()[i] + b.data()[i];
    autodiff::finalize(y);

    auto ai = a.impl(), bi = b.impl(), yi = y.impl();
    autodiff::record("add", {a, b}, y, [ai, bi, yi]() {
        if (ai->requires_grad) {
            if (ai->grad.empty()) ai->grad.assign(ai->value.size(), 0.0);
            axpy(ai->grad, yi->grad);
        }
        if (bi->requires_grad) {
            if (bi->grad.empty()) bi->grad.assign(bi->value.size(), 0.0);
            axpy(bi->grad, yi->grad);
        }
    });
    return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (!same_shape(a, b)) throw ShapeError("mul: shape mismatch");
    Tensor y(a.shape());
    const int n = a.size();
    for (int i = 0; i < n; ++i) y.data()[i] = a.data()[i] * b.data()[i];
    autodiff::finalize(y);

    auto ai = a.impl(), bi = b.impl(), yi = y.impl();
    autodiff::record("mul", {a, b}, y, [ai, bi, yi, n]() {
        if (ai->requires_grad) {
            if (ai->grad.empty()) ai->grad.assign(ai->value.size(), 0.0);
            for (int i = 0; i < n; ++i) ai->grad[i] += yi->grad[i] * bi->value[i];
        }
        if (bi->requires_grad) {
            if (bi->grad.empty()) bi->grad.assign(bi->value.size(), 0.0);
            for (int i = 0; i < n; ++i) bi->grad[i] += yi->grad[i] * ai->value[i];
        }
    });
    return y;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.rows() != b.rows())
        throw ShapeError("concat_channels: row counts differ");
    const int len = a.rows(), ca = a.cols(), cb = b.cols(), cy = ca + cb;
    Tensor y({len, cy});
    for (int t = 0; t < len; ++t) {
        for (int c = 0; c < ca; ++c) y.data()[t * cy + c] = a.data()[t * ca + c];
        for (int c = 0; c < cb; ++c) y.data()[t * cy + ca + c] = b.data()[t * cb + c];
    }
    autodiff::finalize(y);

    auto ai = a.impl(), bi = b.impl(), yi = y.impl();
    autodiff::record("concat_channels", {a, b}, y, [ai, bi, yi, len, ca, cb, cy]() {
        if (ai->requires_grad) {
            if (ai->grad.empty()) ai->grad.assign(ai->value.size(), 0.0);
            for (int t = 0; t < len; ++t)
                for (int c = 0; c < ca; ++c) ai->grad[t * ca + c] += yi->grad[t * cy + c];
        }
        if (bi->requires_grad) {
            if (bi->grad.empty()) bi->grad.assign(bi->value.size(), 0.0);
            for (int t = 0; t < len; ++t)
                for (int c = 0; c < cb; ++c) bi->grad[t * cb + c] += yi->grad[t * cy + ca + c];
        }
    });
    return y;
}

Tensor slice_channels(const Tensor& x, int from, int to) {
    if (x.rank() != 2) throw ShapeError("slice_channels: rank-2 input required");
    const int len = x.rows(), cx = x.cols();
    if (from < 0 || to <= from || to > cx) throw ShapeError("slice_channels: bad range");
    const int cy = to - from;
    Tensor y({len, cy});
    for (int t = 0; t < len; ++t)
        for (int c = 0; c < cy; ++c) y.data()[t * cy + c] = x.data()[t * cx + from + c];
    autodiff::finalize(y);

    auto xi = x.impl(), yi = y.impl();
    autodiff::record("slice_channels", {x}, y, [xi, yi, len, cx, cy, from]() {
        if (xi->grad.empty()) xi->grad.assign(xi->value.size(), 0.0);
        for (int t = 0; t < len; ++t)
            for (int c = 0; c < cy; ++c) xi->grad[t * cx + from + c] += yi->grad[t * cy + c];
    });
    return y;
}

Tensor scale_rows(const Tensor& x, const std::vector<double>& row_gains) {
    if (x.rank() != 2) throw ShapeError("scale_rows: rank-2 input required");
    const int len = x.rows(), ch = x.cols();
    if (static_cast<int>(row_gains.size()) != len) throw ShapeError("scale_rows: gain length mismatch");
    Tensor y({len, ch});
    for (int t = 0; t < len; ++t)
        for (int c = 0; c < ch; ++c) y.data()[t * ch + c] = x.data()[t * ch + c] * row_gains[t];
    autodiff::finalize(y);

    auto xi = x.impl(), yi = y.impl();
    auto gains = std::make_shared<std::vector<double>>(row_gains);
    autodiff::record("scale_rows", {x}, y, [xi, yi, gains, len, ch]() {
        if (xi->grad.empty()) xi->grad.assign(xi->value.size(), 0.0);
        for (int t = 0; t < len; ++t)
            for (int c = 0; c < ch; ++c) xi->grad[t * ch + c] += yi->grad[t * ch + c] * (*gains)[t];
    });
    return y;
}

Tensor instance_norm_time(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    if (x.rank() != 2) throw ShapeError("instance_norm_time: rank-2 input required");
    const int len = x.rows(), ch = x.cols();
    if (gain.size() != ch || bias.size() != ch) throw ShapeError("instance_norm_time: affine size mismatch");
    if (eps <= 0.0) throw ConfigError("instance_norm_time: eps must be positive");
    if (len == 1) {
        static bool warned = false;
        if (!warned) {
            std::fprintf(stderr, "[tasdiff] instance_norm_time: L=1 input, zero-variance guard active\n");
            warned = true;
        }
    }

    auto mean = std::make_shared<std::vector<double>>(ch);
    auto inv = std::make_shared<std::vector<double>>(ch);
    {
        std::vector<double> var(ch);
        kernels::column_stats(x.data(), mean->data(), var.data(), len, ch);
        for (int c = 0; c < ch; ++c) (*inv)[c] = 1.0 / std::sqrt(var[c] + eps);
    }

    Tensor y({len, ch});
    for (int t = 0; t < len; ++t)
        for (int c = 0; c < ch; ++c) {
            const double xhat = (x.data()[t * ch + c] - (*mean)[c]) * (*inv)[c];
            y.data()[t * ch + c] = gain.data()[c] * xhat + bias.data()[c];
        }
    autodiff::finalize(y);

    auto xi = x.impl(), gi = gain.impl(), bi = bias.impl(), yi = y.impl();
    autodiff::record("instance_norm_time", {x, gain, bias}, y, [xi, gi, bi, yi, mean, inv, len, ch]() {
        const auto& dy = yi->grad;
        for (int c = 0; c < ch; ++c) {
            double sum_dy = 0.0, sum_dyx = 0.0;
            for (int t = 0; t < len; ++t) {
                const double xhat = (xi->value[t * ch + c] - (*mean)[c]) * (*inv)[c];
                sum_dy += dy[t * ch + c];
                sum_dyx += dy[t * ch + c] * xhat;
            }
            if (xi->requires_grad) {
                if (xi->grad.empty()) xi->grad.assign(xi->value.size(), 0.0);
                const double g = gi->value[c] * (*inv)[c];
                for (int t = 0; t < len; ++t) {
                    const double xhat = (xi->value[t * ch + c] - (*mean)[c]) * (*inv)[c];
                    xi->grad[t * ch + c] += g * (dy[t * ch + c] - sum_dy / len - xhat * sum_dyx / len);
                }
            }
            if (gi->requires_grad) {
                if (gi->grad.empty()) gi->grad.assign(gi->value.size(), 0.0);
                gi->grad[c] += sum_dyx;
            }
            if (bi->requires_grad) {
                if (bi->grad.empty()) bi->grad.assign(bi->value.size(), 0.0);
                bi->grad[c] += sum_dy;
            }
        }
    });
    return y;
}

Tensor softmax_channels(const Tensor& x) {
    if (x.rank() != 2) throw ShapeError("softmax_channels: rank-2 input required");
    const int rows = x.rows(), cols = x.cols();
    Tensor y({rows, cols});
    kernels::softmax_rows(x.data(), y.data(), rows, cols);
    autodiff::finalize(y);

    auto xi = x.impl(), yi = y.impl();
    autodiff::record("softmax_channels", {x}, y, [xi, yi, rows, cols]() {
        std::vector<double> dx(xi->value.size());
        kernels::softmax_rows_grad(yi->grad.data(), yi->value.data(), dx.data(), rows, cols);
        if (xi->grad.empty()) xi->grad.assign(xi->value.size(), 0.0);
        axpy(xi->grad, dx);
    });
    return y;
}

Tensor log_softmax_channels(const Tensor& x) {
    if (x.rank() != 2) throw ShapeError("log_softmax_channels: rank-2 input required");
    const int rows = x.rows(), cols = x.cols();
    Tensor y({rows, cols});
    for (int i = 0; i < rows; ++i) {
        const double* xr = x.data() + static_cast<std::size_t>(i) * cols;
        double* yr = y.data() + static_cast<std::size_t>(i) * cols;
        double mx = xr[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
        double sum = 0.0;
        for (int j = 0; j < cols; ++j) sum += std::exp(xr[j] - mx);
        const double lse = mx + std::log(sum);
        for (int j = 0; j < cols; ++j) yr[j] = xr[j] - lse;
    }
    autodiff::finalize(y);

    auto xi = x.impl(), yi = y.impl();
    autodiff::record("log_softmax_channels", {x}, y, [xi, yi, rows, cols]() {
        if (xi->grad.empty()) xi->grad.assign(xi->value.size(), 0.0);
        for (int i = 0; i < rows; ++i) {
            double sum_dy = 0.0;
            for (int j = 0; j < cols; ++j) sum_dy += yi->grad[i * cols + j];
            for (int j = 0; j < cols; ++j)
                xi->grad[i * cols + j] +=
                    yi->grad[i * cols + j] - std::exp(yi->value[i * cols + j]) * sum_dy;
        }
    });
    return y;
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2)
        throw ShapeError("scaled_dot_attention: rank-2 operands required");
    const int lq = q.rows(), h = q.cols(), lk = k.rows();
    if (k.cols() != h || v.cols() != h || v.rows() != lk)
        throw ShapeError("scaled_dot_attention: shape mismatch");
    const double scale = 1.0 / std::sqrt(static_cast<double>(h));

    std::vector<double> scores(static_cast<std::size_t>(lq) * lk);
    kernels::matmul(q.data(), k.data(), scores.data(), lq, h, lk, false, true);
    for (double& s : scores) s *= scale;
    auto attn = std::make_shared<std::vector<double>>(static_cast<std::size_t>(lq) * lk);
    kernels::softmax_rows(scores.data(), attn->data(), lq, lk);

    Tensor y({lq, h});
    kernels::matmul(attn->data(), v.data(), y.data(), lq, lk, h, false, false);
    autodiff::finalize(y);

    auto qi = q.impl(), ki = k.impl(), vi = v.impl(), yi = y.impl();
    autodiff::record("scaled_dot_attention", {q, k, v}, y, [qi, ki, vi, yi, attn, lq, lk, h, scale]() {
        const auto& dy = yi->grad;
        if (vi->requires_grad) {
            std::vector<double> dv(vi->value.size());
            kernels::matmul(attn->data(), dy.data(), dv.data(), lk, lq, h, true, false);
            if (vi->grad.empty()) vi->grad.assign(vi->value.size(), 0.0);
            axpy(vi->grad, dv);
        }
        std::vector<double> dattn(static_cast<std::size_t>(lq) * lk);
        kernels::matmul(dy.data(), vi->value.data(), dattn.data(), lq, h, lk, false, true);
        std::vector<double> dscores(dattn.size());
        kernels::softmax_rows_grad(dattn.data(), attn->data(), dscores.data(), lq, lk);
        for (double& s : dscores) s *= scale;
        if (qi->requires_grad) {
            std::vector<double> dq(qi->value.size());
            kernels::matmul(dscores.data(), ki->value.data(), dq.data(), lq, lk, h, false, false);
            if (qi->grad.empty()) qi->grad.assign(qi->value.size(), 0.0);
            axpy(qi->grad, dq);
        }
        if (ki->requires_grad) {
            std::vector<double> dk(ki->value.size());
            kernels::matmul(dscores.data(), qi->value.data(), dk.data(), lk, lq, h, true, false);
            if (ki->grad.empty()) ki->grad.assign(ki->value.size(), 0.0);
            axpy(ki->grad, dk);
        }
    });
    return y;
}

Tensor sum_all(const Tensor& x) {
    Tensor y({1});
    double acc = 0.0;
    for (int i = 0; i < x.size(); ++i) acc += x.data()[i];
    y.data()[0] = acc;
    autodiff::finalize(y);

    auto xi = x.impl(), yi = y.impl();
    autodiff::record("sum_all", {x}, y, [xi, yi]() {
        if (xi->grad.empty()) xi->grad.assign(xi->value.size(), 0.0);
        const double g = yi->grad[0];
        for (double& d : xi->grad) d += g;
    });
    return y;
}

}  // namespace tasdiff
