#include "tasdiff/diffusion.hpp"

#include <algorithm>
#include <cmath>

namespace tasdiff {

namespace {
constexpr double kProbFloor = 1e-7;
constexpr double kPi = 3.14159265358979323846;
}  // namespace

void LabelSequence::validate() const {
    if (ids.empty()) throw ValidationError("label sequence is empty");
    if (num_classes < 2) throw ConfigError("label sequence needs >= 2 classes");
    for (int id : ids)
        if (id < 0 || id >= num_classes) throw ValidationError("label id out of range");
}

Tensor LabelSequence::one_hot() const {
    validate();
    Tensor t({length(), num_classes});
    for (int i = 0; i < length(); ++i) t.at(i, ids[static_cast<std::size_t>(i)]) = 1.0;
    return t;
}

DiffusionSchedule make_schedule(int steps) {
    if (steps < 2) throw ConfigError("diffusion schedule needs >= 2 steps");
    const double iota = 0.008;
    auto f = [&](double s) {
        const double a = (s / steps + iota) / (1.0 + iota) * (kPi / 2.0);
        const double c = std::cos(a);
        return c * c;
    };
    DiffusionSchedule sched;
    sched.steps = steps;
    sched.alpha_bar.resize(static_cast<std::size_t>(steps) + 1);
    const double f0 = f(0.0);
    for (int s = 0; s <= steps; ++s) sched.alpha_bar[static_cast<std::size_t>(s)] = f(s) / f0;
    sched.alpha_bar[0] = 1.0;
    return sched;
}

Tensor LabelCodec::encode(const LabelSequence& y) const {
    Tensor onehot = y.one_hot();
    Tensor t(onehot.shape());
    for (int i = 0; i < onehot.size(); ++i)
        t.data()[i] = scale * (2.0 * onehot.data()[i] - 1.0);
    return t;
}

Tensor LabelCodec::encode_probs(const Tensor& probs) const {
    Tensor t(probs.shape());
    for (int i = 0; i < probs.size(); ++i)
        t.data()[i] = scale * (2.0 * probs.data()[i] - 1.0);
    return t;
}

std::vector<int> LabelCodec::decode_argmax(const Tensor& t) const {
    const int len = t.rows(), classes = t.cols();
    std::vector<int> out(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i) {
        int best = 0;
        for (int c = 1; c < classes; ++c)
            if (t.at(i, c) > t.at(i, best)) best = c;
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

Tensor corrupt(const Tensor& y0_encoded, int s, const DiffusionSchedule& schedule,
               const Tensor& noise) {
    if (s < 1 || s > schedule.steps) throw ConfigError("corrupt: step out of range");
    if (!same_shape(y0_encoded, noise)) throw ShapeError("corrupt: noise shape mismatch");
    const double ab = schedule.at(s);
    const double sig = std::sqrt(ab), noi = std::sqrt(1.0 - ab);
    Tensor out(y0_encoded.shape());
    for (int i = 0; i < out.size(); ++i)
        out.data()[i] = sig * y0_encoded.data()[i] + noi * noise.data()[i];
    return out;
}

std::vector<std::uint8_t> boundary_flags(const LabelSequence& y) {
    y.validate();
    const int len = y.length();
    std::vector<std::uint8_t> b(static_cast<std::size_t>(std::max(0, len - 1)));
    for (int i = 0; i + 1 < len; ++i)
        b[static_cast<std::size_t>(i)] = y.ids[static_cast<std::size_t>(i)] != y.ids[static_cast<std::size_t>(i + 1)] ? 1 : 0;
    return b;
}

std::vector<double> smooth_boundaries(const std::vector<std::uint8_t>& b, double sigma) {
    std::vector<double> out(b.size(), 0.0);
    if (sigma <= 0.0) {
        for (std::size_t i = 0; i < b.size(); ++i) out[i] = b[i];
        return out;
    }
    const int radius = static_cast<int>(std::ceil(4.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    for (int j = -radius; j <= radius; ++j)
        kernel[static_cast<std::size_t>(j + radius)] = std::exp(-0.5 * (j / sigma) * (j / sigma));
    const int n = static_cast<int>(b.size());
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = -radius; j <= radius; ++j) {
            const int src = i + j;
            if (src >= 0 && src < n && b[static_cast<std::size_t>(src)])
                acc += kernel[static_cast<std::size_t>(j + radius)];
        }
        out[static_cast<std::size_t>(i)] = std::min(1.0, acc);
    }
    return out;
}

Tensor loss_ce(const Tensor& probs, const LabelSequence& y0) {
    const int len = probs.rows(), classes = probs.cols();
    if (len != y0.length() || classes != y0.num_classes)
        throw ShapeError("loss_ce: prediction/label shape mismatch");
    const double norm = 1.0 / (static_cast<double>(len) * classes);

    Tensor out({1});
    double acc = 0.0;
    for (int i = 0; i < len; ++i) {
        const double p = std::clamp(probs.at(i, y0.ids[static_cast<std::size_t>(i)]), kProbFloor, 1.0);
        acc -= std::log(p);
    }
    out.data()[0] = acc * norm;
    autodiff::finalize(out);

    auto pi = probs.impl(), oi = out.impl();
    auto ids = std::make_shared<std::vector<int>>(y0.ids);
    autodiff::record("loss_ce", {probs}, out, [pi, oi, ids, len, classes, norm]() {
        if (pi->grad.empty()) pi->grad.assign(pi->value.size(), 0.0);
        const double g = oi->grad[0] * norm;
        for (int i = 0; i < len; ++i) {
            const int c = (*ids)[static_cast<std::size_t>(i)];
            const double p = pi->value[i * classes + c];
            if (p > kProbFloor && p <= 1.0) pi->grad[i * classes + c] -= g / p;
        }
    });
    return out;
}

Tensor loss_smooth(const Tensor& probs, bool clamp_at_16) {
    const int len = probs.rows(), classes = probs.cols();
    if (len < 2) throw ShapeError("loss_smooth: needs at least 2 frames");
    const double norm = 1.0 / (static_cast<double>(len - 1) * classes);

    Tensor out({1});
    double acc = 0.0;
    for (int i = 0; i + 1 < len; ++i)
        for (int c = 0; c < classes; ++c) {
            const double d = std::log(probs.at(i, c)) - std::log(probs.at(i + 1, c));
            const double sq = d * d;
            acc += clamp_at_16 ? std::min(sq, 16.0) : sq;
        }
    out.data()[0] = acc * norm;
    autodiff::finalize(out);

    auto pi = probs.impl(), oi = out.impl();
    autodiff::record("loss_smooth", {probs}, out, [pi, oi, len, classes, norm, clamp_at_16]() {
        if (pi->grad.empty()) pi->grad.assign(pi->value.size(), 0.0);
        const double g = oi->grad[0] * norm;
        for (int i = 0; i + 1 < len; ++i)
            for (int c = 0; c < classes; ++c) {
                const double pa = pi->value[i * classes + c];
                const double pb = pi->value[(i + 1) * classes + c];
                const double d = std::log(pa) - std::log(pb);
                if (clamp_at_16 && d * d >= 16.0) continue;
                pi->grad[i * classes + c] += g * 2.0 * d / pa;
                pi->grad[(i + 1) * classes + c] -= g * 2.0 * d / pb;
            }
    });
    return out;
}

Tensor loss_boundary(const Tensor& probs, const std::vector<double>& boundary_target) {
    const int len = probs.rows(), classes = probs.cols();
    if (len < 2) throw ShapeError("loss_boundary: needs at least 2 frames");
    if (static_cast<int>(boundary_target.size()) != len - 1)
        throw ShapeError("loss_boundary: target length mismatch");
    const double norm = 1.0 / static_cast<double>(len - 1);
    const double lo = kProbFloor, hi = 1.0 - kProbFloor;

    Tensor out({1});
    double acc = 0.0;
    for (int i = 0; i + 1 < len; ++i) {
        double dot = 0.0;
        for (int c = 0; c < classes; ++c) dot += probs.at(i, c) * probs.at(i + 1, c);
        const double q = std::clamp(dot, lo, hi);
        const double bt = boundary_target[static_cast<std::size_t>(i)];
        acc += -bt * std::log(1.0 - q) - (1.0 - bt) * std::log(q);
    }
    out.data()[0] = acc * norm;
    autodiff::finalize(out);

    auto pi = probs.impl(), oi = out.impl();
    auto target = std::make_shared<std::vector<double>>(boundary_target);
    autodiff::record("loss_boundary", {probs}, out, [pi, oi, target, len, classes, norm, lo, hi]() {
        if (pi->grad.empty()) pi->grad.assign(pi->value.size(), 0.0);
        const double g = oi->grad[0] * norm;
        for (int i = 0; i + 1 < len; ++i) {
            double dot = 0.0;
            for (int c = 0; c < classes; ++c) dot += pi->value[i * classes + c] * pi->value[(i + 1) * classes + c];
            if (dot <= lo || dot >= hi) continue;  // clamped: flat
            const double bt = (*target)[static_cast<std::size_t>(i)];
            const double dq = g * (bt / (1.0 - dot) - (1.0 - bt) / dot);
            for (int c = 0; c < classes; ++c) {
                pi->grad[i * classes + c] += dq * pi->value[(i + 1) * classes + c];
                pi->grad[(i + 1) * classes + c] += dq * pi->value[i * classes + c];
            }
        }
    });
    return out;
}

Tensor loss_total(const Tensor& probs, const LabelSequence& y0,
                  const std::vector<double>& boundary_target, bool smooth_clamp) {
    return add(add(loss_ce(probs, y0), loss_smooth(probs, smooth_clamp)),
               loss_boundary(probs, boundary_target));
}

}  // namespace tasdiff
