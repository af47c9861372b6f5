#include "tasdiff/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tasdiff::kernels {

namespace {
std::atomic<bool> g_parallel{true};

inline bool go_parallel(std::int64_t work) {
    return g_parallel.load(std::memory_order_relaxed) && work >= kMinParallelWork;
}
}  // namespace

void set_parallel(bool enabled) { g_parallel.store(enabled, std::memory_order_relaxed); }
bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }

int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// ---------------------------------------------------------------------------
// serial reference implementations
// ---------------------------------------------------------------------------

namespace serial {

void matmul(const double* a, const double* b, double* y, int m, int k, int n,
            bool trans_a, bool trans_b) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) {
                const double av = trans_a ? a[p * m + i] : a[i * k + p];
                const double bv = trans_b ? b[j * k + p] : b[p * n + j];
                acc += av * bv;
            }
            y[i * n + j] = acc;
        }
    }
}

void depthwise_conv1d(const double* x, const double* kernel, double* y,
                      int len, int ch, int w, int dilation) {
    const int r = w / 2;
    for (int t = 0; t < len; ++t) {
        for (int c = 0; c < ch; ++c) {
            double acc = 0.0;
            for (int j = 0; j < w; ++j) {
                const int src = t + (j - r) * dilation;
                if (src >= 0 && src < len) acc += x[src * ch + c] * kernel[j * ch + c];
            }
            y[t * ch + c] = acc;
        }
    }
}

void depthwise_conv1d_grad_input(const double* dy, const double* kernel, double* dx,
                                 int len, int ch, int w, int dilation) {
    const int r = w / 2;
    for (int t = 0; t < len; ++t) {
        for (int c = 0; c < ch; ++c) {
            double acc = 0.0;
            for (int j = 0; j < w; ++j) {
                const int dst = t - (j - r) * dilation;
                if (dst >= 0 && dst < len) acc += dy[dst * ch + c] * kernel[j * ch + c];
            }
            dx[t * ch + c] = acc;
        }
    }
}

void depthwise_conv1d_grad_kernel(const double* dy, const double* x, double* dk,
                                  int len, int ch, int w, int dilation) {
    const int r = w / 2;
    for (int j = 0; j < w; ++j) {
        for (int c = 0; c < ch; ++c) {
            double acc = 0.0;
            for (int t = 0; t < len; ++t) {
                const int src = t + (j - r) * dilation;
                if (src >= 0 && src < len) acc += dy[t * ch + c] * x[src * ch + c];
            }
            dk[j * ch + c] = acc;
        }
    }
}

void maxpool1d_same(const double* x, double* y, int* argmax, int len, int ch, int w) {
    const int r = w / 2;
    for (int t = 0; t < len; ++t) {
        for (int c = 0; c < ch; ++c) {
            double best = -std::numeric_limits<double>::infinity();
            int best_idx = -1;
            for (int j = -r; j <= r; ++j) {
                const int src = t + j;
                if (src < 0 || src >= len) continue;
                const double v = x[src * ch + c];
                if (v > best) {  // strict: ties go to the earliest index
                    best = v;
                    best_idx = src;
                }
            }
            y[t * ch + c] = best;
            argmax[t * ch + c] = best_idx;
        }
    }
}

void maxpool1d_same_grad(const double* dy, const int* argmax, double* dx,
                         int len, int ch, int w) {
    const int r = w / 2;
    for (int i = 0; i < len; ++i) {
        for (int c = 0; c < ch; ++c) {
            double acc = 0.0;
            for (int t = std::max(0, i - r); t <= std::min(len - 1, i + r); ++t) {
                if (argmax[t * ch + c] == i) acc += dy[t * ch + c];
            }
            dx[i * ch + c] = acc;
        }
    }
}

void softmax_rows(const double* x, double* y, int rows, int cols) {
    for (int i = 0; i < rows; ++i) {
        const double* xr = x + static_cast<std::int64_t>(i) * cols;
        double* yr = y + static_cast<std::int64_t>(i) * cols;
        double mx = xr[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
        double sum = 0.0;
        for (int j = 0; j < cols; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        for (int j = 0; j < cols; ++j) yr[j] /= sum;
    }
}

void softmax_rows_grad(const double* dy, const double* y, double* dx, int rows, int cols) {
    for (int i = 0; i < rows; ++i) {
        const double* dyr = dy + static_cast<std::int64_t>(i) * cols;
        const double* yr = y + static_cast<std::int64_t>(i) * cols;
        double* dxr = dx + static_cast<std::int64_t>(i) * cols;
        double dot = 0.0;
        for (int j = 0; j < cols; ++j) dot += dyr[j] * yr[j];
        for (int j = 0; j < cols; ++j) dxr[j] = yr[j] * (dyr[j] - dot);
    }
}

void column_stats(const double* x, double* mean, double* var, int len, int ch) {
    for (int c = 0; c < ch; ++c) {
        double m = 0.0;
        for (int t = 0; t < len; ++t) m += x[t * ch + c];
        m /= len;
        double v = 0.0;
        for (int t = 0; t < len; ++t) {
            const double d = x[t * ch + c] - m;
            v += d * d;
        }
        mean[c] = m;
        var[c] = v / len;
    }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP entry points. Work is split by output row/element only; each element
// runs the same accumulation order as the serial reference, so results match
// the reference bit for bit at any thread count.
// ---------------------------------------------------------------------------

void matmul(const double* a, const double* b, double* y, int m, int k, int n,
            bool trans_a, bool trans_b) {
    const bool par = go_parallel(static_cast<std::int64_t>(m) * k * n);
    if (!trans_a && !trans_b) {
        // row accumulation, contiguous reads of both operands
#pragma omp parallel for schedule(static) if (par)
        for (int i = 0; i < m; ++i) {
            double* yr = y + static_cast<std::int64_t>(i) * n;
            const double* ar = a + static_cast<std::int64_t>(i) * k;
            for (int j = 0; j < n; ++j) yr[j] = 0.0;
            for (int p = 0; p < k; ++p) {
                const double av = ar[p];
                const double* br = b + static_cast<std::int64_t>(p) * n;
                for (int j = 0; j < n; ++j) yr[j] += av * br[j];
            }
        }
        return;
    }
#pragma omp parallel for schedule(static) if (par)
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) {
                const double av = trans_a ? a[p * m + i] : a[i * k + p];
                const double bv = trans_b ? b[j * k + p] : b[p * n + j];
                acc += av * bv;
            }
            y[i * n + j] = acc;
        }
    }
}

void depthwise_conv1d(const double* x, const double* kernel, double* y,
                      int len, int ch, int w, int dilation) {
    const bool par = go_parallel(static_cast<std::int64_t>(len) * ch * w);
    const int r = w / 2;
#pragma omp parallel for schedule(static) if (par)
    for (int t = 0; t < len; ++t) {
        for (int c = 0; c < ch; ++c) {
            double acc = 0.0;
            for (int j = 0; j < w; ++j) {
                const int src = t + (j - r) * dilation;
                if (src >= 0 && src < len) acc += x[src * ch + c] * kernel[j * ch + c];
            }
            y[t * ch + c] = acc;
        }
    }
}

void depthwise_conv1d_grad_input(const double* dy, const double* kernel, double* dx,
                                 int len, int ch, int w, int dilation) {
    const bool par = go_parallel(static_cast<std::int64_t>(len) * ch * w);
    const int r = w / 2;
#pragma omp parallel for schedule(static) if (par)
    for (int t = 0; t < len; ++t) {
        for (int c = 0; c < ch; ++c) {
            double acc = 0.0;
            for (int j = 0; j < w; ++j) {
                const int dst = t - (j - r) * dilation;
                if (dst >= 0 && dst < len) acc += dy[dst * ch + c] * kernel[j * ch + c];
            }
            dx[t * ch + c] = acc;
        }
    }
}

void depthwise_conv1d_grad_kernel(const double* dy, const double* x, double* dk,
                                  int len, int ch, int w, int dilation) {
    const bool par = go_parallel(static_cast<std::int64_t>(len) * ch * w);
    const int r = w / 2;
    const int wc = w * ch;
#pragma omp parallel for schedule(static) if (par)
    for (int jc = 0; jc < wc; ++jc) {
        const int j = jc / ch;
        const int c = jc % ch;
        double acc = 0.0;
        for (int t = 0; t < len; ++t) {
            const int src = t + (j - r) * dilation;
            if (src >= 0 && src < len) acc += dy[t * ch + c] * x[src * ch + c];
        }
        dk[jc] = acc;
    }
}

void maxpool1d_same(const double* x, double* y, int* argmax, int len, int ch, int w) {
    const bool par = go_parallel(static_cast<std::int64_t>(len) * ch * w);
    const int r = w / 2;
#pragma omp parallel for schedule(static) if (par)
    for (int t = 0; t < len; ++t) {
        for (int c = 0; c < ch; ++c) {
            double best = -std::numeric_limits<double>::infinity();
            int best_idx = -1;
            for (int j = -r; j <= r; ++j) {
                const int src = t + j;
                if (src < 0 || src >= len) continue;
                const double v = x[src * ch + c];
                if (v > best) {
                    best = v;
                    best_idx = src;
                }
            }
            y[t * ch + c] = best;
            argmax[t * ch + c] = best_idx;
        }
    }
}

void maxpool1d_same_grad(const double* dy, const int* argmax, double* dx,
                         int len, int ch, int w) {
    const bool par = go_parallel(static_cast<std::int64_t>(len) * ch * w);
    const int r = w / 2;
#pragma omp parallel for schedule(static) if (par)
    for (int i = 0; i < len; ++i) {
        for (int c = 0; c < ch; ++c) {
            double acc = 0.0;
            for (int t = std::max(0, i - r); t <= std::min(len - 1, i + r); ++t) {
                if (argmax[t * ch + c] == i) acc += dy[t * ch + c];
            }
            dx[i * ch + c] = acc;
        }
    }
}

void softmax_rows(const double* x, double* y, int rows, int cols) {
    const bool par = go_parallel(static_cast<std::int64_t>(rows) * cols);
#pragma omp parallel for schedule(static) if (par)
    for (int i = 0; i < rows; ++i) {
        serial::softmax_rows(x + static_cast<std::int64_t>(i) * cols,
                             y + static_cast<std::int64_t>(i) * cols, 1, cols);
    }
}

void softmax_rows_grad(const double* dy, const double* y, double* dx, int rows, int cols) {
    const bool par = go_parallel(static_cast<std::int64_t>(rows) * cols);
#pragma omp parallel for schedule(static) if (par)
    for (int i = 0; i < rows; ++i) {
        serial::softmax_rows_grad(dy + static_cast<std::int64_t>(i) * cols,
                                  y + static_cast<std::int64_t>(i) * cols,
                                  dx + static_cast<std::int64_t>(i) * cols, 1, cols);
    }
}

void column_stats(const double* x, double* mean, double* var, int len, int ch) {
    const bool par = go_parallel(static_cast<std::int64_t>(len) * ch);
#pragma omp parallel for schedule(static) if (par)
    for (int c = 0; c < ch; ++c) {
        double m = 0.0;
        for (int t = 0; t < len; ++t) m += x[t * ch + c];
        m /= len;
        double v = 0.0;
        for (int t = 0; t < len; ++t) {
            const double d = x[t * ch + c] - m;
            v += d * d;
        }
        mean[c] = m;
        var[c] = v / len;
    }
}

}  // namespace tasdiff::kernels
