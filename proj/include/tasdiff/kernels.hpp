#pragma once

#include <cstdint>

// Dense numeric kernels shared by the tensor ops.
//
// Every kernel exists twice: a plain serial reference under kernels::serial
// and an OpenMP entry point at namespace scope. The parallel versions split
// work so that each output element is accumulated in the same order as the
// serial code, so the two variants produce bit-identical results; the test
// suite asserts this and tools/kernel_bench compares their throughput.
namespace tasdiff::kernels {

// Runtime switch; small problems stay serial regardless (see kMinParallelWork).
void set_parallel(bool enabled);
bool parallel_enabled();
int thread_count();

inline constexpr std::int64_t kMinParallelWork = 1 << 14;

namespace serial {

// y[m x n] = op(a) * op(b), op = transpose when the flag is set.
// a is m x k (or k x m when trans_a), b is k x n (or n x k when trans_b).
void matmul(const double* a, const double* b, double* y, int m, int k, int n,
            bool trans_a, bool trans_b);

// Per-channel 1-D convolution over time with zero "same" padding.
// x: len x ch, kernel: w x ch (w odd), y: len x ch.
void depthwise_conv1d(const double* x, const double* kernel, double* y,
                      int len, int ch, int w, int dilation);
void depthwise_conv1d_grad_input(const double* dy, const double* kernel, double* dx,
                                 int len, int ch, int w, int dilation);
void depthwise_conv1d_grad_kernel(const double* dy, const double* x, double* dk,
                                  int len, int ch, int w, int dilation);

// Stride-1 max pool with -inf "same" padding; records the first argmax index.
void maxpool1d_same(const double* x, double* y, int* argmax, int len, int ch, int w);
void maxpool1d_same_grad(const double* dy, const int* argmax, double* dx,
                         int len, int ch, int w);

// Row-wise softmax with max subtraction.
void softmax_rows(const double* x, double* y, int rows, int cols);
// dx given dy and the forward output y.
void softmax_rows_grad(const double* dy, const double* y, double* dx, int rows, int cols);

// Per-channel mean and biased variance over the time axis.
void column_stats(const double* x, double* mean, double* var, int len, int ch);

}  // namespace serial

void matmul(const double* a, const double* b, double* y, int m, int k, int n,
            bool trans_a, bool trans_b);
void depthwise_conv1d(const double* x, const double* kernel, double* y,
                      int len, int ch, int w, int dilation);
void depthwise_conv1d_grad_input(const double* dy, const double* kernel, double* dx,
                                 int len, int ch, int w, int dilation);
void depthwise_conv1d_grad_kernel(const double* dy, const double* x, double* dk,
                                  int len, int ch, int w, int dilation);
void maxpool1d_same(const double* x, double* y, int* argmax, int len, int ch, int w);
void maxpool1d_same_grad(const double* dy, const int* argmax, double* dx,
                         int len, int ch, int w);
void softmax_rows(const double* x, double* y, int rows, int cols);
void softmax_rows_grad(const double* dy, const double* y, double* dx, int rows, int cols);
void column_stats(const double* x, double* mean, double* var, int len, int ch);

}  // namespace tasdiff::kernels
