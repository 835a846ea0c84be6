#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace eraser::nn {

// Dense row-major matrix of doubles. Vectors are 1xN or Nx1 matrices.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * static_cast<size_t>(c), 0.0) {}

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
    double* row(int r) { return v.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return v.data() + static_cast<size_t>(r) * cols; }
    size_t size() const { return v.size(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
    void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

// C += A * B    (m x k)(k x n). Accumulation over k in ascending order,
// identical for every code path that multiplies, so repeated forwards are
// bit-identical.
void matmul_acc(const Mat& a, const Mat& b, Mat& c);

// C += A * B^T  (m x k)(n x k)
void matmul_nt_acc(const Mat& a, const Mat& b, Mat& c);

// C += A^T * B  (k x m)(k x n)
void matmul_tn_acc(const Mat& a, const Mat& b, Mat& c);

Mat matmul(const Mat& a, const Mat& b);

// Row-wise log-softmax of src written into dst (same shape). Returns nothing;
// logsumexp uses max subtraction so outputs are always <= 0.
void log_softmax_rows(const Mat& src, Mat& dst);

// Softmax of one row segment [0, len) of src_row into dst_row.
void softmax_row(const double* src_row, double* dst_row, int len);

// One row of layer norm: out = gain * (x - mean) / sqrt(var + eps) + bias.
// xhat and inv_std are optional outputs for backward passes. Every layer-norm
// evaluation in the project goes through this function so that training and
// inference paths agree bit for bit.
void layernorm_row(const double* x, int d, const double* gain, const double* bias, double eps,
                   double* out, double* xhat, double* inv_std);

// Exact (erf-based) GELU, shared between tape and inference paths.
double gelu_scalar(double x);

bool all_finite(const Mat& m);

}  // namespace eraser::nn
