#include "eraser/tensor.hpp"

#include <cassert>
#include <cmath>

namespace eraser::nn {

void matmul_acc(const Mat& a, const Mat& b, Mat& c) {
    assert(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols);
    const int m = a.rows, k = a.cols, n = b.cols;
    for (int i = 0; i < m; ++i) {
        const double* __restrict ai = a.row(i);
        double* __restrict ci = c.row(i);
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* __restrict bp = b.row(p);
            for (int j = 0; j < n; ++j) {
                ci[j] += av * bp[j];
            }
        }
    }
}

void matmul_nt_acc(const Mat& a, const Mat& b, Mat& c) {
    assert(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows);
    const int m = a.rows, k = a.cols, n = b.rows;
    for (int i = 0; i < m; ++i) {
        const double* __restrict ai = a.row(i);
        double* __restrict ci = c.row(i);
        for (int j = 0; j < n; ++j) {
            const double* __restrict bj = b.row(j);
            double acc = 0.0;
            for (int p = 0; p < k; ++p) {
                acc += ai[p] * bj[p];
            }
            ci[j] += acc;
        }
    }
}

void matmul_tn_acc(const Mat& a, const Mat& b, Mat& c) {
    assert(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols);
    const int k = a.rows, m = a.cols, n = b.cols;
    for (int p = 0; p < k; ++p) {
        const double* __restrict ap = a.row(p);
        const double* __restrict bp = b.row(p);
        for (int i = 0; i < m; ++i) {
            const double av = ap[i];
            double* __restrict ci = c.row(i);
            for (int j = 0; j < n; ++j) {
                ci[j] += av * bp[j];
            }
        }
    }
}

Mat matmul(const Mat& a, const Mat& b) {
    Mat c(a.rows, b.cols);
    matmul_acc(a, b, c);
    return c;
}

void log_softmax_rows(const Mat& src, Mat& dst) {
    assert(src.same_shape(dst));
    for (int r = 0; r < src.rows; ++r) {
        const double* in = src.row(r);
        double* out = dst.row(r);
        double mx = in[0];
        for (int j = 1; j < src.cols; ++j) {
            if (in[j] > mx) mx = in[j];
        }
        double sum = 0.0;
        for (int j = 0; j < src.cols; ++j) {
            sum += std::exp(in[j] - mx);
        }
        const double lse = mx + std::log(sum);
        for (int j = 0; j < src.cols; ++j) {
            out[j] = in[j] - lse;
        }
    }
}

void softmax_row(const double* src_row, double* dst_row, int len) {
    double mx = src_row[0];
    for (int j = 1; j < len; ++j) {
        if (src_row[j] > mx) mx = src_row[j];
    }
    double sum = 0.0;
    for (int j = 0; j < len; ++j) {
        dst_row[j] = std::exp(src_row[j] - mx);
        sum += dst_row[j];
    }
    const double inv = 1.0 / sum;
    for (int j = 0; j < len; ++j) {
        dst_row[j] *= inv;
    }
}

void layernorm_row(const double* x, int d, const double* gain, const double* bias, double eps,
                   double* out, double* xhat, double* inv_std) {
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += x[j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
        const double c = x[j] - mean;
        var += c * c;
    }
    var /= d;
    const double is = 1.0 / std::sqrt(var + eps);
    if (inv_std) *inv_std = is;
    for (int j = 0; j < d; ++j) {
        const double h = (x[j] - mean) * is;
        if (xhat) xhat[j] = h;
        out[j] = gain[j] * h + bias[j];
    }
}

double gelu_scalar(double x) {
    return 0.5 * x * (1.0 + std::erf(x * 0.70710678118654752440));
}

bool all_finite(const Mat& m) {
    for (double x : m.v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace eraser::nn
