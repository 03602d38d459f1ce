#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "exechecker/errors.hpp"

namespace exechecker {

// Plain dense matrix (no autodiff) for the alignment math.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c, double v = 0.0) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, v) {}

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

inline Mat matmul(const Mat& x, const Mat& y) {
    Mat r(x.rows, y.cols);
    for (int i = 0; i < x.rows; ++i)
        for (int k = 0; k < x.cols; ++k) {
            double v = x(i, k);
            if (v == 0.0) continue;
            for (int j = 0; j < y.cols; ++j) r(i, j) += v * y(k, j);
        }
    return r;
}

inline Mat transpose(const Mat& x) {
    Mat r(x.cols, x.rows);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < x.cols; ++j) r(j, i) = x(i, j);
    return r;
}

// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
// Throws RankError when a pivot degenerates.
inline Mat cholesky(const Mat& s) {
    int n = s.rows;
    Mat l(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double sum = s(i, j);
            for (int k = 0; k < j; ++k) sum -= l(i, k) * l(j, k);
            if (i == j) {
                if (sum <= 0.0 || !std::isfinite(sum))
                    throw RankError("cholesky: matrix not positive definite");
                l(i, i) = std::sqrt(sum);
            } else {
                l(i, j) = sum / l(j, j);
            }
        }
    }
    return l;
}

// Solves L * x = b for lower-triangular L, column by column.
inline Mat forward_solve(const Mat& l, const Mat& b) {
    Mat x(b.rows, b.cols);
    for (int c = 0; c < b.cols; ++c)
        for (int i = 0; i < l.rows; ++i) {
            double s = b(i, c);
            for (int k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
            x(i, c) = s / l(i, i);
        }
    return x;
}

// Solves L^T * x = b for lower-triangular L.
inline Mat backward_solve(const Mat& l, const Mat& b) {
    Mat x(b.rows, b.cols);
    for (int c = 0; c < b.cols; ++c)
        for (int i = l.rows - 1; i >= 0; --i) {
            double s = b(i, c);
            for (int k = i + 1; k < l.rows; ++k) s -= l(k, i) * x(k, c);
            x(i, c) = s / l(i, i);
        }
    return x;
}

// Cyclic Jacobi eigendecomposition of a symmetric matrix.
// Returns eigenvalues in descending order with matching eigenvector columns.
inline void jacobi_eigh(Mat s, std::vector<double>& eigvals, Mat& eigvecs) {
    int n = s.rows;
    eigvecs = Mat::identity(n);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += s(p, q) * s(p, q);
        if (off < 1e-28) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double apq = s(p, q);
                if (std::fabs(apq) < 1e-300) continue;
                double theta = (s(q, q) - s(p, p)) / (2.0 * apq);
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double sn = t * c;
                for (int k = 0; k < n; ++k) {
                    double skp = s(k, p), skq = s(k, q);
                    s(k, p) = c * skp - sn * skq;
                    s(k, q) = sn * skp + c * skq;
                }
                for (int k = 0; k < n; ++k) {
                    double spk = s(p, k), sqk = s(q, k);
                    s(p, k) = c * spk - sn * sqk;
                    s(q, k) = sn * spk + c * sqk;
                }
                for (int k = 0; k < n; ++k) {
                    double vkp = eigvecs(k, p), vkq = eigvecs(k, q);
                    eigvecs(k, p) = c * vkp - sn * vkq;
                    eigvecs(k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }
    eigvals.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) eigvals[static_cast<std::size_t>(i)] = s(i, i);
    // sort descending, carrying eigenvector columns along
    for (int i = 0; i < n; ++i) {
        int best = i;
        for (int j = i + 1; j < n; ++j)
            if (eigvals[static_cast<std::size_t>(j)] > eigvals[static_cast<std::size_t>(best)]) best = j;
        if (best != i) {
            std::swap(eigvals[static_cast<std::size_t>(i)], eigvals[static_cast<std::size_t>(best)]);
            for (int k = 0; k < n; ++k) std::swap(eigvecs(k, i), eigvecs(k, best));
        }
    }
}

}  // namespace exechecker
