#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "exechecker/errors.hpp"
#include "exechecker/linalg.hpp"
#include "exechecker/sequence.hpp"
#include "exechecker/topology.hpp"

namespace exechecker {

// Monotone alignment between two sequences: starts at (0,0), ends at
// (T1-1, T2-1), steps are (1,0), (0,1) or (1,1).
using WarpPath = std::vector<std::pair<int, int>>;

inline bool warp_path_valid(const WarpPath& path, int t1, int t2) {
    if (path.empty() || path.front() != std::make_pair(0, 0) ||
        path.back() != std::make_pair(t1 - 1, t2 - 1))
        return false;
    for (std::size_t i = 1; i < path.size(); ++i) {
        int di = path[i].first - path[i - 1].first;
        int dj = path[i].second - path[i - 1].second;
        if (di < 0 || dj < 0 || di > 1 || dj > 1 || (di == 0 && dj == 0)) return false;
    }
    return true;
}

struct DtwResult {
    WarpPath path;
    double cost = 0.0;
};

// Classic dynamic time warping with the three-move step set and Euclidean
// local distance. Ties prefer the diagonal predecessor, then (1,0), then (0,1).
inline DtwResult dtw(const Mat& x, const Mat& y) {
    if (x.cols != y.cols) throw ShapeError("dtw: feature dims differ");
    if (x.rows < 1 || y.rows < 1) throw ShapeError("dtw: empty sequence");
    int t1 = x.rows, t2 = y.rows, d = x.cols;
    auto local = [&](int i, int j) {
        double s = 0.0;
        for (int k = 0; k < d; ++k) {
            double diff = x(i, k) - y(j, k);
            s += diff * diff;
        }
        return std::sqrt(s);
    };
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> cost(static_cast<std::size_t>(t1) * t2, inf);
    std::vector<signed char> move(static_cast<std::size_t>(t1) * t2, 0);  // 1=diag 2=(1,0) 3=(0,1)
    auto idx = [t2](int i, int j) { return static_cast<std::size_t>(i) * t2 + j; };
    for (int i = 0; i < t1; ++i) {
        for (int j = 0; j < t2; ++j) {
            double l = local(i, j);
            if (i == 0 && j == 0) {
                cost[idx(i, j)] = l;
                continue;
            }
            double best = inf;
            signed char m = 0;
            if (i > 0 && j > 0 && cost[idx(i - 1, j - 1)] < best) { best = cost[idx(i - 1, j - 1)]; m = 1; }
            if (i > 0 && cost[idx(i - 1, j)] < best) { best = cost[idx(i - 1, j)]; m = 2; }
            if (j > 0 && cost[idx(i, j - 1)] < best) { best = cost[idx(i, j - 1)]; m = 3; }
            cost[idx(i, j)] = best + l;
            move[idx(i, j)] = m;
        }
    }
    DtwResult r;
    r.cost = cost[idx(t1 - 1, t2 - 1)];
    int i = t1 - 1, j = t2 - 1;
    r.path.emplace_back(i, j);
    while (i != 0 || j != 0) {
        switch (move[idx(i, j)]) {
            case 1: --i; --j; break;
            case 2: --i; break;
            default: --j; break;
        }
        r.path.emplace_back(i, j);
    }
    std::reverse(r.path.begin(), r.path.end());
    return r;
}

// ---- canonical correlation analysis ----

struct CcaResult {
    Mat vx;  // D1 x k projection
    Mat vy;  // D2 x k projection
    std::vector<double> correlations;   // descending
    std::vector<double> mean_x, mean_y; // column means the projections assume
};

namespace detail_cca {

inline Mat center_columns(const Mat& x, std::vector<double>& means) {
    Mat c = x;
    means.resize(static_cast<std::size_t>(x.cols));
    for (int j = 0; j < x.cols; ++j) {
        double m = 0.0;
        for (int i = 0; i < x.rows; ++i) m += x(i, j);
        m /= x.rows;
        means[static_cast<std::size_t>(j)] = m;
        for (int i = 0; i < x.rows; ++i) c(i, j) -= m;
    }
    return c;
}

inline Mat covariance(const Mat& xc, const Mat& yc) {
    Mat s(xc.cols, yc.cols);
    for (int i = 0; i < xc.rows; ++i)
        for (int a = 0; a < xc.cols; ++a) {
            double v = xc(i, a);
            if (v == 0.0) continue;
            for (int b = 0; b < yc.cols; ++b) s(a, b) += v * yc(i, b);
        }
    for (auto& v : s.a) v /= xc.rows;
    return s;
}

}  // namespace detail_cca

// Linear projections maximizing the correlation between the projected
// sequences, via the ridge-regularized generalized eigenproblem reduced with
// Cholesky factors. Components come out in decreasing correlation order.
inline CcaResult cca(const Mat& x, const Mat& y, int k, double reg = 1e-6) {
    if (x.rows != y.rows) throw ShapeError("cca: row counts differ");
    if (k <= 0 || k > std::min(x.cols, y.cols)) throw ShapeError("cca: bad component count");
    if (x.rows <= k) throw ShapeError("cca: need more rows than components");
    CcaResult r;
    Mat xc = detail_cca::center_columns(x, r.mean_x);
    Mat yc = detail_cca::center_columns(y, r.mean_y);
    Mat sxx = detail_cca::covariance(xc, xc);
    Mat syy = detail_cca::covariance(yc, yc);
    Mat sxy = detail_cca::covariance(xc, yc);
    for (int i = 0; i < sxx.rows; ++i) sxx(i, i) += reg;
    for (int i = 0; i < syy.rows; ++i) syy(i, i) += reg;

    Mat lx, ly;
    try {
        lx = cholesky(sxx);
        ly = cholesky(syy);
    } catch (const RankError&) {
        throw RankError("cca: covariance singular beyond ridge repair");
    }
    // M = Lx^-1 Sxy Ly^-T ; eigendecompose M M^T
    Mat m_left = forward_solve(lx, sxy);                    // Lx^-1 Sxy, D1 x D2
    Mat m = transpose(forward_solve(ly, transpose(m_left)));  // D1 x D2
    Mat mmt = matmul(m, transpose(m));                      // D1 x D1, symmetric
    std::vector<double> eig;
    Mat w;
    jacobi_eigh(mmt, eig, w);

    r.vx = Mat(x.cols, k);
    r.vy = Mat(y.cols, k);
    r.correlations.resize(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) {
        double rho2 = std::max(0.0, eig[static_cast<std::size_t>(c)]);
        double rho = std::sqrt(rho2);
        r.correlations[static_cast<std::size_t>(c)] = rho;
        if (rho <= 1e-9) continue;  // degenerate direction: leave both projections zero
        Mat wc(m.rows, 1);
        for (int i = 0; i < m.rows; ++i) wc(i, 0) = w(i, c);
        Mat u = backward_solve(lx, wc);      // Lx^-T w, unit variance under Sxx
        Mat mtw = matmul(transpose(m), wc);  // norm rho
        for (auto& t : mtw.a) t /= rho;
        Mat v = backward_solve(ly, mtw);
        for (int i = 0; i < x.cols; ++i) r.vx(i, c) = u(i, 0);
        for (int i = 0; i < y.cols; ++i) r.vy(i, c) = v(i, 0);
    }
    return r;
}

// ---- canonical time warping ----

struct CtwResult {
    WarpPath path;
    std::vector<double> objectives;  // projected DTW cost per accepted iteration
    CcaResult projections;
};

inline Mat sequence_features(const SkeletonSequence& s) {
    Mat m(s.num_frames, s.num_joints * 3);
    std::copy(s.frames.begin(), s.frames.end(), m.a.begin());
    return m;
}

namespace detail_ctw {
// projections are defined on column-centered data
inline Mat project(const Mat& x, const Mat& v, const std::vector<double>& means) {
    Mat c = x;
    for (int j = 0; j < x.cols; ++j)
        for (int i = 0; i < x.rows; ++i) c(i, j) -= means[static_cast<std::size_t>(j)];
    return matmul(c, v);
}
inline Mat gather(const Mat& x, const WarpPath& path, bool first) {
    Mat g(static_cast<int>(path.size()), x.cols);
    for (std::size_t r = 0; r < path.size(); ++r) {
        int row = first ? path[r].first : path[r].second;
        for (int c = 0; c < x.cols; ++c) g(static_cast<int>(r), c) = x(row, c);
    }
    return g;
}
}  // namespace detail_ctw

// Alternates CCA on the currently aligned frame pairs with DTW on the
// projected sequences. Iterations that stop improving the projected DTW cost
// by tol are not adopted, so the recorded objective is non-increasing.
inline CtwResult ctw(const SkeletonSequence& ce, const SkeletonSequence& ie, int k = 0,
                     int max_iter = 20, double tol = 1e-6) {
    Mat x = sequence_features(ce);
    Mat y = sequence_features(ie);
    if (k <= 0) k = std::min(std::min(x.cols, y.cols), 10);

    CtwResult result;
    WarpPath path = dtw(x, y).path;  // initial alignment on raw features
    double best = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
        int k_eff = std::min(k, static_cast<int>(path.size()) - 1);
        if (k_eff < 1) break;
        Mat xa = detail_ctw::gather(x, path, true);
        Mat ya = detail_ctw::gather(y, path, false);
        CcaResult proj = cca(xa, ya, k_eff);
        DtwResult aligned = dtw(detail_ctw::project(x, proj.vx, proj.mean_x),
                                detail_ctw::project(y, proj.vy, proj.mean_y));
        if (!(aligned.cost < best - tol)) break;
        best = aligned.cost;
        result.objectives.push_back(aligned.cost);
        result.projections = std::move(proj);
        path = std::move(aligned.path);
    }
    result.path = std::move(path);
    return result;
}

// ---- per-joint scoring ----

enum class PathAggregation { PerStep, PerFrameIE };

// Sum of 3D Euclidean distances between aligned poses, per joint, in the
// original (normalized) coordinates. PerFrameIE averages duplicate alignments
// of the same IE frame before summing.
inline std::vector<double> ctw_joint_scores(const SkeletonSequence& ce, const SkeletonSequence& ie,
                                            const WarpPath& path,
                                            PathAggregation agg = PathAggregation::PerStep) {
    if (ce.num_joints != ie.num_joints) throw ShapeError("ctw_joint_scores: joint counts differ");
    if (!warp_path_valid(path, ce.num_frames, ie.num_frames))
        throw ShapeError("ctw_joint_scores: invalid warp path");
    int n = ce.num_joints;
    std::vector<double> raw(static_cast<std::size_t>(n), 0.0);
    if (agg == PathAggregation::PerStep) {
        for (auto [i, j] : path)
            for (int q = 0; q < n; ++q) {
                const double* a = ce.pos(i, q);
                const double* b = ie.pos(j, q);
                double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
                raw[static_cast<std::size_t>(q)] += std::sqrt(dx * dx + dy * dy + dz * dz);
            }
        return raw;
    }
    // group path steps by IE frame, average within each group
    std::size_t s = 0;
    while (s < path.size()) {
        std::size_t e = s;
        while (e < path.size() && path[e].second == path[s].second) ++e;
        for (int q = 0; q < n; ++q) {
            double acc = 0.0;
            for (std::size_t r = s; r < e; ++r) {
                const double* a = ce.pos(path[r].first, q);
                const double* b = ie.pos(path[r].second, q);
                double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
                acc += std::sqrt(dx * dx + dy * dy + dz * dz);
            }
            raw[static_cast<std::size_t>(q)] += acc / static_cast<double>(e - s);
        }
        s = e;
    }
    return raw;
}

// Corrects the distal-joint bias: adjusted score = raw / (hops to root + 1).
inline std::vector<double> hop_adjust(const std::vector<double>& raw, const SkeletonTopology& topo) {
    if (static_cast<int>(raw.size()) != topo.joint_count())
        throw ShapeError("hop_adjust: score count does not match topology");
    std::vector<double> adj(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        adj[i] = raw[i] / (topo.hops[i] + 1.0);
    return adj;
}

}  // namespace exechecker
