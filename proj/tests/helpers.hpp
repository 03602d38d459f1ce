#pragma once

// Test-side oracles and generators. Everything here is kept independent of
// the library implementation paths it checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "exechecker/linalg.hpp"
#include "exechecker/rng.hpp"
#include "exechecker/sequence.hpp"
#include "exechecker/tensor.hpp"

namespace testutil {

// ---- finite-difference gradient oracle ----

// Central differences with step h on a scalar function of the tensor's data.
inline std::vector<double> fd_gradient(exechecker::Tensor& param,
                                       const std::function<double()>& eval, double h = 1e-5) {
    std::vector<double> g(param.data().size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        double orig = param.data()[i];
        param.data()[i] = orig + h;
        double up = eval();
        param.data()[i] = orig - h;
        double dn = eval();
        param.data()[i] = orig;
        g[i] = (up - dn) / (2.0 * h);
    }
    return g;
}

// relative error with an absolute floor, so near-zero gradients compare sanely
inline double rel_err(double a, double b, double floor_ = 1e-3) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor_});
}

inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, rel_err(a[i], b[i]));
    return m;
}

// ---- exhaustive DTW oracle ----

// Minimum path cost by enumerating every monotone path (feasible for T <= 6).
inline double brute_dtw_cost(const exechecker::Mat& x, const exechecker::Mat& y) {
    auto local = [&](int i, int j) {
        double s = 0.0;
        for (int k = 0; k < x.cols; ++k) {
            double d = x(i, k) - y(j, k);
            s += d * d;
        }
        return std::sqrt(s);
    };
    double best = std::numeric_limits<double>::infinity();
    std::function<void(int, int, double)> walk = [&](int i, int j, double acc) {
        acc += local(i, j);
        if (i == x.rows - 1 && j == y.rows - 1) {
            best = std::min(best, acc);
            return;
        }
        if (i + 1 < x.rows && j + 1 < y.rows) walk(i + 1, j + 1, acc);
        if (i + 1 < x.rows) walk(i + 1, j, acc);
        if (j + 1 < y.rows) walk(i, j + 1, acc);
    };
    walk(0, 0, 0.0);
    return best;
}

// ---- whitened-SVD CCA oracle ----

// Self-contained cyclic Jacobi (duplicated here on purpose so the oracle does
// not share the library's eigensolver).
inline void oracle_jacobi(std::vector<std::vector<double>> a, std::vector<double>& eigvals) {
    int n = static_cast<int>(a.size());
    for (int sweep = 0; sweep < 128; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-30) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (std::fabs(a[p][q]) < 1e-300) continue;
                double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (int k = 0; k < n; ++k) {
                    double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
    }
    eigvals.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) eigvals[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
    std::sort(eigvals.begin(), eigvals.end(), std::greater<double>());
}

// Canonical correlations via symmetric-inverse-square-root whitening and the
// singular values of the whitened cross-covariance (computed as eigenvalues
// of K K^T). Same ridge as the implementation under test.
inline std::vector<double> oracle_cca_correlations(const exechecker::Mat& x, const exechecker::Mat& y,
                                                   int k, double reg = 1e-6) {
    int t = x.rows, d1 = x.cols, d2 = y.cols;
    auto center = [&](const exechecker::Mat& m) {
        std::vector<std::vector<double>> c(static_cast<std::size_t>(m.rows),
                                           std::vector<double>(static_cast<std::size_t>(m.cols)));
        for (int j = 0; j < m.cols; ++j) {
            double mean = 0.0;
            for (int i = 0; i < m.rows; ++i) mean += m(i, j);
            mean /= m.rows;
            for (int i = 0; i < m.rows; ++i) c[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j) - mean;
        }
        return c;
    };
    auto xc = center(x);
    auto yc = center(y);
    auto cov = [&](const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
        std::size_t ca = a[0].size(), cb = b[0].size();
        std::vector<std::vector<double>> s(ca, std::vector<double>(cb, 0.0));
        for (int i = 0; i < t; ++i)
            for (std::size_t p = 0; p < ca; ++p)
                for (std::size_t q = 0; q < cb; ++q)
                    s[p][q] += a[static_cast<std::size_t>(i)][p] * b[static_cast<std::size_t>(i)][q];
        for (auto& row : s)
            for (auto& v : row) v /= t;
        return s;
    };
    auto sxx = cov(xc, xc);
    auto syy = cov(yc, yc);
    auto sxy = cov(xc, yc);
    for (int i = 0; i < d1; ++i) sxx[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] += reg;
    for (int i = 0; i < d2; ++i) syy[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] += reg;

    // symmetric inverse square root via Jacobi with eigenvectors
    auto inv_sqrt = [&](std::vector<std::vector<double>> s) {
        int n = static_cast<int>(s.size());
        std::vector<std::vector<double>> v(static_cast<std::size_t>(n),
                                           std::vector<double>(static_cast<std::size_t>(n), 0.0));
        for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1.0;
        for (int sweep = 0; sweep < 128; ++sweep) {
            double off = 0.0;
            for (int p = 0; p < n; ++p)
                for (int q = p + 1; q < n; ++q) off += s[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)] * s[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)];
            if (off < 1e-30) break;
            for (int p = 0; p < n; ++p)
                for (int q = p + 1; q < n; ++q) {
                    double spq = s[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)];
                    if (std::fabs(spq) < 1e-300) continue;
                    double theta = (s[static_cast<std::size_t>(q)][static_cast<std::size_t>(q)] - s[static_cast<std::size_t>(p)][static_cast<std::size_t>(p)]) / (2.0 * spq);
                    double tt = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                    double c = 1.0 / std::sqrt(tt * tt + 1.0), sn = tt * c;
                    for (int kk = 0; kk < n; ++kk) {
                        double skp = s[static_cast<std::size_t>(kk)][static_cast<std::size_t>(p)], skq = s[static_cast<std::size_t>(kk)][static_cast<std::size_t>(q)];
                        s[static_cast<std::size_t>(kk)][static_cast<std::size_t>(p)] = c * skp - sn * skq;
                        s[static_cast<std::size_t>(kk)][static_cast<std::size_t>(q)] = sn * skp + c * skq;
                    }
                    for (int kk = 0; kk < n; ++kk) {
                        double spk = s[static_cast<std::size_t>(p)][static_cast<std::size_t>(kk)], sqk = s[static_cast<std::size_t>(q)][static_cast<std::size_t>(kk)];
                        s[static_cast<std::size_t>(p)][static_cast<std::size_t>(kk)] = c * spk - sn * sqk;
                        s[static_cast<std::size_t>(q)][static_cast<std::size_t>(kk)] = sn * spk + c * sqk;
                    }
                    for (int kk = 0; kk < n; ++kk) {
                        double vkp = v[static_cast<std::size_t>(kk)][static_cast<std::size_t>(p)], vkq = v[static_cast<std::size_t>(kk)][static_cast<std::size_t>(q)];
                        v[static_cast<std::size_t>(kk)][static_cast<std::size_t>(p)] = c * vkp - sn * vkq;
                        v[static_cast<std::size_t>(kk)][static_cast<std::size_t>(q)] = sn * vkp + c * vkq;
                    }
                }
        }
        std::vector<std::vector<double>> r(static_cast<std::size_t>(n),
                                           std::vector<double>(static_cast<std::size_t>(n), 0.0));
        for (int a2 = 0; a2 < n; ++a2)
            for (int b2 = 0; b2 < n; ++b2) {
                double acc = 0.0;
                for (int e = 0; e < n; ++e)
                    acc += v[static_cast<std::size_t>(a2)][static_cast<std::size_t>(e)] *
                           v[static_cast<std::size_t>(b2)][static_cast<std::size_t>(e)] /
                           std::sqrt(std::max(s[static_cast<std::size_t>(e)][static_cast<std::size_t>(e)], 1e-300));
                r[static_cast<std::size_t>(a2)][static_cast<std::size_t>(b2)] = acc;
            }
        return r;
    };
    auto wx = inv_sqrt(sxx);
    auto wy = inv_sqrt(syy);
    // K = Wx * Sxy * Wy
    std::vector<std::vector<double>> kmat(static_cast<std::size_t>(d1),
                                          std::vector<double>(static_cast<std::size_t>(d2), 0.0));
    for (int i = 0; i < d1; ++i)
        for (int j = 0; j < d2; ++j) {
            double acc = 0.0;
            for (int p = 0; p < d1; ++p)
                for (int q = 0; q < d2; ++q)
                    acc += wx[static_cast<std::size_t>(i)][static_cast<std::size_t>(p)] *
                           sxy[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)] *
                           wy[static_cast<std::size_t>(q)][static_cast<std::size_t>(j)];
            kmat[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = acc;
        }
    std::vector<std::vector<double>> kkt(static_cast<std::size_t>(d1),
                                         std::vector<double>(static_cast<std::size_t>(d1), 0.0));
    for (int i = 0; i < d1; ++i)
        for (int j = 0; j < d1; ++j) {
            double acc = 0.0;
            for (int q = 0; q < d2; ++q)
                acc += kmat[static_cast<std::size_t>(i)][static_cast<std::size_t>(q)] *
                       kmat[static_cast<std::size_t>(j)][static_cast<std::size_t>(q)];
            kkt[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = acc;
        }
    std::vector<double> eig;
    oracle_jacobi(kkt, eig);
    std::vector<double> rho;
    for (int c = 0; c < k; ++c) rho.push_back(std::sqrt(std::max(0.0, eig[static_cast<std::size_t>(c)])));
    return rho;
}

// ---- generators ----

inline exechecker::SkeletonSequence random_sequence(const exechecker::SkeletonTopology& topo,
                                                    int frames, exechecker::Rng& rng,
                                                    double span = 0.5) {
    exechecker::SkeletonSequence s;
    s.num_frames = frames;
    s.num_joints = topo.joint_count();
    s.exercise_id = "rand";
    s.subject_id = "t";
    s.fps = 30.0;
    s.frames.resize(static_cast<std::size_t>(frames) * s.num_joints * 3);
    for (auto& v : s.frames) v = rng.uniform(-span, span);
    return s;
}

// tiny chain topology for alignment tests; one joint is named "head" so the
// normalization scale is well defined
inline exechecker::SkeletonTopology chain_topology(int n) {
    exechecker::SkeletonTopology t;
    for (int i = 0; i < n; ++i) t.joint_names.push_back(i == n - 1 ? "head" : "j" + std::to_string(i));
    t.parent.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) t.parent[static_cast<std::size_t>(i)] = i == 0 ? 0 : i - 1;
    t.root = 0;
    t.mirror_axis = 0;
    t.compute_hops();
    t.validate();
    return t;
}

// ---- XML well-formedness (enough for the SVG output) ----

inline bool xml_well_formed(const std::string& s) {
    std::vector<std::string> stack;
    std::size_t i = 0;
    if (s.rfind("<?xml", 0) == 0) {
        i = s.find("?>");
        if (i == std::string::npos) return false;
        i += 2;
    }
    while (i < s.size()) {
        if (s[i] != '<') {
            ++i;
            continue;
        }
        std::size_t end = s.find('>', i);
        if (end == std::string::npos) return false;
        std::string tag = s.substr(i + 1, end - i - 1);
        if (tag.empty()) return false;
        if (tag[0] == '/') {
            std::string name = tag.substr(1);
            if (stack.empty() || stack.back() != name) return false;
            stack.pop_back();
        } else if (tag.back() == '/') {
            // self closing
        } else {
            std::string name = tag.substr(0, tag.find_first_of(" \t\n"));
            stack.push_back(name);
        }
        i = end + 1;
    }
    return stack.empty();
}

// ---- permutation test ----

// p-value for "observed mean JoA beats chance": permute each score vector
// uniformly, recompute the mean statistic, count how often the null meets or
// exceeds the observation.
inline double permutation_p_value(
    const std::vector<std::pair<std::vector<double>, std::vector<int>>>& scored,  // (normalized, annotation)
    double observed_mean, int draws, exechecker::Rng& rng) {
    int geq = 0;
    for (int d = 0; d < draws; ++d) {
        double m = 0.0;
        for (const auto& [scores, ann] : scored) {
            std::vector<int> perm(scores.size());
            for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
            rng.shuffle(perm);
            double s = 0.0;
            for (int j : ann) s += scores[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])];
            m += s / static_cast<double>(ann.size());
        }
        m /= static_cast<double>(scored.size());
        if (m >= observed_mean) ++geq;
    }
    return (1.0 + geq) / (1.0 + draws);
}

}  // namespace testutil
