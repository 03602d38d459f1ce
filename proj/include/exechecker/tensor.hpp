#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "exechecker/errors.hpp"
#include "exechecker/rng.hpp"

namespace exechecker {

// Dense float64 tensor with reverse-mode autodiff. Row-major storage.
//
// Gradient semantics: backward() propagates through transient buffers and
// adds the result into .grad of every requires_grad tensor, so running
// backward twice on the same graph accumulates exactly twice the gradient.

class Tensor;
void backward(const Tensor& loss);

namespace detail {

struct TensorImpl;

struct BackCtx {
    std::unordered_map<const TensorImpl*, std::vector<double>> bufs;
    std::vector<double>& at(const TensorImpl* t);
};

using BackFn = std::function<void(BackCtx&)>;

struct TensorImpl {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // allocated on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorImpl>> parents;
    BackFn backfn;

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (int d : shape) n *= d;
        return n;
    }
    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
    }
};

inline std::vector<double>& BackCtx::at(const TensorImpl* t) {
    auto it = bufs.find(t);
    if (it == bufs.end()) it = bufs.emplace(t, std::vector<double>(t->data.size(), 0.0)).first;
    return it->second;
}

inline std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

}  // namespace detail

class Tensor {
public:
    Tensor() = default;

    static Tensor from(std::vector<int> shape, std::vector<double> data, bool requires_grad = false) {
        std::int64_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw ShapeError("tensor dims must be positive");
            n *= d;
        }
        if (n != static_cast<std::int64_t>(data.size()))
            throw ShapeError("data length does not match shape " + detail::shape_str(shape));
        Tensor t;
        t.impl_ = std::make_shared<detail::TensorImpl>();
        t.impl_->shape = std::move(shape);
        t.impl_->data = std::move(data);
        t.impl_->requires_grad = requires_grad;
        return t;
    }

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
        std::int64_t n = 1;
        for (int d : shape) n *= d;
        return from(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0), requires_grad);
    }

    static Tensor full(std::vector<int> shape, double v, bool requires_grad = false) {
        std::int64_t n = 1;
        for (int d : shape) n *= d;
        return from(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), v), requires_grad);
    }

    static Tensor scalar(double v, bool requires_grad = false) {
        return from({1}, {v}, requires_grad);
    }

    static Tensor uniform(std::vector<int> shape, Rng& rng, double lo, double hi, bool requires_grad = false) {
        std::int64_t n = 1;
        for (int d : shape) n *= d;
        std::vector<double> d(static_cast<std::size_t>(n));
        for (auto& x : d) x = rng.uniform(lo, hi);
        return from(std::move(shape), std::move(d), requires_grad);
    }

    // Glorot-uniform initialization for a fan_in x fan_out weight matrix.
    static Tensor glorot(int fan_in, int fan_out, Rng& rng) {
        double b = std::sqrt(6.0 / (fan_in + fan_out));
        return uniform({fan_in, fan_out}, rng, -b, b, true);
    }

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const { return impl_->shape; }
    int dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }
    std::int64_t numel() const { return impl_->numel(); }
    bool requires_grad() const { return impl_->requires_grad; }

    std::vector<double>& data() { return impl_->data; }
    const std::vector<double>& data() const { return impl_->data; }
    std::vector<double>& grad() { impl_->ensure_grad(); return impl_->grad; }
    const std::vector<double>& grad() const { impl_->ensure_grad(); return impl_->grad; }
    void zero_grad() { impl_->grad.assign(impl_->data.size(), 0.0); }

    double value() const {
        if (numel() != 1) throw ShapeError("value() requires a single-element tensor");
        return impl_->data[0];
    }

    detail::TensorImpl* impl() const { return impl_.get(); }
    std::shared_ptr<detail::TensorImpl> impl_ptr() const { return impl_; }

    static Tensor wrap(std::shared_ptr<detail::TensorImpl> p) {
        Tensor t;
        t.impl_ = std::move(p);
        return t;
    }

private:
    std::shared_ptr<detail::TensorImpl> impl_;
};

namespace detail {

inline Tensor make_op(std::vector<int> shape, std::vector<double> data,
                      std::vector<Tensor> parents, BackFn fn) {
    bool rg = false;
    for (const auto& p : parents) rg = rg || p.requires_grad();
    Tensor out = Tensor::from(std::move(shape), std::move(data));
    if (rg) {
        out.impl()->requires_grad = true;
        for (const auto& p : parents) out.impl()->parents.push_back(p.impl_ptr());
        out.impl()->backfn = std::move(fn);
    }
    return out;
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

}  // namespace detail

// ---- elementwise ----

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "add");
    std::vector<double> d(a.data());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += b.data()[i];
    auto* ai = a.impl(); auto* bi = b.impl();
    Tensor out = detail::make_op(a.shape(), std::move(d), {a, b}, detail::BackFn{});
    if (out.requires_grad()) {
        auto* oi = out.impl();
        oi->backfn = [ai, bi, oi](detail::BackCtx& ctx) {
            const auto& g = ctx.at(oi);
            if (ai->requires_grad) { auto& ga = ctx.at(ai); for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i]; }
            if (bi->requires_grad) { auto& gb = ctx.at(bi); for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i]; }
        };
    }
    return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "sub");
    std::vector<double> d(a.data());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= b.data()[i];
    auto* ai = a.impl(); auto* bi = b.impl();
    Tensor out = detail::make_op(a.shape(), std::move(d), {a, b}, detail::BackFn{});
    if (out.requires_grad()) {
        auto* oi = out.impl();
        oi->backfn = [ai, bi, oi](detail::BackCtx& ctx) {
            const auto& g = ctx.at(oi);
            if (ai->requires_grad) { auto& ga = ctx.at(ai); for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i]; }
            if (bi->requires_grad) { auto& gb = ctx.at(bi); for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i]; }
        };
    }
    return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "mul");
    std::vector<double> d(a.data());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= b.data()[i];
    auto* ai = a.impl(); auto* bi = b.impl();
    Tensor out = detail::make_op(a.shape(), std::move(d), {a, b}, detail::BackFn{});
    if (out.requires_grad()) {
        auto* oi = out.impl();
        oi->backfn = [ai, bi, oi](detail::BackCtx& ctx) {
            const auto& g = ctx.at(oi);
            if (ai->requires_grad) { auto& ga = ctx.at(ai); for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bi->data[i]; }
            if (bi->requires_grad) { auto& gb = ctx.at(bi); for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ai->data[i]; }
        };
    }
    return out;
}

inline Tensor div(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "div");
    std::vector<double> d(a.data());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] /= b.data()[i];
    auto* ai = a.impl(); auto* bi = b.impl();
    Tensor out = detail::make_op(a.shape(), std::move(d), {a, b}, detail::BackFn{});
    if (out.requires_grad()) {
        auto* oi = out.impl();
        oi->backfn = [ai, bi, oi](detail::BackCtx& ctx) {
            const auto& g = ctx.at(oi);
            if (ai->requires_grad) {
                auto& ga = ctx.at(ai);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / bi->data[i];
            }
            if (bi->requires_grad) {
                auto& gb = ctx.at(bi);
                for (std::size_t i = 0; i < g.size(); ++i)
                    gb[i] -= g[i] * ai->data[i] / (bi->data[i] * bi->data[i]);
            }
        };
    }
    return out;
}

inline Tensor scale(const Tensor& a, double k) {
    std::vector<double> d(a.data());
    for (auto& x : d) x *= k;
    auto* ai = a.impl();
    Tensor out = detail::make_op(a.shape(), std::move(d), {a}, detail::BackFn{});
    if (out.requires_grad()) {
        auto* oi = out.impl();
        oi->backfn = [ai, oi, k](detail::BackCtx& ctx) {
            const auto& g = ctx.at(oi);
            auto& ga = ctx.at(ai);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * k;
        };
    }
    return out;
}

inline Tensor add_scalar(const Tensor& a, double k) {
    std::vector<double> d(a.data());
    for (auto& x : d) x += k;
    auto* ai = a.impl();
    Tensor out = detail::make_op(a.shape(), std::move(d), {a}, detail::BackFn{});
    if (out.requires_grad()) {
        auto* oi = out.impl();
        oi->backfn = [ai, oi](detail::BackCtx& ctx) {
            const auto& g = ctx.at(oi);
            auto& ga = ctx.at(ai);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        };
    }
    return out;
}

inline Tensor relu(const Tensor& a) {
    std::vector<double> d(a.data());
    for (auto& x : d) x = x > 0.0 ? x : 0.0;
    auto* ai = a.impl();
    Tensor out = detail::make_op(a.shape(), std::move(d), {a}, detail::BackFn{});
    if (out.requires_grad()) {
        auto* oi = out.impl();
        oi->backfn = [ai, oi](detail::BackCtx& ctx) {
            const auto& g = ctx.at(oi);
            auto& ga = ctx.at(ai);
            for (std::size_t i = 0; i < g.size(); ++i)
                if (ai->data[i] > 0.0) ga[i] += g[i];
        };
    }
    return out;
}

inline Tensor sqrt_t(const Tensor& a) {
    std::vector<double> d(a.data());
    for (auto& x : d) x = std::sqrt(x);
    auto* ai = a.impl();
    Tensor out = detail::make_op(a.shape(), std::move(d), {a}, detail::BackFn{});
    if (out.requires_grad()) {
        auto* oi = out.impl();
        oi->backfn = [ai, oi](detail::BackCtx& ctx) {
            const auto& g = ctx.at(oi);
            auto& ga = ctx.at(ai);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * 0.5 / oi->data[i];
        };
    }
    return out;
}

// ---- matrix products ----

namespace detail {
// C[M x N] += A[M x K] * B[K x N]
inline void mm_acc(const double* A, const double* B, double* C, int M, int K, int N) {
    for (int i = 0; i < M; ++i) {
        const double* a = A + static_cast<std::ptrdiff_t>(i) * K;
        double* c = C + static_cast<std::ptrdiff_t>(i) * N;
        for (int k = 0; k < K; ++k) {
            double av = a[k];
            if (av == 0.0) continue;
            const double* b = B + static_cast<std::ptrdiff_t>(k) * N;
            for (int j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}
// C[M x N] += A[M x K] * B^T where B is [N x K]
inline void mm_nt_acc(const double* A, const double* B, double* C, int M, int K, int N) {
    for (int i = 0; i < M; ++i) {
        const double* a = A + static_cast<std::ptrdiff_t>(i) * K;
        double* c = C + static_cast<std::ptrdiff_t>(i) * N;
        for (int j = 0; j < N; ++j) {
            const double* b = B + static_cast<std::ptrdiff_t>(j) * K;
            double s = 0.0;
            for (int k = 0; k < K; ++k) s += a[k] * b[k];
            c[j] += s;
        }
    }
}
// C[M x N] += A^T * B where A is [K x M], B is [K x N]
inline void mm_tn_acc(const double* A, const double* B, double* C, int M, int K, int N) {
    for (int k = 0; k < K; ++k) {
        const double* a = A + static_cast<std::ptrdiff_t>(k) * M;
        const double* b = B + static_cast<std::ptrdiff_t>(k) * N;
        for (int i = 0; i < M; ++i) {
            double av = a[i];
            if (av == 0.0) continue;
            double* c = C + static_cast<std::ptrdiff_t>(i) * N;
            for (int j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}
}  // namespace detail

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("matmul: incompatible shapes " + detail::shape_str(a.shape()) + " x " +
                         detail::shape_str(b.shape()));
    int M = a.dim(0), K = a.dim(1), N = b.dim(1);
    std::vector<double> d(static_cast<std::size_t>(M) * N, 0.0);
    detail::mm_acc(a.data().data(), b.data().data(), d.data(), M, K, N);
    auto* ai = a.impl(); auto* bi = b.impl();
    Tensor out = detail::make_op({M, N}, std::move(d), {a, b}, detail::BackFn{});
    if (out.requires_grad()) {
        auto* oi = out.impl();
        oi->backfn = [ai, bi, oi, M, K, N](detail::BackCtx& ctx) {
            const auto& g = ctx.at(oi);
            if (ai->requires_grad)
                detail::mm_nt_acc(g.data(), bi->data.data(), ctx.at(ai).data(), M, N, K);
            if (bi->requires_grad)
                detail::mm_tn_acc(ai->data.data(), g.data(), ctx.at(bi).data(), K, M, N);
        };
    }
    return out;
}

// a [M x K] times b^T where b is [N x K]
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
        throw ShapeError("matmul_nt: incompatible shapes");
    int M = a.dim(0), K = a.dim(1), N = b.dim(0);
    std::vector<double> d(static_cast<std::size_t>(M) * N, 0.0);
    detail::mm_nt_acc(a.data().data(), b.data().data(), d.data(), M, K, N);
    auto* ai = a.impl(); auto* bi = b.impl();
    Tensor out = detail::make_op({M, N}, std::move(d), {a, b}, detail::BackFn{});
    if (out.requires_grad()) {
        auto* oi = out.impl();
        oi->backfn = [ai, bi, oi, M, K, N](detail::BackCtx& ctx) {
            const auto& g = ctx.at(oi);
            if (ai->requires_grad)
                detail::mm_acc(g.data(), bi->data.data(), ctx.at(ai).data(), M, N, K);
            if (bi->requires_grad)
                detail::mm_tn_acc(g.data(), ai->data.data(), ctx.at(bi).data(), N, M, K);
        };
    }
    return out;
}

// batched matmul: a [B x M x K] times b [B x K x N]
inline Tensor bmm(const Tensor& a, const Tensor& b) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1))
        throw ShapeError("bmm: incompatible shapes");
    int B = a.dim(0), M = a.dim(1), K = a.dim(2), N = b.dim(2);
    std::vector<double> d(static_cast<std::size_t>(B) * M * N, 0.0);
    for (int s = 0; s < B; ++s)
        detail::mm_acc(a.data().data() + static_cast<std::ptrdiff_t>(s) * M * K,
                       b.data().data() + static_cast<std::ptrdiff_t>(s) * K * N,
                       d.data() + static_cast<std::ptrdiff_t>(s) * M * N, M, K, N);
    auto* ai = a.impl(); auto* bi = b.impl();
    Tensor out = detail::make_op({B, M, N}, std::move(d), {a, b}, detail::BackFn{});
    if (out.requires_grad()) {
        auto* oi = out.impl();
        oi->backfn = [ai, bi, oi, B, M, K, N](detail::BackCtx& ctx) {
            const auto& g = ctx.at(oi);
            for (int s = 0; s < B; ++s) {
                const double* gs = g.data() + static_cast<std::ptrdiff_t>(s) * M * N;
                if (ai->requires_grad)
                    detail::mm_nt_acc(gs, bi->data.data() + static_cast<std::ptrdiff_t>(s) * K * N,
                                      ctx.at(ai).data() + static_cast<std::ptrdiff_t>(s) * M * K, M, N, K);
                if (bi->requires_grad)
                    detail::mm_tn_acc(ai->data.data() + static_cast<std::ptrdiff_t>(s) * M * K, gs,
                                      ctx.at(bi).data() + static_cast<std::ptrdiff_t>(s) * K * N, K, M, N);
            }
        };
    }
    return out;
}

// batched matmul with transposed right operand: a [B x M x K] times b^T, b [B x N x K]
inline Tensor bmm_nt(const Tensor& a, const Tensor& b) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2))
        throw ShapeError("bmm_nt: incompatible shapes");
    int B = a.dim(0), M = a.dim(1), K = a.dim(2), N = b.dim(1);
    std::vector<double> d(static_cast<std::size_t>(B) * M * N, 0.0);
    for (int s = 0; s < B; ++s)
        detail::mm_nt_acc(a.data().data() + static_cast<std::ptrdiff_t>(s) * M * K,
                          b.data().data() + static_cast<std::ptrdiff_t>(s) * N * K,
                          d.data() + static_cast<std::ptrdiff_t>(s) * M * N, M, K, N);
    auto* ai = a.impl(); auto* bi = b.impl();
    Tensor out = detail::make_op({B, M, N}, std::move(d), {a, b}, detail::BackFn{});
    if (out.requires_grad()) {
        auto* oi = out.impl();
        oi->backfn = [ai, bi, oi, B, M, K, N](detail::BackCtx& ctx) {
            const auto& g = ctx.at(oi);
            for (int s = 0; s < B; ++s) {
                const double* gs = g.data() + static_cast<std::ptrdiff_t>(s) * M * N;
                if (ai->requires_grad)
                    detail::mm_acc(gs, bi->data.data() + static_cast<std::ptrdiff_t>(s) * N * K,
                                   ctx.at(ai).data() + static_cast<std::ptrdiff_t>(s) * M * K, M, N, K);
                if (bi->requires_grad)
                    detail::mm_tn_acc(gs, ai->data.data() + static_cast<std::ptrdiff_t>(s) * M * K,
                                      ctx.at(bi).data() + static_cast<std::ptrdiff_t>(s) * N * K, N, M, K);
            }
        };
    }
    return out;
}

// ---- structure ----

inline Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose: rank-2 tensor required");
    int M = a.dim(0), N = a.dim(1);
    std::vector<double> d(static_cast<std::size_t>(M) * N);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) d[static_cast<std::size_t>(j) * M + i] = a.data()[static_cast<std::size_t>(i) * N + j];
    auto* ai = a.impl();
    Tensor out = detail::make_op({N, M}, std::move(d), {a}, detail::BackFn{});
    if (out.requires_grad()) {
        auto* oi = out.impl();
        oi->backfn = [ai, oi, M, N](detail::BackCtx& ctx) {
            const auto& g = ctx.at(oi);
            auto& ga = ctx.at(ai);
            for (int j = 0; j < N; ++j)
                for (int i = 0; i < M; ++i)
                    ga[static_cast<std::size_t>(i) * N + j] += g[static_cast<std::size_t>(j) * M + i];
        };
    }
    return out;
}

inline Tensor reshape(const Tensor& a, std::vector<int> shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    if (n != a.numel()) throw ShapeError("reshape: element count mismatch");
    auto* ai = a.impl();
    Tensor out = detail::make_op(std::move(shape), a.data(), {a}, detail::BackFn{});
    if (out.requires_grad()) {
        auto* oi = out.impl();
        oi->backfn = [ai, oi](detail::BackCtx& ctx) {
            const auto& g = ctx.at(oi);
            auto& ga = ctx.at(ai);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        };
    }
    return out;
}

// concatenation along axis 0; all inputs share trailing dims
inline Tensor concat(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    std::vector<int> tail(parts[0].shape().begin() + 1, parts[0].shape().end());
    int rows = 0;
    std::int64_t rowlen = 1;
    for (int d : tail) rowlen *= d;
    if (parts[0].rank() == 1) rowlen = 1;
    for (const auto& p : parts) {
        std::vector<int> ptail(p.shape().begin() + 1, p.shape().end());
        if (ptail != tail) throw ShapeError("concat: trailing dims differ");
        rows += p.dim(0);
    }
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(rowlen));
    for (const auto& p : parts) d.insert(d.end(), p.data().begin(), p.data().end());
    std::vector<int> oshape{rows};
    oshape.insert(oshape.end(), tail.begin(), tail.end());

    std::vector<detail::TensorImpl*> impls;
    for (const auto& p : parts) impls.push_back(p.impl());
    Tensor out = detail::make_op(std::move(oshape), std::move(d), parts, detail::BackFn{});
    if (out.requires_grad()) {
        auto* oi = out.impl();
        oi->backfn = [impls, oi](detail::BackCtx& ctx) {
            const auto& g = ctx.at(oi);
            std::size_t off = 0;
            for (auto* pi : impls) {
                std::size_t n = pi->data.size();
                if (pi->requires_grad) {
                    auto& gp = ctx.at(pi);
                    for (std::size_t i = 0; i < n; ++i) gp[i] += g[off + i];
                }
                off += n;
            }
        };
    }
    return out;
}

// select rows of a rank-2 tensor (repeats allowed); backward scatter-adds
inline Tensor gather_rows(const Tensor& a, std::vector<int> idx) {
    if (a.rank() != 2) throw ShapeError("gather_rows: rank-2 tensor required");
    int R = a.dim(0), C = a.dim(1);
    for (int i : idx)
        if (i < 0 || i >= R) throw ShapeError("gather_rows: row index out of range");
    std::vector<double> d(idx.size() * static_cast<std::size_t>(C));
    for (std::size_t r = 0; r < idx.size(); ++r)
        for (int c = 0; c < C; ++c)
            d[r * C + c] = a.data()[static_cast<std::size_t>(idx[r]) * C + c];
    auto* ai = a.impl();
    int M = static_cast<int>(idx.size());
    Tensor out = detail::make_op({M, C}, std::move(d), {a}, detail::BackFn{});
    if (out.requires_grad()) {
        auto* oi = out.impl();
        auto ix = std::make_shared<std::vector<int>>(std::move(idx));
        oi->backfn = [ai, oi, ix, C](detail::BackCtx& ctx) {
            const auto& g = ctx.at(oi);
            auto& ga = ctx.at(ai);
            for (std::size_t r = 0; r < ix->size(); ++r)
                for (int c = 0; c < C; ++c)
                    ga[static_cast<std::size_t>((*ix)[r]) * C + c] += g[r * C + c];
        };
    }
    return out;
}

// single element of a rank-1 tensor as a [1] tensor
inline Tensor take(const Tensor& a, int i) {
    if (a.rank() != 1) throw ShapeError("take: rank-1 tensor required");
    if (i < 0 || i >= a.dim(0)) throw ShapeError("take: index out of range");
    auto* ai = a.impl();
    Tensor out = detail::make_op({1}, {a.data()[static_cast<std::size_t>(i)]}, {a}, detail::BackFn{});
    if (out.requires_grad()) {
        auto* oi = out.impl();
        oi->backfn = [ai, oi, i](detail::BackCtx& ctx) {
            ctx.at(ai)[static_cast<std::size_t>(i)] += ctx.at(oi)[0];
        };
    }
    return out;
}

// ---- reductions & normalization ----

namespace detail {
inline void axis_extents(const std::vector<int>& shape, int axis, std::int64_t& outer,
                         std::int64_t& n, std::int64_t& inner) {
    if (axis < 0 || axis >= static_cast<int>(shape.size()))
        throw ShapeError("axis out of range");
    outer = 1; inner = 1;
    for (int i = 0; i < axis; ++i) outer *= shape[static_cast<std::size_t>(i)];
    n = shape[static_cast<std::size_t>(axis)];
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) inner *= shape[i];
}
}  // namespace detail

// mean over one axis; the axis is removed (a [n] tensor reduces to [1])
inline Tensor mean(const Tensor& a, int axis) {
    std::int64_t outer, n, inner;
    detail::axis_extents(a.shape(), axis, outer, n, inner);
    std::vector<int> oshape;
    for (int i = 0; i < a.rank(); ++i)
        if (i != axis) oshape.push_back(a.dim(i));
    if (oshape.empty()) oshape.push_back(1);
    std::vector<double> d(static_cast<std::size_t>(outer * inner), 0.0);
    const auto& src = a.data();
    for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t k = 0; k < n; ++k)
            for (std::int64_t i = 0; i < inner; ++i)
                d[static_cast<std::size_t>(o * inner + i)] += src[static_cast<std::size_t>((o * n + k) * inner + i)];
    for (auto& x : d) x /= static_cast<double>(n);
    auto* ai = a.impl();
    Tensor out = detail::make_op(std::move(oshape), std::move(d), {a}, detail::BackFn{});
    if (out.requires_grad()) {
        auto* oi = out.impl();
        oi->backfn = [ai, oi, outer, n, inner](detail::BackCtx& ctx) {
            const auto& g = ctx.at(oi);
            auto& ga = ctx.at(ai);
            double inv = 1.0 / static_cast<double>(n);
            for (std::int64_t o = 0; o < outer; ++o)
                for (std::int64_t k = 0; k < n; ++k)
                    for (std::int64_t i = 0; i < inner; ++i)
                        ga[static_cast<std::size_t>((o * n + k) * inner + i)] += g[static_cast<std::size_t>(o * inner + i)] * inv;
        };
    }
    return out;
}

inline Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (double x : a.data()) s += x;
    auto* ai = a.impl();
    Tensor out = detail::make_op({1}, {s}, {a}, detail::BackFn{});
    if (out.requires_grad()) {
        auto* oi = out.impl();
        oi->backfn = [ai, oi](detail::BackCtx& ctx) {
            double g = ctx.at(oi)[0];
            auto& ga = ctx.at(ai);
            for (auto& x : ga) x += g;
        };
    }
    return out;
}

inline Tensor mean_all(const Tensor& a) {
    return scale(sum_all(a), 1.0 / static_cast<double>(a.numel()));
}

// softmax along one axis, computed with max subtraction
inline Tensor softmax(const Tensor& a, int axis) {
    std::int64_t outer, n, inner;
    detail::axis_extents(a.shape(), axis, outer, n, inner);
    std::vector<double> d(a.data().size());
    const auto& src = a.data();
    for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t i = 0; i < inner; ++i) {
            double m = -1e308;
            for (std::int64_t k = 0; k < n; ++k)
                m = std::max(m, src[static_cast<std::size_t>((o * n + k) * inner + i)]);
            double z = 0.0;
            for (std::int64_t k = 0; k < n; ++k) {
                double e = std::exp(src[static_cast<std::size_t>((o * n + k) * inner + i)] - m);
                d[static_cast<std::size_t>((o * n + k) * inner + i)] = e;
                z += e;
            }
            for (std::int64_t k = 0; k < n; ++k)
                d[static_cast<std::size_t>((o * n + k) * inner + i)] /= z;
        }
    }
    auto* ai = a.impl();
    Tensor out = detail::make_op(a.shape(), std::move(d), {a}, detail::BackFn{});
    if (out.requires_grad()) {
        auto* oi = out.impl();
        oi->backfn = [ai, oi, outer, n, inner](detail::BackCtx& ctx) {
            const auto& g = ctx.at(oi);
            auto& ga = ctx.at(ai);
            const auto& y = oi->data;
            for (std::int64_t o = 0; o < outer; ++o) {
                for (std::int64_t i = 0; i < inner; ++i) {
                    double dot = 0.0;
                    for (std::int64_t k = 0; k < n; ++k) {
                        std::size_t ix = static_cast<std::size_t>((o * n + k) * inner + i);
                        dot += g[ix] * y[ix];
                    }
                    for (std::int64_t k = 0; k < n; ++k) {
                        std::size_t ix = static_cast<std::size_t>((o * n + k) * inner + i);
                        ga[ix] += y[ix] * (g[ix] - dot);
                    }
                }
            }
        };
    }
    return out;
}

// ---- backward ----

inline void backward(const Tensor& loss) {
    if (loss.numel() != 1) throw GraphError("backward: loss must be a scalar");
    // depth-first postorder over the recorded graph
    std::vector<detail::TensorImpl*> order;
    std::unordered_set<detail::TensorImpl*> seen;
    std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack;
    stack.emplace_back(loss.impl(), 0);
    seen.insert(loss.impl());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            detail::TensorImpl* p = node->parents[next++].get();
            if (seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    detail::BackCtx ctx;
    ctx.at(loss.impl())[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backfn) (*it)->backfn(ctx);
    for (auto* node : order) {
        if (!node->requires_grad) continue;
        auto found = ctx.bufs.find(node);
        if (found == ctx.bufs.end()) continue;
        node->ensure_grad();
        const auto& t = found->second;
        for (std::size_t i = 0; i < t.size(); ++i) node->grad[i] += t[i];
    }
}

}  // namespace exechecker
