#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "exechecker/dataset.hpp"
#include "exechecker/errors.hpp"
#include "exechecker/rng.hpp"
#include "exechecker/stgat.hpp"
#include "exechecker/tensor.hpp"

namespace exechecker {

// ---- triplet composition ----

// Indices into the correct/incorrect sequence lists of one exercise.
struct Triplet {
    int anchor = 0;    // index into the correct list
    int positive = 0;  // index into the correct list, > anchor
    int negative = 0;  // index into the incorrect list
};

// All C(n,2) unordered correct pairs crossed with every incorrect sequence,
// in lexicographic (anchor, positive, negative) order.
inline std::vector<Triplet> compose_triplets(int n_correct, int n_incorrect) {
    if (n_correct < 2 || n_incorrect < 1)
        throw InsufficientDataError("compose_triplets: need >= 2 correct and >= 1 incorrect");
    std::vector<Triplet> out;
    out.reserve(static_cast<std::size_t>(n_correct) * (n_correct - 1) / 2 *
                static_cast<std::size_t>(n_incorrect));
    for (int a = 0; a < n_correct; ++a)
        for (int p = a + 1; p < n_correct; ++p)
            for (int n = 0; n < n_incorrect; ++n) out.push_back({a, p, n});
    return out;
}

// ---- distances ----

enum class DistanceKind { Euclidean, Cosine };

inline DistanceKind distance_from_string(const std::string& s) {
    if (s == "euclidean") return DistanceKind::Euclidean;
    if (s == "cosine") return DistanceKind::Cosine;
    throw ParseError("unknown distance: " + s);
}

inline std::string to_string(DistanceKind k) {
    return k == DistanceKind::Euclidean ? "euclidean" : "cosine";
}

inline double distance(const std::vector<double>& u, const std::vector<double>& v, DistanceKind kind) {
    if (u.size() != v.size()) throw ShapeError("distance: length mismatch");
    if (kind == DistanceKind::Euclidean) {
        double s = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            double d = u[i] - v[i];
            s += d * d;
        }
        return std::sqrt(s);
    }
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu <= 0.0 || nv <= 0.0) throw DegenerateError("cosine distance: zero vector");
    return 1.0 - dot / (std::sqrt(nu) * std::sqrt(nv));
}

// Differentiable distance between two embedding tensors (shape [E]).
inline Tensor distance_t(const Tensor& u, const Tensor& v, DistanceKind kind) {
    if (u.shape() != v.shape()) throw ShapeError("distance: shape mismatch");
    if (kind == DistanceKind::Euclidean) {
        Tensor d = sub(u, v);
        return sqrt_t(sum_all(mul(d, d)));
    }
    Tensor dot = sum_all(mul(u, v));
    Tensor nu = sqrt_t(sum_all(mul(u, u)));
    Tensor nv = sqrt_t(sum_all(mul(v, v)));
    if (nu.value() <= 0.0 || nv.value() <= 0.0)
        throw DegenerateError("cosine distance: zero vector");
    return sub(Tensor::scalar(1.0), div(dot, mul(nu, nv)));
}

// ---- losses ----

inline double margin_loss(double d_ap, double d_an, double mu) {
    return std::max(0.0, d_ap - d_an + mu);
}

// Squared softmax of the distance pair, bounded in (0,1). In float64 the
// bound is strict while |d_ap - d_an| < ~36; beyond that exp underflows past
// machine epsilon and the value rounds to an endpoint.
inline double ratio_loss(double d_ap, double d_an) {
    double m = std::max(d_ap, d_an);
    double ea = std::exp(d_ap - m);
    double en = std::exp(d_an - m);
    double r = ea / (ea + en);
    return r * r;
}

inline Tensor margin_loss_t(const Tensor& d_ap, const Tensor& d_an, double mu) {
    return relu(add_scalar(sub(d_ap, d_an), mu));
}

inline Tensor ratio_loss_t(const Tensor& d_ap, const Tensor& d_an) {
    Tensor s = softmax(concat({d_ap, d_an}), 0);  // stable: softmax subtracts the max
    Tensor r = take(s, 0);
    return mul(r, r);
}

// In-triplet hard negative mining: use the positive as the anchor when it sits
// closer to the negative. The distance to the negative that feeds the loss is
// therefore min(d(a,n), d(p,n)); ties keep the original roles.
template <typename Emb>
inline std::pair<Emb, Emb> anchor_swap(const Emb& a, const Emb& p, double d_an, double d_pn) {
    if (d_pn < d_an) return {p, a};
    return {a, p};
}

inline std::pair<std::vector<double>, std::vector<double>> anchor_swap(
    const std::vector<double>& a, const std::vector<double>& p, const std::vector<double>& n,
    DistanceKind kind) {
    return anchor_swap(a, p, distance(a, n, kind), distance(p, n, kind));
}

// ---- optimizer ----

// AdamW: decoupled weight decay is applied multiplicatively to the parameters
// before the moment-based step.
struct AdamW {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;

    struct State {
        std::vector<double> m, v;
    };
    std::vector<State> state;
    std::int64_t step_count = 0;

    void attach(const std::vector<Tensor>& params) {
        state.assign(params.size(), {});
        for (std::size_t i = 0; i < params.size(); ++i) {
            state[i].m.assign(params[i].data().size(), 0.0);
            state[i].v.assign(params[i].data().size(), 0.0);
        }
        step_count = 0;
    }

    void step(std::vector<Tensor>& params) {
        ++step_count;
        double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
        double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = params[i].data();
            const auto& g = params[i].grad();
            auto& st = state[i];
            for (std::size_t k = 0; k < p.size(); ++k) {
                p[k] *= (1.0 - lr * weight_decay);
                st.m[k] = beta1 * st.m[k] + (1.0 - beta1) * g[k];
                st.v[k] = beta2 * st.v[k] + (1.0 - beta2) * g[k] * g[k];
                double mhat = st.m[k] / bc1;
                double vhat = st.v[k] / bc2;
                p[k] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }
};

// ---- training ----

enum class LossKind { Ratio, Margin };

struct TrainConfig {
    LossKind loss = LossKind::Ratio;
    double margin = 0.2;  // used by the margin loss only
    DistanceKind dist = DistanceKind::Euclidean;
    double lr = 0.001;
    double lr_gamma = 0.9;      // applied twice per epoch (mid + end)
    int max_epochs = 10;
    int batch_size = 20;
    int triplet_cap = 0;        // per-epoch subsample of the exhaustive list; 0 = all
    int sample_len = 160;
    int crop_len = 128;
    bool bone_vectors = false;
    double weight_decay = 0.01;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const {
        return {{"loss", loss == LossKind::Ratio ? "ratio" : "margin"},
                {"margin", margin},
                {"distance", to_string(dist)},
                {"lr", lr},
                {"lr_gamma", lr_gamma},
                {"max_epochs", max_epochs},
                {"batch_size", batch_size},
                {"triplet_cap", triplet_cap},
                {"sample_len", sample_len},
                {"crop_len", crop_len},
                {"bone_vectors", bone_vectors},
                {"weight_decay", weight_decay},
                {"adamw", {{"beta1", 0.9}, {"beta2", 0.999}, {"eps", 1e-8}}},
                {"seed", seed}};
    }
};

struct BatchRecord {
    int epoch = 0;
    int batch = 0;
    double loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    std::vector<BatchRecord> history;
    double final_lr = 0.0;

    nlohmann::json to_json() const {
        auto arr = nlohmann::json::array();
        for (const auto& r : history)
            arr.push_back({{"epoch", r.epoch}, {"batch", r.batch}, {"loss", r.loss}, {"lr", r.lr}});
        return {{"batches", arr}, {"final_lr", final_lr}};
    }
};

// Trains one model on the correct/incorrect sequences of a single exercise.
// Sequences must already be normalized. Deterministic per config.seed.
inline TrainResult train(const std::vector<const SkeletonSequence*>& correct,
                         const std::vector<const SkeletonSequence*>& incorrect,
                         const SkeletonTopology& topo, const TrainConfig& cfg, StgatModel& model) {
    auto triplets = compose_triplets(static_cast<int>(correct.size()),
                                     static_cast<int>(incorrect.size()));
    Rng rng(cfg.seed ^ 0x7a3c9e1fULL);
    auto params = model.parameters();
    AdamW opt;
    opt.lr = cfg.lr;
    opt.weight_decay = cfg.weight_decay;
    opt.attach(params);

    EmbedOptions eopt;
    eopt.sample_len = cfg.sample_len;
    eopt.crop_len = cfg.crop_len;
    eopt.random = true;
    eopt.bone_vectors = cfg.bone_vectors;

    TrainResult result;
    int decays = 0;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::vector<Triplet> order = triplets;
        rng.shuffle(order);
        if (cfg.triplet_cap > 0 && static_cast<int>(order.size()) > cfg.triplet_cap)
            order.resize(static_cast<std::size_t>(cfg.triplet_cap));
        int n_batches = static_cast<int>((order.size() + cfg.batch_size - 1) / cfg.batch_size);
        int mid = (n_batches + 1) / 2;
        for (int b = 0; b < n_batches; ++b) {
            // embed each distinct sequence once per batch and share the graph
            // node across the triplets that reference it
            std::map<std::pair<int, int>, Tensor> cache;  // (label?0:1, index) -> embedding
            auto embed = [&](bool is_correct, int idx) {
                auto key = std::make_pair(is_correct ? 0 : 1, idx);
                auto it = cache.find(key);
                if (it != cache.end()) return it->second;
                const SkeletonSequence* s = is_correct ? correct[static_cast<std::size_t>(idx)]
                                                       : incorrect[static_cast<std::size_t>(idx)];
                Tensor e = embed_sequence(model, *s, topo, eopt, false, &rng).embedding;
                cache.emplace(key, e);
                return e;
            };
            std::vector<Tensor> losses;
            int lo = b * cfg.batch_size;
            int hi = std::min<int>(lo + cfg.batch_size, static_cast<int>(order.size()));
            for (int i = lo; i < hi; ++i) {
                const Triplet& tr = order[static_cast<std::size_t>(i)];
                Tensor ea = embed(true, tr.anchor);
                Tensor ep = embed(true, tr.positive);
                Tensor en = embed(false, tr.negative);
                double dan = distance(ea.data(), en.data(), cfg.dist);
                double dpn = distance(ep.data(), en.data(), cfg.dist);
                auto [sa, sp] = anchor_swap(ea, ep, dan, dpn);
                Tensor d_ap = distance_t(sa, sp, cfg.dist);
                Tensor d_an = distance_t(sa, en, cfg.dist);
                losses.push_back(cfg.loss == LossKind::Ratio
                                     ? ratio_loss_t(d_ap, d_an)
                                     : margin_loss_t(d_ap, d_an, cfg.margin));
            }
            Tensor batch_loss = mean(concat(losses), 0);
            model.zero_grad();
            backward(batch_loss);
            opt.step(params);
            result.history.push_back({epoch, b, batch_loss.value(), opt.lr});
            if (b + 1 == mid) opt.lr = cfg.lr * std::pow(cfg.lr_gamma, ++decays);
        }
        opt.lr = cfg.lr * std::pow(cfg.lr_gamma, ++decays);
    }
    result.final_lr = opt.lr;
    return result;
}

}  // namespace exechecker
