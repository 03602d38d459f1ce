#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "exechecker/errors.hpp"
#include "exechecker/rng.hpp"
#include "exechecker/sequence.hpp"
#include "exechecker/tensor.hpp"

namespace exechecker {

// Spatial-temporal graph attention feature extractor. Every joint of the
// center frame attends to all joints of the tau neighboring frames (edge
// padded), heads are averaged rather than concatenated, and each block adds a
// residual path. Global mean pooling plus a linear projection produce the
// sequence embedding.
struct StgatConfig {
    int tau = 3;
    int heads = 8;
    int blocks = 3;
    std::vector<int> channels = {32, 64, 128};
    int embed_dim = 128;

    void validate() const {
        if (tau <= 0 || tau % 2 == 0) throw ShapeError("stgat: tau must be odd and positive");
        if (heads <= 0 || blocks <= 0 || embed_dim <= 0) throw ShapeError("stgat: bad config");
        if (static_cast<int>(channels.size()) != blocks)
            throw ShapeError("stgat: channels list must have one entry per block");
        for (int c : channels)
            if (c <= 0 || c % heads != 0)
                throw ShapeError("stgat: block channels must be positive multiples of heads");
    }
};

inline nlohmann::json config_to_json(const StgatConfig& c) {
    return {{"tau", c.tau}, {"heads", c.heads}, {"blocks", c.blocks},
            {"channels", c.channels}, {"embed_dim", c.embed_dim}, {"activation", "relu"}};
}

inline StgatConfig config_from_json(const nlohmann::json& j) {
    StgatConfig c;
    c.tau = j.value("tau", c.tau);
    c.heads = j.value("heads", c.heads);
    c.blocks = j.value("blocks", c.blocks);
    if (j.contains("channels")) c.channels = j.at("channels").get<std::vector<int>>();
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.validate();
    return c;
}

// Post-softmax cross-spacetime attention, per block and frame.
// Layout per frame: [head][temporal slot][attending joint][attended joint];
// for each (head, attending joint) the weights over the tau*N attended slots
// sum to one.
struct AttentionMaps {
    int tau = 0;
    int heads = 0;
    int joints = 0;
    // maps[block][frame] has heads*tau*joints*joints entries
    std::vector<std::vector<std::vector<double>>> maps;

    double at(int block, int frame, int head, int slot, int q, int j) const {
        const auto& m = maps[static_cast<std::size_t>(block)][static_cast<std::size_t>(frame)];
        return m[static_cast<std::size_t>((((head * tau) + slot) * joints + q)) * joints + j];
    }
};

using Embedding = std::vector<double>;

struct HeadWeights {
    Tensor wq, wk, wv;
};

struct BlockWeights {
    int c_in = 0, c_out = 0, head_dim = 0;
    std::vector<HeadWeights> heads;
    Tensor wres;  // defined only when c_in != c_out
};

struct StgatModel {
    StgatConfig config;
    int input_channels = 3;
    std::vector<BlockWeights> blocks;
    Tensor w_embed;

    static StgatModel init(const StgatConfig& cfg, Rng& rng, int input_channels = 3) {
        cfg.validate();
        StgatModel m;
        m.config = cfg;
        m.input_channels = input_channels;
        int c_in = input_channels;
        for (int b = 0; b < cfg.blocks; ++b) {
            BlockWeights bw;
            bw.c_in = c_in;
            bw.c_out = cfg.channels[static_cast<std::size_t>(b)];
            bw.head_dim = bw.c_out / cfg.heads;
            for (int h = 0; h < cfg.heads; ++h) {
                HeadWeights hw;
                hw.wq = Tensor::glorot(c_in, bw.head_dim, rng);
                hw.wk = Tensor::glorot(c_in, bw.head_dim, rng);
                hw.wv = Tensor::glorot(c_in, bw.c_out, rng);
                bw.heads.push_back(std::move(hw));
            }
            if (bw.c_in != bw.c_out) bw.wres = Tensor::glorot(c_in, bw.c_out, rng);
            c_in = bw.c_out;
            m.blocks.push_back(std::move(bw));
        }
        m.w_embed = Tensor::glorot(c_in, cfg.embed_dim, rng);
        return m;
    }

    std::vector<std::pair<std::string, Tensor>> named_parameters() const {
        std::vector<std::pair<std::string, Tensor>> out;
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            const auto& bw = blocks[b];
            for (std::size_t h = 0; h < bw.heads.size(); ++h) {
                std::string p = "block" + std::to_string(b) + ".h" + std::to_string(h) + ".";
                out.emplace_back(p + "wq", bw.heads[h].wq);
                out.emplace_back(p + "wk", bw.heads[h].wk);
                out.emplace_back(p + "wv", bw.heads[h].wv);
            }
            if (bw.wres.defined())
                out.emplace_back("block" + std::to_string(b) + ".res", bw.wres);
        }
        out.emplace_back("embed.w", w_embed);
        return out;
    }

    std::vector<Tensor> parameters() const {
        std::vector<Tensor> out;
        for (auto& [n, t] : named_parameters()) out.push_back(t);
        return out;
    }

    void zero_grad() {
        for (auto& t : parameters()) t.zero_grad();
    }
};

// ---- model input ----

inline Tensor make_input_tensor(const SkeletonSequence& seq, bool requires_grad = false) {
    return Tensor::from({seq.num_frames, seq.num_joints, 3}, seq.frames, requires_grad);
}

// ---- windows & attention ----

// tau frames centered at t, boundary frames replicated; output is tau x N x C.
inline Tensor build_window(const Tensor& seq_features, int t, int tau) {
    if (seq_features.rank() != 3) throw ShapeError("build_window: T x N x C tensor required");
    int T = seq_features.dim(0), N = seq_features.dim(1), C = seq_features.dim(2);
    if (t < 0 || t >= T) throw ShapeError("build_window: frame index out of range");
    int half = tau / 2;
    std::vector<int> rows;
    rows.reserve(static_cast<std::size_t>(tau) * N);
    for (int k = -half; k <= half; ++k) {
        int src = t + k;
        if (src < 0) src = 0;
        if (src >= T) src = T - 1;
        for (int j = 0; j < N; ++j) rows.push_back(src * N + j);
    }
    Tensor flat = reshape(seq_features, {T * N, C});
    return reshape(gather_rows(flat, std::move(rows)), {tau, N, C});
}

namespace detail_stgat {

// Reorders one head's post-softmax rows (N x tau*N) into the
// [head][slot][q][j] map layout.
inline void copy_head_maps(const std::vector<double>& p, int T, int N, int tau, int head, int heads,
                           std::vector<std::vector<double>>& frame_maps) {
    for (int t = 0; t < T; ++t) {
        auto& dst = frame_maps[static_cast<std::size_t>(t)];
        if (dst.empty()) dst.assign(static_cast<std::size_t>(heads) * tau * N * N, 0.0);
        for (int q = 0; q < N; ++q)
            for (int k = 0; k < tau; ++k)
                for (int j = 0; j < N; ++j)
                    dst[static_cast<std::size_t>((((head * tau) + k) * N + q)) * N + j] =
                        p[static_cast<std::size_t>((t * N + q) * (tau * N) + k * N + j)];
    }
}

}  // namespace detail_stgat

// One attention block applied to a single window (reference path; the batched
// forward() below computes the same values for all frames at once).
// Returns the center-frame output N x C_out and the window's attention maps
// laid out as [head][slot][q][j].
inline std::pair<Tensor, std::vector<double>> attention_layer(const Tensor& window,
                                                              const BlockWeights& bw, int heads) {
    if (window.rank() != 3) throw ShapeError("attention_layer: tau x N x C window required");
    int tau = window.dim(0), N = window.dim(1), C = window.dim(2);
    if (C != bw.c_in) throw ShapeError("attention_layer: channel mismatch");
    Tensor flat = reshape(window, {tau * N, C});
    std::vector<int> center_rows;
    for (int j = 0; j < N; ++j) center_rows.push_back((tau / 2) * N + j);
    Tensor xc = gather_rows(flat, center_rows);

    Tensor acc;
    std::vector<double> maps(static_cast<std::size_t>(heads) * tau * N * N);
    double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(bw.head_dim));
    for (int h = 0; h < heads; ++h) {
        const auto& hw = bw.heads[static_cast<std::size_t>(h)];
        Tensor q = matmul(xc, hw.wq);                       // N x d
        Tensor k = matmul(flat, hw.wk);                     // tau*N x d
        Tensor v = matmul(flat, hw.wv);                     // tau*N x c_out
        Tensor p = softmax(scale(matmul_nt(q, k), inv_sqrt_d), 1);  // N x tau*N
        for (int qi = 0; qi < N; ++qi)
            for (int s = 0; s < tau; ++s)
                for (int j = 0; j < N; ++j)
                    maps[static_cast<std::size_t>((((h * tau) + s) * N + qi)) * N + j] =
                        p.data()[static_cast<std::size_t>(qi * (tau * N) + s * N + j)];
        Tensor o = matmul(p, v);                            // N x c_out
        acc = acc.defined() ? add(acc, o) : o;
    }
    Tensor y = relu(scale(acc, 1.0 / heads));
    Tensor res = bw.wres.defined() ? matmul(xc, bw.wres) : xc;
    return {add(y, res), std::move(maps)};
}

struct ForwardResult {
    Tensor embedding;       // graph tensor, shape [embed_dim]
    AttentionMaps maps;     // filled when collect_maps was set
};

// Full forward pass over a fixed-length sequence tensor (T x N x C0).
inline ForwardResult stgat_forward(const Tensor& input, const StgatModel& model,
                                   bool collect_maps = false) {
    if (input.rank() != 3) throw ShapeError("stgat_forward: T x N x C tensor required");
    int T = input.dim(0), N = input.dim(1);
    if (input.dim(2) != model.input_channels) throw ShapeError("stgat_forward: channel mismatch");
    int tau = model.config.tau;
    int half = tau / 2;

    // window gather indices, shared by all blocks
    std::vector<int> win_rows;
    win_rows.reserve(static_cast<std::size_t>(T) * tau * N);
    for (int t = 0; t < T; ++t)
        for (int k = -half; k <= half; ++k) {
            int src = t + k;
            if (src < 0) src = 0;
            if (src >= T) src = T - 1;
            for (int j = 0; j < N; ++j) win_rows.push_back(src * N + j);
        }

    ForwardResult result;
    if (collect_maps) {
        result.maps.tau = tau;
        result.maps.heads = model.config.heads;
        result.maps.joints = N;
        result.maps.maps.assign(static_cast<std::size_t>(model.config.blocks),
                                std::vector<std::vector<double>>(static_cast<std::size_t>(T)));
    }

    Tensor x = input;
    for (int b = 0; b < model.config.blocks; ++b) {
        const auto& bw = model.blocks[static_cast<std::size_t>(b)];
        int C = bw.c_in;
        Tensor flat = reshape(x, {T * N, C});
        double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(bw.head_dim));
        Tensor acc;
        for (int h = 0; h < model.config.heads; ++h) {
            const auto& hw = bw.heads[static_cast<std::size_t>(h)];
            Tensor q3 = reshape(matmul(flat, hw.wq), {T, N, bw.head_dim});
            Tensor k3 = reshape(gather_rows(matmul(flat, hw.wk), win_rows), {T, tau * N, bw.head_dim});
            Tensor v3 = reshape(gather_rows(matmul(flat, hw.wv), win_rows), {T, tau * N, bw.c_out});
            Tensor p = softmax(scale(bmm_nt(q3, k3), inv_sqrt_d), 2);  // T x N x tau*N
            if (collect_maps)
                detail_stgat::copy_head_maps(p.data(), T, N, tau, h, model.config.heads,
                                             result.maps.maps[static_cast<std::size_t>(b)]);
            Tensor o = bmm(p, v3);  // T x N x c_out
            acc = acc.defined() ? add(acc, o) : o;
        }
        Tensor y = relu(scale(acc, 1.0 / model.config.heads));
        Tensor res = bw.wres.defined() ? reshape(matmul(flat, bw.wres), {T, N, bw.c_out}) : x;
        x = add(y, res);
    }

    Tensor pooled = mean(reshape(x, {T * N, model.blocks.back().c_out}), 0);  // [c_last]
    Tensor emb = reshape(matmul(reshape(pooled, {1, model.blocks.back().c_out}), model.w_embed),
                         {model.config.embed_dim});
    result.embedding = emb;
    return result;
}

enum class ScoreAxis { Received, Sent };

// Per-joint raw attention score at the center frame: average the heads, then
// aggregate the attention each joint received (column sums over all attending
// joints and temporal slots). ScoreAxis::Sent aggregates the opposite axis.
inline std::vector<double> joint_attention_scores(const AttentionMaps& maps, int block = -1,
                                                  ScoreAxis axis = ScoreAxis::Received) {
    if (maps.maps.empty()) throw IndexError("joint_attention_scores: empty maps");
    if (block < 0) block = static_cast<int>(maps.maps.size()) - 1;
    if (block >= static_cast<int>(maps.maps.size()))
        throw IndexError("joint_attention_scores: block out of range");
    const auto& frames = maps.maps[static_cast<std::size_t>(block)];
    int t_center = static_cast<int>(frames.size()) / 2;
    const auto& m = frames[static_cast<std::size_t>(t_center)];
    int N = maps.joints, tau = maps.tau, H = maps.heads;
    std::vector<double> score(static_cast<std::size_t>(N), 0.0);
    for (int k = 0; k < tau; ++k)
        for (int q = 0; q < N; ++q)
            for (int j = 0; j < N; ++j) {
                double avg = 0.0;
                for (int h = 0; h < H; ++h)
                    avg += m[static_cast<std::size_t>((((h * tau) + k) * N + q)) * N + j];
                avg /= H;
                score[static_cast<std::size_t>(axis == ScoreAxis::Received ? j : q)] += avg;
            }
    return score;
}

// ---- sequence embedding pipeline ----

struct EmbedOptions {
    int sample_len = 160;
    int crop_len = 128;
    bool random = false;        // training uses random sample + random crop
    bool bone_vectors = false;
};

inline SkeletonSequence prepare_model_input(const SkeletonSequence& normalized,
                                            const SkeletonTopology& topo, const EmbedOptions& opt,
                                            Rng* rng = nullptr) {
    const SkeletonSequence* src = &normalized;
    SkeletonSequence boned;
    if (opt.bone_vectors) {
        boned = to_bone_vectors(normalized, topo);
        src = &boned;
    }
    SkeletonSequence sampled =
        opt.random ? sample_frames(*src, opt.sample_len, SampleMode::RandomUniform, rng)
                   : sample_frames(*src, opt.sample_len, SampleMode::Uniform);
    return opt.random ? crop_frames(sampled, opt.crop_len, CropMode::RandomWindow, rng)
                      : crop_frames(sampled, opt.crop_len, CropMode::Center);
}

// Deterministic inference-time embedding of a normalized sequence.
inline ForwardResult embed_sequence(const StgatModel& model, const SkeletonSequence& normalized,
                                    const SkeletonTopology& topo, const EmbedOptions& opt,
                                    bool collect_maps = false, Rng* rng = nullptr) {
    SkeletonSequence in = prepare_model_input(normalized, topo, opt, rng);
    return stgat_forward(make_input_tensor(in), model, collect_maps);
}

}  // namespace exechecker
