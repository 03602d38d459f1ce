#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "exechecker/errors.hpp"
#include "exechecker/rng.hpp"
#include "exechecker/topology.hpp"

namespace exechecker {

enum class Label { Correct, Incorrect };

inline std::string to_string(Label l) { return l == Label::Correct ? "correct" : "incorrect"; }

inline Label label_from_string(const std::string& s) {
    if (s == "correct") return Label::Correct;
    if (s == "incorrect") return Label::Incorrect;
    throw ParseError("unknown label: " + s);
}

// A motion clip: T frames of N joints in 3D, plus recording metadata.
// Immutable by convention; every transform below returns a new sequence.
struct SkeletonSequence {
    int num_frames = 0;
    int num_joints = 0;
    std::vector<double> frames;  // T x N x 3, row-major
    std::string exercise_id;
    std::string subject_id;
    Label label = Label::Correct;
    double fps = 30.0;

    double* pos(int t, int j) { return frames.data() + (static_cast<std::size_t>(t) * num_joints + j) * 3; }
    const double* pos(int t, int j) const {
        return frames.data() + (static_cast<std::size_t>(t) * num_joints + j) * 3;
    }

    void validate(const SkeletonTopology& topo) const {
        if (num_frames < 2) throw SchemaError("sequence: needs at least 2 frames");
        if (num_joints != topo.joint_count())
            throw SchemaError("sequence: joint count " + std::to_string(num_joints) +
                              " does not match topology " + std::to_string(topo.joint_count()));
        if (frames.size() != static_cast<std::size_t>(num_frames) * num_joints * 3)
            throw SchemaError("sequence: frame buffer size mismatch");
        if (!(fps > 0.0)) throw ValueError("sequence: fps must be positive");
        for (double v : frames)
            if (!std::isfinite(v)) throw ValueError("sequence: non-finite coordinate");
    }
};

// ---- file IO ----
// {"exercise_id", "subject_id", "label", "fps", "joints": [names], "frames": [[[x,y,z] x N] x T]}

inline SkeletonSequence sequence_from_json(const nlohmann::json& j, const SkeletonTopology& topo) {
    SkeletonSequence s;
    std::vector<std::string> joints;
    try {
        s.exercise_id = j.at("exercise_id").get<std::string>();
        s.subject_id = j.at("subject_id").get<std::string>();
        s.label = label_from_string(j.at("label").get<std::string>());
        s.fps = j.at("fps").get<double>();
        joints = j.at("joints").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("sequence: ") + e.what());
    }
    if (static_cast<int>(joints.size()) != topo.joint_count())
        throw SchemaError("sequence: file lists " + std::to_string(joints.size()) +
                          " joints, topology has " + std::to_string(topo.joint_count()));
    for (std::size_t i = 0; i < joints.size(); ++i)
        if (joints[i] != topo.joint_names[i])
            throw SchemaError("sequence: joint order mismatch at " + std::to_string(i) + " (" +
                              joints[i] + " vs " + topo.joint_names[i] + ")");
    const auto& fr = j.at("frames");
    if (!fr.is_array()) throw ParseError("sequence: frames must be an array");
    s.num_frames = static_cast<int>(fr.size());
    s.num_joints = topo.joint_count();
    s.frames.reserve(static_cast<std::size_t>(s.num_frames) * s.num_joints * 3);
    for (const auto& frame : fr) {
        if (!frame.is_array() || static_cast<int>(frame.size()) != s.num_joints)
            throw SchemaError("sequence: frame with wrong joint count");
        for (const auto& p : frame) {
            if (!p.is_array() || p.size() != 3) throw ParseError("sequence: joint must be [x,y,z]");
            for (const auto& c : p) {
                if (!c.is_number()) throw ValueError("sequence: coordinate is not a number");
                s.frames.push_back(c.get<double>());
            }
        }
    }
    s.validate(topo);
    return s;
}

inline SkeletonSequence load_sequence(const std::string& path, const SkeletonTopology& topo) {
    std::ifstream in(path);
    if (!in) throw IOError("cannot open sequence file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("sequence: ") + e.what());
    }
    return sequence_from_json(j, topo);
}

inline nlohmann::json sequence_to_json(const SkeletonSequence& s, const SkeletonTopology& topo) {
    nlohmann::json j;
    j["exercise_id"] = s.exercise_id;
    j["subject_id"] = s.subject_id;
    j["label"] = to_string(s.label);
    j["fps"] = s.fps;
    j["joints"] = topo.joint_names;
    auto frames = nlohmann::json::array();
    for (int t = 0; t < s.num_frames; ++t) {
        auto frame = nlohmann::json::array();
        for (int k = 0; k < s.num_joints; ++k) {
            const double* p = s.pos(t, k);
            frame.push_back({p[0], p[1], p[2]});
        }
        frames.push_back(frame);
    }
    j["frames"] = frames;
    return j;
}

inline void save_sequence(const SkeletonSequence& s, const SkeletonTopology& topo,
                          const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IOError("cannot write sequence file: " + path);
    out << sequence_to_json(s, topo).dump() << "\n";
}

// ---- transforms ----

// Root-center every frame, then scale the whole clip so the mean root-to-head
// distance over frames equals 1. Deterministic and idempotent.
inline SkeletonSequence normalize(const SkeletonSequence& seq, const SkeletonTopology& topo) {
    SkeletonSequence out = seq;
    int head = topo.head_joint();
    for (int t = 0; t < out.num_frames; ++t) {
        double rx = out.pos(t, topo.root)[0];
        double ry = out.pos(t, topo.root)[1];
        double rz = out.pos(t, topo.root)[2];
        for (int j = 0; j < out.num_joints; ++j) {
            double* p = out.pos(t, j);
            p[0] -= rx;
            p[1] -= ry;
            p[2] -= rz;
        }
    }
    double mean_dist = 0.0;
    for (int t = 0; t < out.num_frames; ++t) {
        const double* h = out.pos(t, head);
        mean_dist += std::sqrt(h[0] * h[0] + h[1] * h[1] + h[2] * h[2]);
    }
    mean_dist /= out.num_frames;
    if (mean_dist < 1e-9) throw DegenerateError("normalize: root-to-head scale is ~0");
    double inv = 1.0 / mean_dist;
    for (auto& v : out.frames) v *= inv;
    return out;
}

// Swap the data of every mirror pair and negate the mirror axis for all joints.
// Exact involution.
inline SkeletonSequence mirror(const SkeletonSequence& seq, const SkeletonTopology& topo) {
    SkeletonSequence out = seq;
    for (int t = 0; t < out.num_frames; ++t) {
        for (auto [l, r] : topo.mirror_pairs)
            for (int c = 0; c < 3; ++c) std::swap(out.pos(t, l)[c], out.pos(t, r)[c]);
        for (int j = 0; j < out.num_joints; ++j) out.pos(t, j)[topo.mirror_axis] = -out.pos(t, j)[topo.mirror_axis];
    }
    return out;
}

enum class SampleMode { Uniform, RandomUniform };
enum class CropMode { Center, RandomWindow };

namespace detail_seq {
// round half down: 2.5 -> 2, 2.51 -> 3
inline int round_half_down(double x) { return static_cast<int>(std::ceil(x - 0.5)); }

inline SkeletonSequence pick_frames(const SkeletonSequence& seq, const std::vector<int>& idx) {
    SkeletonSequence out = seq;
    out.num_frames = static_cast<int>(idx.size());
    out.frames.resize(static_cast<std::size_t>(out.num_frames) * seq.num_joints * 3);
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const double* src = seq.frames.data() + static_cast<std::size_t>(idx[k]) * seq.num_joints * 3;
        double* dst = out.frames.data() + k * seq.num_joints * 3;
        std::copy(src, src + static_cast<std::size_t>(seq.num_joints) * 3, dst);
    }
    return out;
}
}  // namespace detail_seq

// Resample to exactly target_len frames with non-decreasing indices.
// Uniform mode is deterministic; RandomUniform draws sorted indices from rng
// (with replacement only when the clip is shorter than the target).
inline SkeletonSequence sample_frames(const SkeletonSequence& seq, int target_len, SampleMode mode,
                                      Rng* rng = nullptr) {
    if (target_len <= 0) throw LengthError("sample_frames: target_len must be positive");
    std::vector<int> idx(static_cast<std::size_t>(target_len));
    if (mode == SampleMode::Uniform) {
        for (int k = 0; k < target_len; ++k) {
            int i = detail_seq::round_half_down(static_cast<double>(k) * seq.num_frames / target_len);
            if (i < 0) i = 0;
            if (i >= seq.num_frames) i = seq.num_frames - 1;
            idx[static_cast<std::size_t>(k)] = i;
        }
    } else {
        if (rng == nullptr) throw ValueError("sample_frames: RandomUniform requires an rng");
        if (seq.num_frames < target_len) {
            for (auto& i : idx) i = static_cast<int>(rng->randint(seq.num_frames));
        } else {
            // sample without replacement, then sort
            std::vector<int> pool(static_cast<std::size_t>(seq.num_frames));
            for (int i = 0; i < seq.num_frames; ++i) pool[static_cast<std::size_t>(i)] = i;
            for (int k = 0; k < target_len; ++k) {
                std::size_t j = static_cast<std::size_t>(k) +
                                static_cast<std::size_t>(rng->randint(seq.num_frames - k));
                std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
                idx[static_cast<std::size_t>(k)] = pool[static_cast<std::size_t>(k)];
            }
        }
        std::sort(idx.begin(), idx.end());
    }
    return detail_seq::pick_frames(seq, idx);
}

// Contiguous window of crop_len frames.
inline SkeletonSequence crop_frames(const SkeletonSequence& seq, int crop_len, CropMode mode,
                                    Rng* rng = nullptr) {
    if (crop_len <= 0) throw LengthError("crop_frames: crop_len must be positive");
    if (seq.num_frames < crop_len)
        throw LengthError("crop_frames: sequence has " + std::to_string(seq.num_frames) +
                          " frames, need " + std::to_string(crop_len));
    int start;
    if (mode == CropMode::Center) {
        start = (seq.num_frames - crop_len) / 2;
    } else {
        if (rng == nullptr) throw ValueError("crop_frames: RandomWindow requires an rng");
        start = static_cast<int>(rng->randint(seq.num_frames - crop_len + 1));
    }
    std::vector<int> idx(static_cast<std::size_t>(crop_len));
    for (int k = 0; k < crop_len; ++k) idx[static_cast<std::size_t>(k)] = start + k;
    return detail_seq::pick_frames(seq, idx);
}

// Replace each joint's position with the bone vector from its parent; the root
// carries (0,0,0).
inline SkeletonSequence to_bone_vectors(const SkeletonSequence& seq, const SkeletonTopology& topo) {
    SkeletonSequence out = seq;
    for (int t = 0; t < seq.num_frames; ++t) {
        for (int j = 0; j < seq.num_joints; ++j) {
            double* dst = out.pos(t, j);
            if (j == topo.root) {
                dst[0] = dst[1] = dst[2] = 0.0;
                continue;
            }
            const double* p = seq.pos(t, j);
            const double* q = seq.pos(t, topo.parent[static_cast<std::size_t>(j)]);
            dst[0] = p[0] - q[0];
            dst[1] = p[1] - q[1];
            dst[2] = p[2] - q[2];
        }
    }
    return out;
}

// Inverse of to_bone_vectors up to the root position: cumulative sum along each
// kinematic chain, yielding root-relative positions.
inline SkeletonSequence bones_to_positions(const SkeletonSequence& bones, const SkeletonTopology& topo) {
    SkeletonSequence out = bones;
    // process joints in hop order so parents are resolved first
    std::vector<int> order(static_cast<std::size_t>(bones.num_joints));
    for (int i = 0; i < bones.num_joints; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return topo.hops[static_cast<std::size_t>(a)] < topo.hops[static_cast<std::size_t>(b)];
    });
    for (int t = 0; t < bones.num_frames; ++t) {
        for (int j : order) {
            double* dst = out.pos(t, j);
            if (j == topo.root) {
                dst[0] = dst[1] = dst[2] = 0.0;
                continue;
            }
            const double* b = bones.pos(t, j);
            const double* pp = out.pos(t, topo.parent[static_cast<std::size_t>(j)]);
            dst[0] = pp[0] + b[0];
            dst[1] = pp[1] + b[1];
            dst[2] = pp[2] + b[2];
        }
    }
    return out;
}

}  // namespace exechecker
