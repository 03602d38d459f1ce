#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "exechecker/annotation.hpp"
#include "exechecker/dataset.hpp"
#include "exechecker/errors.hpp"
#include "exechecker/rng.hpp"
#include "exechecker/sequence.hpp"
#include "exechecker/topology.hpp"

namespace exechecker {

// Desk-scale stand-in for real recordings: sinusoidal bone oscillations on the
// 17-joint stick figure. A pair shares one underlying motion; the incorrect
// half gets an extra oscillation (amplitude + phase offset) on the perturbed
// joints, so only their subtrees deviate from the correct half.
struct SyntheticSpec {
    std::string exercise_id;
    std::vector<int> active_joints;   // joints engaged by the base motion
    std::vector<int> perturb_joints;  // joints made to move wrongly
    double amplitude = 0.3;           // extra oscillation, radians
    double noise_std = 0.004;         // per-coordinate gaussian jitter, meters
    int num_frames = 80;
    double fps = 30.0;
    double cycles = 2.0;              // base motion repetitions per clip
    std::uint64_t base_seed = 0;      // derived from exercise_id when 0
};

struct SynthPair {
    SkeletonSequence correct;
    SkeletonSequence incorrect;
    JoAAnnotation annotation;
};

namespace detail_synth {

inline std::vector<std::array<double, 3>> rest_bones_17() {
    std::vector<std::array<double, 3>> b(17, {0.0, 0.0, 0.0});
    auto set = [&](int j, double x, double y, double z) { b[static_cast<std::size_t>(j)] = {x, y, z}; };
    set(1, -0.10, 0.0, 0.0);   // r_hip
    set(2, 0.0, -0.42, 0.02);  // r_knee
    set(3, 0.0, -0.42, 0.0);   // r_ankle
    set(4, 0.10, 0.0, 0.0);    // l_hip
    set(5, 0.0, -0.42, 0.02);  // l_knee
    set(6, 0.0, -0.42, 0.0);   // l_ankle
    set(7, 0.0, 0.22, -0.02);  // spine
    set(8, 0.0, 0.22, 0.0);    // thorax
    set(9, 0.0, 0.11, 0.0);    // neck
    set(10, 0.0, 0.14, 0.02);  // head
    set(11, 0.18, 0.02, 0.0);  // l_shoulder
    set(12, 0.0, -0.28, 0.03); // l_elbow
    set(13, 0.0, -0.26, 0.0);  // l_wrist
    set(14, -0.18, 0.02, 0.0); // r_shoulder
    set(15, 0.0, -0.28, 0.03); // r_elbow
    set(16, 0.0, -0.26, 0.0);  // r_wrist
    return b;
}

inline std::array<double, 3> rotate(const std::array<double, 3>& v, const std::array<double, 3>& axis,
                                    double angle) {
    // Rodrigues rotation about a unit axis
    double c = std::cos(angle), s = std::sin(angle);
    double kx = axis[0], ky = axis[1], kz = axis[2];
    double dot = kx * v[0] + ky * v[1] + kz * v[2];
    std::array<double, 3> cross = {ky * v[2] - kz * v[1], kz * v[0] - kx * v[2], kx * v[1] - ky * v[0]};
    return {v[0] * c + cross[0] * s + kx * dot * (1.0 - c),
            v[1] * c + cross[1] * s + ky * dot * (1.0 - c),
            v[2] * c + cross[2] * s + kz * dot * (1.0 - c)};
}

struct JointMotion {
    double base_amp = 0.0;   // radians
    double phase = 0.0;
    std::array<double, 3> axis = {0.0, 0.0, 1.0};
};

}  // namespace detail_synth

inline SynthPair generate_synthetic_pair(const SyntheticSpec& spec, std::uint64_t seed) {
    if (spec.perturb_joints.empty()) throw SpecError("synthetic: perturbation set is empty");
    if (!(spec.amplitude > 0.0)) throw SpecError("synthetic: amplitude must be positive");
    if (spec.num_frames < 2) throw SpecError("synthetic: need at least 2 frames");

    SkeletonTopology topo = stick_figure_17();
    for (int j : spec.perturb_joints)
        if (j <= 0 || j >= topo.joint_count())
            throw SpecError("synthetic: perturbed joint out of range (root not allowed)");

    auto bones = detail_synth::rest_bones_17();

    // exercise-level motion parameters, stable across subjects
    std::uint64_t bs = spec.base_seed ? spec.base_seed : hash64(spec.exercise_id);
    Rng ex_rng(bs);
    std::vector<detail_synth::JointMotion> motion(17);
    const std::array<std::array<double, 3>, 3> axes = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    for (int j = 1; j < 17; ++j) {
        auto& m = motion[static_cast<std::size_t>(j)];
        m.phase = ex_rng.uniform(0.0, 6.2831853);
        // swing axis must not be parallel to the rest bone, or the rotation
        // degenerates to the identity; drop the most-parallel axis and draw
        // from the other two
        const auto& b = bones[static_cast<std::size_t>(j)];
        std::array<double, 3> dots = {std::fabs(b[0]), std::fabs(b[1]), std::fabs(b[2])};
        int worst = 0;
        for (int c = 1; c < 3; ++c)
            if (dots[static_cast<std::size_t>(c)] > dots[static_cast<std::size_t>(worst)]) worst = c;
        std::array<int, 2> ok{};
        int w = 0;
        for (int c = 0; c < 3; ++c)
            if (c != worst) ok[static_cast<std::size_t>(w++)] = c;
        m.axis = axes[static_cast<std::size_t>(ok[static_cast<std::size_t>(ex_rng.randint(2))])];
        m.base_amp = 0.0;
    }
    for (int j : spec.active_joints) {
        if (j <= 0 || j >= 17) throw SpecError("synthetic: active joint out of range");
        motion[static_cast<std::size_t>(j)].base_amp = ex_rng.uniform(0.35, 0.6);
    }

    // subject-level variation, shared by both halves of the pair
    Rng subj_rng(bs ^ (0x9e3779b97f4a7c15ULL * (seed + 1)));
    double tempo = subj_rng.uniform(0.92, 1.08);
    double amp_scale = subj_rng.uniform(0.92, 1.08);
    double phase_jitter = subj_rng.uniform(-0.25, 0.25);
    int frames = spec.num_frames +
                 static_cast<int>(subj_rng.randint(1 + spec.num_frames / 8)) - spec.num_frames / 16;
    if (frames < 2) frames = 2;

    auto build = [&](bool incorrect, Rng noise_rng) {
        SkeletonSequence s;
        s.num_frames = frames;
        s.num_joints = 17;
        s.frames.assign(static_cast<std::size_t>(frames) * 17 * 3, 0.0);
        s.exercise_id = spec.exercise_id;
        s.fps = spec.fps;
        s.label = incorrect ? Label::Incorrect : Label::Correct;
        for (int t = 0; t < frames; ++t) {
            double u = static_cast<double>(t) / (frames - 1);
            for (int j = 0; j < 17; ++j) {
                double* p = s.pos(t, j);
                if (j == topo.root) {
                    p[0] = p[1] = p[2] = 0.0;
                    continue;
                }
                const auto& m = motion[static_cast<std::size_t>(j)];
                double angle = m.base_amp * amp_scale *
                               std::sin(2.0 * 3.14159265358979323846 * spec.cycles * tempo * u +
                                        m.phase + phase_jitter);
                if (incorrect) {
                    bool perturbed = false;
                    for (int pj : spec.perturb_joints) perturbed = perturbed || pj == j;
                    if (perturbed)
                        angle += spec.amplitude *
                                 std::sin(2.0 * 3.14159265358979323846 * spec.cycles * tempo * u +
                                          m.phase + phase_jitter + 0.9);
                }
                auto bone = detail_synth::rotate(bones[static_cast<std::size_t>(j)], m.axis, angle);
                const double* pp = s.pos(t, topo.parent[static_cast<std::size_t>(j)]);
                p[0] = pp[0] + bone[0];
                p[1] = pp[1] + bone[1];
                p[2] = pp[2] + bone[2];
            }
            if (spec.noise_std > 0.0)
                for (int j = 0; j < 17; ++j) {
                    double* p = s.pos(t, j);
                    p[0] += noise_rng.normal(0.0, spec.noise_std);
                    p[1] += noise_rng.normal(0.0, spec.noise_std);
                    p[2] += noise_rng.normal(0.0, spec.noise_std);
                }
        }
        return s;
    };

    SynthPair pair;
    pair.correct = build(false, Rng(seed * 2 + 1));
    pair.incorrect = build(true, Rng(seed * 2 + 2));
    pair.annotation = make_annotation(spec.exercise_id, spec.perturb_joints);
    return pair;
}

// The benchmark exercise set: each perturbs a small subtree of the figure.
inline std::vector<SyntheticSpec> builtin_exercises() {
    SkeletonTopology t = stick_figure_17();
    auto j = [&](const char* name) { return t.index_of(name); };
    std::vector<SyntheticSpec> specs(5);
    specs[0].exercise_id = "squat";
    specs[0].active_joints = {j("r_knee"), j("l_knee"), j("r_hip"), j("l_hip")};
    specs[0].perturb_joints = {j("l_knee"), j("l_ankle")};
    specs[0].amplitude = 0.5;
    specs[1].exercise_id = "arm_raise";
    specs[1].active_joints = {j("l_shoulder"), j("r_shoulder")};
    specs[1].perturb_joints = {j("l_shoulder"), j("r_shoulder"), j("l_elbow"), j("r_elbow")};
    specs[1].amplitude = 0.45;
    specs[2].exercise_id = "leg_swing";
    specs[2].active_joints = {j("r_hip"), j("r_knee")};
    specs[2].perturb_joints = {j("r_knee"), j("r_ankle")};
    specs[2].amplitude = 0.45;
    specs[3].exercise_id = "elbow_curl";
    specs[3].active_joints = {j("l_elbow"), j("r_elbow")};
    specs[3].perturb_joints = {j("r_elbow"), j("r_wrist")};
    specs[3].amplitude = 0.5;
    specs[4].exercise_id = "neck_roll";
    specs[4].active_joints = {j("neck")};
    specs[4].perturb_joints = {j("neck"), j("head")};
    specs[4].amplitude = 0.45;
    return specs;
}

// pairs_per_exercise subjects, each contributing one correct and one incorrect
// clip per exercise. Deterministic in seed.
inline Dataset make_synthetic_dataset(const std::vector<SyntheticSpec>& specs,
                                      int pairs_per_exercise, std::uint64_t seed) {
    Dataset ds;
    ds.topology = stick_figure_17();
    for (const auto& spec : specs) {
        for (int i = 0; i < pairs_per_exercise; ++i) {
            auto pair = generate_synthetic_pair(spec, seed + static_cast<std::uint64_t>(i) * 9973);
            char buf[16];
            std::snprintf(buf, sizeof(buf), "s%02d", i);
            pair.correct.subject_id = buf;
            pair.incorrect.subject_id = buf;
            ds.sequences.push_back(std::move(pair.correct));
            ds.sequences.push_back(std::move(pair.incorrect));
            ds.annotations[spec.exercise_id] = pair.annotation;
        }
    }
    return ds;
}

}  // namespace exechecker
