#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "exechecker/annotation.hpp"
#include "exechecker/errors.hpp"
#include "exechecker/sequence.hpp"

namespace exechecker {

// Min-max normalize to [0,1]; an all-equal input maps to all zeros, so a
// scorer that cannot discriminate any joint earns a JoA score of 0.
inline std::vector<double> minmax_normalize(const std::vector<double>& raw) {
    for (double v : raw)
        if (!std::isfinite(v)) throw ValueError("minmax_normalize: non-finite score");
    std::vector<double> out(raw.size(), 0.0);
    if (raw.empty()) return out;
    double lo = *std::min_element(raw.begin(), raw.end());
    double hi = *std::max_element(raw.begin(), raw.end());
    if (hi == lo) return out;
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - lo) / (hi - lo);
    return out;
}

// Mean of the normalized scores over the annotated joints; 1 means the scorer
// concentrates exactly on the annotation.
inline double joa_score(const std::vector<double>& normalized, const JoAAnnotation& ann) {
    if (ann.joints.empty()) throw AnnotationError("joa_score: empty annotation");
    double s = 0.0;
    for (int j : ann.joints) {
        if (j < 0 || j >= static_cast<int>(normalized.size()))
            throw IndexError("joa_score: annotated joint out of range");
        s += normalized[static_cast<std::size_t>(j)];
    }
    return s / static_cast<double>(ann.joints.size());
}

// k joint indices by descending score; ties broken by ascending index.
inline std::vector<int> topk(const std::vector<double>& scores, int k = 5) {
    if (k < 0 || k > static_cast<int>(scores.size()))
        throw IndexError("topk: k out of range");
    std::vector<int> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)])
            return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
        return a < b;
    });
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

enum class ScoreSource { Attention, Ctw };

inline std::string to_string(ScoreSource s) { return s == ScoreSource::Attention ? "attention" : "ctw"; }

// Per-sequence localization report.
struct JointScoreReport {
    std::string exercise_id;
    std::string subject_id;
    ScoreSource source = ScoreSource::Attention;
    std::vector<double> raw;
    std::vector<double> normalized;
    std::vector<int> top;
    double joa = -1.0;  // negative when no annotation was supplied

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["exercise_id"] = exercise_id;
        j["subject_id"] = subject_id;
        j["source"] = to_string(source);
        j["raw"] = raw;
        j["normalized"] = normalized;
        j["topk"] = top;
        if (joa >= 0.0) j["joa"] = joa;
        return j;
    }
};

inline JointScoreReport make_report(const SkeletonSequence& seq, ScoreSource source,
                                    std::vector<double> raw_scores, int k,
                                    const JoAAnnotation* ann) {
    JointScoreReport r;
    r.exercise_id = seq.exercise_id;
    r.subject_id = seq.subject_id;
    r.source = source;
    r.raw = std::move(raw_scores);
    r.normalized = minmax_normalize(r.raw);
    r.top = topk(r.normalized, std::min<int>(k, static_cast<int>(r.normalized.size())));
    if (ann) r.joa = joa_score(r.normalized, *ann);
    return r;
}

// ---- split evaluation ----

using JointScorer = std::function<std::vector<double>(const SkeletonSequence&)>;

struct ExerciseEval {
    std::string exercise_id;
    double mean_joa = 0.0;
    int count = 0;
    std::vector<JointScoreReport> reports;
};

// Scores every Incorrect sequence of the split against its exercise's
// annotation and averages per exercise. The scorer yields raw joint scores
// (attention or CTW path).
inline std::vector<ExerciseEval> evaluate_split(
    const std::vector<const SkeletonSequence*>& test_sequences,
    const std::map<std::string, JoAAnnotation>& annotations, const JointScorer& scorer,
    ScoreSource source, int k = 5) {
    std::map<std::string, ExerciseEval> acc;
    for (const auto* seq : test_sequences) {
        if (seq->label != Label::Incorrect) continue;
        auto it = annotations.find(seq->exercise_id);
        if (it == annotations.end())
            throw AnnotationError("evaluate_split: no annotation for " + seq->exercise_id);
        JointScoreReport rep = make_report(*seq, source, scorer(*seq), k, &it->second);
        auto& e = acc[seq->exercise_id];
        e.exercise_id = seq->exercise_id;
        e.mean_joa += rep.joa;
        e.count += 1;
        e.reports.push_back(std::move(rep));
    }
    std::vector<ExerciseEval> out;
    for (auto& [ex, e] : acc) {
        if (e.count == 0) throw AnnotationError("evaluate_split: no incorrect sequences for " + ex);
        e.mean_joa /= e.count;
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace exechecker
