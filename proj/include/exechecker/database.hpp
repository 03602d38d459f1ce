#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "exechecker/checkpoint.hpp"
#include "exechecker/errors.hpp"
#include "exechecker/stgat.hpp"
#include "exechecker/triplet.hpp"

namespace exechecker {

struct DbRecord {
    std::string exercise_id;
    std::string subject_id;
    std::string role;  // "anchor" or "positive"
    Embedding embedding;
};

// Pre-computed embeddings of the correct training sequences, with a per
// exercise decision threshold calibrated at build time.
struct EmbeddingDatabase {
    int embed_dim = 0;
    std::string model_ref;
    DistanceKind dist = DistanceKind::Euclidean;
    EmbedOptions embed_options;
    std::vector<DbRecord> records;
    std::map<std::string, double> thresholds;

    std::vector<const DbRecord*> of_exercise(const std::string& ex) const {
        std::vector<const DbRecord*> out;
        for (const auto& r : records)
            if (r.exercise_id == ex) out.push_back(&r);
        return out;
    }
};

// Embeds every correct sequence (deterministic uniform sample + center crop)
// and calibrates the threshold as the midpoint between the mean intra-correct
// distance and the mean correct-to-incorrect distance on the training split.
// The incorrect list may be empty; the threshold then falls back to twice the
// mean intra-correct distance.
inline EmbeddingDatabase build_db(const StgatModel& model,
                                  const std::vector<const SkeletonSequence*>& correct,
                                  const std::vector<const SkeletonSequence*>& incorrect,
                                  const SkeletonTopology& topo, const EmbedOptions& opts,
                                  const std::string& model_ref, DistanceKind dist,
                                  double* train_accuracy = nullptr) {
    if (correct.empty()) throw EmptyError("build_db: no correct sequences");
    EmbeddingDatabase db;
    db.embed_dim = model.config.embed_dim;
    db.model_ref = model_ref;
    db.dist = dist;
    db.embed_options = opts;
    db.embed_options.random = false;

    std::map<std::string, std::vector<Embedding>> corr_by_ex, inc_by_ex;
    for (std::size_t i = 0; i < correct.size(); ++i) {
        const auto* s = correct[i];
        Embedding e = embed_sequence(model, *s, topo, db.embed_options).embedding.data();
        DbRecord rec;
        rec.exercise_id = s->exercise_id;
        rec.subject_id = s->subject_id;
        rec.role = (i % 2 == 0) ? "anchor" : "positive";
        rec.embedding = e;
        db.records.push_back(std::move(rec));
        corr_by_ex[s->exercise_id].push_back(std::move(e));
    }
    for (const auto* s : incorrect)
        inc_by_ex[s->exercise_id].push_back(
            embed_sequence(model, *s, topo, db.embed_options).embedding.data());

    for (auto& [ex, ce] : corr_by_ex) {
        double intra = 0.0;
        int n_intra = 0;
        for (std::size_t i = 0; i < ce.size(); ++i)
            for (std::size_t j = i + 1; j < ce.size(); ++j) {
                intra += distance(ce[i], ce[j], dist);
                ++n_intra;
            }
        intra = n_intra ? intra / n_intra : 0.0;
        auto it = inc_by_ex.find(ex);
        double thr;
        if (it != inc_by_ex.end() && !it->second.empty()) {
            double cross = 0.0;
            int n_cross = 0;
            for (const auto& c : ce)
                for (const auto& i : it->second) {
                    cross += distance(c, i, dist);
                    ++n_cross;
                }
            cross /= n_cross;
            thr = 0.5 * (intra + cross);
        } else {
            thr = 2.0 * intra;
        }
        db.thresholds[ex] = thr;
    }

    if (train_accuracy) {
        // sanity check: how well the calibrated thresholds separate the split
        int ok = 0, total = 0;
        for (auto& [ex, embs] : corr_by_ex)
            for (const auto& e : embs) {
                double m = 0.0;
                for (const auto& c : embs) m += distance(e, c, dist);
                m /= static_cast<double>(embs.size());
                ok += (m <= db.thresholds[ex]) ? 1 : 0;
                ++total;
            }
        for (auto& [ex, embs] : inc_by_ex) {
            auto ce = corr_by_ex.find(ex);
            if (ce == corr_by_ex.end()) continue;
            for (const auto& e : embs) {
                double m = 0.0;
                for (const auto& c : ce->second) m += distance(e, c, dist);
                m /= static_cast<double>(ce->second.size());
                ok += (m > db.thresholds[ex]) ? 1 : 0;
                ++total;
            }
        }
        *train_accuracy = total ? static_cast<double>(ok) / total : 0.0;
    }
    return db;
}

// ---- persistence (tensor container + JSON header) ----

inline void save_db(const EmbeddingDatabase& db, const std::string& path) {
    std::vector<std::pair<std::string, Tensor>> tensors;
    auto recs = nlohmann::json::array();
    for (std::size_t i = 0; i < db.records.size(); ++i) {
        const auto& r = db.records[i];
        std::string name = "emb/" + std::to_string(i);
        tensors.emplace_back(name, Tensor::from({db.embed_dim}, r.embedding));
        recs.push_back({{"name", name},
                        {"exercise_id", r.exercise_id},
                        {"subject_id", r.subject_id},
                        {"role", r.role}});
    }
    nlohmann::json meta;
    meta["kind"] = "embedding-db";
    meta["embed_dim"] = db.embed_dim;
    meta["model_ref"] = db.model_ref;
    meta["distance"] = to_string(db.dist);
    meta["records"] = recs;
    meta["thresholds"] = db.thresholds;
    meta["embed_options"] = {{"sample_len", db.embed_options.sample_len},
                             {"crop_len", db.embed_options.crop_len},
                             {"bone_vectors", db.embed_options.bone_vectors}};
    save_checkpoint(path, tensors, std::move(meta));
}

inline EmbeddingDatabase load_db(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    if (ck.header.value("kind", "") != "embedding-db")
        throw ParseError("not an embedding database: " + path);
    EmbeddingDatabase db;
    db.embed_dim = ck.header.at("embed_dim").get<int>();
    db.model_ref = ck.header.value("model_ref", "");
    db.dist = distance_from_string(ck.header.value("distance", "euclidean"));
    const auto& eo = ck.header.at("embed_options");
    db.embed_options.sample_len = eo.at("sample_len").get<int>();
    db.embed_options.crop_len = eo.at("crop_len").get<int>();
    db.embed_options.bone_vectors = eo.at("bone_vectors").get<bool>();
    db.embed_options.random = false;
    for (const auto& [ex, thr] : ck.header.at("thresholds").items())
        db.thresholds[ex] = thr.get<double>();
    for (const auto& r : ck.header.at("records")) {
        DbRecord rec;
        rec.exercise_id = r.at("exercise_id").get<std::string>();
        rec.subject_id = r.at("subject_id").get<std::string>();
        rec.role = r.at("role").get<std::string>();
        rec.embedding = ck.require(r.at("name").get<std::string>()).data();
        db.records.push_back(std::move(rec));
    }
    return db;
}

// ---- classification ----

enum class ThresholdPolicy { MeanDistance, NearestNeighbor };

struct ClassificationResult {
    Label label = Label::Correct;
    double mean_distance = 0.0;  // the decision statistic (mean or NN distance)
    double threshold = 0.0;
    std::vector<double> per_reference;

    nlohmann::json to_json() const {
        return {{"label", to_string(label)},
                {"mean_distance", mean_distance},
                {"threshold", threshold},
                {"per_reference", per_reference}};
    }
};

inline ClassificationResult classify(const SkeletonSequence& normalized_input,
                                     const EmbeddingDatabase& db, const StgatModel& model,
                                     const SkeletonTopology& topo,
                                     ThresholdPolicy policy = ThresholdPolicy::MeanDistance) {
    auto refs = db.of_exercise(normalized_input.exercise_id);
    auto thr = db.thresholds.find(normalized_input.exercise_id);
    if (refs.empty() || thr == db.thresholds.end())
        throw UnknownExerciseError("classify: exercise not in database: " +
                                   normalized_input.exercise_id);
    Embedding e = embed_sequence(model, normalized_input, topo, db.embed_options).embedding.data();
    ClassificationResult r;
    r.threshold = thr->second;
    double sum = 0.0, best = std::numeric_limits<double>::infinity();
    for (const auto* ref : refs) {
        double d = distance(e, ref->embedding, db.dist);
        r.per_reference.push_back(d);
        sum += d;
        best = std::min(best, d);
    }
    r.mean_distance = policy == ThresholdPolicy::MeanDistance
                          ? sum / static_cast<double>(refs.size())
                          : best;
    r.label = r.mean_distance > r.threshold ? Label::Incorrect : Label::Correct;
    return r;
}

}  // namespace exechecker
