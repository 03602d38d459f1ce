#pragma once

#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "exechecker/errors.hpp"
#include "exechecker/topology.hpp"

namespace exechecker {

// The joints whose wrong movement makes an exercise execution incorrect;
// ground truth for localization scoring.
struct JoAAnnotation {
    std::string exercise_id;
    std::vector<int> joints;  // sorted, unique, each in [0, N)

    void validate(int joint_count) const {
        if (joints.empty()) throw AnnotationError("annotation: empty joint set for " + exercise_id);
        for (int j : joints)
            if (j < 0 || j >= joint_count)
                throw AnnotationError("annotation: joint index out of range for " + exercise_id);
    }

    bool contains(int j) const { return std::find(joints.begin(), joints.end(), j) != joints.end(); }
};

inline JoAAnnotation make_annotation(std::string exercise_id, std::vector<int> joints) {
    JoAAnnotation a;
    a.exercise_id = std::move(exercise_id);
    std::sort(joints.begin(), joints.end());
    joints.erase(std::unique(joints.begin(), joints.end()), joints.end());
    a.joints = std::move(joints);
    return a;
}

// File format: {"exercise_id": str, "joa": [joint names]}
inline JoAAnnotation annotation_from_json(const nlohmann::json& j, const SkeletonTopology& topo) {
    std::string ex;
    std::vector<std::string> names;
    try {
        ex = j.at("exercise_id").get<std::string>();
        names = j.at("joa").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("annotation: ") + e.what());
    }
    std::vector<int> idx;
    for (const auto& n : names) {
        int i = topo.index_of(n);
        if (i < 0) throw SchemaError("annotation: unknown joint name " + n);
        idx.push_back(i);
    }
    auto a = make_annotation(ex, std::move(idx));
    a.validate(topo.joint_count());
    return a;
}

inline nlohmann::json annotation_to_json(const JoAAnnotation& a, const SkeletonTopology& topo) {
    nlohmann::json j;
    j["exercise_id"] = a.exercise_id;
    std::vector<std::string> names;
    for (int i : a.joints) names.push_back(topo.joint_names[static_cast<std::size_t>(i)]);
    j["joa"] = names;
    return j;
}

inline JoAAnnotation load_annotation(const std::string& path, const SkeletonTopology& topo) {
    std::ifstream in(path);
    if (!in) throw IOError("cannot open annotation file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("annotation: ") + e.what());
    }
    return annotation_from_json(j, topo);
}

inline void save_annotation(const JoAAnnotation& a, const SkeletonTopology& topo,
                            const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IOError("cannot write annotation file: " + path);
    out << annotation_to_json(a, topo).dump(2) << "\n";
}

// Annotation for the mirrored sequence: each joint swapped with its
// opposite-side counterpart.
inline JoAAnnotation mirror_annotation(const JoAAnnotation& a, const SkeletonTopology& topo) {
    std::vector<int> joints;
    for (int j : a.joints) joints.push_back(topo.mirror_of(j));
    return make_annotation(a.exercise_id, std::move(joints));
}

}  // namespace exechecker
