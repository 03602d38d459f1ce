#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "exechecker/errors.hpp"

namespace exechecker {

// Kinematic skeleton description: joint names, parent chain rooted at the
// pelvis, hop counts to the root, and left/right mirror pairing.
struct SkeletonTopology {
    std::vector<std::string> joint_names;
    std::vector<int> parent;  // parent[root] == root
    int root = 0;
    std::vector<int> hops;    // hops[root] == 0, hops[j] == hops[parent[j]] + 1
    std::vector<std::pair<int, int>> mirror_pairs;
    int mirror_axis = 0;

    int joint_count() const { return static_cast<int>(joint_names.size()); }

    int index_of(const std::string& name) const {
        for (int i = 0; i < joint_count(); ++i)
            if (joint_names[static_cast<std::size_t>(i)] == name) return i;
        return -1;
    }

    // The joint that defines the normalization scale. The sequence file format
    // carries no explicit marker, so we resolve it by name ("head", or the
    // first name containing "head"), falling back to the most distal joint.
    int head_joint() const {
        for (int i = 0; i < joint_count(); ++i) {
            std::string lower = joint_names[static_cast<std::size_t>(i)];
            std::transform(lower.begin(), lower.end(), lower.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            if (lower == "head") return i;
        }
        for (int i = 0; i < joint_count(); ++i) {
            std::string lower = joint_names[static_cast<std::size_t>(i)];
            std::transform(lower.begin(), lower.end(), lower.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            if (lower.find("head") != std::string::npos) return i;
        }
        int best = root;
        for (int i = 0; i < joint_count(); ++i)
            if (hops[static_cast<std::size_t>(i)] > hops[static_cast<std::size_t>(best)]) best = i;
        return best;
    }

    // joint index on the opposite body side (identity for unpaired joints)
    int mirror_of(int j) const {
        for (auto [l, r] : mirror_pairs) {
            if (j == l) return r;
            if (j == r) return l;
        }
        return j;
    }

    void validate() const {
        int n = joint_count();
        if (n == 0) throw SchemaError("topology: no joints");
        if (static_cast<int>(parent.size()) != n || static_cast<int>(hops.size()) != n)
            throw SchemaError("topology: parent/hops size mismatch");
        if (root < 0 || root >= n) throw SchemaError("topology: root out of range");
        if (parent[static_cast<std::size_t>(root)] != root)
            throw SchemaError("topology: root must be its own parent");
        for (int j = 0; j < n; ++j) {
            // every joint must reach the root without cycles
            int cur = j, steps = 0;
            while (cur != root) {
                cur = parent[static_cast<std::size_t>(cur)];
                if (++steps > n) throw SchemaError("topology: parent chain does not reach root");
            }
            if (j == root) {
                if (hops[static_cast<std::size_t>(j)] != 0) throw SchemaError("topology: hops[root] != 0");
            } else if (hops[static_cast<std::size_t>(j)] != hops[static_cast<std::size_t>(parent[static_cast<std::size_t>(j)])] + 1) {
                throw SchemaError("topology: hop counts inconsistent with parents");
            }
        }
        std::vector<int> used(static_cast<std::size_t>(n), 0);
        for (auto [l, r] : mirror_pairs) {
            if (l < 0 || l >= n || r < 0 || r >= n || l == r)
                throw SchemaError("topology: bad mirror pair");
            if (used[static_cast<std::size_t>(l)]++ || used[static_cast<std::size_t>(r)]++)
                throw SchemaError("topology: joint appears in more than one mirror pair");
        }
        if (mirror_axis < 0 || mirror_axis > 2) throw SchemaError("topology: mirror_axis must be 0..2");
    }

    void compute_hops() {
        int n = joint_count();
        hops.assign(static_cast<std::size_t>(n), -1);
        hops[static_cast<std::size_t>(root)] = 0;
        bool progress = true;
        while (progress) {
            progress = false;
            for (int j = 0; j < n; ++j) {
                if (hops[static_cast<std::size_t>(j)] >= 0) continue;
                int p = parent[static_cast<std::size_t>(j)];
                if (hops[static_cast<std::size_t>(p)] >= 0) {
                    hops[static_cast<std::size_t>(j)] = hops[static_cast<std::size_t>(p)] + 1;
                    progress = true;
                }
            }
        }
    }
};

// 17-joint stick figure (pelvis-rooted, x is the left/right axis).
inline SkeletonTopology stick_figure_17() {
    SkeletonTopology t;
    t.joint_names = {"pelvis",     "r_hip",   "r_knee",    "r_ankle", "l_hip",  "l_knee",
                     "l_ankle",    "spine",   "thorax",    "neck",    "head",   "l_shoulder",
                     "l_elbow",    "l_wrist", "r_shoulder", "r_elbow", "r_wrist"};
    t.parent = {0, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15};
    t.root = 0;
    t.mirror_pairs = {{4, 1}, {5, 2}, {6, 3}, {11, 14}, {12, 15}, {13, 16}};
    t.mirror_axis = 0;
    t.compute_hops();
    t.validate();
    return t;
}

inline SkeletonTopology topology_from_json(const nlohmann::json& j) {
    SkeletonTopology t;
    try {
        t.joint_names = j.at("joints").get<std::vector<std::string>>();
        t.parent = j.at("parents").get<std::vector<int>>();
        t.root = j.at("root").get<int>();
        for (const auto& p : j.at("mirror_pairs"))
            t.mirror_pairs.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
        t.mirror_axis = j.at("mirror_axis").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("topology: ") + e.what());
    }
    if (t.root < 0 || t.root >= t.joint_count() ||
        static_cast<int>(t.parent.size()) != t.joint_count())
        throw SchemaError("topology: parents/root inconsistent with joints");
    t.compute_hops();
    for (int h : t.hops)
        if (h < 0) throw SchemaError("topology: parent chain does not reach root");
    t.validate();
    return t;
}

inline nlohmann::json topology_to_json(const SkeletonTopology& t) {
    nlohmann::json j;
    j["joints"] = t.joint_names;
    j["parents"] = t.parent;
    j["root"] = t.root;
    auto pairs = nlohmann::json::array();
    for (auto [l, r] : t.mirror_pairs) pairs.push_back({l, r});
    j["mirror_pairs"] = pairs;
    j["mirror_axis"] = t.mirror_axis;
    return j;
}

inline SkeletonTopology load_topology(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IOError("cannot open topology file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("topology: ") + e.what());
    }
    return topology_from_json(j);
}

inline void save_topology(const SkeletonTopology& t, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IOError("cannot write topology file: " + path);
    out << topology_to_json(t).dump(2) << "\n";
}

}  // namespace exechecker
