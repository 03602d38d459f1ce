#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "exechecker/annotation.hpp"
#include "exechecker/errors.hpp"
#include "exechecker/sequence.hpp"
#include "exechecker/topology.hpp"

namespace exechecker {

// On-disk layout:
//   <dir>/topology.json
//   <dir>/annotations/<exercise>.json
//   <dir>/sequences/<exercise>/<subject>_<label>.json
struct Dataset {
    SkeletonTopology topology;
    std::vector<SkeletonSequence> sequences;
    std::map<std::string, JoAAnnotation> annotations;

    std::vector<std::string> exercise_ids() const {
        std::set<std::string> seen;
        std::vector<std::string> out;
        for (const auto& s : sequences)
            if (seen.insert(s.exercise_id).second) out.push_back(s.exercise_id);
        std::sort(out.begin(), out.end());
        return out;
    }

    std::vector<const SkeletonSequence*> select(const std::string& exercise, Label label) const {
        std::vector<const SkeletonSequence*> out;
        for (const auto& s : sequences)
            if (s.exercise_id == exercise && s.label == label) out.push_back(&s);
        return out;
    }
};

inline void save_dataset(const Dataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "annotations", ec);
    save_topology(ds.topology, (fs::path(dir) / "topology.json").string());
    for (const auto& [ex, ann] : ds.annotations)
        save_annotation(ann, ds.topology, (fs::path(dir) / "annotations" / (ex + ".json")).string());
    for (const auto& s : ds.sequences) {
        fs::path d = fs::path(dir) / "sequences" / s.exercise_id;
        fs::create_directories(d, ec);
        save_sequence(s, ds.topology, (d / (s.subject_id + "_" + to_string(s.label) + ".json")).string());
    }
}

inline Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    Dataset ds;
    fs::path root(dir);
    if (!fs::exists(root / "topology.json"))
        throw IOError("dataset: missing topology.json under " + dir);
    ds.topology = load_topology((root / "topology.json").string());
    fs::path anndir = root / "annotations";
    if (fs::exists(anndir)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(anndir))
            if (e.path().extension() == ".json") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            auto a = load_annotation(f.string(), ds.topology);
            ds.annotations[a.exercise_id] = a;
        }
    }
    fs::path seqdir = root / "sequences";
    if (fs::exists(seqdir)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::recursive_directory_iterator(seqdir))
            if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) ds.sequences.push_back(load_sequence(f.string(), ds.topology));
    }
    return ds;
}

// Split by subject id: subjects whose id is in holdout go to the second part.
inline std::pair<Dataset, Dataset> split_by_subjects(const Dataset& ds,
                                                     const std::set<std::string>& holdout) {
    Dataset train, test;
    train.topology = test.topology = ds.topology;
    train.annotations = test.annotations = ds.annotations;
    for (const auto& s : ds.sequences)
        (holdout.count(s.subject_id) ? test : train).sequences.push_back(s);
    return {train, test};
}

}  // namespace exechecker
