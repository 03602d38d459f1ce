// Command-line front end: dataset synthesis/preparation, triplet training,
// embedding database management, classification, joint-level feedback, CTW
// alignment, and split evaluation.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "exechecker/align.hpp"
#include "exechecker/checkpoint.hpp"
#include "exechecker/database.hpp"
#include "exechecker/dataset.hpp"
#include "exechecker/joa.hpp"
#include "exechecker/svg.hpp"
#include "exechecker/synthetic.hpp"
#include "exechecker/triplet.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace exechecker;

namespace {

std::uint64_t resolve_seed(const CLI::Option* opt, std::uint64_t value) {
    if (opt->count() > 0) return value;
    if (const char* env = std::getenv("EXECHECKER_SEED")) return std::strtoull(env, nullptr, 10);
    return value;
}

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw IOError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    auto parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    std::ofstream out(path);
    if (!out) throw IOError("cannot write " + path);
    out << text;
}

StgatConfig stgat_config_from(const json& cfg) {
    if (cfg.contains("stgat")) return config_from_json(cfg.at("stgat"));
    StgatConfig c;
    return c;
}

void apply_train_json(const json& cfg, TrainConfig& tc) {
    if (!cfg.contains("train")) return;
    const json& t = cfg.at("train");
    if (t.contains("loss")) tc.loss = t.at("loss") == "margin" ? LossKind::Margin : LossKind::Ratio;
    tc.margin = t.value("margin", tc.margin);
    if (t.contains("distance")) tc.dist = distance_from_string(t.at("distance"));
    tc.lr = t.value("lr", tc.lr);
    tc.max_epochs = t.value("max_epochs", tc.max_epochs);
    tc.batch_size = t.value("batch_size", tc.batch_size);
    tc.triplet_cap = t.value("triplet_cap", tc.triplet_cap);
    tc.sample_len = t.value("sample_len", tc.sample_len);
    tc.crop_len = t.value("crop_len", tc.crop_len);
    tc.bone_vectors = t.value("bone_vectors", tc.bone_vectors);
    tc.weight_decay = t.value("weight_decay", tc.weight_decay);
}

Dataset load_normalized(const std::string& dir) {
    Dataset ds = load_dataset(dir);
    for (auto& s : ds.sequences) s = normalize(s, ds.topology);
    return ds;
}

const SkeletonSequence* paired_correct(const Dataset& ds, const SkeletonSequence& ie) {
    for (const auto& c : ds.sequences)
        if (c.exercise_id == ie.exercise_id && c.subject_id == ie.subject_id &&
            c.label == Label::Correct)
            return &c;
    for (const auto& c : ds.sequences)
        if (c.exercise_id == ie.exercise_id && c.label == Label::Correct) return &c;
    return nullptr;
}

// annotation as applicable to this sequence: mirrored copies ("_m" subjects)
// get the side-swapped joint set
JoAAnnotation annotation_for(const Dataset& ds, const SkeletonSequence& s) {
    const auto& ann = ds.annotations.at(s.exercise_id);
    if (s.subject_id.size() > 2 && s.subject_id.substr(s.subject_id.size() - 2) == "_m")
        return mirror_annotation(ann, ds.topology);
    return ann;
}

EmbedOptions embed_options_from_header(const json& header) {
    EmbedOptions eo;
    if (header.contains("train")) {
        const json& t = header.at("train");
        eo.sample_len = t.value("sample_len", eo.sample_len);
        eo.crop_len = t.value("crop_len", eo.crop_len);
        eo.bone_vectors = t.value("bone_vectors", eo.bone_vectors);
    }
    return eo;
}

int run(int argc, char** argv) {
    CLI::App app{"skeleton exercise-form checking: triplet-trained attention embeddings, "
                 "joint-level feedback, and a canonical-time-warping baseline"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a synthetic paired-motion dataset");
    std::string synth_out = "synth-data";
    int synth_exercises = 5, synth_pairs = 20, synth_frames = 80;
    double synth_noise = 0.004;
    std::uint64_t synth_seed = 42;
    synth->add_option("--out", synth_out, "output directory");
    synth->add_option("--exercises", synth_exercises, "number of built-in exercises (1-5)")
        ->check(CLI::Range(1, 5));
    synth->add_option("--pairs", synth_pairs, "subjects per exercise (one correct + one incorrect each)");
    synth->add_option("--frames", synth_frames, "nominal frames per clip");
    synth->add_option("--noise", synth_noise, "coordinate noise standard deviation");
    auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "generator seed");

    // ---- prepare ----
    auto* prepare = app.add_subcommand("prepare", "validate, normalize and optionally mirror-augment a dataset");
    std::string prep_data, prep_out = "prepared";
    bool prep_mirror = false;
    prepare->add_option("--data", prep_data, "input dataset directory")->required();
    prepare->add_option("--out", prep_out, "output directory");
    prepare->add_flag("--mirror", prep_mirror, "append left/right mirrored copies");

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "train per-exercise embedding models with triplet loss");
    std::string train_data, train_out = "models", train_exercise = "all", train_config;
    std::string train_loss = "ratio", train_dist = "euclidean";
    double train_margin = 0.2, train_lr = 0.001;
    int train_epochs = 10, train_batch = 20, train_cap = 0, train_sample = 160, train_crop = 128;
    bool train_bones = false;
    std::uint64_t train_seed = 0;
    train_cmd->add_option("--data", train_data, "prepared dataset directory")->required();
    train_cmd->add_option("--out", train_out, "output directory for checkpoints");
    train_cmd->add_option("--exercise", train_exercise, "exercise id or 'all'");
    train_cmd->add_option("--config", train_config, "JSON file with stgat/train sections");
    auto* loss_opt = train_cmd->add_option("--loss", train_loss, "ratio|margin")
        ->check(CLI::IsMember({"ratio", "margin"}));
    auto* margin_opt = train_cmd->add_option("--margin", train_margin, "margin for the hinge loss");
    auto* dist_opt = train_cmd->add_option("--distance", train_dist, "euclidean|cosine")
        ->check(CLI::IsMember({"euclidean", "cosine"}));
    auto* lr_opt = train_cmd->add_option("--lr", train_lr, "start learning rate");
    auto* ep_opt = train_cmd->add_option("--epochs", train_epochs, "maximum epochs");
    auto* bs_opt = train_cmd->add_option("--batch-size", train_batch, "triplets per batch");
    auto* cap_opt = train_cmd->add_option("--cap", train_cap, "per-epoch triplet subsample (0 = all)");
    auto* sl_opt = train_cmd->add_option("--sample-len", train_sample, "frames after resampling");
    auto* cl_opt = train_cmd->add_option("--crop-len", train_crop, "frames after cropping");
    train_cmd->add_flag("--bone-vectors", train_bones, "feed bone vectors instead of positions");
    auto* train_seed_opt = train_cmd->add_option("--seed", train_seed, "training seed");

    // ---- build-db ----
    auto* builddb = app.add_subcommand("build-db", "embed correct training sequences and calibrate thresholds");
    std::string db_data, db_models = "models", db_out = "models";
    builddb->add_option("--data", db_data, "prepared dataset directory")->required();
    builddb->add_option("--models", db_models, "directory with per-exercise checkpoints");
    builddb->add_option("--out", db_out, "output directory for embeddings.db");

    // ---- classify ----
    auto* classify_cmd = app.add_subcommand("classify", "label an input sequence as correct or incorrect");
    std::string cls_db, cls_models = "models", cls_input, cls_out;
    bool cls_nn = false;
    classify_cmd->add_option("--db", cls_db, "embedding database file")->required();
    classify_cmd->add_option("--models", cls_models, "directory with per-exercise checkpoints");
    classify_cmd->add_option("--input", cls_input, "sequence JSON file")->required();
    classify_cmd->add_option("--out", cls_out, "write the result JSON here (stdout otherwise)");
    classify_cmd->add_flag("--nn", cls_nn, "nearest-neighbor decision instead of mean distance");

    // ---- explain ----
    auto* explain_cmd = app.add_subcommand("explain", "highlight the joints behind an incorrect execution");
    std::string exp_model, exp_input, exp_ann, exp_out = "explain-out";
    int exp_topk = 5, exp_block = -1;
    bool exp_sent = false;
    explain_cmd->add_option("--model", exp_model, "model checkpoint")->required();
    explain_cmd->add_option("--input", exp_input, "sequence JSON file")->required();
    explain_cmd->add_option("--annotation", exp_ann, "optional ground-truth annotation JSON");
    explain_cmd->add_option("--out", exp_out, "output directory");
    explain_cmd->add_option("--top-k", exp_topk, "joints to highlight");
    explain_cmd->add_option("--block", exp_block, "attention block to score (-1 = last)");
    explain_cmd->add_flag("--sent", exp_sent, "aggregate attention sent instead of received");

    // ---- align ----
    auto* align_cmd = app.add_subcommand("align", "CTW-align a correct/incorrect pair and score joints");
    std::string al_ce, al_ie, al_topo, al_out = "align-out";
    int al_k = 0, al_iter = 20;
    bool al_per_frame = false;
    align_cmd->add_option("--ce", al_ce, "correct sequence JSON")->required();
    align_cmd->add_option("--ie", al_ie, "incorrect sequence JSON")->required();
    align_cmd->add_option("--topology", al_topo, "topology JSON")->required();
    align_cmd->add_option("--out", al_out, "output directory");
    align_cmd->add_option("--k", al_k, "CCA components (0 = min(3N, 10))");
    align_cmd->add_option("--max-iter", al_iter, "maximum alternation steps");
    align_cmd->add_flag("--per-frame", al_per_frame, "average duplicate alignments per IE frame");

    // ---- evaluate ----
    auto* eval_cmd = app.add_subcommand("evaluate", "joint-localization scores for attention and CTW");
    std::string ev_data, ev_models = "models", ev_out = "eval-out", ev_holdout;
    eval_cmd->add_option("--data", ev_data, "prepared dataset directory")->required();
    eval_cmd->add_option("--models", ev_models, "directory with per-exercise checkpoints");
    eval_cmd->add_option("--out", ev_out, "output directory");
    eval_cmd->add_option("--holdout", ev_holdout, "comma-separated held-out subject ids (default: evaluate all)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // one-line diagnostic on stderr
        return 2;
    }

    if (synth->parsed()) {
        auto specs = builtin_exercises();
        specs.resize(static_cast<std::size_t>(synth_exercises));
        for (auto& s : specs) {
            s.num_frames = synth_frames;
            s.noise_std = synth_noise;
        }
        Dataset ds = make_synthetic_dataset(specs, synth_pairs,
                                            resolve_seed(synth_seed_opt, synth_seed));
        save_dataset(ds, synth_out);
        std::cout << "wrote " << ds.sequences.size() << " sequences for " << specs.size()
                  << " exercises under " << synth_out << "\n";
        return 0;
    }

    if (prepare->parsed()) {
        Dataset ds = load_dataset(prep_data);
        Dataset out;
        out.topology = ds.topology;
        out.annotations = ds.annotations;
        for (const auto& s : ds.sequences) {
            s.validate(ds.topology);
            out.sequences.push_back(normalize(s, ds.topology));
        }
        if (prep_mirror) {
            std::size_t n = out.sequences.size();
            for (std::size_t i = 0; i < n; ++i) {
                SkeletonSequence m = mirror(out.sequences[i], ds.topology);
                m.subject_id += "_m";
                out.sequences.push_back(std::move(m));
            }
        }
        save_dataset(out, prep_out);
        std::cout << "prepared " << out.sequences.size() << " sequences under " << prep_out << "\n";
        return 0;
    }

    if (train_cmd->parsed()) {
        json cfg = load_config_file(train_config);
        StgatConfig sc = stgat_config_from(cfg);
        TrainConfig tc;
        apply_train_json(cfg, tc);
        if (loss_opt->count()) tc.loss = train_loss == "margin" ? LossKind::Margin : LossKind::Ratio;
        if (margin_opt->count()) tc.margin = train_margin;
        if (dist_opt->count()) tc.dist = distance_from_string(train_dist);
        if (lr_opt->count()) tc.lr = train_lr;
        if (ep_opt->count()) tc.max_epochs = train_epochs;
        if (bs_opt->count()) tc.batch_size = train_batch;
        if (cap_opt->count()) tc.triplet_cap = train_cap;
        if (sl_opt->count()) tc.sample_len = train_sample;
        if (cl_opt->count()) tc.crop_len = train_crop;
        if (train_bones) tc.bone_vectors = true;
        tc.seed = resolve_seed(train_seed_opt, train_seed);

        Dataset ds = load_normalized(train_data);
        std::vector<std::string> exercises =
            train_exercise == "all" ? ds.exercise_ids() : std::vector<std::string>{train_exercise};
        fs::create_directories(train_out);
        for (const auto& ex : exercises) {
            auto correct = ds.select(ex, Label::Correct);
            auto incorrect = ds.select(ex, Label::Incorrect);
            Rng mrng(tc.seed * 7919 + hash64(ex));
            StgatModel model = StgatModel::init(sc, mrng);
            TrainResult res = train(correct, incorrect, ds.topology, tc, model);
            json meta;
            meta["exercise_id"] = ex;
            meta["train"] = tc.to_json();
            meta["topology"] = topology_to_json(ds.topology);
            std::string model_path = (fs::path(train_out) / (ex + ".model.bin")).string();
            save_model(model, model_path, meta);
            json side;
            side["stgat"] = config_to_json(sc);
            side["train"] = tc.to_json();
            write_text((fs::path(train_out) / (ex + ".config.json")).string(),
                       side.dump(2) + "\n");
            json metrics = res.to_json();
            metrics["exercise_id"] = ex;
            write_text((fs::path(train_out) / (ex + ".metrics.json")).string(),
                       metrics.dump(2) + "\n");
            std::cout << ex << ": " << res.history.size() << " batches, final loss "
                      << res.history.back().loss << ", checkpoint " << model_path << "\n";
        }
        return 0;
    }

    if (builddb->parsed()) {
        Dataset ds = load_normalized(db_data);
        EmbeddingDatabase all;
        bool first = true;
        for (const auto& ex : ds.exercise_ids()) {
            std::string model_path = (fs::path(db_models) / (ex + ".model.bin")).string();
            if (!fs::exists(model_path)) {
                std::cout << "skipping " << ex << " (no checkpoint)\n";
                continue;
            }
            json header;
            StgatModel model = load_model(model_path, &header);
            EmbedOptions eo = embed_options_from_header(header);
            DistanceKind dist = DistanceKind::Euclidean;
            if (header.contains("train") && header.at("train").contains("distance"))
                dist = distance_from_string(header.at("train").at("distance"));
            double train_acc = 0.0;
            EmbeddingDatabase db = build_db(model, ds.select(ex, Label::Correct),
                                            ds.select(ex, Label::Incorrect), ds.topology, eo,
                                            model_path, dist, &train_acc);
            std::cout << ex << ": " << db.records.size() << " embeddings, threshold "
                      << db.thresholds.at(ex) << ", training-split accuracy " << train_acc << "\n";
            if (first) {
                all = db;
                first = false;
            } else {
                all.records.insert(all.records.end(), db.records.begin(), db.records.end());
                all.thresholds.insert(db.thresholds.begin(), db.thresholds.end());
            }
        }
        if (first) throw EmptyError("build-db: no exercise had a checkpoint");
        all.model_ref = db_models;
        fs::create_directories(db_out);
        std::string db_path = (fs::path(db_out) / "embeddings.db").string();
        save_db(all, db_path);
        {
            // keep the topology with the database so classification is self-contained
            Checkpoint ck = load_checkpoint(db_path);
            std::vector<std::pair<std::string, Tensor>> tensors;
            for (const auto& entry : ck.header.at("tensors"))
                tensors.emplace_back(entry.at("name").get<std::string>(),
                                     ck.require(entry.at("name").get<std::string>()));
            json meta = ck.header;
            meta.erase("tensors");
            meta.erase("format");
            meta["topology"] = topology_to_json(ds.topology);
            save_checkpoint(db_path, tensors, meta);
        }
        std::cout << "database: " << db_path << "\n";
        return 0;
    }

    if (classify_cmd->parsed()) {
        Checkpoint ck = load_checkpoint(cls_db);
        SkeletonTopology topo = topology_from_json(ck.header.at("topology"));
        EmbeddingDatabase db = load_db(cls_db);
        SkeletonSequence input = load_sequence(cls_input, topo);
        SkeletonSequence norm = normalize(input, topo);
        std::string model_path = (fs::path(cls_models) / (input.exercise_id + ".model.bin")).string();
        if (!fs::exists(model_path))
            throw UnknownExerciseError("classify: no checkpoint for " + input.exercise_id);
        StgatModel model = load_model(model_path);
        ClassificationResult r = classify(norm, db, model, topo,
                                          cls_nn ? ThresholdPolicy::NearestNeighbor
                                                 : ThresholdPolicy::MeanDistance);
        json out = r.to_json();
        out["exercise_id"] = input.exercise_id;
        out["subject_id"] = input.subject_id;
        if (cls_out.empty())
            std::cout << out.dump(2) << "\n";
        else
            write_text(cls_out, out.dump(2) + "\n");
        return 0;
    }

    if (explain_cmd->parsed()) {
        json header;
        StgatModel model = load_model(exp_model, &header);
        SkeletonTopology topo = topology_from_json(header.at("topology"));
        SkeletonSequence input = load_sequence(exp_input, topo);
        SkeletonSequence norm = normalize(input, topo);
        EmbedOptions eo = embed_options_from_header(header);
        ForwardResult fwd = embed_sequence(model, norm, topo, eo, true);
        auto raw = joint_attention_scores(fwd.maps, exp_block,
                                          exp_sent ? ScoreAxis::Sent : ScoreAxis::Received);
        JoAAnnotation ann;
        bool has_ann = !exp_ann.empty();
        if (has_ann) ann = load_annotation(exp_ann, topo);
        JointScoreReport rep = make_report(input, ScoreSource::Attention, raw, exp_topk,
                                           has_ann ? &ann : nullptr);
        // render the model-input frames so the drawn center frame matches the maps
        SkeletonSequence shown = prepare_model_input(norm, topo, eo);
        std::string svg = render_skeleton_svg(shown, topo, rep.normalized, rep.top,
                                              has_ann ? &ann : nullptr);
        fs::create_directories(exp_out);
        write_text((fs::path(exp_out) / "report.json").string(), rep.to_json().dump(2) + "\n");
        write_text((fs::path(exp_out) / "skeleton.svg").string(), svg);
        std::cout << "top-" << exp_topk << " joints:";
        for (int j : rep.top) std::cout << " " << topo.joint_names[static_cast<std::size_t>(j)];
        if (rep.joa >= 0) std::cout << "  (joa " << rep.joa << ")";
        std::cout << "\nreport under " << exp_out << "\n";
        return 0;
    }

    if (align_cmd->parsed()) {
        SkeletonTopology topo = load_topology(al_topo);
        SkeletonSequence ce = normalize(load_sequence(al_ce, topo), topo);
        SkeletonSequence ie = normalize(load_sequence(al_ie, topo), topo);
        CtwResult r = ctw(ce, ie, al_k, al_iter);
        auto raw = ctw_joint_scores(ce, ie, r.path,
                                    al_per_frame ? PathAggregation::PerFrameIE
                                                 : PathAggregation::PerStep);
        auto adjusted = hop_adjust(raw, topo);
        json out;
        auto path_json = json::array();
        for (auto [i, j] : r.path) path_json.push_back({i, j});
        out["path"] = path_json;
        out["objectives"] = r.objectives;
        out["correlations"] = r.projections.correlations;
        out["raw_scores"] = raw;
        out["adjusted_scores"] = adjusted;
        out["normalized_scores"] = minmax_normalize(adjusted);
        fs::create_directories(al_out);
        write_text((fs::path(al_out) / "align.json").string(), out.dump(2) + "\n");
        std::cout << "aligned " << ce.num_frames << "x" << ie.num_frames << " in "
                  << r.objectives.size() << " iterations, final objective "
                  << (r.objectives.empty() ? 0.0 : r.objectives.back()) << "\n"
                  << "report under " << al_out << "\n";
        return 0;
    }

    if (eval_cmd->parsed()) {
        Dataset ds = load_normalized(ev_data);
        Dataset eval_ds = ds;
        if (!ev_holdout.empty()) {
            std::set<std::string> holdout;
            std::string cur;
            for (char c : ev_holdout + ",") {
                if (c == ',') {
                    if (!cur.empty()) holdout.insert(cur);
                    cur.clear();
                } else {
                    cur += c;
                }
            }
            eval_ds = split_by_subjects(ds, holdout).second;
        }

        json rows = json::array();
        std::string csv = "exercise,ctw_joa,attention_joa\n";
        for (const auto& ex : eval_ds.exercise_ids()) {
            std::string model_path = (fs::path(ev_models) / (ex + ".model.bin")).string();
            if (!fs::exists(model_path)) {
                std::cout << "skipping " << ex << " (no checkpoint)\n";
                continue;
            }
            json header;
            StgatModel model = load_model(model_path, &header);
            EmbedOptions eo = embed_options_from_header(header);

            double att_sum = 0, ctw_sum = 0;
            int n = 0;
            for (const auto& s : eval_ds.sequences) {
                if (s.exercise_id != ex || s.label != Label::Incorrect) continue;
                JoAAnnotation ann = annotation_for(ds, s);
                ForwardResult fwd = embed_sequence(model, s, ds.topology, eo, true);
                auto att_norm = minmax_normalize(joint_attention_scores(fwd.maps));
                att_sum += joa_score(att_norm, ann);
                const SkeletonSequence* ce = paired_correct(ds, s);
                if (!ce) throw AnnotationError("evaluate: no correct reference for " + ex);
                CtwResult ctw_res = ctw(*ce, s);
                auto adj = hop_adjust(ctw_joint_scores(*ce, s, ctw_res.path), ds.topology);
                ctw_sum += joa_score(minmax_normalize(adj), ann);
                ++n;
            }
            if (n == 0) throw AnnotationError("evaluate: no incorrect sequences for " + ex);
            char line[160];
            std::snprintf(line, sizeof(line), "%s,%.4f,%.4f\n", ex.c_str(), ctw_sum / n,
                          att_sum / n);
            csv += line;
            rows.push_back({{"exercise", ex}, {"ctw_joa", ctw_sum / n},
                            {"attention_joa", att_sum / n}, {"sequences", n}});
            std::cout << ex << ": ctw " << ctw_sum / n << ", attention " << att_sum / n << " ("
                      << n << " sequences)\n";
        }
        fs::create_directories(ev_out);
        write_text((fs::path(ev_out) / "evaluate.csv").string(), csv);
        write_text((fs::path(ev_out) / "evaluate.json").string(), rows.dump(2) + "\n");
        std::cout << "reports under " << ev_out << "\n";
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
