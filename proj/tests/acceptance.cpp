// Acceptance suite: runs every criterion end to end and prints one line per
// criterion. Exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "exechecker/align.hpp"
#include "exechecker/database.hpp"
#include "exechecker/joa.hpp"
#include "exechecker/svg.hpp"
#include "exechecker/synthetic.hpp"
#include "exechecker/triplet.hpp"
#include "helpers.hpp"

using namespace exechecker;
using Clock = std::chrono::steady_clock;

namespace {

struct Check {
    std::vector<std::string> failures;
    void require(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
};

struct Criterion {
    std::string name;
    std::function<void(Check&)> fn;
};

// ---- shared benchmark fixtures (criteria 11 and 12) ----

struct Benchmark {
    SkeletonTopology topo = stick_figure_17();
    std::vector<SyntheticSpec> specs = builtin_exercises();
    Dataset train_ds, test_ds;
    std::map<std::string, JoAAnnotation> annotations;

    Benchmark() {
        Dataset ds = make_synthetic_dataset(specs, 20, 42);
        for (auto& s : ds.sequences) s = normalize(s, topo);
        annotations = ds.annotations;
        auto parts = split_by_subjects(ds, {"s14", "s15", "s16", "s17", "s18", "s19"});
        train_ds = std::move(parts.first);
        test_ds = std::move(parts.second);
    }

    static StgatConfig model_config() {
        StgatConfig cfg;
        cfg.tau = 3;
        cfg.heads = 4;
        cfg.blocks = 2;
        cfg.channels = {12, 24};
        cfg.embed_dim = 24;
        return cfg;
    }

    static TrainConfig train_config(std::uint64_t seed) {
        TrainConfig tc;
        tc.lr = 0.02;
        tc.max_epochs = 6;
        tc.batch_size = 20;
        tc.triplet_cap = 160;
        tc.sample_len = 18;
        tc.crop_len = 12;
        tc.seed = seed;
        return tc;
    }
};

// criterion 3: the loss is non-differentiable at the anchor-swap boundary, so
// draws sitting within 1e-3 of it are re-drawn
bool near_swap_boundary(const StgatModel& model, const Tensor& xa, const Tensor& xp,
                        const Tensor& xn) {
    Tensor ea = stgat_forward(xa, model).embedding;
    Tensor ep = stgat_forward(xp, model).embedding;
    Tensor en = stgat_forward(xn, model).embedding;
    double dan = distance(ea.data(), en.data(), DistanceKind::Euclidean);
    double dpn = distance(ep.data(), en.data(), DistanceKind::Euclidean);
    return std::fabs(dan - dpn) < 1e-3;
}

}  // namespace

int main() {
    std::vector<Criterion> criteria;

    criteria.push_back({"triplet combinatorics: (60,60)->106200 and (10,10)->450 exactly",
                        [](Check& c) {
        c.require(compose_triplets(60, 60).size() == 106200, "C(60,2)*60 != 106200");
        c.require(compose_triplets(10, 10).size() == 450, "C(10,2)*10 != 450");
    }});

    criteria.push_back({"loss identities: ratio(d,d)=0.25, ratio in (0,1), hinge zero/non-negative",
                        [](Check& c) {
        Rng rng(201);
        for (int i = 0; i < 100; ++i) {
            double d = rng.uniform(0.0, 10.0);
            c.require(ratio_loss(d, d) == 0.25, "ratio_loss(d,d) not exactly 0.25");
        }
        for (int i = 0; i < 100000; ++i) {
            double ap = rng.uniform(0.0, 30.0), an = rng.uniform(0.0, 30.0);
            double l = ratio_loss(ap, an);
            c.require(l > 0.0 && l < 1.0, "ratio_loss left (0,1)");
        }
        for (int i = 0; i < 100; ++i) {
            double mu = rng.uniform(0.01, 3.0);
            c.require(margin_loss(0.0, mu, mu) == 0.0, "margin_loss(0,mu,mu) != 0");
        }
        for (int i = 0; i < 100000; ++i) {
            double l = margin_loss(rng.uniform(0, 5), rng.uniform(0, 5), rng.uniform(0.01, 2));
            c.require(l >= 0.0, "hinge went negative");
        }
    }});

    criteria.push_back({"gradient correctness: tiny model, ratio loss, 10 draws, rel err < 1e-4",
                        [](Check& c) {
        StgatConfig cfg;
        cfg.tau = 3;
        cfg.heads = 2;
        cfg.blocks = 1;
        cfg.channels = {8};
        cfg.embed_dim = 6;
        int good = 0;
        double worst = 0.0;
        for (std::uint64_t draw = 0; good < 10 && draw < 60; ++draw) {
            Rng rng(3000 + draw * 13);
            StgatModel model = StgatModel::init(cfg, rng);
            Tensor xa = Tensor::uniform({6, 4, 3}, rng, -0.8, 0.8);
            Tensor xp = Tensor::uniform({6, 4, 3}, rng, -0.8, 0.8);
            Tensor xn = Tensor::uniform({6, 4, 3}, rng, -0.8, 0.8);
            if (near_swap_boundary(model, xa, xp, xn)) continue;
            ++good;
            auto loss_graph = [&]() {
                Tensor ea = stgat_forward(xa, model).embedding;
                Tensor ep = stgat_forward(xp, model).embedding;
                Tensor en = stgat_forward(xn, model).embedding;
                double dan = distance(ea.data(), en.data(), DistanceKind::Euclidean);
                double dpn = distance(ep.data(), en.data(), DistanceKind::Euclidean);
                auto [sa, sp] = anchor_swap(ea, ep, dan, dpn);
                return ratio_loss_t(distance_t(sa, sp, DistanceKind::Euclidean),
                                    distance_t(sa, en, DistanceKind::Euclidean));
            };
            model.zero_grad();
            backward(loss_graph());
            auto eval = [&]() { return loss_graph().value(); };
            for (auto& [name, p] : model.named_parameters()) {
                auto fd = testutil::fd_gradient(p, eval);
                worst = std::max(worst, testutil::max_rel_err(p.grad(), fd));
            }
        }
        c.require(good == 10, "could not collect 10 draws away from the swap boundary");
        c.require(worst < 1e-4, "max relative gradient error " + std::to_string(worst));
    }});

    criteria.push_back({"attention rows are distributions over 100 random forward passes",
                        [](Check& c) {
        StgatConfig cfg;
        cfg.tau = 3;
        cfg.heads = 4;
        cfg.blocks = 2;
        cfg.channels = {8, 8};
        cfg.embed_dim = 8;
        Rng rng(401);
        for (int pass = 0; pass < 100; ++pass) {
            StgatModel model = StgatModel::init(cfg, rng);
            int T = 4 + static_cast<int>(rng.randint(5));
            int N = 3 + static_cast<int>(rng.randint(5));
            Tensor x = Tensor::uniform({T, N, 3}, rng, -1, 1);
            auto res = stgat_forward(x, model, true);
            for (int b = 0; b < cfg.blocks; ++b)
                for (int t = 0; t < T; ++t)
                    for (int h = 0; h < cfg.heads; ++h)
                        for (int q = 0; q < N; ++q) {
                            double row = 0.0;
                            for (int k = 0; k < cfg.tau; ++k)
                                for (int j = 0; j < N; ++j) {
                                    double v = res.maps.at(b, t, h, k, q, j);
                                    if (v < 0.0) c.require(false, "negative attention weight");
                                    row += v;
                                }
                            if (std::fabs(row - 1.0) > 1e-9)
                                c.require(false, "attention row sum off by " +
                                                     std::to_string(row - 1.0));
                        }
        }
    }});

    criteria.push_back({"dtw equals the exhaustive-enumeration optimum on 200 short pairs",
                        [](Check& c) {
        Rng rng(501);
        for (int trial = 0; trial < 200; ++trial) {
            int t1 = 1 + static_cast<int>(rng.randint(6));
            int t2 = 1 + static_cast<int>(rng.randint(6));
            int d = 1 + static_cast<int>(rng.randint(3));
            Mat x(t1, d), y(t2, d);
            for (auto& v : x.a) v = rng.uniform(-1, 1);
            for (auto& v : y.a) v = rng.uniform(-1, 1);
            DtwResult r = dtw(x, y);
            c.require(r.cost == testutil::brute_dtw_cost(x, y), "dp cost != brute minimum");
            c.require(warp_path_valid(r.path, t1, t2), "invalid warp path");
        }
    }});

    criteria.push_back({"ctw: objective non-increasing on 50 pairs; identical inputs converge at once",
                        [](Check& c) {
        SkeletonTopology topo = testutil::chain_topology(4);
        Rng rng(601);
        for (int trial = 0; trial < 50; ++trial) {
            SkeletonSequence a =
                testutil::random_sequence(topo, 4 + static_cast<int>(rng.randint(9)), rng);
            SkeletonSequence b =
                testutil::random_sequence(topo, 4 + static_cast<int>(rng.randint(9)), rng);
            CtwResult r = ctw(normalize(a, topo), normalize(b, topo));
            c.require(!r.objectives.empty(), "no objective recorded");
            for (std::size_t i = 1; i < r.objectives.size(); ++i)
                c.require(r.objectives[i] <= r.objectives[i - 1] + 1e-9,
                          "objective increased between iterations");
            c.require(warp_path_valid(r.path, a.num_frames, b.num_frames), "invalid path");
        }
        SkeletonSequence s = normalize(testutil::random_sequence(topo, 9, rng), topo);
        CtwResult same = ctw(s, s);
        c.require(same.objectives.size() == 1, "identical inputs took more than one iteration");
        c.require(same.objectives[0] < 1e-9, "identical inputs left nonzero cost");
        for (int i = 0; i < s.num_frames; ++i)
            c.require(same.path[static_cast<std::size_t>(i)] == std::make_pair(i, i),
                      "identical inputs not on the diagonal");
    }});

    criteria.push_back({"cca matches the whitened-SVD oracle within 1e-8; self-correlation is 1",
                        [](Check& c) {
        Rng rng(701);
        for (int trial = 0; trial < 50; ++trial) {
            int t = 30 + static_cast<int>(rng.randint(50));
            int d1 = 2 + static_cast<int>(rng.randint(5));
            int d2 = 2 + static_cast<int>(rng.randint(5));
            int k = std::min(d1, d2);
            Mat x(t, d1), y(t, d2);
            for (auto& v : x.a) v = rng.uniform(-1.5, 1.5);
            Mat a(d1, d2);
            for (auto& v : a.a) v = rng.uniform(-1, 1);
            for (int i = 0; i < t; ++i)
                for (int j = 0; j < d2; ++j) {
                    double acc = 0.3 * rng.normal();
                    for (int q = 0; q < d1; ++q) acc += x(i, q) * a(q, j);
                    y(i, j) = acc;
                }
            CcaResult r = cca(x, y, k);
            auto oracle = testutil::oracle_cca_correlations(x, y, k);
            for (int q = 0; q < k; ++q)
                c.require(std::fabs(r.correlations[static_cast<std::size_t>(q)] -
                                    oracle[static_cast<std::size_t>(q)]) < 1e-8,
                          "correlation differs from oracle");
        }
        Mat x(100, 5);
        for (auto& v : x.a) v = rng.uniform(-2, 2);
        c.require(std::fabs(cca(x, x, 1).correlations[0] - 1.0) < 1e-6,
                  "self-correlation not 1 within 1e-6");
    }});

    criteria.push_back({"joa arithmetic: indicator -> 1, hand example -> 0.75, constant raw -> 0",
                        [](Check& c) {
        auto ann = make_annotation("e", {0, 2});
        c.require(joa_score({1.0, 0.0, 1.0, 0.0}, ann) == 1.0, "indicator != 1");
        c.require(joa_score({1.0, 0.3, 0.5, 0.9}, ann) == 0.75, "hand example != 0.75");
        c.require(joa_score(minmax_normalize({3.3, 3.3, 3.3, 3.3}), ann) == 0.0,
                  "constant raw scores != 0 via degenerate min-max");
    }});

    criteria.push_back({"hop adjustment s/(h+1) on the 17-joint figure, root divisor 1",
                        [](Check& c) {
        SkeletonTopology topo = stick_figure_17();
        std::vector<int> expected_hops = {0, 1, 2, 3, 1, 2, 3, 1, 2, 3, 4, 3, 4, 5, 3, 4, 5};
        for (int j = 0; j < 17; ++j)
            c.require(topo.hops[static_cast<std::size_t>(j)] ==
                          expected_hops[static_cast<std::size_t>(j)],
                      "hop table mismatch");
        std::vector<double> raw(17, 2.0);
        auto adj = hop_adjust(raw, topo);
        c.require(adj[0] == 2.0, "root divisor not 1");
        for (int j = 0; j < 17; ++j)
            c.require(adj[static_cast<std::size_t>(j)] ==
                          2.0 / (expected_hops[static_cast<std::size_t>(j)] + 1),
                      "adjusted score mismatch");
    }});

    criteria.push_back({"data transforms: mirror involution bit-exact, bone round trip 1e-12, "
                        "normalize idempotent",
                        [](Check& c) {
        SkeletonTopology topo = stick_figure_17();
        Rng rng(1001);
        for (int trial = 0; trial < 20; ++trial) {
            SkeletonSequence s =
                testutil::random_sequence(topo, 2 + static_cast<int>(rng.randint(20)), rng);
            c.require(mirror(mirror(s, topo), topo).frames == s.frames,
                      "mirror twice is not the identity");
            SkeletonSequence rec = bones_to_positions(to_bone_vectors(s, topo), topo);
            for (int t = 0; t < s.num_frames; ++t)
                for (int j = 0; j < s.num_joints; ++j)
                    for (int k = 0; k < 3; ++k) {
                        double expect = s.pos(t, j)[k] - s.pos(t, topo.root)[k];
                        if (std::fabs(rec.pos(t, j)[k] - expect) > 1e-12)
                            c.require(false, "bone round trip above 1e-12");
                    }
            SkeletonSequence n1 = normalize(s, topo);
            SkeletonSequence n2 = normalize(n1, topo);
            for (std::size_t i = 0; i < n1.frames.size(); ++i)
                if (std::fabs(n1.frames[i] - n2.frames[i]) > 1e-12)
                    c.require(false, "normalize not idempotent within 1e-12");
        }
    }});

    criteria.push_back({"synthetic end-to-end: accuracy >= 90% over 5 seeds, attention beats the "
                        "permutation null (p<0.05), ctw puts perturbed joints above the median",
                        [](Check& c) {
        Benchmark bench;
        StgatConfig cfg = Benchmark::model_config();

        double acc_sum = 0.0;
        std::vector<std::pair<std::vector<double>, std::vector<int>>> scored;
        double observed_sum = 0.0;
        int observed_n = 0;

        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            TrainConfig tc = Benchmark::train_config(seed);
            int ok = 0, n = 0;
            for (const auto& spec : bench.specs) {
                auto correct = bench.train_ds.select(spec.exercise_id, Label::Correct);
                auto incorrect = bench.train_ds.select(spec.exercise_id, Label::Incorrect);
                Rng mrng(tc.seed * 7919 + hash64(spec.exercise_id));
                StgatModel model = StgatModel::init(cfg, mrng);
                train(correct, incorrect, bench.topo, tc, model);
                EmbedOptions eo;
                eo.sample_len = tc.sample_len;
                eo.crop_len = tc.crop_len;
                EmbeddingDatabase db = build_db(model, correct, incorrect, bench.topo, eo, "m",
                                                tc.dist);
                for (const auto& s : bench.test_ds.sequences) {
                    if (s.exercise_id != spec.exercise_id) continue;
                    ClassificationResult r = classify(s, db, model, bench.topo);
                    ok += (r.label == s.label) ? 1 : 0;
                    ++n;
                    if (s.label == Label::Incorrect) {
                        auto fwd = embed_sequence(model, s, bench.topo, eo, true);
                        auto norm = minmax_normalize(joint_attention_scores(fwd.maps));
                        const auto& ann = bench.annotations.at(spec.exercise_id);
                        observed_sum += joa_score(norm, ann);
                        ++observed_n;
                        scored.emplace_back(norm, ann.joints);
                    }
                }
            }
            acc_sum += static_cast<double>(ok) / n;
        }
        double mean_acc = acc_sum / 5.0;
        std::printf("    (a) mean classification accuracy over 5 seeds: %.3f\n", mean_acc);
        c.require(mean_acc >= 0.90, "mean accuracy below 0.90");

        double observed_mean = observed_sum / observed_n;
        Rng prng(20250808);
        double p = testutil::permutation_p_value(scored, observed_mean, 1000, prng);
        std::printf("    (b) attention joa %.3f over %d reports, permutation p = %.4f\n",
                    observed_mean, observed_n, p);
        c.require(p < 0.05, "permutation p-value not below 0.05");

        int all_above = 0, total = 0;
        for (const auto& spec : bench.specs) {
            for (const auto& ie : bench.test_ds.sequences) {
                if (ie.exercise_id != spec.exercise_id || ie.label != Label::Incorrect) continue;
                const SkeletonSequence* ce = nullptr;
                for (const auto& cand : bench.test_ds.sequences)
                    if (cand.exercise_id == ie.exercise_id && cand.subject_id == ie.subject_id &&
                        cand.label == Label::Correct)
                        ce = &cand;
                if (!ce) {
                    c.require(false, "missing paired correct sequence");
                    continue;
                }
                CtwResult r = ctw(*ce, ie);
                auto adj = hop_adjust(ctw_joint_scores(*ce, ie, r.path), bench.topo);
                std::vector<double> sorted = adj;
                std::sort(sorted.begin(), sorted.end());
                double median = sorted[sorted.size() / 2];
                bool above = true;
                for (int pj : spec.perturb_joints)
                    above = above && adj[static_cast<std::size_t>(pj)] > median;
                all_above += above ? 1 : 0;
                ++total;
            }
        }
        std::printf("    (c) ctw: perturbed joints above the median in %d/%d sequences\n",
                    all_above, total);
        c.require(all_above == total, "a perturbed joint fell to or below the median");
    }});

    criteria.push_back({"ablation grid: euclidean/cosine x positions/bone-vectors runs to "
                        "completion and emits the 4-row table",
                        [](Check& c) {
        Benchmark bench;
        StgatConfig cfg = Benchmark::model_config();
        struct Variant {
            const char* name;
            DistanceKind dist;
            bool bones;
        };
        std::vector<Variant> variants = {{"euclidean", DistanceKind::Euclidean, false},
                                         {"cosine", DistanceKind::Cosine, false},
                                         {"euclidean-bone", DistanceKind::Euclidean, true},
                                         {"cosine-bone", DistanceKind::Cosine, true}};
        std::string csv = "config";
        for (const auto& spec : bench.specs) csv += "," + spec.exercise_id;
        csv += ",mean\n";
        std::printf("    %-16s", "config");
        for (const auto& spec : bench.specs) std::printf(" %10s", spec.exercise_id.c_str());
        std::printf(" %10s\n", "mean");
        int rows = 0;
        for (const auto& v : variants) {
            TrainConfig tc = Benchmark::train_config(1);
            tc.max_epochs = 2;
            tc.triplet_cap = 80;
            tc.dist = v.dist;
            tc.bone_vectors = v.bones;
            csv += v.name;
            std::printf("    %-16s", v.name);
            double mean = 0.0;
            bool finite = true;
            for (const auto& spec : bench.specs) {
                auto correct = bench.train_ds.select(spec.exercise_id, Label::Correct);
                auto incorrect = bench.train_ds.select(spec.exercise_id, Label::Incorrect);
                Rng mrng(tc.seed * 7919 + hash64(spec.exercise_id));
                StgatModel model = StgatModel::init(cfg, mrng);
                train(correct, incorrect, bench.topo, tc, model);
                EmbedOptions eo;
                eo.sample_len = tc.sample_len;
                eo.crop_len = tc.crop_len;
                eo.bone_vectors = tc.bone_vectors;
                double joa = 0.0;
                int n = 0;
                for (const auto& s : bench.test_ds.sequences) {
                    if (s.exercise_id != spec.exercise_id || s.label != Label::Incorrect) continue;
                    auto fwd = embed_sequence(model, s, bench.topo, eo, true);
                    auto norm = minmax_normalize(joint_attention_scores(fwd.maps));
                    joa += joa_score(norm, bench.annotations.at(spec.exercise_id));
                    ++n;
                }
                joa /= n;
                finite = finite && std::isfinite(joa);
                mean += joa;
                char buf[32];
                std::snprintf(buf, sizeof(buf), ",%.4f", joa);
                csv += buf;
                std::printf(" %10.4f", joa);
            }
            mean /= static_cast<double>(bench.specs.size());
            char buf[32];
            std::snprintf(buf, sizeof(buf), ",%.4f\n", mean);
            csv += buf;
            std::printf(" %10.4f\n", mean);
            c.require(finite, std::string("non-finite joa in variant ") + v.name);
            ++rows;
        }
        std::ofstream out("ablation.csv");
        out << csv;
        c.require(rows == 4, "grid did not produce 4 rows");
    }});

    // ---- run ----
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Check check;
        auto start = Clock::now();
        try {
            criteria[i].fn(check);
        } catch (const std::exception& e) {
            check.require(false, std::string("exception: ") + e.what());
        }
        double secs = std::chrono::duration<double>(Clock::now() - start).count();
        bool ok = check.failures.empty();
        std::printf("[%2zu/12] %s  %7.2fs  %s\n", i + 1, ok ? "PASS" : "FAIL", secs,
                    criteria[i].name.c_str());
        if (!ok) {
            ++failed;
            std::size_t shown = 0;
            for (const auto& f : check.failures) {
                std::printf("        - %s\n", f.c_str());
                if (++shown >= 5) {
                    std::printf("        - (%zu more)\n", check.failures.size() - shown);
                    break;
                }
            }
        }
        std::fflush(stdout);
    }
    if (failed) std::printf("%d of 12 criteria FAILED\n", failed);
    else std::printf("all 12 criteria passed\n");
    return failed ? 1 : 0;
}
