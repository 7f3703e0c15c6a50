// Release gate: every stated acceptance criterion, one PASS/FAIL line each,
// thresholds pinned in code. The throughput criterion is a non-blocking
// REPORT; everything else must pass for exit code 0.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "lmrank/cleaning.hpp"
#include "lmrank/embedding_set.hpp"
#include "lmrank/knn.hpp"
#include "lmrank/margin_loss.hpp"
#include "lmrank/metrics.hpp"
#include "lmrank/query_expansion.hpp"
#include "lmrank/rerank.hpp"
#include "lmrank/rng.hpp"
#include "lmrank/soft_voting.hpp"
#include "lmrank/synth.hpp"
#include "lmrank/util.hpp"

using namespace lmrank;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(const char* name, bool pass, const std::string& detail, double elapsed,
            bool blocking = true) {
    const char* tag = pass ? "PASS" : (blocking ? "FAIL" : "MISS");
    std::printf("[%s] %s: %s (%.2f s)\n", tag, name, detail.c_str(), elapsed);
    if (!pass && blocking) ++failures;
}

// ---------------------------------------------------------------- criterion 1

void metric_oracle() {
    const auto start = Clock::now();
    constexpr double kTol = 1e-9;
    bool ok = true;
    std::string detail;

    const double want_ap = (1.0 / 1.0 + 2.0 / 3.0) / 2.0;  // hand-computed 5/6
    const double got_ap = ap_at_k({"q", {"r1", "n1", "r2"}, 100}, {"r1", "r2"}, 100);
    ok &= std::abs(got_ap - want_ap) <= kTol;

    auto report_hit = evaluate({{"q", {"r1", "n1", "r2"}, 100}}, {{"q", {"r1", "r2"}}});
    ok &= std::abs(report_hit.map_at_100 - want_ap) <= kTol;
    ok &= std::abs(report_hit.p_at_10 - 0.2) <= kTol;
    ok &= std::abs(report_hit.mean_pos - 1.0) <= kTol;

    std::vector<std::string> misses;
    for (int i = 0; i < 100; ++i) misses.push_back("x" + std::to_string(i));
    auto report_miss = evaluate({{"q", misses, 100}}, {{"q", {"r1"}}});
    ok &= report_miss.map_at_100 == 0.0;
    ok &= std::abs(report_miss.mean_pos - 101.0) <= kTol;

    const double elapsed = seconds_since(start);
    ok &= elapsed < 1.0;
    detail = "AP=" + format_real(got_ap) + " P@10=" + format_real(report_hit.p_at_10) +
             " MeanPos=" + format_real(report_hit.mean_pos) + "/" +
             format_real(report_miss.mean_pos) + ", tol 1e-9, limit 1 s";
    report("metric oracle", ok, detail, elapsed);
}

// ---------------------------------------------------------------- criterion 2

EmbeddingSet random_unit_set(std::uint64_t seed, std::size_t count, std::size_t dim,
                             const char* prefix) {
    Rng rng(seed);
    std::vector<std::string> ids;
    std::vector<float> values;
    ids.reserve(count);
    values.reserve(count * dim);
    for (std::size_t i = 0; i < count; ++i) {
        ids.push_back(prefix + std::to_string(i));
        for (std::size_t d = 0; d < dim; ++d) {
            values.push_back(static_cast<float>(rng.gaussian()));
        }
    }
    return EmbeddingSet::from_rows(dim, std::move(ids), std::move(values), true);
}

bool lists_identical(const std::vector<NeighborList>& a, const std::vector<NeighborList>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t q = 0; q < a.size(); ++q) {
        if (a[q].size() != b[q].size()) return false;
        for (std::size_t j = 0; j < a[q].size(); ++j) {
            if (a[q][j].index != b[q][j].index) return false;
            if (a[q][j].similarity != b[q][j].similarity) return false;
        }
    }
    return true;
}

void knn_exactness() {
    const auto start = Clock::now();
    bool ok = true;
    for (std::uint64_t seed = 1; seed <= 5 && ok; ++seed) {
        auto db = random_unit_set(seed, 1000, 64, "r");
        auto queries = random_unit_set(seed + 100, 100, 64, "q");
        auto oracle = search_reference(queries, db, 10, false);
        for (int threads : {1, 2, 8}) {
            ok &= lists_identical(search(queries, db, 10, false, threads), oracle);
        }
    }
    const double elapsed = seconds_since(start);
    ok &= elapsed < 5.0;
    report("k-NN exactness", ok,
           "5 seeds, 1000x64 db, 100 queries, k=10, threads {1,2,8} vs naive oracle, bit-exact, "
           "limit 5 s",
           elapsed);
}

// ------------------------------------------------------- criteria 3, 4 and 5

SynthConfig benchmark_cfg() {
    SynthConfig cfg;
    cfg.seed = 7;
    cfg.dim = 64;
    cfg.n_classes = 50;
    cfg.items_per_class = 40;
    cfg.dissimilar_fraction = 0.3;
    return cfg;
}

std::vector<RankedList> baseline_lists(const SynthData& data) {
    auto lists = search(data.queries, data.index, 100, false);
    std::vector<RankedList> ranked;
    ranked.reserve(lists.size());
    for (std::size_t q = 0; q < data.queries.count(); ++q) {
        RankedList list{data.queries.ids()[q], {}, 100};
        for (const auto& n : lists[q]) list.items.push_back(data.index.ids()[n.index]);
        ranked.push_back(std::move(list));
    }
    return ranked;
}

void oracle_rerank_monotonicity() {
    const auto start = Clock::now();
    auto data = generate(benchmark_cfg());
    const LabelTable table = make_label_table(data.train);
    auto lists = baseline_lists(data);

    PredictionTable oracle;
    for (const auto& id : data.index.ids()) {
        oracle.set(id, {table.ordinal(data.index_labels.at(id)), 1.0}, Provenance::known_label);
    }

    std::size_t improved_or_equal = 0;
    double before_sum = 0.0;
    double after_sum = 0.0;
    for (const auto& list : lists) {
        RerankContext ctx{{table.ordinal(data.query_labels.at(list.query_id)), 1.0}, &oracle,
                          0.0};
        auto after = rerank(list, ctx, data.index.ids());
        const auto& relevant = data.gt.at(list.query_id);
        const double ap_before = ap_at_k(list, relevant, 100);
        const double ap_after = ap_at_k(after, relevant, 100);
        if (ap_after >= ap_before) ++improved_or_equal;
        before_sum += ap_before;
        after_sum += ap_after;
    }
    const double before = before_sum / static_cast<double>(lists.size());
    const double after = after_sum / static_cast<double>(lists.size());

    const double elapsed = seconds_since(start);
    bool ok = lists.size() == 200 && improved_or_equal == lists.size() && after > before;
    ok &= elapsed < 30.0;
    report("oracle rerank monotonicity", ok,
           "per-query AP@100 never drops for " + std::to_string(improved_or_equal) + "/" +
               std::to_string(lists.size()) + ", mean mAP " + format_real(before) + " -> " +
               format_real(after) + ", tau=0, limit 30 s",
           elapsed);
}

struct AblationResult {
    double baseline;
    double sorted;
    double full;
};

AblationResult learned_vote_ablation(const SynthData& data) {
    const LabelTable table = make_label_table(data.train);
    auto lists = baseline_lists(data);
    auto ipreds = predict_index(data.index, data.train, table, 3);
    auto qpreds = predict_index(data.queries, data.train, table, 3);

    std::vector<RankedList> sorted;
    std::vector<RankedList> full;
    sorted.reserve(lists.size());
    full.reserve(lists.size());
    for (const auto& list : lists) {
        RerankContext ctx{qpreds.at(list.query_id), &ipreds, 0.6};
        sorted.push_back(sort_step(list, ctx));
        full.push_back(insert_step(sorted.back(), ctx, ipreds.ids()));
    }
    return {evaluate(lists, data.gt).map_at_100, evaluate(sorted, data.gt).map_at_100,
            evaluate(full, data.gt).map_at_100};
}

void learned_vote_rerank() {
    const auto start = Clock::now();
    auto data = generate(benchmark_cfg());
    auto result = learned_vote_ablation(data);

    // Frozen from the first oracle run of this benchmark (seed 7, k=3,
    // tau=0.6). The whole pipeline uses only IEEE +-*/sqrt, so these bind
    // bit-tight across conforming hosts.
    constexpr double kFrozenBaseline = 0.5388977070838076;
    constexpr double kFrozenSorted = 0.664851390504837;
    constexpr double kFrozenFull = 0.9661284618751255;
    constexpr double kTol = 1e-9;

    bool ok = result.sorted > result.baseline && result.full > result.sorted;
    const bool frozen_filled = !std::isnan(kFrozenBaseline);
    if (frozen_filled) {
        ok &= std::abs(result.baseline - kFrozenBaseline) <= kTol;
        ok &= std::abs(result.sorted - kFrozenSorted) <= kTol;
        ok &= std::abs(result.full - kFrozenFull) <= kTol;
    } else {
        ok = false;  // values not frozen yet: keep the gate red
    }
    report("learned-vote rerank ablation", ok,
           "mAP@100 baseline " + format_real(result.baseline) + " -> sort " +
               format_real(result.sorted) + " -> sort+insert " + format_real(result.full) +
               (frozen_filled ? ", frozen margins held at 1e-9" : ", FROZEN VALUES MISSING"),
           seconds_since(start));
}

std::string grid_report() {
    auto data = generate(benchmark_cfg());
    const LabelTable table = make_label_table(data.train);
    auto lists = baseline_lists(data);

    std::string out = "k\ttau\tmAP@100\n";
    for (std::size_t k : {1u, 3u, 5u}) {
        auto ipreds = predict_index(data.index, data.train, table, k);
        auto qpreds = predict_index(data.queries, data.train, table, k);
        std::vector<Prediction> query_preds;
        query_preds.reserve(lists.size());
        for (const auto& list : lists) query_preds.push_back(qpreds.at(list.query_id));
        for (double tau : {0.0, 0.6, 1.2}) {
            auto reranked = rerank_all(lists, query_preds, ipreds, tau, ipreds.ids());
            out += std::to_string(k) + "\t" + format_real(tau) + "\t" +
                   format_real(evaluate(reranked, data.gt).map_at_100) + "\n";
        }
    }
    return out;
}

void hyperparameter_grid() {
    const auto start = Clock::now();
    const std::string first = grid_report();
    const std::string second = grid_report();
    const bool ok = !first.empty() && first == second;
    report("hyperparameter grid", ok,
           "(k, tau) in {1,3,5}x{0,0.6,1.2} report produced, re-run bit-identical: " +
               std::string(first == second ? "yes" : "NO"),
           seconds_since(start));
    std::printf("%s", first.c_str());
}

// ---------------------------------------------------------------- criterion 6

double naive_cosine_softmax(const LossInstance& inst) {
    double data = 0.0;
    for (std::size_t i = 0; i < inst.n_rows; ++i) {
        std::vector<double> logits(inst.n_classes);
        for (std::size_t j = 0; j < inst.n_classes; ++j) {
            double dot = 0.0;
            for (std::size_t d = 0; d < inst.dim; ++d) {
                dot += inst.features[i * inst.dim + d] * inst.weights[j * inst.dim + d];
            }
            logits[j] = inst.s * dot;
        }
        double denom = 0.0;
        for (double z : logits) denom += std::exp(z);
        data -= std::log(std::exp(logits[static_cast<std::size_t>(inst.targets[i])]) / denom);
    }
    double w_sq = 0.0;
    for (double w : inst.weights) w_sq += w * w;
    return data / static_cast<double>(inst.n_rows) + inst.beta * (w_sq + inst.backbone_sq_norm);
}

void loss_gradients() {
    const auto start = Clock::now();
    bool fd_ok = true;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto inst = random_instance(4, 8, 5, 30.0, 0.3, 1e-5, seed);
        for (MarginKind kind : {MarginKind::arcface, MarginKind::cosface}) {
            auto check = fd_check(inst, kind);
            worst = std::max({worst, check.feature_rel_err, check.weight_rel_err});
            fd_ok &= check.feature_rel_err < 1e-4 && check.weight_rel_err < 1e-4;
        }
    }

    bool reduction_ok = true;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto inst = random_instance(4, 8, 5, 30.0, 0.0, 1e-5, 100 + seed);
        const double want = naive_cosine_softmax(inst);
        reduction_ok &= std::abs(arcface_loss(inst).loss - want) <= 1e-9;
        reduction_ok &= std::abs(cosface_loss(inst).loss - want) <= 1e-9;
    }

    const double elapsed = seconds_since(start);
    const bool ok = fd_ok && reduction_ok && elapsed < 5.0;
    report("loss gradients", ok,
           "20 instances N=4 d=8 n=5 s=30 m=0.3, worst FD rel err " + format_real(worst) +
               " (< 1e-4), m=0 softmax reduction within 1e-9, limit 5 s",
           elapsed);
}

// ---------------------------------------------------------------- criterion 7

void ransac_recovery() {
    const auto start = Clock::now();
    const AffineModel planted{1.2, 0.3, -0.2, 0.9, 40.0, -25.0};
    int successes = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(9000 + seed);
        std::vector<Correspondence> matches;
        for (int i = 0; i < 50; ++i) {
            const double x = rng.uniform(0.0, 500.0);
            const double y = rng.uniform(0.0, 500.0);
            matches.push_back({static_cast<float>(x), static_cast<float>(y),
                               static_cast<float>(planted.a11 * x + planted.a12 * y + planted.tx +
                                                  0.5 * rng.gaussian()),
                               static_cast<float>(planted.a21 * x + planted.a22 * y + planted.ty +
                                                  0.5 * rng.gaussian()),
                               1.0f});
        }
        for (int i = 0; i < 50; ++i) {
            matches.push_back({static_cast<float>(rng.uniform(0.0, 500.0)),
                               static_cast<float>(rng.uniform(0.0, 500.0)),
                               static_cast<float>(rng.uniform(0.0, 500.0)),
                               static_cast<float>(rng.uniform(0.0, 500.0)), 0.5f});
        }
        auto result = ransac_affine(matches, 1000, 3.0, seed);
        if (result.inliers >= 45) ++successes;
    }
    const double elapsed = seconds_since(start);
    const bool ok = successes >= 95 && elapsed < 10.0;
    report("ransac recovery", ok,
           "planted affine, 50 inliers sigma 0.5 px + 50 outliers, inlier_px=3, 1000 iters: >=45 "
           "inliers in " +
               std::to_string(successes) + "/100 seeds (need >=95), limit 10 s",
           elapsed);
}

// ---------------------------------------------------------------- criterion 8

void cleaning_filter() {
    const auto start = Clock::now();

    // Toy corpus with verified-neighbor counts known by construction: a0-a3
    // share a keypoint group (each verifies 3 same-label neighbors), a4 has
    // label LA but its own group (verifies 0), b0 is a singleton label.
    auto group = [](std::uint64_t seed, std::size_t count, std::size_t dim) {
        Rng rng(seed);
        ImageFeatures base;
        base.dim = dim;
        for (std::size_t i = 0; i < count; ++i) {
            base.coords.push_back(static_cast<float>(rng.uniform(0.0, 500.0)));
            base.coords.push_back(static_cast<float>(rng.uniform(0.0, 500.0)));
            std::vector<double> d(dim);
            double norm = 0.0;
            for (auto& v : d) {
                v = rng.gaussian();
                norm += v * v;
            }
            norm = std::sqrt(norm);
            for (double v : d) base.descriptors.push_back(static_cast<float>(v / norm));
        }
        return base;
    };
    auto instance = [](const ImageFeatures& base, const std::string& id, float dx, float dy) {
        ImageFeatures img = base;
        img.id = id;
        for (std::size_t i = 0; i < img.count(); ++i) {
            img.coords[2 * i] += dx;
            img.coords[2 * i + 1] += dy;
        }
        return img;
    };

    auto g1 = group(21, 8, 6);
    auto g2 = group(22, 8, 6);
    auto g3 = group(23, 8, 6);
    FeatureCorpus corpus;
    corpus.add(instance(g1, "a0", 0.0f, 0.0f));
    corpus.add(instance(g1, "a1", 5.0f, 2.0f));
    corpus.add(instance(g1, "a2", -3.0f, 7.0f));
    corpus.add(instance(g1, "a3", 1.5f, -4.0f));
    corpus.add(instance(g2, "a4", 0.0f, 0.0f));
    corpus.add(instance(g3, "b0", 0.0f, 0.0f));

    std::vector<std::vector<float>> rows{{1.0f, 0.01f, 0.0f, 0.0f}, {1.0f, 0.0f, 0.01f, 0.0f},
                                         {1.0f, 0.0f, 0.0f, 0.01f}, {1.0f, -0.01f, 0.0f, 0.0f},
                                         {1.0f, 0.0f, -0.01f, 0.0f}, {1.0f, 0.0f, 0.0f, -0.01f}};
    std::vector<std::string> ids{"a0", "a1", "a2", "a3", "a4", "b0"};
    std::vector<float> flat;
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    std::unordered_map<std::string, std::string> labels;
    for (const auto& id : ids) labels[id] = id[0] == 'a' ? "LA" : "LB";
    auto train = EmbeddingSet::from_rows(4, ids, flat, true, labels);

    auto cfg_at = [](int tau) {
        CleaningConfig cfg;
        cfg.nn_pool = 10;
        cfg.per_label_cap = 10;
        cfg.inlier_min = 5;
        cfg.tau_freq = tau;
        cfg.ransac_iters = 64;
        cfg.inlier_px = 3.0;
        cfg.seed = 12345;
        return cfg;
    };

    const std::vector<std::string> all{"a0", "a1", "a2", "a3", "a4", "b0"};
    const std::vector<std::string> grouped{"a0", "a1", "a2", "a3"};
    bool ok = clean(train, corpus, cfg_at(0)) == all;
    ok &= clean(train, corpus, cfg_at(1)) == grouped;
    ok &= clean(train, corpus, cfg_at(3)) == grouped;

    auto prev = clean(train, corpus, cfg_at(0));
    bool monotone = true;
    for (int tau = 1; tau <= 5; ++tau) {
        auto cur = clean(train, corpus, cfg_at(tau));
        for (const auto& id : cur) {
            bool in_prev = false;
            for (const auto& p : prev) in_prev |= p == id;
            monotone &= in_prev;
        }
        prev = cur;
    }
    ok &= monotone;
    report("cleaning filter correctness", ok,
           "planted survivors exact for tau_freq in {0,1,3}, survivor set monotone in tau_freq",
           seconds_since(start));
}

// ---------------------------------------------------------------- criterion 9

// AQE re-derived from its definition: average the query with its top
// neighbors at weight exactly 1, renormalize. Must equal alphaQE(0) byte
// for byte since zero copies of the similarity multiply into the weight.
std::vector<float> aqe_oracle(const EmbeddingSet& queries, const std::vector<NeighborList>& lists,
                              const EmbeddingSet& db, std::size_t n_expand) {
    std::vector<float> out(queries.count() * queries.dim());
    for (std::size_t q = 0; q < queries.count(); ++q) {
        std::vector<double> acc(queries.dim());
        auto row = queries.row(q);
        for (std::size_t d = 0; d < queries.dim(); ++d) acc[d] = static_cast<double>(row[d]);
        const std::size_t used = std::min(lists[q].size(), n_expand - 1);
        for (std::size_t i = 0; i < used; ++i) {
            auto nb = db.row(lists[q][i].index);
            for (std::size_t d = 0; d < queries.dim(); ++d) {
                acc[d] += 1.0 * static_cast<double>(nb[d]);
            }
        }
        double norm = 0.0;
        for (double v : acc) norm += v * v;
        norm = std::sqrt(norm);
        for (std::size_t d = 0; d < queries.dim(); ++d) {
            out[q * queries.dim() + d] = static_cast<float>(acc[d] / norm);
        }
    }
    return out;
}

void qe_identities() {
    const auto start = Clock::now();
    auto db = random_unit_set(71, 200, 32, "r");
    auto queries = random_unit_set(72, 25, 32, "q");
    auto lists = search(queries, db, 9, false);

    auto alpha0 = expand_all(queries, lists, db, {10, 0.0});
    bool exact = aqe_oracle(queries, lists, db, 10) == alpha0;

    // Zero-similarity neighbors leave the query unchanged.
    auto zero_db = EmbeddingSet::from_rows(2, {"n"}, {0.0f, 1.0f}, true);
    std::vector<float> axis{1.0f, 0.0f};
    auto expanded = expand_query(axis, NeighborList{{0, 0.0f}}, zero_db, {2, 3.0});
    bool unchanged = expanded == axis;

    bool unit = true;
    for (double alpha : {0.0, 3.0}) {
        auto rows = expand_all(queries, lists, db, {10, alpha});
        for (std::size_t q = 0; q < queries.count(); ++q) {
            double norm = 0.0;
            for (std::size_t d = 0; d < queries.dim(); ++d) {
                const float v = rows[q * queries.dim() + d];
                norm += static_cast<double>(v) * v;
            }
            unit &= std::abs(std::sqrt(norm) - 1.0) < 1e-6;
        }
    }
    report("query expansion identities", exact && unchanged && unit,
           std::string("AQE == alphaQE(0) bit-exact: ") + (exact ? "yes" : "NO") +
               ", zero-sim neighbor inert: " + (unchanged ? "yes" : "NO") +
               ", outputs unit norm within 1e-6: " + (unit ? "yes" : "NO"),
           seconds_since(start));
}

// --------------------------------------------------------------- criterion 10

void throughput_report() {
    const auto start = Clock::now();
    const std::size_t db_count = 100000;
    const std::size_t dim = 512;
    const std::size_t nq = 1000;

    Rng rng(31337);
    std::vector<std::string> db_ids;
    std::vector<float> db_values;
    db_ids.reserve(db_count);
    db_values.reserve(db_count * dim);
    for (std::size_t i = 0; i < db_count; ++i) {
        db_ids.push_back("r" + std::to_string(i));
        for (std::size_t d = 0; d < dim; ++d) {
            db_values.push_back(static_cast<float>(rng.uniform01() - 0.5));
        }
    }
    auto db = EmbeddingSet::from_rows(dim, std::move(db_ids), std::move(db_values), true);

    std::vector<std::string> q_ids;
    std::vector<float> q_values;
    for (std::size_t i = 0; i < nq; ++i) {
        q_ids.push_back("q" + std::to_string(i));
        for (std::size_t d = 0; d < dim; ++d) {
            q_values.push_back(static_cast<float>(rng.uniform01() - 0.5));
        }
    }
    auto queries = EmbeddingSet::from_rows(dim, std::move(q_ids), std::move(q_values), true);

    const auto timed = Clock::now();
    auto eight = search(queries, db, 100, false, 8);
    const double search_s = seconds_since(timed);

    auto one = search(queries, db, 100, false, 1);
    const bool identical = lists_identical(eight, one);

    const bool under_target = search_s < 10.0;
    report("throughput target (REPORT)", under_target && identical,
           "1000 queries x 100000x512, top-100: 8-worker search " + format_real(search_s) +
               " s (target < 10 s), 1 vs 8 workers byte-identical: " +
               (identical ? "yes" : "NO"),
           seconds_since(start), /*blocking=*/false);
}

}  // namespace

int main() {
    std::printf("acceptance gate\n");
    metric_oracle();
    knn_exactness();
    oracle_rerank_monotonicity();
    learned_vote_rerank();
    hyperparameter_grid();
    loss_gradients();
    ransac_recovery();
    cleaning_filter();
    qe_identities();
    throughput_report();
    if (failures == 0) {
        std::printf("all blocking criteria passed\n");
        return 0;
    }
    std::printf("%d blocking criteria failed\n", failures);
    return 1;
}
