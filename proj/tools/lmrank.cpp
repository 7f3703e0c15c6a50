#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lmrank/cleaning.hpp"
#include "lmrank/embedding_set.hpp"
#include "lmrank/knn.hpp"
#include "lmrank/margin_loss.hpp"
#include "lmrank/metrics.hpp"
#include "lmrank/query_expansion.hpp"
#include "lmrank/rerank.hpp"
#include "lmrank/soft_voting.hpp"
#include "lmrank/synth.hpp"
#include "lmrank/util.hpp"

namespace {

using namespace lmrank;

// Labels referenced by prediction files; the union keeps ordinals consistent
// across the query-side and index-side tables.
LabelTable table_from_prediction_files(const std::vector<std::string>& paths) {
    std::vector<std::string> labels;
    for (const auto& path : paths) {
        const std::string text = read_file(path);
        std::size_t start = 0;
        while (start < text.size()) {
            std::size_t pos = text.find('\n', start);
            if (pos == std::string::npos) pos = text.size();
            std::string_view line(text.data() + start, pos - start);
            start = pos + 1;
            if (line.empty()) continue;
            auto cols = split(line, '\t');
            if (cols.size() != 4) {
                throw std::runtime_error("predictions file '" + path +
                                         "': expected 4 tab-separated columns");
            }
            labels.emplace_back(cols[1]);
        }
    }
    return LabelTable(std::move(labels));
}

void write_id_label_tsv(const std::unordered_map<std::string, std::string>& labels,
                        const std::string& path) {
    std::vector<std::string_view> ids;
    ids.reserve(labels.size());
    for (const auto& [id, label] : labels) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    std::string out;
    for (auto id : ids) {
        out += id;
        out += '\t';
        out += labels.at(std::string(id));
        out += '\n';
    }
    write_file(path, out);
}

std::vector<RankedList> lists_from_neighbors(const EmbeddingSet& queries,
                                             const EmbeddingSet& database,
                                             const std::vector<NeighborList>& nn,
                                             std::size_t capacity) {
    std::vector<RankedList> lists(nn.size());
    for (std::size_t q = 0; q < nn.size(); ++q) {
        lists[q].query_id = queries.id(q);
        lists[q].capacity = capacity;
        lists[q].items.reserve(nn[q].size());
        for (const Neighbor& n : nn[q]) lists[q].items.push_back(database.id(n.index));
    }
    return lists;
}

int run_predict(const std::string& train_path, const std::string& labels_path,
                const std::string& index_path, std::size_t k, bool mark, bool normalize,
                const std::string& out_path, int threads) {
    const EmbeddingSet train = load_embeddings(train_path, normalize, labels_path);
    const EmbeddingSet index = load_embeddings(index_path, normalize);
    const LabelTable table = make_label_table(train);
    PredictionTable preds = predict_index(index, train, table, k, threads);
    if (mark) preds = mark_known(std::move(preds), train.ids(), train.labels(), table);
    write_file(out_path, predictions_tsv(preds, table));
    return 0;
}

int run_retrieve(const std::string& queries_path, const std::string& index_path, std::size_t k,
                 bool exclude_self, std::size_t qe_topk, double qe_alpha, bool normalize,
                 const std::string& out_path, const std::string& neighbors_out, int threads) {
    const EmbeddingSet queries = load_embeddings(queries_path, normalize);
    const EmbeddingSet index = load_embeddings(index_path, normalize);
    std::vector<NeighborList> nn = search(queries, index, k, exclude_self, threads);
    if (qe_topk > 0) {
        const QEConfig cfg{qe_topk, qe_alpha};
        const std::vector<float> expanded = expand_all(queries, nn, index, cfg, threads);
        std::vector<std::size_t> skip(queries.count(), kNoSkipRow);
        if (exclude_self) {
            for (std::size_t q = 0; q < queries.count(); ++q) {
                if (auto row = index.index_of(queries.id(q))) skip[q] = *row;
            }
        }
        nn = search_vectors(expanded, queries.dim(), index, k, skip, threads);
    }
    write_file(out_path, ranked_lists_csv(lists_from_neighbors(queries, index, nn, k)));
    if (!neighbors_out.empty()) {
        write_file(neighbors_out, neighbor_csv(queries, index, nn));
    }
    return 0;
}

int run_rerank(const std::string& lists_path, const std::string& index_preds_path,
               const std::string& query_preds_path, double tau, std::size_t capacity,
               const std::string& out_path, int threads) {
    const LabelTable table = table_from_prediction_files({index_preds_path, query_preds_path});
    const PredictionTable index_preds =
        parse_predictions_tsv(read_file(index_preds_path), table);
    const PredictionTable query_preds =
        parse_predictions_tsv(read_file(query_preds_path), table);
    const std::vector<RankedList> lists =
        parse_ranked_lists_csv(read_file(lists_path), capacity);

    std::vector<Prediction> per_query;
    per_query.reserve(lists.size());
    for (const auto& list : lists) per_query.push_back(query_preds.at(list.query_id));

    const auto out = rerank_all(lists, per_query, index_preds, tau, index_preds.ids(), threads);
    write_file(out_path, ranked_lists_csv(out));
    return 0;
}

int run_eval(const std::string& lists_path, const std::string& gt_path, std::size_t capacity,
             const std::string& out_path) {
    const auto lists = parse_ranked_lists_csv(read_file(lists_path), capacity);
    const GroundTruth gt = parse_ground_truth_csv(read_file(gt_path));
    const MetricReport report = evaluate(lists, gt);
    std::fputs(report_summary(report).c_str(), stdout);
    if (!out_path.empty()) write_file(out_path, report_tsv(report));
    return 0;
}

int run_clean(const std::string& train_path, const std::string& labels_path,
              const std::string& features_path, const CleaningConfig& cfg, bool normalize,
              const std::string& out_path, int threads) {
    const EmbeddingSet train = load_embeddings(train_path, normalize, labels_path);
    const FeatureCorpus corpus = load_features(features_path);
    const auto kept = clean(train, corpus, cfg, threads);
    std::string out;
    for (const auto& id : kept) {
        out += id;
        out += '\n';
    }
    write_file(out_path, out);
    std::printf("kept %zu of %zu images\n", kept.size(), train.count());
    return 0;
}

int run_synth(const SynthConfig& cfg, const std::string& out_dir,
              const std::string& features_out, const FeatureSynthConfig& fcfg) {
    std::filesystem::create_directories(out_dir);
    const SynthData data = generate(cfg);
    save_embeddings(data.train, out_dir + "/train.emb");
    save_embeddings(data.index, out_dir + "/index.emb");
    save_embeddings(data.queries, out_dir + "/queries.emb");
    write_labels_tsv(data.train, out_dir + "/train_labels.tsv");
    write_id_label_tsv(data.index_labels, out_dir + "/index_labels.tsv");
    write_id_label_tsv(data.query_labels, out_dir + "/query_labels.tsv");
    write_file(out_dir + "/gt.csv", ground_truth_csv(data.gt));
    if (!features_out.empty()) {
        std::vector<std::string> labels;
        labels.reserve(data.train.count());
        for (const auto& id : data.train.ids()) labels.push_back(data.train.labels().at(id));
        save_features(generate_features(data.train.ids(), labels, fcfg), features_out);
    }
    std::printf("wrote %zu train / %zu index / %zu query items to %s\n", data.train.count(),
                data.index.count(), data.queries.count(), out_dir.c_str());
    return 0;
}

int run_loss_check(int instances, std::uint64_t seed, std::size_t rows, std::size_t dim,
                   std::size_t classes, double s, double m, double beta, double step,
                   double limit) {
    double worst_arc = 0.0;
    double worst_cos = 0.0;
    for (int i = 0; i < instances; ++i) {
        const LossInstance inst =
            random_instance(rows, dim, classes, s, m, beta, seed + static_cast<std::uint64_t>(i));
        const FdCheck arc = fd_check(inst, MarginKind::arcface, step);
        const FdCheck cos = fd_check(inst, MarginKind::cosface, step);
        worst_arc = std::max({worst_arc, arc.feature_rel_err, arc.weight_rel_err});
        worst_cos = std::max({worst_cos, cos.feature_rel_err, cos.weight_rel_err});
    }
    const bool pass = worst_arc < limit && worst_cos < limit;
    std::printf("arcface max relative gradient error: %s\n", format_real(worst_arc).c_str());
    std::printf("cosface max relative gradient error: %s\n", format_real(worst_cos).c_str());
    std::printf("%s (limit %s over %d instances)\n", pass ? "PASS" : "FAIL",
                format_real(limit).c_str(), instances);
    return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lmrank: deterministic landmark-retrieval engine"};
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads,
                   "worker threads for all parallel stages; 0 means all hardware threads")
        ->capture_default_str();

    // predict
    std::string train_path, labels_path, index_path, out_path;
    std::size_t k_vote = 3;
    bool mark_known_flag = false;
    bool normalize = false;
    auto* predict = app.add_subcommand(
        "predict", "vote a label and confidence for every index image against the train set");
    predict->add_option("--train", train_path, "train embeddings (EMB1)")->required();
    predict->add_option("--train-labels", labels_path, "train labels TSV")->required();
    predict->add_option("--index", index_path, "index embeddings (EMB1)")->required();
    predict->add_option("--k", k_vote, "soft-voting neighbor count")->capture_default_str();
    predict->add_flag("--mark-known", mark_known_flag,
                      "pin predictions of index images that are train members to score 1.0");
    predict->add_flag("--normalize", normalize, "re-normalize embedding rows on load");
    predict->add_option("--out", out_path, "output predictions TSV")->required();

    // retrieve
    std::string queries_path, neighbors_out;
    std::size_t k_retrieve = 100;
    std::size_t qe_topk = 0;
    double qe_alpha = 3.0;
    bool exclude_self = false;
    auto* retrieve = app.add_subcommand("retrieve", "exact top-k cosine retrieval, "
                                                    "optionally with a query-expansion second pass");
    retrieve->add_option("--queries", queries_path, "query embeddings (EMB1)")->required();
    retrieve->add_option("--index", index_path, "index embeddings (EMB1)")->required();
    retrieve->add_option("--k", k_retrieve, "ranked list length")->capture_default_str();
    retrieve->add_flag("--exclude-self", exclude_self,
                       "skip the index row whose id equals the query id");
    retrieve->add_option("--qe-topk", qe_topk,
                         "expansion set size including the query; 0 disables query expansion")
        ->capture_default_str();
    retrieve->add_option("--qe-alpha", qe_alpha, "similarity weight exponent; 0 gives AQE")
        ->capture_default_str();
    retrieve->add_flag("--normalize", normalize, "re-normalize embedding rows on load");
    retrieve->add_option("--out", out_path, "output ranked-list CSV")->required();
    retrieve->add_option("--neighbors-out", neighbors_out,
                         "also write query_id,neighbor_id,rank,similarity CSV");

    // rerank
    std::string lists_path, index_preds_path, query_preds_path;
    double tau = 0.6;
    std::size_t capacity = 100;
    auto* rerank_cmd = app.add_subcommand(
        "rerank", "two-stage re-ranking of an existing ranked-list file: sort step, insert step");
    rerank_cmd->add_option("--lists", lists_path, "input ranked-list CSV")->required();
    rerank_cmd->add_option("--index-preds", index_preds_path, "index predictions TSV")->required();
    rerank_cmd->add_option("--query-preds", query_preds_path, "query predictions TSV")->required();
    rerank_cmd->add_option("--tau", tau, "insert gate: query score + item score must exceed this")
        ->capture_default_str();
    rerank_cmd->add_option("--capacity", capacity, "output list length bound")
        ->capture_default_str();
    rerank_cmd->add_option("--out", out_path, "output ranked-list CSV")->required();

    // eval
    std::string gt_path;
    auto* eval_cmd = app.add_subcommand("eval", "mAP@100, P@10 and MeanPos against ground truth");
    eval_cmd->add_option("--lists", lists_path, "ranked-list CSV")->required();
    eval_cmd->add_option("--gt", gt_path, "ground truth CSV")->required();
    eval_cmd->add_option("--capacity", capacity, "maximum ranked-list length accepted")
        ->capture_default_str();
    eval_cmd->add_option("--out", out_path, "also write the report as TSV");

    // clean
    std::string features_path;
    CleaningConfig clean_cfg;
    auto* clean_cmd = app.add_subcommand(
        "clean", "geometric-verification train-set cleaning over local features");
    clean_cmd->add_option("--train", train_path, "train embeddings (EMB1)")->required();
    clean_cmd->add_option("--train-labels", labels_path, "train labels TSV")->required();
    clean_cmd->add_option("--features", features_path, "local features (LFT1)")->required();
    clean_cmd->add_option("--nn-pool", clean_cfg.nn_pool, "neighbor pool per image")
        ->capture_default_str();
    clean_cmd->add_option("--label-cap", clean_cfg.per_label_cap,
                          "same-label neighbors verified at most")
        ->capture_default_str();
    clean_cmd->add_option("--inlier-min", clean_cfg.inlier_min,
                          "neighbor verified when inliers exceed this")
        ->capture_default_str();
    clean_cmd->add_option("--tau-freq", clean_cfg.tau_freq,
                          "verified neighbors needed to keep an image")
        ->capture_default_str();
    clean_cmd->add_option("--ransac-iters", clean_cfg.ransac_iters, "RANSAC iterations per pair")
        ->capture_default_str();
    clean_cmd->add_option("--inlier-px", clean_cfg.inlier_px, "inlier reprojection radius, px")
        ->capture_default_str();
    clean_cmd->add_option("--seed", clean_cfg.seed, "base seed for per-pair RANSAC sampling")
        ->capture_default_str();
    clean_cmd->add_flag("--normalize", normalize, "re-normalize embedding rows on load");
    clean_cmd->add_option("--out", out_path, "output kept-id list, one per line")->required();

    // synth
    SynthConfig synth_cfg;
    FeatureSynthConfig fsynth_cfg;
    std::string out_dir, features_out;
    auto* synth_cmd = app.add_subcommand("synth", "seeded synthetic benchmark generator");
    synth_cmd->add_option("--out-dir", out_dir, "output directory")->required();
    synth_cmd->add_option("--seed", synth_cfg.seed, "generator seed")->capture_default_str();
    synth_cmd->add_option("--dim", synth_cfg.dim, "embedding dim")->capture_default_str();
    synth_cmd->add_option("--classes", synth_cfg.n_classes, "class count")->capture_default_str();
    synth_cmd->add_option("--items", synth_cfg.items_per_class, "items per class")
        ->capture_default_str();
    synth_cmd->add_option("--fraction", synth_cfg.dissimilar_fraction,
                          "fraction of each class planted in its second mode")
        ->capture_default_str();
    synth_cmd->add_option("--spread", synth_cfg.cluster_spread, "isotropic spread around a mode")
        ->capture_default_str();
    synth_cmd->add_option("--train-ratio", synth_cfg.train_ratio, "train split ratio")
        ->capture_default_str();
    synth_cmd->add_option("--index-ratio", synth_cfg.index_ratio, "index split ratio")
        ->capture_default_str();
    synth_cmd->add_option("--query-ratio", synth_cfg.query_ratio, "query split ratio")
        ->capture_default_str();
    synth_cmd->add_option("--features-out", features_out,
                          "also write an LFT1 corpus for the train split");
    synth_cmd->add_option("--desc-dim", fsynth_cfg.desc_dim, "descriptor dim")
        ->capture_default_str();
    synth_cmd->add_option("--shared", fsynth_cfg.shared_per_group,
                          "planted keypoints shared within a class")
        ->capture_default_str();
    synth_cmd->add_option("--clutter", fsynth_cfg.clutter_per_image,
                          "random keypoints added per image")
        ->capture_default_str();
    synth_cmd->add_option("--jitter", fsynth_cfg.jitter, "affine linear-part jitter")
        ->capture_default_str();
    synth_cmd->add_option("--translate", fsynth_cfg.translate_px, "translation range, px")
        ->capture_default_str();
    synth_cmd->add_option("--noise-px", fsynth_cfg.noise_px, "keypoint coordinate noise, px")
        ->capture_default_str();

    // loss-check
    int lc_instances = 20;
    std::uint64_t lc_seed = 1;
    std::size_t lc_rows = 4, lc_dim = 8, lc_classes = 5;
    double lc_s = 30.0, lc_m = 0.3, lc_beta = 1e-5, lc_step = 1e-3, lc_limit = 1e-4;
    auto* loss_cmd = app.add_subcommand(
        "loss-check", "finite-difference verification of ArcFace and CosFace gradients");
    loss_cmd->add_option("--instances", lc_instances, "random instances per kind")
        ->capture_default_str();
    loss_cmd->add_option("--seed", lc_seed, "first instance seed")->capture_default_str();
    loss_cmd->add_option("--rows", lc_rows, "batch size")->capture_default_str();
    loss_cmd->add_option("--dim", lc_dim, "embedding dim")->capture_default_str();
    loss_cmd->add_option("--classes", lc_classes, "class count")->capture_default_str();
    loss_cmd->add_option("--scale", lc_s, "logit scale s")->capture_default_str();
    loss_cmd->add_option("--margin", lc_m, "margin m")->capture_default_str();
    loss_cmd->add_option("--beta", lc_beta, "L2 weight regularization coefficient")
        ->capture_default_str();
    loss_cmd->add_option("--step", lc_step, "finite-difference step")->capture_default_str();
    loss_cmd->add_option("--limit", lc_limit, "maximum relative error accepted")
        ->capture_default_str();

    // Global flags stay usable after a subcommand name.
    for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
        sub->fallthrough();
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (*predict) {
            return run_predict(train_path, labels_path, index_path, k_vote, mark_known_flag,
                               normalize, out_path, threads);
        }
        if (*retrieve) {
            return run_retrieve(queries_path, index_path, k_retrieve, exclude_self, qe_topk,
                                qe_alpha, normalize, out_path, neighbors_out, threads);
        }
        if (*rerank_cmd) {
            return run_rerank(lists_path, index_preds_path, query_preds_path, tau, capacity,
                              out_path, threads);
        }
        if (*eval_cmd) return run_eval(lists_path, gt_path, capacity, out_path);
        if (*clean_cmd) {
            return run_clean(train_path, labels_path, features_path, clean_cfg, normalize,
                             out_path, threads);
        }
        if (*synth_cmd) return run_synth(synth_cfg, out_dir, features_out, fsynth_cfg);
        if (*loss_cmd) {
            return run_loss_check(lc_instances, lc_seed, lc_rows, lc_dim, lc_classes, lc_s, lc_m,
                                  lc_beta, lc_step, lc_limit);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
