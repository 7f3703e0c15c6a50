#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "lmrank/embedding_set.hpp"
#include "lmrank/knn.hpp"
#include "lmrank/metrics.hpp"
#include "lmrank/query_expansion.hpp"
#include "lmrank/rerank.hpp"
#include "lmrank/soft_voting.hpp"
#include "lmrank/synth.hpp"

namespace lmrank {

const SynthData& bench_data() {
    static SynthData data = [] {
        SynthConfig cfg;
        cfg.seed = 11;
        cfg.dim = 64;
        cfg.n_classes = 20;
        cfg.items_per_class = 40;
        cfg.dissimilar_fraction = 0.3;
        return generate(cfg);
    }();
    return data;
}

const LabelTable& bench_table() {
    static LabelTable table = make_label_table(bench_data().train);
    return table;
}

const std::vector<RankedList>& bench_lists() {
    static std::vector<RankedList> lists = [] {
        const auto& data = bench_data();
        auto raw = search(data.queries, data.index, 100, false);
        std::vector<RankedList> out;
        out.reserve(raw.size());
        for (std::size_t q = 0; q < data.queries.count(); ++q) {
            RankedList list{data.queries.ids()[q], {}, 100};
            for (const auto& n : raw[q]) list.items.push_back(data.index.ids()[n.index]);
            out.push_back(std::move(list));
        }
        return out;
    }();
    return lists;
}

void BM_predict_index(benchmark::State& state) {
    const auto k = static_cast<std::size_t>(state.range(0));
    const auto& data = bench_data();
    for (auto _ : state) {
        auto preds = predict_index(data.index, data.train, bench_table(), k);
        benchmark::DoNotOptimize(preds);
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(data.index.count()));
}

BENCHMARK(BM_predict_index)->Arg(1)->Arg(3)->Arg(5);

void BM_rerank_all(benchmark::State& state) {
    const auto& data = bench_data();
    const auto& lists = bench_lists();
    static PredictionTable ipreds = predict_index(data.index, data.train, bench_table(), 3);
    static PredictionTable qpreds = predict_index(data.queries, data.train, bench_table(), 3);
    std::vector<Prediction> query_preds;
    query_preds.reserve(lists.size());
    for (const auto& list : lists) query_preds.push_back(qpreds.at(list.query_id));
    for (auto _ : state) {
        auto out = rerank_all(lists, query_preds, ipreds, 0.6, ipreds.ids());
        benchmark::DoNotOptimize(out);
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(lists.size()));
}

BENCHMARK(BM_rerank_all);

void BM_expand_all(benchmark::State& state) {
    const auto& data = bench_data();
    static std::vector<NeighborList> raw = search(data.queries, data.index, 10, false);
    for (auto _ : state) {
        auto rows = expand_all(data.queries, raw, data.index, {10, 3.0});
        benchmark::DoNotOptimize(rows);
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(data.queries.count()));
}

BENCHMARK(BM_expand_all);

void BM_evaluate(benchmark::State& state) {
    const auto& data = bench_data();
    const auto& lists = bench_lists();
    for (auto _ : state) {
        auto report = evaluate(lists, data.gt);
        benchmark::DoNotOptimize(report);
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(lists.size()));
}

BENCHMARK(BM_evaluate);

}  // namespace lmrank

BENCHMARK_MAIN();
