#include <benchmark/benchmark.h>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lmrank/embedding_set.hpp"
#include "lmrank/knn.hpp"
#include "lmrank/rng.hpp"

namespace lmrank {

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
            values.push_back(static_cast<float>(rng.uniform01() - 0.5));
        }
    }
    return EmbeddingSet::from_rows(dim, std::move(ids), std::move(values), true);
}

const EmbeddingSet& bench_db() {
    static EmbeddingSet db = random_unit_set(1, 10000, 128, "r");
    return db;
}

const EmbeddingSet& bench_queries() {
    static EmbeddingSet queries = random_unit_set(2, 32, 128, "q");
    return queries;
}

// items processed = query/database row pairs scored.
void set_pairs(benchmark::State& state, std::size_t nq, std::size_t rows) {
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(nq * rows));
}

void BM_search(benchmark::State& state) {
    const int threads = static_cast<int>(state.range(0));
    const auto& db = bench_db();
    const auto& queries = bench_queries();
    for (auto _ : state) {
        auto lists = search(queries, db, 100, false, threads);
        benchmark::DoNotOptimize(lists);
    }
    set_pairs(state, queries.count(), db.count());
}

BENCHMARK(BM_search)->Arg(1)->Arg(2)->Arg(4)->Arg(8);

void BM_search_reference(benchmark::State& state) {
    const auto& db = bench_db();
    const auto& queries = bench_queries();
    for (auto _ : state) {
        auto lists = search_reference(queries, db, 100, false);
        benchmark::DoNotOptimize(lists);
    }
    set_pairs(state, queries.count(), db.count());
}

BENCHMARK(BM_search_reference);

void BM_search_dim(benchmark::State& state) {
    const auto dim = static_cast<std::size_t>(state.range(0));
    auto db = random_unit_set(3, 10000, dim, "r");
    auto queries = random_unit_set(4, 32, dim, "q");
    for (auto _ : state) {
        auto lists = search(queries, db, 100, false, 1);
        benchmark::DoNotOptimize(lists);
    }
    set_pairs(state, queries.count(), db.count());
}

BENCHMARK(BM_search_dim)->Arg(64)->Arg(256)->Arg(512);

}  // namespace lmrank

BENCHMARK_MAIN();
