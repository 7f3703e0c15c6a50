#include "lmrank/knn.hpp"

#include <algorithm>
#include <limits>
#include <mutex>
#include <stdexcept>

#include "lmrank/parallel.hpp"
#include "lmrank/util.hpp"

namespace lmrank {

namespace {

constexpr std::size_t kNoSkip = std::numeric_limits<std::size_t>::max();

bool better(const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.index < b.index;
}

// Bounded selector; binary heap with the worst kept on top.
class TopK {
public:
    explicit TopK(std::size_t k) : k_(k) { heap_.reserve(k); }

    void offer(std::uint32_t index, float sim) {
        Neighbor cand{index, sim};
        if (heap_.size() < k_) {
            heap_.push_back(cand);
            std::push_heap(heap_.begin(), heap_.end(), &better);
        } else if (better(cand, heap_.front())) {
            std::pop_heap(heap_.begin(), heap_.end(), &better);
            heap_.back() = cand;
            std::push_heap(heap_.begin(), heap_.end(), &better);
        }
    }

    NeighborList take_sorted() {
        std::sort(heap_.begin(), heap_.end(), &better);
        return std::move(heap_);
    }

private:
    std::size_t k_;
    std::vector<Neighbor> heap_;
};

// Top-k of one query over database rows [row_begin, row_end). Rows are
// processed in blocks of eight with one independent f32 accumulator chain
// each; every chain still runs sequentially over dim, so each similarity is
// bit-identical to a naive per-row loop.
NeighborList scan_rows(const float* query, const EmbeddingSet& database, std::size_t row_begin,
                       std::size_t row_end, std::size_t k, std::size_t skip_row) {
    const std::size_t dim = database.dim();
    const float* base = database.data().data();
    TopK top(k);

    std::size_t i = row_begin;
    for (; i + 8 <= row_end; i += 8) {
        float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
        const float* r = base + i * dim;
        for (std::size_t d = 0; d < dim; ++d) {
            const float q = query[d];
            acc[0] += q * r[0 * dim + d];
            acc[1] += q * r[1 * dim + d];
            acc[2] += q * r[2 * dim + d];
            acc[3] += q * r[3 * dim + d];
            acc[4] += q * r[4 * dim + d];
            acc[5] += q * r[5 * dim + d];
            acc[6] += q * r[6 * dim + d];
            acc[7] += q * r[7 * dim + d];
        }
        for (std::size_t j = 0; j < 8; ++j) {
            if (i + j == skip_row) continue;
            top.offer(static_cast<std::uint32_t>(i + j), acc[j]);
        }
    }
    for (; i < row_end; ++i) {
        if (i == skip_row) continue;
        const float* r = base + i * dim;
        float acc = 0.0f;
        for (std::size_t d = 0; d < dim; ++d) acc += query[d] * r[d];
        top.offer(static_cast<std::uint32_t>(i), acc);
    }
    return top.take_sorted();
}

NeighborList merge_shard_lists(std::vector<NeighborList>& shards, std::size_t k) {
    NeighborList all;
    for (auto& s : shards) all.insert(all.end(), s.begin(), s.end());
    std::sort(all.begin(), all.end(), &better);
    if (all.size() > k) all.resize(k);
    return all;
}

std::vector<NeighborList> run_search(const float* qdata, std::size_t nq, std::size_t dim,
                                     const EmbeddingSet& database,
                                     const std::vector<std::size_t>& skip, std::size_t k,
                                     int threads) {
    if (k == 0) throw std::runtime_error("k must be positive");
    if (dim != database.dim()) {
        throw std::runtime_error("dim mismatch: queries " + std::to_string(dim) + ", database " +
                                 std::to_string(database.dim()));
    }

    const std::size_t ndb = database.count();
    std::vector<NeighborList> out(nq);
    const std::size_t workers = resolve_threads(threads);

    if (nq >= workers || ndb == 0) {
        // Enough queries to keep every worker busy: one chunk of queries each.
        parallel_chunks(nq, threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t q = begin; q < end; ++q) {
                out[q] = scan_rows(qdata + q * dim, database, 0, ndb, k, skip[q]);
            }
        });
    } else {
        // Few queries over a large database: shard the rows instead and merge
        // the shard-local lists under the same total order.
        for (std::size_t q = 0; q < nq; ++q) {
            std::vector<NeighborList> shards;
            std::mutex mu;
            parallel_chunks(ndb, threads, [&](std::size_t begin, std::size_t end) {
                NeighborList local = scan_rows(qdata + q * dim, database, begin, end, k, skip[q]);
                std::lock_guard<std::mutex> lock(mu);
                shards.push_back(std::move(local));
            });
            out[q] = merge_shard_lists(shards, k);
        }
    }
    return out;
}

std::vector<std::size_t> self_skip_rows(const EmbeddingSet& queries, const EmbeddingSet& database,
                                        bool exclude_self) {
    std::vector<std::size_t> skip(queries.count(), kNoSkip);
    if (!exclude_self) return skip;
    for (std::size_t q = 0; q < queries.count(); ++q) {
        if (auto row = database.index_of(queries.id(q))) skip[q] = *row;
    }
    return skip;
}

}  // namespace

std::vector<NeighborList> search(const EmbeddingSet& queries, const EmbeddingSet& database,
                                 std::size_t k, bool exclude_self, int threads) {
    std::vector<std::size_t> skip = self_skip_rows(queries, database, exclude_self);
    return run_search(queries.data().data(), queries.count(), queries.dim(), database, skip, k,
                      threads);
}

std::vector<NeighborList> search_vectors(std::span<const float> queries, std::size_t dim,
                                         const EmbeddingSet& database, std::size_t k,
                                         int threads) {
    if (dim == 0 || queries.size() % dim != 0) {
        throw std::runtime_error("query buffer size is not a multiple of dim");
    }
    const std::size_t nq = queries.size() / dim;
    std::vector<std::size_t> skip(nq, kNoSkip);
    return run_search(queries.data(), nq, dim, database, skip, k, threads);
}

std::vector<NeighborList> search_vectors(std::span<const float> queries, std::size_t dim,
                                         const EmbeddingSet& database, std::size_t k,
                                         const std::vector<std::size_t>& skip_rows, int threads) {
    if (dim == 0 || queries.size() % dim != 0) {
        throw std::runtime_error("query buffer size is not a multiple of dim");
    }
    const std::size_t nq = queries.size() / dim;
    if (skip_rows.size() != nq) {
        throw std::runtime_error("one skip entry per query required");
    }
    return run_search(queries.data(), nq, dim, database, skip_rows, k, threads);
}

std::vector<NeighborList> search_reference(const EmbeddingSet& queries,
                                           const EmbeddingSet& database, std::size_t k,
                                           bool exclude_self) {
    if (k == 0) throw std::runtime_error("k must be positive");
    if (queries.dim() != database.dim()) {
        throw std::runtime_error("dim mismatch: queries " + std::to_string(queries.dim()) +
                                 ", database " + std::to_string(database.dim()));
    }
    std::vector<std::size_t> skip = self_skip_rows(queries, database, exclude_self);
    const std::size_t dim = database.dim();
    std::vector<NeighborList> out(queries.count());
    for (std::size_t q = 0; q < queries.count(); ++q) {
        const float* query = queries.row(q).data();
        NeighborList all;
        all.reserve(database.count());
        for (std::size_t i = 0; i < database.count(); ++i) {
            if (i == skip[q]) continue;
            const float* r = database.row(i).data();
            float acc = 0.0f;
            for (std::size_t d = 0; d < dim; ++d) acc += query[d] * r[d];
            all.push_back(Neighbor{static_cast<std::uint32_t>(i), acc});
        }
        std::sort(all.begin(), all.end(), &better);
        if (all.size() > k) all.resize(k);
        out[q] = std::move(all);
    }
    return out;
}

std::string neighbor_csv(const EmbeddingSet& queries, const EmbeddingSet& database,
                         const std::vector<NeighborList>& lists) {
    if (lists.size() != queries.count()) {
        throw std::runtime_error("neighbor list count does not match query count");
    }
    std::string out = "query_id,neighbor_id,rank,similarity\n";
    for (std::size_t q = 0; q < lists.size(); ++q) {
        for (std::size_t r = 0; r < lists[q].size(); ++r) {
            out += queries.id(q);
            out += ',';
            out += database.id(lists[q][r].index);
            out += ',';
            out += std::to_string(r + 1);
            out += ',';
            out += format_real(lists[q][r].similarity);
            out += '\n';
        }
    }
    return out;
}

}  // namespace lmrank
