#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lmrank/embedding_set.hpp"

namespace lmrank {

struct Neighbor {
    std::uint32_t index;  // database row
    float similarity;     // dot product of unit vectors
};

// Descending similarity, ties broken by ascending index; at most the
// requested k entries, exactly the k best under that total order.
using NeighborList = std::vector<Neighbor>;

// Exact brute-force top-k cosine search. Results are bit-identical for any
// worker count: per-row similarity is a fixed-order f32 accumulation and the
// (similarity desc, index asc) order is total. exclude_self skips the
// database row whose id equals the query id, when there is one.
std::vector<NeighborList> search(const EmbeddingSet& queries, const EmbeddingSet& database,
                                 std::size_t k, bool exclude_self, int threads = 0);

// Same search over raw query rows (no ids, so no self-exclusion).
std::vector<NeighborList> search_vectors(std::span<const float> queries, std::size_t dim,
                                         const EmbeddingSet& database, std::size_t k,
                                         int threads = 0);

// Raw-row search with an explicit per-query database row to skip
// (kNoSkipRow for none), for callers that track identity themselves.
inline constexpr std::size_t kNoSkipRow = static_cast<std::size_t>(-1);
std::vector<NeighborList> search_vectors(std::span<const float> queries, std::size_t dim,
                                         const EmbeddingSet& database, std::size_t k,
                                         const std::vector<std::size_t>& skip_rows,
                                         int threads);

// Naive single-threaded oracle: full similarity vector per query, then a
// sort under the same total order. Kept separate from search() so the fast
// path can be checked against it.
std::vector<NeighborList> search_reference(const EmbeddingSet& queries,
                                           const EmbeddingSet& database, std::size_t k,
                                           bool exclude_self);

// CSV with header `query_id,neighbor_id,rank,similarity`, rank 1-based.
std::string neighbor_csv(const EmbeddingSet& queries, const EmbeddingSet& database,
                         const std::vector<NeighborList>& lists);

}  // namespace lmrank
