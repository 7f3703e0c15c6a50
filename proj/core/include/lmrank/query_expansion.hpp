#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lmrank/embedding_set.hpp"
#include "lmrank/knn.hpp"

namespace lmrank {

// alpha = 0 reduces to AQE: every used neighbor gets weight 1.
struct QEConfig {
    std::size_t n_expand = 10;  // top-ranked count, query included
    double alpha = 3.0;
};

// normalize( query + sum of w_i * x_i ) over the first n_expand - 1
// neighbors, w_i = max(sim_i, 0)^alpha. The query itself carries weight 1.
std::vector<float> expand_query(std::span<const float> query, const NeighborList& neighbors,
                                const EmbeddingSet& database, const QEConfig& cfg);

// Row-major buffer of expanded queries, one per input query.
std::vector<float> expand_all(const EmbeddingSet& queries,
                              const std::vector<NeighborList>& lists,
                              const EmbeddingSet& database, const QEConfig& cfg, int threads = 0);

}  // namespace lmrank
