#include "lmrank/query_expansion.hpp"

#include <cmath>
#include <stdexcept>

#include "lmrank/parallel.hpp"

namespace lmrank {

namespace {

// Integer exponents are evaluated by repeated multiplication: plain IEEE
// products round identically everywhere, which keeps expanded queries
// bit-stable across platforms for the common alphas (0, 1, 2, 3, ...).
double weight(double sim, double alpha) {
    const double base = sim > 0.0 ? sim : 0.0;
    if (alpha >= 0.0 && alpha <= 64.0 && alpha == std::floor(alpha)) {
        double w = 1.0;
        for (int i = 0; i < static_cast<int>(alpha); ++i) w *= base;
        return w;
    }
    return std::pow(base, alpha);
}

void check_cfg(const QEConfig& cfg) {
    if (cfg.n_expand < 1) throw std::runtime_error("n_expand must be at least 1");
    if (!(cfg.alpha >= 0.0)) throw std::runtime_error("alpha must be non-negative");
}

void expand_into(std::span<const float> query, const NeighborList& neighbors,
                 const EmbeddingSet& database, const QEConfig& cfg, std::vector<double>& acc,
                 float* out) {
    const std::size_t dim = database.dim();
    acc.assign(dim, 0.0);
    for (std::size_t d = 0; d < dim; ++d) acc[d] = static_cast<double>(query[d]);

    const std::size_t used = std::min(neighbors.size(), cfg.n_expand - 1);
    for (std::size_t i = 0; i < used; ++i) {
        const double w = weight(static_cast<double>(neighbors[i].similarity), cfg.alpha);
        std::span<const float> row = database.row(neighbors[i].index);
        for (std::size_t d = 0; d < dim; ++d) acc[d] += w * static_cast<double>(row[d]);
    }

    double norm = 0.0;
    for (double v : acc) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-12) throw std::runtime_error("expanded query has zero norm");
    for (std::size_t d = 0; d < dim; ++d) out[d] = static_cast<float>(acc[d] / norm);
}

}  // namespace

std::vector<float> expand_query(std::span<const float> query, const NeighborList& neighbors,
                                const EmbeddingSet& database, const QEConfig& cfg) {
    check_cfg(cfg);
    if (query.size() != database.dim()) throw std::runtime_error("query dim mismatch");
    std::vector<float> out(database.dim());
    std::vector<double> acc;
    expand_into(query, neighbors, database, cfg, acc, out.data());
    return out;
}

std::vector<float> expand_all(const EmbeddingSet& queries,
                              const std::vector<NeighborList>& lists,
                              const EmbeddingSet& database, const QEConfig& cfg, int threads) {
    check_cfg(cfg);
    if (lists.size() != queries.count()) {
        throw std::runtime_error("one neighbor list per query required");
    }
    if (queries.count() > 0 && queries.dim() != database.dim()) {
        throw std::runtime_error("query dim mismatch");
    }
    std::vector<float> out(queries.count() * queries.dim());
    parallel_chunks(queries.count(), threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> acc;
        for (std::size_t q = begin; q < end; ++q) {
            expand_into(queries.row(q), lists[q], database, cfg, acc,
                        out.data() + q * queries.dim());
        }
    });
    return out;
}

}  // namespace lmrank
