#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lmrank/soft_voting.hpp"

namespace lmrank {

struct RankedList {
    std::string query_id;
    std::vector<std::string> items;  // ordered, no duplicates
    std::size_t capacity = 100;      // output length bound
};

struct RerankContext {
    Prediction query;                    // label and score voted for the query
    const PredictionTable* predictions;  // covers the index set
    double tau_score = 0.6;
};

// Throws if items repeat or exceed capacity.
void validate_ranked_list(const RankedList& list);

// Stable partition: items predicted to share the query label move ahead of
// the rest, both groups keeping their relative order.
RankedList sort_step(const RankedList& list, const RerankContext& ctx);

// Inserts unretrieved pool items predicted to share the query label, gated
// by query_score + item_score > tau_score (equality suppresses). Candidates
// go between the positive and negative blocks, best score first (ties by
// ascending id); the tail is dropped down to capacity. Expects a
// sort-stepped input.
RankedList insert_step(const RankedList& list, const RerankContext& ctx,
                       const std::vector<std::string>& pool);

// insert_step after sort_step.
RankedList rerank(const RankedList& list, const RerankContext& ctx,
                  const std::vector<std::string>& pool);

std::vector<RankedList> rerank_all(const std::vector<RankedList>& lists,
                                   const std::vector<Prediction>& query_preds,
                                   const PredictionTable& predictions, double tau_score,
                                   const std::vector<std::string>& pool, int threads = 0);

// CSV with header `id,images`; images is the space-separated ordered list.
std::string ranked_lists_csv(std::span<const RankedList> lists);
std::vector<RankedList> parse_ranked_lists_csv(std::string_view text, std::size_t capacity = 100);

}  // namespace lmrank
