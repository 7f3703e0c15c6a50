#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lmrank/rerank.hpp"

namespace lmrank {

// query id -> relevant index ids. Empty relevant sets are allowed; such
// queries drop out of every mean.
using GroundTruth = std::unordered_map<std::string, std::unordered_set<std::string>>;

struct QueryMetrics {
    std::string query_id;
    double ap_at_100;
    double p_at_10;
    int first_pos;  // first-relevant rank in top-100; 101 when absent
};

struct MetricReport {
    double map_at_100;
    double p_at_10;
    double mean_pos;
    std::size_t evaluated;  // queries with at least one relevant id
    std::size_t skipped;    // queries with an empty relevant set
    std::vector<QueryMetrics> per_query;  // evaluated queries, input order
};

double ap_at_k(const RankedList& list, const std::unordered_set<std::string>& relevant,
               std::size_t k);

MetricReport evaluate(const std::vector<RankedList>& lists, const GroundTruth& gt);

// CSV `query_id,relevant_ids`, ids space-separated (may be empty).
GroundTruth parse_ground_truth_csv(std::string_view text);
std::string ground_truth_csv(const GroundTruth& gt);

// One metric per line: `name<TAB>value`.
std::string report_tsv(const MetricReport& report);
std::string report_summary(const MetricReport& report);

}  // namespace lmrank
