#include "lmrank/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "lmrank/util.hpp"

namespace lmrank {

double ap_at_k(const RankedList& list, const std::unordered_set<std::string>& relevant,
               std::size_t k) {
    if (k == 0) throw std::runtime_error("k must be positive");
    if (relevant.empty()) {
        throw std::runtime_error("ap_at_k: empty relevant set for query '" + list.query_id + "'");
    }
    std::unordered_set<std::string_view> seen;
    for (const auto& id : list.items) {
        if (!seen.insert(id).second) {
            throw std::runtime_error("ap_at_k: duplicate id '" + id + "' in list for query '" +
                                     list.query_id + "'");
        }
    }

    const std::size_t depth = std::min(list.items.size(), k);
    std::size_t hits = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < depth; ++i) {
        if (relevant.count(list.items[i])) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    const std::size_t denom = std::min(relevant.size(), k);
    return sum / static_cast<double>(denom);
}

MetricReport evaluate(const std::vector<RankedList>& lists, const GroundTruth& gt) {
    MetricReport report{};
    std::unordered_set<std::string_view> seen_queries;

    double ap_sum = 0.0;
    double p10_sum = 0.0;
    double pos_sum = 0.0;

    for (const auto& list : lists) {
        if (!seen_queries.insert(list.query_id).second) {
            throw std::runtime_error("evaluate: duplicate list for query '" + list.query_id + "'");
        }
        auto it = gt.find(list.query_id);
        if (it == gt.end()) {
            throw std::runtime_error("evaluate: query '" + list.query_id +
                                     "' missing from ground truth");
        }
        const auto& relevant = it->second;
        if (relevant.empty()) {
            ++report.skipped;
            continue;
        }

        QueryMetrics qm;
        qm.query_id = list.query_id;
        qm.ap_at_100 = ap_at_k(list, relevant, 100);

        std::size_t hits10 = 0;
        for (std::size_t i = 0; i < std::min<std::size_t>(10, list.items.size()); ++i) {
            if (relevant.count(list.items[i])) ++hits10;
        }
        qm.p_at_10 = static_cast<double>(hits10) / 10.0;

        qm.first_pos = 101;
        for (std::size_t i = 0; i < std::min<std::size_t>(100, list.items.size()); ++i) {
            if (relevant.count(list.items[i])) {
                qm.first_pos = static_cast<int>(i + 1);
                break;
            }
        }

        ap_sum += qm.ap_at_100;
        p10_sum += qm.p_at_10;
        pos_sum += static_cast<double>(qm.first_pos);
        report.per_query.push_back(std::move(qm));
        ++report.evaluated;
    }

    if (report.evaluated == 0) {
        throw std::runtime_error("evaluate: no query has a non-empty relevant set");
    }
    const double n = static_cast<double>(report.evaluated);
    report.map_at_100 = ap_sum / n;
    report.p_at_10 = p10_sum / n;
    report.mean_pos = pos_sum / n;
    return report;
}

GroundTruth parse_ground_truth_csv(std::string_view text) {
    GroundTruth gt;
    std::size_t start = 0;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (start < text.size()) {
        std::size_t pos = text.find('\n', start);
        if (pos == std::string_view::npos) pos = text.size();
        std::string_view line = text.substr(start, pos - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        start = pos + 1;
        if (!saw_header) {
            if (line != "query_id,relevant_ids") {
                throw std::runtime_error("ground truth CSV: expected header 'query_id,relevant_ids'");
            }
            saw_header = true;
            continue;
        }
        if (line.empty()) continue;
        std::size_t comma = line.find(',');
        if (comma == std::string_view::npos) {
            throw std::runtime_error("ground truth CSV line " + std::to_string(line_no) +
                                     ": missing comma");
        }
        std::string query(line.substr(0, comma));
        if (gt.count(query)) {
            throw std::runtime_error("ground truth CSV: duplicate query '" + query + "'");
        }
        auto& relevant = gt[query];
        std::string_view ids = line.substr(comma + 1);
        std::size_t item_start = 0;
        while (item_start < ids.size()) {
            std::size_t sp = ids.find(' ', item_start);
            if (sp == std::string_view::npos) sp = ids.size();
            if (sp > item_start) relevant.emplace(ids.substr(item_start, sp - item_start));
            item_start = sp + 1;
        }
    }
    if (!saw_header) throw std::runtime_error("ground truth CSV: empty file");
    return gt;
}

std::string ground_truth_csv(const GroundTruth& gt) {
    std::vector<std::string_view> queries;
    queries.reserve(gt.size());
    for (const auto& [q, ids] : gt) queries.push_back(q);
    std::sort(queries.begin(), queries.end());

    std::string out = "query_id,relevant_ids\n";
    for (auto q : queries) {
        std::vector<std::string_view> ids(gt.at(std::string(q)).begin(),
                                          gt.at(std::string(q)).end());
        std::sort(ids.begin(), ids.end());
        out += q;
        out += ',';
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (i) out += ' ';
            out += ids[i];
        }
        out += '\n';
    }
    return out;
}

std::string report_tsv(const MetricReport& report) {
    std::string out;
    out += "mAP@100\t" + format_real(report.map_at_100) + "\n";
    out += "P@10\t" + format_real(report.p_at_10) + "\n";
    out += "MeanPos\t" + format_real(report.mean_pos) + "\n";
    out += "evaluated\t" + std::to_string(report.evaluated) + "\n";
    out += "skipped\t" + std::to_string(report.skipped) + "\n";
    return out;
}

namespace {

// Display form only; the TSV keeps shortest round-trip precision.
std::string fixed8(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.8f", v);
    return buf;
}

}  // namespace

std::string report_summary(const MetricReport& report) {
    std::string out;
    out += "queries evaluated: " + std::to_string(report.evaluated);
    if (report.skipped) {
        out += " (" + std::to_string(report.skipped) + " skipped, no relevant ids)";
    }
    out += "\n";
    out += "mAP@100 = " + fixed8(report.map_at_100) + "\n";
    out += "P@10    = " + fixed8(report.p_at_10) + "\n";
    out += "MeanPos = " + fixed8(report.mean_pos) + "\n";
    return out;
}

}  // namespace lmrank
