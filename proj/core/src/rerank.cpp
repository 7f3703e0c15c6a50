#include "lmrank/rerank.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

#include "lmrank/parallel.hpp"

namespace lmrank {

void validate_ranked_list(const RankedList& list) {
    if (list.capacity == 0) throw std::runtime_error("ranked list capacity must be positive");
    if (list.items.size() > list.capacity) {
        throw std::runtime_error("ranked list for '" + list.query_id + "' has " +
                                 std::to_string(list.items.size()) + " items, capacity " +
                                 std::to_string(list.capacity));
    }
    std::unordered_set<std::string_view> seen;
    for (const auto& id : list.items) {
        if (!seen.insert(id).second) {
            throw std::runtime_error("ranked list for '" + list.query_id + "' repeats id '" + id +
                                     "'");
        }
    }
}

RankedList sort_step(const RankedList& list, const RerankContext& ctx) {
    RankedList out = list;
    std::stable_partition(out.items.begin(), out.items.end(), [&](const std::string& id) {
        return ctx.predictions->at(id).label == ctx.query.label;
    });
    return out;
}

RankedList insert_step(const RankedList& list, const RerankContext& ctx,
                       const std::vector<std::string>& pool) {
    std::unordered_set<std::string_view> in_list(list.items.begin(), list.items.end());

    struct Candidate {
        const std::string* id;
        double score;
    };
    std::vector<Candidate> candidates;
    for (const auto& id : pool) {
        if (in_list.count(id)) continue;
        const Prediction& p = ctx.predictions->at(id);
        if (p.label != ctx.query.label) continue;
        if (!(ctx.query.score + p.score > ctx.tau_score)) continue;
        candidates.push_back(Candidate{&id, p.score});
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return *a.id < *b.id;
    });

    std::size_t positives = 0;
    while (positives < list.items.size() &&
           ctx.predictions->at(list.items[positives]).label == ctx.query.label) {
        ++positives;
    }

    RankedList out;
    out.query_id = list.query_id;
    out.capacity = list.capacity;
    out.items.reserve(std::min(list.capacity, list.items.size() + candidates.size()));
    for (std::size_t i = 0; i < positives; ++i) out.items.push_back(list.items[i]);
    for (const Candidate& c : candidates) out.items.push_back(*c.id);
    for (std::size_t i = positives; i < list.items.size(); ++i) out.items.push_back(list.items[i]);
    if (out.items.size() > out.capacity) out.items.resize(out.capacity);
    return out;
}

RankedList rerank(const RankedList& list, const RerankContext& ctx,
                  const std::vector<std::string>& pool) {
    return insert_step(sort_step(list, ctx), ctx, pool);
}

std::vector<RankedList> rerank_all(const std::vector<RankedList>& lists,
                                   const std::vector<Prediction>& query_preds,
                                   const PredictionTable& predictions, double tau_score,
                                   const std::vector<std::string>& pool, int threads) {
    if (lists.size() != query_preds.size()) {
        throw std::runtime_error("one query prediction per ranked list required");
    }
    std::vector<RankedList> out(lists.size());
    parallel_chunks(lists.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            RerankContext ctx{query_preds[i], &predictions, tau_score};
            out[i] = rerank(lists[i], ctx, pool);
        }
    });
    return out;
}

std::string ranked_lists_csv(std::span<const RankedList> lists) {
    std::string out = "id,images\n";
    for (const auto& list : lists) {
        out += list.query_id;
        out += ',';
        for (std::size_t i = 0; i < list.items.size(); ++i) {
            if (i) out += ' ';
            out += list.items[i];
        }
        out += '\n';
    }
    return out;
}

std::vector<RankedList> parse_ranked_lists_csv(std::string_view text, std::size_t capacity) {
    std::vector<RankedList> out;
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
            if (line != "id,images") {
                throw std::runtime_error("ranked list CSV: expected header 'id,images'");
            }
            saw_header = true;
            continue;
        }
        if (line.empty()) continue;
        std::size_t comma = line.find(',');
        if (comma == std::string_view::npos) {
            throw std::runtime_error("ranked list CSV line " + std::to_string(line_no) +
                                     ": missing comma");
        }
        RankedList list;
        list.query_id = std::string(line.substr(0, comma));
        list.capacity = capacity;
        std::string_view items = line.substr(comma + 1);
        std::size_t item_start = 0;
        while (item_start < items.size()) {
            std::size_t sp = items.find(' ', item_start);
            if (sp == std::string_view::npos) sp = items.size();
            if (sp > item_start) {
                list.items.emplace_back(items.substr(item_start, sp - item_start));
            }
            item_start = sp + 1;
        }
        validate_ranked_list(list);
        out.push_back(std::move(list));
    }
    if (!saw_header) throw std::runtime_error("ranked list CSV: empty file");
    return out;
}

}  // namespace lmrank
