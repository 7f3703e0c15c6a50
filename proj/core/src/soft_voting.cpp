#include "lmrank/soft_voting.hpp"

#include <algorithm>
#include <stdexcept>

#include "lmrank/knn.hpp"
#include "lmrank/parallel.hpp"
#include "lmrank/util.hpp"

namespace lmrank {

namespace {

// Argmax over the full label table given the neighbor list. Only ordinals
// present among the neighbors can score nonzero, so the absent side of the
// argmax collapses to a single zero-valued candidate at the smallest absent
// ordinal.
Prediction vote_from_neighbors(const NeighborList& neighbors, const std::vector<int>& ordinals,
                               std::size_t label_count, std::size_t k,
                               std::vector<double>& sums, std::vector<int>& present) {
    present.clear();
    for (const Neighbor& n : neighbors) {
        const int ord = ordinals[n.index];
        if (std::find(present.begin(), present.end(), ord) == present.end()) {
            present.push_back(ord);
            sums[static_cast<std::size_t>(ord)] = 0.0;
        }
        sums[static_cast<std::size_t>(ord)] += static_cast<double>(n.similarity);
    }
    std::sort(present.begin(), present.end());

    int best_ord = -1;
    double best_v = 0.0;
    for (int ord : present) {
        const double v = sums[static_cast<std::size_t>(ord)];
        if (best_ord < 0 || v > best_v) {
            best_ord = ord;
            best_v = v;
        }
        // Equal v keeps the earlier ordinal: present is sorted ascending.
    }

    if (present.size() < label_count) {
        // Smallest ordinal with no neighbor; its vote value is exactly zero.
        int absent = 0;
        for (int ord : present) {
            if (ord != absent) break;
            ++absent;
        }
        if (best_ord < 0 || 0.0 > best_v || (0.0 == best_v && absent < best_ord)) {
            best_ord = absent;
            best_v = 0.0;
        }
    }

    return Prediction{best_ord, best_v / static_cast<double>(k)};
}

}  // namespace

void PredictionTable::set(const std::string& id, Prediction pred, Provenance prov) {
    auto it = entries_.find(id);
    if (it == entries_.end()) {
        ids_.push_back(id);
        entries_.emplace(id, Entry{pred, prov});
    } else {
        it->second = Entry{pred, prov};
    }
}

bool PredictionTable::contains(std::string_view id) const {
    return entries_.find(std::string(id)) != entries_.end();
}

const Prediction& PredictionTable::at(std::string_view id) const {
    auto it = entries_.find(std::string(id));
    if (it == entries_.end()) throw std::runtime_error("no prediction for id '" + std::string(id) + "'");
    return it->second.pred;
}

Provenance PredictionTable::provenance_of(std::string_view id) const {
    auto it = entries_.find(std::string(id));
    if (it == entries_.end()) throw std::runtime_error("no prediction for id '" + std::string(id) + "'");
    return it->second.prov;
}

Prediction vote(std::span<const float> sample, const EmbeddingSet& train, const LabelTable& table,
                std::size_t k) {
    if (train.count() == 0) throw std::runtime_error("empty train set");
    if (!train.has_labels()) throw std::runtime_error("train set has no labels");
    if (k == 0) throw std::runtime_error("k must be positive");
    if (sample.size() != train.dim()) throw std::runtime_error("sample dim mismatch");

    const std::vector<int> ordinals = label_ordinals(train, table);
    auto lists = search_vectors(sample, train.dim(), train, k, 1);
    std::vector<double> sums(table.size());
    std::vector<int> present;
    return vote_from_neighbors(lists[0], ordinals, table.size(), k, sums, present);
}

PredictionTable predict_index(const EmbeddingSet& index, const EmbeddingSet& train,
                              const LabelTable& table, std::size_t k, int threads) {
    if (train.count() == 0) throw std::runtime_error("empty train set");
    if (!train.has_labels()) throw std::runtime_error("train set has no labels");
    if (k == 0) throw std::runtime_error("k must be positive");
    if (index.count() > 0 && index.dim() != train.dim()) {
        throw std::runtime_error("index/train dim mismatch");
    }

    const std::vector<int> ordinals = label_ordinals(train, table);
    std::vector<Prediction> preds(index.count());
    parallel_chunks(index.count(), threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> sums(table.size());
        std::vector<int> present;
        for (std::size_t i = begin; i < end; ++i) {
            auto lists = search_vectors(index.row(i), index.dim(), train, k, 1);
            preds[i] = vote_from_neighbors(lists[0], ordinals, table.size(), k, sums, present);
        }
    });

    PredictionTable out;
    for (std::size_t i = 0; i < index.count(); ++i) {
        out.set(index.id(i), preds[i], Provenance::voted);
    }
    return out;
}

PredictionTable mark_known(PredictionTable table, const std::vector<std::string>& train_members,
                           const std::unordered_map<std::string, std::string>& labels,
                           const LabelTable& ordinals) {
    for (const auto& id : train_members) {
        if (!table.contains(id)) continue;
        auto it = labels.find(id);
        if (it == labels.end()) {
            throw std::runtime_error("train member '" + id + "' has no label");
        }
        table.set(id, Prediction{ordinals.ordinal(it->second), 1.0}, Provenance::known_label);
    }
    return table;
}

std::string predictions_tsv(const PredictionTable& table, const LabelTable& labels) {
    std::string out;
    for (const auto& id : table.ids()) {
        const Prediction& p = table.at(id);
        out += id;
        out += '\t';
        out += labels.label(p.label);
        out += '\t';
        out += format_real(p.score);
        out += '\t';
        out += table.provenance_of(id) == Provenance::known_label ? "known-label" : "voted";
        out += '\n';
    }
    return out;
}

PredictionTable parse_predictions_tsv(std::string_view text, const LabelTable& labels) {
    PredictionTable out;
    std::size_t start = 0;
    std::size_t line_no = 0;
    while (start < text.size()) {
        std::size_t pos = text.find('\n', start);
        if (pos == std::string_view::npos) pos = text.size();
        std::string_view line = text.substr(start, pos - start);
        ++line_no;
        if (!line.empty()) {
            auto cols = split(line, '\t');
            if (cols.size() != 4) {
                throw std::runtime_error("predictions line " + std::to_string(line_no) +
                                         ": expected 4 tab-separated columns");
            }
            Provenance prov;
            if (cols[3] == "voted") {
                prov = Provenance::voted;
            } else if (cols[3] == "known-label") {
                prov = Provenance::known_label;
            } else {
                throw std::runtime_error("predictions line " + std::to_string(line_no) +
                                         ": bad provenance '" + std::string(cols[3]) + "'");
            }
            out.set(std::string(cols[0]),
                    Prediction{labels.ordinal(cols[1]), parse_real(cols[2])}, prov);
        }
        start = pos + 1;
    }
    return out;
}

}  // namespace lmrank
