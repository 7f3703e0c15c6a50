#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lmrank/embedding_set.hpp"

namespace lmrank {

struct Prediction {
    int label;     // ordinal into a LabelTable
    double score;  // winning vote value, already divided by k
};

enum class Provenance { voted, known_label };

// Complete prediction map for one index set. Ids keep creation order so
// dumps are reproducible.
class PredictionTable {
public:
    void set(const std::string& id, Prediction pred, Provenance prov);
    bool contains(std::string_view id) const;
    const Prediction& at(std::string_view id) const;   // throws if absent
    Provenance provenance_of(std::string_view id) const;  // throws if absent
    const std::vector<std::string>& ids() const { return ids_; }
    std::size_t size() const { return ids_.size(); }

private:
    struct Entry {
        Prediction pred;
        Provenance prov;
    };
    std::vector<std::string> ids_;
    std::unordered_map<std::string, Entry> entries_;
};

// Eq.-3 soft-voting: v(x,c) = (1/k) * sum of cosine similarities of the
// top-k train neighbors carrying label c, argmax over every label in the
// table (absent labels score zero). Ties go to the lower ordinal. The sum
// divides by the requested k even when the train set has fewer rows.
Prediction vote(std::span<const float> sample, const EmbeddingSet& train, const LabelTable& table,
                std::size_t k);

PredictionTable predict_index(const EmbeddingSet& index, const EmbeddingSet& train,
                              const LabelTable& table, std::size_t k, int threads = 0);

// Overwrites entries for ids in train_members with their true label at
// score exactly 1.0. Members carrying no label are an error; members absent
// from the table are skipped.
PredictionTable mark_known(PredictionTable table, const std::vector<std::string>& train_members,
                           const std::unordered_map<std::string, std::string>& labels,
                           const LabelTable& ordinals);

// TSV `id<TAB>label<TAB>score<TAB>provenance`, rows in table id order.
std::string predictions_tsv(const PredictionTable& table, const LabelTable& labels);
PredictionTable parse_predictions_tsv(std::string_view text, const LabelTable& labels);

}  // namespace lmrank
