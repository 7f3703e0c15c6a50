#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lmrank {

// Dense 0-based label ordinals in lexicographic label order. Ordinals are
// the tie-break key for soft-voting, so the ordering must be deterministic.
class LabelTable {
public:
    LabelTable() = default;
    explicit LabelTable(std::vector<std::string> labels);  // dedupes and sorts

    std::size_t size() const { return labels_.size(); }
    bool contains(std::string_view label) const;
    int ordinal(std::string_view label) const;  // throws if absent
    const std::string& label(int ordinal) const;
    const std::vector<std::string>& all() const { return labels_; }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, int> ordinals_;
};

// Immutable id-indexed matrix of unit-norm float32 rows. Labels are carried
// only by train sets. Safe for concurrent reads.
class EmbeddingSet {
public:
    EmbeddingSet() = default;

    // normalize=true re-normalizes every row (64-bit accumulation, rejecting
    // zero rows); normalize=false requires rows already unit within 1e-4.
    static EmbeddingSet from_rows(std::size_t dim, std::vector<std::string> ids,
                                  std::vector<float> data, bool normalize,
                                  std::unordered_map<std::string, std::string> labels = {});

    std::size_t dim() const { return dim_; }
    std::size_t count() const { return ids_.size(); }
    std::span<const float> row(std::size_t i) const {
        return std::span<const float>(data_.data() + i * dim_, dim_);
    }
    const std::vector<float>& data() const { return data_; }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::string& id(std::size_t i) const { return ids_[i]; }
    std::optional<std::size_t> index_of(std::string_view id) const;

    bool has_labels() const { return !labels_.empty(); }
    const std::unordered_map<std::string, std::string>& labels() const { return labels_; }
    const std::string& label_of(std::size_t i) const;  // throws if unlabeled

private:
    std::size_t dim_ = 0;
    std::vector<float> data_;  // count x dim, row-major
    std::vector<std::string> ids_;
    std::unordered_map<std::string, std::size_t> index_;
    std::unordered_map<std::string, std::string> labels_;
};

LabelTable make_label_table(const EmbeddingSet& train);

// Per-row label ordinals resolved against `table`.
std::vector<int> label_ordinals(const EmbeddingSet& train, const LabelTable& table);

// EMB1 file plus `<stem>.ids` sidecar next to it. The labels path is
// optional; when given the TSV must cover every id exactly once.
EmbeddingSet load_embeddings(const std::string& emb_path, bool normalize,
                             const std::string& labels_path = {});
EmbeddingSet load_embeddings_with_ids(const std::string& emb_path, const std::string& ids_path,
                                      bool normalize, const std::string& labels_path = {});

// Writes the EMB1 file and its `<stem>.ids` sidecar.
void save_embeddings(const EmbeddingSet& set, const std::string& emb_path);

std::unordered_map<std::string, std::string> read_labels_tsv(const std::string& path);
void write_labels_tsv(const EmbeddingSet& set, const std::string& path);

// Element-wise mean of per-id rows across scales, then L2 re-normalized.
// All inputs must share ids, order and dim. Exact cancellation is an error.
EmbeddingSet merge_multiscale(std::span<const EmbeddingSet> scales);

}  // namespace lmrank
