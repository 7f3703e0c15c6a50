#include "lmrank/embedding_set.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lmrank/util.hpp"

namespace lmrank {

namespace {

constexpr double kZeroNorm = 1e-30;

void check_id(std::string_view id) {
    if (id.empty()) throw std::runtime_error("empty id");
    for (char c : id) {
        if (c == ' ' || c == ',' || c == '\t' || c == '\r' || c == '\n') {
            throw std::runtime_error("id contains whitespace or comma: '" + std::string(id) + "'");
        }
    }
}

double row_norm(const float* row, std::size_t dim) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        acc += static_cast<double>(row[d]) * static_cast<double>(row[d]);
    }
    return std::sqrt(acc);
}

std::string ids_sidecar_path(const std::string& emb_path) {
    std::size_t slash = emb_path.find_last_of('/');
    std::size_t dot = emb_path.find_last_of('.');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
        return emb_path + ".ids";
    }
    return emb_path.substr(0, dot) + ".ids";
}

}  // namespace

LabelTable::LabelTable(std::vector<std::string> labels) {
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    labels_ = std::move(labels);
    ordinals_.reserve(labels_.size());
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        ordinals_.emplace(labels_[i], static_cast<int>(i));
    }
}

bool LabelTable::contains(std::string_view label) const {
    return ordinals_.find(std::string(label)) != ordinals_.end();
}

int LabelTable::ordinal(std::string_view label) const {
    auto it = ordinals_.find(std::string(label));
    if (it == ordinals_.end()) {
        throw std::runtime_error("unknown label: '" + std::string(label) + "'");
    }
    return it->second;
}

const std::string& LabelTable::label(int ordinal) const {
    if (ordinal < 0 || static_cast<std::size_t>(ordinal) >= labels_.size()) {
        throw std::runtime_error("label ordinal out of range");
    }
    return labels_[static_cast<std::size_t>(ordinal)];
}

EmbeddingSet EmbeddingSet::from_rows(std::size_t dim, std::vector<std::string> ids,
                                     std::vector<float> data, bool normalize,
                                     std::unordered_map<std::string, std::string> labels) {
    if (dim == 0) throw std::runtime_error("dim must be positive");
    if (data.size() != ids.size() * dim) {
        throw std::runtime_error("count/dim mismatch: " + std::to_string(data.size()) +
                                 " values for " + std::to_string(ids.size()) + " rows of dim " +
                                 std::to_string(dim));
    }

    for (float v : data) {
        if (!std::isfinite(v)) throw std::runtime_error("non-finite value in embedding data");
    }

    for (std::size_t i = 0; i < ids.size(); ++i) {
        check_id(ids[i]);
        float* row = data.data() + i * dim;
        double norm = row_norm(row, dim);
        if (normalize) {
            if (norm < kZeroNorm) {
                throw std::runtime_error("zero-norm row at index " + std::to_string(i) + " (id '" +
                                         ids[i] + "')");
            }
            for (std::size_t d = 0; d < dim; ++d) {
                row[d] = static_cast<float>(static_cast<double>(row[d]) / norm);
            }
        } else if (std::abs(norm - 1.0) > 1e-4) {
            throw std::runtime_error("row " + std::to_string(i) + " is not unit norm (|v| = " +
                                     format_real(norm) + "); load with normalize enabled");
        }
    }

    EmbeddingSet set;
    set.dim_ = dim;
    set.data_ = std::move(data);
    set.ids_ = std::move(ids);
    set.index_.reserve(set.ids_.size());
    for (std::size_t i = 0; i < set.ids_.size(); ++i) {
        if (!set.index_.emplace(set.ids_[i], i).second) {
            throw std::runtime_error("duplicate id: '" + set.ids_[i] + "'");
        }
    }

    if (!labels.empty()) {
        for (const auto& [id, label] : labels) {
            if (set.index_.find(id) == set.index_.end()) {
                throw std::runtime_error("label for unknown id: '" + id + "'");
            }
            check_id(label);
        }
        for (const auto& id : set.ids_) {
            if (labels.find(id) == labels.end()) {
                throw std::runtime_error("id without label: '" + id + "'");
            }
        }
        set.labels_ = std::move(labels);
    }
    return set;
}

std::optional<std::size_t> EmbeddingSet::index_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const std::string& EmbeddingSet::label_of(std::size_t i) const {
    auto it = labels_.find(ids_[i]);
    if (it == labels_.end()) {
        throw std::runtime_error("no label for id '" + ids_[i] + "'");
    }
    return it->second;
}

LabelTable make_label_table(const EmbeddingSet& train) {
    if (!train.has_labels()) throw std::runtime_error("embedding set has no labels");
    std::vector<std::string> labels;
    labels.reserve(train.labels().size());
    for (const auto& [id, label] : train.labels()) labels.push_back(label);
    return LabelTable(std::move(labels));
}

std::vector<int> label_ordinals(const EmbeddingSet& train, const LabelTable& table) {
    std::vector<int> out(train.count());
    for (std::size_t i = 0; i < train.count(); ++i) {
        out[i] = table.ordinal(train.label_of(i));
    }
    return out;
}

EmbeddingSet load_embeddings(const std::string& emb_path, bool normalize,
                             const std::string& labels_path) {
    return load_embeddings_with_ids(emb_path, ids_sidecar_path(emb_path), normalize, labels_path);
}

EmbeddingSet load_embeddings_with_ids(const std::string& emb_path, const std::string& ids_path,
                                      bool normalize, const std::string& labels_path) {
    std::string blob = read_file(emb_path);
    if (blob.size() < 12) throw std::runtime_error("malformed header in '" + emb_path + "'");
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data());
    if (std::memcmp(p, "EMB1", 4) != 0) {
        throw std::runtime_error("malformed header in '" + emb_path + "': bad magic");
    }
    const std::uint32_t count = get_u32_le(p + 4);
    const std::uint32_t dim = get_u32_le(p + 8);
    if (dim == 0) throw std::runtime_error("malformed header in '" + emb_path + "': dim is zero");
    const std::size_t expected = 12 + static_cast<std::size_t>(count) * dim * 4;
    if (blob.size() != expected) {
        throw std::runtime_error("count/dim mismatch in '" + emb_path + "': expected " +
                                 std::to_string(expected) + " bytes, got " +
                                 std::to_string(blob.size()));
    }

    std::vector<float> data(static_cast<std::size_t>(count) * dim);
    for (std::size_t i = 0; i < data.size(); ++i) {
        data[i] = get_f32_le(p + 12 + i * 4);
    }

    std::string id_blob = read_file(ids_path);
    std::vector<std::string> ids;
    ids.reserve(count);
    std::size_t start = 0;
    while (start < id_blob.size()) {
        std::size_t pos = id_blob.find('\n', start);
        if (pos == std::string::npos) pos = id_blob.size();
        ids.emplace_back(id_blob.substr(start, pos - start));
        start = pos + 1;
    }
    if (ids.size() != count) {
        throw std::runtime_error("id sidecar '" + ids_path + "' has " + std::to_string(ids.size()) +
                                 " lines, embeddings declare " + std::to_string(count));
    }

    std::unordered_map<std::string, std::string> labels;
    if (!labels_path.empty()) labels = read_labels_tsv(labels_path);

    return EmbeddingSet::from_rows(dim, std::move(ids), std::move(data), normalize,
                                   std::move(labels));
}

void save_embeddings(const EmbeddingSet& set, const std::string& emb_path) {
    std::string blob;
    blob.reserve(12 + set.data().size() * 4);
    blob.append("EMB1");
    put_u32_le(blob, static_cast<std::uint32_t>(set.count()));
    put_u32_le(blob, static_cast<std::uint32_t>(set.dim()));
    for (float v : set.data()) put_f32_le(blob, v);
    write_file(emb_path, blob);

    std::string ids;
    for (const auto& id : set.ids()) {
        ids += id;
        ids += '\n';
    }
    write_file(ids_sidecar_path(emb_path), ids);
}

std::unordered_map<std::string, std::string> read_labels_tsv(const std::string& path) {
    std::string blob = read_file(path);
    std::unordered_map<std::string, std::string> labels;
    std::size_t start = 0;
    std::size_t line_no = 0;
    while (start < blob.size()) {
        std::size_t pos = blob.find('\n', start);
        if (pos == std::string::npos) pos = blob.size();
        std::string_view line(blob.data() + start, pos - start);
        ++line_no;
        if (!line.empty()) {
            std::size_t tab = line.find('\t');
            if (tab == std::string_view::npos) {
                throw std::runtime_error("labels file '" + path + "' line " +
                                         std::to_string(line_no) + ": missing tab");
            }
            std::string id(line.substr(0, tab));
            std::string label(line.substr(tab + 1));
            if (!labels.emplace(id, std::move(label)).second) {
                throw std::runtime_error("labels file '" + path + "': duplicate id '" + id + "'");
            }
        }
        start = pos + 1;
    }
    return labels;
}

void write_labels_tsv(const EmbeddingSet& set, const std::string& path) {
    if (!set.has_labels()) throw std::runtime_error("embedding set has no labels");
    std::string out;
    for (const auto& id : set.ids()) {
        out += id;
        out += '\t';
        out += set.labels().at(id);
        out += '\n';
    }
    write_file(path, out);
}

EmbeddingSet merge_multiscale(std::span<const EmbeddingSet> scales) {
    if (scales.empty()) throw std::runtime_error("merge_multiscale: no input sets");
    const EmbeddingSet& first = scales.front();
    for (const auto& s : scales) {
        if (s.dim() != first.dim()) throw std::runtime_error("merge_multiscale: dim mismatch");
        if (s.ids() != first.ids()) throw std::runtime_error("merge_multiscale: id mismatch");
    }

    const std::size_t dim = first.dim();
    const std::size_t count = first.count();
    const std::size_t n = scales.size();
    std::vector<float> merged(count * dim);
    std::vector<double> addends(n);

    for (std::size_t i = 0; i < count; ++i) {
        std::vector<double> mean(dim);
        for (std::size_t d = 0; d < dim; ++d) {
            for (std::size_t s = 0; s < n; ++s) {
                addends[s] = static_cast<double>(scales[s].row(i)[d]);
            }
            // Summed in sorted order so the scale ordering never shows up
            // in the result.
            std::sort(addends.begin(), addends.end());
            double acc = 0.0;
            for (double a : addends) acc += a;
            mean[d] = acc / static_cast<double>(n);
        }
        double norm = 0.0;
        for (double m : mean) norm += m * m;
        norm = std::sqrt(norm);
        if (norm < 1e-12) {
            throw std::runtime_error("merge_multiscale: zero-norm row for id '" + first.id(i) +
                                     "' (scales cancel)");
        }
        for (std::size_t d = 0; d < dim; ++d) {
            merged[i * dim + d] = static_cast<float>(mean[d] / norm);
        }
    }

    return EmbeddingSet::from_rows(dim, first.ids(), std::move(merged), false,
                                   first.has_labels() ? first.labels()
                                                      : std::unordered_map<std::string, std::string>{});
}

}  // namespace lmrank
