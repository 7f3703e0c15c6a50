#include "lmrank/local_features.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "lmrank/util.hpp"

namespace lmrank {

void FeatureCorpus::add(ImageFeatures image) {
    if (image.id.empty()) throw std::runtime_error("feature image with empty id");
    if (image.coords.size() % 2 != 0) {
        throw std::runtime_error("feature image '" + image.id + "': odd coordinate count");
    }
    const std::size_t n = image.count();
    if (n > 0 && image.dim == 0) {
        throw std::runtime_error("feature image '" + image.id + "': zero descriptor dim");
    }
    if (image.descriptors.size() != n * image.dim) {
        throw std::runtime_error("feature image '" + image.id + "': descriptor buffer size " +
                                 std::to_string(image.descriptors.size()) + " for " +
                                 std::to_string(n) + " keypoints of dim " +
                                 std::to_string(image.dim));
    }
    for (float v : image.coords) {
        if (!std::isfinite(v)) {
            throw std::runtime_error("feature image '" + image.id + "': non-finite coordinate");
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double norm = 0.0;
        const float* d = image.descriptor(i);
        for (std::size_t k = 0; k < image.dim; ++k) {
            if (!std::isfinite(d[k])) {
                throw std::runtime_error("feature image '" + image.id +
                                         "': non-finite descriptor value");
            }
            norm += static_cast<double>(d[k]) * static_cast<double>(d[k]);
        }
        if (std::abs(std::sqrt(norm) - 1.0) > 1e-4) {
            throw std::runtime_error("feature image '" + image.id + "': descriptor " +
                                     std::to_string(i) + " is not unit norm");
        }
    }
    if (dim_ == 0) {
        dim_ = image.dim;
    } else if (image.dim != 0 && image.dim != dim_) {
        throw std::runtime_error("feature image '" + image.id + "': descriptor dim " +
                                 std::to_string(image.dim) + " differs from corpus dim " +
                                 std::to_string(dim_));
    }
    std::string id = image.id;
    if (!images_.emplace(id, std::move(image)).second) {
        throw std::runtime_error("duplicate feature image id '" + id + "'");
    }
    ids_.push_back(std::move(id));
}

bool FeatureCorpus::contains(std::string_view id) const {
    return images_.find(std::string(id)) != images_.end();
}

const ImageFeatures& FeatureCorpus::at(std::string_view id) const {
    auto it = images_.find(std::string(id));
    if (it == images_.end()) {
        throw std::runtime_error("no features for id '" + std::string(id) + "'");
    }
    return it->second;
}

FeatureCorpus load_features(const std::string& path) {
    const std::string blob = read_file(path);
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data());
    const std::size_t size = blob.size();
    if (size < 8 || std::memcmp(p, "LFT1", 4) != 0) {
        throw std::runtime_error("malformed header in '" + path + "'");
    }
    const std::uint32_t image_count = get_u32_le(p + 4);
    std::size_t off = 8;

    auto need = [&](std::size_t bytes) {
        if (size - off < bytes) {
            throw std::runtime_error("truncated feature file '" + path + "'");
        }
    };

    FeatureCorpus corpus;
    for (std::uint32_t img = 0; img < image_count; ++img) {
        need(4);
        const std::uint32_t id_len = get_u32_le(p + off);
        off += 4;
        need(id_len);
        ImageFeatures image;
        image.id.assign(blob.data() + off, id_len);
        off += id_len;
        need(8);
        const std::uint32_t kp_count = get_u32_le(p + off);
        const std::uint32_t dim = get_u32_le(p + off + 4);
        off += 8;
        image.dim = dim;
        const std::size_t floats = static_cast<std::size_t>(kp_count) * (2 + dim);
        need(floats * 4);
        image.coords.reserve(2 * kp_count);
        image.descriptors.reserve(static_cast<std::size_t>(kp_count) * dim);
        for (std::uint32_t i = 0; i < kp_count; ++i) {
            image.coords.push_back(get_f32_le(p + off));
            image.coords.push_back(get_f32_le(p + off + 4));
            off += 8;
            for (std::uint32_t d = 0; d < dim; ++d) {
                image.descriptors.push_back(get_f32_le(p + off));
                off += 4;
            }
        }
        corpus.add(std::move(image));
    }
    if (off != size) {
        throw std::runtime_error("trailing bytes in feature file '" + path + "'");
    }
    return corpus;
}

void save_features(const FeatureCorpus& corpus, const std::string& path) {
    std::string blob;
    blob.append("LFT1");
    put_u32_le(blob, static_cast<std::uint32_t>(corpus.size()));
    for (const auto& id : corpus.ids()) {
        const ImageFeatures& image = corpus.at(id);
        put_u32_le(blob, static_cast<std::uint32_t>(id.size()));
        blob.append(id);
        put_u32_le(blob, static_cast<std::uint32_t>(image.count()));
        put_u32_le(blob, static_cast<std::uint32_t>(image.dim));
        for (std::size_t i = 0; i < image.count(); ++i) {
            put_f32_le(blob, image.x(i));
            put_f32_le(blob, image.y(i));
            const float* d = image.descriptor(i);
            for (std::size_t k = 0; k < image.dim; ++k) put_f32_le(blob, d[k]);
        }
    }
    write_file(path, blob);
}

}  // namespace lmrank
