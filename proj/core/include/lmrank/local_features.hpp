#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lmrank {

// Keypoints and unit-norm descriptors for one image. coords holds x,y pairs;
// descriptors holds count rows of dim values.
struct ImageFeatures {
    std::string id;
    std::size_t dim = 0;
    std::vector<float> coords;
    std::vector<float> descriptors;

    std::size_t count() const { return coords.size() / 2; }
    const float* descriptor(std::size_t i) const { return descriptors.data() + i * dim; }
    float x(std::size_t i) const { return coords[2 * i]; }
    float y(std::size_t i) const { return coords[2 * i + 1]; }
};

// Corpus keyed by image id; descriptor dim is uniform across the corpus.
// Iteration order is insertion order so serialization is reproducible.
class FeatureCorpus {
public:
    void add(ImageFeatures image);  // validates shape, norm, id uniqueness
    bool contains(std::string_view id) const;
    const ImageFeatures& at(std::string_view id) const;  // throws if absent
    const std::vector<std::string>& ids() const { return ids_; }
    std::size_t size() const { return ids_.size(); }
    std::size_t dim() const { return dim_; }  // 0 until a first image is added

private:
    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::unordered_map<std::string, ImageFeatures> images_;
};

// Binary LFT1 container: magic, u32 image count; per image u32 id length +
// id bytes, u32 keypoint count, u32 descriptor dim, then per keypoint
// 2 x f32 coords and dim x f32 descriptor. All integers and floats LE.
FeatureCorpus load_features(const std::string& path);
void save_features(const FeatureCorpus& corpus, const std::string& path);

}  // namespace lmrank
