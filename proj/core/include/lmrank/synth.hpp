#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "lmrank/embedding_set.hpp"
#include "lmrank/local_features.hpp"
#include "lmrank/metrics.hpp"

namespace lmrank {

// Every class gets two unit-sphere modes at least 60 degrees apart;
// dissimilar_fraction of its items land in the second mode. That plants the
// hard case this engine exists for: same-instance items the embedding
// places far apart.
struct SynthConfig {
    std::uint64_t seed = 0;
    std::size_t dim = 64;
    std::size_t n_classes = 50;
    std::size_t items_per_class = 40;
    double dissimilar_fraction = 0.3;
    double cluster_spread = 0.15;
    double train_ratio = 0.5;
    double index_ratio = 0.4;
    double query_ratio = 0.1;
};

struct SynthData {
    EmbeddingSet train;    // labeled
    EmbeddingSet index;    // unlabeled
    EmbeddingSet queries;  // unlabeled
    GroundTruth gt;        // query id -> same-class index ids
    // True assignments for index and query items; generator metadata used
    // by oracle checks, never by the pipeline itself.
    std::unordered_map<std::string, std::string> index_labels;
    std::unordered_map<std::string, std::string> query_labels;
};

SynthData generate(const SynthConfig& cfg);

// Local-feature corpus with geometric consistency planted per label group:
// images of one group carry the same base keypoints pushed through a random
// per-image affine (identity plus uniform jitter entries, translation in
// pixels), so any same-group pair is related by an exact affine map.
// Clutter keypoints get fresh random descriptors.
struct FeatureSynthConfig {
    std::uint64_t seed = 0;
    std::size_t desc_dim = 16;
    std::size_t shared_per_group = 40;
    std::size_t clutter_per_image = 10;
    double jitter = 0.05;       // linear-part perturbation, unitless
    double translate_px = 20.0;  // translation range, +/- px
    double noise_px = 0.0;      // coordinate noise after the transform
};

FeatureCorpus generate_features(const std::vector<std::string>& ids,
                                const std::vector<std::string>& labels,
                                const FeatureSynthConfig& cfg);

}  // namespace lmrank
