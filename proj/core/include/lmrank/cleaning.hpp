#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lmrank/embedding_set.hpp"
#include "lmrank/local_features.hpp"

namespace lmrank {

// One mutual-nearest-neighbor keypoint pair between two images.
struct Correspondence {
    float x1, y1;
    float x2, y2;
    float similarity;  // descriptor cosine
};

struct AffineModel {
    double a11, a12, a21, a22;  // linear part, |det| > 1e-9
    double tx, ty;
};

struct RansacResult {
    AffineModel model;
    int inliers;
};

struct CleaningConfig {
    std::size_t nn_pool = 1000;     // neighbor pool per image, self excluded
    std::size_t per_label_cap = 100;  // same-label neighbors verified at most
    int inlier_min = 30;            // verified iff inliers strictly above this
    int tau_freq = 3;               // kept iff verified count reaches this
    int ransac_iters = 1000;
    double inlier_px = 10.0;
    std::uint64_t seed = 0;
};

// Mutual nearest neighbors in descriptor space; ties go to the lower
// keypoint index. Output ordered by ascending keypoint index in a.
std::vector<Correspondence> match_features(const ImageFeatures& a, const ImageFeatures& b);

// Seeded RANSAC over 3-point samples with a least-squares refit on the best
// consensus set and a final recount. The match list is canonicalized by
// sorting before sampling, so permuting the input cannot change the result.
// Throws on fewer than 3 matches or when every sampled triplet is collinear.
RansacResult ransac_affine(const std::vector<Correspondence>& matches, int iters,
                           double inlier_px, std::uint64_t seed);

// Three-step train-set cleaning. Returns kept ids in train row order. Pairs
// whose verification cannot run (under three matches, degenerate geometry)
// count as unverified rather than failing the run.
std::vector<std::string> clean(const EmbeddingSet& train, const FeatureCorpus& features,
                               const CleaningConfig& cfg, int threads = 0);

}  // namespace lmrank
