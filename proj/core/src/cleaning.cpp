#include "lmrank/cleaning.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lmrank/knn.hpp"
#include "lmrank/parallel.hpp"
#include "lmrank/rng.hpp"
#include "lmrank/util.hpp"

namespace lmrank {

namespace {

// Row-major 3x3 solve by Gaussian elimination with partial pivoting.
// Returns false when the pivot vanishes.
bool solve3(double m[3][3], double b[3], double out[3]) {
    int perm[3] = {0, 1, 2};
    for (int col = 0; col < 3; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 3; ++r) {
            if (std::abs(m[perm[r]][col]) > std::abs(m[perm[pivot]][col])) pivot = r;
        }
        std::swap(perm[col], perm[pivot]);
        const double p = m[perm[col]][col];
        if (std::abs(p) < 1e-12) return false;
        for (int r = col + 1; r < 3; ++r) {
            const double f = m[perm[r]][col] / p;
            for (int c = col; c < 3; ++c) m[perm[r]][c] -= f * m[perm[col]][c];
            b[perm[r]] -= f * b[perm[col]];
        }
    }
    for (int col = 2; col >= 0; --col) {
        double acc = b[perm[col]];
        for (int c = col + 1; c < 3; ++c) acc -= m[perm[col]][c] * out[c];
        out[col] = acc / m[perm[col]][col];
    }
    return true;
}

double det3(const double m[3][3]) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

bool fit_affine(const Correspondence* pts[3], AffineModel& out) {
    double m[3][3];
    for (int k = 0; k < 3; ++k) {
        m[k][0] = pts[k]->x1;
        m[k][1] = pts[k]->y1;
        m[k][2] = 1.0;
    }
    if (std::abs(det3(m)) < 1e-9) return false;  // collinear sample

    double mx[3][3], bx[3], cx[3];
    double my[3][3], by[3], cy[3];
    for (int k = 0; k < 3; ++k) {
        for (int c = 0; c < 3; ++c) {
            mx[k][c] = m[k][c];
            my[k][c] = m[k][c];
        }
        bx[k] = pts[k]->x2;
        by[k] = pts[k]->y2;
    }
    if (!solve3(mx, bx, cx) || !solve3(my, by, cy)) return false;
    out = AffineModel{cx[0], cx[1], cy[0], cy[1], cx[2], cy[2]};
    return std::abs(out.a11 * out.a22 - out.a12 * out.a21) > 1e-9;
}

int count_inliers(const std::vector<Correspondence>& matches, const AffineModel& model,
                  double inlier_px) {
    const double limit = inlier_px * inlier_px;
    int count = 0;
    for (const auto& c : matches) {
        const double px = model.a11 * c.x1 + model.a12 * c.y1 + model.tx - c.x2;
        const double py = model.a21 * c.x1 + model.a22 * c.y1 + model.ty - c.y2;
        if (px * px + py * py < limit) ++count;
    }
    return count;
}

bool refit_on_inliers(const std::vector<Correspondence>& matches, const AffineModel& model,
                      double inlier_px, AffineModel& out) {
    const double limit = inlier_px * inlier_px;
    double m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    double bx[3] = {0, 0, 0};
    double by[3] = {0, 0, 0};
    for (const auto& c : matches) {
        const double px = model.a11 * c.x1 + model.a12 * c.y1 + model.tx - c.x2;
        const double py = model.a21 * c.x1 + model.a22 * c.y1 + model.ty - c.y2;
        if (px * px + py * py >= limit) continue;
        const double v[3] = {c.x1, c.y1, 1.0};
        for (int r = 0; r < 3; ++r) {
            for (int cc = 0; cc < 3; ++cc) m[r][cc] += v[r] * v[cc];
            bx[r] += v[r] * c.x2;
            by[r] += v[r] * c.y2;
        }
    }
    double mx[3][3], my[3][3], cx[3], cy[3];
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            mx[r][c] = m[r][c];
            my[r][c] = m[r][c];
        }
    }
    if (!solve3(mx, bx, cx) || !solve3(my, by, cy)) return false;
    out = AffineModel{cx[0], cx[1], cy[0], cy[1], cx[2], cy[2]};
    return std::abs(out.a11 * out.a22 - out.a12 * out.a21) > 1e-9;
}

std::uint64_t pair_seed(std::uint64_t base, std::string_view a, std::string_view b) {
    std::uint64_t h = fnv1a(a);
    h = fnv1a("\n", h);  // ids never contain newlines, so this cannot collide
    h = fnv1a(b, h);
    return base ^ h;
}

}  // namespace

std::vector<Correspondence> match_features(const ImageFeatures& a, const ImageFeatures& b) {
    if (a.count() > 0 && b.count() > 0 && a.dim != b.dim) {
        throw std::runtime_error("descriptor dim mismatch between '" + a.id + "' and '" + b.id +
                                 "'");
    }
    const std::size_t na = a.count();
    const std::size_t nb = b.count();
    std::vector<Correspondence> out;
    if (na == 0 || nb == 0) return out;

    std::vector<float> sims(na * nb);
    for (std::size_t i = 0; i < na; ++i) {
        const float* da = a.descriptor(i);
        for (std::size_t j = 0; j < nb; ++j) {
            const float* db = b.descriptor(j);
            float acc = 0.0f;
            for (std::size_t d = 0; d < a.dim; ++d) acc += da[d] * db[d];
            sims[i * nb + j] = acc;
        }
    }

    std::vector<std::size_t> nn_ab(na), nn_ba(nb);
    for (std::size_t i = 0; i < na; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < nb; ++j) {
            if (sims[i * nb + j] > sims[i * nb + best]) best = j;
        }
        nn_ab[i] = best;
    }
    for (std::size_t j = 0; j < nb; ++j) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < na; ++i) {
            if (sims[i * nb + j] > sims[best * nb + j]) best = i;
        }
        nn_ba[j] = best;
    }

    for (std::size_t i = 0; i < na; ++i) {
        const std::size_t j = nn_ab[i];
        if (nn_ba[j] != i) continue;
        out.push_back(Correspondence{a.x(i), a.y(i), b.x(j), b.y(j), sims[i * nb + j]});
    }
    return out;
}

RansacResult ransac_affine(const std::vector<Correspondence>& matches, int iters,
                           double inlier_px, std::uint64_t seed) {
    if (matches.size() < 3) {
        throw std::runtime_error("ransac_affine: need at least 3 matches, got " +
                                 std::to_string(matches.size()));
    }
    if (iters < 1) throw std::runtime_error("ransac_affine: iters must be positive");
    if (!(inlier_px > 0.0)) throw std::runtime_error("ransac_affine: inlier_px must be positive");

    // Canonical order: the sample stream then depends only on the match
    // multiset and the seed, not on input permutation.
    std::vector<Correspondence> sorted = matches;
    std::sort(sorted.begin(), sorted.end(), [](const Correspondence& a, const Correspondence& b) {
        if (a.x1 != b.x1) return a.x1 < b.x1;
        if (a.y1 != b.y1) return a.y1 < b.y1;
        if (a.x2 != b.x2) return a.x2 < b.x2;
        if (a.y2 != b.y2) return a.y2 < b.y2;
        return a.similarity < b.similarity;
    });

    const std::size_t n = sorted.size();
    Rng rng(seed);
    AffineModel best_model{};
    int best_inliers = -1;

    for (int it = 0; it < iters; ++it) {
        const std::size_t i1 = rng.bounded(n);
        std::size_t i2 = rng.bounded(n);
        while (i2 == i1) i2 = rng.bounded(n);
        std::size_t i3 = rng.bounded(n);
        while (i3 == i1 || i3 == i2) i3 = rng.bounded(n);

        const Correspondence* pts[3] = {&sorted[i1], &sorted[i2], &sorted[i3]};
        AffineModel model;
        if (!fit_affine(pts, model)) continue;  // degenerate samples still consume the iteration
        const int inliers = count_inliers(sorted, model, inlier_px);
        if (inliers > best_inliers) {
            best_inliers = inliers;
            best_model = model;
        }
    }

    if (best_inliers < 0) {
        throw std::runtime_error("ransac_affine: every sampled triplet was degenerate");
    }

    AffineModel refit;
    if (refit_on_inliers(sorted, best_model, inlier_px, refit)) {
        return RansacResult{refit, count_inliers(sorted, refit, inlier_px)};
    }
    return RansacResult{best_model, best_inliers};
}

std::vector<std::string> clean(const EmbeddingSet& train, const FeatureCorpus& features,
                               const CleaningConfig& cfg, int threads) {
    if (!train.has_labels()) throw std::runtime_error("clean: train set has no labels");
    if (cfg.nn_pool < 1 || cfg.per_label_cap < 1 || cfg.ransac_iters < 1) {
        throw std::runtime_error("clean: nn_pool, per_label_cap and ransac_iters must be positive");
    }
    if (!(cfg.inlier_px > 0.0)) throw std::runtime_error("clean: inlier_px must be positive");
    if (cfg.inlier_min < 0 || cfg.tau_freq < 0) {
        throw std::runtime_error("clean: inlier_min and tau_freq must be non-negative");
    }
    for (const auto& id : train.ids()) {
        if (!features.contains(id)) {
            throw std::runtime_error("clean: missing features for id '" + id + "'");
        }
    }

    const auto pools = search(train, train, cfg.nn_pool, /*exclude_self=*/true, threads);

    std::vector<int> verified(train.count(), 0);
    parallel_chunks(train.count(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const std::string& label = train.label_of(i);
            const ImageFeatures& fi = features.at(train.id(i));
            std::size_t taken = 0;
            int count = 0;
            for (const Neighbor& nb : pools[i]) {
                if (taken >= cfg.per_label_cap) break;
                if (train.label_of(nb.index) != label) continue;
                ++taken;
                const std::string& nb_id = train.id(nb.index);
                const auto matches = match_features(fi, features.at(nb_id));
                if (matches.size() < 3) continue;  // unverifiable pair, not an error
                int inliers;
                try {
                    inliers = ransac_affine(matches, cfg.ransac_iters, cfg.inlier_px,
                                            pair_seed(cfg.seed, train.id(i), nb_id))
                                  .inliers;
                } catch (const std::runtime_error&) {
                    continue;  // all-degenerate geometry counts as unverified
                }
                if (inliers > cfg.inlier_min) ++count;
            }
            verified[i] = count;
        }
    });

    std::vector<std::string> kept;
    for (std::size_t i = 0; i < train.count(); ++i) {
        if (verified[i] >= cfg.tau_freq) kept.push_back(train.id(i));
    }
    return kept;
}

}  // namespace lmrank
