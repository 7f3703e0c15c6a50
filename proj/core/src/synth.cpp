#include "lmrank/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lmrank/rng.hpp"

namespace lmrank {

namespace {

std::vector<double> random_unit(Rng& rng, std::size_t dim) {
    while (true) {
        std::vector<double> v = rng.gaussian_vec(dim);
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-9) continue;
        for (double& x : v) x /= norm;
        return v;
    }
}

// Second mode at cos(angle) uniform in [-0.5, 0.5] from the first: the
// separation stays in [60, 120] degrees, far outside the cluster spread.
std::vector<double> second_mode(Rng& rng, const std::vector<double>& u) {
    const std::size_t dim = u.size();
    while (true) {
        std::vector<double> g = rng.gaussian_vec(dim);
        double proj = 0.0;
        for (std::size_t d = 0; d < dim; ++d) proj += g[d] * u[d];
        double norm = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            g[d] -= proj * u[d];
            norm += g[d] * g[d];
        }
        norm = std::sqrt(norm);
        if (norm < 1e-9) continue;
        const double c = rng.uniform(-0.5, 0.5);
        const double s = std::sqrt(1.0 - c * c);
        std::vector<double> v(dim);
        for (std::size_t d = 0; d < dim; ++d) v[d] = c * u[d] + s * g[d] / norm;
        return v;
    }
}

void append_item(Rng& rng, const std::vector<double>& mode, double spread, std::size_t dim,
                 std::vector<float>& out) {
    while (true) {
        std::vector<double> x(dim);
        double norm = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            x[d] = mode[d] + spread * rng.gaussian();
            norm += x[d] * x[d];
        }
        norm = std::sqrt(norm);
        if (norm < 1e-9) continue;
        for (std::size_t d = 0; d < dim; ++d) out.push_back(static_cast<float>(x[d] / norm));
        return;
    }
}

std::size_t mode2_count(double fraction, std::size_t n) {
    if (fraction <= 0.0) return 0;
    const auto rounded = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5));
    return std::clamp<std::size_t>(rounded, 1, n - 1);
}

}  // namespace

SynthData generate(const SynthConfig& cfg) {
    if (cfg.dim < 2) throw std::runtime_error("synth: dim must be at least 2");
    if (cfg.n_classes < 1 || cfg.items_per_class < 1) {
        throw std::runtime_error("synth: class and item counts must be positive");
    }
    if (!(cfg.dissimilar_fraction >= 0.0 && cfg.dissimilar_fraction <= 1.0)) {
        throw std::runtime_error("synth: dissimilar_fraction must lie in [0, 1]");
    }
    if (!(cfg.cluster_spread >= 0.0)) throw std::runtime_error("synth: negative cluster_spread");
    if (!(cfg.train_ratio >= 0.0 && cfg.index_ratio >= 0.0 && cfg.query_ratio >= 0.0) ||
        std::abs(cfg.train_ratio + cfg.index_ratio + cfg.query_ratio - 1.0) > 1e-9) {
        throw std::runtime_error("synth: split ratios must be non-negative and sum to 1");
    }

    const std::size_t n = cfg.items_per_class;
    const auto n_train = static_cast<std::size_t>(std::floor(cfg.train_ratio * static_cast<double>(n) + 0.5));
    const auto n_cum = static_cast<std::size_t>(
        std::floor((cfg.train_ratio + cfg.index_ratio) * static_cast<double>(n) + 0.5));
    if (n_train == 0 || n_cum <= n_train || n_cum >= n) {
        throw std::runtime_error("synth: a split is empty at these ratios");
    }
    const std::size_t n_index = n_cum - n_train;
    const std::size_t n_query = n - n_cum;
    const std::size_t split_sizes[3] = {n_train, n_index, n_query};
    if (cfg.dissimilar_fraction > 0.0) {
        for (std::size_t sz : split_sizes) {
            if (sz < 2) {
                throw std::runtime_error(
                    "synth: every split needs at least 2 items per class to hold both modes");
            }
        }
    }

    Rng rng(cfg.seed);
    std::vector<std::string> ids[3];
    std::vector<float> data[3];
    std::unordered_map<std::string, std::string> train_labels;
    SynthData out;

    for (std::size_t c = 0; c < cfg.n_classes; ++c) {
        const std::string label = "L" + std::to_string(c);
        const std::vector<double> u = random_unit(rng, cfg.dim);
        const std::vector<double> v = second_mode(rng, u);
        std::size_t item = 0;
        for (int split = 0; split < 3; ++split) {
            const std::size_t sz = split_sizes[split];
            const std::size_t n2 = mode2_count(cfg.dissimilar_fraction, sz);
            for (std::size_t t = 0; t < sz; ++t, ++item) {
                const std::string id = "c" + std::to_string(c) + "_i" + std::to_string(item);
                append_item(rng, t < n2 ? v : u, cfg.cluster_spread, cfg.dim, data[split]);
                ids[split].push_back(id);
                if (split == 0) {
                    train_labels.emplace(id, label);
                } else if (split == 1) {
                    out.index_labels.emplace(id, label);
                } else {
                    out.query_labels.emplace(id, label);
                }
            }
        }
    }

    for (std::size_t c = 0; c < cfg.n_classes; ++c) {
        const std::string label = "L" + std::to_string(c);
        std::unordered_set<std::string> relevant;
        for (const auto& [id, l] : out.index_labels) {
            if (l == label) relevant.insert(id);
        }
        for (const auto& [id, l] : out.query_labels) {
            if (l == label) out.gt.emplace(id, relevant);
        }
    }

    out.train = EmbeddingSet::from_rows(cfg.dim, std::move(ids[0]), std::move(data[0]),
                                        /*normalize=*/false, std::move(train_labels));
    out.index = EmbeddingSet::from_rows(cfg.dim, std::move(ids[1]), std::move(data[1]),
                                        /*normalize=*/false);
    out.queries = EmbeddingSet::from_rows(cfg.dim, std::move(ids[2]), std::move(data[2]),
                                          /*normalize=*/false);
    return out;
}

FeatureCorpus generate_features(const std::vector<std::string>& ids,
                                const std::vector<std::string>& labels,
                                const FeatureSynthConfig& cfg) {
    if (ids.size() != labels.size()) {
        throw std::runtime_error("generate_features: one label per id required");
    }
    if (cfg.desc_dim < 1) throw std::runtime_error("generate_features: desc_dim must be positive");
    if (!(cfg.jitter >= 0.0) || !(cfg.translate_px >= 0.0) || !(cfg.noise_px >= 0.0)) {
        throw std::runtime_error("generate_features: negative geometry parameter");
    }

    Rng rng(cfg.seed);

    struct GroupData {
        std::vector<double> coords;       // 2 per keypoint
        std::vector<float> descriptors;   // desc_dim per keypoint
    };

    // Group bases are generated in sorted label order, then images in input
    // order, so the draw sequence is pinned by the inputs alone.
    std::vector<std::string> group_names(labels.begin(), labels.end());
    std::sort(group_names.begin(), group_names.end());
    group_names.erase(std::unique(group_names.begin(), group_names.end()), group_names.end());

    std::unordered_map<std::string, GroupData> groups;
    for (const auto& name : group_names) {
        GroupData g;
        g.coords.reserve(2 * cfg.shared_per_group);
        g.descriptors.reserve(cfg.shared_per_group * cfg.desc_dim);
        for (std::size_t k = 0; k < cfg.shared_per_group; ++k) {
            g.coords.push_back(rng.uniform(0.0, 1000.0));
            g.coords.push_back(rng.uniform(0.0, 1000.0));
            const std::vector<double> d = random_unit(rng, cfg.desc_dim);
            for (double x : d) g.descriptors.push_back(static_cast<float>(x));
        }
        groups.emplace(name, std::move(g));
    }

    FeatureCorpus corpus;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const GroupData& g = groups.at(labels[i]);

        const double a11 = 1.0 + rng.uniform(-cfg.jitter, cfg.jitter);
        const double a12 = rng.uniform(-cfg.jitter, cfg.jitter);
        const double a21 = rng.uniform(-cfg.jitter, cfg.jitter);
        const double a22 = 1.0 + rng.uniform(-cfg.jitter, cfg.jitter);
        const double tx = rng.uniform(-cfg.translate_px, cfg.translate_px);
        const double ty = rng.uniform(-cfg.translate_px, cfg.translate_px);

        ImageFeatures image;
        image.id = ids[i];
        image.dim = cfg.desc_dim;
        const std::size_t total = cfg.shared_per_group + cfg.clutter_per_image;
        image.coords.reserve(2 * total);
        image.descriptors.reserve(total * cfg.desc_dim);

        for (std::size_t k = 0; k < cfg.shared_per_group; ++k) {
            const double bx = g.coords[2 * k];
            const double by = g.coords[2 * k + 1];
            double x = a11 * bx + a12 * by + tx;
            double y = a21 * bx + a22 * by + ty;
            if (cfg.noise_px > 0.0) {
                x += cfg.noise_px * rng.gaussian();
                y += cfg.noise_px * rng.gaussian();
            }
            image.coords.push_back(static_cast<float>(x));
            image.coords.push_back(static_cast<float>(y));
            image.descriptors.insert(image.descriptors.end(),
                                     g.descriptors.begin() + static_cast<std::ptrdiff_t>(k * cfg.desc_dim),
                                     g.descriptors.begin() + static_cast<std::ptrdiff_t>((k + 1) * cfg.desc_dim));
        }
        for (std::size_t k = 0; k < cfg.clutter_per_image; ++k) {
            image.coords.push_back(static_cast<float>(rng.uniform(0.0, 1000.0)));
            image.coords.push_back(static_cast<float>(rng.uniform(0.0, 1000.0)));
            const std::vector<double> d = random_unit(rng, cfg.desc_dim);
            for (double x : d) image.descriptors.push_back(static_cast<float>(x));
        }
        corpus.add(std::move(image));
    }
    return corpus;
}

}  // namespace lmrank
