#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace lmrank {

// Fixed batch for a margin-softmax evaluation. Feature and weight rows must
// be unit norm (within 1e-6); the backbone regularization enters as the
// externally supplied squared norm.
struct LossInstance {
    std::size_t n_rows = 0;     // batch size N
    std::size_t dim = 0;        // embedding dim d
    std::size_t n_classes = 0;  // class count n
    std::vector<double> features;  // N x d row-major
    std::vector<double> weights;   // n x d row-major
    std::vector<int> targets;      // N entries in [0, n)
    double s = 30.0;
    double m = 0.3;
    double beta = 1e-5;
    double backbone_sq_norm = 0.0;
};

struct LossOutput {
    double loss = 0.0;
    std::vector<double> grad_features;  // N x d
    std::vector<double> grad_weights;   // n x d
};

enum class MarginKind { arcface, cosface };

// -(1/N) sum log softmax over s-scaled cosine logits with the target logit
// s*cos(theta+m), plus beta*(|W|^2 + backbone_sq_norm). cos(theta+m) is
// evaluated as cos*cos(m) - sin*sin(m) with sin = sqrt(max(0, 1-cos^2)).
LossOutput arcface_loss(const LossInstance& inst);

// Same with target logit s*(cos(theta) - m).
LossOutput cosface_loss(const LossInstance& inst);

// Forward value only. validate=false skips the unit-norm check so finite
// difference probing can perturb rows off the sphere.
double loss_value(const LossInstance& inst, MarginKind kind, bool validate = true);

// Central finite differences (step h) against the analytic gradients,
// reported as |g_fd - g_an|_2 / max(|g_fd|_2, 1e-12) per gradient block.
struct FdCheck {
    double feature_rel_err = 0.0;
    double weight_rel_err = 0.0;
};
FdCheck fd_check(const LossInstance& inst, MarginKind kind, double h = 1e-3);

// Random unit-row instance for checks; draws are seed-deterministic.
LossInstance random_instance(std::size_t n_rows, std::size_t dim, std::size_t n_classes,
                             double s, double m, double beta, std::uint64_t seed);

}  // namespace lmrank
