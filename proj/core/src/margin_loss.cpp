#include "lmrank/margin_loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lmrank/parallel.hpp"
#include "lmrank/rng.hpp"

namespace lmrank {

namespace {

void check_shapes(const LossInstance& inst) {
    if (inst.n_rows == 0 || inst.dim == 0 || inst.n_classes == 0) {
        throw std::runtime_error("margin loss: empty batch, dim or class set");
    }
    if (inst.features.size() != inst.n_rows * inst.dim) {
        throw std::runtime_error("margin loss: feature buffer shape mismatch");
    }
    if (inst.weights.size() != inst.n_classes * inst.dim) {
        throw std::runtime_error("margin loss: weight buffer shape mismatch");
    }
    if (inst.targets.size() != inst.n_rows) {
        throw std::runtime_error("margin loss: one target per row required");
    }
    for (int t : inst.targets) {
        if (t < 0 || static_cast<std::size_t>(t) >= inst.n_classes) {
            throw std::runtime_error("margin loss: target out of range");
        }
    }
    if (!(inst.s > 0.0)) throw std::runtime_error("margin loss: scale must be positive");
    if (!(inst.beta >= 0.0)) throw std::runtime_error("margin loss: beta must be non-negative");
}

void check_unit_rows(const std::vector<double>& rows, std::size_t count, std::size_t dim,
                     const char* what) {
    for (std::size_t i = 0; i < count; ++i) {
        double norm = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double v = rows[i * dim + d];
            norm += v * v;
        }
        if (std::abs(std::sqrt(norm) - 1.0) > 1e-6) {
            throw std::runtime_error(std::string("margin loss: ") + what + " row " +
                                     std::to_string(i) + " is not unit norm");
        }
    }
}

double dot(const double* a, const double* b, std::size_t dim) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) acc += a[d] * b[d];
    return acc;
}

// Target logit and its derivative with respect to cos(theta).
void target_logit(MarginKind kind, double c, double s, double m, double& z, double& dz_dc) {
    if (kind == MarginKind::cosface) {
        z = s * (c - m);
        dz_dc = s;
        return;
    }
    const double clamped = std::clamp(c, -1.0, 1.0);
    const double sin_theta = std::sqrt(std::max(0.0, 1.0 - clamped * clamped));
    z = s * (clamped * std::cos(m) - sin_theta * std::sin(m));
    // d(sin)/dc = -c/sin; the pole at sin = 0 is cut off numerically.
    dz_dc = s * (std::cos(m) + clamped * std::sin(m) / std::max(sin_theta, 1e-12));
}

double reg_term(const LossInstance& inst) {
    double w_sq = 0.0;
    for (double v : inst.weights) w_sq += v * v;
    return inst.beta * (w_sq + inst.backbone_sq_norm);
}

// Per-row softmax pass: fills coeff[j] = (p_j - [j == y]) * dz_j/dc_j and
// returns the row's data loss. strict=false (finite-difference probing)
// tolerates |cos| slightly past 1 from off-sphere rows.
double row_pass(const LossInstance& inst, MarginKind kind, std::size_t i,
                std::vector<double>& logits, std::vector<double>& coeff, bool strict) {
    const std::size_t n = inst.n_classes;
    const double* f = inst.features.data() + i * inst.dim;
    const int y = inst.targets[i];

    double dz_dc_target = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double c = dot(inst.weights.data() + j * inst.dim, f, inst.dim);
        if (strict && std::abs(c) > 1.0 + 1e-6) {
            throw std::runtime_error("margin loss: |cos(theta)| exceeds 1 + 1e-6");
        }
        if (static_cast<int>(j) == y) {
            target_logit(kind, c, inst.s, inst.m, logits[j], dz_dc_target);
        } else {
            logits[j] = inst.s * c;
        }
    }

    const double zmax = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += std::exp(logits[j] - zmax);
    const double lse = zmax + std::log(sum);

    for (std::size_t j = 0; j < n; ++j) {
        const double p = std::exp(logits[j] - lse);
        const double delta = static_cast<int>(j) == y ? 1.0 : 0.0;
        const double dz_dc = static_cast<int>(j) == y ? dz_dc_target : inst.s;
        coeff[j] = (p - delta) * dz_dc;
    }
    return lse - logits[static_cast<std::size_t>(y)];
}

LossOutput margin_loss(const LossInstance& inst, MarginKind kind) {
    check_shapes(inst);
    check_unit_rows(inst.features, inst.n_rows, inst.dim, "feature");
    check_unit_rows(inst.weights, inst.n_classes, inst.dim, "weight");

    const std::size_t N = inst.n_rows;
    const std::size_t n = inst.n_classes;
    const std::size_t dim = inst.dim;

    // Row passes are independent; the shared grad_weights reduction runs
    // serially afterwards in row order so results never depend on threads.
    std::vector<double> row_loss(N);
    std::vector<double> coeffs(N * n);
    LossOutput out;
    out.grad_features.assign(N * dim, 0.0);
    parallel_chunks(N, 0, [&](std::size_t begin, std::size_t end) {
        std::vector<double> logits(n);
        std::vector<double> coeff(n);
        for (std::size_t i = begin; i < end; ++i) {
            row_loss[i] = row_pass(inst, kind, i, logits, coeff, /*strict=*/true);
            std::copy(coeff.begin(), coeff.end(), coeffs.begin() + i * n);
            double* gf = out.grad_features.data() + i * dim;
            for (std::size_t j = 0; j < n; ++j) {
                const double g = coeff[j] / static_cast<double>(N);
                const double* w = inst.weights.data() + j * dim;
                for (std::size_t d = 0; d < dim; ++d) gf[d] += g * w[d];
            }
        }
    });

    double data_loss = 0.0;
    for (std::size_t i = 0; i < N; ++i) data_loss += row_loss[i];
    out.loss = data_loss / static_cast<double>(N) + reg_term(inst);

    out.grad_weights.assign(n * dim, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
        const double* f = inst.features.data() + i * dim;
        for (std::size_t j = 0; j < n; ++j) {
            const double g = coeffs[i * n + j] / static_cast<double>(N);
            double* gw = out.grad_weights.data() + j * dim;
            for (std::size_t d = 0; d < dim; ++d) gw[d] += g * f[d];
        }
    }
    for (std::size_t t = 0; t < out.grad_weights.size(); ++t) {
        out.grad_weights[t] += 2.0 * inst.beta * inst.weights[t];
    }
    return out;
}

}  // namespace

LossOutput arcface_loss(const LossInstance& inst) { return margin_loss(inst, MarginKind::arcface); }

LossOutput cosface_loss(const LossInstance& inst) { return margin_loss(inst, MarginKind::cosface); }

double loss_value(const LossInstance& inst, MarginKind kind, bool validate) {
    check_shapes(inst);
    if (validate) {
        check_unit_rows(inst.features, inst.n_rows, inst.dim, "feature");
        check_unit_rows(inst.weights, inst.n_classes, inst.dim, "weight");
    }
    std::vector<double> logits(inst.n_classes);
    std::vector<double> coeff(inst.n_classes);
    double data_loss = 0.0;
    for (std::size_t i = 0; i < inst.n_rows; ++i) {
        data_loss += row_pass(inst, kind, i, logits, coeff, validate);
    }
    return data_loss / static_cast<double>(inst.n_rows) + reg_term(inst);
}

FdCheck fd_check(const LossInstance& inst, MarginKind kind, double h) {
    const LossOutput out = kind == MarginKind::arcface ? arcface_loss(inst) : cosface_loss(inst);

    auto probe = [&](std::vector<double> LossInstance::* field, std::size_t t) {
        LossInstance probe_inst = inst;
        (probe_inst.*field)[t] += h;
        const double hi = loss_value(probe_inst, kind, /*validate=*/false);
        (probe_inst.*field)[t] -= 2.0 * h;
        const double lo = loss_value(probe_inst, kind, /*validate=*/false);
        return (hi - lo) / (2.0 * h);
    };

    auto block_err = [&](std::vector<double> LossInstance::* field,
                         const std::vector<double>& analytic) {
        double diff_sq = 0.0;
        double fd_sq = 0.0;
        for (std::size_t t = 0; t < analytic.size(); ++t) {
            const double fd = probe(field, t);
            diff_sq += (fd - analytic[t]) * (fd - analytic[t]);
            fd_sq += fd * fd;
        }
        return std::sqrt(diff_sq) / std::max(std::sqrt(fd_sq), 1e-12);
    };

    FdCheck check;
    check.feature_rel_err = block_err(&LossInstance::features, out.grad_features);
    check.weight_rel_err = block_err(&LossInstance::weights, out.grad_weights);
    return check;
}

LossInstance random_instance(std::size_t n_rows, std::size_t dim, std::size_t n_classes,
                             double s, double m, double beta, std::uint64_t seed) {
    Rng rng(seed);
    auto unit_rows = [&](std::size_t count) {
        std::vector<double> rows(count * dim);
        for (std::size_t i = 0; i < count; ++i) {
            double norm = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                rows[i * dim + d] = rng.gaussian();
                norm += rows[i * dim + d] * rows[i * dim + d];
            }
            norm = std::sqrt(norm);
            if (norm < 1e-12) {
                rows[i * dim] = 1.0;  // all-zero draw; any unit row will do
                norm = 1.0;
            }
            for (std::size_t d = 0; d < dim; ++d) rows[i * dim + d] /= norm;
        }
        return rows;
    };

    LossInstance inst;
    inst.n_rows = n_rows;
    inst.dim = dim;
    inst.n_classes = n_classes;
    inst.features = unit_rows(n_rows);
    inst.weights = unit_rows(n_classes);
    inst.targets.resize(n_rows);
    for (auto& t : inst.targets) t = static_cast<int>(rng.bounded(n_classes));
    inst.s = s;
    inst.m = m;
    inst.beta = beta;
    inst.backbone_sq_norm = 0.0;
    return inst;
}

}  // namespace lmrank
