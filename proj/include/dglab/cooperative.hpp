#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dglab/batch.hpp"
#include "dglab/errors.hpp"
#include "dglab/losses.hpp"
#include "dglab/nn.hpp"
#include "dglab/rng.hpp"

namespace dglab {

// ============================================================================
// Cooperative examples: input points nudged by gradient descent to make the
// domain discriminator's job easier, opposite in spirit to an adversarial
// attack. Network parameters are frozen during generation; only the points
// move, and their class and domain labels are never touched.
// ============================================================================

struct CooperativeConfig {
    double fraction = 0.5;      // share of each training batch replaced
    int steps = 5;              // descent steps per generated point
    double step_size = 0.05;    // input-space learning rate
    double anchor_weight = 1.0; // weight of the posterior anchor term
    bool use_anchor = true;     // anchored rule vs plain descent

    void validate() const {
        if (!(fraction >= 0.0) || fraction > 1.0)
            throw InvalidInputError("cooperative config: fraction must be in [0, 1]");
        if (steps < 0) throw InvalidInputError("cooperative config: steps must be >= 0");
        if (!(step_size > 0.0)) throw InvalidInputError("cooperative config: step size > 0");
        if (!(anchor_weight >= 0.0))
            throw InvalidInputError("cooperative config: anchor weight must be >= 0");
    }
};

// A batch together with its moved twin. Domain losses at the start and end
// point and the class-posterior drift are recorded per point, so callers can
// verify the descent requirement without recomputing anything.
struct CooperativeBatch {
    std::vector<std::vector<double>> original_points;
    std::vector<std::vector<double>> updated_points;
    std::vector<int> class_labels;
    std::vector<int> domain_labels;
    std::vector<double> domain_loss_original;  // discriminator CE at the start point
    std::vector<double> domain_loss_updated;   // discriminator CE at the end point
    std::vector<double> anchor_drift;          // KL(posterior at start || at end)

    std::size_t size() const { return original_points.size(); }

    double mean_domain_loss_original() const {
        return std::accumulate(domain_loss_original.begin(), domain_loss_original.end(), 0.0) /
               static_cast<double>(domain_loss_original.size());
    }
    double mean_domain_loss_updated() const {
        return std::accumulate(domain_loss_updated.begin(), domain_loss_updated.end(), 0.0) /
               static_cast<double>(domain_loss_updated.size());
    }
    double mean_anchor_drift() const {
        return std::accumulate(anchor_drift.begin(), anchor_drift.end(), 0.0) /
               static_cast<double>(anchor_drift.size());
    }
};

namespace detail {

// Discriminator loss and, optionally, its gradient w.r.t. the input point.
inline double domain_loss_at(const NetworkTriple& triple, std::span<const double> x,
                             int domain_label, std::vector<double>* input_grad = nullptr,
                             std::vector<double>* repr_out = nullptr) {
    ForwardCache ext_cache, head_cache;
    const auto repr = forward(triple.extractor, x, input_grad ? &ext_cache : nullptr);
    const auto logits =
        forward(triple.domain_head, repr, input_grad ? &head_cache : nullptr);
    require_finite_logits(logits, "cooperative update");
    const auto ce = cross_entropy(logits, static_cast<std::size_t>(domain_label));
    if (input_grad) {
        const auto repr_grad = backward(triple.domain_head, head_cache, ce.grad);
        *input_grad = backward(triple.extractor, ext_cache, repr_grad);
    }
    if (repr_out) *repr_out = repr;
    return ce.value;
}

inline std::vector<double> task_logits_at(const NetworkTriple& triple,
                                          std::span<const double> x) {
    auto logits = forward(triple.task_head, forward(triple.extractor, x));
    require_finite_logits(logits, "cooperative update");
    return logits;
}

}  // namespace detail

// Moves every point of the batch `config.steps` gradient steps downhill on
//
//   discriminator loss + anchor_weight * KL(posterior at start || current)
//
// where the anchor term (enabled by `use_anchor`) holds the classifier's
// posterior near what it was at the starting point, so cooperation cannot
// quietly relabel a point. Parameters are taken by const reference and stay
// frozen; labels are copied through untouched.
inline CooperativeBatch cooperate_update(const NetworkTriple& triple, const LabeledBatch& batch,
                                         const CooperativeConfig& config) {
    config.validate();
    CooperativeBatch out;
    out.original_points = batch.points();
    out.class_labels = batch.class_labels();
    out.domain_labels = batch.domain_labels();
    out.updated_points.reserve(batch.size());
    out.domain_loss_original.reserve(batch.size());
    out.domain_loss_updated.reserve(batch.size());
    out.anchor_drift.reserve(batch.size());

    ForwardCache ext_cache, task_cache;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const int domain = batch.domain_label(i);
        std::vector<double> x = batch.point(i);

        const auto start_logits = detail::task_logits_at(triple, x);
        out.domain_loss_original.push_back(detail::domain_loss_at(triple, x, domain));

        for (int step = 0; step < config.steps; ++step) {
            // Discriminator branch.
            const auto repr = forward(triple.extractor, x, &ext_cache);
            ForwardCache head_cache;
            const auto dlogits = forward(triple.domain_head, repr, &head_cache);
            require_finite_logits(dlogits, "cooperative update");
            const auto ce = cross_entropy(dlogits, static_cast<std::size_t>(domain));
            auto repr_grad = backward(triple.domain_head, head_cache, ce.grad);

            // Anchor branch, merged at the representation by linearity.
            if (config.use_anchor && config.anchor_weight > 0.0) {
                const auto tlogits = forward(triple.task_head, repr, &task_cache);
                const auto kl = kl_divergence(start_logits, tlogits);
                const auto anchor_grad = backward(triple.task_head, task_cache, kl.grad);
                for (std::size_t r = 0; r < repr_grad.size(); ++r)
                    repr_grad[r] += config.anchor_weight * anchor_grad[r];
            }

            const auto input_grad = backward(triple.extractor, ext_cache, repr_grad);
            for (double g : input_grad) {
                if (!std::isfinite(g))
                    throw TrainingDivergenceError(
                        "cooperative update: non-finite input gradient at point " +
                            std::to_string(i),
                        -1);
            }
            for (std::size_t d = 0; d < x.size(); ++d) x[d] -= config.step_size * input_grad[d];
        }

        out.domain_loss_updated.push_back(detail::domain_loss_at(triple, x, domain));
        out.anchor_drift.push_back(
            kl_divergence(start_logits, detail::task_logits_at(triple, x)).value);
        out.updated_points.push_back(std::move(x));
    }
    return out;
}

// Plain descent on the discriminator loss alone, regardless of the config's
// anchor settings. Kept as a separate entry point for ablations.
inline CooperativeBatch cooperate_update_plain(const NetworkTriple& triple,
                                               const LabeledBatch& batch,
                                               CooperativeConfig config) {
    config.use_anchor = false;
    return cooperate_update(triple, batch, config);
}

// Swaps a uniform-random `fraction` of the batch for its moved twins. Labels
// are carried from the original batch; only coordinates change. The selected
// indices are reported through `selected_out` when requested.
inline LabeledBatch assemble_mixed_sources(const LabeledBatch& original,
                                           const CooperativeBatch& cooperative, double fraction,
                                           Rng& rng,
                                           std::vector<std::size_t>* selected_out = nullptr) {
    if (cooperative.size() != original.size())
        throw InvalidInputError("assemble_mixed_sources: batch size mismatch");
    if (cooperative.class_labels != original.class_labels() ||
        cooperative.domain_labels != original.domain_labels())
        throw ContractViolation("assemble_mixed_sources: labels diverged from the original");
    if (!(fraction >= 0.0) || fraction > 1.0)
        throw InvalidInputError("assemble_mixed_sources: fraction must be in [0, 1]");

    const std::size_t count = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(original.size())));
    std::vector<std::size_t> order(original.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    order.resize(count);

    std::vector<std::vector<double>> points = original.points();
    for (std::size_t i : order) points[i] = cooperative.updated_points[i];
    if (selected_out) *selected_out = order;
    return LabeledBatch(std::move(points), original.class_labels(), original.domain_labels());
}

// Convenience overload for per-domain batch lists.
inline std::vector<LabeledBatch> assemble_mixed_sources(
    std::span<const LabeledBatch> originals, std::span<const CooperativeBatch> cooperatives,
    double fraction, Rng& rng) {
    if (originals.size() != cooperatives.size())
        throw InvalidInputError("assemble_mixed_sources: need one cooperative batch per batch");
    std::vector<LabeledBatch> out;
    out.reserve(originals.size());
    for (std::size_t d = 0; d < originals.size(); ++d)
        out.push_back(assemble_mixed_sources(originals[d], cooperatives[d], fraction, rng));
    return out;
}

}  // namespace dglab
