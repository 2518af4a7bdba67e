#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dglab/batch.hpp"
#include "dglab/cooperative.hpp"
#include "dglab/errors.hpp"
#include "dglab/losses.hpp"
#include "dglab/nn.hpp"
#include "dglab/proxy_distance.hpp"
#include "dglab/rng.hpp"

namespace dglab {

// ============================================================================
// Unified training loop for the three modes:
//
//   erm     plain task training; the adversarial weight is pinned to zero and
//           the domain head trains only as a passive monitor
//   dann    task training plus reversed-gradient domain confusion
//   dannce  dann on batches where a fraction of the points have been replaced
//           by their cooperative twins
//
// One code path serves all three, so erm is bitwise-identical to dann with a
// zero weight schedule.
// ============================================================================

enum class TrainMode { erm, dann, dannce };

inline std::string to_string(TrainMode mode) {
    switch (mode) {
        case TrainMode::erm: return "erm";
        case TrainMode::dann: return "dann";
        case TrainMode::dannce: return "dannce";
    }
    throw InvalidInputError("unknown train mode");
}

inline TrainMode train_mode_from_string(const std::string& name) {
    if (name == "erm") return TrainMode::erm;
    if (name == "dann") return TrainMode::dann;
    if (name == "dannce") return TrainMode::dannce;
    throw InvalidInputError("unknown train mode: " + name);
}

enum class LambdaSchedule { zero, phase_in, constant };

inline std::string to_string(LambdaSchedule schedule) {
    switch (schedule) {
        case LambdaSchedule::zero: return "zero";
        case LambdaSchedule::phase_in: return "phase-in";
        case LambdaSchedule::constant: return "constant";
    }
    throw InvalidInputError("unknown lambda schedule");
}

inline LambdaSchedule lambda_schedule_from_string(const std::string& name) {
    if (name == "zero") return LambdaSchedule::zero;
    if (name == "phase-in") return LambdaSchedule::phase_in;
    if (name == "constant") return LambdaSchedule::constant;
    throw InvalidInputError("unknown lambda schedule: " + name);
}

// Adversarial weight ramp: 0 at the first epoch, saturating toward 1.
inline double lambda_schedule_value(int epoch, int max_epoch, double kappa) {
    if (epoch < 0 || max_epoch <= 0 || epoch > max_epoch)
        throw InvalidInputError("lambda schedule: need 0 <= epoch <= max_epoch");
    if (!(kappa > 0.0)) throw InvalidInputError("lambda schedule: kappa must be > 0");
    const double progress = static_cast<double>(epoch) / static_cast<double>(max_epoch);
    return 2.0 / (1.0 + std::exp(-kappa * progress)) - 1.0;
}

struct TrainingConfig {
    int epochs = 30;
    int batch_size = 16;  // per-domain minibatch size
    double learning_rate = 0.05;
    double lr_decay_factor = 0.1;    // multiplier applied late in training
    double lr_decay_fraction = 0.8;  // fraction of epochs after which it applies
    double kappa = 10.0;             // phase-in steepness
    double entropy_weight = 0.1;     // confidence pressure on source predictions
    LambdaSchedule lambda_schedule = LambdaSchedule::phase_in;
    double lambda_value = 1.0;  // used by the constant schedule
    std::vector<double> phi;    // per-source weights; empty means uniform
    std::uint64_t seed = 0;
    bool track_pairwise_proxy = false;  // estimate representation divergence per epoch
    CooperativeConfig cooperative;

    void validate() const {
        if (epochs < 1) throw InvalidInputError("training config: epochs must be >= 1");
        if (batch_size < 1) throw InvalidInputError("training config: batch size must be >= 1");
        if (!(learning_rate > 0.0))
            throw InvalidInputError("training config: learning rate must be > 0");
        if (!(lr_decay_factor > 0.0) || lr_decay_factor > 1.0)
            throw InvalidInputError("training config: lr decay factor must be in (0, 1]");
        if (!(lr_decay_fraction >= 0.0) || lr_decay_fraction > 1.0)
            throw InvalidInputError("training config: lr decay fraction must be in [0, 1]");
        if (!(kappa > 0.0)) throw InvalidInputError("training config: kappa must be > 0");
        if (!(entropy_weight >= 0.0))
            throw InvalidInputError("training config: entropy weight must be >= 0");
        if (!(lambda_value >= 0.0))
            throw InvalidInputError("training config: lambda value must be >= 0");
        cooperative.validate();
    }

    double lambda_at(int epoch, TrainMode mode) const {
        if (mode == TrainMode::erm) return 0.0;
        switch (lambda_schedule) {
            case LambdaSchedule::zero: return 0.0;
            case LambdaSchedule::constant: return lambda_value;
            case LambdaSchedule::phase_in: return lambda_schedule_value(epoch, epochs, kappa);
        }
        throw InvalidInputError("unknown lambda schedule");
    }

    double learning_rate_at(int epoch) const {
        const int cutoff = static_cast<int>(lr_decay_fraction * epochs);
        return epoch >= cutoff ? learning_rate * lr_decay_factor : learning_rate;
    }
};

struct EpochMetrics {
    int epoch = 0;
    double lambda = 0.0;
    double learning_rate = 0.0;
    double mean_task_loss = 0.0;
    double mean_domain_loss = 0.0;  // discriminator CE on the training batches
    double mean_entropy = 0.0;
    std::vector<double> source_accuracies;
    double target_accuracy = -1.0;  // -1 when no target set was supplied
    // Cooperative diagnostics; zero outside dannce mode.
    double cooperative_domain_loss_original = 0.0;
    double cooperative_domain_loss_updated = 0.0;
    double cooperative_min_batch_slack = 0.0;  // min over batches of (original - updated)
    bool cooperative_descent_ok = true;
    double mean_anchor_drift = 0.0;
    std::vector<double> pairwise_proxy;  // filled when track_pairwise_proxy is set
};

inline void to_json(nlohmann::json& j, const EpochMetrics& m) {
    j = nlohmann::json{{"epoch", m.epoch},
                       {"lambda", m.lambda},
                       {"learning_rate", m.learning_rate},
                       {"mean_task_loss", m.mean_task_loss},
                       {"mean_domain_loss", m.mean_domain_loss},
                       {"mean_entropy", m.mean_entropy},
                       {"source_accuracies", m.source_accuracies},
                       {"cooperative_domain_loss_original", m.cooperative_domain_loss_original},
                       {"cooperative_domain_loss_updated", m.cooperative_domain_loss_updated},
                       {"cooperative_min_batch_slack", m.cooperative_min_batch_slack},
                       {"cooperative_descent_ok", m.cooperative_descent_ok},
                       {"mean_anchor_drift", m.mean_anchor_drift}};
    if (m.target_accuracy >= 0.0) j["target_accuracy"] = m.target_accuracy;
    if (!m.pairwise_proxy.empty()) j["pairwise_proxy"] = m.pairwise_proxy;
}

struct TrainResult {
    NetworkTriple triple;
    std::vector<EpochMetrics> epochs;
};

// Loss value plus the two gradient tapes it touches. `head` is empty for
// objectives that do not update a head.
struct ObjectiveGrads {
    double loss = 0.0;
    GradientTape head;
    GradientTape extractor;
};

// Mean task cross-entropy over the batch, with tapes for the task head and
// the extractor.
inline ObjectiveGrads task_objective(const NetworkTriple& triple, const LabeledBatch& batch) {
    ObjectiveGrads out;
    out.head = GradientTape::zeros_like(triple.task_head);
    out.extractor = GradientTape::zeros_like(triple.extractor);
    ForwardCache ext_cache, head_cache;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto repr = forward(triple.extractor, batch.point(i), &ext_cache);
        const auto logits = forward(triple.task_head, repr, &head_cache);
        require_finite_logits(logits, "task objective");
        const auto ce = cross_entropy(logits, static_cast<std::size_t>(batch.class_label(i)));
        out.loss += ce.value;
        const auto repr_grad = backward(triple.task_head, head_cache, ce.grad, &out.head);
        backward(triple.extractor, ext_cache, repr_grad, &out.extractor);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    out.loss *= inv;
    out.head.scale(inv);
    out.extractor.scale(inv);
    return out;
}

// Mean discriminator cross-entropy. The head tape descends the loss as usual;
// the extractor tape has already been flipped by the reversal layer with
// weight `lambda`, so applying both with plain gradient steps trains the head
// to tell domains apart while pushing the representation toward confusion.
// With lambda exactly zero the extractor pass is skipped and its tape stays
// zero, making the head a pure monitor.
inline ObjectiveGrads domain_objective(const NetworkTriple& triple, const LabeledBatch& batch,
                                       double lambda) {
    ObjectiveGrads out;
    out.head = GradientTape::zeros_like(triple.domain_head);
    out.extractor = GradientTape::zeros_like(triple.extractor);
    ForwardCache ext_cache, head_cache;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto repr = forward(triple.extractor, batch.point(i), &ext_cache);
        const auto logits = forward(triple.domain_head, repr, &head_cache);
        require_finite_logits(logits, "domain objective");
        const auto ce = cross_entropy(logits, static_cast<std::size_t>(batch.domain_label(i)));
        out.loss += ce.value;
        const auto repr_grad = backward(triple.domain_head, head_cache, ce.grad, &out.head);
        if (lambda != 0.0)
            backward(triple.extractor, ext_cache, gradient_reversal(repr_grad, lambda),
                     &out.extractor);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    out.loss *= inv;
    out.head.scale(inv);
    out.extractor.scale(inv);
    return out;
}

// Mean prediction entropy, scaled by `weight` on the tape. Only the extractor
// is updated; the task head is left to the task loss so confidence pressure
// cannot degenerate into label flipping. Returns the unweighted entropy.
inline ObjectiveGrads entropy_objective(const NetworkTriple& triple, const LabeledBatch& batch,
                                        double weight) {
    ObjectiveGrads out;
    out.extractor = GradientTape::zeros_like(triple.extractor);
    ForwardCache ext_cache, head_cache;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto repr = forward(triple.extractor, batch.point(i), &ext_cache);
        const auto logits = forward(triple.task_head, repr, &head_cache);
        require_finite_logits(logits, "entropy objective");
        const auto ent = entropy_loss(logits);
        out.loss += ent.value;
        const auto repr_grad = backward(triple.task_head, head_cache, ent.grad);
        backward(triple.extractor, ext_cache, repr_grad, &out.extractor);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    out.loss *= inv;
    out.extractor.scale(inv * weight);
    return out;
}

inline double evaluate_accuracy(const NetworkTriple& triple, const LabeledBatch& batch) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto logits = forward(triple.task_head, forward(triple.extractor, batch.point(i)));
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.size(); ++c)
            if (logits[c] > logits[best]) best = c;
        if (static_cast<int>(best) == batch.class_label(i)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(batch.size());
}

// Stream tags, exposed so tests can reproduce the exact batch schedule.
inline constexpr std::uint64_t k_shuffle_stream_tag = 0x0b5e55ed5ced5u;
inline constexpr std::uint64_t k_selection_stream_tag = 0xc0095e1ec7u;
inline constexpr std::uint64_t k_proxy_stream_tag = 0x94a5d15cu;

// Per-domain shuffled index orders for one epoch, drawn from `rng` in domain
// order. All modes consume this stream identically, so runs that differ only
// in mode see the same batch schedule.
inline std::vector<std::vector<std::size_t>> epoch_shuffled_orders(
    std::span<const std::size_t> sizes, Rng& rng) {
    std::vector<std::vector<std::size_t>> orders;
    orders.reserve(sizes.size());
    for (std::size_t n : sizes) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order);
        orders.push_back(std::move(order));
    }
    return orders;
}

namespace detail {

inline std::vector<double> resolve_phi(const TrainingConfig& config, std::size_t domains) {
    if (config.phi.empty())
        return std::vector<double>(domains, 1.0 / static_cast<double>(domains));
    if (config.phi.size() != domains)
        throw InvalidInputError("training config: phi must have one weight per source");
    double sum = 0.0;
    for (double w : config.phi) {
        if (!(w >= 0.0)) throw InvalidInputError("training config: phi weights must be >= 0");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw InvalidInputError("training config: phi weights must sum to 1");
    return config.phi;
}

inline void validate_sources(const NetworkTriple& triple,
                             std::span<const LabeledBatch> sources,
                             const LabeledBatch* target) {
    if (sources.size() < 2)
        throw InvalidInputError("train: need at least two source domains");
    if (sources.size() > triple.domain_count())
        throw InvalidInputError("train: domain head is too narrow for the source count");
    for (std::size_t d = 0; d < sources.size(); ++d) {
        const auto& batch = sources[d];
        if (batch.dim() != triple.extractor.input_dim())
            throw InvalidInputError("train: source dimension does not match the extractor");
        for (std::size_t i = 0; i < batch.size(); ++i) {
            if (batch.domain_label(i) != static_cast<int>(d))
                throw InvalidInputError("train: source batches must carry their own index");
            if (static_cast<std::size_t>(batch.class_label(i)) >= triple.class_count())
                throw InvalidInputError("train: class label out of range for the task head");
        }
    }
    if (target && target->dim() != triple.extractor.input_dim())
        throw InvalidInputError("train: target dimension does not match the extractor");
}

// Proxy divergence between every source pair, measured on the frozen
// representations at the end of an epoch.
inline std::vector<double> pairwise_representation_proxy(const NetworkTriple& triple,
                                                         std::span<const LabeledBatch> sources,
                                                         std::uint64_t seed) {
    std::vector<DomainSample> reprs;
    reprs.reserve(sources.size());
    for (std::size_t d = 0; d < sources.size(); ++d) {
        DomainSample sample;
        sample.domain_id = static_cast<int>(d);
        sample.points.reserve(sources[d].size());
        for (std::size_t i = 0; i < sources[d].size(); ++i)
            sample.points.push_back(forward(triple.extractor, sources[d].point(i)));
        reprs.push_back(std::move(sample));
    }
    std::vector<double> values;
    for (std::size_t a = 0; a < reprs.size(); ++a)
        for (std::size_t b = a + 1; b < reprs.size(); ++b)
            values.push_back(
                proxy_a_distance(reprs[a], reprs[b], derive_seed(seed, (a << 16) ^ b)));
    return values;
}

}  // namespace detail

// Trains the triple on the given sources. The target batch, when supplied, is
// used for evaluation only. Every epoch the three parameter sets receive one
// simultaneous update per step from tapes computed against the same frozen
// parameters, with per-domain losses combined under the phi weights.
inline TrainResult train(NetworkTriple triple, std::span<const LabeledBatch> sources,
                         const LabeledBatch* target, const TrainingConfig& config,
                         TrainMode mode) {
    config.validate();
    detail::validate_sources(triple, sources, target);
    const auto phi = detail::resolve_phi(config, sources.size());

    std::vector<std::size_t> sizes;
    for (const auto& s : sources) sizes.push_back(s.size());
    const std::size_t batch = static_cast<std::size_t>(config.batch_size);
    const std::size_t steps = *std::min_element(sizes.begin(), sizes.end()) / batch;
    if (steps == 0)
        throw InvalidInputError("train: batch size exceeds the smallest source domain");

    Rng shuffle_rng(derive_seed(config.seed, k_shuffle_stream_tag));

    TrainResult result{std::move(triple), {}};
    result.epochs.reserve(config.epochs);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lambda = config.lambda_at(epoch, mode);
        const double lr = config.learning_rate_at(epoch);
        const auto orders = epoch_shuffled_orders(sizes, shuffle_rng);
        Rng select_rng(
            derive_seed(config.seed, k_selection_stream_tag + static_cast<std::uint64_t>(epoch)));

        EpochMetrics metrics;
        metrics.epoch = epoch;
        metrics.lambda = lambda;
        metrics.learning_rate = lr;
        metrics.cooperative_min_batch_slack =
            mode == TrainMode::dannce ? std::numeric_limits<double>::infinity() : 0.0;

        double coop_original_sum = 0.0, coop_updated_sum = 0.0, drift_sum = 0.0;

        const auto run_steps = [&] {
            for (std::size_t step = 0; step < steps; ++step) {
                auto theta = GradientTape::zeros_like(result.triple.extractor);
                auto sigma = GradientTape::zeros_like(result.triple.task_head);
                auto mu = GradientTape::zeros_like(result.triple.domain_head);

                for (std::size_t d = 0; d < sources.size(); ++d) {
                    const std::span<const std::size_t> slice(orders[d].data() + step * batch,
                                                             batch);
                    LabeledBatch domain_batch = sources[d].select(slice);

                    if (mode == TrainMode::dannce) {
                        const auto coop =
                            cooperate_update(result.triple, domain_batch, config.cooperative);
                        const double before = coop.mean_domain_loss_original();
                        const double after = coop.mean_domain_loss_updated();
                        coop_original_sum += before;
                        coop_updated_sum += after;
                        drift_sum += coop.mean_anchor_drift();
                        metrics.cooperative_min_batch_slack =
                            std::min(metrics.cooperative_min_batch_slack, before - after);
                        if (!(after <= before + 1e-9)) metrics.cooperative_descent_ok = false;
                        domain_batch = assemble_mixed_sources(
                            domain_batch, coop, config.cooperative.fraction, select_rng);
                    }

                    const auto task = task_objective(result.triple, domain_batch);
                    const auto domain = domain_objective(result.triple, domain_batch, lambda);
                    metrics.mean_task_loss += phi[d] * task.loss;
                    metrics.mean_domain_loss += phi[d] * domain.loss;
                    sigma.add_scaled(task.head, phi[d]);
                    theta.add_scaled(task.extractor, phi[d]);
                    mu.add_scaled(domain.head, phi[d]);
                    if (lambda != 0.0) theta.add_scaled(domain.extractor, phi[d]);
                    if (config.entropy_weight > 0.0) {
                        const auto ent =
                            entropy_objective(result.triple, domain_batch, config.entropy_weight);
                        metrics.mean_entropy += phi[d] * ent.loss;
                        theta.add_scaled(ent.extractor, phi[d]);
                    }
                }

                sgd_step(result.triple.extractor, theta, lr, epoch);
                sgd_step(result.triple.task_head, sigma, lr, epoch);
                sgd_step(result.triple.domain_head, mu, lr, epoch);
            }
        };
        try {
            run_steps();
        } catch (const TrainingDivergenceError& e) {
            if (e.epoch < 0) throw TrainingDivergenceError(e.what(), epoch);
            throw;
        }

        const double inv_steps = 1.0 / static_cast<double>(steps);
        metrics.mean_task_loss *= inv_steps;
        metrics.mean_domain_loss *= inv_steps;
        metrics.mean_entropy *= inv_steps;
        if (mode == TrainMode::dannce) {
            const double batches = static_cast<double>(steps * sources.size());
            metrics.cooperative_domain_loss_original = coop_original_sum / batches;
            metrics.cooperative_domain_loss_updated = coop_updated_sum / batches;
            metrics.mean_anchor_drift = drift_sum / batches;
        }

        for (const auto& s : sources)
            metrics.source_accuracies.push_back(evaluate_accuracy(result.triple, s));
        if (target) metrics.target_accuracy = evaluate_accuracy(result.triple, *target);
        if (config.track_pairwise_proxy)
            metrics.pairwise_proxy = detail::pairwise_representation_proxy(
                result.triple, sources,
                derive_seed(config.seed, k_proxy_stream_tag + static_cast<std::uint64_t>(epoch)));

        result.epochs.push_back(std::move(metrics));
    }
    return result;
}

inline TrainResult train(NetworkTriple triple, const std::vector<LabeledBatch>& sources,
                         const LabeledBatch* target, const TrainingConfig& config,
                         TrainMode mode) {
    return train(std::move(triple), std::span<const LabeledBatch>(sources), target, config, mode);
}

}  // namespace dglab
