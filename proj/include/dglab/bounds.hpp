#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <nlohmann/json.hpp>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dglab/batch.hpp"
#include "dglab/divergence.hpp"
#include "dglab/errors.hpp"
#include "dglab/finite_world.hpp"
#include "dglab/histogram.hpp"
#include "dglab/proxy_distance.hpp"
#include "dglab/rng.hpp"
#include "dglab/training.hpp"

namespace dglab {

// ============================================================================
// Target-error bound reports. The bound has four terms:
//
//   target error <= lambda_phi                     ideal joint errors
//                 + weighted source error          what h costs on the sources
//                 + 1/2 min over S in O of d(S,Q)  object-to-target divergence
//                 + 1/2 max pairwise d(P_i,P_j)    source spread
//
// The candidate object O is either the mixture hull (a simplex grid over
// source mixtures) or the intersection of divergence balls around the sources
// (the same grid plus perturbation candidates, filtered by membership). The
// ball candidate set contains the mixture grid, so its third term can only be
// tighter.
// ============================================================================

enum class ObjectMode { mixture_hull, ball_intersection };

inline std::string to_string(ObjectMode mode) {
    switch (mode) {
        case ObjectMode::mixture_hull: return "mixture-hull";
        case ObjectMode::ball_intersection: return "ball-intersection";
    }
    throw InvalidInputError("unknown object mode");
}

inline ObjectMode object_mode_from_string(const std::string& name) {
    if (name == "mixture-hull") return ObjectMode::mixture_hull;
    if (name == "ball-intersection") return ObjectMode::ball_intersection;
    throw InvalidInputError("unknown object mode: " + name);
}

struct BoundReport {
    double lambda_phi = 0.0;
    double weighted_source_error = 0.0;
    double min_divergence_to_target = 0.0;
    double max_pairwise_source_divergence = 0.0;
    double total_bound = 0.0;
    double observed_target_error = 0.0;
    bool lambda_is_estimate = false;
    std::string object_mode;  // "mixture-hull", "ball-intersection", or "pair"
    std::size_t candidate_count = 0;

    void assemble_total() {
        total_bound = lambda_phi + weighted_source_error + 0.5 * min_divergence_to_target +
                      0.5 * max_pairwise_source_divergence;
    }
};

inline void to_json(nlohmann::json& j, const BoundReport& r) {
    j = nlohmann::json{{"lambda_phi", r.lambda_phi},
                       {"weighted_source_error", r.weighted_source_error},
                       {"min_divergence_to_target", r.min_divergence_to_target},
                       {"max_pairwise_source_divergence", r.max_pairwise_source_divergence},
                       {"total_bound", r.total_bound},
                       {"observed_target_error", r.observed_target_error},
                       {"lambda_is_estimate", r.lambda_is_estimate},
                       {"object_mode", r.object_mode},
                       {"candidate_count", r.candidate_count}};
}

// Every weight vector with entries that are multiples of 1/resolution and sum
// to 1: the grid over the mixture simplex.
inline std::vector<std::vector<double>> simplex_grid(std::size_t k, std::size_t resolution) {
    if (k == 0) throw InvalidInputError("simplex_grid: need at least one coordinate");
    std::vector<std::vector<double>> grid;
    if (resolution == 0) return grid;
    std::vector<std::size_t> parts(k, 0);
    const double inv = 1.0 / static_cast<double>(resolution);
    const auto emit = [&] {
        std::vector<double> w(k);
        for (std::size_t i = 0; i < k; ++i) w[i] = static_cast<double>(parts[i]) * inv;
        grid.push_back(std::move(w));
    };
    // Enumerate compositions of `resolution` into k nonnegative parts.
    const std::function<void(std::size_t, std::size_t)> recurse = [&](std::size_t slot,
                                                                      std::size_t left) {
        if (slot + 1 == k) {
            parts[slot] = left;
            emit();
            return;
        }
        for (std::size_t take = 0; take <= left; ++take) {
            parts[slot] = take;
            recurse(slot + 1, left - take);
        }
    };
    recurse(0, resolution);
    return grid;
}

inline std::vector<double> uniform_weights(std::size_t k) {
    return std::vector<double>(k, 1.0 / static_cast<double>(k));
}

namespace detail {

inline std::vector<double> resolve_bound_phi(std::span<const double> phi, std::size_t k) {
    if (phi.empty()) return uniform_weights(k);
    if (phi.size() != k) throw InvalidInputError("bound: need one phi weight per source");
    double total = 0.0;
    for (double w : phi) {
        if (!(w >= 0.0)) throw InvalidInputError("bound: phi weights must be >= 0");
        total += w;
    }
    if (std::abs(total - 1.0) > k_mass_tolerance)
        throw InvalidInputError("bound: phi weights must sum to 1");
    return std::vector<double>(phi.begin(), phi.end());
}

}  // namespace detail

// ----------------------------------------------------------------------------
// Finite instance world: everything enumerable, everything exact.
// ----------------------------------------------------------------------------

// Probability mass where h disagrees with the true labeling.
inline double finite_error(const FiniteDistribution& dist, const Labeling& truth,
                           const Labeling& h) {
    if (truth.size() != dist.support_size() || h.size() != dist.support_size())
        throw InvalidInputError("finite_error: labeling size must match the support");
    double err = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i)
        if (h[i] != truth[i]) err += dist.mass[i];
    return err;
}

// Exact minimum over the class of combined source + target error: the error
// of the ideal joint hypothesis for this pair.
inline double finite_ideal_joint_error(const FiniteDistribution& source, const Labeling& source_truth,
                                       const FiniteDistribution& target, const Labeling& target_truth,
                                       const FiniteHypothesisClass& cls) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& h : cls.hypotheses)
        best = std::min(best, finite_error(source, source_truth, h) +
                                  finite_error(target, target_truth, h));
    return best;
}

struct FiniteBoundInstance {
    std::vector<FiniteDistribution> sources;
    FiniteDistribution target;
    std::vector<Labeling> source_truths;  // true labels per source distribution
    Labeling target_truth;
    FiniteHypothesisClass hypotheses;
    std::vector<double> phi;  // empty means uniform

    void validate() const {
        if (sources.empty()) throw InvalidInputError("finite bound: need at least one source");
        const std::size_t n = target.support_size();
        if (hypotheses.support_size() != n || target_truth.size() != n)
            throw InvalidInputError("finite bound: support sizes must match");
        if (source_truths.size() != sources.size())
            throw InvalidInputError("finite bound: need one truth labeling per source");
        for (std::size_t i = 0; i < sources.size(); ++i)
            if (sources[i].support_size() != n || source_truths[i].size() != n)
                throw InvalidInputError("finite bound: support sizes must match");
    }
};

// The hypothesis-independent terms, reusable across every h of one instance.
struct FiniteBoundTerms {
    double lambda_phi = 0.0;
    double min_divergence_to_target = 0.0;
    double max_pairwise_source_divergence = 0.0;
    std::vector<double> phi;
    ObjectMode mode = ObjectMode::mixture_hull;
    std::size_t candidate_count = 0;
};

inline FiniteBoundTerms compute_finite_bound_terms(const FiniteBoundInstance& instance,
                                                   ObjectMode mode,
                                                   std::size_t grid_resolution = 50,
                                                   std::size_t perturbation_count = 200,
                                                   std::uint64_t seed = 0) {
    instance.validate();
    const std::size_t k = instance.sources.size();

    FiniteBoundTerms terms;
    terms.mode = mode;
    terms.phi = detail::resolve_bound_phi(instance.phi, k);

    const auto disagreement_class = symmetric_difference_class(instance.hypotheses);
    for (std::size_t i = 0; i < k; ++i)
        terms.lambda_phi +=
            terms.phi[i] * finite_ideal_joint_error(instance.sources[i], instance.source_truths[i],
                                                    instance.target, instance.target_truth,
                                                    instance.hypotheses);
    terms.max_pairwise_source_divergence =
        finite_max_pairwise(instance.sources, disagreement_class);

    std::vector<FiniteDistribution> candidates;
    for (const auto& w : simplex_grid(k, grid_resolution))
        candidates.push_back(finite_mixture(instance.sources, w));
    if (mode == ObjectMode::ball_intersection) {
        Rng rng(derive_seed(seed, 0xba11u));
        for (std::size_t c = 0; c < perturbation_count; ++c) {
            const auto w = random_simplex(k, rng);
            auto mass = finite_mixture(instance.sources, w).mass;
            double total = 0.0;
            for (auto& m : mass) {
                m *= 1.0 + 0.5 * (rng.uniform() - 0.5);
                total += m;
            }
            for (auto& m : mass) m /= total;
            FiniteDistribution candidate(std::move(mass));
            if (finite_intersection_membership(instance.sources, candidate, disagreement_class))
                candidates.push_back(std::move(candidate));
        }
    }
    if (candidates.empty())
        throw DegenerateObjectError("finite bound: no candidate aggregates survive");

    terms.candidate_count = candidates.size();
    terms.min_divergence_to_target = std::numeric_limits<double>::infinity();
    for (const auto& s : candidates)
        terms.min_divergence_to_target =
            std::min(terms.min_divergence_to_target,
                     brute_force_divergence(s, instance.target, disagreement_class).value);
    return terms;
}

inline BoundReport finite_bound_report(const FiniteBoundInstance& instance, const Labeling& h,
                                       const FiniteBoundTerms& terms) {
    BoundReport report;
    report.lambda_phi = terms.lambda_phi;
    report.min_divergence_to_target = terms.min_divergence_to_target;
    report.max_pairwise_source_divergence = terms.max_pairwise_source_divergence;
    report.object_mode = to_string(terms.mode);
    report.candidate_count = terms.candidate_count;
    for (std::size_t i = 0; i < instance.sources.size(); ++i)
        report.weighted_source_error +=
            terms.phi[i] * finite_error(instance.sources[i], instance.source_truths[i], h);
    report.observed_target_error = finite_error(instance.target, instance.target_truth, h);
    report.assemble_total();
    return report;
}

inline BoundReport finite_bound_report(const FiniteBoundInstance& instance, const Labeling& h,
                                       ObjectMode mode, std::size_t grid_resolution = 50,
                                       std::size_t perturbation_count = 200,
                                       std::uint64_t seed = 0) {
    return finite_bound_report(
        instance, h,
        compute_finite_bound_terms(instance, mode, grid_resolution, perturbation_count, seed));
}

// Two-distribution form: single source, divergence measured directly.
inline BoundReport finite_pair_bound_report(const FiniteDistribution& source,
                                            const Labeling& source_truth,
                                            const FiniteDistribution& target,
                                            const Labeling& target_truth,
                                            const FiniteHypothesisClass& hypotheses,
                                            const Labeling& h) {
    if (source.support_size() != target.support_size())
        throw InvalidInputError("pair bound: support sizes must match");
    BoundReport report;
    report.object_mode = "pair";
    report.candidate_count = 1;
    report.lambda_phi =
        finite_ideal_joint_error(source, source_truth, target, target_truth, hypotheses);
    report.weighted_source_error = finite_error(source, source_truth, h);
    report.observed_target_error = finite_error(target, target_truth, h);
    report.min_divergence_to_target =
        brute_force_divergence(source, target, symmetric_difference_class(hypotheses)).value;
    report.max_pairwise_source_divergence = 0.0;
    report.assemble_total();
    return report;
}

// ----------------------------------------------------------------------------
// Histogram world with threshold hypotheses. A hypothesis is a cut point t
// labeling everything at or below t as class 1; the true labels of each
// distribution come from its own cut point. Errors are interval masses, so
// everything stays exact on the shared grid, and the disagreement class of
// two cuts is an interval, which is what exact_interval_divergence optimizes
// over.
// ----------------------------------------------------------------------------

// Mass that distribution assigns to the stretch between the hypothesis cut
// and the true cut: exactly the points the hypothesis mislabels.
inline double threshold_error(const HistogramDistribution& dist, double truth_cut,
                              double hypothesis_cut) {
    return dist.mass_between(std::min(truth_cut, hypothesis_cut),
                             std::max(truth_cut, hypothesis_cut));
}

struct HistogramBoundInstance {
    std::vector<HistogramDistribution> sources;
    HistogramDistribution target;
    std::vector<double> source_cuts;  // true label cut per source
    double target_cut = 0.0;
    std::vector<double> phi;  // empty means uniform

    void validate() const {
        if (sources.empty()) throw InvalidInputError("histogram bound: need at least one source");
        if (source_cuts.size() != sources.size())
            throw InvalidInputError("histogram bound: need one cut per source");
        for (double c : source_cuts)
            if (!std::isfinite(c)) throw InvalidInputError("histogram bound: cuts must be finite");
        if (!std::isfinite(target_cut))
            throw InvalidInputError("histogram bound: cuts must be finite");
    }
};

// Error terms for cut hypotheses are piecewise linear in the cut with kinks
// only at grid edges and at the true cuts, so scanning those points gives the
// exact minimum over all real cuts.
inline double ideal_joint_error_over_cuts(const HistogramDistribution& source, double source_cut,
                                          const HistogramDistribution& target,
                                          double target_cut) {
    std::vector<double> candidates{source_cut, target_cut};
    for (double e : source.grid_edges()) candidates.push_back(e);
    for (double e : target.grid_edges()) candidates.push_back(e);
    double best = std::numeric_limits<double>::infinity();
    for (double t : candidates)
        best = std::min(best,
                        threshold_error(source, source_cut, t) +
                            threshold_error(target, target_cut, t));
    return best;
}

struct HistogramBoundTerms {
    double lambda_phi = 0.0;
    double min_divergence_to_target = 0.0;
    double max_pairwise_source_divergence = 0.0;
    std::vector<double> phi;
    ObjectMode mode = ObjectMode::mixture_hull;
    std::size_t candidate_count = 0;
};

inline HistogramBoundTerms compute_histogram_bound_terms(const HistogramBoundInstance& instance,
                                                         ObjectMode mode,
                                                         std::size_t grid_resolution = 50,
                                                         std::size_t perturbation_count = 200,
                                                         std::uint64_t seed = 0) {
    instance.validate();
    const std::size_t k = instance.sources.size();

    HistogramBoundTerms terms;
    terms.mode = mode;
    terms.phi = detail::resolve_bound_phi(instance.phi, k);

    for (std::size_t i = 0; i < k; ++i)
        terms.lambda_phi +=
            terms.phi[i] * ideal_joint_error_over_cuts(instance.sources[i],
                                                       instance.source_cuts[i], instance.target,
                                                       instance.target_cut);

    // A shared-grid collection of the sources for exact mixtures; weights are
    // only a placeholder, mixtures below pass their own.
    const SourceCollection collection = SourceCollection::with_uniform_weights(instance.sources);
    terms.max_pairwise_source_divergence = max_pairwise_divergence(collection);

    std::vector<HistogramDistribution> candidates;
    for (const auto& w : simplex_grid(k, grid_resolution))
        candidates.push_back(mixture(collection, w));
    if (mode == ObjectMode::ball_intersection) {
        Rng rng(derive_seed(seed, 0xba11u));
        const auto& grid = collection.grid_edges();
        for (std::size_t c = 0; c < perturbation_count; ++c) {
            const auto w = random_simplex(k, rng);
            auto mass = mixture(collection, w).bin_mass();
            double total = 0.0;
            for (auto& m : mass) {
                m *= 1.0 + 0.5 * (rng.uniform() - 0.5);
                total += m;
            }
            for (auto& m : mass) m /= total;
            HistogramDistribution candidate(grid, std::move(mass));
            if (intersection_membership(collection, candidate))
                candidates.push_back(std::move(candidate));
        }
    }
    if (candidates.empty())
        throw DegenerateObjectError("histogram bound: no candidate aggregates survive");

    terms.candidate_count = candidates.size();
    terms.min_divergence_to_target = std::numeric_limits<double>::infinity();
    for (const auto& s : candidates)
        terms.min_divergence_to_target = std::min(
            terms.min_divergence_to_target, exact_interval_divergence(s, instance.target).value);
    return terms;
}

inline BoundReport histogram_bound_report(const HistogramBoundInstance& instance,
                                          double hypothesis_cut,
                                          const HistogramBoundTerms& terms) {
    BoundReport report;
    report.lambda_phi = terms.lambda_phi;
    report.min_divergence_to_target = terms.min_divergence_to_target;
    report.max_pairwise_source_divergence = terms.max_pairwise_source_divergence;
    report.object_mode = to_string(terms.mode);
    report.candidate_count = terms.candidate_count;
    for (std::size_t i = 0; i < instance.sources.size(); ++i)
        report.weighted_source_error +=
            terms.phi[i] *
            threshold_error(instance.sources[i], instance.source_cuts[i], hypothesis_cut);
    report.observed_target_error =
        threshold_error(instance.target, instance.target_cut, hypothesis_cut);
    report.assemble_total();
    return report;
}

inline BoundReport histogram_bound_report(const HistogramBoundInstance& instance,
                                          double hypothesis_cut, ObjectMode mode,
                                          std::size_t grid_resolution = 50,
                                          std::size_t perturbation_count = 200,
                                          std::uint64_t seed = 0) {
    return histogram_bound_report(
        instance, hypothesis_cut,
        compute_histogram_bound_terms(instance, mode, grid_resolution, perturbation_count, seed));
}

inline BoundReport histogram_pair_bound_report(const HistogramDistribution& source,
                                               double source_cut,
                                               const HistogramDistribution& target,
                                               double target_cut, double hypothesis_cut) {
    BoundReport report;
    report.object_mode = "pair";
    report.candidate_count = 1;
    report.lambda_phi = ideal_joint_error_over_cuts(source, source_cut, target, target_cut);
    report.weighted_source_error = threshold_error(source, source_cut, hypothesis_cut);
    report.observed_target_error = threshold_error(target, target_cut, hypothesis_cut);
    report.min_divergence_to_target = exact_interval_divergence(source, target).value;
    report.max_pairwise_source_divergence = 0.0;
    report.assemble_total();
    return report;
}

// ----------------------------------------------------------------------------
// Sampled world: every quantity is an estimate. Lambda comes from the best of
// a few seeded joint trainings, divergences from discriminator proxies, and
// the report is flagged accordingly.
// ----------------------------------------------------------------------------

// Best combined source + target error over `seeds` trainings of a fresh
// classifier on the merged sample: an upper estimate of the ideal joint error.
inline double ideal_joint_error_estimate(const LabeledBatch& source, const LabeledBatch& target,
                                         std::size_t class_count, int seeds, std::uint64_t seed,
                                         const ClassifierTrainingConfig& config = {}) {
    if (seeds < 1) throw InvalidInputError("joint error estimate: need at least one seed");
    if (class_count < 2) throw InvalidInputError("joint error estimate: need >= 2 classes");

    std::vector<std::vector<double>> merged_points = source.points();
    std::vector<int> merged_labels = source.class_labels();
    merged_points.insert(merged_points.end(), target.points().begin(), target.points().end());
    merged_labels.insert(merged_labels.end(), target.class_labels().begin(),
                         target.class_labels().end());

    double best = std::numeric_limits<double>::infinity();
    for (int s = 0; s < seeds; ++s) {
        Rng rng(derive_seed(seed, 0x301e7 + static_cast<std::uint64_t>(s)));
        const std::vector<std::size_t> dims{source.dim(), 32, class_count};
        const std::vector<Activation> acts{Activation::relu, Activation::identity};
        DenseNetwork net = make_mlp(dims, acts, rng);
        train_classifier(merged_points, merged_labels, net, config, rng);
        const double err = classification_error(source.points(), source.class_labels(), net) +
                           classification_error(target.points(), target.class_labels(), net);
        best = std::min(best, err);
    }
    return best;
}

struct ProxyBoundConfig {
    std::size_t grid_resolution = 3;
    std::size_t perturbation_count = 24;
    int joint_seeds = 3;
    double membership_slack = 0.15;  // statistical tolerance for the ball filter
    ClassifierTrainingConfig joint_training;
    ProxyADistanceConfig proxy;
};

namespace detail {

// Pooled sample approximating the mixture with the given weights: from each
// source, the first round(w_i * m) points of a seeded shuffle.
inline DomainSample pooled_mixture_sample(std::span<const LabeledBatch> sources,
                                          std::span<const double> weights, std::size_t m,
                                          Rng& rng) {
    DomainSample pooled;
    pooled.domain_id = -1;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const std::size_t take = static_cast<std::size_t>(
            std::llround(weights[i] * static_cast<double>(m)));
        std::vector<std::size_t> order(sources[i].size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order);
        for (std::size_t j = 0; j < std::min(take, order.size()); ++j)
            pooled.points.push_back(sources[i].point(order[j]));
    }
    return pooled;
}

inline DomainSample batch_sample(const LabeledBatch& batch, int domain_id) {
    DomainSample s;
    s.domain_id = domain_id;
    s.points = batch.points();
    return s;
}

}  // namespace detail

// Bound report for sampled domains, evaluated for the classifier inside the
// given triple. Every term is an estimate; the report says so.
inline BoundReport proxy_bound_report(const NetworkTriple& triple,
                                      std::span<const LabeledBatch> sources,
                                      const LabeledBatch& target, std::span<const double> phi,
                                      ObjectMode mode, std::uint64_t seed,
                                      const ProxyBoundConfig& config = {}) {
    if (sources.empty()) throw InvalidInputError("proxy bound: need at least one source");
    const std::size_t k = sources.size();
    const auto weights = detail::resolve_bound_phi(phi, k);

    BoundReport report;
    report.lambda_is_estimate = true;
    report.object_mode = to_string(mode);

    for (std::size_t i = 0; i < k; ++i) {
        report.lambda_phi +=
            weights[i] * ideal_joint_error_estimate(sources[i], target, triple.class_count(),
                                                    config.joint_seeds,
                                                    derive_seed(seed, 0x1a0 + i),
                                                    config.joint_training);
        report.weighted_source_error += weights[i] * (1.0 - evaluate_accuracy(triple, sources[i]));
    }
    report.observed_target_error = 1.0 - evaluate_accuracy(triple, target);

    std::vector<DomainSample> source_samples;
    for (std::size_t i = 0; i < k; ++i)
        source_samples.push_back(detail::batch_sample(sources[i], static_cast<int>(i)));
    const auto target_sample = detail::batch_sample(target, -1);

    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a + 1; b < k; ++b)
            report.max_pairwise_source_divergence = std::max(
                report.max_pairwise_source_divergence,
                proxy_a_distance(source_samples[a], source_samples[b],
                                 derive_seed(seed, 0x9a17 + (a << 8) + b), config.proxy));

    std::size_t m = sources[0].size();
    for (const auto& s : sources) m = std::min(m, s.size());

    Rng rng(derive_seed(seed, 0xba11u));
    std::vector<DomainSample> candidates;
    for (const auto& w : simplex_grid(k, config.grid_resolution)) {
        auto pooled = detail::pooled_mixture_sample(sources, w, m, rng);
        if (pooled.points.size() >= 2) candidates.push_back(std::move(pooled));
    }
    if (mode == ObjectMode::ball_intersection) {
        for (std::size_t c = 0; c < config.perturbation_count; ++c) {
            const auto w = random_simplex(k, rng);
            auto pooled = detail::pooled_mixture_sample(sources, w, m, rng);
            if (pooled.points.size() < 2) continue;
            bool inside = true;
            for (std::size_t i = 0; i < k && inside; ++i) {
                const double d =
                    proxy_a_distance(source_samples[i], pooled,
                                     derive_seed(seed, 0xf117 + (c << 8) + i), config.proxy);
                inside = d <= report.max_pairwise_source_divergence + config.membership_slack;
            }
            if (inside) candidates.push_back(std::move(pooled));
        }
    }
    if (candidates.empty())
        throw DegenerateObjectError("proxy bound: no candidate aggregates survive");

    report.candidate_count = candidates.size();
    report.min_divergence_to_target = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < candidates.size(); ++c)
        report.min_divergence_to_target =
            std::min(report.min_divergence_to_target,
                     proxy_a_distance(candidates[c], target_sample,
                                      derive_seed(seed, 0x3a6 + c), config.proxy));
    report.assemble_total();
    return report;
}

}  // namespace dglab
