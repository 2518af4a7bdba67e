#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dglab/errors.hpp"
#include "dglab/histogram.hpp"
#include "dglab/rng.hpp"

namespace dglab {

// Membership and condition checks compare exact quantities, so the slack
// only needs to absorb floating-point noise.
inline constexpr double k_membership_tolerance = 1e-12;

// A discrepancy value between two distributions, always in [0, 2]. The upper
// limit is what a hypothesis class that separates disjoint supports attains.
struct DivergenceValue {
    DivergenceValue(double v) : value(v) {  // NOLINT: implicit by design
        if (!std::isfinite(v) || v < -1e-9 || v > 2.0 + 1e-6)
            throw InvalidInputError("divergence value out of range: " + std::to_string(v));
        if (value < 0.0) value = 0.0;
        if (value > 2.0) value = 2.0;
    }

    double value;
};

// Largest sum over a contiguous (possibly empty) range. Kadane's scan.
inline double max_subarray_sum(std::span<const double> xs) {
    double best = 0.0;
    double running = 0.0;
    for (double x : xs) {
        running += x;
        if (running < 0.0) running = 0.0;
        if (running > best) best = running;
    }
    return best;
}

// Discrepancy between p and q measured by the class of interval indicators:
//
//   2 * sup over intervals I of |p(I) - q(I)|.
//
// On a shared grid the interval mass difference is linear in each endpoint
// while the endpoint moves inside a bin, so the supremum is attained with
// endpoints on bin edges. That reduces the problem to the best contiguous
// run of signed per-bin mass differences, which a linear scan finds in both
// sign directions.
inline DivergenceValue exact_interval_divergence(const HistogramDistribution& p,
                                                 const HistogramDistribution& q) {
    const auto [rp, rq] = shared_grid(p, q);
    const auto& pm = rp.bin_mass();
    const auto& qm = rq.bin_mass();

    std::vector<double> diff(pm.size());
    for (std::size_t i = 0; i < diff.size(); ++i) {
        diff[i] = pm[i] - qm[i];
        if (!std::isfinite(diff[i]))
            throw InvalidInputError("exact_interval_divergence: non-finite bin mass");
    }
    std::vector<double> neg(diff.size());
    for (std::size_t i = 0; i < diff.size(); ++i) neg[i] = -diff[i];

    return 2.0 * std::max(max_subarray_sum(diff), max_subarray_sum(neg));
}

// Largest pairwise discrepancy within a source family; the radius used by
// the ball-intersection constructions.
inline double max_pairwise_divergence(const SourceCollection& collection) {
    double rho = 0.0;
    const auto& src = collection.sources();
    for (std::size_t i = 0; i < src.size(); ++i)
        for (std::size_t j = i + 1; j < src.size(); ++j)
            rho = std::max(rho, exact_interval_divergence(src[i], src[j]).value);
    return rho;
}

// Is s within divergence rho of center (up to float noise)?
inline bool ball_membership(const HistogramDistribution& center, double rho,
                            const HistogramDistribution& s) {
    if (!(rho >= 0.0)) throw InvalidInputError("ball_membership: radius must be >= 0");
    return exact_interval_divergence(center, s).value <= rho + k_membership_tolerance;
}

// Is s in the intersection of the balls of radius "largest pairwise source
// divergence" around every source?
inline bool intersection_membership(const SourceCollection& collection,
                                    const HistogramDistribution& s) {
    const double rho = max_pairwise_divergence(collection);
    for (const auto& p : collection.sources())
        if (!ball_membership(p, rho, s)) return false;
    return true;
}

// Outcome of testing a candidate aggregate S against the admissibility
// inequality: the weighted average divergence from the sources to S must not
// exceed the largest pairwise source divergence.
struct ConditionReport {
    double lhs = 0.0;    // sum_i phi_i * d(P_i, S)
    double rhs = 0.0;    // max_{i,j} d(P_i, P_j)
    double slack = 0.0;  // rhs - lhs
    bool holds = false;
};

// Checks the admissibility inequality for candidate s. Weights default to
// the collection's own; pass an override to sweep the simplex cheaply.
inline ConditionReport check_condition(const SourceCollection& collection,
                                       const HistogramDistribution& s,
                                       std::span<const double> phi = {}) {
    const auto& weights = phi.empty() ? std::span<const double>(collection.weights()) : phi;
    if (weights.size() != collection.size())
        throw InvalidInputError("check_condition: need one weight per source");
    double total = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) throw InvalidInputError("check_condition: bad weight");
        total += w;
    }
    if (std::abs(total - 1.0) > k_mass_tolerance)
        throw InvalidInputError("check_condition: weights must sum to 1");

    ConditionReport report;
    const auto& src = collection.sources();
    for (std::size_t i = 0; i < src.size(); ++i)
        report.lhs += weights[i] * exact_interval_divergence(src[i], s).value;
    report.rhs = max_pairwise_divergence(collection);
    report.slack = report.rhs - report.lhs;
    report.holds = report.lhs <= report.rhs + k_membership_tolerance;
    return report;
}

// Report for the augmentation guarantee. Sources P_i are blended with
// auxiliaries R_i into S_i = alpha * P_i + beta * R_i. If
//
//   rho_star - beta * max_i d(R_i, P_i) >= rho
//
// then every distribution within rho of all P_i is within rho_star of all
// S_i. When the inequality holds we also spot-check that subset relation on
// a sampled candidate set.
struct AugmentationReport {
    double rho = 0.0;       // max pairwise divergence of the originals
    double rho_star = 0.0;  // max pairwise divergence of the blended sources
    double beta_scaled_aux_divergence = 0.0;  // beta * max_i d(R_i, P_i)
    bool condition_holds = false;
    std::size_t candidates_checked = 0;  // members of the original intersection
    std::size_t subset_violations = 0;   // members that left the blended intersection
};

inline AugmentationReport check_augmentation_condition(
    const SourceCollection& collection, std::span<const HistogramDistribution> auxiliaries,
    double alpha, double beta, std::size_t candidate_count = 200, std::uint64_t seed = 0) {
    if (auxiliaries.size() != collection.size())
        throw InvalidInputError("augmentation: need one auxiliary per source");
    if (!(alpha >= 0.0) || !(beta >= 0.0) || std::abs(alpha + beta - 1.0) > k_mass_tolerance)
        throw InvalidInputError("augmentation: alpha, beta must be nonnegative and sum to 1");

    // Common grid across originals and auxiliaries.
    std::vector<double> edges = collection.grid_edges();
    for (const auto& r : auxiliaries) edges = union_edges(edges, r.grid_edges());

    std::vector<HistogramDistribution> originals;
    std::vector<HistogramDistribution> blended;
    originals.reserve(collection.size());
    blended.reserve(collection.size());
    for (std::size_t i = 0; i < collection.size(); ++i) {
        originals.push_back(regrid(collection.sources()[i], edges));
        const auto aux = regrid(auxiliaries[i], edges);
        std::vector<double> mass(aux.bin_count());
        for (std::size_t b = 0; b < mass.size(); ++b)
            mass[b] = alpha * originals[i].bin_mass()[b] + beta * aux.bin_mass()[b];
        blended.emplace_back(edges, std::move(mass));
    }

    AugmentationReport report;
    report.rho = max_pairwise_divergence(collection);
    for (std::size_t i = 0; i < blended.size(); ++i)
        for (std::size_t j = i + 1; j < blended.size(); ++j)
            report.rho_star = std::max(
                report.rho_star, exact_interval_divergence(blended[i], blended[j]).value);
    double max_aux = 0.0;
    for (std::size_t i = 0; i < originals.size(); ++i)
        max_aux = std::max(max_aux,
                           exact_interval_divergence(auxiliaries[i], originals[i]).value);
    report.beta_scaled_aux_divergence = beta * max_aux;
    report.condition_holds =
        report.rho_star - report.beta_scaled_aux_divergence >= report.rho - k_membership_tolerance;

    if (!report.condition_holds) return report;

    // Sample candidates near the original family: exact mixtures plus
    // renormalized perturbed mixtures. Each candidate inside every original
    // ball must also be inside every blended ball.
    Rng rng(derive_seed(seed, 0xa09u));
    const std::size_t k = originals.size();
    for (std::size_t c = 0; c < candidate_count; ++c) {
        const auto w = random_simplex(k, rng);
        std::vector<double> mass(originals.front().bin_count(), 0.0);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t b = 0; b < mass.size(); ++b)
                mass[b] += w[i] * originals[i].bin_mass()[b];
        if (c % 2 == 1) {  // perturb every other candidate off the hull
            double total = 0.0;
            for (auto& m : mass) {
                m *= 1.0 + 0.5 * (rng.uniform() - 0.5);
                total += m;
            }
            for (auto& m : mass) m /= total;
        }
        const HistogramDistribution candidate(edges, std::move(mass));

        bool in_original = true;
        for (const auto& p : originals)
            if (!ball_membership(p, report.rho, candidate)) { in_original = false; break; }
        if (!in_original) continue;

        ++report.candidates_checked;
        for (const auto& s : blended) {
            if (!ball_membership(s, report.rho_star, candidate)) {
                ++report.subset_violations;
                break;
            }
        }
    }
    return report;
}

}  // namespace dglab
