#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dglab/divergence.hpp"
#include "dglab/errors.hpp"

namespace dglab {

// A probability distribution on a finite support {0, ..., n-1}. Everything
// about these is enumerable, which makes them the reference world for
// checking the geometric statements by brute force.
struct FiniteDistribution {
    explicit FiniteDistribution(std::vector<double> m) : mass(std::move(m)) {
        if (mass.empty()) throw InvalidInputError("finite distribution needs support");
        double total = 0.0;
        for (double v : mass) {
            if (!std::isfinite(v) || v < 0.0)
                throw InvalidInputError("finite distribution mass must be nonnegative");
            total += v;
        }
        if (std::abs(total - 1.0) > k_mass_tolerance)
            throw InvalidInputError("finite distribution mass must sum to 1");
    }

    std::size_t support_size() const { return mass.size(); }

    std::vector<double> mass;
};

// A binary labeling of the support, i.e. one hypothesis.
using Labeling = std::vector<std::uint8_t>;

struct FiniteHypothesisClass {
    explicit FiniteHypothesisClass(std::vector<Labeling> hs) : hypotheses(std::move(hs)) {
        if (hypotheses.empty()) throw InvalidInputError("hypothesis class must be nonempty");
        const std::size_t n = hypotheses.front().size();
        if (n == 0) throw InvalidInputError("hypotheses need a nonempty support");
        for (const auto& h : hypotheses) {
            if (h.size() != n) throw InvalidInputError("hypotheses must share a support size");
            for (auto v : h)
                if (v > 1) throw InvalidInputError("hypotheses must be 0/1 valued");
        }
    }

    std::size_t support_size() const { return hypotheses.front().size(); }
    std::size_t size() const { return hypotheses.size(); }

    std::vector<Labeling> hypotheses;
};

// Every labeling of an n-point support; 2^n of them, so n is capped.
inline FiniteHypothesisClass all_labelings(std::size_t support_size) {
    if (support_size == 0 || support_size > 20)
        throw ResourceLimitError("all_labelings: support size must be in [1, 20]");
    std::vector<Labeling> hs;
    hs.reserve(std::size_t{1} << support_size);
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << support_size); ++bits) {
        Labeling h(support_size);
        for (std::size_t i = 0; i < support_size; ++i)
            h[i] = static_cast<std::uint8_t>((bits >> i) & 1);
        hs.push_back(std::move(h));
    }
    return FiniteHypothesisClass(std::move(hs));
}

// Discrepancy by direct enumeration: 2 * max over hypotheses of
// |p(h=1) - q(h=1)|. No shortcuts; this is the oracle the interval scan is
// checked against (after composing with the symmetric-difference class).
inline DivergenceValue brute_force_divergence(const FiniteDistribution& p,
                                              const FiniteDistribution& q,
                                              const FiniteHypothesisClass& cls) {
    if (p.support_size() != q.support_size() || p.support_size() != cls.support_size())
        throw InvalidInputError("brute_force_divergence: support sizes must match");
    double best = 0.0;
    for (const auto& h : cls.hypotheses) {
        double dp = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i)
            if (h[i]) dp += p.mass[i] - q.mass[i];
        best = std::max(best, std::abs(dp));
    }
    return 2.0 * best;
}

// The class of XOR combinations h1 != h2 over all hypothesis pairs,
// deduplicated. Discrepancy over this class is the quantity the target-error
// bounds are stated in.
inline FiniteHypothesisClass symmetric_difference_class(const FiniteHypothesisClass& cls,
                                                        std::size_t cap = std::size_t{1} << 20) {
    std::set<Labeling> seen;
    for (std::size_t a = 0; a < cls.size(); ++a) {
        for (std::size_t b = 0; b < cls.size(); ++b) {
            Labeling g(cls.support_size());
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] = cls.hypotheses[a][i] ^ cls.hypotheses[b][i];
            seen.insert(std::move(g));
            if (seen.size() > cap)
                throw ResourceLimitError("symmetric_difference_class: cap exceeded");
        }
    }
    return FiniteHypothesisClass(std::vector<Labeling>(seen.begin(), seen.end()));
}

inline FiniteDistribution finite_mixture(std::span<const FiniteDistribution> dists,
                                         std::span<const double> weights) {
    if (dists.empty() || dists.size() != weights.size())
        throw InvalidInputError("finite_mixture: need one weight per distribution");
    std::vector<double> mass(dists.front().support_size(), 0.0);
    for (std::size_t i = 0; i < dists.size(); ++i) {
        if (dists[i].support_size() != mass.size())
            throw InvalidInputError("finite_mixture: support sizes must match");
        for (std::size_t b = 0; b < mass.size(); ++b) mass[b] += weights[i] * dists[i].mass[b];
    }
    return FiniteDistribution(std::move(mass));
}

inline double finite_max_pairwise(std::span<const FiniteDistribution> dists,
                                  const FiniteHypothesisClass& cls) {
    double rho = 0.0;
    for (std::size_t i = 0; i < dists.size(); ++i)
        for (std::size_t j = i + 1; j < dists.size(); ++j)
            rho = std::max(rho, brute_force_divergence(dists[i], dists[j], cls).value);
    return rho;
}

inline bool finite_ball_membership(const FiniteDistribution& center, double rho,
                                   const FiniteDistribution& s,
                                   const FiniteHypothesisClass& cls) {
    if (!(rho >= 0.0)) throw InvalidInputError("finite_ball_membership: radius must be >= 0");
    return brute_force_divergence(center, s, cls).value <= rho + k_membership_tolerance;
}

inline bool finite_intersection_membership(std::span<const FiniteDistribution> dists,
                                           const FiniteDistribution& s,
                                           const FiniteHypothesisClass& cls) {
    const double rho = finite_max_pairwise(dists, cls);
    for (const auto& p : dists)
        if (!finite_ball_membership(p, rho, s, cls)) return false;
    return true;
}

inline ConditionReport finite_check_condition(std::span<const FiniteDistribution> dists,
                                              std::span<const double> phi,
                                              const FiniteDistribution& s,
                                              const FiniteHypothesisClass& cls) {
    if (dists.size() < 2) throw InvalidInputError("finite_check_condition: need >= 2 sources");
    if (phi.size() != dists.size())
        throw InvalidInputError("finite_check_condition: need one weight per source");
    ConditionReport report;
    for (std::size_t i = 0; i < dists.size(); ++i)
        report.lhs += phi[i] * brute_force_divergence(dists[i], s, cls).value;
    report.rhs = finite_max_pairwise(dists, cls);
    report.slack = report.rhs - report.lhs;
    report.holds = report.lhs <= report.rhs + k_membership_tolerance;
    return report;
}

}  // namespace dglab
