#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dglab/errors.hpp"

namespace dglab {

// Absolute tolerance for "the masses sum to one" style checks.
inline constexpr double k_mass_tolerance = 1e-9;

// A piecewise-uniform probability distribution on the real line: strictly
// increasing bin edges plus one nonnegative mass per bin. Probabilities of
// intervals are exact rational functions of the stored numbers, which is what
// makes divergences in this family exactly computable.
class HistogramDistribution {
public:
    HistogramDistribution(std::vector<double> edges, std::vector<double> mass)
        : edges_(std::move(edges)), mass_(std::move(mass)) {
        validate();
    }

    // Uniform distribution on [lo, hi] as a single bin. Combined with
    // regrid() this is enough to build every piecewise-uniform fixture.
    static HistogramDistribution uniform(double lo, double hi) {
        return HistogramDistribution({lo, hi}, {1.0});
    }

    const std::vector<double>& grid_edges() const { return edges_; }
    const std::vector<double>& bin_mass() const { return mass_; }
    std::size_t bin_count() const { return mass_.size(); }

    double support_lo() const { return edges_.front(); }
    double support_hi() const { return edges_.back(); }

    bool same_grid(const HistogramDistribution& other) const {
        return edges_ == other.edges_;
    }

    // Exact probability of the interval [lo, hi].
    double mass_between(double lo, double hi) const {
        if (!(lo <= hi)) throw InvalidInputError("mass_between: lo > hi");
        double total = 0.0;
        for (std::size_t i = 0; i < mass_.size(); ++i) {
            const double a = std::max(lo, edges_[i]);
            const double b = std::min(hi, edges_[i + 1]);
            if (b > a) total += mass_[i] * (b - a) / (edges_[i + 1] - edges_[i]);
        }
        return total;
    }

    double cdf(double x) const { return mass_between(edges_.front(), std::max(x, edges_.front())); }

private:
    void validate() const {
        if (edges_.size() < 2) throw InvalidInputError("histogram needs at least one bin");
        if (mass_.size() + 1 != edges_.size())
            throw InvalidInputError("histogram needs exactly one mass per bin");
        for (std::size_t i = 0; i + 1 < edges_.size(); ++i) {
            if (!(edges_[i] < edges_[i + 1]))
                throw InvalidInputError("histogram edges must be strictly increasing");
        }
        double total = 0.0;
        for (double m : mass_) {
            if (!std::isfinite(m)) throw InvalidInputError("histogram mass must be finite");
            if (m < 0.0) throw InvalidInputError("histogram mass must be nonnegative");
            total += m;
        }
        for (double e : edges_) {
            if (!std::isfinite(e)) throw InvalidInputError("histogram edges must be finite");
        }
        if (std::abs(total - 1.0) > k_mass_tolerance)
            throw InvalidInputError("histogram mass must sum to 1, got " + std::to_string(total));
    }

    std::vector<double> edges_;
    std::vector<double> mass_;
};

// Sorted union of two edge sets. Duplicates are detected by exact equality;
// fixtures are built from exact constructed values, so no epsilon snapping.
inline std::vector<double> union_edges(std::span<const double> a, std::span<const double> b) {
    std::vector<double> merged;
    merged.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(merged));
    merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
    return merged;
}

// Re-expresses h on a new grid by splitting each bin's mass proportionally to
// overlap length. This is an exact change of representation, not an
// approximation, because the new grid is required to refine the old one:
// a new bin spanning a density change would flatten it and silently alter
// the distribution. The new grid must also cover everything carrying mass.
inline HistogramDistribution regrid(const HistogramDistribution& h,
                                    std::vector<double> new_edges) {
    if (new_edges.size() < 2) throw InvalidInputError("regrid: need at least one bin");
    const auto& old_edges = h.grid_edges();
    const auto& old_mass = h.bin_mass();

    for (double e : old_edges) {
        if (e > new_edges.front() && e < new_edges.back() &&
            !std::binary_search(new_edges.begin(), new_edges.end(), e))
            throw InvalidInputError("regrid: new grid must refine the old grid");
    }

    std::vector<double> new_mass(new_edges.size() - 1, 0.0);
    double placed = 0.0;
    for (std::size_t j = 0; j + 1 < new_edges.size(); ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < old_mass.size(); ++i) {
            if (old_mass[i] == 0.0) continue;
            const double a = std::max(new_edges[j], old_edges[i]);
            const double b = std::min(new_edges[j + 1], old_edges[i + 1]);
            if (b > a) m += old_mass[i] * (b - a) / (old_edges[i + 1] - old_edges[i]);
        }
        new_mass[j] = m;
        placed += m;
    }
    if (std::abs(placed - 1.0) > 1e-12)
        throw InvalidInputError("regrid: new grid does not cover the support");
    return HistogramDistribution(std::move(new_edges), std::move(new_mass));
}

// Both distributions expressed on the union of their grids.
inline std::pair<HistogramDistribution, HistogramDistribution> shared_grid(
    const HistogramDistribution& p, const HistogramDistribution& q) {
    if (p.same_grid(q)) return {p, q};
    auto edges = union_edges(p.grid_edges(), q.grid_edges());
    return {regrid(p, edges), regrid(q, edges)};
}

// A weighted family of source distributions. Construction re-expresses all
// sources on their common union grid, so downstream operations can work
// bin-wise without further bookkeeping.
class SourceCollection {
public:
    SourceCollection(std::vector<HistogramDistribution> sources, std::vector<double> weights)
        : weights_(std::move(weights)) {
        if (sources.size() < 2) throw InvalidInputError("source collection needs >= 2 sources");
        if (weights_.size() != sources.size())
            throw InvalidInputError("source collection needs one weight per source");
        double total = 0.0;
        for (double w : weights_) {
            if (!std::isfinite(w) || w < 0.0)
                throw InvalidInputError("source weights must be nonnegative");
            total += w;
        }
        if (std::abs(total - 1.0) > k_mass_tolerance)
            throw InvalidInputError("source weights must sum to 1");

        std::vector<double> edges = sources.front().grid_edges();
        for (std::size_t i = 1; i < sources.size(); ++i)
            edges = union_edges(edges, sources[i].grid_edges());
        sources_.reserve(sources.size());
        for (const auto& s : sources) sources_.push_back(regrid(s, edges));
    }

    static SourceCollection with_uniform_weights(std::vector<HistogramDistribution> sources) {
        const std::size_t k = sources.size();
        if (k == 0) throw InvalidInputError("source collection needs >= 2 sources");
        return SourceCollection(std::move(sources),
                                std::vector<double>(k, 1.0 / static_cast<double>(k)));
    }

    const std::vector<HistogramDistribution>& sources() const { return sources_; }
    const std::vector<double>& weights() const { return weights_; }
    std::size_t size() const { return sources_.size(); }
    const std::vector<double>& grid_edges() const { return sources_.front().grid_edges(); }

private:
    std::vector<HistogramDistribution> sources_;
    std::vector<double> weights_;
};

// Convex combination of the sources under the given weights; bin-wise since
// the collection holds a shared grid.
inline HistogramDistribution mixture(const SourceCollection& collection,
                                     std::span<const double> weights) {
    if (weights.size() != collection.size())
        throw InvalidInputError("mixture: need one weight per source");
    double total = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) throw InvalidInputError("mixture: bad weight");
        total += w;
    }
    if (std::abs(total - 1.0) > k_mass_tolerance)
        throw InvalidInputError("mixture: weights must sum to 1");

    const auto& sources = collection.sources();
    std::vector<double> mass(sources.front().bin_count(), 0.0);
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const auto& m = sources[i].bin_mass();
        for (std::size_t b = 0; b < mass.size(); ++b) mass[b] += weights[i] * m[b];
    }
    return HistogramDistribution(sources.front().grid_edges(), std::move(mass));
}

inline HistogramDistribution mixture(const SourceCollection& collection) {
    return mixture(collection, collection.weights());
}

}  // namespace dglab

// HistogramDistribution has no default constructor, so it plugs into the
// JSON library through an adl_serializer instead of member hooks.
namespace nlohmann {
template <>
struct adl_serializer<dglab::HistogramDistribution> {
    static dglab::HistogramDistribution from_json(const json& j) {
        return {j.at("edges").get<std::vector<double>>(),
                j.at("mass").get<std::vector<double>>()};
    }
    static void to_json(json& j, const dglab::HistogramDistribution& h) {
        j = json{{"edges", h.grid_edges()}, {"mass", h.bin_mass()}};
    }
};
}  // namespace nlohmann
