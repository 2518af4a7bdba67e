#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dglab/contraction.hpp"
#include "dglab/divergence.hpp"
#include "dglab/errors.hpp"
#include "dglab/finite_world.hpp"
#include "dglab/histogram.hpp"
#include "dglab/rng.hpp"
#include "dglab/training.hpp"

namespace dglab {

// Outcome of one self-check suite. `lines` holds one human-readable row per
// property, already formatted for printing.
struct SuiteResult {
    std::string suite;
    std::size_t checks = 0;
    std::size_t failures = 0;
    std::vector<std::string> lines;

    bool ok() const { return failures == 0; }
};

namespace detail {

inline void record(SuiteResult& r, const std::string& property, std::size_t passed,
                   std::size_t total) {
    r.checks += total;
    r.failures += total - passed;
    r.lines.push_back(property + ": " + std::to_string(passed) + "/" + std::to_string(total));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Independent oracles. These deliberately use the slow, obvious algorithm so
// they share no code path with the implementations they are checking.
// ---------------------------------------------------------------------------

// Interval discrepancy by trying every contiguous bin range explicitly.
inline double interval_divergence_enumeration(const HistogramDistribution& p,
                                              const HistogramDistribution& q) {
    const auto [rp, rq] = shared_grid(p, q);
    const auto& pm = rp.bin_mass();
    const auto& qm = rq.bin_mass();
    double best = 0.0;
    for (std::size_t i = 0; i < pm.size(); ++i) {
        double sum = 0.0;
        for (std::size_t j = i; j < pm.size(); ++j) {
            sum += pm[j] - qm[j];
            best = std::max(best, std::abs(sum));
        }
    }
    return 2.0 * best;
}

// ---------------------------------------------------------------------------
// Seeded random objects for property checks.
// ---------------------------------------------------------------------------

inline HistogramDistribution random_histogram(Rng& rng, std::size_t max_bins = 16) {
    const std::size_t bins = 1 + static_cast<std::size_t>(rng.below(max_bins));
    std::vector<double> edges;
    edges.reserve(bins + 1);
    double e = rng.uniform(-5.0, 5.0);
    edges.push_back(e);
    for (std::size_t i = 0; i < bins; ++i) {
        e += rng.uniform(0.05, 2.0);
        edges.push_back(e);
    }
    std::vector<double> mass(bins);
    double total = 0.0;
    for (auto& m : mass) {
        m = rng.uniform();
        total += m;
    }
    if (total == 0.0) { mass[0] = 1.0; total = 1.0; }
    for (auto& m : mass) m /= total;
    return HistogramDistribution(std::move(edges), std::move(mass));
}

inline FiniteDistribution random_finite_distribution(Rng& rng, std::size_t support) {
    std::vector<double> mass(support);
    double total = 0.0;
    for (auto& m : mass) {
        m = rng.uniform();
        total += m;
    }
    if (total == 0.0) { mass[0] = 1.0; total = 1.0; }
    for (auto& m : mass) m /= total;
    return FiniteDistribution(std::move(mass));
}

// ---------------------------------------------------------------------------
// Suites.
// ---------------------------------------------------------------------------

// Interval scan vs. explicit enumeration on random histogram pairs, both on
// shared and on mismatched grids.
inline SuiteResult run_divergence_oracle_suite(std::size_t cases = 1000,
                                               std::uint64_t seed = 20260801) {
    SuiteResult result;
    result.suite = "divergence-oracle";
    Rng rng(derive_seed(seed, 1));
    std::size_t agree = 0;
    for (std::size_t c = 0; c < cases; ++c) {
        const auto p = random_histogram(rng);
        const auto q = random_histogram(rng);
        const double fast = exact_interval_divergence(p, q).value;
        const double slow = interval_divergence_enumeration(p, q);
        if (std::abs(fast - slow) <= 1e-12) ++agree;
    }
    detail::record(result, "scan equals enumeration", agree, cases);
    return result;
}

// Pseudometric axioms for the interval discrepancy: identity, symmetry,
// triangle inequality, and the [0, 2] range.
inline SuiteResult run_pseudometric_suite(std::size_t cases = 1000,
                                          std::uint64_t seed = 20260802) {
    SuiteResult result;
    result.suite = "pseudometric";
    Rng rng(derive_seed(seed, 2));
    std::size_t identity = 0, symmetry = 0, triangle = 0, in_range = 0;
    for (std::size_t c = 0; c < cases; ++c) {
        const auto p = random_histogram(rng);
        const auto q = random_histogram(rng);
        const auto r = random_histogram(rng);
        const double dpq = exact_interval_divergence(p, q).value;
        const double dqp = exact_interval_divergence(q, p).value;
        const double dpr = exact_interval_divergence(p, r).value;
        const double drq = exact_interval_divergence(r, q).value;
        const double dpp = exact_interval_divergence(p, p).value;
        if (dpp == 0.0) ++identity;
        if (dpq == dqp) ++symmetry;
        if (dpq <= dpr + drq + 1e-9) ++triangle;
        if (dpq >= 0.0 && dpq <= 2.0) ++in_range;
    }
    detail::record(result, "d(p,p) == 0", identity, cases);
    detail::record(result, "symmetry", symmetry, cases);
    detail::record(result, "triangle inequality", triangle, cases);
    detail::record(result, "range [0,2]", in_range, cases);
    return result;
}

// The three ball-intersection statements, checked by enumeration on random
// finite worlds:
//   1. every mixture of the sources lies in the intersection of the balls;
//   2. members of the intersection satisfy the admissibility inequality for
//      every weighting;
//   3. candidates outside the union of the balls violate it for every
//      weighting.
inline SuiteResult run_ball_geometry_suite(std::size_t instances = 1000,
                                           std::uint64_t seed = 20260803) {
    SuiteResult result;
    result.suite = "ball-geometry";
    Rng rng(derive_seed(seed, 3));

    std::size_t mixture_total = 0, mixture_pass = 0;
    std::size_t inside_total = 0, inside_pass = 0;
    std::size_t outside_total = 0, outside_pass = 0;

    for (std::size_t inst = 0; inst < instances; ++inst) {
        const std::size_t support = 2 + static_cast<std::size_t>(rng.below(5));
        const auto full = all_labelings(support);

        // Random subclass of all labelings (at least two members), closed
        // into its symmetric-difference class for the divergence.
        std::vector<Labeling> subset;
        for (const auto& h : full.hypotheses)
            if (rng.uniform() < 0.6) subset.push_back(h);
        while (subset.size() < 2)
            subset.push_back(full.hypotheses[rng.below(full.size())]);
        const auto cls = symmetric_difference_class(FiniteHypothesisClass(subset));

        const std::size_t k = 2 + static_cast<std::size_t>(rng.below(2));
        std::vector<FiniteDistribution> sources;
        for (std::size_t i = 0; i < k; ++i)
            sources.push_back(random_finite_distribution(rng, support));
        const double rho = finite_max_pairwise(sources, cls);

        // Weightings to quantify over: corners, uniform, and random points.
        std::vector<std::vector<double>> phis;
        for (std::size_t i = 0; i < k; ++i) {
            std::vector<double> e(k, 0.0);
            e[i] = 1.0;
            phis.push_back(std::move(e));
        }
        phis.emplace_back(k, 1.0 / static_cast<double>(k));
        for (int r = 0; r < 4; ++r) phis.push_back(random_simplex(k, rng));

        // Statement 1 + 2 on mixtures.
        for (int m = 0; m < 3; ++m) {
            const auto w = random_simplex(k, rng);
            const auto mix = finite_mixture(sources, w);
            ++mixture_total;
            if (finite_intersection_membership(sources, mix, cls)) ++mixture_pass;
        }

        // Statement 2 / 3 on random candidates, classified by geometry.
        for (int c = 0; c < 4; ++c) {
            const auto s = random_finite_distribution(rng, support);
            double dmin = 2.0, dmax = 0.0;
            for (const auto& p : sources) {
                const double d = brute_force_divergence(p, s, cls).value;
                dmin = std::min(dmin, d);
                dmax = std::max(dmax, d);
            }
            if (dmax <= rho + k_membership_tolerance) {
                // In the intersection: the inequality must hold for every phi.
                bool all_hold = true;
                for (const auto& phi : phis)
                    if (!finite_check_condition(sources, phi, s, cls).holds) all_hold = false;
                ++inside_total;
                if (all_hold) ++inside_pass;
            } else if (dmin > rho + k_membership_tolerance) {
                // Outside the union: the inequality must fail for every phi.
                bool all_fail = true;
                for (const auto& phi : phis) {
                    const auto rep = finite_check_condition(sources, phi, s, cls);
                    if (rep.lhs <= rep.rhs - k_membership_tolerance) all_fail = false;
                }
                ++outside_total;
                if (all_fail) ++outside_pass;
            }
            // Between the two regions the statements say nothing.
        }
    }

    detail::record(result, "mixtures inside intersection", mixture_pass, mixture_total);
    detail::record(result, "intersection implies condition", inside_pass, inside_total);
    detail::record(result, "outside union implies violation", outside_pass, outside_total);
    return result;
}

namespace detail {

inline bool grad_close(double analytic, double numeric) {
    return std::abs(analytic - numeric) <=
           1e-4 * std::max({0.01, std::abs(analytic), std::abs(numeric)});
}

// A smooth triple for finite differencing; tanh instead of relu so that no
// probe lands on an activation kink.
inline NetworkTriple gradcheck_triple(Rng& rng) {
    const std::vector<std::size_t> ext_dims{2, 6, 4};
    const std::vector<Activation> ext_acts{Activation::tanh_act, Activation::identity};
    const std::vector<std::size_t> task_dims{4, 6, 2};
    const std::vector<Activation> task_acts{Activation::tanh_act, Activation::identity};
    const std::vector<std::size_t> dom_dims{4, 6, 2};
    const std::vector<Activation> dom_acts{Activation::tanh_act, Activation::identity};
    return NetworkTriple(make_mlp(ext_dims, ext_acts, rng), make_mlp(task_dims, task_acts, rng),
                         make_mlp(dom_dims, dom_acts, rng));
}

inline LabeledBatch gradcheck_batch(Rng& rng) {
    std::vector<std::vector<double>> points;
    std::vector<int> classes, domains;
    for (int i = 0; i < 6; ++i) {
        points.push_back({rng.normal(), rng.normal()});
        classes.push_back(static_cast<int>(rng.below(2)));
        domains.push_back(i % 2);
    }
    return LabeledBatch(std::move(points), std::move(classes), std::move(domains));
}

// A parameter address inside one network: weight entry `index` of `layer`.
struct ProbeSite {
    std::size_t layer = 0;
    std::size_t index = 0;
};

inline ProbeSite random_probe(const DenseNetwork& net, Rng& rng) {
    const std::size_t layer = static_cast<std::size_t>(rng.below(net.layers.size()));
    const std::size_t index =
        static_cast<std::size_t>(rng.below(net.layers[layer].weight.data.size()));
    return {layer, index};
}

// Central difference of `scalar` with respect to the probed weight entry.
inline double central_difference(DenseNetwork& net, ProbeSite site,
                                 const std::function<double()>& scalar, double eps = 1e-5) {
    double& entry = net.layers[site.layer].weight.data[site.index];
    const double saved = entry;
    entry = saved + eps;
    const double up = scalar();
    entry = saved - eps;
    const double down = scalar();
    entry = saved;
    return (up - down) / (2.0 * eps);
}

inline double tape_at(const GradientTape& tape, ProbeSite site) {
    return tape.weight[site.layer].data[site.index];
}

}  // namespace detail

// Analytic gradients of every training loss against central finite
// differences: the task term, the domain term on both sides of the reversal,
// the entropy term, the anchor divergence, and the combined objective that
// the update step actually applies.
inline SuiteResult run_gradcheck_suite(std::size_t configs = 100,
                                       std::uint64_t seed = 20260805) {
    SuiteResult result;
    result.suite = "gradcheck";
    Rng rng(derive_seed(seed, 5));

    std::size_t task_pass = 0, domain_pass = 0, entropy_pass = 0, kl_pass = 0, combined_pass = 0;

    for (std::size_t c = 0; c < configs; ++c) {
        NetworkTriple triple = detail::gradcheck_triple(rng);
        const LabeledBatch batch = detail::gradcheck_batch(rng);
        const double lambda = rng.uniform(0.3, 1.5);
        const double entropy_weight = rng.uniform(0.1, 0.5);

        bool task_ok = true, domain_ok = true, entropy_ok = true, kl_ok = true,
             combined_ok = true;

        for (int probe = 0; probe < 3; ++probe) {
            const auto ext_site = detail::random_probe(triple.extractor, rng);
            const auto task_site = detail::random_probe(triple.task_head, rng);
            const auto dom_site = detail::random_probe(triple.domain_head, rng);

            // Task cross-entropy, extractor and head sides.
            {
                const auto grads = task_objective(triple, batch);
                const auto scalar = [&] { return task_objective(triple, batch).loss; };
                if (!detail::grad_close(
                        detail::tape_at(grads.extractor, ext_site),
                        detail::central_difference(triple.extractor, ext_site, scalar)))
                    task_ok = false;
                if (!detail::grad_close(
                        detail::tape_at(grads.head, task_site),
                        detail::central_difference(triple.task_head, task_site, scalar)))
                    task_ok = false;
            }

            // Domain loss: the head descends it, the extractor receives the
            // reversed gradient, so its analytic tape must match the
            // derivative of minus lambda times the loss.
            {
                const auto grads = domain_objective(triple, batch, lambda);
                const auto loss = [&] { return domain_objective(triple, batch, lambda).loss; };
                if (!detail::grad_close(
                        detail::tape_at(grads.head, dom_site),
                        detail::central_difference(triple.domain_head, dom_site, loss)))
                    domain_ok = false;
                const auto reversed = [&] {
                    return -lambda * domain_objective(triple, batch, lambda).loss;
                };
                if (!detail::grad_close(
                        detail::tape_at(grads.extractor, ext_site),
                        detail::central_difference(triple.extractor, ext_site, reversed)))
                    domain_ok = false;
            }

            // Entropy term: only the extractor is updated, scaled by the
            // weight.
            {
                const auto grads = entropy_objective(triple, batch, entropy_weight);
                const auto scalar = [&] {
                    return entropy_weight * entropy_objective(triple, batch, entropy_weight).loss;
                };
                if (!detail::grad_close(
                        detail::tape_at(grads.extractor, ext_site),
                        detail::central_difference(triple.extractor, ext_site, scalar)))
                    entropy_ok = false;
            }

            // Anchor divergence with respect to the input point, through the
            // task head and the extractor, exactly the path the cooperative
            // update differentiates.
            {
                const auto& x0 = batch.point(static_cast<std::size_t>(probe));
                std::vector<double> x = x0;
                const auto anchor_logits = forward(triple.task_head, forward(triple.extractor, x0));
                const auto kl_at = [&](const std::vector<double>& point) {
                    return kl_divergence(anchor_logits,
                                         forward(triple.task_head, forward(triple.extractor, point)))
                        .value;
                };

                ForwardCache ext_cache, head_cache;
                const auto repr = forward(triple.extractor, x, &ext_cache);
                const auto logits = forward(triple.task_head, repr, &head_cache);
                const auto kl = kl_divergence(anchor_logits, logits);
                const auto repr_grad = backward(triple.task_head, head_cache, kl.grad);
                const auto input_grad = backward(triple.extractor, ext_cache, repr_grad);

                for (std::size_t d = 0; d < x.size(); ++d) {
                    const double saved = x[d];
                    x[d] = saved + 1e-5;
                    const double up = kl_at(x);
                    x[d] = saved - 1e-5;
                    const double down = kl_at(x);
                    x[d] = saved;
                    if (!detail::grad_close(input_grad[d], (up - down) / 2e-5)) kl_ok = false;
                }
            }

            // Combined objective, each parameter group against the scalar it
            // actually descends.
            {
                const auto task_grads = task_objective(triple, batch);
                const auto domain_grads = domain_objective(triple, batch, lambda);
                const auto entropy_grads = entropy_objective(triple, batch, entropy_weight);

                GradientTape ext_tape = task_grads.extractor;
                ext_tape.add_scaled(domain_grads.extractor, 1.0);
                ext_tape.add_scaled(entropy_grads.extractor, 1.0);

                const auto ext_scalar = [&] {
                    return task_objective(triple, batch).loss -
                           lambda * domain_objective(triple, batch, lambda).loss +
                           entropy_weight * entropy_objective(triple, batch, entropy_weight).loss;
                };
                if (!detail::grad_close(
                        detail::tape_at(ext_tape, ext_site),
                        detail::central_difference(triple.extractor, ext_site, ext_scalar)))
                    combined_ok = false;

                const auto head_scalar = [&] { return task_objective(triple, batch).loss; };
                if (!detail::grad_close(
                        detail::tape_at(task_grads.head, task_site),
                        detail::central_difference(triple.task_head, task_site, head_scalar)))
                    combined_ok = false;

                const auto dom_scalar = [&] {
                    return domain_objective(triple, batch, lambda).loss;
                };
                if (!detail::grad_close(
                        detail::tape_at(domain_grads.head, dom_site),
                        detail::central_difference(triple.domain_head, dom_site, dom_scalar)))
                    combined_ok = false;
            }
        }

        if (task_ok) ++task_pass;
        if (domain_ok) ++domain_pass;
        if (entropy_ok) ++entropy_pass;
        if (kl_ok) ++kl_pass;
        if (combined_ok) ++combined_pass;
    }

    detail::record(result, "task cross-entropy", task_pass, configs);
    detail::record(result, "domain loss and reversal", domain_pass, configs);
    detail::record(result, "entropy term", entropy_pass, configs);
    detail::record(result, "anchor divergence", kl_pass, configs);
    detail::record(result, "combined objective", combined_pass, configs);
    return result;
}

// Step-rate search on seeded alignment problems: the halving search must find
// a rate whose loss ratios stay below one away from the minimum.
inline SuiteResult run_contraction_suite(std::size_t instances = 20,
                                         std::uint64_t seed = 20260806) {
    SuiteResult result;
    result.suite = "contraction";
    std::size_t found = 0, reduced = 0;
    for (std::size_t i = 0; i < instances; ++i) {
        const auto problem = make_contraction_problem(derive_seed(seed, 600 + i));
        const auto search = find_contraction_gamma(problem, 40);
        if (search.accepted && search.away_fraction >= 0.99) ++found;
        if (search.trace.losses.back() < search.trace.losses.front()) ++reduced;
    }
    detail::record(result, "contracting rate found", found, instances);
    detail::record(result, "loss reduced over the trace", reduced, instances);
    return result;
}

inline std::vector<std::string> suite_names() {
    return {"divergence-oracle", "pseudometric", "ball-geometry", "gradcheck", "contraction"};
}

// Dispatch by name; the ball geometry statements also answer to "prop2".
// `cases` == 0 keeps each suite's default size.
inline SuiteResult run_suite(const std::string& name, std::size_t cases = 0) {
    if (name == "divergence-oracle")
        return cases ? run_divergence_oracle_suite(cases) : run_divergence_oracle_suite();
    if (name == "pseudometric")
        return cases ? run_pseudometric_suite(cases) : run_pseudometric_suite();
    if (name == "ball-geometry" || name == "prop2")
        return cases ? run_ball_geometry_suite(cases) : run_ball_geometry_suite();
    if (name == "gradcheck") return cases ? run_gradcheck_suite(cases) : run_gradcheck_suite();
    if (name == "contraction")
        return cases ? run_contraction_suite(cases) : run_contraction_suite();
    throw InvalidInputError("unknown verification suite: " + name);
}

}  // namespace dglab
