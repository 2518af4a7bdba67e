#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dglab/bounds.hpp"
#include "dglab/contraction.hpp"
#include "dglab/rng.hpp"

using namespace dglab;
using Catch::Matchers::WithinAbs;

namespace {

FiniteDistribution random_finite(std::size_t n, Rng& rng) {
    return FiniteDistribution(random_simplex(n, rng));
}

Labeling random_labeling(std::size_t n, Rng& rng) {
    Labeling h(n);
    for (auto& v : h) v = rng.below(2) ? 1 : 0;
    return h;
}

FiniteBoundInstance random_finite_instance(Rng& rng) {
    const std::size_t n = 3 + rng.below(3);
    const std::size_t k = 2 + rng.below(2);
    std::vector<FiniteDistribution> sources;
    std::vector<Labeling> truths;
    for (std::size_t i = 0; i < k; ++i) {
        sources.push_back(random_finite(n, rng));
        truths.push_back(random_labeling(n, rng));
    }
    std::vector<Labeling> hs;
    const std::size_t class_size = 2 + rng.below(9);
    for (std::size_t i = 0; i < class_size; ++i) hs.push_back(random_labeling(n, rng));
    return FiniteBoundInstance{.sources = std::move(sources),
                               .target = random_finite(n, rng),
                               .source_truths = std::move(truths),
                               .target_truth = random_labeling(n, rng),
                               .hypotheses = FiniteHypothesisClass(std::move(hs)),
                               .phi = {}};
}

LabeledBatch cloud_batch(std::size_t per_class, double cx, double cy, int domain,
                         std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> points;
    std::vector<int> classes, domains;
    for (std::size_t i = 0; i < 2 * per_class; ++i) {
        const int cls = static_cast<int>(i % 2);
        const double offset = cls == 0 ? -1.0 : 1.0;
        points.push_back({cx + offset + 0.3 * rng.normal(), cy + 0.3 * rng.normal()});
        classes.push_back(cls);
        domains.push_back(domain);
    }
    return LabeledBatch(std::move(points), std::move(classes), std::move(domains));
}

}  // namespace

TEST_CASE("simplex grid enumerates resolution-step weights", "[bounds]") {
    const auto g24 = simplex_grid(2, 4);
    REQUIRE(g24.size() == 5);
    for (const auto& w : g24) {
        REQUIRE(w.size() == 2);
        REQUIRE_THAT(w[0] + w[1], WithinAbs(1.0, 1e-12));
    }

    const auto g32 = simplex_grid(3, 2);
    REQUIRE(g32.size() == 6);

    REQUIRE(simplex_grid(3, 0).empty());
    REQUIRE_THROWS_AS(simplex_grid(0, 4), InvalidInputError);
}

TEST_CASE("finite error is the mislabeled mass", "[bounds]") {
    const FiniteDistribution p({0.5, 0.3, 0.2});
    const Labeling truth{0, 1, 1};

    REQUIRE(finite_error(p, truth, truth) == 0.0);
    REQUIRE(finite_error(p, truth, Labeling{1, 1, 1}) == 0.5);
    REQUIRE_THAT(finite_error(p, truth, Labeling{0, 0, 0}), WithinAbs(0.5, 1e-15));
    REQUIRE_THAT(finite_error(p, truth, Labeling{1, 0, 0}), WithinAbs(1.0, 1e-15));

    REQUIRE_THROWS_AS(finite_error(p, truth, Labeling{0, 1}), InvalidInputError);
}

TEST_CASE("finite ideal joint error by hand enumeration", "[bounds]") {
    const FiniteDistribution p({0.5, 0.5});
    const FiniteDistribution q({0.2, 0.8});
    const Labeling p_truth{0, 1};
    const Labeling q_truth{1, 1};
    const auto cls = all_labelings(2);

    // Per hypothesis: (0,0) -> 0.5 + 1.0, (0,1) -> 0.0 + 0.2,
    //                 (1,0) -> 1.0 + 0.8, (1,1) -> 0.5 + 0.0.
    REQUIRE_THAT(finite_ideal_joint_error(p, p_truth, q, q_truth, cls), WithinAbs(0.2, 1e-15));

    // A realizable pair: the shared truth is in the class.
    REQUIRE(finite_ideal_joint_error(p, p_truth, q, p_truth, cls) == 0.0);
}

TEST_CASE("bound report total is the exact sum of its terms", "[bounds]") {
    BoundReport r;
    r.lambda_phi = 0.125;
    r.weighted_source_error = 0.25;
    r.min_divergence_to_target = 0.5;
    r.max_pairwise_source_divergence = 1.0;
    r.assemble_total();
    REQUIRE(r.total_bound == 0.125 + 0.25 + 0.5 * 0.5 + 0.5 * 1.0);

    const nlohmann::json j = r;
    REQUIRE(j.at("total_bound").get<double>() == r.total_bound);
    REQUIRE(j.contains("lambda_is_estimate"));
    REQUIRE(j.contains("candidate_count"));
    REQUIRE(j.contains("object_mode"));
}

TEST_CASE("finite bound holds for every hypothesis on random instances", "[bounds]") {
    Rng rng(421);
    for (int trial = 0; trial < 60; ++trial) {
        const auto instance = random_finite_instance(rng);
        const auto mixture_terms =
            compute_finite_bound_terms(instance, ObjectMode::mixture_hull, 8);
        const auto ball_terms = compute_finite_bound_terms(instance, ObjectMode::ball_intersection,
                                                           8, 60, 1000 + trial);

        // The ball candidate set contains the mixture grid.
        REQUIRE(ball_terms.candidate_count >= mixture_terms.candidate_count);
        REQUIRE(ball_terms.min_divergence_to_target <=
                mixture_terms.min_divergence_to_target + 1e-12);

        for (const auto& h : instance.hypotheses.hypotheses) {
            const auto mix_report = finite_bound_report(instance, h, mixture_terms);
            const auto ball_report = finite_bound_report(instance, h, ball_terms);
            REQUIRE(mix_report.observed_target_error <= mix_report.total_bound + 1e-9);
            REQUIRE(ball_report.observed_target_error <= ball_report.total_bound + 1e-9);
            REQUIRE(mix_report.total_bound ==
                    mix_report.lambda_phi + mix_report.weighted_source_error +
                        0.5 * mix_report.min_divergence_to_target +
                        0.5 * mix_report.max_pairwise_source_divergence);
        }
    }
}

TEST_CASE("finite bound third term vanishes when the target is a source", "[bounds]") {
    Rng rng(99);
    auto instance = random_finite_instance(rng);
    instance.target = instance.sources[0];
    instance.target_truth = instance.source_truths[0];

    const auto terms = compute_finite_bound_terms(instance, ObjectMode::mixture_hull, 10);
    REQUIRE(terms.min_divergence_to_target == 0.0);
}

TEST_CASE("finite bound without candidates is a degenerate object", "[bounds]") {
    Rng rng(7);
    const auto instance = random_finite_instance(rng);
    REQUIRE_THROWS_AS(compute_finite_bound_terms(instance, ObjectMode::mixture_hull, 0),
                      DegenerateObjectError);
}

TEST_CASE("finite bound validates its instance", "[bounds]") {
    Rng rng(15);
    auto instance = random_finite_instance(rng);

    SECTION("no sources") {
        instance.sources.clear();
        instance.source_truths.clear();
        REQUIRE_THROWS_AS(compute_finite_bound_terms(instance, ObjectMode::mixture_hull, 4),
                          InvalidInputError);
    }
    SECTION("truth count mismatch") {
        instance.source_truths.pop_back();
        REQUIRE_THROWS_AS(compute_finite_bound_terms(instance, ObjectMode::mixture_hull, 4),
                          InvalidInputError);
    }
    SECTION("bad phi") {
        instance.phi = {0.5, 0.2};
        REQUIRE_THROWS_AS(compute_finite_bound_terms(instance, ObjectMode::mixture_hull, 4),
                          InvalidInputError);
    }
}

TEST_CASE("finite pair report reduces to the two-distribution bound", "[bounds]") {
    const FiniteDistribution p({1.0, 0.0});
    const FiniteDistribution q({0.0, 1.0});
    const Labeling truth{0, 1};
    const auto cls = all_labelings(2);

    const auto report = finite_pair_bound_report(p, truth, q, truth, cls, truth);
    REQUIRE(report.object_mode == "pair");
    REQUIRE(report.lambda_phi == 0.0);  // the shared truth is realizable
    REQUIRE(report.weighted_source_error == 0.0);
    REQUIRE(report.observed_target_error == 0.0);
    REQUIRE(report.min_divergence_to_target == 2.0);
    REQUIRE(report.max_pairwise_source_divergence == 0.0);
    REQUIRE(report.total_bound == 1.0);
}

TEST_CASE("threshold error is the interval mass between the cuts", "[bounds]") {
    const auto u = HistogramDistribution::uniform(0.0, 2.0);
    REQUIRE(threshold_error(u, 1.0, 1.0) == 0.0);
    REQUIRE_THAT(threshold_error(u, 1.0, 1.5), WithinAbs(0.25, 1e-15));
    REQUIRE_THAT(threshold_error(u, 1.5, 1.0), WithinAbs(0.25, 1e-15));
    REQUIRE_THAT(threshold_error(u, 0.0, 5.0), WithinAbs(1.0, 1e-15));
    REQUIRE(threshold_error(u, -3.0, -1.0) == 0.0);
}

TEST_CASE("ideal joint error over cuts on the worked uniforms", "[bounds]") {
    const auto p = HistogramDistribution::uniform(0.0, 2.0);
    const auto q = HistogramDistribution::uniform(1.0, 3.0);

    // Cut errors are flat at 0.5 between the two true cuts and larger outside.
    REQUIRE_THAT(ideal_joint_error_over_cuts(p, 1.0, q, 2.0), WithinAbs(0.5, 1e-12));
    REQUIRE(ideal_joint_error_over_cuts(p, 1.0, p, 1.0) == 0.0);
}

TEST_CASE("histogram bound on the two-uniform worked fixture", "[bounds]") {
    HistogramBoundInstance instance{
        .sources = {HistogramDistribution::uniform(0.0, 2.0),
                    HistogramDistribution::uniform(2.0, 4.0)},
        .target = HistogramDistribution::uniform(1.0, 3.0),
        .source_cuts = {1.0, 3.0},
        .target_cut = 2.0,
        .phi = {}};

    const auto mixture_terms =
        compute_histogram_bound_terms(instance, ObjectMode::mixture_hull, 50);
    REQUIRE_THAT(mixture_terms.lambda_phi, WithinAbs(0.5, 1e-12));
    REQUIRE(mixture_terms.max_pairwise_source_divergence == 2.0);
    // Every mixture of the two uniforms sits at divergence exactly 1 from the
    // straddling target.
    REQUIRE_THAT(mixture_terms.min_divergence_to_target, WithinAbs(1.0, 1e-12));

    const auto ball_terms =
        compute_histogram_bound_terms(instance, ObjectMode::ball_intersection, 50, 200, 5);
    REQUIRE(ball_terms.min_divergence_to_target <=
            mixture_terms.min_divergence_to_target + 1e-12);
    REQUIRE(ball_terms.candidate_count >= mixture_terms.candidate_count);

    const auto report = histogram_bound_report(instance, 2.0, mixture_terms);
    REQUIRE_THAT(report.weighted_source_error, WithinAbs(0.5, 1e-12));
    REQUIRE(report.observed_target_error == 0.0);
    REQUIRE_THAT(report.total_bound, WithinAbs(0.5 + 0.5 + 0.5 * 1.0 + 0.5 * 2.0, 1e-12));
    REQUIRE(report.observed_target_error <= report.total_bound);
}

TEST_CASE("histogram bound holds across random instances and cuts", "[bounds]") {
    Rng rng(1234);
    const std::vector<double> edges{0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t k = 2 + rng.below(2);
        std::vector<HistogramDistribution> sources;
        std::vector<double> cuts;
        for (std::size_t i = 0; i < k; ++i) {
            sources.emplace_back(edges, random_simplex(edges.size() - 1, rng));
            cuts.push_back(rng.uniform(0.0, 3.0));
        }
        const HistogramBoundInstance instance{
            .sources = std::move(sources),
            .target = HistogramDistribution(edges, random_simplex(edges.size() - 1, rng)),
            .source_cuts = std::move(cuts),
            .target_cut = rng.uniform(0.0, 3.0),
            .phi = {}};

        const auto mixture_terms =
            compute_histogram_bound_terms(instance, ObjectMode::mixture_hull, 10);
        const auto ball_terms = compute_histogram_bound_terms(
            instance, ObjectMode::ball_intersection, 10, 40, 50 + trial);
        REQUIRE(ball_terms.min_divergence_to_target <=
                mixture_terms.min_divergence_to_target + 1e-12);

        for (double cut = -0.5; cut <= 3.5; cut += 0.25) {
            const auto mix_report = histogram_bound_report(instance, cut, mixture_terms);
            const auto ball_report = histogram_bound_report(instance, cut, ball_terms);
            REQUIRE(mix_report.observed_target_error <= mix_report.total_bound + 1e-9);
            REQUIRE(ball_report.observed_target_error <= ball_report.total_bound + 1e-9);
        }
    }
}

TEST_CASE("histogram pair report on disjoint uniforms", "[bounds]") {
    const auto p = HistogramDistribution::uniform(0.0, 2.0);
    const auto q = HistogramDistribution::uniform(2.0, 4.0);

    const auto report = histogram_pair_bound_report(p, 1.0, q, 3.0, 1.0);
    REQUIRE(report.object_mode == "pair");
    REQUIRE_THAT(report.lambda_phi, WithinAbs(0.5, 1e-12));
    REQUIRE(report.weighted_source_error == 0.0);
    REQUIRE_THAT(report.observed_target_error, WithinAbs(0.5, 1e-12));
    REQUIRE(report.min_divergence_to_target == 2.0);
    REQUIRE_THAT(report.total_bound, WithinAbs(1.5, 1e-12));
    REQUIRE(report.observed_target_error <= report.total_bound);
}

TEST_CASE("joint error estimate is small for a realizable pair", "[bounds][slow]") {
    const auto source = cloud_batch(20, 0.0, 0.0, 0, 11);
    const auto target = cloud_batch(20, 0.0, 0.5, 1, 12);

    ClassifierTrainingConfig config;
    config.epochs = 60;
    const double estimate = ideal_joint_error_estimate(source, target, 2, 2, 77, config);
    REQUIRE(estimate >= 0.0);
    REQUIRE(estimate < 0.2);

    REQUIRE_THROWS_AS(ideal_joint_error_estimate(source, target, 2, 0, 77), InvalidInputError);
    REQUIRE_THROWS_AS(ideal_joint_error_estimate(source, target, 1, 2, 77), InvalidInputError);
}

TEST_CASE("proxy bound report carries estimates for sampled domains", "[bounds][slow]") {
    const std::vector<LabeledBatch> sources{cloud_batch(16, 0.0, -0.5, 0, 21),
                                            cloud_batch(16, 0.0, 0.5, 1, 22)};
    const auto target = cloud_batch(16, 0.0, 0.0, 0, 23);

    Rng rng(5);
    const NetworkTriple triple = make_triple(TripleArchitecture{}, rng);

    ProxyBoundConfig config;
    config.grid_resolution = 2;
    config.perturbation_count = 6;
    config.joint_seeds = 1;
    config.joint_training.epochs = 40;
    config.proxy.training.epochs = 40;

    for (const auto mode : {ObjectMode::mixture_hull, ObjectMode::ball_intersection}) {
        const auto report = proxy_bound_report(triple, sources, target, {}, mode, 31, config);
        REQUIRE(report.lambda_is_estimate);
        REQUIRE(report.object_mode == to_string(mode));
        REQUIRE(report.candidate_count >= 1);
        REQUIRE(report.lambda_phi >= 0.0);
        REQUIRE(report.min_divergence_to_target >= 0.0);
        REQUIRE(report.min_divergence_to_target <= 2.0);
        REQUIRE(report.total_bound ==
                report.lambda_phi + report.weighted_source_error +
                    0.5 * report.min_divergence_to_target +
                    0.5 * report.max_pairwise_source_divergence);
    }
}

TEST_CASE("object mode names round-trip", "[bounds]") {
    REQUIRE(object_mode_from_string(to_string(ObjectMode::mixture_hull)) ==
            ObjectMode::mixture_hull);
    REQUIRE(object_mode_from_string(to_string(ObjectMode::ball_intersection)) ==
            ObjectMode::ball_intersection);
    REQUIRE_THROWS_AS(object_mode_from_string("pair-of-pants"), InvalidInputError);
}

TEST_CASE("contraction problem starts with a separating discriminator", "[contraction]") {
    const auto problem = make_contraction_problem(3);
    REQUIRE(problem.p_points.size() == 40);
    REQUIRE(problem.q_points.size() == 40);
    REQUIRE(alignment_proxy_loss(problem) > 0.2);

    REQUIRE_THROWS_AS(make_contraction_problem(3, 0), InvalidInputError);
}

TEST_CASE("alignment loss gradient agrees with finite differences", "[contraction]") {
    auto problem = make_contraction_problem(9, 12);

    GradientTape tape = GradientTape::zeros_like(problem.extractor);
    const double base = alignment_proxy_loss(problem, &tape);
    REQUIRE(base > 0.0);

    Rng rng(17);
    const double eps = 1e-6;
    for (int probe = 0; probe < 12; ++probe) {
        const std::size_t layer = rng.below(problem.extractor.layers.size());
        auto& weight = problem.extractor.layers[layer].weight.data;
        const std::size_t idx = rng.below(weight.size());

        const double saved = weight[idx];
        weight[idx] = saved + eps;
        const double up = alignment_proxy_loss(problem);
        weight[idx] = saved - eps;
        const double down = alignment_proxy_loss(problem);
        weight[idx] = saved;

        const double numeric = (up - down) / (2.0 * eps);
        const double analytic = tape.weight[layer].data[idx];
        REQUIRE_THAT(analytic, WithinAbs(numeric, 1e-4 * std::max(1.0, std::abs(numeric))));
    }
}

TEST_CASE("zero step rate leaves the loss sequence constant", "[contraction]") {
    const auto problem = make_contraction_problem(4, 16);
    const auto trace = contraction_trace(problem, 0.0, 8);

    REQUIRE(trace.losses.size() == 9);
    REQUIRE(trace.ratios.size() == 8);
    for (double l : trace.losses) REQUIRE(l == trace.losses[0]);
    for (double r : trace.ratios) REQUIRE(r == 1.0);
}

TEST_CASE("halving search finds a contracting step rate", "[contraction]") {
    const auto problem = make_contraction_problem(6);
    const auto result = find_contraction_gamma(problem, 40);

    REQUIRE(result.accepted);
    REQUIRE(result.away_fraction >= 0.99);
    REQUIRE(result.trace.gamma == result.gamma);
    REQUIRE(result.trace.losses.back() < result.trace.losses.front());
}

TEST_CASE("oversized step rate records a non-contracting ratio", "[contraction]") {
    const auto problem = make_contraction_problem(6);
    const auto trace = contraction_trace(problem, 500.0, 30);

    const bool any_expansion =
        std::any_of(trace.ratios.begin(), trace.ratios.end(), [](double r) { return r >= 1.0; });
    REQUIRE(any_expansion);
}

TEST_CASE("away fraction counts only steps above the floor", "[contraction]") {
    ContractionTrace trace;
    trace.losses = {1.0, 0.5, 0.25};
    trace.ratios = {0.5, 0.5};
    REQUIRE(contraction_away_fraction(trace) == 1.0);

    trace.losses = {1.0, 2.0, 0.0};
    trace.ratios = {2.0, 0.0};
    REQUIRE(contraction_away_fraction(trace) == 0.5);

    trace.losses = {0.0, 0.0};
    trace.ratios = {std::numeric_limits<double>::quiet_NaN()};
    REQUIRE(contraction_away_fraction(trace) == 1.0);
}

TEST_CASE("contraction trace validates its inputs", "[contraction]") {
    const auto problem = make_contraction_problem(2, 8);
    REQUIRE_THROWS_AS(contraction_trace(problem, -0.1, 4), InvalidInputError);
    REQUIRE_THROWS_AS(contraction_trace(problem, 0.5, 0), InvalidInputError);
    REQUIRE_THROWS_AS(find_contraction_gamma(problem, 4, 0.0), InvalidInputError);
    REQUIRE_THROWS_AS(find_contraction_gamma(problem, 4, 1.0, 0), InvalidInputError);
}

TEST_CASE("broken discriminator surfaces as a divergence error", "[contraction]") {
    auto problem = make_contraction_problem(2, 8);
    problem.discriminator.layers[0].weight.data[0] = std::numeric_limits<double>::infinity();
    REQUIRE_THROWS_AS(contraction_trace(problem, 0.1, 3), TrainingDivergenceError);
}

TEST_CASE("contraction trace serializes to csv and json", "[contraction]") {
    ContractionTrace trace;
    trace.gamma = 0.25;
    trace.losses = {0.5, 0.25, 0.125};
    trace.ratios = {0.5, 0.5};

    const auto csv = contraction_trace_csv(trace);
    REQUIRE(csv.rfind("step,loss,ratio\n", 0) == 0);
    REQUIRE(csv.find("\n0,0.5,\n") != std::string::npos);
    REQUIRE(csv.find("\n1,0.25,0.5\n") != std::string::npos);

    const nlohmann::json j = trace;
    REQUIRE(j.at("gamma").get<double>() == 0.25);
    REQUIRE(j.at("losses").size() == 3);
    REQUIRE(j.at("ratios").size() == 2);
}
