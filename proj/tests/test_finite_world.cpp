#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <vector>

#include "dglab/finite_world.hpp"
#include "dglab/verify.hpp"

using namespace dglab;

namespace {

// Threshold rays on an n-point support: predict 1 on a prefix {0, ..., a}.
FiniteHypothesisClass threshold_rays(std::size_t support) {
    std::vector<Labeling> hs;
    for (std::size_t cut = 0; cut <= support; ++cut) {
        Labeling h(support, 0);
        for (std::size_t i = 0; i < cut; ++i) h[i] = 1;
        hs.push_back(std::move(h));
    }
    return FiniteHypothesisClass(std::move(hs));
}

}  // namespace

TEST_CASE("finite distribution validation", "[finite]") {
    REQUIRE_NOTHROW(FiniteDistribution({0.25, 0.75}));
    REQUIRE_THROWS_AS(FiniteDistribution({}), InvalidInputError);
    REQUIRE_THROWS_AS(FiniteDistribution({0.5, 0.6}), InvalidInputError);
    REQUIRE_THROWS_AS(FiniteDistribution({1.5, -0.5}), InvalidInputError);
}

TEST_CASE("hypothesis class validation", "[finite]") {
    REQUIRE_NOTHROW(FiniteHypothesisClass({{0, 1}, {1, 1}}));
    REQUIRE_THROWS_AS(FiniteHypothesisClass({}), InvalidInputError);
    REQUIRE_THROWS_AS(FiniteHypothesisClass({{0, 1}, {1}}), InvalidInputError);
    REQUIRE_THROWS_AS(FiniteHypothesisClass({{0, 2}}), InvalidInputError);
}

TEST_CASE("all_labelings enumerates the full class", "[finite]") {
    const auto cls = all_labelings(3);
    REQUIRE(cls.size() == 8);
    REQUIRE(cls.support_size() == 3);
    REQUIRE_THROWS_AS(all_labelings(0), ResourceLimitError);
    REQUIRE_THROWS_AS(all_labelings(21), ResourceLimitError);
}

TEST_CASE("brute-force divergence on a worked example", "[finite]") {
    // Frozen: the best ray keeps only the first point, |0.7 - 0.4| = 0.3,
    // so the divergence is 0.6.
    const FiniteDistribution p({0.7, 0.3, 0.0});
    const FiniteDistribution q({0.4, 0.6, 0.0});
    const auto rays = threshold_rays(3);
    REQUIRE(brute_force_divergence(p, q, rays).value == Catch::Approx(0.6).margin(1e-15));

    REQUIRE(brute_force_divergence(p, p, rays).value == 0.0);

    const FiniteDistribution wrong_support({0.5, 0.5});
    REQUIRE_THROWS_AS(brute_force_divergence(p, wrong_support, rays), InvalidInputError);
}

TEST_CASE("symmetric-difference class of rays is the interval class", "[finite]") {
    // Frozen: XOR of two prefix labelings on 3 points gives a contiguous
    // run; 7 of the 8 labelings are reachable (101 is not an interval).
    const auto rays = threshold_rays(3);
    const auto xor_class = symmetric_difference_class(rays);
    REQUIRE(xor_class.size() == 7);
    const Labeling non_interval{1, 0, 1};
    REQUIRE(std::find(xor_class.hypotheses.begin(), xor_class.hypotheses.end(), non_interval) ==
            xor_class.hypotheses.end());

    REQUIRE_THROWS_AS(symmetric_difference_class(all_labelings(4), 8), ResourceLimitError);
}

TEST_CASE("finite mixtures and memberships", "[finite]") {
    const std::vector<FiniteDistribution> sources{FiniteDistribution({1.0, 0.0}),
                                                  FiniteDistribution({0.0, 1.0})};
    const std::vector<double> w{0.25, 0.75};
    const auto mix = finite_mixture(sources, w);
    REQUIRE(mix.mass == std::vector<double>{0.25, 0.75});

    const auto cls = all_labelings(2);
    REQUIRE(finite_max_pairwise(sources, cls) == 2.0);
    REQUIRE(finite_intersection_membership(sources, mix, cls));

    const auto report =
        finite_check_condition(sources, std::vector<double>{0.5, 0.5}, mix, cls);
    REQUIRE(report.holds);
    REQUIRE(report.rhs == 2.0);
}

TEST_CASE("ball geometry suite passes on random finite worlds", "[finite][suite]") {
    const auto suite = run_ball_geometry_suite(200, 7);
    CAPTURE(suite.lines);
    REQUIRE(suite.ok());
    REQUIRE(suite.checks > 0);
}
