#include <catch2/catch_amalgamated.hpp>

#include <nlohmann/json.hpp>

#include "dglab/histogram.hpp"

using namespace dglab;

TEST_CASE("histogram construction validates its invariants", "[histogram]") {
    REQUIRE_NOTHROW(HistogramDistribution({0.0, 1.0, 2.0}, {0.5, 0.5}));

    // mass must sum to one
    REQUIRE_THROWS_AS(HistogramDistribution({0.0, 1.0, 2.0}, {0.5, 0.4}), InvalidInputError);
    // edges strictly increasing
    REQUIRE_THROWS_AS(HistogramDistribution({0.0, 0.0, 2.0}, {0.5, 0.5}), InvalidInputError);
    REQUIRE_THROWS_AS(HistogramDistribution({2.0, 1.0, 0.0}, {0.5, 0.5}), InvalidInputError);
    // nonnegative mass
    REQUIRE_THROWS_AS(HistogramDistribution({0.0, 1.0, 2.0}, {1.5, -0.5}), InvalidInputError);
    // finite values
    const double nan = std::nan("");
    REQUIRE_THROWS_AS(HistogramDistribution({0.0, 1.0, 2.0}, {nan, 1.0}), InvalidInputError);
    REQUIRE_THROWS_AS(HistogramDistribution({0.0, nan, 2.0}, {0.5, 0.5}), InvalidInputError);
    // shape mismatch
    REQUIRE_THROWS_AS(HistogramDistribution({0.0, 1.0}, {0.5, 0.5}), InvalidInputError);
    // sum within tolerance is accepted
    REQUIRE_NOTHROW(HistogramDistribution({0.0, 1.0}, {1.0 + 0.5e-9}));
}

TEST_CASE("interval masses are exact", "[histogram]") {
    const auto u = HistogramDistribution::uniform(0.0, 2.0);
    REQUIRE(u.mass_between(0.0, 2.0) == 1.0);
    REQUIRE(u.mass_between(0.0, 1.0) == 0.5);
    REQUIRE(u.mass_between(0.5, 1.0) == 0.25);
    REQUIRE(u.mass_between(-3.0, 0.0) == 0.0);
    REQUIRE(u.mass_between(2.0, 5.0) == 0.0);
    REQUIRE(u.cdf(1.5) == 0.75);
    REQUIRE(u.cdf(-1.0) == 0.0);
    REQUIRE(u.cdf(10.0) == 1.0);
    REQUIRE_THROWS_AS(u.mass_between(1.0, 0.0), InvalidInputError);
}

TEST_CASE("regrid is an exact change of representation", "[histogram]") {
    const auto u = HistogramDistribution::uniform(0.0, 2.0);

    SECTION("split into unit bins") {
        const auto r = regrid(u, {0.0, 1.0, 2.0});
        REQUIRE(r.bin_mass() == std::vector<double>{0.5, 0.5});
    }
    SECTION("embed into a wider grid") {
        const auto r = regrid(u, {-1.0, 0.0, 0.5, 2.0, 3.0});
        REQUIRE(r.bin_mass() == std::vector<double>{0.0, 0.25, 0.75, 0.0});
    }
    SECTION("grid that loses mass is rejected") {
        REQUIRE_THROWS_AS(regrid(u, {0.0, 1.0}), InvalidInputError);
        REQUIRE_THROWS_AS(regrid(u, {5.0, 6.0}), InvalidInputError);
    }
    SECTION("grid that drops an interior density change is rejected") {
        const HistogramDistribution two_level({0.0, 1.0, 2.0}, {0.75, 0.25});
        REQUIRE_THROWS_AS(regrid(two_level, {-1.0, 0.0, 2.0, 3.0}), InvalidInputError);
    }
    SECTION("interval masses are unchanged by regridding") {
        const auto r = regrid(u, {-1.0, 0.0, 0.25, 0.75, 2.0, 7.0});
        REQUIRE(r.mass_between(0.1, 1.9) == Catch::Approx(u.mass_between(0.1, 1.9)).epsilon(1e-15));
        REQUIRE(r.mass_between(0.25, 0.75) == 0.25);
    }
}

TEST_CASE("union_edges merges and deduplicates", "[histogram]") {
    const std::vector<double> a{0.0, 1.0, 2.0};
    const std::vector<double> b{1.0, 2.0, 3.0};
    REQUIRE(union_edges(a, b) == std::vector<double>{0.0, 1.0, 2.0, 3.0});
}

TEST_CASE("shared_grid expresses both inputs on the union grid", "[histogram]") {
    const auto p = HistogramDistribution::uniform(0.0, 2.0);
    const auto q = HistogramDistribution::uniform(1.0, 3.0);
    const auto [rp, rq] = shared_grid(p, q);
    REQUIRE(rp.same_grid(rq));
    REQUIRE(rp.grid_edges() == std::vector<double>{0.0, 1.0, 2.0, 3.0});
    REQUIRE(rp.bin_mass() == std::vector<double>{0.5, 0.5, 0.0});
    REQUIRE(rq.bin_mass() == std::vector<double>{0.0, 0.5, 0.5});
}

TEST_CASE("source collections regrid onto a common grid at construction", "[histogram]") {
    const SourceCollection collection(
        {HistogramDistribution::uniform(0.0, 2.0), HistogramDistribution::uniform(2.0, 4.0)},
        {0.5, 0.5});
    REQUIRE(collection.grid_edges() == std::vector<double>{0.0, 2.0, 4.0});
    REQUIRE(collection.sources()[0].bin_mass() == std::vector<double>{1.0, 0.0});
    REQUIRE(collection.sources()[1].bin_mass() == std::vector<double>{0.0, 1.0});

    REQUIRE_THROWS_AS(SourceCollection({HistogramDistribution::uniform(0.0, 1.0)}, {1.0}),
                      InvalidInputError);
    REQUIRE_THROWS_AS(SourceCollection({HistogramDistribution::uniform(0.0, 1.0),
                                        HistogramDistribution::uniform(1.0, 2.0)},
                                       {0.7, 0.7}),
                      InvalidInputError);
}

TEST_CASE("mixtures combine bin masses convexly", "[histogram]") {
    const SourceCollection collection(
        {HistogramDistribution::uniform(0.0, 2.0), HistogramDistribution::uniform(2.0, 4.0)},
        {0.5, 0.5});

    // Equal blend of U(0,2) and U(2,4) is U(0,4).
    const auto mix = mixture(collection);
    REQUIRE(mix.bin_mass() == std::vector<double>{0.5, 0.5});
    REQUIRE(mix.mass_between(1.0, 3.0) == 0.5);

    const auto corner = mixture(collection, std::vector<double>{1.0, 0.0});
    REQUIRE(corner.bin_mass() == std::vector<double>{1.0, 0.0});

    REQUIRE_THROWS_AS(mixture(collection, std::vector<double>{0.9, 0.3}), InvalidInputError);
    REQUIRE_THROWS_AS(mixture(collection, std::vector<double>{1.0}), InvalidInputError);
}

TEST_CASE("histograms round-trip through JSON", "[histogram]") {
    const HistogramDistribution h({-1.0, 0.25, 2.0}, {0.125, 0.875});
    const nlohmann::json j = h;
    const auto back = j.get<HistogramDistribution>();
    REQUIRE(back.grid_edges() == h.grid_edges());
    REQUIRE(back.bin_mass() == h.bin_mass());

    const nlohmann::json missing_mass = {{"edges", {0.0, 1.0}}};
    REQUIRE_THROWS_AS(missing_mass.get<HistogramDistribution>(), nlohmann::json::exception);
}
