#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include <nlohmann/json.hpp>

#include "dglab/losses.hpp"
#include "dglab/nn.hpp"

using namespace dglab;

namespace {

// Central finite difference through an arbitrary parameter slot; the
// independent oracle for every analytic gradient below.
double central_difference(const std::function<double()>& f, double& slot, double h = 1e-5) {
    const double original = slot;
    slot = original + h;
    const double up = f();
    slot = original - h;
    const double down = f();
    slot = original;
    return (up - down) / (2.0 * h);
}

void require_close_grad(double analytic, double numeric) {
    const double tol = 1e-4 * std::max({0.01, std::abs(analytic), std::abs(numeric)});
    REQUIRE(std::abs(analytic - numeric) <= tol);
}

DenseNetwork small_net(Rng& rng) {
    const std::vector<std::size_t> dims{3, 5, 4, 2};
    const std::vector<Activation> acts{Activation::tanh_act, Activation::relu,
                                       Activation::identity};
    return make_mlp(dims, acts, rng);
}

}  // namespace

TEST_CASE("make_mlp produces the requested shapes", "[nn]") {
    Rng rng(1);
    const auto net = small_net(rng);
    REQUIRE(net.layers.size() == 3);
    REQUIRE(net.input_dim() == 3);
    REQUIRE(net.output_dim() == 2);
    REQUIRE(net.parameter_count() == (3 * 5 + 5) + (5 * 4 + 4) + (4 * 2 + 2));

    // Weights respect the fan-based bound, biases start at zero.
    const double limit0 = std::sqrt(6.0 / (3 + 5));
    for (double w : net.layers[0].weight.data) REQUIRE(std::abs(w) <= limit0);
    for (double b : net.layers[0].bias) REQUIRE(b == 0.0);

    const std::vector<std::size_t> bad_dims{3};
    REQUIRE_THROWS_AS(make_mlp(bad_dims, {}, rng), InvalidInputError);
    const std::vector<std::size_t> dims{3, 0};
    const std::vector<Activation> acts{Activation::relu};
    REQUIRE_THROWS_AS(make_mlp(dims, acts, rng), InvalidInputError);
}

TEST_CASE("forward matches a hand computation", "[nn]") {
    // One affine layer, identity activation: y = Wx + b.
    DenseNetwork net;
    Layer layer;
    layer.weight = Matrix(2, 2);
    layer.weight.at(0, 0) = 1.0;
    layer.weight.at(0, 1) = 2.0;
    layer.weight.at(1, 0) = -1.0;
    layer.weight.at(1, 1) = 0.5;
    layer.bias = {0.25, -0.25};
    layer.activation = Activation::identity;
    net.layers.push_back(layer);

    const std::vector<double> x{1.0, 3.0};
    const auto y = forward(net, x);
    REQUIRE(y[0] == 1.0 * 1.0 + 2.0 * 3.0 + 0.25);
    REQUIRE(y[1] == -1.0 * 1.0 + 0.5 * 3.0 - 0.25);

    net.layers[0].activation = Activation::relu;
    const auto yr = forward(net, std::vector<double>{-1.0, -1.0});
    REQUIRE(yr[0] == 0.0);  // pre-activation -2.75 clamps to zero

    const std::vector<double> wrong_dim{1.0};
    REQUIRE_THROWS_AS(forward(net, wrong_dim), InvalidInputError);
}

TEST_CASE("backward gradients match finite differences", "[nn][gradcheck]") {
    Rng rng(20260811);
    for (int trial = 0; trial < 5; ++trial) {
        auto net = small_net(rng);
        std::vector<double> x(net.input_dim());
        for (auto& v : x) v = rng.normal();
        std::vector<double> upstream(net.output_dim());
        for (auto& v : upstream) v = rng.normal();

        // Scalar objective: fixed linear functional of the network output.
        const auto objective = [&] {
            const auto y = forward(net, x);
            double acc = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) acc += upstream[i] * y[i];
            return acc;
        };

        ForwardCache cache;
        forward(net, x, &cache);
        auto tape = GradientTape::zeros_like(net);
        const auto dx = backward(net, cache, upstream, &tape);

        // Every weight, bias, and input coordinate against the oracle.
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            auto& layer = net.layers[l];
            for (std::size_t i = 0; i < layer.weight.data.size(); ++i)
                require_close_grad(tape.weight[l].data[i],
                                   central_difference(objective, layer.weight.data[i]));
            for (std::size_t i = 0; i < layer.bias.size(); ++i)
                require_close_grad(tape.bias[l][i],
                                   central_difference(objective, layer.bias[i]));
        }
        for (std::size_t i = 0; i < x.size(); ++i)
            require_close_grad(dx[i], central_difference(objective, x[i]));
    }
}

TEST_CASE("backward rejects a stale or mismatched cache", "[nn]") {
    Rng rng(7);
    auto net = small_net(rng);
    ForwardCache cache;
    forward(net, std::vector<double>{0.1, 0.2, 0.3}, &cache);

    const std::vector<std::size_t> dims{3, 2};
    const std::vector<Activation> acts{Activation::identity};
    auto other = make_mlp(dims, acts, rng);
    const std::vector<double> upstream{1.0, 0.0};
    REQUIRE_THROWS_AS(backward(other, cache, upstream), ContractViolation);

    auto tape = GradientTape::zeros_like(other);
    REQUIRE_THROWS_AS(backward(net, cache, std::vector<double>{1.0, 0.0}, &tape),
                      ContractViolation);

    REQUIRE_THROWS_AS(backward(net, cache, std::vector<double>{1.0}), InvalidInputError);
}

TEST_CASE("gradient tapes accumulate, scale, and detect poison", "[nn]") {
    Rng rng(9);
    auto net = small_net(rng);
    auto a = GradientTape::zeros_like(net);
    auto b = GradientTape::zeros_like(net);
    b.weight[0].data[0] = 2.0;
    b.bias[2][1] = -4.0;

    a.add_scaled(b, 0.5);
    REQUIRE(a.weight[0].data[0] == 1.0);
    REQUIRE(a.bias[2][1] == -2.0);
    a.scale(3.0);
    REQUIRE(a.weight[0].data[0] == 3.0);

    REQUIRE(a.all_finite());
    a.bias[0][0] = std::nan("");
    REQUIRE_FALSE(a.all_finite());

    GradientTape wrong;
    REQUIRE_THROWS_AS(a.add_scaled(wrong, 1.0), ContractViolation);
}

TEST_CASE("sgd_step applies the update and guards against divergence", "[nn]") {
    Rng rng(11);
    auto net = small_net(rng);
    const double w0 = net.layers[0].weight.data[0];
    auto tape = GradientTape::zeros_like(net);
    tape.weight[0].data[0] = 2.0;

    sgd_step(net, tape, 0.25);
    REQUIRE(net.layers[0].weight.data[0] == w0 - 0.5);

    REQUIRE_THROWS_AS(sgd_step(net, tape, 0.0), InvalidInputError);
    REQUIRE_THROWS_AS(sgd_step(net, tape, -1.0), InvalidInputError);

    tape.weight[0].data[0] = std::numeric_limits<double>::infinity();
    REQUIRE_THROWS_AS(sgd_step(net, tape, 0.1, 3), TrainingDivergenceError);
    try {
        sgd_step(net, tape, 0.1, 3);
    } catch (const TrainingDivergenceError& e) {
        REQUIRE(e.epoch == 3);
    }
}

TEST_CASE("networks round-trip through their checkpoint form", "[nn]") {
    Rng rng(13);
    const auto net = small_net(rng);
    const nlohmann::json j = net;
    const auto back = j.get<DenseNetwork>();

    REQUIRE(back.layers.size() == net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        REQUIRE(back.layers[l].weight.data == net.layers[l].weight.data);  // bitwise
        REQUIRE(back.layers[l].bias == net.layers[l].bias);
        REQUIRE(back.layers[l].activation == net.layers[l].activation);
    }

    // Serialized text is stable: dumping twice gives identical bytes.
    REQUIRE(j.dump() == nlohmann::json(back).dump());

    nlohmann::json truncated = j;
    truncated["parameters"].erase(truncated["parameters"].size() - 1);
    REQUIRE_THROWS_AS(truncated.get<DenseNetwork>(), ParseError);
}

TEST_CASE("network triples validate their interface dims", "[nn]") {
    Rng rng(17);
    const TripleArchitecture arch{.input_dim = 2,
                                  .hidden_width = 8,
                                  .representation_dim = 4,
                                  .head_hidden_width = 8,
                                  .class_count = 3,
                                  .domain_count = 2};
    const auto triple = make_triple(arch, rng);
    REQUIRE(triple.extractor.input_dim() == 2);
    REQUIRE(triple.representation_dim() == 4);
    REQUIRE(triple.class_count() == 3);
    REQUIRE(triple.domain_count() == 2);

    const std::vector<std::size_t> d1{2, 4};
    const std::vector<Activation> a1{Activation::identity};
    const std::vector<std::size_t> d2{5, 3};
    REQUIRE_THROWS_AS(NetworkTriple(make_mlp(d1, a1, rng), make_mlp(d2, a1, rng),
                                    make_mlp(d1, a1, rng)),
                      InvalidInputError);

    const nlohmann::json j = triple;
    const auto back = j.get<NetworkTriple>();
    REQUIRE(nlohmann::json(back).dump() == j.dump());
}

TEST_CASE("softmax is shift-stable and normalized", "[losses]") {
    const std::vector<double> logits{1.0, 2.0, 3.0};
    const auto p = softmax(logits);
    double total = 0.0;
    for (double v : p) total += v;
    REQUIRE(total == Catch::Approx(1.0).margin(1e-12));

    const std::vector<double> shifted{1001.0, 1002.0, 1003.0};
    const auto q = softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i)
        REQUIRE(p[i] == Catch::Approx(q[i]).margin(1e-12));

    const std::vector<double> huge{1e300, -1e300};
    for (double v : softmax(huge)) REQUIRE(std::isfinite(v));

    REQUIRE_THROWS_AS(softmax(std::vector<double>{}), InvalidInputError);
    REQUIRE_THROWS_AS(softmax(std::vector<double>{std::nan("")}), InvalidInputError);
}

TEST_CASE("cross-entropy value and gradient", "[losses][gradcheck]") {
    // Frozen: uniform logits over two classes give loss ln 2 and gradient
    // (p - onehot) = (-0.5, 0.5).
    const std::vector<double> logits{0.0, 0.0};
    const auto ce = cross_entropy(logits, 0);
    REQUIRE(ce.value == Catch::Approx(std::log(2.0)).margin(1e-15));
    REQUIRE(ce.grad[0] == Catch::Approx(-0.5).margin(1e-15));
    REQUIRE(ce.grad[1] == Catch::Approx(0.5).margin(1e-15));

    REQUIRE_THROWS_AS(cross_entropy(logits, 2), InvalidInputError);

    Rng rng(20260812);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> z(4);
        for (auto& v : z) v = rng.normal(0.0, 2.0);
        const std::size_t label = rng.below(4);
        const auto analytic = cross_entropy(z, label);
        for (std::size_t i = 0; i < z.size(); ++i) {
            const auto numeric = central_difference(
                [&] { return cross_entropy(z, label).value; }, z[i]);
            require_close_grad(analytic.grad[i], numeric);
        }
    }
}

TEST_CASE("KL divergence value and gradient in the second argument", "[losses][gradcheck]") {
    const std::vector<double> z{0.3, -0.7, 1.1};
    const auto self = kl_divergence(z, z);
    REQUIRE(self.value == Catch::Approx(0.0).margin(1e-12));
    for (double g : self.grad) REQUIRE(g == Catch::Approx(0.0).margin(1e-12));

    const std::vector<double> mismatch{0.0, 1.0};
    REQUIRE_THROWS_AS(kl_divergence(z, mismatch), InvalidInputError);

    Rng rng(20260813);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> p(3), q(3);
        for (auto& v : p) v = rng.normal();
        for (auto& v : q) v = rng.normal();
        const auto analytic = kl_divergence(p, q);
        REQUIRE(analytic.value >= 0.0);
        for (std::size_t i = 0; i < q.size(); ++i) {
            const auto numeric = central_difference(
                [&] { return kl_divergence(p, q).value; }, q[i]);
            require_close_grad(analytic.grad[i], numeric);
        }
    }
}

TEST_CASE("entropy value and gradient", "[losses][gradcheck]") {
    // Frozen: uniform posterior has entropy ln k and a vanishing gradient.
    const std::vector<double> uniform{0.5, 0.5, 0.5};
    const auto h = entropy_loss(uniform);
    REQUIRE(h.value == Catch::Approx(std::log(3.0)).margin(1e-12));
    for (double g : h.grad) REQUIRE(g == Catch::Approx(0.0).margin(1e-12));

    Rng rng(20260814);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> z(3);
        for (auto& v : z) v = rng.normal(0.0, 1.5);
        const auto analytic = entropy_loss(z);
        for (std::size_t i = 0; i < z.size(); ++i) {
            const auto numeric =
                central_difference([&] { return entropy_loss(z).value; }, z[i]);
            require_close_grad(analytic.grad[i], numeric);
        }
    }
}

TEST_CASE("gradient reversal flips and scales", "[losses]") {
    const std::vector<double> g{1.0, -2.0, 0.5};
    const auto r = gradient_reversal(g, 0.5);
    REQUIRE(r == std::vector<double>{-0.5, 1.0, -0.25});
    const auto z = gradient_reversal(g, 0.0);
    REQUIRE(z == std::vector<double>{-0.0, 0.0, -0.0});
}
