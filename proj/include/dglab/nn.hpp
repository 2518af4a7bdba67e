#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dglab/errors.hpp"
#include "dglab/rng.hpp"

namespace dglab {

// ============================================================================
// Plain dense networks with hand-written backpropagation. No autodiff, no
// BLAS: at desk scale the explicit loops are fast enough, and every gradient
// is checked against finite differences by the verification suites.
// ============================================================================

struct Matrix {
    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::size_t rows = 0, cols = 0;
    std::vector<double> data;  // row-major
};

enum class Activation { identity, relu, tanh_act };

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::tanh_act: return "tanh";
    }
    throw InvalidInputError("unknown activation");
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "identity") return Activation::identity;
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh_act;
    throw ParseError("unknown activation: " + s);
}

// One affine map plus an elementwise activation.
struct Layer {
    Matrix weight;             // out x in
    std::vector<double> bias;  // out
    Activation activation = Activation::identity;
};

struct DenseNetwork {
    std::vector<Layer> layers;

    std::size_t input_dim() const { return layers.front().weight.cols; }
    std::size_t output_dim() const { return layers.back().weight.rows; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weight.data.size() + l.bias.size();
        return n;
    }
};

// Fresh network with the given layer widths. Weights are drawn uniformly
// from +-sqrt(6 / (fan_in + fan_out)), biases start at zero.
inline DenseNetwork make_mlp(std::span<const std::size_t> dims,
                             std::span<const Activation> activations, Rng& rng) {
    if (dims.size() < 2) throw InvalidInputError("make_mlp: need at least one layer");
    if (activations.size() + 1 != dims.size())
        throw InvalidInputError("make_mlp: need one activation per layer");
    DenseNetwork net;
    net.layers.resize(dims.size() - 1);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const std::size_t fan_in = dims[l], fan_out = dims[l + 1];
        if (fan_in == 0 || fan_out == 0) throw InvalidInputError("make_mlp: zero-width layer");
        Layer& layer = net.layers[l];
        layer.weight = Matrix(fan_out, fan_in);
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (auto& w : layer.weight.data) w = rng.uniform(-limit, limit);
        layer.bias.assign(fan_out, 0.0);
        layer.activation = activations[l];
    }
    return net;
}

// Activations recorded during a forward pass, consumed by backward().
struct ForwardCache {
    std::vector<double> input;
    std::vector<std::vector<double>> pre;   // per layer, before activation
    std::vector<std::vector<double>> post;  // per layer, after activation
};

inline double apply_activation(Activation a, double x) {
    switch (a) {
        case Activation::identity: return x;
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::tanh_act: return std::tanh(x);
    }
    throw InvalidInputError("unknown activation");
}

inline double activation_slope(Activation a, double pre, double post) {
    switch (a) {
        case Activation::identity: return 1.0;
        case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::tanh_act: return 1.0 - post * post;
    }
    throw InvalidInputError("unknown activation");
}

inline std::vector<double> forward(const DenseNetwork& net, std::span<const double> x,
                                   ForwardCache* cache = nullptr) {
    if (net.layers.empty()) throw InvalidInputError("forward: empty network");
    if (x.size() != net.input_dim())
        throw InvalidInputError("forward: input has dimension " + std::to_string(x.size()) +
                                ", network expects " + std::to_string(net.input_dim()));
    if (cache) {
        cache->input.assign(x.begin(), x.end());
        cache->pre.clear();
        cache->post.clear();
    }
    std::vector<double> current(x.begin(), x.end());
    for (const auto& layer : net.layers) {
        std::vector<double> pre(layer.weight.rows);
        for (std::size_t r = 0; r < layer.weight.rows; ++r) {
            double acc = layer.bias[r];
            for (std::size_t c = 0; c < layer.weight.cols; ++c)
                acc += layer.weight.at(r, c) * current[c];
            pre[r] = acc;
        }
        std::vector<double> post(pre.size());
        for (std::size_t r = 0; r < pre.size(); ++r)
            post[r] = apply_activation(layer.activation, pre[r]);
        if (cache) {
            cache->pre.push_back(pre);
            cache->post.push_back(post);
        }
        current = std::move(post);
    }
    return current;
}

// Parameter gradients, shaped like the network they were taken from.
// Accumulation is additive so one tape can absorb a whole batch.
struct GradientTape {
    std::vector<Matrix> weight;
    std::vector<std::vector<double>> bias;

    static GradientTape zeros_like(const DenseNetwork& net) {
        GradientTape t;
        t.weight.reserve(net.layers.size());
        t.bias.reserve(net.layers.size());
        for (const auto& l : net.layers) {
            t.weight.emplace_back(l.weight.rows, l.weight.cols);
            t.bias.emplace_back(l.bias.size(), 0.0);
        }
        return t;
    }

    bool empty() const { return weight.empty(); }

    void add_scaled(const GradientTape& other, double scale) {
        if (other.weight.size() != weight.size())
            throw ContractViolation("gradient tape shape mismatch");
        for (std::size_t l = 0; l < weight.size(); ++l) {
            for (std::size_t i = 0; i < weight[l].data.size(); ++i)
                weight[l].data[i] += scale * other.weight[l].data[i];
            for (std::size_t i = 0; i < bias[l].size(); ++i)
                bias[l][i] += scale * other.bias[l][i];
        }
    }

    void scale(double s) {
        for (auto& m : weight)
            for (auto& v : m.data) v *= s;
        for (auto& b : bias)
            for (auto& v : b) v *= s;
    }

    bool all_finite() const {
        for (const auto& m : weight)
            for (double v : m.data)
                if (!std::isfinite(v)) return false;
        for (const auto& b : bias)
            for (double v : b)
                if (!std::isfinite(v)) return false;
        return true;
    }
};

// Backpropagates `upstream` (dLoss/dOutput) through the network, adding
// parameter gradients into `tape` (if given) and returning dLoss/dInput.
// The cache must come from a forward pass over a network with these exact
// shapes; replaying a stale cache is a contract violation.
inline std::vector<double> backward(const DenseNetwork& net, const ForwardCache& cache,
                                    std::span<const double> upstream,
                                    GradientTape* tape = nullptr) {
    if (cache.pre.size() != net.layers.size() || cache.post.size() != net.layers.size())
        throw ContractViolation("backward: cache does not match network depth");
    if (cache.input.size() != net.input_dim())
        throw ContractViolation("backward: cache input dimension mismatch");
    if (upstream.size() != net.output_dim())
        throw InvalidInputError("backward: upstream has wrong dimension");
    if (tape && tape->weight.size() != net.layers.size())
        throw ContractViolation("backward: tape does not match network depth");

    std::vector<double> grad(upstream.begin(), upstream.end());
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const Layer& layer = net.layers[li];
        if (cache.pre[li].size() != layer.weight.rows)
            throw ContractViolation("backward: cache layer width mismatch");
        const auto& below = li == 0 ? cache.input : cache.post[li - 1];
        if (below.size() != layer.weight.cols)
            throw ContractViolation("backward: cache layer width mismatch");

        // Through the activation.
        std::vector<double> dpre(grad.size());
        for (std::size_t r = 0; r < grad.size(); ++r)
            dpre[r] =
                grad[r] * activation_slope(layer.activation, cache.pre[li][r], cache.post[li][r]);

        if (tape) {
            Matrix& dw = tape->weight[li];
            for (std::size_t r = 0; r < layer.weight.rows; ++r)
                for (std::size_t c = 0; c < layer.weight.cols; ++c)
                    dw.at(r, c) += dpre[r] * below[c];
            for (std::size_t r = 0; r < layer.bias.size(); ++r) tape->bias[li][r] += dpre[r];
        }

        std::vector<double> dinput(layer.weight.cols, 0.0);
        for (std::size_t r = 0; r < layer.weight.rows; ++r)
            for (std::size_t c = 0; c < layer.weight.cols; ++c)
                dinput[c] += layer.weight.at(r, c) * dpre[r];
        grad = std::move(dinput);
    }
    return grad;
}

// One plain gradient-descent step. Refuses to poison the parameters with a
// non-finite update.
inline void sgd_step(DenseNetwork& net, const GradientTape& tape, double learning_rate,
                     int epoch_for_error = -1) {
    if (!(learning_rate > 0.0)) throw InvalidInputError("sgd_step: learning rate must be > 0");
    if (tape.weight.size() != net.layers.size())
        throw ContractViolation("sgd_step: tape does not match network");
    if (!tape.all_finite())
        throw TrainingDivergenceError("sgd_step: non-finite gradient", epoch_for_error);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& layer = net.layers[l];
        for (std::size_t i = 0; i < layer.weight.data.size(); ++i)
            layer.weight.data[i] -= learning_rate * tape.weight[l].data[i];
        for (std::size_t i = 0; i < layer.bias.size(); ++i)
            layer.bias[i] -= learning_rate * tape.bias[l][i];
    }
}

// ============================================================================
// The three-network bundle used by the adversarial trainers: a shared
// feature extractor, a task classifier on top of it, and a domain
// discriminator on top of it.
// ============================================================================

struct NetworkTriple {
    NetworkTriple(DenseNetwork extractor_net, DenseNetwork task_net, DenseNetwork domain_net)
        : extractor(std::move(extractor_net)),
          task_head(std::move(task_net)),
          domain_head(std::move(domain_net)) {
        if (task_head.input_dim() != extractor.output_dim() ||
            domain_head.input_dim() != extractor.output_dim())
            throw InvalidInputError("network triple: heads must accept the extractor output");
    }

    std::size_t representation_dim() const { return extractor.output_dim(); }
    std::size_t class_count() const { return task_head.output_dim(); }
    std::size_t domain_count() const { return domain_head.output_dim(); }

    DenseNetwork extractor;
    DenseNetwork task_head;
    DenseNetwork domain_head;
};

struct TripleArchitecture {
    std::size_t input_dim = 2;
    std::size_t hidden_width = 16;
    std::size_t representation_dim = 8;
    std::size_t head_hidden_width = 16;
    std::size_t class_count = 2;
    std::size_t domain_count = 2;
};

inline NetworkTriple make_triple(const TripleArchitecture& arch, Rng& rng) {
    const std::vector<std::size_t> ext_dims{arch.input_dim, arch.hidden_width,
                                            arch.representation_dim};
    const std::vector<Activation> ext_acts{Activation::relu, Activation::identity};
    const std::vector<std::size_t> task_dims{arch.representation_dim, arch.class_count};
    const std::vector<Activation> task_acts{Activation::identity};
    const std::vector<std::size_t> dom_dims{arch.representation_dim, arch.head_hidden_width,
                                            arch.domain_count};
    const std::vector<Activation> dom_acts{Activation::relu, Activation::identity};
    return NetworkTriple(make_mlp(ext_dims, ext_acts, rng), make_mlp(task_dims, task_acts, rng),
                         make_mlp(dom_dims, dom_acts, rng));
}

// --- serialization: architecture descriptor plus flat parameter arrays -----

inline void to_json(nlohmann::json& j, const DenseNetwork& net) {
    nlohmann::json arch = nlohmann::json::array();
    std::vector<double> params;
    params.reserve(net.parameter_count());
    for (const auto& l : net.layers) {
        arch.push_back({{"in", l.weight.cols},
                        {"out", l.weight.rows},
                        {"activation", to_string(l.activation)}});
        params.insert(params.end(), l.weight.data.begin(), l.weight.data.end());
        params.insert(params.end(), l.bias.begin(), l.bias.end());
    }
    j = nlohmann::json{{"architecture", std::move(arch)}, {"parameters", std::move(params)}};
}

inline void from_json(const nlohmann::json& j, DenseNetwork& net) {
    net.layers.clear();
    const auto& arch = j.at("architecture");
    const auto params = j.at("parameters").get<std::vector<double>>();
    std::size_t cursor = 0;
    for (const auto& spec : arch) {
        Layer layer;
        const auto in = spec.at("in").get<std::size_t>();
        const auto out = spec.at("out").get<std::size_t>();
        layer.weight = Matrix(out, in);
        layer.bias.assign(out, 0.0);
        layer.activation = activation_from_string(spec.at("activation").get<std::string>());
        if (cursor + out * in + out > params.size())
            throw ParseError("network checkpoint: parameter array too short");
        for (auto& w : layer.weight.data) w = params[cursor++];
        for (auto& b : layer.bias) b = params[cursor++];
        net.layers.push_back(std::move(layer));
    }
    if (net.layers.empty()) throw ParseError("network checkpoint: no layers");
    if (cursor != params.size())
        throw ParseError("network checkpoint: parameter array has trailing values");
}

}  // namespace dglab

namespace nlohmann {
template <>
struct adl_serializer<dglab::NetworkTriple> {
    static dglab::NetworkTriple from_json(const json& j) {
        return {j.at("extractor").get<dglab::DenseNetwork>(),
                j.at("task_head").get<dglab::DenseNetwork>(),
                j.at("domain_head").get<dglab::DenseNetwork>()};
    }
    static void to_json(json& j, const dglab::NetworkTriple& t) {
        j = json{{"extractor", t.extractor},
                 {"task_head", t.task_head},
                 {"domain_head", t.domain_head}};
    }
};
}  // namespace nlohmann
