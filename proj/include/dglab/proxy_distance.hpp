#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dglab/batch.hpp"
#include "dglab/errors.hpp"
#include "dglab/losses.hpp"
#include "dglab/nn.hpp"
#include "dglab/rng.hpp"

namespace dglab {

// An unlabeled point cloud from one domain.
struct DomainSample {
    std::vector<std::vector<double>> points;
    int domain_id = 0;
};

struct ClassifierTrainingConfig {
    int epochs = 100;
    int batch_size = 32;
    double learning_rate = 0.05;
};

// Minibatch cross-entropy SGD on a fixed point set. Shared by the proxy
// distance, the discriminator curve, and the joint-error estimator.
inline void train_classifier(const std::vector<std::vector<double>>& points,
                             const std::vector<int>& labels, DenseNetwork& net,
                             const ClassifierTrainingConfig& cfg, Rng& rng) {
    if (points.empty() || points.size() != labels.size())
        throw InvalidInputError("train_classifier: need one label per point");
    if (cfg.epochs <= 0 || cfg.batch_size <= 0 || !(cfg.learning_rate > 0.0))
        throw InvalidInputError("train_classifier: bad config");

    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    ForwardCache cache;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            auto tape = GradientTape::zeros_like(net);
            for (std::size_t i = start; i < stop; ++i) {
                const std::size_t row = order[i];
                const auto logits = forward(net, points[row], &cache);
                const auto ce = cross_entropy(logits, static_cast<std::size_t>(labels[row]));
                backward(net, cache, ce.grad, &tape);
            }
            tape.scale(1.0 / static_cast<double>(stop - start));
            sgd_step(net, tape, cfg.learning_rate, epoch);
        }
    }
}

inline double classification_error(const std::vector<std::vector<double>>& points,
                                   const std::vector<int>& labels, const DenseNetwork& net) {
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto logits = forward(net, points[i]);
        const auto arg =
            std::distance(logits.begin(), std::max_element(logits.begin(), logits.end()));
        if (arg != labels[i]) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(points.size());
}

struct ProxyADistanceConfig {
    std::size_t hidden_width = 32;
    ClassifierTrainingConfig training;
};

// Estimates how separable two samples are, on the scale of the exact
// divergence: a fresh binary discriminator is trained on half of each
// sample, its held-out error eps is measured on the other half (balanced by
// construction), and the statistic 2 * (1 - 2 * eps) is clamped into [0, 2].
// Indistinguishable samples score near 0, perfectly separable ones near 2.
inline double proxy_a_distance(const DomainSample& a, const DomainSample& b,
                               std::uint64_t seed, const ProxyADistanceConfig& cfg = {}) {
    if (a.points.empty() || b.points.empty())
        throw InvalidInputError("proxy_a_distance: empty sample");
    const std::size_t dim = a.points.front().size();
    for (const auto& p : a.points)
        if (p.size() != dim) throw InvalidInputError("proxy_a_distance: ragged sample");
    for (const auto& p : b.points)
        if (p.size() != dim) throw InvalidInputError("proxy_a_distance: dimension mismatch");

    const std::size_t n = std::min(a.points.size(), b.points.size());
    if (n < 2)
        throw InvalidInputError("proxy_a_distance: need at least 2 points per domain "
                                "to keep a held-out test point");

    Rng rng(derive_seed(seed, 0x9d07));

    // Balanced split: n points per domain, half train / half test each.
    std::vector<std::size_t> ia(a.points.size()), ib(b.points.size());
    std::iota(ia.begin(), ia.end(), std::size_t{0});
    std::iota(ib.begin(), ib.end(), std::size_t{0});
    rng.shuffle(ia);
    rng.shuffle(ib);
    const std::size_t n_train = n / 2;

    std::vector<std::vector<double>> train_points, test_points;
    std::vector<int> train_labels, test_labels;
    for (std::size_t i = 0; i < n; ++i) {
        auto& points = i < n_train ? train_points : test_points;
        auto& labels = i < n_train ? train_labels : test_labels;
        points.push_back(a.points[ia[i]]);
        labels.push_back(0);
        points.push_back(b.points[ib[i]]);
        labels.push_back(1);
    }

    const std::vector<std::size_t> dims{dim, cfg.hidden_width, 2};
    const std::vector<Activation> acts{Activation::relu, Activation::identity};
    auto net = make_mlp(dims, acts, rng);
    train_classifier(train_points, train_labels, net, cfg.training, rng);

    const double eps = classification_error(test_points, test_labels, net);
    return std::clamp(2.0 * (1.0 - 2.0 * eps), 0.0, 2.0);
}

// Trains a copy of the triple's domain discriminator on the frozen
// representations of the given sources and reports the per-epoch mean
// multi-class loss. This is the curve adversarial alignment is judged by:
// if the representations carry no domain information the curve plateaus at
// log(#domains), the loss of always answering with the base rates.
inline std::vector<double> discriminator_loss_curve(const NetworkTriple& triple,
                                                    std::span<const LabeledBatch> sources,
                                                    int epochs, double learning_rate,
                                                    std::uint64_t seed, int batch_size = 16) {
    if (sources.size() < 2)
        throw InvalidInputError("discriminator_loss_curve: need >= 2 sources");
    if (epochs <= 0 || batch_size <= 0 || !(learning_rate > 0.0))
        throw InvalidInputError("discriminator_loss_curve: bad config");

    // Representations once; the extractor stays frozen throughout.
    std::vector<std::vector<std::vector<double>>> reps(sources.size());
    for (std::size_t d = 0; d < sources.size(); ++d) {
        reps[d].reserve(sources[d].size());
        for (const auto& x : sources[d].points()) reps[d].push_back(forward(triple.extractor, x));
    }

    DenseNetwork discriminator = triple.domain_head;
    Rng rng(derive_seed(seed, 0xd15c));

    std::size_t min_size = reps[0].size();
    for (const auto& r : reps) min_size = std::min(min_size, r.size());
    const std::size_t steps = std::max<std::size_t>(1, min_size / static_cast<std::size_t>(batch_size));

    std::vector<double> curve;
    curve.reserve(static_cast<std::size_t>(epochs));
    ForwardCache cache;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::vector<std::vector<std::size_t>> order(sources.size());
        for (std::size_t d = 0; d < sources.size(); ++d) {
            order[d].resize(reps[d].size());
            std::iota(order[d].begin(), order[d].end(), std::size_t{0});
            rng.shuffle(order[d]);
        }

        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        for (std::size_t step = 0; step < steps; ++step) {
            auto tape = GradientTape::zeros_like(discriminator);
            std::size_t in_batch = 0;
            for (std::size_t d = 0; d < sources.size(); ++d) {
                for (int i = 0; i < batch_size; ++i) {
                    const std::size_t at = step * static_cast<std::size_t>(batch_size) +
                                           static_cast<std::size_t>(i);
                    if (at >= order[d].size()) break;
                    const std::size_t row = order[d][at];
                    const auto logits = forward(discriminator, reps[d][row], &cache);
                    const auto ce = cross_entropy(
                        logits, static_cast<std::size_t>(sources[d].domain_label(row)));
                    backward(discriminator, cache, ce.grad, &tape);
                    loss_sum += ce.value;
                    ++loss_count;
                    ++in_batch;
                }
            }
            tape.scale(1.0 / static_cast<double>(in_batch));
            sgd_step(discriminator, tape, learning_rate, epoch);
        }
        curve.push_back(loss_sum / static_cast<double>(loss_count));
    }
    return curve;
}

}  // namespace dglab
