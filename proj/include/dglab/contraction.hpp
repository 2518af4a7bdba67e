#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "dglab/errors.hpp"
#include "dglab/io.hpp"
#include "dglab/losses.hpp"
#include "dglab/nn.hpp"
#include "dglab/proxy_distance.hpp"
#include "dglab/rng.hpp"

namespace dglab {

// ============================================================================
// Step-to-step contraction of an alignment proxy loss. The extractor is
// trained to confuse a frozen domain discriminator; the loss below is the
// discriminator's balanced mean correct-domain probability, shifted so that
// chance level sits at zero and clamped to stay non-negative. A trace records
// the loss after each gradient step and the consecutive ratios; a step rate
// gamma contracts when those ratios stay below one away from the minimum.
// ============================================================================

struct ContractionProblem {
    std::vector<std::vector<double>> p_points;
    std::vector<std::vector<double>> q_points;
    DenseNetwork extractor;       // the trainable parameters
    DenseNetwork discriminator;   // frozen once built
};

struct ContractionTrace {
    std::vector<double> losses;  // length steps + 1, losses[0] before any step
    std::vector<double> ratios;  // losses[t+1] / losses[t]; NaN where losses[t] == 0
    double gamma = 0.0;
};

inline void to_json(nlohmann::json& j, const ContractionTrace& t) {
    j = nlohmann::json{{"gamma", t.gamma}, {"losses", t.losses}, {"ratios", t.ratios}};
}

// Balanced mean probability the frozen discriminator assigns to the correct
// domain, minus chance level, clamped at zero. When a tape is supplied it
// receives the gradient with respect to the extractor parameters; the clamp
// zeroes the gradient on the flat side.
inline double alignment_proxy_loss(const ContractionProblem& problem,
                                   GradientTape* tape = nullptr) {
    if (problem.p_points.empty() || problem.q_points.empty())
        throw InvalidInputError("alignment loss: both point sets must be nonempty");

    double mean_correct = 0.0;
    const auto accumulate_side = [&](const std::vector<std::vector<double>>& points,
                                     std::size_t domain) {
        const double weight = 0.5 / static_cast<double>(points.size());
        for (const auto& x : points) {
            ForwardCache ext_cache, disc_cache;
            const auto repr = forward(problem.extractor, x, &ext_cache);
            const auto logits = forward(problem.discriminator, repr, &disc_cache);
            require_finite_logits(logits, "alignment loss");
            const auto probs = softmax(logits);
            mean_correct += weight * probs[domain];
            if (tape != nullptr) {
                // d probs[domain] / d logits[j] = probs[domain] * (1[j == domain] - probs[j])
                std::vector<double> upstream(logits.size());
                for (std::size_t j = 0; j < logits.size(); ++j)
                    upstream[j] =
                        weight * probs[domain] * ((j == domain ? 1.0 : 0.0) - probs[j]);
                const auto repr_grad = backward(problem.discriminator, disc_cache, upstream);
                backward(problem.extractor, ext_cache, repr_grad, tape);
            }
        }
    };
    accumulate_side(problem.p_points, 0);
    accumulate_side(problem.q_points, 1);

    const double shifted = mean_correct - 0.5;
    if (shifted <= 0.0) {
        if (tape != nullptr) tape->scale(0.0);
        return 0.0;
    }
    return shifted;
}

// Runs `steps` gradient steps of size gamma on a copy of the extractor and
// records the loss sequence. gamma == 0 leaves the parameters untouched, so
// every ratio is exactly one.
inline ContractionTrace contraction_trace(ContractionProblem problem, double gamma, int steps) {
    if (!(gamma >= 0.0)) throw InvalidInputError("contraction trace: gamma must be >= 0");
    if (steps < 1) throw InvalidInputError("contraction trace: need at least one step");

    ContractionTrace trace;
    trace.gamma = gamma;
    trace.losses.reserve(static_cast<std::size_t>(steps) + 1);

    for (int step = 0; step <= steps; ++step) {
        GradientTape tape = GradientTape::zeros_like(problem.extractor);
        double loss = 0.0;
        try {
            loss = alignment_proxy_loss(problem, step < steps ? &tape : nullptr);
        } catch (const TrainingDivergenceError& e) {
            throw TrainingDivergenceError(e.what(), step);
        }
        trace.losses.push_back(loss);
        if (step < steps && gamma > 0.0) sgd_step(problem.extractor, tape, gamma, step);
    }

    trace.ratios.reserve(static_cast<std::size_t>(steps));
    for (int t = 0; t < steps; ++t) {
        const double prev = trace.losses[static_cast<std::size_t>(t)];
        const double next = trace.losses[static_cast<std::size_t>(t) + 1];
        trace.ratios.push_back(prev > 0.0 ? next / prev
                                          : std::numeric_limits<double>::quiet_NaN());
    }
    return trace;
}

// Fraction of the away-from-minimum steps whose ratio is below one. A step
// counts as away when its starting loss exceeds the trace minimum by more
// than `tol` and is positive; with no away steps the fraction is one.
inline double contraction_away_fraction(const ContractionTrace& trace, double tol = 1e-6) {
    const double floor = *std::min_element(trace.losses.begin(), trace.losses.end());
    std::size_t away = 0, contracted = 0;
    for (std::size_t t = 0; t < trace.ratios.size(); ++t) {
        if (trace.losses[t] - floor <= tol || !(trace.losses[t] > 0.0)) continue;
        ++away;
        if (trace.ratios[t] < 1.0) ++contracted;
    }
    if (away == 0) return 1.0;
    return static_cast<double>(contracted) / static_cast<double>(away);
}

struct GammaSearchResult {
    double gamma = 0.0;
    ContractionTrace trace;
    double away_fraction = 0.0;
    bool accepted = false;
};

// Halving search for a step rate whose trace contracts on at least
// accept_fraction of the away steps. Falls back to the best rate seen.
inline GammaSearchResult find_contraction_gamma(const ContractionProblem& problem, int steps,
                                                double start = 1.0, int max_halvings = 40,
                                                double accept_fraction = 0.99) {
    if (!(start > 0.0)) throw InvalidInputError("gamma search: start must be > 0");
    if (max_halvings < 1) throw InvalidInputError("gamma search: need at least one candidate");

    GammaSearchResult best;
    best.away_fraction = -1.0;
    double gamma = start;
    for (int i = 0; i < max_halvings; ++i, gamma *= 0.5) {
        ContractionTrace trace;
        try {
            trace = contraction_trace(problem, gamma, steps);
        } catch (const TrainingDivergenceError&) {
            continue;  // rate blew the parameters up, halve and retry
        }
        const double fraction = contraction_away_fraction(trace);
        if (fraction > best.away_fraction) {
            best.gamma = gamma;
            best.trace = trace;
            best.away_fraction = fraction;
        }
        if (fraction >= accept_fraction) {
            best.accepted = true;
            return best;
        }
    }
    return best;
}

// Two offset Gaussian clouds, a small extractor, and a discriminator trained
// on the initial representations and then frozen. The tanh layer keeps the
// representations bounded, so even wild step rates cannot blow the loss up.
inline ContractionProblem make_contraction_problem(std::uint64_t seed,
                                                   std::size_t points_per_side = 40) {
    if (points_per_side == 0)
        throw InvalidInputError("contraction problem: need at least one point per side");
    Rng rng(seed);

    ContractionProblem problem;
    for (std::size_t i = 0; i < points_per_side; ++i)
        problem.p_points.push_back({-1.2 + 0.5 * rng.normal(), 0.5 * rng.normal()});
    for (std::size_t i = 0; i < points_per_side; ++i)
        problem.q_points.push_back({1.2 + 0.5 * rng.normal(), 0.5 * rng.normal()});

    const std::vector<std::size_t> ext_dims{2, 8, 2};
    const std::vector<Activation> ext_acts{Activation::tanh_act, Activation::identity};
    problem.extractor = make_mlp(ext_dims, ext_acts, rng);

    std::vector<std::vector<double>> reprs;
    std::vector<int> domains;
    for (const auto& x : problem.p_points) {
        reprs.push_back(forward(problem.extractor, x));
        domains.push_back(0);
    }
    for (const auto& x : problem.q_points) {
        reprs.push_back(forward(problem.extractor, x));
        domains.push_back(1);
    }

    const std::vector<std::size_t> disc_dims{2, 16, 2};
    const std::vector<Activation> disc_acts{Activation::relu, Activation::identity};
    problem.discriminator = make_mlp(disc_dims, disc_acts, rng);
    ClassifierTrainingConfig disc_config;
    disc_config.epochs = 60;
    disc_config.batch_size = 16;
    disc_config.learning_rate = 0.1;
    train_classifier(reprs, domains, problem.discriminator, disc_config, rng);
    return problem;
}

inline std::string contraction_trace_csv(const ContractionTrace& trace) {
    std::ostringstream out;
    out << "step,loss,ratio\n";
    for (std::size_t t = 0; t < trace.losses.size(); ++t) {
        out << t << ',' << format_double(trace.losses[t]) << ',';
        if (t > 0) out << format_double(trace.ratios[t - 1]);
        out << '\n';
    }
    return out.str();
}

}  // namespace dglab
