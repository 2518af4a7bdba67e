#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "dglab/errors.hpp"

namespace dglab {

// Probabilities are floored at this value inside logs so that losses stay
// finite even for extremely confident predictions.
inline constexpr double k_prob_floor = 1e-12;

// Numerically safe softmax (max-shifted).
inline std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw InvalidInputError("softmax: empty logits");
    double m = logits[0];
    for (double v : logits) {
        if (!std::isfinite(v)) throw InvalidInputError("softmax: non-finite logit");
        m = std::max(m, v);
    }
    std::vector<double> p(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        total += p[i];
    }
    for (auto& v : p) v /= total;
    return p;
}

// Guard used by training code: parameters that have blown up surface as a
// divergence error rather than an input-validation error. The epoch is
// stamped in by the training loop.
inline void require_finite_logits(std::span<const double> logits, const char* context) {
    for (double v : logits)
        if (!std::isfinite(v))
            throw TrainingDivergenceError(std::string(context) + ": non-finite logits", -1);
}

// A scalar loss together with its gradient w.r.t. the logits it was
// computed from.
struct LossGrad {
    double value = 0.0;
    std::vector<double> grad;
};

// Cross-entropy of softmax(logits) against a hard label.
// Gradient: softmax(logits) - onehot(label).
inline LossGrad cross_entropy(std::span<const double> logits, std::size_t label) {
    if (label >= logits.size())
        throw InvalidInputError("cross_entropy: label " + std::to_string(label) +
                                " out of range for " + std::to_string(logits.size()) +
                                " classes");
    LossGrad out;
    out.grad = softmax(logits);
    out.value = -std::log(std::max(out.grad[label], k_prob_floor));
    out.grad[label] -= 1.0;
    return out;
}

// KL(softmax(p_logits) || softmax(q_logits)), with the gradient taken
// w.r.t. q_logits: softmax(q) - softmax(p). Used to anchor an updated
// point's class posterior to the prediction at its starting point.
inline LossGrad kl_divergence(std::span<const double> p_logits,
                              std::span<const double> q_logits) {
    if (p_logits.size() != q_logits.size())
        throw InvalidInputError("kl_divergence: dimension mismatch");
    const auto p = softmax(p_logits);
    const auto q = softmax(q_logits);
    LossGrad out;
    out.grad.resize(q.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pi = std::max(p[i], k_prob_floor);
        const double qi = std::max(q[i], k_prob_floor);
        out.value += p[i] * (std::log(pi) - std::log(qi));
        out.grad[i] = q[i] - p[i];
    }
    return out;
}

// Shannon entropy of softmax(logits), in nats.
// Gradient: d/dz_j = -s_j * (log s_j + H).
inline LossGrad entropy_loss(std::span<const double> logits) {
    const auto s = softmax(logits);
    LossGrad out;
    out.grad.resize(s.size());
    for (double v : s) out.value -= v * std::log(std::max(v, k_prob_floor));
    for (std::size_t j = 0; j < s.size(); ++j)
        out.grad[j] = -s[j] * (std::log(std::max(s[j], k_prob_floor)) + out.value);
    return out;
}

// The reversal that turns the discriminator's descent direction into the
// extractor's ascent direction: identity on values, -lambda on gradients.
inline std::vector<double> gradient_reversal(std::span<const double> grad, double lambda) {
    std::vector<double> out(grad.size());
    for (std::size_t i = 0; i < grad.size(); ++i) out[i] = -lambda * grad[i];
    return out;
}

}  // namespace dglab
