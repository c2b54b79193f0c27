// core.hpp
//
// Shared math for exponential-weights selective sampling: learning rate,
// hypothetical losses, class masses, the maximum-variance query probability,
// max-shifted exponential weights and the importance-weighted accumulator.
// Everything here is a pure function of its arguments.
#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace streampicker {

using Label = std::uint32_t;
using PredictionView = std::span<const Label>;
using LossVector = std::vector<std::uint8_t>;

// Thrown when internal numeric state is unusable (e.g. a NaN accumulator).
class InvalidState : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Thrown for inconsistent configuration (missing hints, bad bounds).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// eta_t = sqrt(ln k / (2t)).
inline double learning_rate(std::uint64_t t, std::size_t k) {
    if (t < 1) throw std::invalid_argument("learning_rate: round index must be >= 1");
    if (k < 2) throw std::invalid_argument("learning_rate: need at least two models (ln k <= 0)");
    return std::sqrt(std::log(static_cast<double>(k)) / (2.0 * static_cast<double>(t)));
}

inline LossVector hypothetical_loss(PredictionView p, Label c) {
    LossVector loss(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) loss[i] = p[i] != c ? 1 : 0;
    return loss;
}

inline bool all_agree(PredictionView p) noexcept {
    return std::adjacent_find(p.begin(), p.end(), std::not_equal_to<>{}) == p.end();
}

namespace detail {

inline void check_dims(PredictionView p, std::span<const double> w, const char* who) {
    if (p.size() != w.size())
        throw std::invalid_argument(std::string(who) + ": prediction/weight length mismatch");
}

// Distinct predicted classes with their total weight, in first-seen order.
inline std::vector<std::pair<Label, double>> masses(PredictionView p, std::span<const double> w) {
    std::vector<std::pair<Label, double>> out;
    out.reserve(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        auto it = std::find_if(out.begin(), out.end(), [&](const auto& e) { return e.first == p[i]; });
        if (it == out.end())
            out.emplace_back(p[i], w[i]);
        else
            it->second += w[i];
    }
    return out;
}

}  // namespace detail

// Total weight of the models voting for each predicted class.
inline std::map<Label, double> class_mass(PredictionView p, std::span<const double> w) {
    detail::check_dims(p, w, "class_mass");
    std::map<Label, double> out;
    for (const auto& [c, m] : detail::masses(p, w)) out[c] = m;
    return out;
}

// max_c w_c (1 - w_c), the largest Bernoulli variance of the learner's loss
// over all hypothetical true labels. Classes nobody predicts contribute 0.
//
// (1 - w_c) is taken as the mass of the other classes; the result is exactly
// 0 whenever every weighted model agrees.
inline double max_variance(PredictionView p, std::span<const double> w) {
    detail::check_dims(p, w, "max_variance");
    const auto m = detail::masses(p, w);
    if (m.size() < 2) return 0.0;
    double total = 0.0;
    for (const auto& e : m) total += e.second;
    double best = 0.0;
    for (const auto& [c, mass] : m) {
        double others = 0.0;
        for (const auto& [c2, mass2] : m)
            if (c2 != c) others += mass2;
        best = std::max(best, mass * others / (total * total));
    }
    return std::min(best, 0.25);
}

// q = 0 when v = 0, otherwise min(1, beta * max(v, eta)).
inline double query_probability(double v, double eta, double beta) {
    if (!(v >= 0.0) || v > 0.25 + 1e-12)
        throw std::invalid_argument("query_probability: variance outside [0, 1/4]");
    if (!(eta > 0.0)) throw std::invalid_argument("query_probability: eta must be positive");
    if (!(beta >= 0.0)) throw std::invalid_argument("query_probability: beta must be non-negative");
    if (v == 0.0) return 0.0;
    return std::min(1.0, beta * std::max(v, eta));
}

// w_i proportional to exp(-eta * L_i), computed after shifting by min_j L_j.
inline std::vector<double> exp_weights(std::span<const double> estimated_losses, double eta) {
    if (estimated_losses.empty()) throw std::invalid_argument("exp_weights: empty accumulator");
    if (!(eta >= 0.0) || !std::isfinite(eta))
        throw std::invalid_argument("exp_weights: eta must be finite and non-negative");
    for (double l : estimated_losses)
        if (!std::isfinite(l)) throw InvalidState("exp_weights: non-finite accumulator entry");
    const double lo = *std::min_element(estimated_losses.begin(), estimated_losses.end());
    std::vector<double> w(estimated_losses.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = std::exp(-eta * (estimated_losses[i] - lo));
        sum += w[i];
    }
    for (double& x : w) x /= sum;
    return w;
}

// L_i += loss_i / q. Only valid on queried rounds.
inline void importance_update(std::span<double> estimated_losses, std::span<const std::uint8_t> loss,
                              double q) {
    if (!(q > 0.0)) throw std::invalid_argument("importance_update: query probability must be > 0");
    if (estimated_losses.size() != loss.size())
        throw std::invalid_argument("importance_update: length mismatch");
    const double scale = 1.0 / q;
    for (std::size_t i = 0; i < loss.size(); ++i)
        if (loss[i]) estimated_losses[i] += scale;
}

// Lowest index attaining the maximum.
inline std::size_t argmax_index(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("argmax_index: empty sequence");
    std::size_t best = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) throw std::invalid_argument("argmax_index: non-finite value");
        if (values[i] > values[best]) best = i;
    }
    return best;
}

// Lowest index attaining the minimum.
template <typename T>
std::size_t argmin_index(std::span<const T> values) {
    if (values.empty()) throw std::invalid_argument("argmin_index: empty sequence");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] < values[best]) best = i;
    return best;
}

}  // namespace streampicker
