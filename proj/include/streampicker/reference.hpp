// reference.hpp
//
// Independent checks for the Model Picker implementation:
//  - a naive re-implementation in long double that rebuilds the cumulative
//    loss estimate from the full history every round and never shifts the
//    exponent,
//  - numeric sweeps of the two scalar inequalities behind the regret bound,
//  - the mix-loss bound along a trace,
//  - Monte-Carlo bias of the importance-weighted loss estimate,
//  - a KL-vs-variance spot check.
#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "harness.hpp"
#include "rng.hpp"
#include "strategies.hpp"
#include "streams.hpp"

namespace streampicker::reference {

using real = long double;

struct NaiveRound {
    double eta = 0.0;
    std::vector<double> weights;      // w_t
    std::vector<double> increment;    // importance-weighted loss estimate for this round
    double query_probability = 0.0;
    bool queried = false;
    std::size_t chosen_model = 0;
    std::size_t recommendation = 0;
};

struct NaiveTrace {
    std::vector<NaiveRound> rounds;
    std::vector<double> final_estimated_losses;
    std::size_t final_recommendation = 0;
};

namespace detail {

inline real naive_eta(std::uint64_t t, std::size_t k) {
    return std::sqrt(std::log(static_cast<real>(k)) / (2.0L * static_cast<real>(t)));
}

// max over every class c of <w, l^(c)> (1 - <w, l^(c)>), written with
// <w, 1 - l^(c)> for the second factor.
inline real naive_variance(PredictionView p, const std::vector<real>& w, std::uint32_t num_classes) {
    real best = 0.0L;
    for (Label c = 0; c < num_classes; ++c) {
        real wrong = 0.0L, right = 0.0L;
        for (std::size_t i = 0; i < p.size(); ++i) (p[i] == c ? right : wrong) += w[i];
        best = std::max(best, wrong * right);
    }
    return best;
}

}  // namespace detail

// Recomputes every round from scratch. With `forced`, the query outcomes are
// taken from it instead of the RNG (which still advances identically).
inline NaiveTrace naive_model_picker(const Stream& stream, double beta, std::uint64_t seed,
                                     std::optional<std::span<const bool>> forced = std::nullopt,
                                     bool follow_leader = false) {
    const std::size_t k = stream.k();
    if (k < 2) throw std::invalid_argument("naive_model_picker: need k >= 2");
    if (forced && forced->size() != stream.length())
        throw std::invalid_argument("naive_model_picker: forced outcomes must cover the stream");

    Rng rng(seed);
    std::vector<std::vector<real>> history;  // per-round increments
    NaiveTrace trace;
    trace.rounds.reserve(stream.length());

    auto cumulative = [&] {
        std::vector<real> sum(k, 0.0L);
        for (const auto& inc : history)
            for (std::size_t i = 0; i < k; ++i) sum[i] += inc[i];
        return sum;
    };
    auto weights_for = [&](const std::vector<real>& losses, real eta) {
        std::vector<real> w(k);
        real z = 0.0L;
        for (std::size_t i = 0; i < k; ++i) z += (w[i] = std::exp(-eta * losses[i]));
        for (auto& x : w) x /= z;
        return w;
    };
    auto first_max = [](const std::vector<real>& w) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < w.size(); ++i)
            if (w[i] > w[best]) best = i;
        return best;
    };

    for (std::size_t idx = 0; idx < stream.length(); ++idx) {
        const std::uint64_t t = idx + 1;
        const auto p = stream.predictions(idx);
        const real eta = detail::naive_eta(t, k);
        const auto w = weights_for(cumulative(), eta);

        NaiveRound r;
        r.eta = static_cast<double>(eta);
        r.weights.assign(w.begin(), w.end());
        r.recommendation = first_max(w);

        const double u_model = rng.uniform();
        const double u_query = rng.uniform();
        if (follow_leader) {
            r.chosen_model = r.recommendation;
        } else {
            real acc = 0.0L;
            r.chosen_model = k - 1;
            for (std::size_t i = 0; i < k; ++i) {
                acc += w[i];
                if (static_cast<real>(u_model) < acc) {
                    r.chosen_model = i;
                    break;
                }
            }
        }

        const real v = detail::naive_variance(p, w, stream.num_classes());
        real q = 0.0L;
        if (v > 0.0L) q = std::min<real>(1.0L, static_cast<real>(beta) * std::max(v, eta));
        r.query_probability = static_cast<double>(q);
        r.queried = forced ? (*forced)[idx] : static_cast<real>(u_query) < q;
        if (r.queried && q == 0.0L) throw std::invalid_argument("naive_model_picker: forced query with q = 0");

        std::vector<real> inc(k, 0.0L);
        if (r.queried) {
            const Label c = stream.label(idx);
            for (std::size_t i = 0; i < k; ++i)
                if (p[i] != c) inc[i] = 1.0L / q;
        }
        r.increment.assign(inc.begin(), inc.end());
        history.push_back(std::move(inc));
        trace.rounds.push_back(std::move(r));
    }
    const auto final_losses = cumulative();
    trace.final_estimated_losses.assign(final_losses.begin(), final_losses.end());
    trace.final_recommendation =
        first_max(weights_for(final_losses, detail::naive_eta(stream.length() + 1, k)));
    return trace;
}

struct EquivalenceReport {
    bool decisions_match = true;
    double max_relative_weight_error = 0.0;
    std::optional<std::size_t> first_mismatch_round;  // 1-based

    nlohmann::json to_json() const {
        nlohmann::json j{{"decisions_match", decisions_match}, {"max_relative_weight_error", max_relative_weight_error}};
        j["first_mismatch_round"] = first_mismatch_round ? nlohmann::json(*first_mismatch_round) : nlohmann::json();
        return j;
    }
};

// Runs the production ModelPicker and the naive oracle side by side.
inline EquivalenceReport compare_with_fast_path(const Stream& stream, SamplerConfig config) {
    config.k = stream.k();
    config.num_classes = stream.num_classes();
    ModelPicker fast(config);
    const auto naive = naive_model_picker(stream, config.beta, config.seed, std::nullopt, config.follow_leader);

    EquivalenceReport rep;
    for (std::size_t idx = 0; idx < stream.length(); ++idx) {
        const auto out = fast.step(stream.predictions(idx), [&] { return stream.label(idx); });
        const auto& ref = naive.rounds[idx];
        const bool same = out.chosen_model == ref.chosen_model && out.recommendation == ref.recommendation &&
                          out.decision.queried == ref.queried;
        if (!same && rep.decisions_match) {
            rep.decisions_match = false;
            rep.first_mismatch_round = idx + 1;
        }
        const auto w = fast.weights();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double denom = std::max(std::abs(ref.weights[i]), std::numeric_limits<double>::min());
            rep.max_relative_weight_error = std::max(rep.max_relative_weight_error, std::abs(w[i] - ref.weights[i]) / denom);
        }
        const double qden = std::max(ref.query_probability, std::numeric_limits<double>::min());
        if (std::abs(out.decision.probability - ref.query_probability) / qden > 1e-9 && rep.decisions_match) {
            rep.decisions_match = false;
            rep.first_mismatch_round = idx + 1;
        }
    }
    if (fast.recommend() != naive.final_recommendation) rep.decisions_match = false;
    return rep;
}

struct EquivalenceSuiteReport {
    std::size_t instances = 0;
    std::size_t mismatched = 0;
    double max_relative_weight_error = 0.0;
    bool passed(double tolerance = 1e-9) const { return mismatched == 0 && max_relative_weight_error <= tolerance; }

    nlohmann::json to_json() const {
        return {{"instances", instances},
                {"mismatched", mismatched},
                {"max_relative_weight_error", max_relative_weight_error},
                {"passed", passed()}};
    }
};

// `count` random synthetic instances with T <= 200, k <= 10, up to 4
// classes and beta in [0.5, 3]. eta_floor = false injects a known fault
// into the production path.
inline EquivalenceSuiteReport oracle_equivalence_suite(std::size_t count, std::uint64_t base_seed,
                                                       bool eta_floor = true) {
    EquivalenceSuiteReport rep;
    for (std::size_t n = 0; n < count; ++n) {
        Rng rng(derive_seed(base_seed, n, 0x4f5241434c45ULL));
        const std::size_t k = 2 + rng.below(9);
        const auto classes = static_cast<std::uint32_t>(2 + rng.below(3));
        const std::uint64_t length = 1 + rng.below(200);
        std::vector<double> acc(k);
        for (auto& a : acc) a = 0.3 + 0.65 * rng.uniform();
        const Stream stream = synth_iid(acc, classes, length, rng());
        SamplerConfig cfg;
        cfg.beta = 0.5 + 2.5 * rng.uniform();
        cfg.seed = rng();
        cfg.eta_floor = eta_floor;
        const auto r = compare_with_fast_path(stream, cfg);
        ++rep.instances;
        rep.mismatched += r.decisions_match ? 0 : 1;
        rep.max_relative_weight_error = std::max(rep.max_relative_weight_error, r.max_relative_weight_error);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Inequality sweeps

struct InequalityReport {
    std::string name;
    std::string domain;
    double max_violation = -std::numeric_limits<double>::infinity();
    std::vector<double> violating_point;   // coordinates of the worst point
    double tolerance = 1e-12;
    // Secondary monotonicity check (regret inequality only).
    double max_monotonicity_violation = 0.0;

    bool passed() const { return max_violation <= tolerance && max_monotonicity_violation <= tolerance; }

    nlohmann::json to_json() const {
        return {{"name", name},
                {"domain", domain},
                {"max_violation", max_violation},
                {"worst_point", violating_point},
                {"tolerance", tolerance},
                {"max_monotonicity_violation", max_monotonicity_violation},
                {"passed", passed()}};
    }
};

// f(x, u, eta) = eta x + u ln(x e^{-eta/u} + 1 - x).
inline double regret_f(double x, double u, double eta) {
    return eta * x + u * std::log1p(x * std::expm1(-eta / u));
}

// Sweeps x in (0,1) and eta in (0,1] on a density x density grid with
// u = max(x(1-x), eta), reporting max f - eta^2; also checks that f is
// non-increasing in u on u >= eta (8 probe points per grid cell).
inline InequalityReport check_regret_inequality(std::size_t density) {
    if (density < 1) throw std::invalid_argument("check_regret_inequality: density must be >= 1");
    InequalityReport rep;
    rep.name = "regret_inequality";
    rep.domain = "x in (0,1) at i/(n+1), eta in (0,1] at j/n, n = " + std::to_string(density);
    const double n = static_cast<double>(density);
    for (std::size_t i = 1; i <= density; ++i) {
        const double x = static_cast<double>(i) / (n + 1.0);
        for (std::size_t j = 1; j <= density; ++j) {
            const double eta = static_cast<double>(j) / n;
            const double u = std::max(x * (1.0 - x), eta);
            const double viol = regret_f(x, u, eta) - eta * eta;
            if (viol > rep.max_violation) {
                rep.max_violation = viol;
                rep.violating_point = {x, eta, u};
            }
            double prev = regret_f(x, eta, eta);
            for (int m = 1; m <= 8; ++m) {
                const double uu = eta * (1.0 + 0.5 * m);
                const double cur = regret_f(x, uu, eta);
                rep.max_monotonicity_violation = std::max(rep.max_monotonicity_violation, cur - prev);
                prev = cur;
            }
        }
    }
    return rep;
}

// 1 - (1 - e^{-1}) x <= exp(-x^2) on x = i/n, i = 0..n.
inline InequalityReport check_exp_bound(std::size_t density) {
    if (density < 1) throw std::invalid_argument("check_exp_bound: density must be >= 1");
    InequalityReport rep;
    rep.name = "exp_bound";
    rep.domain = "x in [0,1] at i/n, n = " + std::to_string(density);
    const double c = -std::expm1(-1.0);
    for (std::size_t i = 0; i <= density; ++i) {
        const double x = static_cast<double>(i) / static_cast<double>(density);
        const double viol = (1.0 - c * x) - std::exp(-x * x);
        if (viol > rep.max_violation) {
            rep.max_violation = viol;
            rep.violating_point = {x};
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Mix loss

struct MixLossReport {
    double cumulative_mix_loss = 0.0;   // M_T
    double best_estimated_loss = 0.0;   // min_i L_T,i
    double bound = 0.0;                 // min_i L_T,i + ln k / eta_T
    bool passed = false;

    nlohmann::json to_json() const {
        return {{"cumulative_mix_loss", cumulative_mix_loss},
                {"best_estimated_loss", best_estimated_loss},
                {"bound", bound},
                {"passed", passed}};
    }
};

// m_t = -(1/eta_t) ln <w_t, exp(-eta_t lhat_t)>, summed along the trace.
inline MixLossReport check_mix_loss(const NaiveTrace& trace) {
    if (trace.rounds.empty()) throw std::invalid_argument("check_mix_loss: empty trace");
    const std::size_t k = trace.final_estimated_losses.size();
    real total = 0.0L;
    for (const auto& r : trace.rounds) {
        real s = 0.0L, z = 0.0L;
        for (std::size_t i = 0; i < k; ++i) {
            const real w = r.weights[i];
            s += w * std::exp(-static_cast<real>(r.eta) * static_cast<real>(r.increment[i]));
            z += w;
        }
        total += -std::log(s / z) / static_cast<real>(r.eta);
    }
    MixLossReport rep;
    rep.cumulative_mix_loss = static_cast<double>(total);
    rep.best_estimated_loss = *std::min_element(trace.final_estimated_losses.begin(), trace.final_estimated_losses.end());
    rep.bound = rep.best_estimated_loss + std::log(static_cast<double>(k)) / trace.rounds.back().eta;
    rep.passed = rep.cumulative_mix_loss <= rep.bound + 1e-9;
    return rep;
}

// ---------------------------------------------------------------------------
// Unbiasedness

struct BiasEstimate {
    std::vector<double> mean_bias;       // E[Lhat_T,i] - L_T,i
    std::vector<double> standard_error;
    std::size_t trials = 0;
    // Disagreement rounds on which every model is wrong; the estimate is
    // still formed on them (q > 0).
    std::size_t all_wrong_rounds = 0;

    bool within(double sigmas) const {
        for (std::size_t i = 0; i < mean_bias.size(); ++i)
            if (std::abs(mean_bias[i]) > sigmas * standard_error[i]) return false;
        return true;
    }

    nlohmann::json to_json() const {
        return {{"mean_bias", mean_bias},
                {"standard_error", standard_error},
                {"trials", trials},
                {"all_wrong_rounds", all_wrong_rounds}};
    }
};

// Runs ModelPicker `trials` times on the same fixed stream with independent
// seeds and compares the final loss estimate with the true cumulative loss.
inline BiasEstimate unbiasedness_estimate(const Stream& stream, double beta, std::size_t trials,
                                          std::uint64_t base_seed) {
    if (trials < 2) throw std::invalid_argument("unbiasedness_estimate: need at least two trials");
    const std::size_t k = stream.k();
    std::vector<double> true_loss(k, 0.0);
    BiasEstimate est;
    for (std::size_t idx = 0; idx < stream.length(); ++idx) {
        bool any_right = false;
        for (std::size_t i = 0; i < k; ++i) {
            true_loss[i] += stream.correct(idx, i) ? 0.0 : 1.0;
            any_right = any_right || stream.correct(idx, i);
        }
        if (!any_right && !all_agree(stream.predictions(idx))) ++est.all_wrong_rounds;
    }
    std::vector<double> sum(k, 0.0), sum2(k, 0.0);
    for (std::size_t trial = 0; trial < trials; ++trial) {
        SamplerConfig cfg;
        cfg.k = k;
        cfg.num_classes = stream.num_classes();
        cfg.beta = beta;
        cfg.seed = strategy_seed(base_seed, trial, StrategyKind::model_picker);
        ModelPicker mp(cfg);
        run_realization(stream, mp);
        const auto lhat = mp.estimated_losses();
        for (std::size_t i = 0; i < k; ++i) {
            const double d = lhat[i] - true_loss[i];
            sum[i] += d;
            sum2[i] += d * d;
        }
    }
    const double n = static_cast<double>(trials);
    est.trials = trials;
    for (std::size_t i = 0; i < k; ++i) {
        const double mean = sum[i] / n;
        const double var = std::max(0.0, (sum2[i] - n * mean * mean) / (n - 1.0));
        est.mean_bias.push_back(mean);
        est.standard_error.push_back(std::sqrt(var / n));
    }
    return est;
}

// ---------------------------------------------------------------------------
// KL vs variance

struct KlVarianceReport {
    std::size_t samples = 0;
    double max_excess = -std::numeric_limits<double>::infinity();  // |Var - 2/eta^2 KL| - allowance
    bool passed() const { return max_excess <= 0.0; }
    nlohmann::json to_json() const { return {{"samples", samples}, {"max_excess", max_excess}, {"passed", passed()}}; }
};

// For random (w, l, eta <= 0.1): |r(1-r) - 2/eta^2 KL(w || w+)| <= eta/(18 sqrt 3) + eta^2/2,
// with r = <w, l> and KL = eta r + ln(r e^{-eta} + 1 - r).
inline KlVarianceReport kl_variance_spot_check(std::size_t samples, std::uint64_t seed) {
    Rng rng(seed);
    KlVarianceReport rep;
    rep.samples = samples;
    for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t k = 2 + rng.below(9);
        std::vector<double> w(k);
        double z = 0.0;
        for (auto& x : w) z += (x = -std::log1p(-rng.uniform()));
        double r = 0.0;
        for (std::size_t i = 0; i < k; ++i)
            if (rng.bernoulli(0.5)) r += w[i] / z;
        const double eta = 1e-3 + (0.1 - 1e-3) * rng.uniform();
        const real kl = static_cast<real>(eta) * r + std::log1p(static_cast<real>(r) * std::expm1(-static_cast<real>(eta)));
        const double scaled = static_cast<double>(2.0L * kl / (static_cast<real>(eta) * eta));
        const double allowance = eta / (18.0 * std::sqrt(3.0)) + 0.5 * eta * eta;
        rep.max_excess = std::max(rep.max_excess, std::abs(r * (1.0 - r) - scaled) - allowance);
    }
    return rep;
}

}  // namespace streampicker::reference
