// strategies.hpp
//
// Selective-sampling learners over a fixed pool of k pretrained models.
// Every learner follows the same round protocol:
//
//   1. observe the k predictions for the current instance,
//   2. emit a predicted label and a query decision (q_t, Q_t),
//   3. if Q_t = 1, pull the true label from the oracle (exactly once),
//   4. recommend a model at any time.
//
// ModelPicker is the exponential-weights learner whose query probability is
// the largest hypothetical-loss variance under its current weights. The other
// five are adapted active-learning baselines (label-efficient prediction,
// vote entropy, structural QBC, IWAL and EFAL).
#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "core.hpp"
#include "rng.hpp"

namespace streampicker {

// Values double as the strategy id in derive_seed.
enum class StrategyKind : std::uint64_t {
    model_picker = 1,
    label_efficient = 2,
    vote_entropy = 3,
    sqbc = 4,
    iwal = 5,
    efal = 6,
};

inline constexpr StrategyKind kAllStrategies[] = {
    StrategyKind::model_picker, StrategyKind::label_efficient, StrategyKind::vote_entropy,
    StrategyKind::sqbc,         StrategyKind::iwal,            StrategyKind::efal,
};

inline std::string_view to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::model_picker: return "model_picker";
        case StrategyKind::label_efficient: return "label_efficient";
        case StrategyKind::vote_entropy: return "vote_entropy";
        case StrategyKind::sqbc: return "sqbc";
        case StrategyKind::iwal: return "iwal";
        case StrategyKind::efal: return "efal";
    }
    return "unknown";
}

inline StrategyKind parse_strategy(std::string_view name) {
    for (auto kind : kAllStrategies)
        if (to_string(kind) == name) return kind;
    throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

// theta_t = sqrt(2 ln(k t (t+1)) / t), the default IWAL rejection threshold.
inline double iwal_default_threshold(std::uint64_t t, std::size_t k) {
    const double tt = static_cast<double>(t);
    return std::sqrt(2.0 * std::log(static_cast<double>(k) * tt * (tt + 1.0)) / tt);
}

struct SamplerConfig {
    std::size_t k = 2;
    std::uint32_t num_classes = 2;
    // Query-probability scale (model_picker, vote_entropy, iwal), posterior
    // rate (sqbc) or C0 (efal). Unused by label_efficient.
    double beta = 1.0;
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> stream_length_hint;
    std::optional<std::uint64_t> budget_hint;

    // Model Picker: predict with the recommendation (I_t = pi_t) instead of
    // sampling I_t ~ w_t.
    bool follow_leader = false;
    // Model Picker: keep the eta_t floor in the query probability. Only
    // switched off for fault-injection runs.
    bool eta_floor = true;

    // IWAL rejection threshold theta(t, k); t counts rounds with data.
    std::function<double(std::uint64_t, std::size_t)> iwal_threshold = iwal_default_threshold;

    void validate() const {
        if (k < 2) throw ConfigError("SamplerConfig: k must be >= 2");
        if (num_classes < 2) throw ConfigError("SamplerConfig: num_classes must be >= 2");
        if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("SamplerConfig: beta must be >= 0");
    }
};

struct QueryDecision {
    double probability = 0.0;
    bool queried = false;
};

struct RoundOutput {
    Label predicted_label = 0;
    std::size_t chosen_model = 0;
    QueryDecision decision;
    // Recommendation in force when the round started (pi_t).
    std::size_t recommendation = 0;
};

using LabelOracle = std::function<Label()>;

// Single-owner mutable learner. step() leaves the state untouched if the
// oracle throws.
class Strategy {
public:
    virtual ~Strategy() = default;

    virtual StrategyKind kind() const noexcept = 0;
    virtual RoundOutput step(PredictionView p, const LabelOracle& oracle) = 0;
    virtual std::size_t recommend() const = 0;

    std::uint64_t rounds() const noexcept { return t_; }
    std::size_t k() const noexcept { return config_.k; }
    const SamplerConfig& config() const noexcept { return config_; }

protected:
    explicit Strategy(SamplerConfig config) : config_(std::move(config)), rng_(config_.seed) {
        config_.validate();
    }

    void check_round(PredictionView p) const {
        if (p.size() != config_.k)
            throw std::invalid_argument("strategy step: expected " + std::to_string(config_.k) +
                                        " predictions, got " + std::to_string(p.size()));
    }

    SamplerConfig config_;
    Rng rng_;
    std::uint64_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Model Picker

class ModelPicker final : public Strategy {
public:
    explicit ModelPicker(SamplerConfig config)
        : Strategy(std::move(config)), estimated_(config_.k, 0.0), weights_(config_.k, 1.0 / double(config_.k)) {}

    StrategyKind kind() const noexcept override { return StrategyKind::model_picker; }

    RoundOutput step(PredictionView p, const LabelOracle& oracle) override { return step_impl(p, oracle, {}); }

    // Replays a prescribed query outcome instead of sampling Q_t. The RNG
    // still advances exactly as in step(). Forcing a query on a round with
    // q_t = 0 is an error.
    RoundOutput step_forced(PredictionView p, const LabelOracle& oracle, bool queried) {
        return step_impl(p, oracle, queried);
    }

    // argmax of the weights the next round would use.
    std::size_t recommend() const override {
        return argmax_index(exp_weights(estimated_, learning_rate(t_ + 1, config_.k)));
    }

    // w_t of the most recent round (uniform before the first round).
    std::span<const double> weights() const noexcept { return weights_; }
    std::span<const double> estimated_losses() const noexcept { return estimated_; }
    double last_eta() const noexcept { return last_eta_; }

private:
    RoundOutput step_impl(PredictionView p, const LabelOracle& oracle, std::optional<bool> forced) {
        check_round(p);
        const std::uint64_t t = t_ + 1;
        const double eta = learning_rate(t, config_.k);
        auto w = exp_weights(estimated_, eta);

        RoundOutput out;
        out.recommendation = argmax_index(w);

        // Two uniforms per round, always: one for I_t, one for Q_t.
        Rng rng = rng_;
        const double u_model = rng.uniform();
        const double u_query = rng.uniform();

        out.chosen_model = config_.follow_leader ? out.recommendation : sample_index(w, u_model);
        out.predicted_label = p[out.chosen_model];

        const double v = max_variance(p, w);
        double q = 0.0;
        if (v > 0.0) q = config_.eta_floor ? query_probability(v, eta, config_.beta) : std::min(1.0, config_.beta * v);
        out.decision.probability = q;
        out.decision.queried = forced ? *forced : u_query < q;
        if (out.decision.queried && !(q > 0.0))
            throw std::invalid_argument("ModelPicker: forced query on a round with zero query probability");

        if (out.decision.queried) {
            const Label c = oracle();
            importance_update(estimated_, hypothetical_loss(p, c), q);
        }
        rng_ = rng;
        weights_ = std::move(w);
        last_eta_ = eta;
        t_ = t;
        return out;
    }

    std::vector<double> estimated_;
    std::vector<double> weights_;
    double last_eta_ = 0.0;
};

// ---------------------------------------------------------------------------
// Baselines

// Shared bookkeeping for baselines that recommend the model with the most
// correct answers on queried labels (equivalently fewest queried mistakes).
class QueriedAccuracyBaseline : public Strategy {
public:
    std::size_t recommend() const override { return argmin_index<std::uint64_t>(queried_mistakes_); }
    std::uint64_t queries() const noexcept { return queries_; }

protected:
    explicit QueriedAccuracyBaseline(SamplerConfig config)
        : Strategy(std::move(config)), queried_mistakes_(config_.k, 0) {}

    void record_label(PredictionView p, Label c) {
        ++queries_;
        for (std::size_t i = 0; i < p.size(); ++i) queried_mistakes_[i] += p[i] != c ? 1 : 0;
    }

    // Predict with the current recommendation; sample Q_t; on a query, pull
    // the label and hand it to on_label. One uniform per round.
    template <typename OnLabel>
    RoundOutput finish_round(PredictionView p, const LabelOracle& oracle, double q, Rng& rng, OnLabel&& on_label) {
        RoundOutput out;
        out.recommendation = recommend();
        out.chosen_model = out.recommendation;
        out.predicted_label = p[out.chosen_model];
        out.decision.probability = q;
        out.decision.queried = rng.uniform() < q;
        if (out.decision.queried) {
            const Label c = oracle();
            record_label(p, c);
            on_label(c);
        }
        return out;
    }

    std::vector<std::uint64_t> queried_mistakes_;
    std::uint64_t queries_ = 0;
};

// Queries each disagreement round with fixed probability eps = b / T.
class LabelEfficient final : public QueriedAccuracyBaseline {
public:
    explicit LabelEfficient(SamplerConfig config) : QueriedAccuracyBaseline(std::move(config)) {
        if (!config_.stream_length_hint || !config_.budget_hint)
            throw ConfigError("label_efficient requires both stream_length_hint and budget_hint");
        if (*config_.stream_length_hint == 0) throw ConfigError("label_efficient: stream length must be >= 1");
        if (*config_.budget_hint > *config_.stream_length_hint)
            throw ConfigError("label_efficient: budget exceeds stream length");
        epsilon_ = static_cast<double>(*config_.budget_hint) / static_cast<double>(*config_.stream_length_hint);
    }

    StrategyKind kind() const noexcept override { return StrategyKind::label_efficient; }
    double epsilon() const noexcept { return epsilon_; }

    RoundOutput step(PredictionView p, const LabelOracle& oracle) override {
        check_round(p);
        Rng rng = rng_;
        const double q = all_agree(p) ? 0.0 : epsilon_;
        auto out = finish_round(p, oracle, q, rng, [](Label) {});
        rng_ = rng;
        ++t_;
        return out;
    }

private:
    double epsilon_ = 0.0;
};

// Vote entropy of the committee, normalized by ln(min(k, |C|)) into [0, 1].
inline double vote_entropy(PredictionView p, std::uint32_t num_classes) {
    const std::size_t k = p.size();
    if (k < 2) throw std::invalid_argument("vote_entropy: need at least two votes");
    std::vector<std::pair<Label, std::size_t>> counts;
    for (Label c : p) {
        auto it = std::find_if(counts.begin(), counts.end(), [&](const auto& e) { return e.first == c; });
        if (it == counts.end())
            counts.emplace_back(c, 1);
        else
            ++it->second;
    }
    if (counts.size() < 2) return 0.0;
    double h = 0.0;
    for (const auto& [c, n] : counts) {
        const double f = static_cast<double>(n) / static_cast<double>(k);
        h -= f * std::log(f);
    }
    const double norm = std::log(static_cast<double>(std::min<std::size_t>(k, num_classes)));
    return std::min(1.0, h / norm);
}

class VoteEntropy final : public QueriedAccuracyBaseline {
public:
    explicit VoteEntropy(SamplerConfig config) : QueriedAccuracyBaseline(std::move(config)) {}

    StrategyKind kind() const noexcept override { return StrategyKind::vote_entropy; }

    RoundOutput step(PredictionView p, const LabelOracle& oracle) override {
        check_round(p);
        Rng rng = rng_;
        const double q = std::min(1.0, config_.beta * vote_entropy(p, config_.num_classes));
        auto out = finish_round(p, oracle, q, rng, [](Label) {});
        rng_ = rng;
        ++t_;
        return out;
    }
};

// Structural query by committee. Two models are drawn independently from the
// posterior pi_t (proportional to exp(-beta * queried mistakes)); q_t is
// their empirical disagreement rate over rounds 1..t.
class Sqbc final : public QueriedAccuracyBaseline {
public:
    explicit Sqbc(SamplerConfig config)
        : QueriedAccuracyBaseline(std::move(config)),
          cumulative_loss_(config_.k, 0.0),
          disagreements_(config_.k * config_.k, 0) {}

    StrategyKind kind() const noexcept override { return StrategyKind::sqbc; }

    RoundOutput step(PredictionView p, const LabelOracle& oracle) override {
        check_round(p);
        const std::size_t k = config_.k;
        const std::uint64_t t = t_ + 1;

        auto counts = disagreements_;
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = i + 1; j < k; ++j)
                if (p[i] != p[j]) {
                    ++counts[i * k + j];
                    ++counts[j * k + i];
                }

        Rng rng = rng_;
        const auto pi = posterior();
        const std::size_t a = sample_index(pi, rng.uniform());
        const std::size_t b = sample_index(pi, rng.uniform());
        last_pair_ = {a, b};
        const double q = all_agree(p) ? 0.0 : static_cast<double>(counts[a * k + b]) / static_cast<double>(t);

        auto loss = cumulative_loss_;
        auto out = finish_round(p, oracle, q, rng, [&](Label c) {
            for (std::size_t i = 0; i < k; ++i) loss[i] += p[i] != c ? 1.0 : 0.0;
        });
        disagreements_ = std::move(counts);
        cumulative_loss_ = std::move(loss);
        rng_ = rng;
        t_ = t;
        return out;
    }

    std::vector<double> posterior() const { return exp_weights(cumulative_loss_, config_.beta); }

    std::uint64_t disagreements(std::size_t i, std::size_t j) const { return disagreements_.at(i * config_.k + j); }
    std::pair<std::size_t, std::size_t> last_pair() const noexcept { return last_pair_; }

private:
    // Queried mistakes per model; pi_t = exp_weights(cumulative_loss_, beta).
    std::vector<double> cumulative_loss_;
    std::vector<std::uint64_t> disagreements_;
    std::pair<std::size_t, std::size_t> last_pair_{0, 0};
};

// Importance-weighted baselines keep per-model sums of loss / q over queried
// rounds and recommend the argmin.
class ImportanceWeightedBaseline : public Strategy {
public:
    std::size_t recommend() const override { return argmin_index<double>(weighted_errors_); }
    std::span<const double> weighted_errors() const noexcept { return weighted_errors_; }
    std::uint64_t queries() const noexcept { return queries_; }

protected:
    explicit ImportanceWeightedBaseline(SamplerConfig config)
        : Strategy(std::move(config)), weighted_errors_(config_.k, 0.0) {}

    RoundOutput finish_round(PredictionView p, const LabelOracle& oracle, double q) {
        Rng rng = rng_;
        RoundOutput out;
        out.recommendation = recommend();
        out.chosen_model = out.recommendation;
        out.predicted_label = p[out.chosen_model];
        out.decision.probability = q;
        out.decision.queried = rng.uniform() < q;
        if (out.decision.queried) {
            const Label c = oracle();
            importance_update(weighted_errors_, hypothetical_loss(p, c), q);
            ++queries_;
        }
        rng_ = rng;
        ++t_;
        return out;
    }

    std::vector<double> weighted_errors_;
    std::uint64_t queries_ = 0;
};

// IWAL adapted to a fixed model pool: query (with probability min(1, beta))
// exactly when the surviving models H_t disagree, where
//   H_t = { i in H_{t-1} : err_i <= min_{j in H_{t-1}} err_j + theta(n) },
// err = weighted errors / n and n = t - 1 is the number of rounds already
// processed. H_t only shrinks.
class Iwal final : public ImportanceWeightedBaseline {
public:
    explicit Iwal(SamplerConfig config) : ImportanceWeightedBaseline(std::move(config)), alive_(config_.k, true) {
        if (!config_.iwal_threshold) throw ConfigError("iwal: threshold function is empty");
    }

    StrategyKind kind() const noexcept override { return StrategyKind::iwal; }

    // H for the next round.
    std::vector<bool> surviving() const {
        const std::size_t k = config_.k;
        auto mask = alive_;
        const std::uint64_t n = t_;
        if (n == 0) return mask;
        double lo = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < k; ++i)
            if (alive_[i]) lo = std::min(lo, weighted_errors_[i]);
        const double theta = config_.iwal_threshold(n, k);
        for (std::size_t i = 0; i < k; ++i)
            mask[i] = alive_[i] && (weighted_errors_[i] - lo) / static_cast<double>(n) <= theta;
        return mask;
    }

    // Lowest weighted error among the survivors.
    std::size_t recommend() const override {
        const auto mask = surviving();
        std::size_t best = config_.k;
        for (std::size_t i = 0; i < config_.k; ++i)
            if (mask[i] && (best == config_.k || weighted_errors_[i] < weighted_errors_[best])) best = i;
        return best;
    }

    RoundOutput step(PredictionView p, const LabelOracle& oracle) override {
        check_round(p);
        auto mask = surviving();
        std::optional<Label> seen;
        bool disagree = false;
        for (std::size_t i = 0; i < p.size() && !disagree; ++i) {
            if (!mask[i]) continue;
            if (seen && *seen != p[i]) disagree = true;
            seen = p[i];
        }
        const double q = disagree ? std::min(1.0, config_.beta) : 0.0;
        auto out = finish_round(p, oracle, q);
        last_surviving_ = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
        alive_ = std::move(mask);
        return out;
    }

    std::size_t last_surviving_count() const noexcept { return last_surviving_; }

private:
    std::vector<bool> alive_;
    std::size_t last_surviving_ = 0;
};

// EFAL query probability from the gap G between the two smallest weighted
// error rates at round t:
//   threshold = c0 ln t / (t - 1)   (c0 at t = 1)
//   q = 1 if G <= threshold, else min(1, (1/G^2 + 1/G) * threshold),
// and q = 0 when c0 = 0.
inline double efal_query_probability(double gap, double c0, std::uint64_t t) {
    if (t < 1) throw std::invalid_argument("efal_query_probability: t must be >= 1");
    const double threshold =
        t == 1 ? c0 : c0 * std::log(static_cast<double>(t)) / static_cast<double>(t - 1);
    if (threshold <= 0.0) return 0.0;
    if (gap <= threshold) return 1.0;
    return std::min(1.0, (1.0 / (gap * gap) + 1.0 / gap) * threshold);
}

class Efal final : public ImportanceWeightedBaseline {
public:
    explicit Efal(SamplerConfig config) : ImportanceWeightedBaseline(std::move(config)) {}

    StrategyKind kind() const noexcept override { return StrategyKind::efal; }
    double c0() const noexcept { return config_.beta; }

    // Gap between the two smallest weighted error rates so far.
    double gap() const {
        if (t_ == 0) return 0.0;
        double first = std::numeric_limits<double>::infinity();
        double second = std::numeric_limits<double>::infinity();
        for (double e : weighted_errors_) {
            if (e < first) {
                second = first;
                first = e;
            } else if (e < second) {
                second = e;
            }
        }
        return (second - first) / static_cast<double>(t_);
    }

    RoundOutput step(PredictionView p, const LabelOracle& oracle) override {
        check_round(p);
        const double q = all_agree(p) ? 0.0 : efal_query_probability(gap(), c0(), t_ + 1);
        return finish_round(p, oracle, q);
    }
};

inline std::unique_ptr<Strategy> make_strategy(StrategyKind kind, const SamplerConfig& config) {
    switch (kind) {
        case StrategyKind::model_picker: return std::make_unique<ModelPicker>(config);
        case StrategyKind::label_efficient: return std::make_unique<LabelEfficient>(config);
        case StrategyKind::vote_entropy: return std::make_unique<VoteEntropy>(config);
        case StrategyKind::sqbc: return std::make_unique<Sqbc>(config);
        case StrategyKind::iwal: return std::make_unique<Iwal>(config);
        case StrategyKind::efal: return std::make_unique<Efal>(config);
    }
    throw ConfigError("unknown strategy kind");
}

}  // namespace streampicker
