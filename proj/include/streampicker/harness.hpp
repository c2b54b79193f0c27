// harness.hpp
//
// Runs realizations (one seeded stream through one seeded strategy), records
// per-round traces and reduces them to regret, accuracy gap and
// identification metrics.
#pragma once
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "core.hpp"
#include "rng.hpp"
#include "strategies.hpp"
#include "streams.hpp"

namespace streampicker {

struct RoundRecord {
    std::uint64_t t = 0;              // 1-based round
    std::size_t chosen_model = 0;     // I_t
    std::uint8_t learner_loss = 0;    // loss of I_t on the true label
    bool queried = false;             // Q_t
    double query_probability = 0.0;   // q_t
    std::size_t recommendation = 0;   // pi_t
};

struct RealizationTrace {
    std::vector<RoundRecord> rounds;
    std::size_t final_recommendation = 0;
    std::uint64_t total_queries = 0;
    std::uint64_t seed = 0;
};

// Drives `strategy` through `stream`; the oracle answers from the stream's
// true labels and refuses a second call within one round.
inline RealizationTrace run_realization(const Stream& stream, Strategy& strategy, std::uint64_t seed = 0) {
    if (stream.k() != strategy.k())
        throw std::invalid_argument("run_realization: stream has k = " + std::to_string(stream.k()) +
                                    " models, strategy expects " + std::to_string(strategy.k()));
    RealizationTrace trace;
    trace.seed = seed;
    trace.rounds.reserve(stream.length());
    for (std::size_t i = 0; i < stream.length(); ++i) {
        int calls = 0;
        const LabelOracle oracle = [&]() -> Label {
            if (++calls > 1) throw std::logic_error("label oracle invoked twice in one round");
            return stream.label(i);
        };
        const auto out = strategy.step(stream.predictions(i), oracle);
        if (out.decision.queried != (calls == 1))
            throw std::logic_error("strategy query flag disagrees with oracle usage");
        RoundRecord r;
        r.t = i + 1;
        r.chosen_model = out.chosen_model;
        r.learner_loss = out.predicted_label != stream.label(i) ? 1 : 0;
        r.queried = out.decision.queried;
        r.query_probability = out.decision.probability;
        r.recommendation = out.recommendation;
        trace.total_queries += r.queried ? 1 : 0;
        trace.rounds.push_back(r);
    }
    trace.final_recommendation = strategy.recommend();
    return trace;
}

// R_t = sum_{s<=t} loss(I_s) - min_i sum_{s<=t} loss_i, for t = 1..T.
inline std::vector<double> regret_curve(const RealizationTrace& trace, const Stream& stream) {
    if (trace.rounds.size() != stream.length())
        throw std::invalid_argument("regret_curve: trace and stream lengths differ");
    std::vector<std::uint64_t> model_losses(stream.k(), 0);
    std::uint64_t learner = 0;
    std::vector<double> curve(stream.length());
    for (std::size_t i = 0; i < stream.length(); ++i) {
        learner += trace.rounds[i].learner_loss;
        for (std::size_t j = 0; j < stream.k(); ++j) model_losses[j] += stream.correct(i, j) ? 0 : 1;
        const auto best = *std::min_element(model_losses.begin(), model_losses.end());
        curve[i] = static_cast<double>(learner) - static_cast<double>(best);
    }
    return curve;
}

// Stream accuracy of the stream winner minus that of the final recommendation.
inline double accuracy_gap(const RealizationTrace& trace, const Stream& stream) {
    if (stream.length() == 0) throw std::invalid_argument("accuracy_gap: empty stream");
    if (trace.final_recommendation >= stream.k()) throw std::invalid_argument("accuracy_gap: bad recommendation");
    const auto correct = correct_counts(stream, stream.length());
    const auto best = *std::max_element(correct.begin(), correct.end());
    return static_cast<double>(best - correct[trace.final_recommendation]) / static_cast<double>(stream.length());
}

// Final recommendation is among the stream-accuracy maximizers.
inline bool identified(const RealizationTrace& trace, const Stream& stream) {
    const auto correct = correct_counts(stream, stream.length());
    return correct.at(trace.final_recommendation) == *std::max_element(correct.begin(), correct.end());
}

// Nearest-rank percentile: the ceil(p/100 * n)-th smallest value.
inline double nearest_rank_percentile(std::vector<double> values, unsigned percent) {
    if (values.empty()) throw std::invalid_argument("percentile of empty sample");
    if (percent == 0 || percent > 100) throw std::invalid_argument("percentile must be in (0, 100]");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    const std::size_t rank = (percent * n + 99) / 100;
    return values[std::max<std::size_t>(rank, 1) - 1];
}

// Per-realization scalar outcome; one JSON-lines record each.
struct RealizationResult {
    std::uint64_t seed = 0;
    std::uint64_t total_queries = 0;
    std::size_t final_recommendation = 0;
    bool identified = false;
    double accuracy_gap = 0.0;
    double final_regret = 0.0;
    std::optional<double> pool_accuracy_gap;
};

struct RealizationOutcome {
    RealizationResult result;
    std::vector<double> regret_curve;
};

inline RealizationOutcome evaluate(const RealizationTrace& trace, const Stream& stream,
                                   const std::vector<double>* pool_accuracies = nullptr) {
    RealizationOutcome o;
    o.result.seed = trace.seed;
    o.result.total_queries = trace.total_queries;
    o.result.final_recommendation = trace.final_recommendation;
    o.result.identified = identified(trace, stream);
    o.result.accuracy_gap = accuracy_gap(trace, stream);
    o.regret_curve = regret_curve(trace, stream);
    o.result.final_regret = o.regret_curve.empty() ? 0.0 : o.regret_curve.back();
    if (pool_accuracies) {
        const auto& acc = *pool_accuracies;
        o.result.pool_accuracy_gap = *std::max_element(acc.begin(), acc.end()) - acc.at(trace.final_recommendation);
    }
    return o;
}

struct MetricsSummary {
    std::vector<double> mean_regret_curve;
    double mean_final_regret = 0.0;
    double mean_accuracy_gap = 0.0;
    double identification_probability = 0.0;
    double p90_accuracy_gap = 0.0;
    double mean_queries = 0.0;
    double sd_queries = 0.0;
    std::optional<double> mean_pool_accuracy_gap;
    std::size_t realizations = 0;
};

// Deterministic fold over outcomes in the given order.
inline MetricsSummary summarize(std::span<const RealizationOutcome> outcomes) {
    if (outcomes.empty()) throw std::invalid_argument("aggregate: no realizations");
    const std::size_t n = outcomes.size();
    const std::size_t len = outcomes.front().regret_curve.size();
    MetricsSummary m;
    m.realizations = n;
    m.mean_regret_curve.assign(len, 0.0);
    std::vector<double> gaps;
    gaps.reserve(n);
    double sum_q = 0.0, sum_q2 = 0.0, sum_pool_gap = 0.0;
    std::size_t ident = 0, pool_count = 0;
    for (const auto& o : outcomes) {
        if (o.regret_curve.size() != len)
            throw std::invalid_argument("aggregate: realizations have different stream lengths");
        for (std::size_t t = 0; t < len; ++t) m.mean_regret_curve[t] += o.regret_curve[t];
        gaps.push_back(o.result.accuracy_gap);
        ident += o.result.identified ? 1 : 0;
        const double q = static_cast<double>(o.result.total_queries);
        sum_q += q;
        sum_q2 += q * q;
        if (o.result.pool_accuracy_gap) {
            sum_pool_gap += *o.result.pool_accuracy_gap;
            ++pool_count;
        }
    }
    const double dn = static_cast<double>(n);
    for (double& r : m.mean_regret_curve) r /= dn;
    m.mean_final_regret = len ? m.mean_regret_curve.back() : 0.0;
    m.mean_accuracy_gap = std::accumulate(gaps.begin(), gaps.end(), 0.0) / dn;
    m.identification_probability = static_cast<double>(ident) / dn;
    m.p90_accuracy_gap = nearest_rank_percentile(gaps, 90);
    m.mean_queries = sum_q / dn;
    m.sd_queries = n > 1 ? std::sqrt(std::max(0.0, (sum_q2 - dn * m.mean_queries * m.mean_queries) / (dn - 1))) : 0.0;
    if (pool_count == n) m.mean_pool_accuracy_gap = sum_pool_gap / dn;
    return m;
}

inline MetricsSummary aggregate(std::span<const RealizationTrace> traces, std::span<const Stream> streams) {
    if (traces.size() != streams.size()) throw std::invalid_argument("aggregate: traces and streams differ in count");
    std::vector<RealizationOutcome> outcomes;
    outcomes.reserve(traces.size());
    for (std::size_t i = 0; i < traces.size(); ++i) outcomes.push_back(evaluate(traces[i], streams[i]));
    return summarize(outcomes);
}

// ---------------------------------------------------------------------------
// Instance hardness for independent-error synthetic instances.

struct InstanceHardness {
    std::size_t best = 0;
    std::vector<double> gaps;                 // Delta_j
    std::vector<double> disagreement;         // theta_j
    std::optional<double> lambda;             // min_{j != best} Delta_j^2 / theta_j
    double delta = 0.0;                       // min_{j != best} Delta_j
    bool unique_best = false;
};

inline InstanceHardness instance_hardness(std::span<const double> accuracies, std::uint32_t num_classes) {
    if (accuracies.size() < 2) throw std::invalid_argument("instance_hardness: need at least two models");
    if (num_classes < 2) throw std::invalid_argument("instance_hardness: num_classes must be >= 2");
    for (double a : accuracies)
        if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("instance_hardness: accuracy outside [0, 1]");
    InstanceHardness h;
    h.best = argmax_index(accuracies);
    const double top = accuracies[h.best];
    h.delta = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < accuracies.size(); ++j) {
        const double a = accuracies[j];
        h.gaps.push_back(top - a);
        h.disagreement.push_back(top * (1.0 - a) + a * (1.0 - top));
        if (j != h.best) h.delta = std::min(h.delta, top - a);
    }
    h.unique_best = h.delta > 0.0;
    if (h.unique_best) {
        double lambda = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < accuracies.size(); ++j)
            if (j != h.best) lambda = std::min(lambda, h.gaps[j] * h.gaps[j] / h.disagreement[j]);
        h.lambda = lambda;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Batches of realizations.

// Builds the stream for a realization from its derived stream seed.
using StreamFactory = std::function<Stream(std::uint64_t seed)>;

struct BatchSpec {
    StrategyKind strategy = StrategyKind::model_picker;
    SamplerConfig sampler;        // seed is overwritten per realization
    std::size_t realizations = 1;
    std::uint64_t base_seed = 0;
    std::size_t parallelism = 1;
    const std::vector<double>* pool_accuracies = nullptr;
};

inline std::uint64_t stream_seed(std::uint64_t base, std::uint64_t realization) {
    return derive_seed(base, realization, kStreamSalt);
}

inline std::uint64_t strategy_seed(std::uint64_t base, std::uint64_t realization, StrategyKind kind) {
    return derive_seed(base, realization, static_cast<std::uint64_t>(kind));
}

// Runs fn(i) for i in [0, n) on `workers` threads. The first failure (by
// index) is rethrown after all workers stop.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::vector<std::exception_ptr> errors(n);
    auto work = [&] {
        for (std::size_t i = next++; i < n && !failed; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
                failed = true;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// Realization r uses stream seed stream_seed(base, r) and strategy seed
// strategy_seed(base, r, kind); outcomes are returned in realization order.
inline std::vector<RealizationOutcome> run_batch(const BatchSpec& spec, const StreamFactory& make) {
    std::vector<RealizationOutcome> outcomes(spec.realizations);
    parallel_for(spec.realizations, spec.parallelism, [&](std::size_t r) {
        const auto sseed = strategy_seed(spec.base_seed, r, spec.strategy);
        try {
            const Stream stream = make(stream_seed(spec.base_seed, r));
            SamplerConfig cfg = spec.sampler;
            cfg.seed = sseed;
            auto strategy = make_strategy(spec.strategy, cfg);
            const auto trace = run_realization(stream, *strategy, sseed);
            outcomes[r] = evaluate(trace, stream, spec.pool_accuracies);
        } catch (const std::exception& e) {
            throw std::runtime_error(std::string(to_string(spec.strategy)) + " realization " + std::to_string(r) +
                                     " (seed " + std::to_string(sseed) + "): " + e.what());
        }
    });
    return outcomes;
}

}  // namespace streampicker
