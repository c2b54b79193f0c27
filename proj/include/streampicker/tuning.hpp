// tuning.hpp
//
// Budget matching: pick each strategy's scale hyperparameter on an equally
// spaced grid whose mean query count is closest to a target label budget.
#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "harness.hpp"
#include "strategies.hpp"

namespace streampicker {

struct GridBounds {
    double lower = 0.0;
    double upper = 1.0;
};

// Search ranges used when the caller gives none.
inline GridBounds default_grid(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::model_picker: return {0.0, 60.0};
        case StrategyKind::vote_entropy: return {0.0, 4.0};
        case StrategyKind::sqbc: return {0.0, 4.0};
        case StrategyKind::iwal: return {0.0, 1.0};
        case StrategyKind::efal: return {0.0, 1e-2};
        case StrategyKind::label_efficient: return {0.0, 1.0};
    }
    return {};
}

struct TuningSpec {
    StrategyKind strategy = StrategyKind::model_picker;
    GridBounds grid = default_grid(StrategyKind::model_picker);
    std::size_t grid_size = 250;
    std::uint64_t budget = 0;
    std::uint64_t stream_length = 0;
    std::size_t realizations = 100;
    std::uint64_t base_seed = 0;
    std::size_t parallelism = 1;

    void validate() const {
        if (!(grid.lower < grid.upper)) throw ConfigError("tuning grid: lower bound must be < upper bound");
        if (grid.lower < 0.0) throw ConfigError("tuning grid: lower bound must be >= 0");
        if (grid_size < 2) throw ConfigError("tuning grid: size must be >= 2");
        if (stream_length == 0) throw ConfigError("tuning: stream length must be >= 1");
        if (budget > stream_length) throw ConfigError("tuning: budget exceeds stream length");
        if (realizations == 0) throw ConfigError("tuning: need at least one realization per grid point");
    }
};

struct TuningRow {
    double beta = 0.0;
    double mean_queries = 0.0;
    double sd_queries = 0.0;
};

struct TuningResult {
    StrategyKind strategy = StrategyKind::model_picker;
    double chosen_beta = 0.0;
    double mean_queries = 0.0;
    std::vector<TuningRow> table;
    // Fraction of adjacent grid pairs where mean queries does not decrease.
    double monotonicity = 1.0;
    // Budget not reachable within the grid; chosen_beta is the point with
    // the most queries.
    bool saturated = false;
    // Label-efficient: epsilon = b / T set in closed form, no search.
    bool analytic = false;
};

inline std::vector<double> grid_points(GridBounds bounds, std::size_t size) {
    std::vector<double> g(size);
    const double step = (bounds.upper - bounds.lower) / static_cast<double>(size - 1);
    for (std::size_t i = 0; i < size; ++i) g[i] = bounds.lower + step * static_cast<double>(i);
    g.back() = bounds.upper;
    return g;
}

// Tuning realizations draw their seeds from a base derived with kTuningSalt,
// disjoint from the evaluation seeds of the plain base.
inline std::uint64_t tuning_base_seed(std::uint64_t base) { return derive_seed(base, 0, kTuningSalt); }

// Mean/sd query counts at every grid point. All grid points share the same
// streams and strategy seeds (common random numbers).
inline std::vector<TuningRow> tuning_table(const TuningSpec& spec, const SamplerConfig& sampler,
                                           const StreamFactory& make) {
    spec.validate();
    const auto beta = grid_points(spec.grid, spec.grid_size);
    const std::uint64_t base = tuning_base_seed(spec.base_seed);

    std::vector<Stream> streams(spec.realizations);
    parallel_for(spec.realizations, spec.parallelism,
                 [&](std::size_t r) { streams[r] = make(stream_seed(base, r)); });

    std::vector<std::uint64_t> queries(beta.size() * spec.realizations);
    parallel_for(queries.size(), spec.parallelism, [&](std::size_t idx) {
        const std::size_t g = idx / spec.realizations;
        const std::size_t r = idx % spec.realizations;
        SamplerConfig cfg = sampler;
        cfg.beta = beta[g];
        cfg.seed = strategy_seed(base, r, spec.strategy);
        auto strategy = make_strategy(spec.strategy, cfg);
        queries[idx] = run_realization(streams[r], *strategy).total_queries;
    });

    std::vector<TuningRow> table(beta.size());
    const double n = static_cast<double>(spec.realizations);
    for (std::size_t g = 0; g < beta.size(); ++g) {
        double sum = 0.0, sum2 = 0.0;
        for (std::size_t r = 0; r < spec.realizations; ++r) {
            const double q = static_cast<double>(queries[g * spec.realizations + r]);
            sum += q;
            sum2 += q * q;
        }
        const double mean = sum / n;
        table[g] = {beta[g], mean, spec.realizations > 1 ? std::sqrt(std::max(0.0, (sum2 - n * mean * mean) / (n - 1))) : 0.0};
    }
    return table;
}

// Grid point minimizing |mean queries - budget|, ties to the smaller beta.
// Saturation: every grid point stays below 95% of the budget.
inline TuningResult select_for_budget(const std::vector<TuningRow>& table, std::uint64_t budget,
                                      StrategyKind strategy = StrategyKind::model_picker) {
    if (table.empty()) throw std::invalid_argument("select_for_budget: empty table");
    TuningResult res;
    res.strategy = strategy;
    res.table = table;
    const double b = static_cast<double>(budget);

    std::size_t best = 0, most = 0;
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (std::abs(table[i].mean_queries - b) < std::abs(table[best].mean_queries - b)) best = i;
        if (table[i].mean_queries > table[most].mean_queries) most = i;
    }
    res.saturated = table[most].mean_queries < 0.95 * b;
    const std::size_t pick = res.saturated ? most : best;
    res.chosen_beta = table[pick].beta;
    res.mean_queries = table[pick].mean_queries;

    std::size_t up = 0;
    for (std::size_t i = 1; i < table.size(); ++i) up += table[i].mean_queries >= table[i - 1].mean_queries ? 1 : 0;
    res.monotonicity = table.size() > 1 ? static_cast<double>(up) / static_cast<double>(table.size() - 1) : 1.0;
    return res;
}

inline TuningResult tune(const TuningSpec& spec, const SamplerConfig& sampler, const StreamFactory& make) {
    spec.validate();
    if (spec.strategy == StrategyKind::label_efficient) {
        TuningResult res;
        res.strategy = spec.strategy;
        res.analytic = true;
        res.chosen_beta = static_cast<double>(spec.budget) / static_cast<double>(spec.stream_length);
        res.mean_queries = static_cast<double>(spec.budget);
        return res;
    }
    return select_for_budget(tuning_table(spec, sampler, make), spec.budget, spec.strategy);
}

}  // namespace streampicker
