// cli.hpp
//
// `streampicker` command line: validate | tune | run | theory.
// Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
#pragma once
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "harness.hpp"
#include "reference.hpp"
#include "strategies.hpp"
#include "streams.hpp"
#include "tuning.hpp"

namespace streampicker::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// ---------------------------------------------------------------------------
// Output helpers

// Writes `content` to `path` via a sibling temp file and rename.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string fmt_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string realization_jsonl(std::span<const RealizationOutcome> outcomes) {
    std::string out;
    for (const auto& o : outcomes) {
        const auto& r = o.result;
        nlohmann::ordered_json j;
        j["seed"] = r.seed;
        j["total_queries"] = r.total_queries;
        j["final_recommendation"] = r.final_recommendation;
        j["identified"] = r.identified;
        j["accuracy_gap"] = r.accuracy_gap;
        j["final_regret"] = r.final_regret;
        if (r.pool_accuracy_gap) j["pool_accuracy_gap"] = *r.pool_accuracy_gap;
        out += j.dump();
        out += '\n';
    }
    return out;
}

inline constexpr const char* kSummaryHeader =
    "strategy,budget,mean_queries,identification_probability,mean_accuracy_gap,p90_accuracy_gap,mean_regret\n";

inline std::string summary_row(StrategyKind kind, std::uint64_t budget, const MetricsSummary& m) {
    return std::string(to_string(kind)) + ',' + std::to_string(budget) + ',' + fmt_num(m.mean_queries) + ',' +
           fmt_num(m.identification_probability) + ',' + fmt_num(m.mean_accuracy_gap) + ',' +
           fmt_num(m.p90_accuracy_gap) + ',' + fmt_num(m.mean_final_regret) + '\n';
}

inline std::string tuning_csv(const TuningResult& res) {
    std::string out = "beta,mean_queries,sd_queries\n";
    for (const auto& row : res.table)
        out += fmt_num(row.beta) + ',' + fmt_num(row.mean_queries) + ',' + fmt_num(row.sd_queries) + '\n';
    return out;
}

inline nlohmann::ordered_json tuning_json(const TuningResult& res, std::uint64_t budget) {
    nlohmann::ordered_json j;
    j["strategy"] = to_string(res.strategy);
    j["budget"] = budget;
    j["chosen_beta"] = res.chosen_beta;
    j["mean_queries"] = res.mean_queries;
    j["saturated"] = res.saturated;
    j["analytic"] = res.analytic;
    j["monotonicity"] = res.monotonicity;
    return j;
}

// ---------------------------------------------------------------------------
// Experiment configuration

struct ExperimentConfig {
    std::optional<std::string> pool;
    std::string mode = "stochastic";   // stochastic | replay (pool sources)
    std::optional<std::string> synth;  // iid:a,b,... | drift:len:a,b;len:a,b | alternating
    std::uint32_t num_classes = 2;     // synthetic sources
    std::vector<std::string> strategies;
    std::vector<std::uint64_t> budgets;
    std::uint64_t stream_length = 0;
    std::size_t realizations = 500;
    std::size_t tuning_realizations = 100;
    std::uint64_t seed = 1;
    std::size_t parallelism = 1;
    std::string out = "results";
    std::optional<double> beta;
    std::optional<double> grid_min;
    std::optional<double> grid_max;
    std::size_t grid_size = 250;
};

inline void apply_json(ExperimentConfig& c, const nlohmann::json& j) {
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    auto get_opt = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<typename std::decay_t<decltype(field)>::value_type>();
    };
    get_opt("pool", c.pool);
    get("mode", c.mode);
    get_opt("synth", c.synth);
    get("num_classes", c.num_classes);
    get("strategies", c.strategies);
    get("budgets", c.budgets);
    get("stream_length", c.stream_length);
    get("realizations", c.realizations);
    get("tuning_realizations", c.tuning_realizations);
    get("seed", c.seed);
    get("parallelism", c.parallelism);
    get("out", c.out);
    get_opt("beta", c.beta);
    get_opt("grid_min", c.grid_min);
    get_opt("grid_max", c.grid_max);
    get("grid_size", c.grid_size);
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(item);
    return out;
}

inline std::vector<double> parse_doubles(const std::string& s) {
    std::vector<double> out;
    for (const auto& f : split(s, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(f, &used);
        } catch (const std::exception&) {
            throw ConfigError("bad number '" + f + "' in --synth");
        }
        if (used != f.size()) throw ConfigError("bad number '" + f + "' in --synth");
        out.push_back(v);
    }
    return out;
}

}  // namespace detail

// A resolved stream source: produces one stream per realization seed.
struct Source {
    std::optional<PredictionPool> pool;
    StreamSpec spec;
    std::optional<std::vector<double>> pool_accuracies;
    std::size_t k = 0;
    std::uint32_t num_classes = 2;

    StreamFactory factory() const {
        return [this](std::uint64_t seed) {
            StreamSpec s = spec;
            s.seed = seed;
            return make_stream(s, pool ? &*pool : nullptr);
        };
    }
};

inline Source resolve_source(const ExperimentConfig& c) {
    if (c.pool.has_value() == c.synth.has_value()) throw ConfigError("exactly one of --pool or --synth is required");
    Source src;
    StreamSpec& spec = src.spec;
    spec.length = c.stream_length;
    if (c.pool) {
        src.pool = ingest_pool(*c.pool);
        if (c.mode == "stochastic")
            spec.mode = StreamMode::stochastic;
        else if (c.mode == "replay")
            spec.mode = StreamMode::replay;
        else
            throw ConfigError("--mode must be 'stochastic' or 'replay'");
        if (spec.length == 0) throw ConfigError("--stream-length is required");
        if (spec.mode == StreamMode::replay && spec.length > src.pool->size())
            throw ConfigError("replay stream length exceeds pool size");
        src.k = src.pool->k;
        src.num_classes = src.pool->num_classes;
        if (spec.mode == StreamMode::stochastic) src.pool_accuracies = src.pool->accuracies();
        return src;
    }
    const std::string& s = *c.synth;
    spec.num_classes = c.num_classes;
    if (c.num_classes < 2) throw ConfigError("--num-classes must be >= 2");
    if (s == "alternating") {
        spec.mode = StreamMode::alternating;
        spec.num_classes = 2;
        if (spec.length == 0) throw ConfigError("--stream-length is required");
        src.k = 2;
    } else if (s.rfind("iid:", 0) == 0) {
        spec.mode = StreamMode::synthetic_iid;
        spec.accuracies = detail::parse_doubles(s.substr(4));
        if (spec.length == 0) throw ConfigError("--stream-length is required");
        src.k = spec.accuracies.size();
    } else if (s.rfind("drift:", 0) == 0) {
        spec.mode = StreamMode::synthetic_drift;
        std::uint64_t first = 1;
        for (const auto& seg : detail::split(s.substr(6), ';')) {
            const auto colon = seg.find(':');
            if (colon == std::string::npos) throw ConfigError("drift segment must be <length>:<accuracies>");
            std::uint64_t len = 0;
            try {
                len = std::stoull(seg.substr(0, colon));
            } catch (const std::exception&) {
                throw ConfigError("bad drift segment length in '" + seg + "'");
            }
            if (len == 0) throw ConfigError("drift segment length must be >= 1");
            spec.schedule.push_back({first, first + len - 1, detail::parse_doubles(seg.substr(colon + 1))});
            first += len;
        }
        if (spec.schedule.empty()) throw ConfigError("empty drift schedule");
        const std::uint64_t total = first - 1;
        if (spec.length != 0 && spec.length != total)
            throw ConfigError("--stream-length does not match the drift schedule");
        spec.length = total;
        src.k = spec.schedule.front().accuracies.size();
    } else {
        throw ConfigError("unrecognized --synth '" + s + "'");
    }
    src.num_classes = spec.num_classes;
    // Generate once to surface bad parameters as usage errors.
    (void)make_stream(StreamSpec{spec.mode, std::min<std::uint64_t>(spec.length, 1), 0, spec.num_classes,
                                 spec.accuracies, spec.schedule},
                      nullptr);
    return src;
}

inline SamplerConfig base_sampler(const Source& src, std::uint64_t budget) {
    SamplerConfig s;
    s.k = src.k;
    s.num_classes = src.num_classes;
    s.stream_length_hint = src.spec.length;
    s.budget_hint = budget;
    return s;
}

inline TuningSpec tuning_spec(const ExperimentConfig& c, StrategyKind kind, std::uint64_t budget,
                              std::uint64_t stream_length) {
    TuningSpec t;
    t.strategy = kind;
    t.grid = default_grid(kind);
    if (c.grid_min) t.grid.lower = *c.grid_min;
    if (c.grid_max) t.grid.upper = *c.grid_max;
    t.grid_size = c.grid_size;
    t.budget = budget;
    t.stream_length = stream_length;
    t.realizations = c.tuning_realizations;
    t.base_seed = c.seed;
    t.parallelism = c.parallelism;
    return t;
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_validate(const std::string& path, std::ostream& out) {
    const auto pool = ingest_pool(path);
    const auto acc = pool.accuracies();
    const auto [lo, hi] = std::minmax_element(acc.begin(), acc.end());
    nlohmann::ordered_json j;
    j["path"] = path;
    j["instances"] = pool.size();
    j["models"] = pool.k;
    j["num_classes"] = pool.num_classes;
    j["accuracy_min"] = *lo;
    j["accuracy_max"] = *hi;
    j["best_model"] = pool.model_names[static_cast<std::size_t>(hi - acc.begin())];
    out << j.dump(2) << '\n';
    return kExitOk;
}

// Warns when the grid cannot resolve the budget to within 5%.
inline void warn_tuning(const TuningResult& res, std::uint64_t budget, StrategyKind kind, std::ostream& err) {
    if (res.analytic) return;
    const double b = static_cast<double>(budget);
    if (res.saturated)
        err << "warning: " << to_string(kind) << " budget " << budget
            << " not reachable on the grid; using beta = " << res.chosen_beta << '\n';
    else if (std::abs(res.mean_queries - b) > 0.05 * b)
        err << "warning: " << to_string(kind) << " grid too coarse for budget " << budget << "; closest point gives "
            << res.mean_queries << " queries (refine --grid-max or --grid-size)\n";
}

inline int cmd_tune(const ExperimentConfig& c, std::ostream& out, std::ostream& err, bool write_files) {
    if (c.strategies.size() != 1) throw ConfigError("tune takes exactly one --strategy");
    if (c.budgets.size() != 1) throw ConfigError("tune takes exactly one --budget");
    const auto kind = parse_strategy(c.strategies.front());
    const auto src = resolve_source(c);
    const auto budget = c.budgets.front();
    const auto spec = tuning_spec(c, kind, budget, src.spec.length);
    spec.validate();
    const auto res = tune(spec, base_sampler(src, budget), src.factory());
    const auto summary = tuning_json(res, budget);
    if (write_files) {
        const std::filesystem::path dir(c.out);
        const std::string stem = "tuning_" + std::string(to_string(kind)) + "_b" + std::to_string(budget);
        if (!res.analytic) write_atomic(dir / (stem + ".csv"), tuning_csv(res));
        write_atomic(dir / (stem + ".json"), summary.dump(2) + "\n");
    }
    warn_tuning(res, budget, kind, err);
    out << summary.dump(2) << '\n';
    return kExitOk;
}

inline int cmd_run(const ExperimentConfig& c, std::ostream& out, std::ostream& err) {
    if (c.strategies.empty()) throw ConfigError("run needs at least one --strategy");
    if (c.budgets.empty()) throw ConfigError("run needs at least one --budget");
    if (c.realizations == 0) throw ConfigError("--realizations must be >= 1");
    std::vector<StrategyKind> kinds;
    for (const auto& s : c.strategies) kinds.push_back(parse_strategy(s));
    const auto src = resolve_source(c);
    for (auto b : c.budgets)
        if (b > src.spec.length) throw ConfigError("budget " + std::to_string(b) + " exceeds stream length");
    if (c.beta && !(*c.beta >= 0.0)) throw ConfigError("--beta must be >= 0");
    if (!c.beta)
        for (auto kind : kinds) tuning_spec(c, kind, c.budgets.front(), src.spec.length).validate();

    const std::filesystem::path dir(c.out);
    const auto factory = src.factory();
    std::string summary = kSummaryHeader;
    for (auto kind : kinds) {
        for (auto budget : c.budgets) {
            SamplerConfig sampler = base_sampler(src, budget);
            if (kind != StrategyKind::label_efficient) {
                if (c.beta) {
                    sampler.beta = *c.beta;
                } else {
                    const auto res = tune(tuning_spec(c, kind, budget, src.spec.length), sampler, factory);
                    warn_tuning(res, budget, kind, err);
                    sampler.beta = res.chosen_beta;
                }
            }
            if (kind == StrategyKind::label_efficient)
                err << to_string(kind) << " budget " << budget << ": epsilon = "
                    << static_cast<double>(budget) / static_cast<double>(src.spec.length) << '\n';
            else
                err << to_string(kind) << " budget " << budget << ": beta = " << sampler.beta << '\n';
            BatchSpec batch;
            batch.strategy = kind;
            batch.sampler = sampler;
            batch.realizations = c.realizations;
            batch.base_seed = c.seed;
            batch.parallelism = c.parallelism;
            batch.pool_accuracies = src.pool_accuracies ? &*src.pool_accuracies : nullptr;
            const auto outcomes = run_batch(batch, factory);
            write_atomic(dir / (std::string(to_string(kind)) + "_b" + std::to_string(budget) + ".jsonl"),
                         realization_jsonl(outcomes));
            summary += summary_row(kind, budget, summarize(outcomes));
        }
    }
    write_atomic(dir / "summary.csv", summary);
    out << summary;
    return kExitOk;
}

struct TheoryOptions {
    std::string tier = "fast";
    std::optional<std::string> out;
    std::string inject_fault;  // "" | "no-eta-floor"
    std::uint64_t seed = 1;
    std::size_t parallelism = 1;
};

inline int cmd_theory(const TheoryOptions& o, std::ostream& out) {
    const bool full = o.tier == "full";
    if (!full && o.tier != "fast") throw ConfigError("--tier must be 'fast' or 'full'");
    if (!o.inject_fault.empty() && o.inject_fault != "no-eta-floor")
        throw ConfigError("unknown fault '" + o.inject_fault + "'");
    const bool eta_floor = o.inject_fault.empty();
    const std::size_t density = full ? 10000 : 1000;

    nlohmann::ordered_json report;
    report["tier"] = o.tier;
    bool ok = true;
    auto record = [&](const char* name, nlohmann::json j, bool passed) {
        j["passed"] = passed;
        report[name] = j;
        ok = ok && passed;
    };

    const auto regret = reference::check_regret_inequality(density);
    record("regret_inequality", regret.to_json(), regret.passed());
    const auto expb = reference::check_exp_bound(density);
    record("exp_bound", expb.to_json(), expb.passed());

    {
        const auto eq = reference::oracle_equivalence_suite(100, o.seed, eta_floor);
        record("oracle_equivalence", eq.to_json(), eq.passed());
    }
    {
        const std::size_t seeds = 50;
        std::size_t failures = 0;
        double worst_slack = std::numeric_limits<double>::infinity();
        const double acc[] = {0.9, 0.75, 0.6};
        for (std::size_t s = 0; s < seeds; ++s) {
            const auto stream = synth_iid(acc, 3, 100, derive_seed(o.seed, s, kStreamSalt));
            const auto trace = reference::naive_model_picker(stream, 1.0, derive_seed(o.seed, s, 1));
            const auto r = reference::check_mix_loss(trace);
            failures += r.passed ? 0 : 1;
            worst_slack = std::min(worst_slack, r.bound - r.cumulative_mix_loss);
        }
        record("mix_loss", {{"seeds", seeds}, {"failures", failures}, {"min_slack", worst_slack}}, failures == 0);
    }
    {
        // Binary, two models that always disagree: one is right every round.
        const Stream base = synth_iid(std::vector<double>{0.7, 0.5}, 2, 400, o.seed);
        Stream stream(2, 2);
        for (std::size_t i = 0; i < base.length() && stream.length() < 50; ++i)
            if (!all_agree(base.predictions(i))) stream.push(base.predictions(i), base.label(i));
        const auto est = reference::unbiasedness_estimate(stream, 1.0, full ? 100000 : 10000, o.seed);
        record("unbiasedness", est.to_json(), est.within(3.0));
    }
    {
        nlohmann::json rates = nlohmann::json::array();
        bool pass = true;
        for (std::uint64_t T : {200, 400, 800}) {
            BatchSpec batch;
            batch.strategy = StrategyKind::model_picker;
            batch.sampler.eta_floor = eta_floor;
            batch.realizations = full ? 500 : 100;
            batch.base_seed = o.seed;
            batch.parallelism = o.parallelism;
            const auto m = summarize(run_batch(batch, [T](std::uint64_t) { return alternating_stream(T); }));
            const double rate = m.mean_queries / static_cast<double>(T);
            pass = pass && rate >= 0.15;
            rates.push_back({{"T", T}, {"queries_per_round", rate}});
        }
        record("alternating_query_rate", {{"rates", rates}}, pass);
    }
    {
        const auto kl = reference::kl_variance_spot_check(full ? 100000 : 10000, o.seed);
        record("kl_variance", kl.to_json(), kl.passed());
    }
    report["passed"] = ok;
    const std::string text = report.dump(2) + "\n";
    if (o.out) write_atomic(*o.out, text);
    out << text;
    return ok ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------------------
// Entry point

inline std::uint64_t env_seed_or(std::uint64_t fallback) {
    if (const char* s = std::getenv("STREAMPICKER_SEED")) {
        try {
            return std::stoull(s);
        } catch (const std::exception&) {
            throw ConfigError("STREAMPICKER_SEED is not an unsigned integer");
        }
    }
    return fallback;
}

inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Online active model selection: Model Picker and selective-sampling baselines"};
    app.require_subcommand(1);

    // validate
    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Check a prediction-pool CSV and print its statistics");
    validate->add_option("path", validate_path, "Pool CSV file")->required();

    // shared experiment flags for tune / run
    ExperimentConfig cfg;
    std::string config_path;
    std::optional<std::string> pool, synth, mode, outdir;
    std::optional<std::uint32_t> num_classes;
    std::vector<std::string> strategies;
    std::vector<std::uint64_t> budgets;
    std::optional<std::uint64_t> stream_length, seed;
    std::optional<std::size_t> realizations, tuning_realizations, parallelism, grid_size;
    std::optional<double> beta, grid_min, grid_max;
    bool fast = false;

    auto add_experiment_flags = [&](CLI::App* sub, bool is_run) {
        sub->add_option("--config", config_path, "JSON config file; flags override its values");
        sub->add_option("--pool", pool, "Prediction-pool CSV");
        sub->add_option("--mode", mode, "Pool stream mode: stochastic (default) or replay");
        sub->add_option("--synth", synth, "Synthetic source: iid:a1,a2,... | drift:len:a1,..;len:a1,.. | alternating");
        sub->add_option("--num-classes", num_classes, "Classes for synthetic sources (default 2)");
        sub->add_option("--strategy", strategies, "Strategy name (repeatable for run)");
        sub->add_option("--budget", budgets, "Label budget (repeatable for run)");
        sub->add_option("--stream-length", stream_length, "Stream length T");
        sub->add_option("--realizations", realizations, "Evaluation realizations per (strategy, budget)");
        sub->add_option("--tuning-realizations", tuning_realizations, "Realizations per grid point");
        sub->add_option("--seed", seed, "Base seed (falls back to STREAMPICKER_SEED)");
        sub->add_option("--parallelism", parallelism, "Worker threads");
        sub->add_option("--out", outdir, "Output directory");
        sub->add_option("--grid-min", grid_min, "Grid lower bound");
        sub->add_option("--grid-max", grid_max, "Grid upper bound");
        sub->add_option("--grid-size", grid_size, "Number of equally spaced grid points");
        sub->add_flag("--fast", fast, "Small defaults for CI: 50 realizations, grid of 25");
        if (is_run) sub->add_option("--beta", beta, "Use this hyperparameter and skip tuning");
    };
    auto* tune_cmd = app.add_subcommand("tune", "Grid-search a strategy's hyperparameter to match a label budget");
    add_experiment_flags(tune_cmd, false);
    auto* run_cmd = app.add_subcommand("run", "Tune, run realizations and write JSONL + summary CSV");
    add_experiment_flags(run_cmd, true);

    TheoryOptions theory;
    std::optional<std::uint64_t> theory_seed;
    auto* theory_cmd = app.add_subcommand("theory", "Run the numeric checks of the algorithm's guarantees");
    theory_cmd->add_option("--tier", theory.tier, "fast (default) or full");
    theory_cmd->add_option("--out", theory.out, "Also write the JSON report here");
    theory_cmd->add_option("--inject-fault", theory.inject_fault, "Mutation smoke test: no-eta-floor");
    theory_cmd->add_option("--seed", theory_seed, "Base seed");
    theory_cmd->add_option("--parallelism", theory.parallelism, "Worker threads");

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (*validate) return cmd_validate(validate_path, out);
        if (*theory_cmd) {
            theory.seed = theory_seed.value_or(env_seed_or(1));
            return cmd_theory(theory, out);
        }

        cfg.seed = env_seed_or(cfg.seed);
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw ConfigError("cannot open config " + config_path);
            nlohmann::json j;
            try {
                in >> j;
                apply_json(cfg, j);
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError(std::string("config: ") + e.what());
            }
        }
        if (fast) {
            cfg.realizations = 50;
            cfg.grid_size = 25;
            cfg.tuning_realizations = 50;
        }
        if (pool) cfg.pool = pool;
        if (synth) cfg.synth = synth;
        if (mode) cfg.mode = *mode;
        if (num_classes) cfg.num_classes = *num_classes;
        if (!strategies.empty()) cfg.strategies = strategies;
        if (!budgets.empty()) cfg.budgets = budgets;
        if (stream_length) cfg.stream_length = *stream_length;
        if (realizations) cfg.realizations = *realizations;
        if (tuning_realizations) cfg.tuning_realizations = *tuning_realizations;
        if (seed) cfg.seed = *seed;
        if (parallelism) cfg.parallelism = *parallelism;
        if (outdir) cfg.out = *outdir;
        if (beta) cfg.beta = beta;
        if (grid_min) cfg.grid_min = grid_min;
        if (grid_max) cfg.grid_max = grid_max;
        if (grid_size) cfg.grid_size = *grid_size;
        if (cfg.parallelism == 0) throw ConfigError("--parallelism must be >= 1");

        if (*tune_cmd) return cmd_tune(cfg, out, err, outdir.has_value() || !config_path.empty());
        return cmd_run(cfg, out, err);
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {  // ValidationError, ConfigError
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

inline int run(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(std::move(args));
}

}  // namespace streampicker::cli
