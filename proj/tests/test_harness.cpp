#include <streampicker/harness.hpp>

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

namespace sp = streampicker;

namespace {

// Trace whose learner follows a fixed model every round.
sp::RealizationTrace fixed_model_trace(const sp::Stream& s, std::size_t model) {
    sp::RealizationTrace tr;
    for (std::size_t i = 0; i < s.length(); ++i) {
        sp::RoundRecord r;
        r.t = i + 1;
        r.chosen_model = model;
        r.learner_loss = s.correct(i, model) ? 0 : 1;
        tr.rounds.push_back(r);
    }
    tr.final_recommendation = model;
    return tr;
}

sp::Stream constant_stream(std::vector<sp::Label> p, sp::Label y, std::size_t T) {
    sp::Stream s(p.size(), 3);
    for (std::size_t i = 0; i < T; ++i) s.push(p, y);
    return s;
}

// Misbehaving learners for the harness's protocol checks.
class DoubleAsker final : public sp::Strategy {
public:
    explicit DoubleAsker(sp::SamplerConfig c) : Strategy(std::move(c)) {}
    sp::StrategyKind kind() const noexcept override { return sp::StrategyKind::model_picker; }
    sp::RoundOutput step(sp::PredictionView, const sp::LabelOracle& oracle) override {
        oracle();
        oracle();
        return {};
    }
    std::size_t recommend() const override { return 0; }
};

class SilentQuerier final : public sp::Strategy {
public:
    explicit SilentQuerier(sp::SamplerConfig c) : Strategy(std::move(c)) {}
    sp::StrategyKind kind() const noexcept override { return sp::StrategyKind::model_picker; }
    sp::RoundOutput step(sp::PredictionView, const sp::LabelOracle&) override {
        sp::RoundOutput out;
        out.decision = {1.0, true};
        return out;
    }
    std::size_t recommend() const override { return 0; }
};

sp::SamplerConfig config(std::size_t k, double beta, std::uint32_t classes = 2) {
    sp::SamplerConfig c;
    c.k = k;
    c.num_classes = classes;
    c.beta = beta;
    c.stream_length_hint = 400;
    c.budget_hint = 40;
    return c;
}

}  // namespace

TEST(RunRealization, AllAgreeStreamCostsNothing) {
    const auto s = constant_stream({1, 1, 1}, 1, 200);
    sp::ModelPicker mp(config(3, 10.0, 3));
    const auto trace = sp::run_realization(s, mp);
    EXPECT_EQ(trace.total_queries, 0u);
    const auto curve = sp::regret_curve(trace, s);
    for (double r : curve) EXPECT_EQ(r, 0.0);
}

TEST(RunRealization, Deterministic) {
    const auto s = sp::synth_iid(std::vector<double>{0.8, 0.7, 0.6}, 3, 500, 2);
    auto c = config(3, 1.0, 3);
    c.seed = 99;
    sp::ModelPicker a(c), b(c);
    const auto ta = sp::run_realization(s, a, 99);
    const auto tb = sp::run_realization(s, b, 99);
    ASSERT_EQ(ta.rounds.size(), 500u);
    for (std::size_t i = 0; i < ta.rounds.size(); ++i) {
        EXPECT_EQ(ta.rounds[i].chosen_model, tb.rounds[i].chosen_model);
        EXPECT_EQ(ta.rounds[i].queried, tb.rounds[i].queried);
        EXPECT_EQ(ta.rounds[i].query_probability, tb.rounds[i].query_probability);
        EXPECT_EQ(ta.rounds[i].recommendation, tb.rounds[i].recommendation);
        EXPECT_EQ(ta.rounds[i].t, i + 1);
    }
    EXPECT_EQ(ta.total_queries, tb.total_queries);
    EXPECT_EQ(ta.seed, 99u);
}

TEST(RunRealization, ProtocolViolationsDetected) {
    const auto s = sp::synth_iid(std::vector<double>{0.8, 0.7}, 2, 10, 2);
    DoubleAsker d(config(2, 1.0));
    EXPECT_THROW(sp::run_realization(s, d), std::logic_error);
    SilentQuerier q(config(2, 1.0));
    EXPECT_THROW(sp::run_realization(s, q), std::logic_error);
    sp::ModelPicker three(config(3, 1.0));
    EXPECT_THROW(sp::run_realization(s, three), std::invalid_argument);
}

TEST(RunRealization, LearnerLossMatchesChosenModel) {
    const auto s = sp::synth_iid(std::vector<double>{0.8, 0.7, 0.5}, 4, 300, 6);
    for (auto kind : sp::kAllStrategies) {
        auto strategy = sp::make_strategy(kind, config(3, kind == sp::StrategyKind::efal ? 1e-3 : 1.0, 4));
        const auto trace = sp::run_realization(s, *strategy);
        std::uint64_t queries = 0;
        for (std::size_t i = 0; i < s.length(); ++i) {
            const auto& r = trace.rounds[i];
            EXPECT_EQ(r.learner_loss, s.correct(i, r.chosen_model) ? 0 : 1);
            queries += r.queried;
        }
        EXPECT_EQ(queries, trace.total_queries);
    }
}

// ---------------------------------------------------------------------------
// Metrics

TEST(RegretCurve, HindsightBestGivesZero) {
    const auto s = sp::synth_iid(std::vector<double>{0.7, 0.8, 0.6}, 3, 400, 4);
    const auto best = sp::stream_best_model(s, s.length()).index;
    const auto curve = sp::regret_curve(fixed_model_trace(s, best), s);
    EXPECT_EQ(curve.back(), 0.0);
    for (double r : curve) EXPECT_GE(r, 0.0);
}

TEST(RegretCurve, AlwaysWrongAgainstPerfectModel) {
    const auto s = constant_stream({0, 1}, 0, 25);
    const auto curve = sp::regret_curve(fixed_model_trace(s, 1), s);
    for (std::size_t t = 0; t < curve.size(); ++t) EXPECT_EQ(curve[t], static_cast<double>(t + 1));
}

TEST(RegretCurve, AlternatingFixedModel) {
    const auto s = sp::alternating_stream(10);
    const auto curve = sp::regret_curve(fixed_model_trace(s, 0), s);
    EXPECT_EQ(curve.back(), 0.0);
    EXPECT_EQ(curve.front(), 1.0);
}

TEST(RegretCurve, LengthMismatch) {
    const auto s = sp::alternating_stream(10);
    auto tr = fixed_model_trace(s, 0);
    tr.rounds.pop_back();
    EXPECT_THROW(sp::regret_curve(tr, s), std::invalid_argument);
}

TEST(AccuracyGap, Definition) {
    // Model 0 right on 9 of 10 rounds, model 1 on 6.
    sp::Stream s(2, 2);
    for (int i = 0; i < 10; ++i) {
        const sp::Label p[2] = {static_cast<sp::Label>(i < 9 ? 0 : 1), static_cast<sp::Label>(i < 6 ? 0 : 1)};
        s.push(p, 0);
    }
    EXPECT_NEAR(sp::accuracy_gap(fixed_model_trace(s, 1), s), 0.3, 1e-15);
    EXPECT_EQ(sp::accuracy_gap(fixed_model_trace(s, 0), s), 0.0);
    EXPECT_TRUE(sp::identified(fixed_model_trace(s, 0), s));
    EXPECT_FALSE(sp::identified(fixed_model_trace(s, 1), s));

    const auto tie = sp::alternating_stream(10);
    EXPECT_EQ(sp::accuracy_gap(fixed_model_trace(tie, 1), tie), 0.0);
    EXPECT_TRUE(sp::identified(fixed_model_trace(tie, 1), tie));
}

TEST(Percentile, NearestRank) {
    std::vector<double> gaps(9, 0.0);
    gaps.push_back(0.5);
    EXPECT_EQ(sp::nearest_rank_percentile(gaps, 90), 0.0);
    EXPECT_EQ(sp::nearest_rank_percentile(std::vector<double>(7, 0.0), 90), 0.0);
    std::vector<double> ramp;
    for (int i = 100; i >= 1; --i) ramp.push_back(i);
    EXPECT_EQ(sp::nearest_rank_percentile(ramp, 90), 90.0);
    EXPECT_EQ(sp::nearest_rank_percentile(ramp, 100), 100.0);
    EXPECT_EQ(sp::nearest_rank_percentile({3.0}, 1), 3.0);
    EXPECT_EQ(sp::nearest_rank_percentile({1.0, 2.0, 3.0}, 50), 2.0);
    EXPECT_THROW(sp::nearest_rank_percentile({}, 90), std::invalid_argument);
    EXPECT_THROW(sp::nearest_rank_percentile({1.0}, 0), std::invalid_argument);
}

TEST(Summarize, IdentificationProbabilityAndMeans) {
    std::vector<sp::RealizationOutcome> outcomes(500);
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        auto& o = outcomes[i];
        o.result.identified = i < 450;
        o.result.accuracy_gap = i < 450 ? 0.0 : 0.1;
        o.result.total_queries = i % 2 == 0 ? 10 : 20;
        o.regret_curve = {1.0, static_cast<double>(i % 3)};
    }
    const auto m = sp::summarize(outcomes);
    EXPECT_DOUBLE_EQ(m.identification_probability, 0.9);
    EXPECT_NEAR(m.mean_accuracy_gap, 0.01, 1e-15);
    EXPECT_EQ(m.p90_accuracy_gap, 0.0);
    EXPECT_DOUBLE_EQ(m.mean_queries, 15.0);
    EXPECT_NEAR(m.sd_queries, std::sqrt(25.0 * 500.0 / 499.0), 1e-9);
    EXPECT_DOUBLE_EQ(m.mean_regret_curve[0], 1.0);
    EXPECT_NEAR(m.mean_final_regret, (167.0 * 0 + 167.0 * 1 + 166.0 * 2) / 500.0, 1e-12);
    EXPECT_FALSE(m.mean_pool_accuracy_gap.has_value());
    EXPECT_EQ(m.realizations, 500u);
}

TEST(Summarize, Errors) {
    EXPECT_THROW(sp::summarize(std::vector<sp::RealizationOutcome>{}), std::invalid_argument);
    std::vector<sp::RealizationOutcome> ragged(2);
    ragged[0].regret_curve = {0.0, 1.0};
    ragged[1].regret_curve = {0.0};
    EXPECT_THROW(sp::summarize(ragged), std::invalid_argument);
}

TEST(Evaluate, PoolAccuracyGap) {
    const auto s = sp::synth_iid(std::vector<double>{0.9, 0.6}, 2, 100, 3);
    const std::vector<double> pool_acc{0.85, 0.55};
    const auto o = sp::evaluate(fixed_model_trace(s, 1), s, &pool_acc);
    ASSERT_TRUE(o.result.pool_accuracy_gap.has_value());
    EXPECT_NEAR(*o.result.pool_accuracy_gap, 0.3, 1e-15);
    EXPECT_EQ(o.regret_curve.size(), 100u);
    EXPECT_EQ(o.result.final_regret, o.regret_curve.back());
}

// ---------------------------------------------------------------------------
// Instance hardness

TEST(InstanceHardness, TwoModels) {
    const auto h = sp::instance_hardness(std::vector<double>{0.9, 0.6}, 2);
    EXPECT_EQ(h.best, 0u);
    EXPECT_NEAR(h.delta, 0.3, 1e-15);
    EXPECT_NEAR(h.disagreement[1], 0.42, 1e-15);
    ASSERT_TRUE(h.lambda.has_value());
    EXPECT_NEAR(*h.lambda, 0.214285714285714286, 1e-15);
    EXPECT_TRUE(h.unique_best);
}

TEST(InstanceHardness, TiesAndThreeModels) {
    const auto tie = sp::instance_hardness(std::vector<double>{0.9, 0.9}, 2);
    EXPECT_FALSE(tie.unique_best);
    EXPECT_FALSE(tie.lambda.has_value());

    const auto three = sp::instance_hardness(std::vector<double>{0.9, 0.6, 0.6}, 2);
    ASSERT_TRUE(three.lambda.has_value());
    EXPECT_NEAR(*three.lambda, 0.214285714285714286, 1e-15);
    EXPECT_THROW(sp::instance_hardness(std::vector<double>{0.9}, 2), std::invalid_argument);
    EXPECT_THROW(sp::instance_hardness(std::vector<double>{0.9, 1.2}, 2), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Batches

TEST(ParallelFor, VisitsEveryIndexOnce) {
    for (std::size_t workers : {1u, 3u, 16u}) {
        std::vector<std::atomic<int>> hits(100);
        sp::parallel_for(100, workers, [&](std::size_t i) { ++hits[i]; });
        for (auto& h : hits) EXPECT_EQ(h.load(), 1);
    }
}

TEST(ParallelFor, RethrowsLowestFailingIndex) {
    try {
        sp::parallel_for(50, 1, [](std::size_t i) {
            if (i == 7 || i == 30) throw std::runtime_error("boom " + std::to_string(i));
        });
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_STREQ(e.what(), "boom 7");
    }
}

TEST(RunBatch, ParallelismDoesNotChangeResults) {
    const std::vector<double> acc{0.85, 0.8, 0.7, 0.6};
    const sp::StreamFactory make = [&](std::uint64_t seed) { return sp::synth_iid(acc, 3, 300, seed); };
    for (auto kind : sp::kAllStrategies) {
        sp::BatchSpec spec;
        spec.strategy = kind;
        spec.sampler = config(4, kind == sp::StrategyKind::efal ? 1e-3 : 0.8, 3);
        spec.sampler.stream_length_hint = 300;
        spec.realizations = 12;
        spec.base_seed = 5;
        spec.parallelism = 1;
        const auto serial = sp::run_batch(spec, make);
        spec.parallelism = 4;
        const auto parallel = sp::run_batch(spec, make);
        ASSERT_EQ(serial.size(), parallel.size());
        for (std::size_t r = 0; r < serial.size(); ++r) {
            EXPECT_EQ(serial[r].result.seed, parallel[r].result.seed);
            EXPECT_EQ(serial[r].result.seed, sp::strategy_seed(5, r, kind));
            EXPECT_EQ(serial[r].result.total_queries, parallel[r].result.total_queries);
            EXPECT_EQ(serial[r].result.final_recommendation, parallel[r].result.final_recommendation);
            EXPECT_EQ(serial[r].regret_curve, parallel[r].regret_curve);
        }
    }
}

TEST(RunBatch, SeedsAreDistinctAcrossRealizationsAndStrategies) {
    EXPECT_NE(sp::stream_seed(1, 0), sp::stream_seed(1, 1));
    EXPECT_NE(sp::strategy_seed(1, 0, sp::StrategyKind::sqbc), sp::strategy_seed(1, 0, sp::StrategyKind::iwal));
    EXPECT_NE(sp::stream_seed(1, 0), sp::strategy_seed(1, 0, sp::StrategyKind::model_picker));
}

TEST(RunBatch, ErrorsNameTheRealization) {
    sp::BatchSpec spec;
    spec.sampler = config(3, 1.0);
    spec.realizations = 3;
    const sp::StreamFactory make = [](std::uint64_t) { return sp::alternating_stream(5); };  // k = 2 != 3
    try {
        sp::run_batch(spec, make);
        FAIL();
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("model_picker realization 0"), std::string::npos) << msg;
        EXPECT_NE(msg.find("seed"), std::string::npos);
    }
}
