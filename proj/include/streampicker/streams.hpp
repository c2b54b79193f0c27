// streams.hpp
//
// Prediction pools (N instances x k models + true labels), CSV ingestion and
// stream construction: i.i.d. resampling of a pool, in-order replay, and
// synthetic generators.
#pragma once
#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "rng.hpp"

namespace streampicker {

// Malformed input file. Carries the 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Well-formed input that breaks a pool invariant.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Row-major N x k prediction matrix plus the N true labels.
struct PredictionPool {
    std::size_t k = 0;
    std::uint32_t num_classes = 0;
    std::vector<Label> predictions;
    std::vector<Label> labels;
    std::vector<std::string> model_names;

    std::size_t size() const noexcept { return labels.size(); }
    PredictionView row(std::size_t i) const { return {predictions.data() + i * k, k}; }

    std::vector<double> accuracies() const {
        std::vector<double> acc(k, 0.0);
        for (std::size_t i = 0; i < size(); ++i)
            for (std::size_t j = 0; j < k; ++j) acc[j] += predictions[i * k + j] == labels[i] ? 1.0 : 0.0;
        for (double& a : acc) a /= static_cast<double>(size());
        return acc;
    }

    void validate() const {
        if (k < 2) throw ValidationError("pool must contain at least two models (k >= 2)");
        if (labels.empty()) throw ValidationError("pool must contain at least one instance (N >= 1)");
        if (num_classes < 2) throw ValidationError("num_classes must be >= 2");
        if (predictions.size() != labels.size() * k)
            throw ValidationError("prediction matrix is not N x k");
        if (model_names.size() != k) throw ValidationError("model_names must have one entry per model");
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] >= num_classes)
                throw ValidationError("instance " + std::to_string(i) + ": label id >= num_classes");
            for (std::size_t j = 0; j < k; ++j)
                if (predictions[i * k + j] >= num_classes)
                    throw ValidationError("instance " + std::to_string(i) + ", model " + std::to_string(j) +
                                          ": class id >= num_classes");
        }
    }
};

// A realized stream: T rounds of predictions and true labels.
class Stream {
public:
    Stream() = default;
    Stream(std::size_t k, std::uint32_t num_classes) : k_(k), num_classes_(num_classes) {}

    std::size_t k() const noexcept { return k_; }
    std::uint32_t num_classes() const noexcept { return num_classes_; }
    std::size_t length() const noexcept { return labels_.size(); }

    // Rounds are 0-based here; round t of the game is index t - 1.
    PredictionView predictions(std::size_t index) const { return {predictions_.data() + index * k_, k_}; }
    Label label(std::size_t index) const { return labels_.at(index); }
    std::optional<std::size_t> pool_index(std::size_t index) const {
        if (pool_index_.empty()) return std::nullopt;
        return pool_index_[index];
    }
    const std::vector<std::size_t>& pool_indices() const noexcept { return pool_index_; }

    bool correct(std::size_t index, std::size_t model) const {
        return predictions_[index * k_ + model] == labels_[index];
    }

    void push(PredictionView p, Label label, std::optional<std::size_t> pool_index = std::nullopt) {
        if (p.size() != k_) throw std::invalid_argument("Stream::push: prediction length != k");
        predictions_.insert(predictions_.end(), p.begin(), p.end());
        labels_.push_back(label);
        if (pool_index) pool_index_.push_back(*pool_index);
    }

    void reserve(std::size_t n) {
        predictions_.reserve(n * k_);
        labels_.reserve(n);
    }

    friend bool operator==(const Stream&, const Stream&) = default;

private:
    std::size_t k_ = 0;
    std::uint32_t num_classes_ = 0;
    std::vector<Label> predictions_;
    std::vector<Label> labels_;
    std::vector<std::size_t> pool_index_;
};

// ---------------------------------------------------------------------------
// Ingestion

namespace detail {

inline Label parse_id(std::string_view field, std::size_t line) {
    if (field.empty()) throw ParseError(line, "empty field");
    std::uint64_t v = 0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, v, 10);
    if (ec != std::errc{} || ptr != last)
        throw ParseError(line, "expected a non-negative base-10 integer, got '" + std::string(field) + "'");
    if (v > 0xffffffffULL) throw ParseError(line, "class id out of range");
    return static_cast<Label>(v);
}

inline std::vector<std::string_view> split_commas(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

}  // namespace detail

struct PoolMetadata {
    std::optional<std::uint32_t> num_classes;
    std::optional<std::vector<std::string>> model_names;
};

// Parses the pool CSV format:
//   label,model_0,...,model_{k-1}\n
//   <label>,<pred_0>,...,<pred_{k-1}>\n ...
// num_classes defaults to 1 + the largest id seen.
inline PredictionPool parse_pool(std::istream& in, const PoolMetadata& meta = {}) {
    std::string line;
    auto next_line = [&] {
        if (!std::getline(in, line)) return false;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    };
    if (!next_line()) throw ParseError(1, "missing header row");
    const auto header = detail::split_commas(line);
    if (header.empty() || header[0] != "label") throw ParseError(1, "header must start with 'label'");

    PredictionPool pool;
    pool.k = header.size() - 1;
    if (pool.k < 2) throw ValidationError("pool must contain at least two models (k >= 2), found " +
                                          std::to_string(pool.k));
    for (std::size_t j = 1; j < header.size(); ++j) {
        if (header[j].empty()) throw ParseError(1, "empty model name in header");
        pool.model_names.emplace_back(header[j]);
    }

    Label max_id = 0;
    std::size_t line_no = 1;
    bool saw_blank = false;
    while (next_line()) {
        ++line_no;
        if (line.empty()) {
            saw_blank = true;
            continue;
        }
        if (saw_blank) throw ParseError(line_no - 1, "blank line inside data");
        const auto fields = detail::split_commas(line);
        if (fields.size() != pool.k + 1)
            throw ParseError(line_no, "expected " + std::to_string(pool.k + 1) + " fields, found " +
                                          std::to_string(fields.size()));
        const Label y = detail::parse_id(fields[0], line_no);
        pool.labels.push_back(y);
        max_id = std::max(max_id, y);
        for (std::size_t j = 1; j < fields.size(); ++j) {
            const Label p = detail::parse_id(fields[j], line_no);
            pool.predictions.push_back(p);
            max_id = std::max(max_id, p);
        }
    }
    if (pool.labels.empty()) throw ValidationError("pool must contain at least one instance (N >= 1)");

    pool.num_classes = meta.num_classes.value_or(max_id + 1);
    if (meta.model_names) {
        if (meta.model_names->size() != pool.k)
            throw ValidationError("metadata model_names has " + std::to_string(meta.model_names->size()) +
                                  " entries, pool has k = " + std::to_string(pool.k));
        pool.model_names = *meta.model_names;
    }
    pool.validate();
    return pool;
}

// Sidecar metadata lives next to the CSV with a .json extension
// (pool.csv -> pool.json): { "num_classes": int, "model_names": [str] }.
inline std::filesystem::path metadata_path(const std::filesystem::path& csv) {
    auto p = csv;
    p.replace_extension(".json");
    return p;
}

inline PredictionPool ingest_pool(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open pool file: " + path.string());

    PoolMetadata meta;
    const auto side = metadata_path(path);
    if (side != path && std::filesystem::exists(side)) {
        std::ifstream ms(side);
        nlohmann::json j;
        try {
            ms >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("metadata " + side.string() + ": " + e.what());
        }
        if (j.contains("num_classes")) {
            const auto n = j.at("num_classes").get<std::int64_t>();
            if (n < 2) throw ValidationError("metadata num_classes must be >= 2");
            meta.num_classes = static_cast<std::uint32_t>(n);
        }
        if (j.contains("model_names")) meta.model_names = j.at("model_names").get<std::vector<std::string>>();
    }
    return parse_pool(in, meta);
}

inline void write_pool_csv(std::ostream& out, const PredictionPool& pool) {
    out << "label";
    for (const auto& name : pool.model_names) out << ',' << name;
    out << '\n';
    for (std::size_t i = 0; i < pool.size(); ++i) {
        out << pool.labels[i];
        for (std::size_t j = 0; j < pool.k; ++j) out << ',' << pool.predictions[i * pool.k + j];
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Stream construction

enum class StreamMode { stochastic, replay, synthetic_iid, synthetic_drift, alternating };

// Rounds [first, last], 1-based and inclusive.
struct DriftSegment {
    std::uint64_t first = 1;
    std::uint64_t last = 1;
    std::vector<double> accuracies;
};

struct StreamSpec {
    StreamMode mode = StreamMode::stochastic;
    std::uint64_t length = 0;
    std::uint64_t seed = 0;
    std::uint32_t num_classes = 2;          // synthetic modes only
    std::vector<double> accuracies;         // synthetic_iid
    std::vector<DriftSegment> schedule;     // synthetic_drift
};

// Uniform i.i.d. draws with replacement (stochastic) or rows 0..T-1 (replay).
inline Stream draw_stream(const PredictionPool& pool, const StreamSpec& spec) {
    if (spec.length < 1) throw std::invalid_argument("draw_stream: length must be >= 1");
    Stream s(pool.k, pool.num_classes);
    s.reserve(spec.length);
    switch (spec.mode) {
        case StreamMode::stochastic: {
            Rng rng(spec.seed);
            for (std::uint64_t t = 0; t < spec.length; ++t) {
                const auto i = static_cast<std::size_t>(rng.below(pool.size()));
                s.push(pool.row(i), pool.labels[i], i);
            }
            break;
        }
        case StreamMode::replay:
            if (spec.length > pool.size())
                throw std::invalid_argument("draw_stream: replay length exceeds pool size");
            for (std::size_t i = 0; i < spec.length; ++i) s.push(pool.row(i), pool.labels[i], i);
            break;
        default:
            throw std::invalid_argument("draw_stream: mode requires a synthetic generator, not a pool");
    }
    return s;
}

namespace detail {

inline void check_accuracies(std::span<const double> acc) {
    if (acc.size() < 2) throw std::invalid_argument("synthetic stream needs at least two models");
    for (double a : acc)
        if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("model accuracy must lie in (0, 1)");
}

// One synthetic round: uniform true label; model i is right w.p. acc[i],
// otherwise predicts a uniformly chosen wrong class. Errors independent.
inline void synth_round(Stream& s, std::span<const double> acc, std::uint32_t num_classes, Rng& rng,
                        std::vector<Label>& scratch) {
    const auto y = static_cast<Label>(rng.below(num_classes));
    for (std::size_t i = 0; i < acc.size(); ++i) {
        if (rng.uniform() < acc[i]) {
            scratch[i] = y;
        } else {
            auto wrong = static_cast<Label>(rng.below(num_classes - 1));
            scratch[i] = wrong >= y ? wrong + 1 : wrong;
        }
    }
    s.push(scratch, y);
}

}  // namespace detail

inline Stream synth_iid(std::span<const double> accuracies, std::uint32_t num_classes, std::uint64_t length,
                        std::uint64_t seed) {
    detail::check_accuracies(accuracies);
    if (num_classes < 2) throw std::invalid_argument("synth_iid: num_classes must be >= 2");
    if (length < 1) throw std::invalid_argument("synth_iid: length must be >= 1");
    Stream s(accuracies.size(), num_classes);
    s.reserve(length);
    Rng rng(seed);
    std::vector<Label> scratch(accuracies.size());
    for (std::uint64_t t = 0; t < length; ++t) detail::synth_round(s, accuracies, num_classes, rng, scratch);
    return s;
}

// Piecewise synth_iid. Segments must tile [1, T] in order with no gaps.
inline Stream synth_drift(std::span<const DriftSegment> schedule, std::uint32_t num_classes, std::uint64_t seed) {
    if (schedule.empty()) throw std::invalid_argument("synth_drift: empty schedule");
    if (num_classes < 2) throw std::invalid_argument("synth_drift: num_classes must be >= 2");
    const std::size_t k = schedule.front().accuracies.size();
    std::uint64_t expected_first = 1;
    for (const auto& seg : schedule) {
        if (seg.first != expected_first)
            throw std::invalid_argument("synth_drift: segments overlap or leave a gap at round " +
                                        std::to_string(expected_first));
        if (seg.last < seg.first) throw std::invalid_argument("synth_drift: empty segment");
        if (seg.accuracies.size() != k) throw std::invalid_argument("synth_drift: inconsistent model count");
        detail::check_accuracies(seg.accuracies);
        expected_first = seg.last + 1;
    }
    Stream s(k, num_classes);
    s.reserve(expected_first - 1);
    Rng rng(seed);
    std::vector<Label> scratch(k);
    for (const auto& seg : schedule)
        for (std::uint64_t t = seg.first; t <= seg.last; ++t)
            detail::synth_round(s, seg.accuracies, num_classes, rng, scratch);
    return s;
}

// Two models, binary labels, loss sequence (1,0), (0,1), (1,0), ...:
// the second model is right on odd rounds, the first on even rounds.
inline Stream alternating_stream(std::uint64_t length) {
    if (length < 1) throw std::invalid_argument("alternating_stream: length must be >= 1");
    Stream s(2, 2);
    s.reserve(length);
    const Label odd[2] = {1, 0};
    const Label even[2] = {0, 1};
    for (std::uint64_t t = 1; t <= length; ++t) s.push(t % 2 == 1 ? PredictionView(odd) : PredictionView(even), 0);
    return s;
}

// Dispatch on spec.mode. pool may be null for synthetic modes.
inline Stream make_stream(const StreamSpec& spec, const PredictionPool* pool) {
    switch (spec.mode) {
        case StreamMode::stochastic:
        case StreamMode::replay:
            if (!pool) throw std::invalid_argument("stochastic/replay streams require a pool");
            return draw_stream(*pool, spec);
        case StreamMode::synthetic_iid:
            return synth_iid(spec.accuracies, spec.num_classes, spec.length, spec.seed);
        case StreamMode::synthetic_drift:
            return synth_drift(spec.schedule, spec.num_classes, spec.seed);
        case StreamMode::alternating:
            return alternating_stream(spec.length);
    }
    throw std::invalid_argument("unknown stream mode");
}

struct BestModel {
    std::size_t index = 0;
    double accuracy = 0.0;
    // (model, accuracy) sorted by accuracy descending, then index ascending.
    std::vector<std::pair<std::size_t, double>> ranking;
};

inline std::vector<std::uint64_t> correct_counts(const Stream& s, std::uint64_t upto) {
    std::vector<std::uint64_t> correct(s.k(), 0);
    for (std::size_t t = 0; t < upto; ++t)
        for (std::size_t j = 0; j < s.k(); ++j) correct[j] += s.correct(t, j) ? 1 : 0;
    return correct;
}

// Most accurate model on rounds 1..upto (lowest index on ties).
inline BestModel stream_best_model(const Stream& s, std::uint64_t upto) {
    if (upto == 0) throw std::invalid_argument("stream_best_model: upto must be >= 1");
    if (upto > s.length()) throw std::invalid_argument("stream_best_model: upto exceeds stream length");
    const auto correct = correct_counts(s, upto);
    BestModel best;
    for (std::size_t j = 0; j < s.k(); ++j)
        best.ranking.emplace_back(j, static_cast<double>(correct[j]) / static_cast<double>(upto));
    std::stable_sort(best.ranking.begin(), best.ranking.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    best.index = best.ranking.front().first;
    best.accuracy = best.ranking.front().second;
    return best;
}

}  // namespace streampicker
