// SPDX-License-Identifier: Apache-2.0
//
// Datasets: event ingestion and windowing, imputation, min-max normalization,
// the synthetic generator with planted importance schedules, and the on-disk
// dataset container.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "titv/model.hpp"
#include "titv/util.hpp"

namespace titv {

// ---------------------------------------------------------------------------
// Core types

class FeatureMap {
public:
    FeatureMap() = default;
    explicit FeatureMap(std::vector<std::string> names) : names_(std::move(names)) {
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (!index_.emplace(names_[i], i).second) throw ConfigError("duplicate feature name '" + names_[i] + "'");
        }
    }

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(std::size_t i) const { return names_.at(i); }

    std::optional<std::size_t> find(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t index(const std::string& name) const {
        if (auto i = find(name)) return *i;
        throw LookupError("unknown feature '" + name + "'");
    }

    bool operator==(const FeatureMap& o) const { return names_ == o.names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct Sample {
    std::string id;
    Tensor x;                        // T x D, row t = window t (oldest first)
    std::vector<std::uint8_t> mask;  // T*D, 1 = observed
    double label = 0.0;

    bool operator==(const Sample&) const = default;
};

/// Per-feature statistics of observed cells in the fitting split.
struct NormalizationStats {
    std::vector<double> min, max, mean;
    std::vector<std::uint8_t> observed; // 0 if the feature never appears in the fitting split

    bool operator==(const NormalizationStats&) const = default;
};

enum class Schedule { constant, ramp, spike };

inline std::string_view to_string(Schedule s) {
    switch (s) {
    case Schedule::constant: return "constant";
    case Schedule::ramp: return "ramp";
    case Schedule::spike: return "spike";
    }
    return "constant";
}

inline Schedule parse_schedule(std::string_view s) {
    if (s == "constant") return Schedule::constant;
    if (s == "ramp") return Schedule::ramp;
    if (s == "spike") return Schedule::spike;
    throw ConfigError("unknown schedule '" + std::string(s) + "' (allowed: constant, ramp, spike)");
}

/// m(t) for window t in [0, T). Every schedule peaks at magnitude 1.
/// ramp rises linearly from -1 to 1; spike is 1 at window T/2 and 0 elsewhere.
inline double schedule_value(Schedule s, std::size_t t, std::size_t windows) {
    switch (s) {
    case Schedule::constant: return 1.0;
    case Schedule::ramp:
        if (windows == 1) return 1.0;
        return -1.0 + 2.0 * static_cast<double>(t) / static_cast<double>(windows - 1);
    case Schedule::spike: return t == windows / 2 ? 1.0 : 0.0;
    }
    return 0.0;
}

/// Planted truth recorded alongside synthetic datasets.
struct GroundTruth {
    std::vector<double> weights;     // g_d
    std::vector<Schedule> schedules; // m_d
    double noise = 0.0;
    double scale = 1.0;
    std::uint64_t seed = 0;

    /// g_d * m_d(t) as a T x D matrix: the signed planted importance of x_{t,d}.
    Tensor importance(std::size_t windows) const {
        Tensor m = Tensor::zeros(windows, weights.size());
        for (std::size_t t = 0; t < windows; ++t)
            for (std::size_t d = 0; d < weights.size(); ++d) m(t, d) = weights[d] * schedule_value(schedules[d], t, windows);
        return m;
    }

    bool operator==(const GroundTruth&) const = default;
};

struct Dataset {
    Task task = Task::classification;
    std::size_t windows = 1;
    FeatureMap features;
    std::vector<Sample> samples;
    std::optional<NormalizationStats> normalization; // set once the dataset has been prepared
    std::optional<GroundTruth> ground_truth;

    std::size_t feature_count() const { return features.size(); }

    std::size_t sample_index(const std::string& id) const {
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (samples[i].id == id) return i;
        throw LookupError("unknown sample id '" + id + "'");
    }

    bool operator==(const Dataset&) const = default;
};

// ---------------------------------------------------------------------------
// Event ingestion

struct RawEvent {
    std::string entity_id;
    std::int64_t timestamp = 0; // seconds since epoch
    std::string feature;
    double value = 0.0;
};

struct WindowSpec {
    std::int64_t feature_window_length = 0; // seconds
    std::int64_t window_length = 0;         // seconds

    std::size_t window_count() const {
        if (window_length <= 0 || feature_window_length <= 0) {
            throw ConfigError("window spec: lengths must be positive");
        }
        if (feature_window_length % window_length != 0) {
            throw ConfigError("window spec: feature window " + std::to_string(feature_window_length) +
                              "s is not a whole number of " + std::to_string(window_length) + "s windows");
        }
        return static_cast<std::size_t>(feature_window_length / window_length);
    }
};

struct Windowed {
    Tensor x;
    std::vector<std::uint8_t> mask;
};

/// Averages events per (window, feature). Windows are half-open
/// [start + t*len, start + (t+1)*len), so a timestamp on an edge belongs to
/// the later window. Unobserved cells are left at 0 with a clear mask bit.
inline Windowed windowize(std::span<const RawEvent> events, const WindowSpec& spec, std::int64_t window_start,
                          const FeatureMap& features) {
    const std::size_t n = spec.window_count(), d = features.size();
    std::vector<std::vector<double>> cells(n * d);
    const std::int64_t end = window_start + spec.feature_window_length;
    for (const RawEvent& e : events) {
        auto idx = features.find(e.feature);
        if (!idx) throw IngestionError("unknown feature name '" + e.feature + "' in events of entity " + e.entity_id);
        if (e.timestamp < window_start || e.timestamp >= end) {
            throw IngestionError("event of entity " + e.entity_id + " at t=" + std::to_string(e.timestamp) +
                                 " lies outside its feature window [" + std::to_string(window_start) + ", " +
                                 std::to_string(end) + ")");
        }
        if (!std::isfinite(e.value)) throw IngestionError("non-finite value for entity " + e.entity_id);
        const auto t = static_cast<std::size_t>((e.timestamp - window_start) / spec.window_length);
        cells[t * d + *idx].push_back(e.value);
    }
    Windowed w{Tensor::zeros(n, d), std::vector<std::uint8_t>(n * d, 0)};
    for (std::size_t i = 0; i < n * d; ++i) {
        auto& vals = cells[i];
        if (vals.empty()) continue;
        // Sorted summation makes the mean independent of event order.
        std::sort(vals.begin(), vals.end());
        double sum = 0.0;
        for (double v : vals) sum += v;
        w.x[i] = sum / static_cast<double>(vals.size());
        w.mask[i] = 1;
    }
    return w;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

} // namespace detail

/// Parses the event CSV (`entity_id,timestamp,feature,value`).
inline std::vector<RawEvent> read_events_csv(std::istream& in, const std::string& source = "events") {
    std::string line;
    if (!std::getline(in, line)) throw FormatError(source + ": empty event file");
    if (detail::strip_cr(line) != "entity_id,timestamp,feature,value") {
        throw FormatError(source + ": expected header 'entity_id,timestamp,feature,value'");
    }
    std::vector<RawEvent> events;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != 4) {
            throw FormatError(source + ":" + std::to_string(lineno) + ": expected 4 fields, got " +
                              std::to_string(cells.size()));
        }
        RawEvent e;
        e.entity_id = cells[0];
        e.feature = cells[2];
        try {
            e.timestamp = parse_int(cells[1]);
            e.value = parse_double(cells[3]);
        } catch (const FormatError& err) {
            throw FormatError(source + ":" + std::to_string(lineno) + ": " + err.what());
        }
        events.push_back(std::move(e));
    }
    return events;
}

struct LabelRow {
    std::string entity_id;
    double label = 0.0;
    std::int64_t window_start = 0;
};

/// Parses the label CSV (`entity_id,label,window_start`).
inline std::vector<LabelRow> read_labels_csv(std::istream& in, const std::string& source = "labels") {
    std::string line;
    if (!std::getline(in, line)) throw FormatError(source + ": empty label file");
    if (detail::strip_cr(line) != "entity_id,label,window_start") {
        throw FormatError(source + ": expected header 'entity_id,label,window_start'");
    }
    std::vector<LabelRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != 3) {
            throw FormatError(source + ":" + std::to_string(lineno) + ": expected 3 fields, got " +
                              std::to_string(cells.size()));
        }
        try {
            rows.push_back({cells[0], parse_double(cells[1]), parse_int(cells[2])});
        } catch (const FormatError& err) {
            throw FormatError(source + ":" + std::to_string(lineno) + ": " + err.what());
        }
    }
    return rows;
}

/// Builds a raw (unnormalized, unimputed) dataset from events and labels.
/// Samples follow the order of the label rows.
inline Dataset build_dataset(const std::vector<RawEvent>& events, const std::vector<LabelRow>& labels,
                             const WindowSpec& spec, FeatureMap features, Task task) {
    Dataset ds;
    ds.task = task;
    ds.windows = spec.window_count();
    ds.features = std::move(features);
    std::map<std::string, std::vector<RawEvent>> by_entity;
    for (const auto& e : events) by_entity[e.entity_id].push_back(e);
    for (const auto& row : labels) {
        if (task == Task::classification && row.label != 0.0 && row.label != 1.0) {
            throw IngestionError("entity " + row.entity_id + ": classification label must be 0 or 1");
        }
        if (!std::isfinite(row.label)) throw IngestionError("entity " + row.entity_id + ": non-finite label");
        const auto it = by_entity.find(row.entity_id);
        const std::vector<RawEvent> none;
        Windowed w = windowize(it == by_entity.end() ? none : it->second, spec, row.window_start, ds.features);
        ds.samples.push_back({row.entity_id, std::move(w.x), std::move(w.mask), row.label});
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Imputation and normalization

/// Last observation carried forward within each feature; cells before the
/// first observation take `fill[d]` (the training-split mean). A NaN fill
/// means the feature was never observed during fitting, and such cells get 0.
/// Observed cells are never modified.
inline Tensor impute(const Tensor& x, std::span<const std::uint8_t> mask, std::span<const double> fill) {
    if (mask.size() != x.size()) throw DimensionError("impute: mask size does not match matrix " + x.shape().str());
    if (fill.size() != x.cols()) throw DimensionError("impute: need one fill value per feature");
    Tensor out = x;
    const std::size_t n = x.rows(), d = x.cols();
    for (std::size_t f = 0; f < d; ++f) {
        std::optional<double> last;
        for (std::size_t t = 0; t < n; ++t) {
            const std::size_t i = t * d + f;
            if (mask[i]) {
                last = x[i];
            } else if (last) {
                out[i] = *last;
            } else {
                out[i] = std::isnan(fill[f]) ? 0.0 : fill[f];
            }
        }
    }
    return out;
}

/// Min, max and mean over observed cells of the given samples.
inline NormalizationStats fit_normalizer(const Dataset& ds, std::span<const std::size_t> fit_indices) {
    if (fit_indices.empty()) throw ConfigError("fit_normalizer: empty training split");
    const std::size_t d = ds.feature_count();
    NormalizationStats st;
    st.min.assign(d, std::numeric_limits<double>::infinity());
    st.max.assign(d, -std::numeric_limits<double>::infinity());
    st.mean.assign(d, 0.0);
    st.observed.assign(d, 0);
    std::vector<std::size_t> counts(d, 0);
    for (std::size_t idx : fit_indices) {
        const Sample& s = ds.samples.at(idx);
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!s.mask[i]) continue;
            const std::size_t f = i % d;
            st.min[f] = std::min(st.min[f], s.x[i]);
            st.max[f] = std::max(st.max[f], s.x[i]);
            st.mean[f] += s.x[i];
            ++counts[f];
        }
    }
    for (std::size_t f = 0; f < d; ++f) {
        if (counts[f] == 0) {
            st.min[f] = st.max[f] = 0.0;
            st.mean[f] = std::numeric_limits<double>::quiet_NaN();
        } else {
            st.mean[f] /= static_cast<double>(counts[f]);
            st.observed[f] = 1;
        }
    }
    return st;
}

/// (x - min) / (max - min), clipped to [0, 1]; a degenerate or never-observed
/// feature maps to 0.
inline double normalize_value(double x, const NormalizationStats& st, std::size_t f) {
    if (!st.observed[f] || !(st.max[f] > st.min[f])) return 0.0;
    return std::clamp((x - st.min[f]) / (st.max[f] - st.min[f]), 0.0, 1.0);
}

inline Tensor apply_normalizer(const Tensor& x, const NormalizationStats& st) {
    if (x.cols() != st.min.size()) throw DimensionError("apply_normalizer: feature count mismatch");
    Tensor out = x;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = normalize_value(x[i], st, i % x.cols());
    return out;
}

/// Imputes and normalizes every sample with statistics fitted elsewhere.
inline Dataset prepare(const Dataset& raw, const NormalizationStats& st) {
    Dataset out = raw;
    for (Sample& s : out.samples) s.x = apply_normalizer(impute(s.x, s.mask, st.mean), st);
    out.normalization = st;
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic generator

struct SynthSpec {
    std::size_t features = 4;
    std::size_t windows = 5;
    std::size_t samples = 1000;
    std::vector<double> weights;      // g, length D
    std::vector<Schedule> schedules;  // m_d, length D
    double noise = 0.1;
    double scale = 1.0;
    Task task = Task::classification;
    std::uint64_t seed = 0;

    void validate() const {
        if (features < 1 || windows < 1 || samples < 1) throw ConfigError("synth spec: D, T and n must be >= 1");
        if (weights.size() != features) {
            throw ConfigError("synth spec: " + std::to_string(weights.size()) + " weights for D=" + std::to_string(features));
        }
        if (schedules.size() != features) {
            throw ConfigError("synth spec: " + std::to_string(schedules.size()) + " schedules for D=" +
                              std::to_string(features));
        }
        if (!(noise >= 0.0) || !std::isfinite(scale)) throw ConfigError("synth spec: noise must be >= 0, scale finite");
    }
};

/// Standard normal via Box-Muller on the portable unit_uniform draw.
inline double standard_normal(std::mt19937_64& rng) {
    double u1 = unit_uniform(rng);
    while (u1 <= 0.0) u1 = unit_uniform(rng);
    const double u2 = unit_uniform(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

/// x_{t,d} = U[0,1) + noise * N(0,1); logit = sum_t sum_d g_d m_d(t) x_{t,d}
/// minus its population mean; label ~ Bernoulli(sigmoid(scale * logit)) for
/// classification, scale * logit for regression. Fully observed.
inline Dataset synth_generate(const SynthSpec& spec) {
    spec.validate();
    const std::size_t n = spec.windows, d = spec.features;
    GroundTruth truth{spec.weights, spec.schedules, spec.noise, spec.scale, spec.seed};
    const Tensor importance = truth.importance(n);
    double center = 0.0;
    for (std::size_t i = 0; i < importance.size(); ++i) center += 0.5 * importance[i];

    std::vector<std::string> names;
    for (std::size_t f = 0; f < d; ++f) names.push_back("f" + std::to_string(f + 1));

    Dataset ds;
    ds.task = spec.task;
    ds.windows = n;
    ds.features = FeatureMap(names);
    ds.ground_truth = truth;
    ds.samples.reserve(spec.samples);
    std::mt19937_64 rng(spec.seed);
    for (std::size_t k = 0; k < spec.samples; ++k) {
        Sample s{std::to_string(k), Tensor::zeros(n, d), std::vector<std::uint8_t>(n * d, 1), 0.0};
        double logit = 0.0;
        for (std::size_t i = 0; i < n * d; ++i) {
            s.x[i] = unit_uniform(rng);
            if (spec.noise > 0.0) s.x[i] += spec.noise * standard_normal(rng);
            logit += importance[i] * s.x[i];
        }
        logit -= center;
        if (spec.task == Task::classification) {
            s.label = unit_uniform(rng) < sigmoid(spec.scale * logit) ? 1.0 : 0.0;
        } else {
            s.label = spec.scale * logit;
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Dataset container
//
// Line 1 is a single-line JSON header terminated by '\n'. The binary payload
// follows immediately: for each sample in header order,
//     T*D float64 values (row-major, window-major), little-endian
//     T*D uint8 observation mask
//     1 float64 label, little-endian
// so the payload is sample_count * (9*T*D + 8) bytes.

inline constexpr int kDatasetVersion = 1;

namespace detail {

inline void put_f64(std::string& buf, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

inline double get_f64(const char* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return std::bit_cast<double>(bits);
}

inline nlohmann::json stats_to_json(const NormalizationStats& st) {
    return {{"min", st.min}, {"max", st.max}, {"mean", json_doubles(st.mean)}, {"observed", st.observed}};
}

inline NormalizationStats stats_from_json(const nlohmann::json& j) {
    NormalizationStats st;
    st.min = j.at("min").get<std::vector<double>>();
    st.max = j.at("max").get<std::vector<double>>();
    st.mean = doubles_from_json(j.at("mean"));
    st.observed = j.at("observed").get<std::vector<std::uint8_t>>();
    if (st.max.size() != st.min.size() || st.mean.size() != st.min.size() || st.observed.size() != st.min.size()) {
        throw FormatError("normalization statistics: inconsistent lengths");
    }
    return st;
}

} // namespace detail

inline std::string serialize_dataset(const Dataset& ds) {
    const std::size_t n = ds.windows, d = ds.feature_count();
    nlohmann::json h;
    h["format"] = "titv-dataset";
    h["version"] = kDatasetVersion;
    h["task"] = std::string(to_string(ds.task));
    h["T"] = n;
    h["D"] = d;
    h["features"] = ds.features.names();
    h["sample_count"] = ds.samples.size();
    std::vector<std::string> ids;
    for (const auto& s : ds.samples) ids.push_back(s.id);
    h["sample_ids"] = ids;
    h["payload_bytes"] = ds.samples.size() * (9 * n * d + 8);
    h["normalization"] = ds.normalization ? detail::stats_to_json(*ds.normalization) : nlohmann::json(nullptr);
    if (ds.ground_truth) {
        const auto& g = *ds.ground_truth;
        std::vector<std::string> sched;
        for (auto s : g.schedules) sched.emplace_back(to_string(s));
        h["ground_truth"] = {{"weights", g.weights}, {"schedules", sched}, {"noise", g.noise},
                             {"scale", g.scale},     {"seed", g.seed}};
    } else {
        h["ground_truth"] = nullptr;
    }
    std::string out = h.dump();
    out.push_back('\n');
    for (const auto& s : ds.samples) {
        if (s.x.rows() != n || s.x.cols() != d || s.mask.size() != n * d) {
            throw DimensionError("sample " + s.id + " does not match dataset shape " + Shape::matrix(n, d).str());
        }
        for (double v : s.x.values()) detail::put_f64(out, v);
        for (auto m : s.mask) out.push_back(static_cast<char>(m));
        detail::put_f64(out, s.label);
    }
    return out;
}

inline Dataset deserialize_dataset(const std::string& bytes, const std::string& source = "dataset") {
    if (bytes.empty()) throw FormatError(source + ": empty file is not a titv dataset");
    const auto nl = bytes.find('\n');
    if (nl == std::string::npos) throw FormatError(source + ": missing header line");
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(bytes.substr(0, nl));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(source + ": header is not valid JSON (" + e.what() + ")");
    }
    Dataset ds;
    std::size_t n = 0, d = 0, count = 0;
    try {
        if (h.at("format") != "titv-dataset") throw FormatError(source + ": not a titv dataset");
        const int version = h.at("version").get<int>();
        if (version != kDatasetVersion) {
            throw FormatError(source + ": unsupported dataset version " + std::to_string(version) + " (expected " +
                              std::to_string(kDatasetVersion) + ")");
        }
        ds.task = parse_task(h.at("task").get<std::string>());
        n = h.at("T").get<std::size_t>();
        d = h.at("D").get<std::size_t>();
        ds.windows = n;
        auto names = h.at("features").get<std::vector<std::string>>();
        if (names.size() != d) {
            throw FormatError(source + ": header declares D=" + std::to_string(d) + " but lists " +
                              std::to_string(names.size()) + " feature names");
        }
        ds.features = FeatureMap(std::move(names));
        count = h.at("sample_count").get<std::size_t>();
        auto ids = h.at("sample_ids").get<std::vector<std::string>>();
        if (ids.size() != count) throw FormatError(source + ": sample_ids length differs from sample_count");
        ds.samples.resize(count);
        for (std::size_t i = 0; i < count; ++i) ds.samples[i].id = ids[i];
        if (!h.at("normalization").is_null()) ds.normalization = detail::stats_from_json(h["normalization"]);
        if (!h.at("ground_truth").is_null()) {
            const auto& g = h["ground_truth"];
            GroundTruth gt;
            gt.weights = g.at("weights").get<std::vector<double>>();
            for (const auto& s : g.at("schedules")) gt.schedules.push_back(parse_schedule(s.get<std::string>()));
            gt.noise = g.at("noise").get<double>();
            gt.scale = g.at("scale").get<double>();
            gt.seed = g.at("seed").get<std::uint64_t>();
            ds.ground_truth = gt;
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(source + ": malformed header (" + e.what() + ")");
    } catch (const ConfigError& e) {
        throw FormatError(source + ": " + e.what());
    }

    const std::size_t per_sample = 9 * n * d + 8;
    const std::size_t payload = bytes.size() - nl - 1;
    if (payload != count * per_sample) {
        std::string msg = source + ": payload holds " + std::to_string(payload) + " bytes but header declares n=" +
                          std::to_string(count) + ", T=" + std::to_string(n) + ", D=" + std::to_string(d) +
                          " (expected " + std::to_string(count * per_sample) + " bytes)";
        if (count > 0 && n > 0 && payload % count == 0 && (payload / count) >= 8 && (payload / count - 8) % (9 * n) == 0) {
            msg += "; payload is consistent with D=" + std::to_string((payload / count - 8) / (9 * n));
        }
        throw FormatError(msg);
    }
    const char* p = bytes.data() + nl + 1;
    for (auto& s : ds.samples) {
        s.x = Tensor::zeros(n, d);
        for (std::size_t i = 0; i < n * d; ++i, p += 8) s.x[i] = detail::get_f64(p);
        s.mask.resize(n * d);
        for (std::size_t i = 0; i < n * d; ++i, ++p) s.mask[i] = static_cast<std::uint8_t>(*p);
        s.label = detail::get_f64(p);
        p += 8;
    }
    return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& path) { write_file(path, serialize_dataset(ds)); }

inline Dataset load_dataset(const std::string& path) { return deserialize_dataset(read_file(path), path); }

} // namespace titv
