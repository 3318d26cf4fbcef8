// SPDX-License-Identifier: Apache-2.0
//
// Feature importance FI[t][d] = (beta_d + alpha_{t,d}) * w_d and the exact
// reconstruction of the prediction from it:
//
//     y = out( sum_t sum_d FI[t][d] * x_{t,d} + b )
//
// plus patient-level and feature-level reports and their CSV/JSON exports.
// FI values are raw (signed, unnormalized); the reconstruction only holds
// for raw values.

#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "titv/stats.hpp"
#include "titv/training.hpp"

namespace titv {

inline Tensor feature_importance(const ForwardTrace& tr, const Tensor& w) {
    const std::size_t n = tr.xi.size(), d = w.size();
    if (tr.beta.size() != d) throw DimensionError("feature_importance: trace has D=" + std::to_string(tr.beta.size()) +
                                                  ", output weights have " + std::to_string(d));
    Tensor fi = Tensor::zeros(n, d);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t k = 0; k < d; ++k) fi(t, k) = (tr.beta[k] + tr.alpha[t][k]) * w[k];
    return fi;
}

/// Pre-activation sum_t sum_d FI * x + b.
inline double reconstruct_logit(const Tensor& fi, const Tensor& x, double bias) {
    require_same_shape(fi, x, "reconstruct_prediction");
    double acc = 0.0;
    for (std::size_t i = 0; i < fi.size(); ++i) acc += fi[i] * x[i];
    return acc + bias;
}

inline double reconstruct_prediction(const Tensor& fi, const Tensor& x, double bias, Task task) {
    const double z = reconstruct_logit(fi, x, bias);
    return task == Task::classification ? sigmoid(z) : z;
}

struct FeatureImportanceRecord {
    std::string sample_id;
    std::size_t t = 1; // 1-based window
    std::size_t d = 1; // 1-based feature
    std::string feature_name;
    double fi_value = 0.0;
    double input_value = 0.0;

    bool operator==(const FeatureImportanceRecord&) const = default;
};

struct PatientReport {
    std::string sample_id;
    double y_hat = 0.0;
    std::vector<FeatureImportanceRecord> records; // feature-major, then window
};

/// Checks that a checkpoint was trained on data with this dataset's shape and feature map.
inline void check_compatible(const Checkpoint& ck, const Dataset& ds) {
    if (ck.model.features != ds.feature_count() || ck.model.windows != ds.windows ||
        feature_digest(ck.features) != feature_digest(ds.features.names())) {
        throw ConfigError("schema mismatch: checkpoint expects D=" + std::to_string(ck.model.features) + ", T=" +
                          std::to_string(ck.model.windows) + ", feature digest " + feature_digest(ck.features) +
                          "; dataset has D=" + std::to_string(ds.feature_count()) + ", T=" + std::to_string(ds.windows) +
                          ", feature digest " + feature_digest(ds.features.names()));
    }
}

/// FI series over windows for the requested features of one (prepared) sample.
/// An empty feature list means every feature.
inline PatientReport patient_level_report(const Checkpoint& ck, const Dataset& ds, const Sample& s,
                                          const std::vector<std::string>& features) {
    check_compatible(ck, ds);
    std::vector<std::size_t> ids;
    if (features.empty()) {
        for (std::size_t k = 0; k < ds.feature_count(); ++k) ids.push_back(k);
    } else {
        for (const auto& name : features) ids.push_back(ds.features.index(name));
    }
    const ForwardTrace tr = forward(s.x, ck.params, ck.model);
    const Tensor fi = feature_importance(tr, ck.params.w_out);
    PatientReport rep{s.id, tr.y_hat, {}};
    for (std::size_t k : ids)
        for (std::size_t t = 0; t < ds.windows; ++t)
            rep.records.push_back({s.id, t + 1, k + 1, ds.features.name(k), fi(t, k), s.x(t, k)});
    return rep;
}

struct WindowSummary {
    std::size_t t = 1;
    std::size_t count = 0;
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<double> quantiles; // at FeatureLevelReport::kQuantileLevels
};

struct FeatureLevelReport {
    static constexpr double kQuantileLevels[] = {0.1, 0.25, 0.5, 0.75, 0.9};

    std::string feature;
    std::vector<WindowSummary> windows;
    std::vector<FeatureImportanceRecord> points; // raw points, when requested
};

inline WindowSummary summarize(std::size_t t, std::span<const double> values) {
    WindowSummary w;
    w.t = t;
    w.count = values.size();
    w.mean = stats::mean(values);
    w.stddev = stats::stddev(values);
    for (double q : FeatureLevelReport::kQuantileLevels) w.quantiles.push_back(stats::quantile(values, q));
    return w;
}

/// Per-window distribution of one feature's FI over a set of (prepared) samples.
inline FeatureLevelReport feature_level_report(const Checkpoint& ck, const Dataset& ds,
                                               std::span<const std::size_t> indices, const std::string& feature,
                                               bool include_points = false) {
    if (indices.empty()) throw ContractViolation("feature_level_report: empty sample set");
    check_compatible(ck, ds);
    const std::size_t k = ds.features.index(feature);
    std::vector<std::vector<double>> per_window(ds.windows);
    FeatureLevelReport rep;
    rep.feature = feature;
    for (std::size_t idx : indices) {
        const Sample& s = ds.samples.at(idx);
        const Tensor fi = feature_importance(forward(s.x, ck.params, ck.model), ck.params.w_out);
        for (std::size_t t = 0; t < ds.windows; ++t) {
            per_window[t].push_back(fi(t, k));
            if (include_points) rep.points.push_back({s.id, t + 1, k + 1, feature, fi(t, k), s.x(t, k)});
        }
    }
    for (std::size_t t = 0; t < ds.windows; ++t) rep.windows.push_back(summarize(t + 1, per_window[t]));
    return rep;
}

// ---------------------------------------------------------------------------
// Export

inline constexpr char kRecordCsvHeader[] = "sample_id,t,d,feature_name,fi_value,input_value";

inline std::string records_to_csv(const std::vector<FeatureImportanceRecord>& records) {
    std::string out = std::string(kRecordCsvHeader) + "\n";
    for (const auto& r : records) {
        out += r.sample_id + "," + std::to_string(r.t) + "," + std::to_string(r.d) + "," + r.feature_name + "," +
               format_double(r.fi_value) + "," + format_double(r.input_value) + "\n";
    }
    return out;
}

inline std::vector<FeatureImportanceRecord> records_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || detail::strip_cr(line) != kRecordCsvHeader) {
        throw FormatError("importance CSV: missing header '" + std::string(kRecordCsvHeader) + "'");
    }
    std::vector<FeatureImportanceRecord> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        const auto c = detail::split_csv_line(line);
        if (c.size() != 6) throw FormatError("importance CSV line " + std::to_string(lineno) + ": expected 6 fields");
        out.push_back({c[0], static_cast<std::size_t>(parse_int(c[1])), static_cast<std::size_t>(parse_int(c[2])), c[3],
                       parse_double(c[4]), parse_double(c[5])});
    }
    return out;
}

inline nlohmann::json to_json(const FeatureImportanceRecord& r) {
    return {{"sample_id", r.sample_id}, {"t", r.t},   {"d", r.d}, {"feature_name", r.feature_name},
            {"fi_value", r.fi_value},   {"input_value", r.input_value}};
}

inline std::string records_to_json(const std::vector<FeatureImportanceRecord>& records) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : records) arr.push_back(to_json(r));
    return arr.dump(1) + "\n";
}

inline std::vector<FeatureImportanceRecord> records_from_json(const std::string& text) {
    std::vector<FeatureImportanceRecord> out;
    try {
        auto j = nlohmann::json::parse(text);
        const auto& arr = j.is_object() ? j.at("records") : j;
        for (const auto& r : arr) {
            out.push_back({r.at("sample_id").get<std::string>(), r.at("t").get<std::size_t>(),
                           r.at("d").get<std::size_t>(), r.at("feature_name").get<std::string>(),
                           r.at("fi_value").get<double>(), r.at("input_value").get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("importance JSON: ") + e.what());
    }
    return out;
}

inline std::string patient_report_to_json(const PatientReport& rep) {
    nlohmann::json j;
    j["sample_id"] = rep.sample_id;
    j["y_hat"] = rep.y_hat;
    j["records"] = nlohmann::json::array();
    for (const auto& r : rep.records) j["records"].push_back(to_json(r));
    return j.dump(1) + "\n";
}

inline std::string feature_report_to_csv(const FeatureLevelReport& rep) {
    std::string out = "feature_name,t,count,mean,std";
    for (double q : FeatureLevelReport::kQuantileLevels) out += ",q" + std::to_string(static_cast<int>(q * 100 + 0.5));
    out += "\n";
    for (const auto& w : rep.windows) {
        out += rep.feature + "," + std::to_string(w.t) + "," + std::to_string(w.count) + "," + format_double(w.mean) +
               "," + format_double(w.stddev);
        for (double q : w.quantiles) out += "," + format_double(q);
        out += "\n";
    }
    return out;
}

inline std::string feature_report_to_json(const FeatureLevelReport& rep) {
    nlohmann::json j;
    j["feature_name"] = rep.feature;
    j["quantile_levels"] = std::vector<double>(std::begin(FeatureLevelReport::kQuantileLevels),
                                               std::end(FeatureLevelReport::kQuantileLevels));
    j["windows"] = nlohmann::json::array();
    for (const auto& w : rep.windows) {
        j["windows"].push_back(
            {{"t", w.t}, {"count", w.count}, {"mean", w.mean}, {"std", w.stddev}, {"quantiles", w.quantiles}});
    }
    if (!rep.points.empty()) {
        j["points"] = nlohmann::json::array();
        for (const auto& r : rep.points) j["points"].push_back(to_json(r));
    }
    return j.dump(1) + "\n";
}

} // namespace titv
