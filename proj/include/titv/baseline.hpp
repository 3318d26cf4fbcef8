// SPDX-License-Identifier: Apache-2.0
//
// Logistic-regression baseline on time-aggregated features, and the
// per-window variant that fits one independent model per window.
// Both reuse the TITV training loop and optimizer.

#pragma once

#include <string>
#include <vector>

#include "titv/stats.hpp"
#include "titv/training.hpp"

namespace titv {

/// Per-feature mean over windows.
inline Tensor aggregate(const Tensor& x) {
    if (!x.is_matrix() || x.rows() < 1) throw DimensionError("aggregate: expected a T x D matrix, got " + x.shape().str());
    Tensor out = Tensor::zeros(x.cols());
    for (std::size_t d = 0; d < x.cols(); ++d) {
        double acc = 0.0;
        for (std::size_t t = 0; t < x.rows(); ++t) acc += x(t, d);
        out[d] = acc / static_cast<double>(x.rows());
    }
    return out;
}

struct LRModel {
    Tensor weights; // D
    Tensor bias = Tensor::scalar(0.0);
};

template <class F, class... M>
void visit_lr(F&& f, M&... models) {
    f(std::string("weights"), models.weights...);
    f(std::string("bias"), models.bias...);
}

inline double lr_predict(const LRModel& m, const Tensor& features) {
    return sigmoid(dot(m.weights, features) + m.bias.item());
}

/// Gradient-descent logistic regression on a per-sample feature extractor
/// (aggregate, or one window's row). Weights start at zero.
template <class Extract>
LRModel train_lr_on(const Dataset& ds, const Split& sp, const TrainConfig& tc, Extract&& extract) {
    if (ds.task != Task::classification) throw ConfigError("logistic regression baseline requires classification data");
    if (sp.train.empty()) throw ConfigError("train_lr: empty training split");
    const std::size_t d = ds.feature_count();
    auto loss = [&](Tape& tp, const LRModel& m, const Sample& s, LRModel* g) {
        tp.clear();
        const Tensor feats = extract(s);
        Var w = tp.leaf(m.weights), b = tp.leaf(m.bias);
        Var p = sigmoid(add(dot(w, tp.constant(feats)), b));
        Var l = tp.cross_entropy(p, s.label, tc.positive_weight);
        if (g) {
            tp.backward(l);
            g->weights = w.grad();
            g->bias = b.grad();
        }
        return l.value().item();
    };
    auto pred = [&](Tape&, const LRModel& m, const Sample& s) { return lr_predict(m, extract(s)); };
    auto visit = [](auto&& f, auto&... ms) { visit_lr(f, ms...); };
    LRModel init{Tensor::zeros(d), Tensor::scalar(0.0)};
    return run_training(ds, sp, init, Task::classification, tc, visit, loss, pred).best;
}

inline LRModel train_lr(const Dataset& ds, const Split& sp, const TrainConfig& tc) {
    return train_lr_on(ds, sp, tc, [](const Sample& s) { return aggregate(s.x); });
}

inline std::vector<double> lr_scores(const LRModel& m, const Dataset& ds, std::span<const std::size_t> indices) {
    std::vector<double> out;
    for (auto i : indices) out.push_back(lr_predict(m, aggregate(ds.samples[i].x)));
    return out;
}

inline double lr_auc(const LRModel& m, const Dataset& ds, std::span<const std::size_t> indices) {
    std::vector<double> labels;
    for (auto i : indices) labels.push_back(ds.samples[i].label);
    return roc_auc(lr_scores(m, ds, indices), labels);
}

struct PerWindowLR {
    std::vector<LRModel> models;    // one per window
    Tensor normalized_coefficients; // T x D, softmax over features within each window
};

/// One LR per window on that window's features alone.
inline PerWindowLR per_window_lr(const Dataset& ds, const Split& sp, const TrainConfig& tc) {
    if (ds.windows < 1) throw ConfigError("per_window_lr: need at least one window");
    PerWindowLR out;
    out.normalized_coefficients = Tensor::zeros(ds.windows, ds.feature_count());
    for (std::size_t t = 0; t < ds.windows; ++t) {
        out.models.push_back(train_lr_on(ds, sp, tc, [t](const Sample& s) {
            return Tensor::vec(std::vector<double>(s.x.values().begin() + t * s.x.cols(),
                                                   s.x.values().begin() + (t + 1) * s.x.cols()));
        }));
        const auto sm = stats::softmax(out.models.back().weights.values());
        for (std::size_t d = 0; d < sm.size(); ++d) out.normalized_coefficients(t, d) = sm[d];
    }
    return out;
}

inline std::string coefficient_table_csv(const PerWindowLR& p, const FeatureMap& features) {
    std::string out = "window,feature,normalized_coefficient\n";
    for (std::size_t t = 0; t < p.normalized_coefficients.rows(); ++t)
        for (std::size_t d = 0; d < p.normalized_coefficients.cols(); ++d)
            out += std::to_string(t + 1) + "," + features.name(d) + "," +
                   format_double(p.normalized_coefficients(t, d)) + "\n";
    return out;
}

} // namespace titv
