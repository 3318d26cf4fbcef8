// SPDX-License-Identifier: Apache-2.0
//
// Losses, metrics, dataset splitting, optimizers, the training loop with
// early stopping, evaluation, and checkpoint persistence.
//
// Determinism: per-sample gradients may be computed on worker threads, but
// they are always reduced in sample-index order, so results do not depend on
// the thread count.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "titv/data.hpp"
#include "titv/model.hpp"
#include "titv/util.hpp"

namespace titv {

// ---------------------------------------------------------------------------
// Losses and metrics

inline double cross_entropy(double prob, double label) {
    if (label != 0.0 && label != 1.0) {
        throw ContractViolation("cross_entropy: label must be 0 or 1, got " + std::to_string(label));
    }
    const double p = std::clamp(prob, Tape::kProbFloor, 1.0 - Tape::kProbFloor);
    return label == 1.0 ? -std::log(p) : -std::log(1.0 - p);
}

inline double squared_error(double pred, double target) { return (pred - target) * (pred - target); }

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half. Computed from average ranks.
inline double roc_auc(std::span<const double> scores, std::span<const double> labels) {
    if (scores.size() != labels.size()) throw DimensionError("roc_auc: scores and labels differ in length");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]] == 1.0) {
                rank_sum += avg;
                ++pos;
            } else if (labels[order[k]] != 0.0) {
                throw ContractViolation("roc_auc: labels must be 0 or 1");
            }
        }
        i = j + 1;
    }
    const std::size_t neg = scores.size() - pos;
    if (pos == 0 || neg == 0) throw UndefinedMetric("roc_auc: labels contain a single class");
    const double p = static_cast<double>(pos), n = static_cast<double>(neg);
    return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

struct MetricsReport {
    std::optional<double> auc; // classification
    std::optional<double> cel; // classification: mean cross-entropy
    std::optional<double> mse; // regression
    std::size_t sample_count = 0;
};

// ---------------------------------------------------------------------------
// Splitting

struct Split {
    std::vector<std::size_t> train, validation, test;
};

struct SplitFractions {
    double train = 0.8, validation = 0.1, test = 0.1;
};

/// Index in [0, bound) from a 64-bit draw without modulo bias.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do r = rng();
    while (r >= limit);
    return r % bound;
}

/// Fisher-Yates with the portable bounded draw.
template <class T>
void shuffle(std::vector<T>& xs, std::mt19937_64& rng) {
    for (std::size_t i = xs.size(); i > 1; --i) std::swap(xs[i - 1], xs[bounded(rng, i)]);
}

/// Random partition by a seeded permutation of sample ids (sorted first, so
/// assignment does not depend on storage order). Sizes round the train and
/// validation fractions; test takes the remainder.
inline Split split(const Dataset& ds, SplitFractions f, std::uint64_t seed) {
    if (ds.samples.empty()) throw ConfigError("split: dataset is empty");
    if (f.train < 0 || f.validation < 0 || f.test < 0 || std::abs(f.train + f.validation + f.test - 1.0) > 1e-9) {
        throw ConfigError("split: fractions must be non-negative and sum to 1");
    }
    std::vector<std::size_t> order(ds.samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ds.samples[a].id < ds.samples[b].id; });
    std::mt19937_64 rng(seed);
    shuffle(order, rng);
    const auto n = static_cast<double>(order.size());
    const auto n_train = static_cast<std::size_t>(std::llround(f.train * n));
    const auto n_val = std::min(order.size() - n_train, static_cast<std::size_t>(std::llround(f.validation * n)));
    Split s;
    s.train.assign(order.begin(), order.begin() + n_train);
    s.validation.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    s.test.assign(order.begin() + n_train + n_val, order.end());
    if (s.train.empty() || s.validation.empty() || s.test.empty()) {
        throw ConfigError("split: a partition received zero samples (n=" + std::to_string(order.size()) + ", sizes " +
                          std::to_string(s.train.size()) + "/" + std::to_string(s.validation.size()) + "/" +
                          std::to_string(s.test.size()) + ")");
    }
    return s;
}

// ---------------------------------------------------------------------------
// Optimization

enum class OptimizerKind { sgd, adam };
enum class Monitor { val_auc, val_loss };

inline std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }
inline std::string_view to_string(Monitor m) { return m == Monitor::val_auc ? "val_auc" : "val_loss"; }

inline OptimizerKind parse_optimizer(std::string_view s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer '" + std::string(s) + "' (expected sgd or adam)");
}

inline Monitor parse_monitor(std::string_view s) {
    if (s == "val_auc") return Monitor::val_auc;
    if (s == "val_loss") return Monitor::val_loss;
    throw ConfigError("unknown monitor '" + std::string(s) + "' (expected val_auc or val_loss)");
}

struct TrainConfig {
    double learning_rate = 0.001;
    double weight_decay = 5e-5;
    std::size_t max_epochs = 200;
    std::size_t patience = 10;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::adam;
    std::optional<Monitor> monitor; // default: val_auc for classification, val_loss for regression
    double positive_weight = 1.0;
    std::size_t threads = 1; // not part of the result; excluded from checkpoints

    void validate() const {
        if (!(learning_rate >= 0.0) || !(weight_decay >= 0.0) || max_epochs < 1 || patience < 1 || batch_size < 1 ||
            !(positive_weight > 0.0) || threads < 1) {
            throw ConfigError("train config: need learning_rate >= 0, weight_decay >= 0, and max_epochs, patience, "
                              "batch_size, threads >= 1");
        }
    }

    Monitor resolved_monitor(Task task) const {
        if (monitor) return *monitor;
        return task == Task::classification ? Monitor::val_auc : Monitor::val_loss;
    }
};

/// Generic over any ParamSet-like structure visited by `visit`.
class Optimizer {
public:
    static constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEpsilon = 1e-8;

    explicit Optimizer(const TrainConfig& cfg) : cfg_(cfg) {}

    /// SGD:  p <- p - lr (g + wd p)
    /// Adam: bias-corrected moments, then decoupled decay p <- p - lr wd p.
    /// Throws NumericError naming the first non-finite gradient entry.
    template <class Params, class Visit>
    void step(Params& params, const Params& grads, Visit&& visit) {
        visit([](const std::string& name, const Tensor& g) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (!std::isfinite(g[i])) {
                    throw NumericError("non-finite gradient in parameter " + name + " at index " + std::to_string(i) +
                                       " (value " + format_double(g[i]) + ")");
                }
            }
        }, grads);
        const double lr = cfg_.learning_rate, wd = cfg_.weight_decay;
        if (cfg_.optimizer == OptimizerKind::sgd) {
            visit([&](const std::string&, Tensor& p, const Tensor& g) {
                for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * (g[i] + wd * p[i]);
            }, params, grads);
            return;
        }
        if (moments_.empty()) {
            visit([&](const std::string&, const Tensor& p) {
                moments_.emplace_back(p.shape());
                moments_.emplace_back(p.shape());
            }, params);
        }
        ++t_;
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
        std::size_t slot = 0;
        visit([&](const std::string&, Tensor& p, const Tensor& g) {
            Tensor& m = moments_[slot++];
            Tensor& v = moments_[slot++];
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
                v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEpsilon);
                p[i] -= lr * wd * p[i];
            }
        }, params, grads);
    }

    void step(Parameters& params, const Parameters& grads) {
        step(params, grads, [](auto&& f, auto&... sets) { visit_params(f, sets...); });
    }

private:
    TrainConfig cfg_;
    std::vector<Tensor> moments_;
    std::uint64_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Per-sample evaluation

/// Runs fn(worker, i) for i in [0, count) on `threads` workers, contiguous blocks.
template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(0, i);
        return;
    }
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const std::size_t block = (count + threads - 1) / threads;
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w * block; i < std::min(count, (w + 1) * block); ++i) fn(w, i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    pool.clear();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Loss of one sample and, optionally, its gradient.
inline double sample_loss(Tape& tp, const Parameters& params, const Sample& s, const ModelConfig& cfg,
                          double positive_weight, Parameters* grad) {
    tp.clear();
    const ParamSet<Var> pv = bind(tp, params);
    const ForwardGraph g = build_forward(tp, pv, s.x, cfg);
    const Var loss = cfg.task == Task::classification ? tp.cross_entropy(g.output, s.label, positive_weight)
                                                      : tp.squared_error(g.output, s.label);
    if (grad) {
        tp.backward(loss);
        collect_grads(pv, *grad);
    }
    return loss.value().item();
}

/// Model outputs (probability or regression value) for the given samples.
inline std::vector<double> predict(const Parameters& params, const Dataset& ds, std::span<const std::size_t> indices,
                                   const ModelConfig& cfg, std::size_t threads = 1) {
    std::vector<double> out(indices.size());
    std::vector<Tape> tapes(std::max<std::size_t>(1, threads));
    parallel_for(indices.size(), threads, [&](std::size_t w, std::size_t i) {
        Tape& tp = tapes[w];
        tp.clear();
        const ParamSet<Var> pv = bind(tp, params);
        out[i] = build_forward(tp, pv, ds.samples[indices[i]].x, cfg).output.value().item();
    });
    return out;
}

inline MetricsReport metrics_from_predictions(std::span<const double> preds, const Dataset& ds,
                                              std::span<const std::size_t> indices, Task task) {
    if (indices.empty()) throw ContractViolation("evaluate: empty split");
    MetricsReport r;
    r.sample_count = indices.size();
    std::vector<double> labels(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) labels[i] = ds.samples[indices[i]].label;
    double acc = 0.0;
    if (task == Task::classification) {
        for (std::size_t i = 0; i < preds.size(); ++i) acc += cross_entropy(preds[i], labels[i]);
        r.cel = acc / static_cast<double>(preds.size());
        r.auc = roc_auc(preds, labels);
    } else {
        for (std::size_t i = 0; i < preds.size(); ++i) acc += squared_error(preds[i], labels[i]);
        r.mse = acc / static_cast<double>(preds.size());
    }
    return r;
}

// ---------------------------------------------------------------------------
// Checkpoint

struct EpochRecord {
    std::size_t epoch = 0; // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    std::optional<double> val_auc;

    bool operator==(const EpochRecord&) const = default;
};

struct Checkpoint {
    ModelConfig model;
    TrainConfig train;
    Parameters params;
    std::vector<std::string> features;
    std::string dataset_digest;
    std::uint64_t split_seed = 0;
    SplitFractions fractions;
    std::optional<NormalizationStats> normalization;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0; // 1-based; 0 if never trained
};

inline constexpr int kCheckpointVersion = 1;

/// Digest of the ordered feature-name list, used for compatibility checks.
inline std::string feature_digest(const std::vector<std::string>& names) {
    std::string joined;
    for (const auto& n : names) {
        joined += n;
        joined.push_back('\n');
    }
    return digest(joined);
}

inline nlohmann::json to_json(const ModelConfig& m) {
    return {{"D", m.features},
            {"T", m.windows},
            {"rnn_dim", m.rnn_dim},
            {"film_dim", m.film_dim},
            {"task", std::string(to_string(m.task))},
            {"variant", std::string(to_string(m.variant))}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig m;
    m.features = j.at("D").get<std::size_t>();
    m.windows = j.at("T").get<std::size_t>();
    m.rnn_dim = j.at("rnn_dim").get<std::size_t>();
    m.film_dim = j.at("film_dim").get<std::size_t>();
    m.task = parse_task(j.at("task").get<std::string>());
    m.variant = parse_variant(j.at("variant").get<std::string>());
    return m;
}

inline nlohmann::json to_json(const TrainConfig& t, Task task) {
    return {{"learning_rate", t.learning_rate},
            {"weight_decay", t.weight_decay},
            {"max_epochs", t.max_epochs},
            {"patience", t.patience},
            {"batch_size", t.batch_size},
            {"seed", t.seed},
            {"optimizer", std::string(to_string(t.optimizer))},
            {"monitor", std::string(to_string(t.resolved_monitor(task)))},
            {"positive_weight", t.positive_weight}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig t;
    t.learning_rate = j.at("learning_rate").get<double>();
    t.weight_decay = j.at("weight_decay").get<double>();
    t.max_epochs = j.at("max_epochs").get<std::size_t>();
    t.patience = j.at("patience").get<std::size_t>();
    t.batch_size = j.at("batch_size").get<std::size_t>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
    t.monitor = parse_monitor(j.at("monitor").get<std::string>());
    t.positive_weight = j.at("positive_weight").get<double>();
    return t;
}

inline std::string serialize_checkpoint(const Checkpoint& ck) {
    nlohmann::json j;
    j["format"] = "titv-checkpoint";
    j["version"] = kCheckpointVersion;
    j["model"] = to_json(ck.model);
    j["train"] = to_json(ck.train, ck.model.task);
    j["features"] = ck.features;
    j["feature_digest"] = feature_digest(ck.features);
    j["dataset_digest"] = ck.dataset_digest;
    j["split"] = {{"seed", ck.split_seed},
                  {"fractions", {ck.fractions.train, ck.fractions.validation, ck.fractions.test}}};
    j["normalization"] = ck.normalization ? detail::stats_to_json(*ck.normalization) : nlohmann::json(nullptr);
    nlohmann::json params = nlohmann::json::array();
    visit_params(
        [&](const std::string& name, const Tensor& t) {
            nlohmann::json shape = nlohmann::json::array();
            if (t.shape().rank >= 1) shape.push_back(t.rows());
            if (t.shape().rank == 2) shape.push_back(t.cols());
            params.push_back({{"name", name}, {"shape", shape}, {"data", t.storage()}});
        },
        ck.params);
    j["parameters"] = params;
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& e : ck.history) {
        hist.push_back({{"epoch", e.epoch},
                        {"train_loss", e.train_loss},
                        {"val_loss", e.val_loss},
                        {"val_auc", e.val_auc ? nlohmann::json(*e.val_auc) : nlohmann::json(nullptr)}});
    }
    j["history"] = hist;
    j["best_epoch"] = ck.best_epoch;
    return j.dump(1) + "\n";
}

inline Checkpoint deserialize_checkpoint(const std::string& text, const std::string& source = "checkpoint") {
    if (text.empty()) throw FormatError(source + ": empty file is not a checkpoint");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(source + ": not valid JSON (" + e.what() + ")");
    }
    Checkpoint ck;
    try {
        if (j.at("format") != "titv-checkpoint") throw FormatError(source + ": not a titv checkpoint");
        const int version = j.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw FormatError(source + ": unsupported checkpoint version " + std::to_string(version) + " (expected " +
                              std::to_string(kCheckpointVersion) + ")");
        }
        ck.model = model_config_from_json(j.at("model"));
        ck.model.validate();
        ck.train = train_config_from_json(j.at("train"));
        ck.features = j.at("features").get<std::vector<std::string>>();
        ck.dataset_digest = j.at("dataset_digest").get<std::string>();
        ck.split_seed = j.at("split").at("seed").get<std::uint64_t>();
        const auto fr = j.at("split").at("fractions").get<std::vector<double>>();
        if (fr.size() != 3) throw FormatError(source + ": split fractions must have 3 entries");
        ck.fractions = {fr[0], fr[1], fr[2]};
        if (!j.at("normalization").is_null()) ck.normalization = detail::stats_from_json(j["normalization"]);
        ck.params = zero_params(ck.model);
        const auto& params = j.at("parameters");
        std::size_t k = 0;
        visit_params(
            [&](const std::string& name, Tensor& t) {
                if (k >= params.size()) throw FormatError(source + ": missing parameter " + name);
                const auto& p = params[k++];
                if (p.at("name") != name) {
                    throw FormatError(source + ": expected parameter " + name + ", found " +
                                      p.at("name").get<std::string>());
                }
                auto data = p.at("data").get<std::vector<double>>();
                if (data.size() != t.size()) {
                    throw FormatError(source + ": parameter " + name + " has " + std::to_string(data.size()) +
                                      " values, expected " + std::to_string(t.size()) + " for shape " + t.shape().str());
                }
                std::copy(data.begin(), data.end(), t.values().begin());
            },
            ck.params);
        if (k != params.size()) throw FormatError(source + ": unexpected extra parameters");
        for (const auto& e : j.at("history")) {
            EpochRecord r;
            r.epoch = e.at("epoch").get<std::size_t>();
            r.train_loss = e.at("train_loss").get<double>();
            r.val_loss = e.at("val_loss").get<double>();
            if (!e.at("val_auc").is_null()) r.val_auc = e["val_auc"].get<double>();
            ck.history.push_back(r);
        }
        ck.best_epoch = j.at("best_epoch").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(source + ": malformed checkpoint (" + e.what() + ")");
    } catch (const ConfigError& e) {
        throw FormatError(source + ": " + e.what());
    }
    return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) { write_file(path, serialize_checkpoint(ck)); }

inline Checkpoint load_checkpoint(const std::string& path) { return deserialize_checkpoint(read_file(path), path); }

// ---------------------------------------------------------------------------
// Training loop

template <class Params>
struct LoopResult {
    Params best;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
};

/// Minibatch loop with early stopping, shared by TITV and the LR baseline.
///   visit(f, Params&...)                          slot visitor
///   loss_fn(Tape&, const Params&, const Sample&, Params* grad) -> loss
///   predict_fn(Tape&, const Params&, const Sample&) -> model output
/// Keeps the parameters of the best validation epoch; stops after `patience`
/// epochs without strict improvement.
template <class Params, class Visit, class LossFn, class PredictFn>
LoopResult<Params> run_training(const Dataset& ds, const Split& sp, Params init, Task task, const TrainConfig& tc,
                                Visit&& visit, LossFn&& loss_fn, PredictFn&& predict_fn) {
    tc.validate();
    if (sp.train.empty() || sp.validation.empty()) throw ConfigError("train: empty training or validation split");
    const Monitor monitor = tc.resolved_monitor(task);
    if (monitor == Monitor::val_auc) {
        if (task != Task::classification) throw ConfigError("train: val_auc monitor requires classification");
        bool pos = false, neg = false;
        for (auto i : sp.validation) (ds.samples[i].label == 1.0 ? pos : neg) = true;
        if (!pos || !neg) throw ConfigError("train: validation split contains a single class; AUC is undefined");
    }

    const std::size_t threads = tc.threads;
    std::vector<Tape> tapes(threads);
    Params params = std::move(init);
    Optimizer opt(tc);

    const std::size_t max_batch = std::min(tc.batch_size, sp.train.size());
    std::vector<Params> sample_grads(max_batch, params);
    std::vector<double> sample_losses(max_batch);
    Params batch_grad = params;

    auto zero = [&](Params& p) { visit([](const std::string&, Tensor& t) { t.fill(0.0); }, p); };

    LoopResult<Params> out{params, {}, 0};
    double best_score = 0.0;
    std::size_t since_best = 0;
    std::vector<std::size_t> order = sp.train;

    for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
        std::mt19937_64 rng(tc.seed ^ (0x9E3779B97F4A7C15ULL * epoch));
        shuffle(order, rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
            const std::size_t count = std::min(tc.batch_size, order.size() - start);
            parallel_for(count, threads, [&](std::size_t w, std::size_t i) {
                sample_losses[i] = loss_fn(tapes[w], params, ds.samples[order[start + i]], &sample_grads[i]);
            });
            zero(batch_grad);
            for (std::size_t i = 0; i < count; ++i) {
                epoch_loss += sample_losses[i];
                visit([](const std::string&, Tensor& acc, const Tensor& g) {
                    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += g[k];
                }, batch_grad, sample_grads[i]);
            }
            const double inv = 1.0 / static_cast<double>(count);
            visit([&](const std::string&, Tensor& acc) {
                for (double& v : acc.values()) v *= inv;
            }, batch_grad);
            opt.step(params, batch_grad, visit);
        }

        std::vector<double> preds(sp.validation.size());
        parallel_for(sp.validation.size(), threads, [&](std::size_t w, std::size_t i) {
            preds[i] = predict_fn(tapes[w], params, ds.samples[sp.validation[i]]);
        });
        const MetricsReport val = metrics_from_predictions(preds, ds, sp.validation, task);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_loss / static_cast<double>(order.size());
        rec.val_loss = task == Task::classification ? *val.cel : *val.mse;
        rec.val_auc = val.auc;
        for (double v : {rec.train_loss, rec.val_loss}) {
            if (!std::isfinite(v)) throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
        }
        out.history.push_back(rec);

        const double score = monitor == Monitor::val_auc ? *rec.val_auc : -rec.val_loss;
        if (epoch == 1 || score > best_score) {
            best_score = score;
            out.best = params;
            out.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= tc.patience) {
            break;
        }
    }
    return out;
}

inline auto param_visitor() {
    return [](auto&& f, auto&... sets) { visit_params(f, sets...); };
}

/// Trains a TITV model on a prepared (imputed, normalized) dataset.
inline Checkpoint train(const Dataset& ds, const Split& sp, const ModelConfig& mc, const TrainConfig& tc) {
    mc.validate();
    if (ds.feature_count() != mc.features || ds.windows != mc.windows || ds.task != mc.task) {
        throw ConfigError("train: model config (D=" + std::to_string(mc.features) + ", T=" + std::to_string(mc.windows) +
                          ") does not match dataset (D=" + std::to_string(ds.feature_count()) + ", T=" +
                          std::to_string(ds.windows) + ")");
    }
    auto loss = [&](Tape& tp, const Parameters& p, const Sample& s, Parameters* g) {
        return sample_loss(tp, p, s, mc, tc.positive_weight, g);
    };
    auto pred = [&](Tape& tp, const Parameters& p, const Sample& s) {
        tp.clear();
        const ParamSet<Var> pv = bind(tp, p);
        return build_forward(tp, pv, s.x, mc).output.value().item();
    };
    auto res = run_training(ds, sp, init_params(mc, tc.seed), mc.task, tc, param_visitor(), loss, pred);
    Checkpoint ck;
    ck.model = mc;
    ck.train = tc;
    ck.train.monitor = tc.resolved_monitor(mc.task);
    ck.params = std::move(res.best);
    ck.features = ds.features.names();
    ck.normalization = ds.normalization;
    ck.history = std::move(res.history);
    ck.best_epoch = res.best_epoch;
    return ck;
}

inline MetricsReport evaluate(const Checkpoint& ck, const Dataset& ds, std::span<const std::size_t> indices,
                              std::size_t threads = 1) {
    if (indices.empty()) throw ContractViolation("evaluate: empty split");
    const auto preds = predict(ck.params, ds, indices, ck.model, threads);
    return metrics_from_predictions(preds, ds, indices, ck.model.task);
}

} // namespace titv
