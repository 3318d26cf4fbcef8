// SPDX-License-Identifier: Apache-2.0
//
// titv: command-line front end.
//
//   titv synth     --spec FILE [--out PATH]
//   titv ingest    --events CSV --labels CSV --feature-window S --window S [--features a,b] [--out PATH]
//   titv train     --data PATH [model and optimizer flags]
//   titv evaluate  --checkpoint PATH --data PATH [--split test]
//   titv interpret --checkpoint PATH --data PATH --mode patient|feature ...
//   titv verify    --scope gradcheck|identity|film|oracle|all
//   titv baseline  --data PATH [--per-window]
//
// Global flags: --seed, --config, --out-dir, --threads. A config file holds
// key=value lines naming long flags of the chosen command (or global ones);
// flags given on the command line take precedence over the file.
//
// Exit status: 0 success, 2 validation error, 3 runtime or numeric error.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstring>
#include <ctime>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "titv/baseline.hpp"
#include "titv/benchmark.hpp"
#include "titv/interpretation.hpp"
#include "titv/verify.hpp"

namespace fs = std::filesystem;
using namespace titv;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct Globals {
    std::uint64_t seed = 0;
    std::string config;
    std::string out_dir = ".";
    std::size_t threads = 1;
    std::string run_id;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, ',')) {
        const auto b = cur.find_first_not_of(" \t"), e = cur.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
    }
    return out;
}

struct KeyValue {
    std::string key, value;
    std::size_t line = 0;
};

/// key=value lines; '#' starts a comment; blank lines ignored.
std::vector<KeyValue> read_key_values(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<KeyValue> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::strip_cr(line);
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t"), e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        out.push_back({trim(line.substr(0, eq)), trim(line.substr(eq + 1)), lineno});
    }
    return out;
}

SynthSpec parse_synth_spec(const std::string& path) {
    SynthSpec sp;
    std::optional<std::vector<double>> weights;
    std::optional<std::vector<Schedule>> schedules;
    for (const auto& kv : read_key_values(path)) {
        const std::string where = path + ":" + std::to_string(kv.line) + ": field '" + kv.key + "'";
        try {
            if (kv.key == "features" || kv.key == "D") {
                sp.features = static_cast<std::size_t>(parse_int(kv.value));
            } else if (kv.key == "windows" || kv.key == "T") {
                sp.windows = static_cast<std::size_t>(parse_int(kv.value));
            } else if (kv.key == "samples" || kv.key == "n") {
                sp.samples = static_cast<std::size_t>(parse_int(kv.value));
            } else if (kv.key == "weights") {
                weights.emplace();
                for (const auto& w : split_list(kv.value)) weights->push_back(parse_double(w));
            } else if (kv.key == "schedules") {
                schedules.emplace();
                for (const auto& s : split_list(kv.value)) schedules->push_back(parse_schedule(s));
            } else if (kv.key == "noise") {
                sp.noise = parse_double(kv.value);
            } else if (kv.key == "scale") {
                sp.scale = parse_double(kv.value);
            } else if (kv.key == "task") {
                sp.task = parse_task(kv.value);
            } else if (kv.key == "seed") {
                sp.seed = static_cast<std::uint64_t>(parse_int(kv.value));
            } else {
                throw ConfigError("unknown field (expected features, windows, samples, weights, schedules, noise, "
                                  "scale, task, seed)");
            }
        } catch (const ValidationError& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
    // A single weight or schedule broadcasts to every feature.
    sp.weights = weights.value_or(std::vector<double>(sp.features, 1.0));
    sp.schedules = schedules.value_or(std::vector<Schedule>(sp.features, Schedule::constant));
    if (sp.weights.size() == 1) sp.weights.assign(sp.features, sp.weights[0]);
    if (sp.schedules.size() == 1) sp.schedules.assign(sp.features, sp.schedules[0]);
    sp.validate();
    return sp;
}

std::string now_utc() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

/// RunManifest: resolved configuration, input digests, artifacts, timings.
class Manifest {
public:
    Manifest(std::string command, const Globals& g) : started_(std::chrono::steady_clock::now()) {
        j_["command"] = std::move(command);
        j_["run_id"] = g.run_id;
        j_["started_at"] = now_utc();
        j_["config"]["seed"] = g.seed;
        j_["config"]["threads"] = g.threads;
        j_["config"]["out_dir"] = g.out_dir;
        if (!g.config.empty()) input(g.config);
        j_["artifacts"] = nlohmann::json::array();
        j_["inputs"] = nlohmann::json::object();
    }

    template <class V>
    void set(const std::string& key, const V& v) { j_["config"][key] = v; }
    void set_json(const std::string& key, nlohmann::json v) { j_["config"][key] = std::move(v); }
    void input(const std::string& path) { j_["inputs"][path] = digest(read_file(path)); }
    void artifact(const std::string& path) { j_["artifacts"].push_back(path); }
    void argv(int argc, char** argv) {
        std::vector<std::string> a(argv, argv + argc);
        j_["argv"] = a;
    }

    void write(const std::string& dir) {
        j_["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
        const std::string path = (fs::path(dir) / (j_["run_id"].get<std::string>() + "." +
                                                   j_["command"].get<std::string>() + ".manifest.json"))
                                     .string();
        write_file(path, j_.dump(1) + "\n");
        std::cout << "manifest=" << path << "\n";
    }

private:
    nlohmann::json j_;
    std::chrono::steady_clock::time_point started_;
};

std::string out_path(const Globals& g, const std::string& name) { return (fs::path(g.out_dir) / name).string(); }

void ensure_out_dir(const Globals& g) {
    std::error_code ec;
    fs::create_directories(g.out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + g.out_dir + "': " + ec.message());
}

std::string fmt(double v) { return format_double(v); }

// ---------------------------------------------------------------------------
// Commands

struct SynthArgs {
    std::string spec, out;
};

int cmd_synth(const SynthArgs& a, Globals g, const CLI::App& sub, int argc, char** argv) {
    SynthSpec sp = parse_synth_spec(a.spec);
    if (sub.get_parent()->get_option("--seed")->count() > 0) sp.seed = g.seed;
    if (g.run_id.empty()) g.run_id = "synth-" + std::to_string(sp.seed);
    ensure_out_dir(g);
    Manifest m("synth", g);
    m.argv(argc, argv);
    m.input(a.spec);
    const Dataset ds = synth_generate(sp);
    const std::string path = a.out.empty() ? out_path(g, g.run_id + ".titv") : a.out;
    save_dataset(ds, path);
    const std::string truth = path + ".truth.json";
    nlohmann::json t;
    std::vector<std::string> sched;
    for (auto s : sp.schedules) sched.emplace_back(to_string(s));
    t["weights"] = json_doubles(sp.weights);
    t["schedules"] = sched;
    t["noise"] = sp.noise;
    t["scale"] = sp.scale;
    t["seed"] = sp.seed;
    t["features"] = ds.features.names();
    std::vector<std::vector<double>> imp(sp.windows);
    const Tensor m_imp = ds.ground_truth->importance(sp.windows);
    for (std::size_t w = 0; w < sp.windows; ++w)
        for (std::size_t d = 0; d < sp.features; ++d) imp[w].push_back(m_imp(w, d));
    t["importance"] = imp;
    write_file(truth, t.dump(1) + "\n");
    m.set("features", sp.features);
    m.set("windows", sp.windows);
    m.set("samples", sp.samples);
    m.set("noise", sp.noise);
    m.set("scale", sp.scale);
    m.set("synth_seed", sp.seed);
    m.set("task", std::string(to_string(sp.task)));
    m.set_json("weights", json_doubles(sp.weights));
    m.set("schedules", sched);
    m.artifact(path);
    m.artifact(truth);
    std::cout << "wrote " << ds.samples.size() << " samples (D=" << sp.features << ", T=" << sp.windows << ") to "
              << path << "\n";
    std::cout << "dataset=" << path << "\nground_truth=" << truth << "\nsamples=" << ds.samples.size() << "\n";
    m.write(g.out_dir);
    return 0;
}

struct IngestArgs {
    std::string events, labels, features, out, task = "classification";
    std::int64_t feature_window = 0, window = 0;
};

int cmd_ingest(const IngestArgs& a, Globals g, int argc, char** argv) {
    if (g.run_id.empty()) g.run_id = "ingest";
    ensure_out_dir(g);
    Manifest m("ingest", g);
    m.argv(argc, argv);
    m.input(a.events);
    m.input(a.labels);
    std::ifstream ev(a.events), lb(a.labels);
    if (!ev) throw IoError("cannot open '" + a.events + "'");
    if (!lb) throw IoError("cannot open '" + a.labels + "'");
    const auto events = read_events_csv(ev, a.events);
    const auto labels = read_labels_csv(lb, a.labels);
    std::vector<std::string> names = split_list(a.features);
    if (names.empty()) {
        std::set<std::string> seen;
        for (const auto& e : events) seen.insert(e.feature);
        names.assign(seen.begin(), seen.end());
    }
    const WindowSpec ws{a.feature_window, a.window};
    const Dataset ds = build_dataset(events, labels, ws, FeatureMap(names), parse_task(a.task));
    const std::string path = a.out.empty() ? out_path(g, g.run_id + ".titv") : a.out;
    save_dataset(ds, path);
    m.set("features", names);
    m.set("feature_window", a.feature_window);
    m.set("window", a.window);
    m.set("task", a.task);
    m.artifact(path);
    std::cout << "ingested " << ds.samples.size() << " samples (D=" << names.size() << ", T=" << ds.windows << ")\n";
    std::cout << "dataset=" << path << "\nsamples=" << ds.samples.size() << "\n";
    m.write(g.out_dir);
    return 0;
}

struct ModelArgs {
    std::string variant = "full";
    std::size_t rnn_dim = 16, film_dim = 16;
};

struct OptimArgs {
    double learning_rate = 0.001, weight_decay = 5e-5, positive_weight = 1.0;
    std::size_t epochs = 200, patience = 10, batch_size = 64;
    std::string optimizer = "adam", monitor;
};

TrainConfig train_config(const OptimArgs& o, const Globals& g) {
    TrainConfig tc;
    tc.learning_rate = o.learning_rate;
    tc.weight_decay = o.weight_decay;
    tc.max_epochs = o.epochs;
    tc.patience = o.patience;
    tc.batch_size = o.batch_size;
    tc.seed = g.seed;
    tc.optimizer = parse_optimizer(o.optimizer);
    if (!o.monitor.empty()) tc.monitor = parse_monitor(o.monitor);
    tc.positive_weight = o.positive_weight;
    tc.threads = g.threads;
    tc.validate();
    return tc;
}

struct Loaded {
    Dataset raw;
    Dataset prepared;
    Split split;
    std::string digest;
};

/// Loads a dataset, splits it 80/10/10 under `split_seed` and normalizes with
/// statistics fitted on the training split (or the stored ones, if present).
Loaded load_and_prepare(const std::string& path, std::uint64_t split_seed,
                        const std::optional<NormalizationStats>& stats = std::nullopt) {
    const std::string bytes = read_file(path);
    Loaded l;
    l.digest = digest(bytes);
    l.raw = deserialize_dataset(bytes, path);
    l.split = split(l.raw, {}, split_seed);
    if (stats) {
        l.prepared = prepare(l.raw, *stats);
    } else if (l.raw.normalization) {
        l.prepared = prepare(l.raw, *l.raw.normalization);
    } else {
        l.prepared = prepare(l.raw, fit_normalizer(l.raw, l.split.train));
    }
    return l;
}

std::string history_csv(const std::vector<EpochRecord>& h) {
    std::string out = "epoch,train_loss,val_loss,val_auc\n";
    for (const auto& r : h) {
        out += std::to_string(r.epoch) + "," + fmt(r.train_loss) + "," + fmt(r.val_loss) + "," +
               (r.val_auc ? fmt(*r.val_auc) : std::string()) + "\n";
    }
    return out;
}

void print_metrics(const std::string& prefix, const MetricsReport& r) {
    if (r.auc) {
        std::printf("%s AUC %.4f, CEL %.4f over %zu samples\n", prefix.c_str(), *r.auc, *r.cel, r.sample_count);
        std::cout << prefix << "_auc=" << fmt(*r.auc) << "\n" << prefix << "_cel=" << fmt(*r.cel) << "\n";
    } else {
        std::printf("%s MSE %.6f over %zu samples\n", prefix.c_str(), *r.mse, r.sample_count);
        std::cout << prefix << "_mse=" << fmt(*r.mse) << "\n";
    }
    std::cout << prefix << "_samples=" << r.sample_count << "\n";
}

struct TrainArgs {
    std::string data;
    ModelArgs model;
    OptimArgs optim;
};

int cmd_train(const TrainArgs& a, Globals g, int argc, char** argv) {
    if (g.run_id.empty()) g.run_id = "titv-" + std::to_string(g.seed);
    ensure_out_dir(g);
    Manifest m("train", g);
    m.argv(argc, argv);
    m.input(a.data);
    const Loaded l = load_and_prepare(a.data, g.seed);
    ModelConfig mc;
    mc.features = l.raw.feature_count();
    mc.windows = l.raw.windows;
    mc.rnn_dim = a.model.rnn_dim;
    mc.film_dim = a.model.film_dim;
    mc.task = l.raw.task;
    mc.variant = parse_variant(a.model.variant);
    mc.validate();
    const TrainConfig tc = train_config(a.optim, g);
    m.set_json("model", to_json(mc));
    m.set_json("train", to_json(tc, mc.task));
    m.set_json("split", {{"seed", g.seed}, {"fractions", {0.8, 0.1, 0.1}}});

    Checkpoint ck = train(l.prepared, l.split, mc, tc);
    ck.dataset_digest = l.digest;
    ck.split_seed = g.seed;
    const std::string ck_path = out_path(g, g.run_id + ".ckpt.json");
    const std::string hist_path = out_path(g, g.run_id + ".history.csv");
    save_checkpoint(ck, ck_path);
    write_file(hist_path, history_csv(ck.history));
    m.artifact(ck_path);
    m.artifact(hist_path);

    const MetricsReport test = evaluate(ck, l.prepared, l.split.test, g.threads);
    std::cout << "trained " << to_string(mc.variant) << " TITV for " << ck.history.size() << " epochs (best epoch "
              << ck.best_epoch << ")\n";
    print_metrics("test", test);
    std::cout << "epochs=" << ck.history.size() << "\nbest_epoch=" << ck.best_epoch << "\ncheckpoint=" << ck_path
              << "\nhistory=" << hist_path << "\n";
    m.write(g.out_dir);
    return 0;
}

const std::vector<std::size_t>& pick_split(const Loaded& l, const std::string& which, std::vector<std::size_t>& all) {
    if (which == "test") return l.split.test;
    if (which == "validation") return l.split.validation;
    if (which == "train") return l.split.train;
    if (which == "all") {
        all.resize(l.raw.samples.size());
        std::iota(all.begin(), all.end(), 0);
        return all;
    }
    throw ConfigError("unknown split '" + which + "' (expected train, validation, test or all)");
}

Loaded load_for_checkpoint(const Checkpoint& ck, const std::string& data) {
    Loaded l = load_and_prepare(data, ck.split_seed, ck.normalization);
    check_compatible(ck, l.prepared);
    if (l.digest != ck.dataset_digest) {
        std::cerr << "note: dataset digest " << l.digest << " differs from the training dataset ("
                  << ck.dataset_digest << "); split membership is recomputed from the stored seed\n";
    }
    return l;
}

std::string stem_run_id(const std::string& ck_path) {
    std::string s = fs::path(ck_path).filename().string();
    for (const char* suffix : {".ckpt.json", ".json"}) {
        if (s.size() > std::strlen(suffix) && s.ends_with(suffix)) return s.substr(0, s.size() - std::strlen(suffix));
    }
    return s;
}

struct EvalArgs {
    std::string checkpoint, data, split = "test";
};

int cmd_evaluate(const EvalArgs& a, Globals g, int argc, char** argv) {
    if (g.run_id.empty()) g.run_id = stem_run_id(a.checkpoint);
    ensure_out_dir(g);
    Manifest m("evaluate", g);
    m.argv(argc, argv);
    m.input(a.checkpoint);
    m.input(a.data);
    m.set("split", a.split);
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    const Loaded l = load_for_checkpoint(ck, a.data);
    std::vector<std::size_t> all;
    const auto& idx = pick_split(l, a.split, all);
    print_metrics(a.split, evaluate(ck, l.prepared, idx, g.threads));
    m.write(g.out_dir);
    return 0;
}

struct InterpretArgs {
    std::string checkpoint, data, mode, sample, features, feature, split = "test", format = "csv";
    bool points = false;
};

int cmd_interpret(const InterpretArgs& a, Globals g, int argc, char** argv) {
    if (g.run_id.empty()) g.run_id = stem_run_id(a.checkpoint);
    if (a.format != "csv" && a.format != "json") throw ConfigError("unknown format '" + a.format + "' (csv or json)");
    ensure_out_dir(g);
    Manifest m("interpret", g);
    m.argv(argc, argv);
    m.input(a.checkpoint);
    m.input(a.data);
    m.set("mode", a.mode);
    m.set("format", a.format);
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    const Loaded l = load_for_checkpoint(ck, a.data);
    std::string path;
    if (a.mode == "patient") {
        if (a.sample.empty()) throw ConfigError("--mode patient needs --sample");
        const Sample& s = l.prepared.samples[l.prepared.sample_index(a.sample)];
        const PatientReport rep = patient_level_report(ck, l.prepared, s, split_list(a.features));
        path = out_path(g, g.run_id + ".patient." + a.sample + "." + a.format);
        write_file(path, a.format == "csv" ? records_to_csv(rep.records) : patient_report_to_json(rep));
        m.set("sample", a.sample);
        m.set("features", split_list(a.features));
        std::cout << "sample " << a.sample << ": y_hat " << fmt(rep.y_hat) << ", " << rep.records.size()
                  << " records\n";
        std::cout << "y_hat=" << fmt(rep.y_hat) << "\nrecords=" << rep.records.size() << "\n";
    } else if (a.mode == "feature") {
        if (a.feature.empty()) throw ConfigError("--mode feature needs --feature");
        std::vector<std::size_t> all;
        const auto& idx = pick_split(l, a.split, all);
        const FeatureLevelReport rep = feature_level_report(ck, l.prepared, idx, a.feature, a.points);
        path = out_path(g, g.run_id + ".feature." + a.feature + "." + a.format);
        write_file(path, a.format == "csv" ? feature_report_to_csv(rep) : feature_report_to_json(rep));
        if (a.points && a.format == "csv") {
            const std::string pts = out_path(g, g.run_id + ".feature." + a.feature + ".points.csv");
            write_file(pts, records_to_csv(rep.points));
            m.artifact(pts);
        }
        m.set("feature", a.feature);
        m.set("split", a.split);
        std::cout << "feature " << a.feature << ": " << rep.windows.size() << " windows over " << idx.size()
                  << " samples\n";
        std::cout << "windows=" << rep.windows.size() << "\nsamples=" << idx.size() << "\n";
    } else {
        throw ConfigError("unknown mode '" + a.mode + "' (expected patient or feature)");
    }
    m.artifact(path);
    std::cout << "output=" << path << "\n";
    m.write(g.out_dir);
    return 0;
}

struct VerifyArgs {
    std::string scope = "all";
    std::size_t trials = 1000, grad_seeds = 50, film_instances = 100, oracle_seeds = 5;
};

int cmd_verify(const VerifyArgs& a, const Globals& g) {
    const bool all = a.scope == "all";
    if (!all && a.scope != "gradcheck" && a.scope != "identity" && a.scope != "film" && a.scope != "oracle") {
        throw ConfigError("unknown scope '" + a.scope + "' (expected gradcheck, identity, film, oracle or all)");
    }
    bool ok = true;
    auto report = [&](bool pass, const std::string& name, const std::string& detail) {
        ok = ok && pass;
        std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << "\n";
    };
    if (all || a.scope == "identity") {
        const IdentityReport r = check_identity(a.trials, g.seed);
        report(r.max_error < 1e-9, "identity",
               "max |reconstruct - forward| = " + fmt(r.max_error) + " over " + std::to_string(r.trials) +
                   " trials (limit 1e-9, worst trial " + std::to_string(r.worst_trial) + ")");
    }
    if (all || a.scope == "gradcheck") {
        const GradientReport r = check_gradients(a.grad_seeds, g.seed);
        report(r.max_relative_error < 1e-4, "gradcheck",
               "max relative error = " + fmt(r.max_relative_error) + " over " + std::to_string(r.seeds) +
                   " seeds (limit 1e-4, worst seed " + std::to_string(r.worst_seed) + " at " + r.worst_parameter + ")");
    }
    if (all || a.scope == "film") {
        const FilmIdentityReport r = check_film_identity(a.film_instances, g.seed);
        report(r.mismatches == 0, "film-identity",
               std::to_string(r.mismatches) + " bitwise mismatches over " + std::to_string(r.instances) +
                   " instances" + (r.mismatches ? " (first at instance " + std::to_string(r.first_mismatch) + ")" : ""));
    }
    if (all || a.scope == "oracle") {
        std::vector<bench::RecoveryRun> runs;
        for (std::size_t k = 0; k < a.oracle_seeds; ++k) {
            runs.push_back(bench::run_recovery(bench::kFirstSeed + k, g.threads));
            std::cout << "  " << bench::describe(runs.back()) << "\n" << std::flush;
        }
        for (const auto& c : bench::recovery_criteria(runs)) report(c.pass, c.name, c.detail);
    }
    std::cout << "verify=" << (ok ? "pass" : "fail") << "\n";
    return ok ? 0 : 1;
}

struct BaselineArgs {
    std::string data;
    OptimArgs optim;
    bool per_window = false;
};

int cmd_baseline(const BaselineArgs& a, Globals g, int argc, char** argv) {
    if (g.run_id.empty()) g.run_id = "lr-" + std::to_string(g.seed);
    ensure_out_dir(g);
    Manifest m("baseline", g);
    m.argv(argc, argv);
    m.input(a.data);
    const Loaded l = load_and_prepare(a.data, g.seed);
    const TrainConfig tc = train_config(a.optim, g);
    m.set_json("train", to_json(tc, Task::classification));
    const LRModel lr = train_lr(l.prepared, l.split, tc);
    MetricsReport r = metrics_from_predictions(lr_scores(lr, l.prepared, l.split.test), l.prepared, l.split.test,
                                               Task::classification);
    std::cout << "aggregated logistic regression\n";
    print_metrics("test", r);
    const std::string model_path = out_path(g, g.run_id + ".lr.json");
    nlohmann::json j;
    j["features"] = l.prepared.features.names();
    j["weights"] = json_doubles(lr.weights.storage());
    j["bias"] = lr.bias.item();
    write_file(model_path, j.dump(1) + "\n");
    m.artifact(model_path);
    std::cout << "model=" << model_path << "\n";
    if (a.per_window) {
        const PerWindowLR pw = per_window_lr(l.prepared, l.split, tc);
        const std::string table = out_path(g, g.run_id + ".per_window.csv");
        write_file(table, coefficient_table_csv(pw, l.prepared.features));
        m.artifact(table);
        std::cout << "per_window=" << table << "\n";
    }
    m.write(g.out_dir);
    return 0;
}

/// Rewrites argv so that config-file values appear as `--key=value` right
/// after the subcommand name; later command-line flags then win.
std::vector<std::string> with_config(int argc, char** argv, const CLI::App& app) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string config;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
        if (args[i].starts_with("--config=")) config = args[i].substr(9);
    }
    if (config.empty()) return args;
    std::size_t sub_pos = args.size();
    const CLI::App* sub = nullptr;
    for (std::size_t i = 0; i < args.size() && !sub; ++i) {
        for (const CLI::App* s : app.get_subcommands({})) {
            if (s->get_name() == args[i]) {
                sub = s;
                sub_pos = i;
                break;
            }
        }
    }
    std::vector<std::string> injected;
    for (const auto& kv : read_key_values(config)) {
        const std::string flag = "--" + kv.key;
        const bool known = app.get_option_no_throw(flag) != nullptr || (sub && sub->get_option_no_throw(flag) != nullptr);
        if (!known || kv.key == "config") {
            throw ConfigError(config + ":" + std::to_string(kv.line) + ": unknown key '" + kv.key + "'" +
                              (sub ? " for command " + sub->get_name() : std::string()));
        }
        injected.push_back(flag + "=" + kv.value);
    }
    const std::size_t at = sub ? sub_pos + 1 : 0;
    args.insert(args.begin() + static_cast<std::ptrdiff_t>(at), injected.begin(), injected.end());
    return args;
}

void add_model_flags(CLI::App* s, ModelArgs& m) {
    s->add_option("--variant", m.variant, "full, invariant-only or variant-only")->capture_default_str();
    s->add_option("--rnn-dim", m.rnn_dim, "hidden size of the time-variant BiGRU (per direction)")->capture_default_str();
    s->add_option("--film-dim", m.film_dim, "hidden size of the time-invariant BiGRU (per direction)")
        ->capture_default_str();
}

void add_optim_flags(CLI::App* s, OptimArgs& o) {
    s->add_option("--learning-rate,--lr", o.learning_rate, "step size")->capture_default_str();
    s->add_option("--weight-decay", o.weight_decay, "L2 / decoupled weight decay")->capture_default_str();
    s->add_option("--epochs", o.epochs, "maximum epochs")->capture_default_str();
    s->add_option("--patience", o.patience, "early-stopping patience in epochs")->capture_default_str();
    s->add_option("--batch-size", o.batch_size, "minibatch size")->capture_default_str();
    s->add_option("--optimizer", o.optimizer, "adam or sgd")->capture_default_str();
    s->add_option("--monitor", o.monitor, "val_auc or val_loss (default by task)");
    s->add_option("--positive-weight", o.positive_weight, "loss weight of positive labels")->capture_default_str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"titv: time-invariant / time-variant feature importance models"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "random seed (split, initialization, shuffling)")->capture_default_str();
    app.add_option("--config", g.config, "key=value file; command-line flags override it");
    app.add_option("--out-dir", g.out_dir, "directory for outputs")->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads; results do not depend on it")->capture_default_str();
    app.add_option("--run-id", g.run_id, "prefix of output file names");

    SynthArgs synth;
    auto* s_synth = app.add_subcommand("synth", "generate a synthetic dataset with planted importance");
    s_synth->add_option("--spec", synth.spec, "key=value spec file")->required();
    s_synth->add_option("--out", synth.out, "dataset path (default <out-dir>/<run-id>.titv)");

    IngestArgs ingest;
    auto* s_ingest = app.add_subcommand("ingest", "window raw events into a dataset");
    s_ingest->add_option("--events", ingest.events, "CSV entity_id,timestamp,feature,value")->required();
    s_ingest->add_option("--labels", ingest.labels, "CSV entity_id,label,window_start")->required();
    s_ingest->add_option("--feature-window", ingest.feature_window, "feature window length in seconds")->required();
    s_ingest->add_option("--window", ingest.window, "time window length in seconds")->required();
    s_ingest->add_option("--features", ingest.features, "comma-separated feature order (default: sorted names)");
    s_ingest->add_option("--task", ingest.task, "classification or regression")->capture_default_str();
    s_ingest->add_option("--out", ingest.out, "dataset path");

    TrainArgs tr;
    auto* s_train = app.add_subcommand("train", "train a TITV model (80/10/10 split)");
    s_train->add_option("--data", tr.data, "dataset path")->required();
    add_model_flags(s_train, tr.model);
    add_optim_flags(s_train, tr.optim);

    EvalArgs ev;
    auto* s_eval = app.add_subcommand("evaluate", "metrics of a checkpoint on a split");
    s_eval->add_option("--checkpoint", ev.checkpoint)->required();
    s_eval->add_option("--data", ev.data)->required();
    s_eval->add_option("--split", ev.split, "train, validation, test or all")->capture_default_str();

    InterpretArgs in;
    auto* s_interp = app.add_subcommand("interpret", "export feature importance");
    s_interp->add_option("--checkpoint", in.checkpoint)->required();
    s_interp->add_option("--data", in.data)->required();
    s_interp->add_option("--mode", in.mode, "patient or feature")->required();
    s_interp->add_option("--sample", in.sample, "sample id (patient mode)");
    s_interp->add_option("--features", in.features, "comma-separated features (patient mode; default all)");
    s_interp->add_option("--feature", in.feature, "feature name (feature mode)");
    s_interp->add_option("--split", in.split, "sample set for feature mode")->capture_default_str();
    s_interp->add_option("--format", in.format, "csv or json")->capture_default_str();
    s_interp->add_flag("--points", in.points, "also export raw points (feature mode)");

    VerifyArgs vf;
    auto* s_verify = app.add_subcommand("verify", "run invariant suites and print margins");
    s_verify->add_option("--scope", vf.scope, "gradcheck, identity, film, oracle or all")->capture_default_str();
    s_verify->add_option("--trials", vf.trials, "identity trials")->capture_default_str();
    s_verify->add_option("--grad-seeds", vf.grad_seeds, "gradient-check seeds")->capture_default_str();
    s_verify->add_option("--film-instances", vf.film_instances, "FiLM identity instances")->capture_default_str();
    s_verify->add_option("--oracle-seeds", vf.oracle_seeds, "synthetic recovery seeds")->capture_default_str();

    BaselineArgs bl;
    auto* s_base = app.add_subcommand("baseline", "aggregated logistic regression baseline");
    s_base->add_option("--data", bl.data, "dataset path")->required();
    s_base->add_flag("--per-window", bl.per_window, "also fit one model per window and export coefficients");
    add_optim_flags(s_base, bl.optim);

    for (CLI::App* s : app.get_subcommands({})) s->fallthrough();

    try {
        std::vector<std::string> args = with_config(argc, argv, app);
        std::reverse(args.begin(), args.end());
        app.parse(args);
        if (g.threads < 1) throw ConfigError("--threads must be >= 1");
        if (*s_synth) return cmd_synth(synth, g, *s_synth, argc, argv);
        if (*s_ingest) return cmd_ingest(ingest, g, argc, argv);
        if (*s_train) return cmd_train(tr, g, argc, argv);
        if (*s_eval) return cmd_evaluate(ev, g, argc, argv);
        if (*s_interp) return cmd_interpret(in, g, argc, argv);
        if (*s_verify) return cmd_verify(vf, g);
        if (*s_base) return cmd_baseline(bl, g, argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
