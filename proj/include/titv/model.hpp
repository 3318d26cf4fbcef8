// SPDX-License-Identifier: Apache-2.0
//
// The time-invariant / time-variant (TITV) network.
//
//   invariant module:  q_t = BiGRU(x_1..x_T),  s = mean_t q_t,
//                      beta = W_beta s + b_beta,  theta = W_theta s + b_theta
//   variant module:    h_t = BiGRU_film(x_1..x_T; beta, theta),
//                      alpha_t = tanh(W_alpha h_t + b_alpha)
//   prediction module: xi_t = beta + alpha_t,  c = sum_t xi_t * x_t,
//                      y = out(<w, c> + b)
//
// The FiLM-GRU modulates the raw input feature-wise before the gate
// projections: z_t = sigmoid(W_z (beta * x_t + theta) + U_z h_{t-1}), and
// likewise for r_t and the candidate state. beta lives in feature space (it
// multiplies x_t in the context vector), so this is the only placement where
// the gate shapes agree.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "titv/autodiff.hpp"

namespace titv {

enum class Task { classification, regression };
enum class Variant { full, invariant_only, variant_only };

inline std::string_view to_string(Task t) { return t == Task::classification ? "classification" : "regression"; }

inline std::string_view to_string(Variant v) {
    switch (v) {
    case Variant::full: return "full";
    case Variant::invariant_only: return "invariant-only";
    case Variant::variant_only: return "variant-only";
    }
    return "full";
}

inline Task parse_task(std::string_view s) {
    if (s == "classification") return Task::classification;
    if (s == "regression") return Task::regression;
    throw ConfigError("unknown task '" + std::string(s) + "' (expected classification or regression)");
}

inline Variant parse_variant(std::string_view s) {
    if (s == "full") return Variant::full;
    if (s == "invariant-only" || s == "invariant_only") return Variant::invariant_only;
    if (s == "variant-only" || s == "variant_only") return Variant::variant_only;
    throw ConfigError("unknown variant '" + std::string(s) + "' (expected full, invariant-only or variant-only)");
}

struct ModelConfig {
    std::size_t features = 1; // D
    std::size_t windows = 1;  // T
    std::size_t rnn_dim = 16;  // hidden size per direction, time-variant BiGRU
    std::size_t film_dim = 16; // hidden size per direction, time-invariant BiGRU
    Task task = Task::classification;
    Variant variant = Variant::full;

    void validate() const {
        if (features < 1 || windows < 1 || rnn_dim < 1 || film_dim < 1) {
            throw ConfigError("model config: feature count, window count, rnn_dim and film_dim must all be >= 1");
        }
    }

    bool operator==(const ModelConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Parameter sets. Instantiated with Tensor for values and gradients and with
// Var for the handles bound onto a tape.

template <class T>
struct GruGates {
    T w_z, u_z; // update gate: input map, recurrent map
    T w_r, u_r; // reset gate
    T w_h, u_h; // candidate state
};

template <class T>
struct BiGru {
    GruGates<T> forward, backward;
};

template <class T>
struct ParamSet {
    BiGru<T> invariant_rnn;
    T w_beta, b_beta;
    T w_theta, b_theta;
    BiGru<T> variant_rnn;
    T w_alpha, b_alpha;
    T w_out, b_out;
};

using Parameters = ParamSet<Tensor>;

namespace detail {

template <class F, class... G>
void visit_gates(std::string_view prefix, F& f, G&... g) {
    const std::string p(prefix);
    f(p + ".w_z", g.w_z...);
    f(p + ".u_z", g.u_z...);
    f(p + ".w_r", g.w_r...);
    f(p + ".u_r", g.u_r...);
    f(p + ".w_h", g.w_h...);
    f(p + ".u_h", g.u_h...);
}

} // namespace detail

/// Calls f(name, member_of_sets...) for every parameter slot, in a fixed order
/// that also defines the flat layout used by serialization and gradient checks.
template <class F, class... Sets>
void visit_params(F&& f, Sets&... sets) {
    detail::visit_gates("invariant_rnn.forward", f, sets.invariant_rnn.forward...);
    detail::visit_gates("invariant_rnn.backward", f, sets.invariant_rnn.backward...);
    f(std::string("w_beta"), sets.w_beta...);
    f(std::string("b_beta"), sets.b_beta...);
    f(std::string("w_theta"), sets.w_theta...);
    f(std::string("b_theta"), sets.b_theta...);
    detail::visit_gates("variant_rnn.forward", f, sets.variant_rnn.forward...);
    detail::visit_gates("variant_rnn.backward", f, sets.variant_rnn.backward...);
    f(std::string("w_alpha"), sets.w_alpha...);
    f(std::string("b_alpha"), sets.b_alpha...);
    f(std::string("w_out"), sets.w_out...);
    f(std::string("b_out"), sets.b_out...);
}

inline bool is_bias(std::string_view name) { return name.starts_with("b_"); }

/// Zero-valued parameter set with every shape determined by the config.
inline Parameters zero_params(const ModelConfig& cfg) {
    cfg.validate();
    const std::size_t d = cfg.features, q = cfg.film_dim, h = cfg.rnn_dim;
    auto gates = [](std::size_t in, std::size_t hidden) {
        GruGates<Tensor> g;
        g.w_z = g.w_r = g.w_h = Tensor::zeros(hidden, in);
        g.u_z = g.u_r = g.u_h = Tensor::zeros(hidden, hidden);
        return g;
    };
    Parameters p;
    p.invariant_rnn = {gates(d, q), gates(d, q)};
    p.w_beta = Tensor::zeros(d, 2 * q);
    p.b_beta = Tensor::zeros(d);
    p.w_theta = Tensor::zeros(d, 2 * q);
    p.b_theta = Tensor::zeros(d);
    p.variant_rnn = {gates(d, h), gates(d, h)};
    p.w_alpha = Tensor::zeros(d, 2 * h);
    p.b_alpha = Tensor::zeros(d);
    p.w_out = Tensor::zeros(d);
    p.b_out = Tensor::scalar(0.0);
    return p;
}

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Glorot-uniform weights (limit sqrt(6 / (fan_in + fan_out))), zero biases.
/// The output weight vector is treated as a 1 x D map.
inline Parameters init_params(const ModelConfig& cfg, std::uint64_t seed) {
    Parameters p = zero_params(cfg);
    std::mt19937_64 rng(seed);
    visit_params(
        [&](const std::string& name, Tensor& t) {
            if (is_bias(name)) return;
            const double fan_in = static_cast<double>(t.is_matrix() ? t.cols() : t.size());
            const double fan_out = static_cast<double>(t.is_matrix() ? t.rows() : 1);
            const double limit = std::sqrt(6.0 / (fan_in + fan_out));
            for (double& v : t.values()) v = limit * (2.0 * unit_uniform(rng) - 1.0);
        },
        p);
    return p;
}

inline std::size_t param_count(const Parameters& p) {
    std::size_t n = 0;
    visit_params([&](const std::string&, const Tensor& t) { n += t.size(); }, p);
    return n;
}

inline std::vector<double> flatten(const Parameters& p) {
    std::vector<double> out;
    out.reserve(param_count(p));
    visit_params([&](const std::string&, const Tensor& t) { out.insert(out.end(), t.values().begin(), t.values().end()); },
                 p);
    return out;
}

inline void unflatten(std::span<const double> flat, Parameters& p) {
    if (flat.size() != param_count(p)) {
        throw DimensionError("unflatten: expected " + std::to_string(param_count(p)) + " values, got " +
                             std::to_string(flat.size()));
    }
    std::size_t off = 0;
    visit_params(
        [&](const std::string&, Tensor& t) {
            std::copy(flat.begin() + off, flat.begin() + off + t.size(), t.values().begin());
            off += t.size();
        },
        p);
}

/// Checks every slot against the shapes implied by the config.
inline void check_param_shapes(const Parameters& p, const ModelConfig& cfg) {
    const Parameters ref = zero_params(cfg);
    visit_params(
        [](const std::string& name, const Tensor& expected, const Tensor& actual) {
            if (expected.shape() != actual.shape()) {
                throw DimensionError("parameter " + name + ": expected shape " + expected.shape().str() + ", got " +
                                     actual.shape().str());
            }
        },
        ref, p);
}

inline ParamSet<Var> bind(Tape& tape, const Parameters& p) {
    ParamSet<Var> v;
    visit_params([&](const std::string&, Var& var, const Tensor& t) { var = tape.leaf(t); }, v, p);
    return v;
}

/// Copies the leaf gradients of a completed backward pass into `out`.
inline void collect_grads(const ParamSet<Var>& vars, Parameters& out) {
    visit_params([](const std::string&, const Var& v, Tensor& g) { g = v.grad(); }, vars, out);
}

// ---------------------------------------------------------------------------
// Graph builders.

/// One standard GRU step on already-prepared input.
inline Var gru_step(const GruGates<Var>& g, Var x, Var h_prev) {
    Tape& tp = *x.tape;
    Var z = sigmoid(add(matvec(g.w_z, x), matvec(g.u_z, h_prev)));
    Var r = sigmoid(add(matvec(g.w_r, x), matvec(g.u_r, h_prev)));
    Var candidate = tanh(add(matvec(g.w_h, x), hadamard(r, matvec(g.u_h, h_prev))));
    Var ones = tp.constant_filled(tp.value(z).size(), 1.0);
    return add(hadamard(sub(ones, z), candidate), hadamard(z, h_prev));
}

inline Var film(Var x, Var beta, Var theta) { return add(hadamard(beta, x), theta); }

inline Var film_gru_step(const GruGates<Var>& g, Var x, Var h_prev, Var beta, Var theta) {
    return gru_step(g, film(x, beta, theta), h_prev);
}

struct Modulation {
    Var beta, theta;
};

/// Bidirectional pass; output t is [forward state after x_t; backward state after x_t].
/// With a modulation, every input is FiLM-transformed before entering the cells.
inline std::vector<Var> birnn(const BiGru<Var>& gates, std::span<const Var> xs, const Modulation* mod = nullptr) {
    if (xs.empty()) throw ContractViolation("birnn: need at least one window");
    Tape& tp = *xs.front().tape;
    const std::size_t n = xs.size();
    auto step = [&](const GruGates<Var>& g, Var x, Var h) {
        return mod ? film_gru_step(g, x, h, mod->beta, mod->theta) : gru_step(g, x, h);
    };
    const std::size_t hidden = tp.value(gates.forward.u_z).rows();
    std::vector<Var> fwd(n), bwd(n);
    Var h = tp.constant_filled(hidden, 0.0);
    for (std::size_t t = 0; t < n; ++t) h = fwd[t] = step(gates.forward, xs[t], h);
    h = tp.constant_filled(tp.value(gates.backward.u_z).rows(), 0.0);
    for (std::size_t t = n; t-- > 0;) h = bwd[t] = step(gates.backward, xs[t], h);
    std::vector<Var> out(n);
    for (std::size_t t = 0; t < n; ++t) out[t] = concat(fwd[t], bwd[t]);
    return out;
}

inline Var affine(Var w, Var x, Var b) { return add(matvec(w, x), b); }

inline Var attention(Var h, Var w_alpha, Var b_alpha) { return tanh(affine(w_alpha, h, b_alpha)); }

/// Handles to every intermediate of one forward pass on a tape.
struct ForwardGraph {
    std::vector<Var> x;         // input rows
    std::vector<Var> q;         // invariant BiGRU states (empty for variant_only)
    Var s{}, beta{}, theta{};   // unset for variant_only
    std::vector<Var> h;         // variant BiGRU states (empty for invariant_only)
    std::vector<Var> alpha;     // empty for invariant_only
    std::vector<Var> xi;
    Var c{}, logit{}, output{};
    bool has_invariant = true;
    bool has_variant = true;
};

inline void check_input(const Tensor& x, const ModelConfig& cfg) {
    if (!x.is_matrix() || x.rows() != cfg.windows || x.cols() != cfg.features) {
        throw DimensionError("input: expected " + Shape::matrix(cfg.windows, cfg.features).str() + ", got " +
                             x.shape().str());
    }
}

inline ForwardGraph build_forward(Tape& tp, const ParamSet<Var>& pv, const Tensor& x, const ModelConfig& cfg) {
    check_input(x, cfg);
    const std::size_t n = cfg.windows, d = cfg.features;
    ForwardGraph g;
    g.has_invariant = cfg.variant != Variant::variant_only;
    g.has_variant = cfg.variant != Variant::invariant_only;
    g.x.resize(n);
    for (std::size_t t = 0; t < n; ++t) g.x[t] = tp.constant(x.values().subspan(t * d, d));

    Modulation mod;
    if (g.has_invariant) {
        g.q = birnn(pv.invariant_rnn, g.x);
        g.s = tp.mean_pool(g.q);
        g.beta = affine(pv.w_beta, g.s, pv.b_beta);
        g.theta = affine(pv.w_theta, g.s, pv.b_theta);
        mod = {g.beta, g.theta};
    } else {
        mod = {tp.constant_filled(d, 1.0), tp.constant_filled(d, 0.0)};
    }

    g.xi.resize(n);
    if (g.has_variant) {
        g.h = birnn(pv.variant_rnn, g.x, &mod);
        g.alpha.resize(n);
        for (std::size_t t = 0; t < n; ++t) {
            g.alpha[t] = attention(g.h[t], pv.w_alpha, pv.b_alpha);
            g.xi[t] = g.has_invariant ? add(g.beta, g.alpha[t]) : g.alpha[t];
        }
    } else {
        for (std::size_t t = 0; t < n; ++t) g.xi[t] = g.beta;
    }

    std::vector<Var> terms(n);
    for (std::size_t t = 0; t < n; ++t) terms[t] = hadamard(g.xi[t], g.x[t]);
    g.c = tp.sum(terms);
    g.logit = add(dot(pv.w_out, g.c), pv.b_out);
    g.output = cfg.task == Task::classification ? sigmoid(g.logit) : activate(Activation::identity, g.logit);
    return g;
}

// ---------------------------------------------------------------------------
// Plain-value surface.

/// Every intermediate of one forward pass, as values.
struct ForwardTrace {
    std::vector<Tensor> q;     // 2*film_dim each; empty for variant_only
    Tensor s;                  // 2*film_dim; zero for variant_only
    Tensor beta;               // D; zero for variant_only
    Tensor theta;              // D; zero for variant_only
    std::vector<Tensor> h;     // 2*rnn_dim each; empty for invariant_only
    std::vector<Tensor> alpha; // D each; zero for invariant_only
    std::vector<Tensor> xi;    // D each
    Tensor c;                  // D
    double logit = 0.0;
    double y_hat = 0.0;
};

inline ForwardTrace extract_trace(const ForwardGraph& g, const ModelConfig& cfg) {
    ForwardTrace tr;
    const std::size_t n = cfg.windows, d = cfg.features;
    auto values = [](const std::vector<Var>& vs) {
        std::vector<Tensor> out;
        out.reserve(vs.size());
        for (Var v : vs) out.push_back(v.value());
        return out;
    };
    tr.q = values(g.q);
    tr.h = values(g.h);
    if (g.has_invariant) {
        tr.s = g.s.value();
        tr.beta = g.beta.value();
        tr.theta = g.theta.value();
    } else {
        tr.s = Tensor::zeros(2 * cfg.film_dim);
        tr.beta = Tensor::zeros(d);
        tr.theta = Tensor::zeros(d);
    }
    tr.alpha = g.has_variant ? values(g.alpha) : std::vector<Tensor>(n, Tensor::zeros(d));
    tr.xi = values(g.xi);
    tr.c = g.c.value();
    tr.logit = g.logit.value().item();
    tr.y_hat = g.output.value().item();
    return tr;
}

inline ForwardTrace forward(const Tensor& x, const Parameters& params, const ModelConfig& cfg) {
    check_param_shapes(params, cfg);
    Tape tp;
    const ParamSet<Var> pv = bind(tp, params);
    return extract_trace(build_forward(tp, pv, x, cfg), cfg);
}

namespace detail {

inline GruGates<Var> bind_gates(Tape& tp, const GruGates<Tensor>& g) {
    return {tp.input(g.w_z), tp.input(g.u_z), tp.input(g.w_r), tp.input(g.u_r), tp.input(g.w_h), tp.input(g.u_h)};
}

inline std::vector<Var> bind_rows(Tape& tp, const Tensor& x) {
    if (!x.is_matrix()) throw DimensionError("expected a T x D matrix, got " + x.shape().str());
    std::vector<Var> rows(x.rows());
    for (std::size_t t = 0; t < x.rows(); ++t) rows[t] = tp.constant(x.values().subspan(t * x.cols(), x.cols()));
    return rows;
}

inline std::vector<Tensor> values_of(const std::vector<Var>& vs) {
    std::vector<Tensor> out;
    for (Var v : vs) out.push_back(v.value());
    return out;
}

} // namespace detail

inline Tensor gru_cell(const Tensor& x, const Tensor& h_prev, const GruGates<Tensor>& gates) {
    Tape tp;
    return gru_step(detail::bind_gates(tp, gates), tp.input(x), tp.input(h_prev)).value();
}

inline Tensor film(const Tensor& x, const Tensor& beta, const Tensor& theta) {
    require_same_shape(x, beta, "film");
    require_same_shape(x, theta, "film");
    Tape tp;
    return film(tp.input(x), tp.input(beta), tp.input(theta)).value();
}

inline Tensor film_gru_cell(const Tensor& x, const Tensor& h_prev, const Tensor& beta, const Tensor& theta,
                            const GruGates<Tensor>& gates) {
    require_same_shape(x, beta, "film_gru_cell");
    require_same_shape(x, theta, "film_gru_cell");
    Tape tp;
    return film_gru_step(detail::bind_gates(tp, gates), tp.input(x), tp.input(h_prev), tp.input(beta),
                         tp.input(theta))
        .value();
}

inline std::vector<Tensor> birnn_forward(const Tensor& x, const BiGru<Tensor>& gates) {
    Tape tp;
    const BiGru<Var> g{detail::bind_gates(tp, gates.forward), detail::bind_gates(tp, gates.backward)};
    return detail::values_of(birnn(g, detail::bind_rows(tp, x)));
}

inline std::vector<Tensor> film_birnn_forward(const Tensor& x, const Tensor& beta, const Tensor& theta,
                                              const BiGru<Tensor>& gates) {
    Tape tp;
    const BiGru<Var> g{detail::bind_gates(tp, gates.forward), detail::bind_gates(tp, gates.backward)};
    const Modulation mod{tp.input(beta), tp.input(theta)};
    return detail::values_of(birnn(g, detail::bind_rows(tp, x), &mod));
}

struct FilmParams {
    Tensor beta, theta;
};

inline FilmParams film_generator(const Tensor& s, const Tensor& w_beta, const Tensor& b_beta, const Tensor& w_theta,
                                 const Tensor& b_theta) {
    Tape tp;
    Var sv = tp.input(s);
    return {affine(tp.input(w_beta), sv, tp.input(b_beta)).value(),
            affine(tp.input(w_theta), sv, tp.input(b_theta)).value()};
}

inline Tensor attention(const Tensor& h, const Tensor& w_alpha, const Tensor& b_alpha) {
    Tape tp;
    return attention(tp.input(h), tp.input(w_alpha), tp.input(b_alpha)).value();
}

} // namespace titv
