// SPDX-License-Identifier: Apache-2.0
//
// Invariant suites shared by `titv verify` and the acceptance tests:
// reconstruction identity, finite-difference gradients, and the FiLM
// identity reduction. Each returns its worst case so callers can print
// margins.

#pragma once

#include <cstdint>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "titv/gradcheck.hpp"
#include "titv/interpretation.hpp"

namespace titv {

inline std::size_t uniform_int(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(bounded(rng, hi - lo + 1));
}

inline double uniform_real(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit_uniform(rng); }

inline Tensor random_tensor(std::mt19937_64& rng, Shape shape, double lo, double hi) {
    Tensor t(shape);
    for (double& v : t.values()) v = uniform_real(rng, lo, hi);
    return t;
}

/// Glorot weights plus nonzero biases, so every term of the model is exercised.
inline Parameters random_params(const ModelConfig& cfg, std::mt19937_64& rng) {
    Parameters p = init_params(cfg, rng());
    visit_params(
        [&](const std::string& name, Tensor& t) {
            if (is_bias(name))
                for (double& v : t.values()) v = uniform_real(rng, -0.5, 0.5);
        },
        p);
    return p;
}

struct IdentityReport {
    std::size_t trials = 0;
    double max_error = 0.0;
    std::size_t worst_trial = 0;
    ModelConfig worst_config;
};

/// |out(sum FI * x + b) - forward y| over random configs, parameters and
/// inputs; variants cycle full, invariant_only, variant_only and tasks alternate.
inline IdentityReport check_identity(std::size_t trials, std::uint64_t seed) {
    static constexpr Variant variants[] = {Variant::full, Variant::invariant_only, Variant::variant_only};
    std::mt19937_64 rng(seed);
    IdentityReport rep;
    rep.trials = trials;
    for (std::size_t i = 0; i < trials; ++i) {
        ModelConfig cfg;
        cfg.features = uniform_int(rng, 1, 8);
        cfg.windows = uniform_int(rng, 1, 8);
        cfg.rnn_dim = uniform_int(rng, 1, 8);
        cfg.film_dim = uniform_int(rng, 1, 8);
        cfg.variant = variants[i % 3];
        cfg.task = (i / 3) % 2 == 0 ? Task::classification : Task::regression;
        const Parameters params = random_params(cfg, rng);
        const Tensor x = random_tensor(rng, Shape::matrix(cfg.windows, cfg.features), -1.0, 2.0);
        const ForwardTrace tr = forward(x, params, cfg);
        const Tensor fi = feature_importance(tr, params.w_out);
        const double err = std::abs(reconstruct_prediction(fi, x, params.b_out.item(), cfg.task) - tr.y_hat);
        if (!(err <= rep.max_error) || i == 0) {
            rep.max_error = err;
            rep.worst_trial = i;
            rep.worst_config = cfg;
        }
    }
    return rep;
}

struct GradientReport {
    std::size_t seeds = 0;
    double max_relative_error = 0.0;
    std::uint64_t worst_seed = 0;
    std::string worst_parameter;
    GradCheckResult worst;
};

/// Name of the parameter slot holding flat index `index`.
inline std::string param_name_at(const Parameters& p, std::size_t index) {
    std::string found;
    std::size_t off = 0;
    visit_params(
        [&](const std::string& name, const Tensor& t) {
            if (found.empty() && index < off + t.size()) found = name + "[" + std::to_string(index - off) + "]";
            off += t.size();
        },
        p);
    return found;
}

/// Full-variant classification loss gradient against central differences of
/// the long double reference loss, one random small model (D <= 8, T <= 4, dims <= 4) per seed.
inline GradientReport check_gradients(std::size_t seeds, std::uint64_t base_seed, double eps = 1e-5) {
    GradientReport rep;
    rep.seeds = seeds;
    for (std::size_t k = 0; k < seeds; ++k) {
        const std::uint64_t seed = base_seed + k;
        std::mt19937_64 rng(seed);
        ModelConfig cfg;
        cfg.features = uniform_int(rng, 1, 8);
        cfg.windows = uniform_int(rng, 1, 4);
        cfg.rnn_dim = uniform_int(rng, 1, 4);
        cfg.film_dim = uniform_int(rng, 1, 4);
        const Parameters params = random_params(cfg, rng);
        const Tensor x = random_tensor(rng, Shape::matrix(cfg.windows, cfg.features), 0.0, 1.0);
        const double label = unit_uniform(rng) < 0.5 ? 0.0 : 1.0;
        const auto flat = flatten(params);
        const GradCheckResult r = finite_diff_check(
            [&](std::span<const double> p) { return model_loss(p, x, label, cfg); },
            [&](std::span<const double> p) { return reference_model_loss(p, x, label, cfg); }, flat, eps);
        if (k == 0 || r.max_relative_error > rep.max_relative_error) {
            rep.max_relative_error = r.max_relative_error;
            rep.worst_seed = seed;
            rep.worst_parameter = param_name_at(params, r.worst_index);
            rep.worst = r;
        }
    }
    return rep;
}

struct FilmIdentityReport {
    std::size_t instances = 0;
    std::size_t mismatches = 0;
    std::size_t first_mismatch = 0;
};

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)) == 0;
}

/// FiLM-GRU with beta = 1, theta = 0 against the plain GRU, both for a single
/// cell and for a whole bidirectional sequence; equality is bit-for-bit.
inline FilmIdentityReport check_film_identity(std::size_t instances, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    FilmIdentityReport rep;
    rep.instances = instances;
    for (std::size_t i = 0; i < instances; ++i) {
        const std::size_t d = uniform_int(rng, 1, 8), h = uniform_int(rng, 1, 8), n = uniform_int(rng, 1, 6);
        auto gates = [&] {
            GruGates<Tensor> g;
            for (Tensor* w : {&g.w_z, &g.w_r, &g.w_h}) *w = random_tensor(rng, Shape::matrix(h, d), -1.0, 1.0);
            for (Tensor* u : {&g.u_z, &g.u_r, &g.u_h}) *u = random_tensor(rng, Shape::matrix(h, h), -1.0, 1.0);
            return g;
        };
        const BiGru<Tensor> bi{gates(), gates()};
        const Tensor x = random_tensor(rng, Shape::vector(d), -2.0, 2.0);
        const Tensor h_prev = random_tensor(rng, Shape::vector(h), -1.0, 1.0);
        const Tensor ones = Tensor::filled(d, 1.0), zeros = Tensor::zeros(d);
        bool same = bitwise_equal(film_gru_cell(x, h_prev, ones, zeros, bi.forward), gru_cell(x, h_prev, bi.forward));
        const Tensor seq = random_tensor(rng, Shape::matrix(n, d), -2.0, 2.0);
        const auto plain = birnn_forward(seq, bi);
        const auto modulated = film_birnn_forward(seq, ones, zeros, bi);
        for (std::size_t t = 0; t < n; ++t) same = same && bitwise_equal(plain[t], modulated[t]);
        if (!same && rep.mismatches++ == 0) rep.first_mismatch = i;
    }
    return rep;
}

} // namespace titv
