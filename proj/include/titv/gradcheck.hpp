// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference check of analytic gradients.

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstring>
#include <span>
#include <vector>

#include "titv/model.hpp"
#include "titv/reference.hpp"

namespace titv {

struct Evaluation {
    double value = 0.0;
    std::vector<double> gradient;
};

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0; // at worst_index
    double numeric = 0.0;
};

inline constexpr double kGradCheckFloor = 1e-8;

inline double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
    return std::abs(analytic - numeric) / denom;
}

/// Compares f's analytic gradient with (v(p + eps) - v(p - eps)) / (2 eps) on
/// every coordinate. `f` maps a flat point to {value, gradient}; `v` maps it
/// to the objective value, possibly in a wider floating type.
template <class Objective, class ValueFn>
    requires std::invocable<Objective&, std::span<const double>> && std::invocable<ValueFn&, std::span<const double>>
GradCheckResult finite_diff_check(Objective&& f, ValueFn&& v, std::span<const double> point, double eps) {
    if (!(eps > 0.0)) throw ContractViolation("finite_diff_check: epsilon must be positive");
    std::vector<double> p(point.begin(), point.end());

    const Evaluation first = f(std::span<const double>(p));
    const Evaluation second = f(std::span<const double>(p));
    if (first.gradient.size() != p.size()) {
        throw DimensionError("finite_diff_check: gradient has " + std::to_string(first.gradient.size()) +
                             " entries for a point of size " + std::to_string(p.size()));
    }
    const bool same = std::memcmp(&first.value, &second.value, sizeof(double)) == 0 &&
                      first.gradient.size() == second.gradient.size() &&
                      std::memcmp(first.gradient.data(), second.gradient.data(),
                                  first.gradient.size() * sizeof(double)) == 0;
    if (!same) throw DeterminismError("finite_diff_check: objective returned different results for the same point");

    GradCheckResult result;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double orig = p[i];
        const double up = orig + eps;
        const double down = orig - eps;
        p[i] = up;
        const auto f_up = v(std::span<const double>(p));
        p[i] = down;
        const auto f_down = v(std::span<const double>(p));
        p[i] = orig;
        // Divide by the step actually taken after rounding.
        const double numeric = static_cast<double>((f_up - f_down) / (up - down));
        const double err = relative_error(first.gradient[i], numeric);
        if (i == 0 || err > result.max_relative_error) {
            result.max_relative_error = err;
            result.worst_index = i;
            result.analytic = first.gradient[i];
            result.numeric = numeric;
        }
    }
    return result;
}

/// Same, differencing f's own values.
template <class Objective>
    requires std::invocable<Objective&, std::span<const double>>
GradCheckResult finite_diff_check(Objective&& f, std::span<const double> point, double eps) {
    return finite_diff_check(f, [&](std::span<const double> p) { return f(p).value; }, point, eps);
}

/// Objective over flattened TITV parameters for a single labelled sample.
inline Evaluation model_loss(std::span<const double> flat, const Tensor& x, double label, const ModelConfig& cfg) {
    Parameters params = zero_params(cfg);
    unflatten(flat, params);
    Tape tp;
    const ParamSet<Var> pv = bind(tp, params);
    const ForwardGraph g = build_forward(tp, pv, x, cfg);
    const Var loss = cfg.task == Task::classification ? tp.cross_entropy(g.output, label) : tp.squared_error(g.output, label);
    tp.backward(loss);
    Parameters grads = zero_params(cfg);
    collect_grads(pv, grads);
    return {loss.value().item(), flatten(grads)};
}

/// The same loss evaluated in long double by the plain-loop reference.
inline long double reference_model_loss(std::span<const double> flat, const Tensor& x, double label,
                                        const ModelConfig& cfg) {
    Parameters params = zero_params(cfg);
    unflatten(flat, params);
    return reference::loss<long double>(params, x, label, cfg);
}

} // namespace titv
