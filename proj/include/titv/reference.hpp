// SPDX-License-Identifier: Apache-2.0
//
// Plain-loop evaluation of the TITV forward pass and loss in an arbitrary
// floating type. Gradient checks use the long double instantiation as the
// finite-difference side, so that rounding in the loss does not swamp tiny
// gradient components.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "titv/model.hpp"

namespace titv::reference {

template <class S>
using Vec = std::vector<S>;

template <class S>
Vec<S> matvec(const Tensor& w, const Vec<S>& x) {
    Vec<S> out(w.rows(), S(0));
    for (std::size_t r = 0; r < w.rows(); ++r)
        for (std::size_t c = 0; c < w.cols(); ++c) out[r] += static_cast<S>(w(r, c)) * x[c];
    return out;
}

template <class S>
S sigmoid(S z) {
    return S(1) / (S(1) + std::exp(-z));
}

template <class S>
Vec<S> gru(const GruGates<Tensor>& g, const Vec<S>& x, const Vec<S>& h) {
    const Vec<S> wz = matvec(g.w_z, x), uz = matvec(g.u_z, h);
    const Vec<S> wr = matvec(g.w_r, x), ur = matvec(g.u_r, h);
    const Vec<S> wh = matvec(g.w_h, x), uh = matvec(g.u_h, h);
    Vec<S> out(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        const S z = sigmoid(wz[i] + uz[i]);
        const S r = sigmoid(wr[i] + ur[i]);
        const S cand = std::tanh(wh[i] + r * uh[i]);
        out[i] = (S(1) - z) * cand + z * h[i];
    }
    return out;
}

/// [forward; backward] states per window, inputs optionally FiLM-modulated.
template <class S>
std::vector<Vec<S>> birnn(const BiGru<Tensor>& g, const std::vector<Vec<S>>& xs, const Vec<S>* beta = nullptr,
                          const Vec<S>* theta = nullptr) {
    const std::size_t n = xs.size();
    std::vector<Vec<S>> in = xs;
    if (beta)
        for (auto& x : in)
            for (std::size_t i = 0; i < x.size(); ++i) x[i] = (*beta)[i] * x[i] + (*theta)[i];
    std::vector<Vec<S>> fwd(n), bwd(n);
    Vec<S> h(g.forward.u_z.rows(), S(0));
    for (std::size_t t = 0; t < n; ++t) h = fwd[t] = gru(g.forward, in[t], h);
    h.assign(g.backward.u_z.rows(), S(0));
    for (std::size_t t = n; t-- > 0;) h = bwd[t] = gru(g.backward, in[t], h);
    std::vector<Vec<S>> out(n);
    for (std::size_t t = 0; t < n; ++t) {
        out[t] = fwd[t];
        out[t].insert(out[t].end(), bwd[t].begin(), bwd[t].end());
    }
    return out;
}

template <class S>
Vec<S> affine(const Tensor& w, const Vec<S>& x, const Tensor& b) {
    Vec<S> out = matvec(w, x);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += static_cast<S>(b[i]);
    return out;
}

/// Model output (probability, or the regression value).
template <class S>
S output(const Parameters& p, const Tensor& x, const ModelConfig& cfg) {
    const std::size_t n = cfg.windows, d = cfg.features;
    std::vector<Vec<S>> xs(n, Vec<S>(d));
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t k = 0; k < d; ++k) xs[t][k] = static_cast<S>(x(t, k));

    Vec<S> beta(d, S(1)), theta(d, S(0));
    const bool invariant = cfg.variant != Variant::variant_only;
    const bool variant = cfg.variant != Variant::invariant_only;
    if (invariant) {
        const auto q = birnn(p.invariant_rnn, xs);
        Vec<S> s(q.front().size(), S(0));
        for (const auto& qt : q)
            for (std::size_t i = 0; i < s.size(); ++i) s[i] += qt[i];
        for (S& v : s) v /= static_cast<S>(n);
        beta = affine(p.w_beta, s, p.b_beta);
        theta = affine(p.w_theta, s, p.b_theta);
    }
    Vec<S> c(d, S(0));
    std::vector<Vec<S>> h;
    if (variant) h = birnn(p.variant_rnn, xs, &beta, &theta);
    for (std::size_t t = 0; t < n; ++t) {
        Vec<S> alpha(d, S(0));
        if (variant) {
            alpha = affine(p.w_alpha, h[t], p.b_alpha);
            for (S& a : alpha) a = std::tanh(a);
        }
        for (std::size_t k = 0; k < d; ++k) {
            const S xi = (invariant ? beta[k] : S(0)) + alpha[k];
            c[k] += xi * xs[t][k];
        }
    }
    S logit = static_cast<S>(p.b_out.item());
    S acc = S(0);
    for (std::size_t k = 0; k < d; ++k) acc += static_cast<S>(p.w_out[k]) * c[k];
    logit += acc;
    return cfg.task == Task::classification ? sigmoid(logit) : logit;
}

/// Cross-entropy (probability clamped to [1e-12, 1 - 1e-12]) or squared error.
template <class S>
S loss(const Parameters& p, const Tensor& x, double label, const ModelConfig& cfg) {
    const S y = output<S>(p, x, cfg);
    if (cfg.task == Task::regression) return (y - static_cast<S>(label)) * (y - static_cast<S>(label));
    const S floor = static_cast<S>(1e-12);
    const S pc = std::clamp(y, floor, S(1) - floor);
    return label == 1.0 ? -std::log(pc) : -std::log(S(1) - pc);
}

} // namespace titv::reference
