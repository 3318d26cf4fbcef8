// SPDX-License-Identifier: Apache-2.0
//
// Descriptive statistics used by reports and oracles.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "titv/errors.hpp"

namespace titv::stats {

inline double mean(std::span<const double> xs) {
    if (xs.empty()) throw ContractViolation("mean of empty sample");
    double acc = 0.0;
    for (double x : xs) acc += x;
    return acc / static_cast<double>(xs.size());
}

/// Population standard deviation.
inline double stddev(std::span<const double> xs) {
    const double m = mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(xs.size()));
}

/// Nearest-rank quantile: the ceil(p*n)-th smallest value (1-based), p in [0, 1].
inline double quantile(std::span<const double> xs, double p) {
    if (xs.empty()) throw ContractViolation("quantile of empty sample");
    std::vector<double> sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size())));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

/// 1-based ranks with ties sharing their average rank.
inline std::vector<double> ranks(std::span<const double> xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> r(xs.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

/// Pearson correlation; 0 when either side has zero variance.
inline double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) throw ContractViolation("pearson: samples must be non-empty and equal length");
    const double ma = mean(a), mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

/// Spearman rank correlation (Pearson on average ranks).
inline double spearman(std::span<const double> a, std::span<const double> b) {
    const auto ra = ranks(a);
    const auto rb = ranks(b);
    return pearson(ra, rb);
}

inline std::vector<double> softmax(std::span<const double> xs) {
    if (xs.empty()) return {};
    const double mx = *std::max_element(xs.begin(), xs.end());
    std::vector<double> out(xs.size());
    double total = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) total += out[i] = std::exp(xs[i] - mx);
    for (double& v : out) v /= total;
    return out;
}

} // namespace titv::stats
