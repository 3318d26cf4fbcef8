// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "test_util.hpp"

namespace titv {
namespace {

using testing::rand_gates;
using testing::rand_mat;
using testing::rand_vec;
using testing::small_config;

// Hand-rolled GRU step, one scalar at a time:
//   z = sig(Wz x + Uz h), r = sig(Wr x + Ur h), c = tanh(Wh x + r * (Uh h)),
//   h' = (1 - z) * c + z * h
std::vector<double> oracle_gru(const GruGates<Tensor>& g, const std::vector<double>& x, const std::vector<double>& h) {
    const std::size_t n = h.size(), d = x.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double az = 0, ar = 0, ah = 0, uz = 0, ur = 0, uh = 0;
        for (std::size_t k = 0; k < d; ++k) {
            az += g.w_z(i, k) * x[k];
            ar += g.w_r(i, k) * x[k];
            ah += g.w_h(i, k) * x[k];
        }
        for (std::size_t k = 0; k < n; ++k) {
            uz += g.u_z(i, k) * h[k];
            ur += g.u_r(i, k) * h[k];
            uh += g.u_h(i, k) * h[k];
        }
        const double z = 1.0 / (1.0 + std::exp(-(az + uz)));
        const double r = 1.0 / (1.0 + std::exp(-(ar + ur)));
        const double c = std::tanh(ah + r * uh);
        out[i] = (1.0 - z) * c + z * h[i];
    }
    return out;
}

std::vector<double> as_vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

std::vector<double> row(const Tensor& m, std::size_t t) {
    return {m.values().begin() + t * m.cols(), m.values().begin() + (t + 1) * m.cols()};
}

void expect_near(const Tensor& a, const std::vector<double>& b, double tol) {
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "index " << i;
}

TEST(InitParams, DeterministicWithZeroBiasesAndShapes) {
    const ModelConfig cfg = small_config(5, 3, 4);
    const Parameters a = init_params(cfg, 42), b = init_params(cfg, 42);
    const auto fa = flatten(a), fb = flatten(b);
    EXPECT_EQ(std::memcmp(fa.data(), fb.data(), fa.size() * sizeof(double)), 0);
    visit_params(
        [&](const std::string& name, const Tensor& t) {
            if (is_bias(name)) EXPECT_EQ(t, Tensor(t.shape())) << name;
        },
        a);
    EXPECT_EQ(a.w_beta.shape(), Shape::matrix(5, 8));
    EXPECT_EQ(a.w_alpha.shape(), Shape::matrix(5, 8));
    EXPECT_EQ(a.invariant_rnn.forward.w_z.shape(), Shape::matrix(4, 5));
    EXPECT_EQ(a.variant_rnn.backward.u_h.shape(), Shape::matrix(4, 4));
    EXPECT_NE(fa, flatten(init_params(cfg, 43)));
}

TEST(InitParams, WithinGlorotLimit) {
    const ModelConfig cfg = small_config(6, 2, 3);
    const Parameters p = init_params(cfg, 1);
    const double limit = std::sqrt(6.0 / (6 + 3));
    for (double v : p.invariant_rnn.forward.w_z.values()) EXPECT_LE(std::abs(v), limit);
    const double out_limit = std::sqrt(6.0 / (6 + 1));
    for (double v : p.w_out.values()) EXPECT_LE(std::abs(v), out_limit);
}

TEST(GruCell, UpdateGateOneKeepsState) {
    std::mt19937_64 rng(1);
    GruGates<Tensor> g = rand_gates(rng, 3, 2);
    g.w_z = Tensor::zeros(2, 3);
    g.u_z = Tensor::zeros(2, 2);
    // z = sigmoid(1000) == 1 exactly in double arithmetic
    const Tensor x = Tensor::vec({1, 1, 1});
    g.w_z.fill(1000.0);
    const Tensor h = Tensor::vec({0.3, -0.7});
    EXPECT_EQ(gru_cell(x, h, g), h);
    EXPECT_EQ(film_gru_cell(x, h, Tensor::vec({2, -1, 0.5}), Tensor::vec({0.1, 0.2, 0.3}), g)[0], 0.3);
}

TEST(GruCell, UpdateGateZeroGivesCandidate) {
    std::mt19937_64 rng(2);
    GruGates<Tensor> g = rand_gates(rng, 3, 2);
    const Tensor x = Tensor::vec({0.5, 1, 1});
    g.w_z = Tensor::zeros(2, 3);
    g.w_z.fill(-1000.0);
    const Tensor out = gru_cell(x, Tensor::zeros(2), g);
    const Tensor cand = activate(Activation::tanh, matvec(g.w_h, x));
    for (std::size_t i = 0; i < 2; ++i) EXPECT_DOUBLE_EQ(out[i], cand[i]);
}

TEST(GruCell, MatchesUnrolledOracle) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        const GruGates<Tensor> g = rand_gates(rng, 4, 3);
        const Tensor x = rand_vec(rng, 4), h = rand_vec(rng, 3);
        expect_near(gru_cell(x, h, g), oracle_gru(g, as_vec(x), as_vec(h)), 1e-14);
    }
}

TEST(GruCell, ShapeMismatch) {
    std::mt19937_64 rng(3);
    const GruGates<Tensor> g = rand_gates(rng, 4, 3);
    EXPECT_THROW(gru_cell(Tensor::zeros(5), Tensor::zeros(3), g), DimensionError);
    EXPECT_THROW(film_gru_cell(Tensor::zeros(4), Tensor::zeros(3), Tensor::zeros(3), Tensor::zeros(4), g),
                 DimensionError);
}

TEST(Film, Examples) {
    const Tensor x = Tensor::vec({2, 3});
    EXPECT_EQ(film(x, Tensor::vec({1, 1}), Tensor::vec({0, 0})), x);
    EXPECT_EQ(film(x, Tensor::vec({0.5, 2}), Tensor::vec({1, -1})), Tensor::vec({2, 5}));
    EXPECT_EQ(film(Tensor::zeros(2), Tensor::vec({4, 5}), Tensor::vec({-1, 7})), Tensor::vec({-1, 7}));
    EXPECT_THROW(film(x, Tensor::zeros(3), Tensor::zeros(2)), DimensionError);
}

TEST(FilmGruCell, IdentityModulationIsBitExact) {
    const FilmIdentityReport rep = check_film_identity(100, 77);
    EXPECT_EQ(rep.mismatches, 0u);
}

TEST(FilmGruCell, MatchesUnrolledOracle) {
    std::mt19937_64 rng(4);
    const GruGates<Tensor> g = rand_gates(rng, 3, 2);
    const Tensor x = rand_vec(rng, 3), h = rand_vec(rng, 2), beta = rand_vec(rng, 3), theta = rand_vec(rng, 3);
    std::vector<double> mod(3);
    for (int k = 0; k < 3; ++k) mod[k] = beta[k] * x[k] + theta[k];
    expect_near(film_gru_cell(x, h, beta, theta, g), oracle_gru(g, mod, as_vec(h)), 1e-14);
}

TEST(Birnn, SingleWindow) {
    std::mt19937_64 rng(5);
    const BiGru<Tensor> bi{rand_gates(rng, 3, 2), rand_gates(rng, 3, 2)};
    const Tensor x = rand_mat(rng, 1, 3);
    const auto q = birnn_forward(x, bi);
    ASSERT_EQ(q.size(), 1u);
    const Tensor f = gru_cell(Tensor::vec(row(x, 0)), Tensor::zeros(2), bi.forward);
    const Tensor b = gru_cell(Tensor::vec(row(x, 0)), Tensor::zeros(2), bi.backward);
    EXPECT_EQ(q[0], Tensor::vec({f[0], f[1], b[0], b[1]}));
}

TEST(Birnn, MatchesUnrolledOracle) {
    std::mt19937_64 rng(6);
    const BiGru<Tensor> bi{rand_gates(rng, 3, 2), rand_gates(rng, 3, 2)};
    const Tensor x = rand_mat(rng, 4, 3), beta = rand_vec(rng, 3), theta = rand_vec(rng, 3);
    std::vector<std::vector<double>> mod(4, std::vector<double>(3));
    for (int t = 0; t < 4; ++t)
        for (int k = 0; k < 3; ++k) mod[t][k] = beta[k] * x(t, k) + theta[k];
    std::vector<std::vector<double>> fwd(4), bwd(4);
    std::vector<double> h(2, 0.0);
    for (int t = 0; t < 4; ++t) h = fwd[t] = oracle_gru(bi.forward, mod[t], h);
    h.assign(2, 0.0);
    for (int t = 3; t >= 0; --t) h = bwd[t] = oracle_gru(bi.backward, mod[t], h);
    const auto out = film_birnn_forward(x, beta, theta, bi);
    for (int t = 0; t < 4; ++t) expect_near(out[t], {fwd[t][0], fwd[t][1], bwd[t][0], bwd[t][1]}, 1e-14);
}

TEST(Birnn, ReversingWindowsSwapsDirections) {
    std::mt19937_64 rng(7);
    const GruGates<Tensor> a = rand_gates(rng, 3, 2), b = rand_gates(rng, 3, 2);
    const Tensor x = rand_mat(rng, 5, 3);
    Tensor rev = Tensor::zeros(5, 3);
    for (int t = 0; t < 5; ++t)
        for (int k = 0; k < 3; ++k) rev(t, k) = x(4 - t, k);
    const auto q = birnn_forward(x, BiGru<Tensor>{a, b});
    const auto r = birnn_forward(rev, BiGru<Tensor>{b, a});
    for (int t = 0; t < 5; ++t) {
        const Tensor& lhs = q[t];
        const Tensor& rhs = r[4 - t];
        for (int i = 0; i < 2; ++i) {
            EXPECT_EQ(lhs[i], rhs[2 + i]);
            EXPECT_EQ(lhs[2 + i], rhs[i]);
        }
    }
}

TEST(Birnn, ZeroInputAndZeroInputWeightsGiveZero) {
    std::mt19937_64 rng(8);
    BiGru<Tensor> bi{rand_gates(rng, 3, 2), rand_gates(rng, 3, 2)};
    for (GruGates<Tensor>* g : {&bi.forward, &bi.backward}) g->w_z = g->w_r = g->w_h = Tensor::zeros(2, 3);
    for (const auto& q : birnn_forward(Tensor::zeros(4, 3), bi)) EXPECT_EQ(q, Tensor::zeros(4));
}

TEST(FilmGenerator, Examples) {
    std::mt19937_64 rng(9);
    const Tensor wb = rand_mat(rng, 3, 4), wt = rand_mat(rng, 3, 4), bb = rand_vec(rng, 3), bt = rand_vec(rng, 3);
    const FilmParams zero = film_generator(Tensor::zeros(4), wb, bb, wt, bt);
    EXPECT_EQ(zero.beta, bb);
    EXPECT_EQ(zero.theta, bt);
    const FilmParams ones = film_generator(rand_vec(rng, 4), Tensor::zeros(3, 4), Tensor::filled(3, 1.0), wt, bt);
    EXPECT_EQ(ones.beta, Tensor::filled(3, 1.0));
    const Tensor s = rand_vec(rng, 4);
    const FilmParams fp = film_generator(s, wb, bb, wt, bt);
    for (int r = 0; r < 3; ++r) {
        double acc_b = bb[r], acc_t = bt[r];
        for (int c = 0; c < 4; ++c) {
            acc_b += wb(r, c) * s[c];
            acc_t += wt(r, c) * s[c];
        }
        EXPECT_NEAR(fp.beta[r], acc_b, 1e-15);
        EXPECT_NEAR(fp.theta[r], acc_t, 1e-15);
    }
}

TEST(Attention, Examples) {
    std::mt19937_64 rng(10);
    EXPECT_EQ(attention(rand_vec(rng, 4), Tensor::zeros(3, 4), Tensor::zeros(3)), Tensor::zeros(3));
    const Tensor b = rand_vec(rng, 3);
    EXPECT_EQ(attention(Tensor::zeros(4), rand_mat(rng, 3, 4), b), activate(Activation::tanh, b));
    for (int i = 0; i < 50; ++i) {
        const Tensor a = attention(rand_vec(rng, 4), rand_mat(rng, 3, 4), rand_vec(rng, 3));
        for (double v : a.values()) EXPECT_LT(std::abs(v), 1.0);
    }
}

TEST(Forward, ZeroInputGivesSigmoidOfBias) {
    std::mt19937_64 rng(11);
    const ModelConfig cfg = small_config(3, 4, 2);
    Parameters p = random_params(cfg, rng);
    p.b_out = Tensor::scalar(0.7);
    const ForwardTrace tr = forward(Tensor::zeros(4, 3), p, cfg);
    EXPECT_EQ(tr.c, Tensor::zeros(3));
    EXPECT_EQ(tr.y_hat, sigmoid(0.7));
}

TEST(Forward, XiIsBetaPlusAlpha) {
    std::mt19937_64 rng(12);
    const ModelConfig cfg = small_config(3, 4, 2);
    const ForwardTrace tr = forward(rand_mat(rng, 4, 3), random_params(cfg, rng), cfg);
    for (std::size_t t = 0; t < 4; ++t) EXPECT_EQ(tr.xi[t], elementwise(Elementwise::add, tr.beta, tr.alpha[t]));
}

TEST(Forward, MatchesReferenceImplementation) {
    for (Variant v : {Variant::full, Variant::invariant_only, Variant::variant_only}) {
        for (Task task : {Task::classification, Task::regression}) {
            std::mt19937_64 rng(13);
            const ModelConfig cfg = small_config(4, 5, 3, v, task);
            const Parameters p = random_params(cfg, rng);
            const Tensor x = rand_mat(rng, 5, 4, 0, 1);
            EXPECT_NEAR(forward(x, p, cfg).y_hat, reference::output<double>(p, x, cfg), 1e-12);
        }
    }
}

TEST(Forward, AblationStructure) {
    std::mt19937_64 rng(14);
    const Tensor x = rand_mat(rng, 4, 3);
    const ModelConfig inv = small_config(3, 4, 2, Variant::invariant_only);
    const ForwardTrace a = forward(x, random_params(inv, rng), inv);
    for (std::size_t t = 1; t < 4; ++t) EXPECT_EQ(a.xi[t], a.xi[0]);
    for (const auto& al : a.alpha) EXPECT_EQ(al, Tensor::zeros(3));
    const ModelConfig var = small_config(3, 4, 2, Variant::variant_only);
    const ForwardTrace b = forward(x, random_params(var, rng), var);
    EXPECT_EQ(b.beta, Tensor::zeros(3));
    for (std::size_t t = 0; t < 4; ++t) EXPECT_EQ(b.xi[t], b.alpha[t]);
}

TEST(Forward, VariantOnlyIgnoresInvariantParameters) {
    std::mt19937_64 rng(15);
    const ModelConfig cfg = small_config(3, 4, 2, Variant::variant_only);
    Parameters p = random_params(cfg, rng);
    const Tensor x = rand_mat(rng, 4, 3);
    const double before = forward(x, p, cfg).y_hat;
    p.w_beta.fill(5.0);
    p.invariant_rnn.forward.w_z.fill(-3.0);
    EXPECT_EQ(forward(x, p, cfg).y_hat, before);
}

TEST(Forward, WindowOrderMatters) {
    std::mt19937_64 rng(16);
    const ModelConfig cfg = small_config(3, 4, 3);
    const Parameters p = random_params(cfg, rng);
    const Tensor x = rand_mat(rng, 4, 3);
    Tensor perm = x;
    for (int k = 0; k < 3; ++k) std::swap(perm(0, k), perm(2, k));
    const ForwardTrace a = forward(x, p, cfg), b = forward(perm, p, cfg);
    EXPECT_NE(a.q[1], b.q[1]);
    EXPECT_NE(a.h[1], b.h[1]);
}

TEST(Forward, SummaryIsPermutationInvariantWithoutRecurrence) {
    std::mt19937_64 rng(17);
    const ModelConfig cfg = small_config(3, 4, 3);
    Parameters p = random_params(cfg, rng);
    // u = 0 and a saturated-shut update gate leave h_t a function of x_t alone.
    for (GruGates<Tensor>* g : {&p.invariant_rnn.forward, &p.invariant_rnn.backward}) {
        g->u_z = g->u_r = g->u_h = Tensor::zeros(3, 3);
        g->w_z = Tensor::zeros(3, 3);
        for (double& v : g->w_z.values()) v = -1000.0;
    }
    const Tensor x = rand_mat(rng, 4, 3, 0.1, 1.0);
    Tensor perm = x;
    for (int k = 0; k < 3; ++k) {
        std::swap(perm(0, k), perm(3, k));
        std::swap(perm(1, k), perm(2, k));
    }
    const Tensor a = forward(x, p, cfg).s, b = forward(perm, p, cfg).s;
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
}

TEST(Forward, InputShapeChecked) {
    const ModelConfig cfg = small_config(3, 4, 2);
    const Parameters p = init_params(cfg, 0);
    EXPECT_THROW(forward(Tensor::zeros(4, 2), p, cfg), DimensionError);
    EXPECT_THROW(forward(Tensor::zeros(3, 3), p, cfg), DimensionError);
    EXPECT_THROW(forward(Tensor::zeros(4, 3), init_params(small_config(3, 4, 5), 0), cfg), DimensionError);
}

TEST(ModelConfig, Validation) {
    EXPECT_THROW(small_config(0, 1, 1).validate(), ConfigError);
    EXPECT_THROW(small_config(1, 1, 0).validate(), ConfigError);
    EXPECT_EQ(parse_variant("invariant-only"), Variant::invariant_only);
    EXPECT_EQ(parse_variant("variant_only"), Variant::variant_only);
    EXPECT_THROW(parse_variant("both"), ConfigError);
}

TEST(Parameters, FlattenRoundTrip) {
    std::mt19937_64 rng(18);
    const ModelConfig cfg = small_config(3, 2, 2);
    const Parameters p = random_params(cfg, rng);
    Parameters q = zero_params(cfg);
    unflatten(flatten(p), q);
    EXPECT_EQ(flatten(q), flatten(p));
    EXPECT_EQ(param_count(p), flatten(p).size());
    EXPECT_THROW(unflatten(std::vector<double>(3), q), DimensionError);
}

} // namespace
} // namespace titv
