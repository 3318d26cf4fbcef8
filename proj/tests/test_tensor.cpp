// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>
#include <functional>

#include "test_util.hpp"

namespace titv {
namespace {

using testing::rand_mat;
using testing::rand_vec;

TEST(Tensor, ShapesAndAccess) {
    Tensor m = Tensor::zeros(2, 3);
    EXPECT_TRUE(m.is_matrix());
    EXPECT_EQ(m.size(), 6u);
    m(1, 2) = 5.0;
    EXPECT_EQ(m[5], 5.0);
    EXPECT_EQ(Tensor::scalar(2.5).item(), 2.5);
    EXPECT_THROW(m.item(), DimensionError);
    EXPECT_EQ(Tensor::identity(2), Tensor(Shape::matrix(2, 2), {1, 0, 0, 1}));
    EXPECT_THROW(Tensor(Shape::vector(3), std::vector<double>{1, 2}), DimensionError);
}

TEST(Matvec, IdentityAndZero) {
    const Tensor x = Tensor::vec({3, 4});
    EXPECT_EQ(matvec(Tensor::identity(2), x), x);
    EXPECT_EQ(matvec(Tensor::zeros(2, 2), x), Tensor::vec({0, 0}));
}

TEST(Matvec, MatchesNaiveLoop) {
    std::mt19937_64 rng(11);
    const Tensor w = rand_mat(rng, 5, 3), x = rand_vec(rng, 3);
    const Tensor y = matvec(w, x);
    for (std::size_t r = 0; r < 5; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < 3; ++c) acc += w(r, c) * x[c];
        EXPECT_DOUBLE_EQ(y[r], acc);
    }
}

TEST(Matvec, ShapeErrorNamesBothShapes) {
    try {
        matvec(Tensor::zeros(2, 3), Tensor::zeros(4));
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("(2x3)"), std::string::npos) << msg;
        EXPECT_NE(msg.find("(4)"), std::string::npos) << msg;
    }
}

TEST(Elementwise, Examples) {
    EXPECT_EQ(elementwise(Elementwise::hadamard, Tensor::vec({1, 2}), Tensor::vec({3, 4})), Tensor::vec({3, 8}));
    const Tensor x = Tensor::vec({1.5, -2, 7});
    EXPECT_EQ(elementwise(Elementwise::add, x, Tensor::zeros(3)), x);
    EXPECT_EQ(elementwise(Elementwise::sub, x, x), Tensor::zeros(3));
    EXPECT_EQ(elementwise(Elementwise::scale, x, Tensor::scalar(2.0)), Tensor::vec({3, -4, 14}));
    EXPECT_THROW(elementwise(Elementwise::add, x, Tensor::zeros(2)), DimensionError);
    EXPECT_THROW(elementwise(Elementwise::scale, x, Tensor::zeros(2)), DimensionError);
}

TEST(Activate, Examples) {
    EXPECT_EQ(activate(Activation::sigmoid, Tensor::scalar(0.0)).item(), 0.5);
    EXPECT_EQ(activate(Activation::tanh, Tensor::scalar(0.0)).item(), 0.0);
    const Tensor x = Tensor::vec({-3, 0.25, 9});
    EXPECT_EQ(activate(Activation::identity, x), x);
    const Tensor big = activate(Activation::sigmoid, Tensor::vec({-800, 800}));
    EXPECT_EQ(big[0], 0.0);
    EXPECT_EQ(big[1], 1.0);
}

TEST(MeanPool, Examples) {
    const Tensor v = Tensor::vec({1, -2, 3});
    const std::vector<Tensor> copies(4, v);
    EXPECT_EQ(mean_pool(copies), v);
    const std::vector<Tensor> two = {Tensor::vec({0, 0}), Tensor::vec({2, 4})};
    EXPECT_EQ(mean_pool(two), Tensor::vec({1, 2}));
    EXPECT_THROW(mean_pool(std::vector<Tensor>{}), ContractViolation);
}

TEST(MeanPool, MatchesNaiveSumOverCount) {
    std::mt19937_64 rng(5);
    std::vector<Tensor> xs;
    for (int i = 0; i < 7; ++i) xs.push_back(rand_vec(rng, 4));
    const Tensor m = mean_pool(xs);
    for (std::size_t k = 0; k < 4; ++k) {
        double acc = 0.0;
        for (const auto& x : xs) acc += x[k];
        EXPECT_DOUBLE_EQ(m[k], acc / 7.0);
    }
}

TEST(Backward, SquareHasGradientSix) {
    Tape tp;
    const Tensor x = Tensor::vec({3.0});
    Var v = tp.leaf(x);
    Var loss = dot(v, v);
    tp.backward(loss);
    EXPECT_EQ(v.grad()[0], 6.0);
}

TEST(Backward, SumOfMatvecMatchesOuterProduct) {
    std::mt19937_64 rng(3);
    const Tensor w = rand_mat(rng, 4, 3), x = rand_vec(rng, 3);
    Tape tp;
    Var wv = tp.leaf(w), xv = tp.leaf(x);
    Var y = matvec(wv, xv);
    Var loss = dot(y, tp.constant_filled(4, 1.0));
    tp.backward(loss);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(wv.grad()(r, c), x[c]); // 1 * x^T
    for (std::size_t c = 0; c < 3; ++c) {
        double col = 0.0;
        for (std::size_t r = 0; r < 4; ++r) col += w(r, c);
        EXPECT_DOUBLE_EQ(xv.grad()[c], col);
    }
}

TEST(Backward, NonScalarRootRejected) {
    Tape tp;
    const Tensor x = Tensor::vec({1, 2});
    Var v = tp.leaf(x);
    EXPECT_THROW(tp.backward(add(v, v)), ContractViolation);
}

TEST(Backward, ConstantsReceiveNoGradient) {
    Tape tp;
    const Tensor a = Tensor::vec({1, 2}), b = Tensor::vec({3, 4});
    Var av = tp.leaf(a), bv = tp.input(b);
    tp.backward(dot(av, bv));
    EXPECT_EQ(av.grad(), b);
    EXPECT_EQ(bv.grad(), Tensor::zeros(2));
}

// Builds a scalar r . op(a, b) on the tape for each differentiable op.
using Builder = std::function<Var(Tape&, Var, Var)>;

struct OpCase {
    const char* name;
    Shape a, b;
    Builder build;
};

std::vector<OpCase> op_cases() {
    return {
        {"matvec", Shape::matrix(3, 4), Shape::vector(4), [](Tape&, Var a, Var b) { return matvec(a, b); }},
        {"add", Shape::vector(5), Shape::vector(5), [](Tape&, Var a, Var b) { return add(a, b); }},
        {"sub", Shape::vector(5), Shape::vector(5), [](Tape&, Var a, Var b) { return sub(a, b); }},
        {"hadamard", Shape::vector(5), Shape::vector(5), [](Tape&, Var a, Var b) { return hadamard(a, b); }},
        {"scale", Shape::vector(5), Shape::scalar(), [](Tape&, Var a, Var b) { return scale(a, b); }},
        {"sigmoid", Shape::vector(5), Shape::vector(5), [](Tape&, Var a, Var b) { return sigmoid(hadamard(a, b)); }},
        {"tanh", Shape::vector(5), Shape::vector(5), [](Tape&, Var a, Var b) { return tanh(hadamard(a, b)); }},
        {"identity", Shape::vector(5), Shape::vector(5),
         [](Tape&, Var a, Var b) { return activate(Activation::identity, add(a, b)); }},
        {"mean_pool", Shape::vector(5), Shape::vector(5),
         [](Tape& tp, Var a, Var b) {
             const Var xs[] = {a, b, hadamard(a, b)};
             return tp.mean_pool(xs);
         }},
        {"sum", Shape::vector(5), Shape::vector(5),
         [](Tape& tp, Var a, Var b) {
             const Var xs[] = {a, hadamard(b, b), a};
             return tp.sum(xs);
         }},
        {"concat", Shape::vector(3), Shape::vector(2), [](Tape&, Var a, Var b) { return concat(a, b); }},
        {"dot", Shape::vector(5), Shape::vector(5), [](Tape&, Var a, Var b) { return dot(a, b); }},
        {"cross_entropy", Shape::vector(5), Shape::vector(5),
         [](Tape& tp, Var a, Var b) { return tp.cross_entropy(sigmoid(dot(a, b)), 1.0); }},
        {"squared_error", Shape::vector(5), Shape::vector(5),
         [](Tape& tp, Var a, Var b) { return tp.squared_error(dot(a, b), 0.3); }},
    };
}

double scalar_of(Tape& tp, const OpCase& c, const Tensor& a, const Tensor& b, const Tensor& r, Var* av = nullptr,
                 Var* bv = nullptr) {
    tp.clear();
    Var va = tp.leaf(a), vb = tp.leaf(b);
    Var out = c.build(tp, va, vb);
    Var loss = tp.value(out).size() == 1 ? out : dot(out, tp.input(r));
    if (av) {
        tp.backward(loss);
        *av = va;
        *bv = vb;
    }
    return loss.value().item();
}

TEST(Backward, EveryOpMatchesFiniteDifferences) {
    const double eps = 1e-5;
    for (const auto& c : op_cases()) {
        double worst = 0.0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            std::mt19937_64 rng(seed);
            Tensor a = random_tensor(rng, c.a, -1.5, 1.5), b = random_tensor(rng, c.b, -1.5, 1.5);
            Tape probe;
            Var pa = probe.leaf(a), pb = probe.leaf(b);
            const Tensor r = random_tensor(rng, probe.value(c.build(probe, pa, pb)).shape(), -1.0, 1.0);
            Tape tp;
            Var va, vb;
            scalar_of(tp, c, a, b, r, &va, &vb);
            const Tensor ga = va.grad(), gb = vb.grad();
            for (auto [t, g] : {std::pair<Tensor*, const Tensor*>{&a, &ga}, {&b, &gb}}) {
                for (std::size_t i = 0; i < t->size(); ++i) {
                    const double orig = (*t)[i];
                    (*t)[i] = orig + eps;
                    const double up = scalar_of(tp, c, a, b, r);
                    (*t)[i] = orig - eps;
                    const double down = scalar_of(tp, c, a, b, r);
                    (*t)[i] = orig;
                    worst = std::max(worst, relative_error((*g)[i], (up - down) / (2 * eps)));
                }
            }
        }
        EXPECT_LT(worst, 1e-4) << c.name;
    }
}

TEST(Backward, IsLinearInTheRoot) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor w = rand_mat(rng, 3, 4), x = rand_vec(rng, 4), r = rand_vec(rng, 3);
        const double a = uniform_real(rng, -2, 2), b = uniform_real(rng, -2, 2);
        auto grads = [&](int which) {
            Tape tp;
            Var wv = tp.leaf(w), xv = tp.leaf(x);
            Var f = dot(tanh(matvec(wv, xv)), tp.input(r));
            Var g = dot(xv, xv);
            Var root = which == 0 ? f : which == 1 ? g
                                                  : add(scale(f, tp.constant(Tensor::scalar(a))),
                                                        scale(g, tp.constant(Tensor::scalar(b))));
            tp.backward(root);
            return std::pair{wv.grad(), xv.grad()};
        };
        const auto [fw, fx] = grads(0);
        const auto [gw, gx] = grads(1);
        const auto [cw, cx] = grads(2);
        for (std::size_t i = 0; i < cw.size(); ++i) EXPECT_NEAR(cw[i], a * fw[i] + b * gw[i], 1e-12);
        for (std::size_t i = 0; i < cx.size(); ++i) EXPECT_NEAR(cx[i], a * fx[i] + b * gx[i], 1e-12);
    }
}

TEST(Backward, RepeatedPassesAreBitIdentical) {
    std::mt19937_64 rng(8);
    const ModelConfig cfg = testing::small_config(4, 3, 3);
    const Parameters params = random_params(cfg, rng);
    const Tensor x = rand_mat(rng, 3, 4, 0, 1);
    Tape tp;
    const ParamSet<Var> pv = bind(tp, params);
    const Var loss = tp.cross_entropy(build_forward(tp, pv, x, cfg).output, 1.0);
    tp.backward(loss);
    Parameters first = zero_params(cfg), second = zero_params(cfg);
    collect_grads(pv, first);
    tp.backward(loss);
    collect_grads(pv, second);
    const auto a = flatten(first), b = flatten(second);
    ASSERT_EQ(a.size(), b.size());
    EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)), 0);
}

TEST(Tape, ClearedTapeReproducesResults) {
    std::mt19937_64 rng(2);
    const Tensor w = rand_mat(rng, 3, 3), x = rand_vec(rng, 3);
    Tape tp;
    auto run = [&] {
        tp.clear();
        Var wv = tp.leaf(w);
        Var loss = dot(sigmoid(matvec(wv, tp.input(x))), tp.constant_filled(3, 1.0));
        tp.backward(loss);
        return std::pair{loss.value().item(), wv.grad()};
    };
    const auto first = run();
    const auto second = run();
    EXPECT_EQ(first.first, second.first);
    EXPECT_EQ(first.second, second.second);
}

TEST(Tape, MixingTapesIsRejected) {
    Tape a, b;
    const Tensor x = Tensor::vec({1, 2});
    EXPECT_THROW(add(a.leaf(x), b.leaf(x)), ContractViolation);
}

} // namespace
} // namespace titv
