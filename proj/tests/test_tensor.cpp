#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rfsf/autodiff.hpp"
#include "rfsf/errors.hpp"
#include "rfsf/optim.hpp"
#include "rfsf/rng.hpp"

using namespace rfsf;

namespace {

Tensor random_tensor(const std::vector<int>& shape, Rng& rng, double lo = -1.5, double hi = 1.5) {
    Tensor t(shape);
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Random values bounded away from zero, for kinked ops like relu.
Tensor random_tensor_no_kink(const std::vector<int>& shape, Rng& rng) {
    Tensor t(shape);
    for (int64_t i = 0; i < t.size(); ++i) {
        double v = rng.uniform(0.1, 1.5);
        t[i] = rng.uniform() < 0.5 ? -v : v;
    }
    return t;
}

}  // namespace

TEST_CASE("matmul identity leaves matrix unchanged") {
    Rng rng(1);
    Tensor a = random_tensor({3, 3}, rng);
    Tensor eye({3, 3});
    for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    Var out = matmul(Var::constant(a), Var::constant(eye));
    for (int64_t i = 0; i < a.size(); ++i) CHECK(out.value()[i] == doctest::Approx(a[i]).epsilon(1e-15));
}

TEST_CASE("matmul hand arithmetic") {
    Var a = Var::constant(Tensor({2, 2}, {1, 2, 3, 4}));
    Var b = Var::constant(Tensor({2, 1}, {1, 1}));
    Var c = matmul(a, b);
    CHECK(c.value()[0] == 3.0);
    CHECK(c.value()[1] == 7.0);
}

TEST_CASE("matmul with zero matrix annihilates") {
    Rng rng(2);
    Var z = Var::constant(Tensor::zeros({2, 3}));
    Var b = Var::constant(random_tensor({3, 4}, rng));
    Var c = matmul(z, b);
    CHECK(c.value().shape() == std::vector<int>{2, 4});
    for (int64_t i = 0; i < c.value().size(); ++i) CHECK(c.value()[i] == 0.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Var a = Var::constant(Tensor::zeros({2, 3}));
    Var b = Var::constant(Tensor::zeros({4, 5}));
    try {
        matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[4x5]") != std::string::npos);
    }
}

TEST_CASE("softmax of equal inputs is uniform") {
    Var s = softmax_stable(Var::constant(Tensor({3}, {0, 0, 0})), 0);
    for (int i = 0; i < 3; ++i) CHECK(s.value()[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("softmax shift invariance") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor x = random_tensor({6}, rng, -4, 4);
        double c = rng.uniform(-100, 100);
        Tensor xc = x;
        for (int64_t i = 0; i < xc.size(); ++i) xc[i] += c;
        Var s1 = softmax_stable(Var::constant(x), 0);
        Var s2 = softmax_stable(Var::constant(xc), 0);
        for (int64_t i = 0; i < x.size(); ++i)
            CHECK(std::fabs(s1.value()[i] - s2.value()[i]) <= 1e-12);
    }
}

TEST_CASE("softmax of log-integers recovers ratios") {
    Var s = softmax_stable(
        Var::constant(Tensor({3}, {std::log(1.0), std::log(2.0), std::log(3.0)})), 0);
    CHECK(s.value()[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-13));
    CHECK(s.value()[1] == doctest::Approx(2.0 / 6.0).epsilon(1e-13));
    CHECK(s.value()[2] == doctest::Approx(3.0 / 6.0).epsilon(1e-13));
}

TEST_CASE("softmax rows are non-negative and sum to one") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor x = random_tensor({4, 7}, rng, -30, 30);
        Var s = softmax_stable(Var::constant(x), 1);
        for (int i = 0; i < 4; ++i) {
            double sum = 0.0;
            for (int j = 0; j < 7; ++j) {
                CHECK(s.value().at(i, j) >= 0.0);
                sum += s.value().at(i, j);
            }
            CHECK(std::fabs(sum - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("cross entropy of confident correct prediction is near zero") {
    Tensor logits({1, 3}, {25.0, 0.0, 0.0});  // margin >= 20
    Var loss = cross_entropy(Var::constant(logits), {0});
    CHECK(loss.value().item() <= 1e-6);
}

TEST_CASE("cross entropy of uniform logits is ln K") {
    for (int k : {2, 3, 7}) {
        Tensor logits({2, k});
        std::vector<int> labels = {0, k - 1};
        Var loss = cross_entropy(Var::constant(logits), labels);
        CHECK(loss.value().item() == doctest::Approx(std::log(static_cast<double>(k))).epsilon(1e-14));
    }
}

TEST_CASE("cross entropy matches scalar log-sum-exp oracle") {
    // oracle: log(e^2 + e^1 + e^0) - 2
    double expected = std::log(std::exp(2.0) + std::exp(1.0) + std::exp(0.0)) - 2.0;
    Var loss = cross_entropy(Var::constant(Tensor({1, 3}, {2, 1, 0})), {0});
    CHECK(loss.value().item() == doctest::Approx(expected).epsilon(1e-14));
    CHECK(loss.value().item() == doctest::Approx(0.40760596444438).epsilon(1e-10));
}

TEST_CASE("cross entropy rejects out-of-range label") {
    CHECK_THROWS_AS(cross_entropy(Var::constant(Tensor::zeros({1, 3})), {3}), IndexError);
    CHECK_THROWS_AS(cross_entropy(Var::constant(Tensor::zeros({1, 3})), {-1}), IndexError);
}

TEST_CASE("backward of sum gives all-ones gradient") {
    Rng rng(5);
    Tensor x = random_tensor({3, 4}, rng);
    Var xin = Var::input(x);
    backward(reduce_sum_all(xin));
    for (int64_t i = 0; i < x.size(); ++i) CHECK(xin.node->grad[i] == 1.0);
}

TEST_CASE("backward of sum of squares at x=3 gives 6") {
    Var xin = Var::input(Tensor({1}, {3.0}));
    backward(reduce_sum_all(mul(xin, xin)));
    CHECK(xin.node->grad[0] == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("backward accumulates across calls; zero_grad resets") {
    Param p(Tensor({2}, {1.0, 2.0}), "p");
    auto run = [&]() {
        Var leaf = Var::leaf(p);
        backward(reduce_sum_all(mul(leaf, leaf)));
    };
    run();
    Tensor first = p.grad;
    run();  // no zero_grad in between: sums
    for (int64_t i = 0; i < first.size(); ++i)
        CHECK(p.grad[i] == doctest::Approx(2.0 * first[i]).epsilon(1e-15));
    p.zero_grad();
    run();
    for (int64_t i = 0; i < first.size(); ++i) CHECK(p.grad[i] == first[i]);
}

TEST_CASE("backward on non-scalar is a contract error") {
    Var x = Var::input(Tensor::zeros({2, 2}));
    CHECK_THROWS_AS(backward(relu(x)), ContractError);
}

TEST_CASE("grad_check: sum of squares") {
    Rng rng(6);
    Tensor x = random_tensor({5}, rng);
    double err = grad_check([](const Var& v) { return reduce_sum_all(mul(v, v)); }, x);
    CHECK(err <= 1e-8);
}

TEST_CASE("grad_check: constant function") {
    Rng rng(7);
    Tensor x = random_tensor({4}, rng);
    double err = grad_check([](const Var& v) {
        (void)v;
        return Var::constant(Tensor::scalar(2.5));
    }, x);
    CHECK(err == 0.0);
}

// Every tracked primitive, 20 random inputs each, error <= 1e-6.
TEST_CASE("grad_check: all primitives") {
    Rng rng(8);
    const double tol = 1e-6;

    for (int trial = 0; trial < 20; ++trial) {
        // elementwise binary ops against a fixed co-input
        Tensor a = random_tensor({3, 4}, rng);
        Tensor b = random_tensor({3, 4}, rng);
        CHECK(grad_check([&](const Var& v) { return reduce_sum_all(mul(add(v, Var::constant(b)), v)); }, a) <= tol);
        CHECK(grad_check([&](const Var& v) { return reduce_sum_all(mul(sub(v, Var::constant(b)), v)); }, a) <= tol);
        CHECK(grad_check([&](const Var& v) { return reduce_sum_all(mul(v, Var::constant(b))); }, a) <= tol);
        CHECK(grad_check([&](const Var& v) { return reduce_sum_all(scale(mul(v, v), -0.37)); }, a) <= tol);

        // matmul, both operand positions
        Tensor m1 = random_tensor({3, 4}, rng);
        Tensor m2 = random_tensor({4, 2}, rng);
        CHECK(grad_check([&](const Var& v) {
            Var y = matmul(v, Var::constant(m2));
            return reduce_sum_all(mul(y, y));
        }, m1) <= tol);
        CHECK(grad_check([&](const Var& v) {
            Var y = matmul(Var::constant(m1), v);
            return reduce_sum_all(mul(y, y));
        }, m2) <= tol);
        Tensor m3 = random_tensor({2, 4}, rng);
        CHECK(grad_check([&](const Var& v) {
            Var y = matmul_nt(v, Var::constant(m3));
            return reduce_sum_all(mul(y, y));
        }, m1) <= tol);

        // activations
        Tensor xk = random_tensor_no_kink({2, 5}, rng);
        CHECK(grad_check([](const Var& v) { return reduce_sum_all(mul(relu(v), relu(v))); }, xk) <= tol);
        CHECK(grad_check([](const Var& v) { return reduce_sum_all(sigmoid(v)); }, xk) <= tol);
        CHECK(grad_check([](const Var& v) { return reduce_sum_all(tanh_act(v)); }, xk) <= tol);

        // layer norm (x, gain, bias)
        Tensor lx = random_tensor({3, 6}, rng);
        Tensor lg = random_tensor({6}, rng, 0.5, 1.5);
        Tensor lb = random_tensor({6}, rng);
        CHECK(grad_check([&](const Var& v) {
            Var y = layer_norm(v, Var::constant(lg), Var::constant(lb));
            return reduce_sum_all(mul(y, y));
        }, lx) <= tol);
        CHECK(grad_check([&](const Var& v) {
            Var y = layer_norm(Var::constant(lx), v, Var::constant(lb));
            return reduce_sum_all(mul(y, y));
        }, lg) <= tol);

        // conv1d: input, weight, bias
        Tensor cx = random_tensor({2, 9}, rng);
        Tensor cw = random_tensor({3, 2, 3}, rng);
        Tensor cb = random_tensor({3}, rng);
        auto conv_loss = [&](const Var& x, const Var& w, const Var& bias) {
            Var y = conv1d(x, w, bias, 2, 1);
            return reduce_sum_all(mul(y, y));
        };
        CHECK(grad_check([&](const Var& v) { return conv_loss(v, Var::constant(cw), Var::constant(cb)); }, cx) <= tol);
        CHECK(grad_check([&](const Var& v) { return conv_loss(Var::constant(cx), v, Var::constant(cb)); }, cw) <= tol);
        CHECK(grad_check([&](const Var& v) { return conv_loss(Var::constant(cx), Var::constant(cw), v); }, cb) <= tol);

        // reductions
        Tensor rx = random_tensor({4, 5}, rng);
        CHECK(grad_check([](const Var& v) {
            Var y = reduce_mean_axis(v, 0);
            return reduce_sum_all(mul(y, y));
        }, rx) <= tol);
        CHECK(grad_check([](const Var& v) {
            Var y = reduce_mean_axis(v, 1);
            return reduce_sum_all(mul(y, y));
        }, rx) <= tol);
        CHECK(grad_check([](const Var& v) {
            Var y = reduce_max_axis(v, 1);
            return reduce_sum_all(mul(y, y));
        }, rx) <= tol);

        // concat / slicing
        Tensor c1 = random_tensor({2, 3}, rng);
        Tensor c2 = random_tensor({2, 2}, rng);
        CHECK(grad_check([&](const Var& v) {
            Var y = concat({v, Var::constant(c2)}, 1);
            return reduce_sum_all(mul(y, y));
        }, c1) <= tol);
        CHECK(grad_check([&](const Var& v) {
            Var y = col_slice(v, 1, 3);
            return reduce_sum_all(mul(y, y));
        }, c1) <= tol);

        // embedding lookup
        Tensor table = random_tensor({5, 3}, rng);
        CHECK(grad_check([&](const Var& v) {
            Var r0 = embedding_row(v, trial % 5);
            return reduce_sum_all(mul(r0, r0));
        }, table) <= tol);

        // softmax / losses
        Tensor sx = random_tensor({3, 4}, rng, -3, 3);
        CHECK(grad_check([&](const Var& v) {
            Var y = softmax_stable(v, 1);
            return reduce_sum_all(mul(y, Var::constant(b)));
        }, sx) <= tol);
        CHECK(grad_check([&](const Var& v) { return cross_entropy(v, {1, 0, 3}); }, sx) <= tol);
        CHECK(grad_check([&](const Var& v) {
            return bce_with_logits(reshape(v, {12}), std::vector<double>(12, 0.3));
        }, sx) <= tol);

        Tensor probs({4});
        double psum = 0.0;
        for (int i = 0; i < 4; ++i) {
            probs[i] = rng.uniform(0.05, 1.0);
            psum += probs[i];
        }
        for (int i = 0; i < 4; ++i) probs[i] /= psum;
        CHECK(grad_check([&](const Var& v) { return nll_probs(v, 2); }, probs) <= tol);
        CHECK(grad_check([&](const Var& v) { return nll_normalized_probs(v, 1); }, probs) <= tol);

        // broadcast helpers
        Tensor rv = random_tensor({4}, rng);
        Tensor rm = random_tensor({3, 4}, rng);
        CHECK(grad_check([&](const Var& v) {
            Var y = add_rowvec(Var::constant(rm), v);
            return reduce_sum_all(mul(y, y));
        }, rv) <= tol);
        Tensor sv = random_tensor({3}, rng);
        CHECK(grad_check([&](const Var& v) {
            Var y = row_scale(Var::constant(rm), v);
            return reduce_sum_all(mul(y, y));
        }, sv) <= tol);
        CHECK(grad_check([&](const Var& v) {
            Var y = row_scale(v, Var::constant(sv));
            return reduce_sum_all(mul(y, y));
        }, rm) <= tol);
    }
}

TEST_CASE("adam: zero gradient leaves parameter unchanged") {
    Param p(Tensor({3}, {1.0, -2.0, 0.5}), "p");
    AdamState st(p.value.shape(), 0.9, 0.999, 1e-8);
    Tensor before = p.value;
    adam_step(p, Tensor::zeros({3}), st, 0.1);
    for (int64_t i = 0; i < before.size(); ++i) {
        CHECK(p.value[i] == before[i]);
        CHECK(st.m[i] == 0.0);
        CHECK(st.v[i] == 0.0);
    }
    CHECK(st.step_count == 1);
}

TEST_CASE("adam: first step matches hand-computed oracle") {
    // p=1, g=1, lr=0.1, b1=0.9, b2=0.999, eps=1e-8
    double m = 0.1;                 // (1-b1)*g
    double v = 0.001;               // (1-b2)*g^2
    double lr_t = 0.1 * std::sqrt(1.0 - 0.999) / (1.0 - 0.9);
    double expected = 1.0 - lr_t * m / (std::sqrt(v) + 1e-8);

    Param p(Tensor({1}, {1.0}), "p");
    AdamState st(p.value.shape(), 0.9, 0.999, 1e-8);
    adam_step(p, Tensor({1}, {1.0}), st, 0.1);
    CHECK(p.value[0] == doctest::Approx(expected).epsilon(1e-15));
    CHECK(p.value[0] == doctest::Approx(0.9000000316227665).epsilon(1e-12));
}

TEST_CASE("adam: identical params and grads update identically") {
    Param p1(Tensor({2}, {0.3, -0.7}), "p1");
    Param p2(Tensor({2}, {0.3, -0.7}), "p2");
    AdamState s1(p1.value.shape(), 0.9, 0.999, 1e-8);
    AdamState s2(p2.value.shape(), 0.9, 0.999, 1e-8);
    Tensor g({2}, {0.11, -2.3});
    for (int step = 0; step < 5; ++step) {
        adam_step(p1, g, s1, 0.01);
        adam_step(p2, g, s2, 0.01);
    }
    for (int64_t i = 0; i < 2; ++i) CHECK(p1.value[i] == p2.value[i]);
}

TEST_CASE("adam: non-finite gradient is rejected with diagnostic") {
    Param p(Tensor({1}, {1.0}), "weight");
    AdamState st(p.value.shape(), 0.9, 0.999, 1e-8);
    Tensor g({1}, {std::nan("")});
    try {
        adam_step(p, g, st, 0.1);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("weight") != std::string::npos);
    }
    CHECK(p.value[0] == 1.0);  // update rejected
}

TEST_CASE("seeded training loop is bit-identical across runs") {
    auto run = [](uint64_t seed) {
        Rng rng(seed);
        Param w(xavier_uniform({4, 2}, 4, 2, rng), "w");
        AdamOptimizer opt({&w}, 0.05);
        for (int step = 0; step < 20; ++step) {
            opt.zero_grad();
            Tensor x = random_tensor({3, 4}, rng);
            Var y = matmul(Var::constant(x), Var::leaf(w));
            backward(reduce_sum_all(mul(y, y)));
            opt.step();
        }
        return w.value;
    };
    Tensor a = run(42);
    Tensor b = run(42);
    for (int64_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    Tensor c = run(43);
    bool any_diff = false;
    for (int64_t i = 0; i < a.size(); ++i)
        if (a[i] != c[i]) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("zero_grad then backward equals backward on a fresh graph") {
    Rng rng(9);
    Tensor init = random_tensor({3, 3}, rng);
    Param p1(init, "p1");
    Param p2(init, "p2");

    Var l1 = reduce_sum_all(mul(Var::leaf(p1), Var::leaf(p1)));
    backward(l1);
    p1.zero_grad();
    Var l1b = reduce_sum_all(mul(Var::leaf(p1), Var::leaf(p1)));
    backward(l1b);

    Var l2 = reduce_sum_all(mul(Var::leaf(p2), Var::leaf(p2)));
    backward(l2);

    for (int64_t i = 0; i < p1.grad.size(); ++i) CHECK(p1.grad[i] == p2.grad[i]);
}
