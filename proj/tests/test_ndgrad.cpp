#include "wmforge/ndgrad.hpp"

#include "grad_check.hpp"
#include "wmforge/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <string>

using namespace wmforge;
using gradcheck::max_fd_error;
using gradcheck::random_tensor;
using gradcheck::random_tensor_no_kink;

namespace {

// weighted sum keeps every gradient entry well away from zero cancellation
int weighted_sum(nd::Graph& g, int y, Rng& rng) {
    Tensor w(g.value(y).shape);
    for (auto& v : w.data) v = float(rng.bernoulli(0.5) ? rng.uniform(0.5, 1.5) : -rng.uniform(0.5, 1.5));
    return g.sum(g.mul(y, g.constant(w)));
}

} // namespace

TEST_CASE("conv2d gradients match finite differences") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        Rng rng({0xc0, seed});
        nd::Graph g;
        int x = g.input("x", random_tensor({2, 6, 6}, rng), true);
        int w = g.input("w", random_tensor({3, 2, 3, 3}, rng), true);
        int b = g.input("b", random_tensor({3}, rng), true);
        int y = g.conv2d(x, w, b, 1, 1, 1);
        int out = weighted_sum(g, y, rng);
        CHECK(max_fd_error(g, out, x) < 1e-3);
        CHECK(max_fd_error(g, out, w) < 1e-3);
        CHECK(max_fd_error(g, out, b) < 1e-3);
    }
}

TEST_CASE("strided and grouped conv gradients") {
    Rng rng(0xc1);
    nd::Graph g;
    int x = g.input("x", random_tensor({4, 8, 8}, rng), true);
    int w = g.input("w", random_tensor({4, 1, 3, 3}, rng), true); // depthwise
    int b = g.input("b", random_tensor({4}, rng), true);
    int y = g.conv2d(x, w, b, 2, 1, 4);
    int out = weighted_sum(g, y, rng);
    CHECK(max_fd_error(g, out, x) < 1e-3);
    CHECK(max_fd_error(g, out, w) < 1e-3);
    CHECK(max_fd_error(g, out, b) < 1e-3);
}

TEST_CASE("elementwise op gradients") {
    Rng rng(0xc2);
    nd::Graph g;
    int a = g.input("a", random_tensor({3, 4, 4}, rng), true);
    int b = g.input("b", random_tensor({3, 4, 4}, rng), true);
    int y = g.mul(g.add(a, g.scale(b, 0.7f)), g.sub(a, b));
    int out = weighted_sum(g, y, rng);
    CHECK(max_fd_error(g, out, a) < 1e-3);
    CHECK(max_fd_error(g, out, b) < 1e-3);
}

TEST_CASE("activation gradients") {
    Rng rng(0xc3);
    {
        nd::Graph g;
        int x = g.input("x", random_tensor({2, 5, 5}, rng, -3.0, 3.0), true);
        int out = weighted_sum(g, g.silu(x), rng);
        CHECK(max_fd_error(g, out, x) < 1e-3);
    }
    {
        nd::Graph g;
        int x = g.input("x", random_tensor({2, 5, 5}, rng, -3.0, 3.0), true);
        int out = weighted_sum(g, g.sigmoid(x), rng);
        CHECK(max_fd_error(g, out, x) < 1e-3);
    }
    {
        nd::Graph g;
        int x = g.input("x", random_tensor({2, 5, 5}, rng, 0.5, 2.0), true);
        int out = weighted_sum(g, g.log(x), rng);
        CHECK(max_fd_error(g, out, x) < 1e-3);
    }
    {
        nd::Graph g;
        int x = g.input("x", random_tensor_no_kink({2, 5, 5}, rng), true);
        int out = weighted_sum(g, g.relu(x), rng);
        CHECK(max_fd_error(g, out, x) < 1e-3);
    }
    {
        nd::Graph g;
        int x = g.input("x", random_tensor({2, 5, 5}, rng, -4.0, 4.0), true);
        int out = weighted_sum(g, g.logsigmoid(x), rng);
        CHECK(max_fd_error(g, out, x) < 1e-3);
    }
}

TEST_CASE("normalization and head gradients") {
    Rng rng(0xc4);
    {
        nd::Graph g;
        int x = g.input("x", random_tensor({4, 3, 3}, rng), true);
        int out = weighted_sum(g, g.layernorm_ch(x), rng);
        CHECK(max_fd_error(g, out, x) < 1e-3);
    }
    {
        nd::Graph g;
        int x = g.input("x", random_tensor({4, 3, 3}, rng), true);
        int ga = g.input("ga", random_tensor({4}, rng), true);
        int be = g.input("be", random_tensor({4}, rng), true);
        int out = weighted_sum(g, g.chan_affine(x, ga, be), rng);
        CHECK(max_fd_error(g, out, x) < 1e-3);
        CHECK(max_fd_error(g, out, ga) < 1e-3);
        CHECK(max_fd_error(g, out, be) < 1e-3);
    }
    {
        nd::Graph g;
        int x = g.input("x", random_tensor({5, 4, 4}, rng), true);
        int out = weighted_sum(g, g.mean_pool(x), rng);
        CHECK(max_fd_error(g, out, x) < 1e-3);
    }
    {
        nd::Graph g;
        int x = g.input("x", random_tensor({6}, rng), true);
        int w = g.input("w", random_tensor({2, 6}, rng), true);
        int b = g.input("b", random_tensor({2}, rng), true);
        int out = weighted_sum(g, g.affine(x, w, b), rng);
        CHECK(max_fd_error(g, out, x) < 1e-3);
        CHECK(max_fd_error(g, out, w) < 1e-3);
        CHECK(max_fd_error(g, out, b) < 1e-3);
    }
}

TEST_CASE("layernorm is mean-zero unit-variance over channels") {
    Rng rng(0xc5);
    nd::Graph g;
    int x = g.input("x", random_tensor({8, 2, 2}, rng, -2.0, 2.0), true);
    int y = g.layernorm_ch(x);
    const Tensor& v = g.forward(y);
    for (int s = 0; s < 4; ++s) { // each spatial site normalizes across c
        double mean = 0.0, var = 0.0;
        for (int c = 0; c < 8; ++c) mean += v.data[std::size_t(c * 4 + s)];
        mean /= 8.0;
        for (int c = 0; c < 8; ++c) {
            const double d = v.data[std::size_t(c * 4 + s)] - mean;
            var += d * d;
        }
        var /= 8.0;
        CHECK(std::abs(mean) < 1e-6);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
    }
}

TEST_CASE("layernorm handles a constant channel vector via eps") {
    nd::Graph g;
    Tensor c({3, 2, 2});
    c.fill(0.25f);
    int x = g.input("x", c, true);
    int y = g.layernorm_ch(x);
    for (float v : g.forward(y).data) {
        CHECK(std::isfinite(v));
        CHECK(std::abs(v) < 1e-5);
    }
}

TEST_CASE("relu subgradient at the kink is zero") {
    nd::Graph g;
    Tensor t({3});
    t.data = {-1.0f, 0.0f, 2.0f};
    int x = g.input("x", t, true);
    int out = g.sum(g.relu(x));
    g.forward(out);
    g.backward(out);
    const Tensor& gr = g.grad(x);
    CHECK(gr.data[0] == 0.0f);
    CHECK(gr.data[1] == 0.0f); // boundary belongs to the flat side
    CHECK(gr.data[2] == 1.0f);
}

TEST_CASE("shape mismatches are rejected with the offending node id") {
    nd::Graph g;
    int a = g.input("a", Tensor({2, 4, 4}), true);
    int w = g.input("w", Tensor({3, 5, 3, 3}), true); // 5 != 2 input channels
    int b = g.input("b", Tensor({3}), true);
    try {
        g.conv2d(a, w, b, 1, 1, 1);
        FAIL("expected a shape error");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("node") != std::string::npos);
        CHECK(msg.find("3") != std::string::npos); // the conv node would be id 3
    }

    int c = g.input("c", Tensor({2, 4, 4}), true);
    int d = g.input("d", Tensor({2, 5, 4}), true);
    CHECK_THROWS_AS((void)g.add(c, d), std::invalid_argument);
}

TEST_CASE("backward demands a scalar output and a fresh forward") {
    Rng rng(0xc6);
    nd::Graph g;
    int x = g.input("x", random_tensor({2, 3, 3}, rng), true);
    int y = g.silu(x);
    int s = g.sum(y);
    CHECK_THROWS_AS(g.backward(s), std::logic_error); // no forward yet
    g.forward(s);
    CHECK_THROWS_AS(g.backward(y), std::invalid_argument); // non-scalar
    g.backward(s);

    g.set_value(x, random_tensor({2, 3, 3}, rng));
    CHECK_THROWS_AS(g.backward(s), std::logic_error); // rebind invalidates
    g.forward(s);
    g.backward(s);
}

TEST_CASE("only leaves can be rebound and grads skip untracked nodes") {
    Rng rng(0xc7);
    nd::Graph g;
    int x = g.input("x", random_tensor({2, 3, 3}, rng), true);
    int frozen = g.input("frozen", random_tensor({2, 3, 3}, rng), false);
    int y = g.mul(x, frozen);
    int s = g.sum(y);
    CHECK_THROWS_AS(g.set_value(y, Tensor({2, 3, 3})), std::invalid_argument);
    CHECK_THROWS_AS(g.set_value(x, Tensor({2, 3, 4})), std::invalid_argument);
    g.forward(s);
    g.backward(s);
    CHECK(g.grad(x).numel() == 18);
    CHECK(g.grad(frozen).numel() == 0); // untracked leaf keeps no gradient

    CHECK(g.find("x") == x);
    CHECK(g.find("nope") == -1);
}

TEST_CASE("conv stride and padding arithmetic") {
    nd::Graph g;
    int x = g.input("x", Tensor({1, 8, 8}), false);
    int w = g.input("w", Tensor({2, 1, 3, 3}), false);
    int b = g.input("b", Tensor({2}), false);
    int y1 = g.conv2d(x, w, b, 1, 1, 1); // same padding
    CHECK(g.value(y1).shape == std::vector<std::int64_t>{2, 8, 8});
    int y2 = g.conv2d(x, w, b, 2, 1, 1);
    CHECK(g.value(y2).shape == std::vector<std::int64_t>{2, 4, 4});
    int w4 = g.input("w4", Tensor({2, 1, 4, 4}), false);
    int y3 = g.conv2d(x, w4, b, 4, 0, 1); // patchify stem shape
    CHECK(g.value(y3).shape == std::vector<std::int64_t>{2, 2, 2});
}
