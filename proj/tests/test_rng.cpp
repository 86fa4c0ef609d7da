#include "wmforge/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using wmforge::Rng;

TEST_CASE("same key words give the same stream") {
    Rng a({1, 2, 3});
    Rng b({1, 2, 3});
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different key words give different streams") {
    Rng a({1, 2, 3});
    Rng b({1, 2, 4});
    int same = 0;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() == b.next_u64()) ++same;
    CHECK(same == 0);
}

TEST_CASE("uniform stays in the half-open unit interval") {
    Rng r(42);
    double lo = 1.0, hi = 0.0, sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double v = r.uniform();
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
        REQUIRE(v >= 0.0);
        REQUIRE(v < 1.0);
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(lo < 0.001);
    CHECK(hi > 0.999);
}

TEST_CASE("uniform_int covers both endpoints") {
    Rng r(7);
    std::set<std::int64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        std::int64_t v = r.uniform_int(3, 7);
        REQUIRE(v >= 3);
        REQUIRE(v <= 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 5);
}

TEST_CASE("normal moments match the standard gaussian") {
    Rng r(11);
    const int n = 200000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double v = r.normal();
        s1 += v;
        s2 += v * v;
    }
    CHECK(s1 / n == doctest::Approx(0.0).epsilon(0.02));
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("trunc_normal respects its bounds") {
    Rng r(13);
    for (int i = 0; i < 10000; ++i) {
        double v = r.trunc_normal(0.02, -0.04, 0.04);
        REQUIRE(v >= -0.04);
        REQUIRE(v <= 0.04);
    }
}
