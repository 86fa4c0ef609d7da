#include "doctest.h"

#include "wmforge/dataset.hpp"
#include "wmforge/refwm.hpp"

#include <cmath>

using namespace wmforge;

TEST_CASE("clean images are deterministic in seed and id") {
    Image a = gen_clean(9, 0, 64);
    Image b = gen_clean(9, 0, 64);
    CHECK(a.px == b.px);
    CHECK(a.h == 64);
    CHECK(a.w == 64);
    CHECK(a.c == 3);

    Image c = gen_clean(9, 1, 64);
    CHECK(a.px != c.px);
    Image d = gen_clean(10, 0, 64);
    CHECK(a.px != d.px);

    std::vector<Image> set = gen_clean_set(9, 3, 64);
    CHECK(set.size() == 3);
    CHECK(set[0].px == a.px);
    CHECK(set[1].px == c.px);
}

TEST_CASE("clean images keep headroom away from the clamp rails") {
    for (int i = 0; i < 4; ++i) {
        Image x = gen_clean(12, i, 96);
        float lo = 1.0f, hi = 0.0f;
        for (float v : x.px) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(lo >= 0.029f);
        CHECK(hi <= 0.971f);
        CHECK(hi - lo > 0.1f); // non-degenerate content
    }
}

TEST_CASE("clean images are quiet in the carrier band") {
    // if the generator leaked broadband energy into the annulus, blind
    // decoding would see large correlations even without a mark
    WatermarkKey key = make_key(1234);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        Image x = gen_clean(9, i, 128);
        DecodeResult d = decode(x, key);
        for (double c : d.correlations) worst = std::max(worst, std::abs(c));
    }
    CHECK(worst < 0.015);
}
