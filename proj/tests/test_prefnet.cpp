#include "doctest.h"

#include "wmforge/checkpoint.hpp"
#include "wmforge/dataset.hpp"
#include "wmforge/prefnet.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

using namespace wmforge;

namespace {

std::vector<Image> tiny_dataset(int n, int size) {
    std::vector<Image> out;
    for (int i = 0; i < n; ++i) out.push_back(gen_clean(900, i, size));
    return out;
}

TrainConfig smoke_config() {
    TrainConfig cfg;
    cfg.steps = 3;
    cfg.batch = 2;
    cfg.width = 8;
    cfg.depth = 1;
    cfg.crop = 16;
    cfg.resize = 32;
    cfg.lr = 1e-3;
    cfg.log_every = 1;
    cfg.seed = 11;
    return cfg;
}

} // namespace

TEST_CASE("loss identities at zero scores") {
    CHECK(std::abs(ranking_loss(0.0, 0.0) - std::log(2.0)) <= 1e-6);
    CHECK(std::abs(bce_loss(0.0, 0.0) - 2.0 * std::log(2.0)) <= 1e-6);
    // hinge wants s_plus >= 1 and s_minus <= -1; at zero both margins are open
    CHECK(std::abs(hinge_loss(0.0, 0.0) - 2.0) <= 1e-9);
    CHECK(std::abs(hinge_loss(1.0, -1.0)) <= 1e-12);
    CHECK(hinge_loss(5.0, -5.0) == 0.0);
}

TEST_CASE("pairwise probability honors score gaps") {
    // gap of ln 3 puts three-to-one odds on the positive
    CHECK(std::abs(bt_probability(std::log(3.0), 0.0) - 0.75) <= 1e-9);
    CHECK(std::abs(bt_probability(0.0, std::log(3.0)) - 0.25) <= 1e-9);
    CHECK(std::abs(bt_probability(2.0, 2.0) - 0.5) <= 1e-12);
}

TEST_CASE("ranking loss is shift invariant") {
    const double base = ranking_loss(0.4, -0.3);
    for (double shift : {-7.0, -1.0, 3.5, 250.0}) {
        CHECK(std::abs(ranking_loss(0.4 + shift, -0.3 + shift) - base) <= 1e-6);
    }
}

TEST_CASE("losses stay finite at extreme scores") {
    for (double s : {1000.0, -1000.0}) {
        CHECK(std::isfinite(ranking_loss(s, -s)));
        CHECK(std::isfinite(ranking_loss(-s, s)));
        CHECK(std::isfinite(bce_loss(s, -s)));
        CHECK(std::isfinite(bce_loss(-s, s)));
        CHECK(std::isfinite(hinge_loss(s, -s)));
    }
    // the saturated branches approach their asymptotes instead of overflowing
    CHECK(ranking_loss(-1000.0, 1000.0) == doctest::Approx(2000.0).epsilon(1e-9));
    CHECK(std::abs(bt_probability(1000.0, 0.0) - 1.0) <= 1e-12);
    CHECK(std::abs(bt_probability(-1000.0, 0.0)) <= 1e-12);
}

TEST_CASE("loss kind names round trip") {
    for (auto k : {LossKind::Ranking, LossKind::Bce, LossKind::Hinge})
        CHECK(loss_kind_from(to_string(k)) == k);
    CHECK_THROWS_AS(loss_kind_from("l2"), std::invalid_argument);
}

TEST_CASE("model init is deterministic and matches the declared layout") {
    PrefModel a = init_model(32, 4, 5);
    PrefModel b = init_model(32, 4, 5);
    REQUIRE(a.names.size() == a.params.size());
    CHECK(a.names == b.names);
    for (std::size_t i = 0; i < a.params.size(); ++i) {
        REQUIRE(a.params[i].shape == b.params[i].shape);
        CHECK(a.params[i].data == b.params[i].data);
    }

    PrefModel c = init_model(32, 4, 6);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.params.size(); ++i)
        if (a.params[i].data != c.params[i].data) any_diff = true;
    CHECK(any_diff);

    // stem + 8 tensors per block + head weight/bias
    CHECK(a.params.size() == 2 + 8 * 4 + 2);
    const int stem = a.find("stem.w");
    REQUIRE(stem >= 0);
    CHECK(a.params[stem].shape == std::vector<std::int64_t>{32, 3, 4, 4});
    const int dw = a.find("block0.dw.w");
    REQUIRE(dw >= 0);
    CHECK(a.params[dw].shape == std::vector<std::int64_t>{32, 1, 7, 7});
    const int pw1 = a.find("block2.pw1.w");
    REQUIRE(pw1 >= 0);
    CHECK(a.params[pw1].shape == std::vector<std::int64_t>{128, 32, 1, 1});
    const int head = a.find("head.w");
    REQUIRE(head >= 0);
    CHECK(a.params[head].shape == std::vector<std::int64_t>{1, 32});
    CHECK(a.find("no.such.tensor") == -1);

    // biases start at zero, normalization gains at one
    const int stem_b = a.find("stem.b");
    for (float v : a.params[stem_b].data) CHECK(v == 0.0f);
    const int ln_g = a.find("block0.ln.g");
    REQUIRE(ln_g >= 0);
    for (float v : a.params[ln_g].data) CHECK(v == 1.0f);
    for (float v : a.params[stem].data) CHECK(std::isfinite(v));
}

TEST_CASE("score graph agrees with the one-off scorer and is shape flexible") {
    PrefModel m = init_model(8, 2, 3);
    Image x = gen_clean(31, 0, 64);
    const float one_off = score_image(m, x);
    CHECK(std::isfinite(one_off));

    ScoreGraph sg(m, 64, 64, false);
    CHECK(sg.score(to_chw(x)) == one_off);

    // fully convolutional: other sizes score without rebuilding the model
    Image big = gen_clean(31, 1, 96);
    ScoreGraph sg2(m, 96, 96, false);
    CHECK(std::isfinite(sg2.score(to_chw(big))));
}

TEST_CASE("make_pair crops both members identically") {
    Image src = gen_clean(77, 0, 80);
    Rng rng({77, 1});
    Pair p = make_pair(src, rng, 64, 48);
    CHECK(p.pos.h == 48);
    CHECK(p.pos.w == 48);
    CHECK(p.pos.c == 3);
    CHECK(p.neg.h == 48);
    CHECK(p.neg.w == 48);

    bool differs = false;
    for (std::size_t i = 0; i < p.pos.px.size(); ++i) {
        CHECK(p.pos.px[i] >= 0.0f);
        CHECK(p.pos.px[i] <= 1.0f);
        CHECK(p.neg.px[i] >= 0.0f);
        CHECK(p.neg.px[i] <= 1.0f);
        if (p.pos.px[i] != p.neg.px[i]) differs = true;
    }
    CHECK(differs);

    Rng rng2({77, 1});
    Pair q = make_pair(src, rng2, 64, 48);
    CHECK(q.pos.px == p.pos.px);
    CHECK(q.neg.px == p.neg.px);
}

TEST_CASE("adversarial negative climbs the score") {
    PrefModel m = init_model(8, 1, 21);
    Image x = gen_clean(3, 0, 32);
    ScoreGraph sg(m, 32, 32, true);
    const float before = sg.score(to_chw(x));
    Image pushed = adversarial_negative(sg, x, 0.06, 2);
    const float after = sg.score(to_chw(pushed));
    CHECK(after >= before);
    for (float v : pushed.px) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
}

TEST_CASE("adversarial negative is a no-op for a constant scorer") {
    PrefModel m = init_model(8, 1, 21);
    for (auto& t : m.params) std::fill(t.data.begin(), t.data.end(), 0.0f);
    Image x = gen_clean(3, 1, 32);
    ScoreGraph sg(m, 32, 32, true);
    Image pushed = adversarial_negative(sg, x, 0.06, 2);
    CHECK(pushed.px == x.px);
}

TEST_CASE("short training runs are bit-reproducible") {
    auto ds = tiny_dataset(4, 40);
    TrainConfig cfg = smoke_config();
    TrainResult r1 = train(ds, cfg);
    TrainResult r2 = train(ds, cfg);
    REQUIRE(r1.model.params.size() == r2.model.params.size());
    for (std::size_t i = 0; i < r1.model.params.size(); ++i)
        CHECK(r1.model.params[i].data == r2.model.params[i].data);
    REQUIRE(!r1.trace.empty());
    CHECK(r1.trace.back().step == cfg.steps);
    for (const auto& row : r1.trace) {
        CHECK(std::isfinite(row.loss));
        CHECK(row.rank_acc >= 0.0);
        CHECK(row.rank_acc <= 1.0);
    }

    cfg.seed = 12;
    TrainResult r3 = train(ds, cfg);
    bool any_diff = false;
    for (std::size_t i = 0; i < r1.model.params.size(); ++i)
        if (r1.model.params[i].data != r3.model.params[i].data) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("first optimizer step obeys the AdamW magnitude bound") {
    auto ds = tiny_dataset(2, 40);
    TrainConfig cfg = smoke_config();
    cfg.steps = 1;
    PrefModel before = init_model(cfg.width, cfg.depth, cfg.seed);
    TrainResult r = train(ds, cfg);
    // with bias correction the first step is at most lr per coordinate,
    // plus the decoupled decay term
    for (std::size_t i = 0; i < before.params.size(); ++i) {
        const auto& p0 = before.params[i].data;
        const auto& p1 = r.model.params[i].data;
        REQUIRE(p0.size() == p1.size());
        for (std::size_t j = 0; j < p0.size(); ++j) {
            const double bound = cfg.lr * (1.0 + cfg.weight_decay * std::abs(double(p0[j]))) + 1e-9;
            CHECK(std::abs(double(p1[j]) - double(p0[j])) <= bound);
        }
    }
}

TEST_CASE("training aborts on non-finite data with the failing step") {
    auto ds = tiny_dataset(2, 40);
    for (auto& im : ds)
        for (auto& v : im.px) v = std::numeric_limits<float>::quiet_NaN();
    TrainConfig cfg = smoke_config();
    try {
        train(ds, cfg);
        FAIL("expected training to abort");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("step 1") != std::string::npos);
    }
}

TEST_CASE("rank accuracy counts strict orderings") {
    PrefModel m = init_model(8, 1, 4);
    auto ds = tiny_dataset(2, 40);
    std::vector<Pair> pairs;
    for (int i = 0; i < 6; ++i) {
        Rng rng({5, std::uint64_t(i)});
        pairs.push_back(make_pair(ds[i % 2], rng, 32, 24));
    }
    const double acc = rank_accuracy(m, pairs);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    // the metric is a multiple of 1/n
    CHECK(std::abs(acc * 6.0 - std::round(acc * 6.0)) < 1e-9);
}

TEST_CASE("checkpoints round trip bit for bit") {
    PrefModel m = init_model(16, 2, 9);
    // make the payload non-trivial
    m.params[m.find("head.b")].data[0] = 0.125f;
    const std::string path = "ckpt_roundtrip.bin";
    save_model(m, path);
    PrefModel r = load_model(path);
    CHECK(r.width == 16);
    CHECK(r.depth == 2);
    CHECK(r.names == m.names);
    for (std::size_t i = 0; i < m.params.size(); ++i)
        CHECK(r.params[i].data == m.params[i].data);

    // a second save of the loaded model writes identical bytes
    const std::string path2 = "ckpt_roundtrip2.bin";
    save_model(r, path2);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    CHECK(!b1.empty());
    CHECK(b1.substr(0, 4) == "WMFG");
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("corrupted checkpoints are rejected") {
    PrefModel m = init_model(8, 1, 2);
    const std::string path = "ckpt_corrupt.bin";
    save_model(m, path);

    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();

    {
        std::string bad = bytes;
        bad[0] = 'X';
        std::ofstream out(path, std::ios::binary);
        out.write(bad.data(), std::streamsize(bad.size()));
    }
    CHECK_THROWS_AS(load_model(path), std::runtime_error);

    {
        std::ofstream out(path, std::ios::binary);
        out.write(bytes.data(), std::streamsize(bytes.size() / 2));
    }
    CHECK_THROWS_AS(load_model(path), std::runtime_error);

    CHECK_THROWS_AS(load_model("no_such_checkpoint.bin"), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("trace csv lists one row per logged step") {
    std::vector<TraceRow> rows{{1, 0.6931, 0.5}, {2, 0.5, 0.75}};
    const std::string path = "trace_test.csv";
    write_trace_csv(rows, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "step,loss,rank_acc");
    int n = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++n;
    CHECK(n == 2);
    std::remove(path.c_str());
}
