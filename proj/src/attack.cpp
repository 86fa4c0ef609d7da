#include "wmforge/attack.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wmforge {

namespace {

void check_attack_inputs(const Image& x_w, const AttackConfig& cfg) {
    if (x_w.c != 3) throw std::invalid_argument("attack expects 3-channel images");
    if (cfg.k < 1) throw std::invalid_argument("attack needs at least one step");
    if (!(cfg.lr > 0.0)) throw std::invalid_argument("attack learning rate must be positive");
}

} // namespace

std::vector<Image> extract_snapshots(const PrefModel& m, const Image& x_w,
                                     const AttackConfig& cfg, const std::vector<int>& snap_ks) {
    check_attack_inputs(x_w, cfg);
    for (std::size_t i = 0; i < snap_ks.size(); ++i) {
        if (snap_ks[i] < 1 || snap_ks[i] > cfg.k) throw std::invalid_argument("snapshot step out of range");
        if (i > 0 && snap_ks[i] <= snap_ks[i - 1])
            throw std::invalid_argument("snapshot steps must be ascending");
    }

    ScoreGraph sg(m, x_w.h, x_w.w, true);
    const Tensor xw_chw = to_chw(x_w);
    const std::size_t n = xw_chw.data.size();
    std::vector<float> delta(n, 0.0f);
    Tensor probe({3, x_w.h, x_w.w});

    std::vector<Image> out;
    out.reserve(snap_ks.size());
    std::size_t next_snap = 0;
    for (int t = 1; t <= cfg.k; ++t) {
        for (std::size_t i = 0; i < n; ++i)
            probe.data[i] = std::clamp(xw_chw.data[i] - delta[i], 0.0f, 1.0f);
        sg.score_with_grad(probe);
        const Tensor& g = sg.input_grad();
        const float lr = float(cfg.lr);
        for (std::size_t i = 0; i < n; ++i) {
            const float gi = g.data[i];
            if (!std::isfinite(gi))
                throw std::runtime_error("non-finite gradient at attack step " + std::to_string(t));
            const float z = xw_chw.data[i] - delta[i];
            if (z >= 0.0f && z <= 1.0f) delta[i] -= lr * gi;
        }
        if (next_snap < snap_ks.size() && t == snap_ks[next_snap]) {
            // w_hat = x_w - clamp(x_w - delta); exact duality with remove()
            Tensor wt({3, x_w.h, x_w.w});
            for (std::size_t i = 0; i < n; ++i) {
                const float z = xw_chw.data[i] - delta[i];
                wt.data[i] = xw_chw.data[i] - std::clamp(z, 0.0f, 1.0f);
            }
            out.push_back(from_chw(wt));
            ++next_snap;
        }
    }
    return out;
}

Image extract(const PrefModel& m, const Image& x_w, const AttackConfig& cfg) {
    return extract_snapshots(m, x_w, cfg, {cfg.k})[0];
}

namespace {

int working_side(const Image& x, const AttackConfig& cfg) {
    return std::min(cfg.working, std::max(x.h, x.w));
}

} // namespace

std::vector<Image> extract_multires_snapshots(const PrefModel& m, const Image& x_w,
                                              const AttackConfig& cfg,
                                              const std::vector<int>& snap_ks) {
    check_attack_inputs(x_w, cfg);
    const int side = working_side(x_w, cfg);
    const Image small = resize_bilinear(x_w, side, side);
    std::vector<Image> res = extract_snapshots(m, small, cfg, snap_ks);
    for (auto& w : res)
        if (w.h != x_w.h || w.w != x_w.w) w = resize_bilinear(w, x_w.h, x_w.w);
    return res;
}

Image extract_multires(const PrefModel& m, const Image& x_w, const AttackConfig& cfg) {
    return extract_multires_snapshots(m, x_w, cfg, {cfg.k})[0];
}

Image remove_watermark(const PrefModel& m, const Image& x_w, const AttackConfig& cfg) {
    const Image w = extract_multires(m, x_w, cfg);
    Image out(x_w.h, x_w.w, x_w.c);
    for (std::size_t i = 0; i < out.px.size(); ++i)
        out.px[i] = std::clamp(x_w.px[i] - w.px[i], 0.0f, 1.0f);
    return out;
}

Image forge(const PrefModel& m, const Image& x_w, const Image& y, const AttackConfig& cfg) {
    if (y.c != 3) throw std::invalid_argument("forge target must have 3 channels");
    Image w = extract_multires(m, x_w, cfg);
    if (w.h != y.h || w.w != y.w) w = resize_bilinear(w, y.h, y.w);
    Image out(y.h, y.w, y.c);
    for (std::size_t i = 0; i < out.px.size(); ++i)
        out.px[i] = std::clamp(y.px[i] + w.px[i], 0.0f, 1.0f);
    return out;
}

} // namespace wmforge
