#include "wmforge/dataset.hpp"

#include "wmforge/rng.hpp"

#include <algorithm>
#include <cmath>

namespace wmforge {

Image gen_clean(std::uint64_t seed, std::uint64_t image_id, int size) {
    Rng rng({seed, 0x636c65616eull, image_id});
    const int S = size;
    std::vector<double> img(std::size_t(S) * S * 3);

    // per-channel low-frequency background; integer cycle counts keep the
    // periodic extension seamless
    for (int ch = 0; ch < 3; ++ch) {
        double base = rng.uniform(0.3, 0.7);
        for (std::size_t i = 0; i < std::size_t(S) * S; ++i) img[i * 3 + ch] = base;
        for (int t = 0; t < 3; ++t) {
            int fx = int(rng.uniform_int(0, 3));
            int fy = int(rng.uniform_int(0, 3));
            double amp = rng.uniform(0.02, 0.08);
            double ph = rng.uniform(0.0, 2.0 * M_PI);
            double ph2 = rng.uniform(0.0, 2.0 * M_PI);
            if (fx == 0 && fy == 0) continue;
            for (int y = 0; y < S; ++y) {
                double cy = std::cos(2.0 * M_PI * fy * (double(y) / S) + ph2);
                for (int x = 0; x < S; ++x) {
                    double cx = std::cos(2.0 * M_PI * fx * (double(x) / S) + ph);
                    img[(std::size_t(y) * S + x) * 3 + ch] += amp * cx * cy;
                }
            }
        }
    }

    int shapes = int(rng.uniform_int(4, 9));
    for (int k = 0; k < shapes; ++k) {
        double rx = rng.uniform(S / 14.0, S / 5.0);
        double ry = rng.uniform(S / 14.0, S / 5.0);
        double sigma = rng.uniform(2.0, 4.0);
        double r_eff = std::min(rx, ry);
        double ext = std::max(rx, ry) * (1.0 + 6.0 * sigma / r_eff);
        if (ext > S * 0.45) {
            double f = S * 0.45 / ext;
            rx *= f;
            ry *= f;
            sigma *= f;
            r_eff = std::min(rx, ry);
            ext = std::max(rx, ry) * (1.0 + 6.0 * sigma / r_eff);
        }
        double cx = rng.uniform(ext, S - ext);
        double cy = rng.uniform(ext, S - ext);
        double ang = rng.uniform(0.0, M_PI);
        double color[3];
        for (double& c : color) c = rng.uniform(0.05, 0.95);
        bool ellipse = rng.uniform_int(0, 1) == 0;

        double ca = std::cos(ang), sa = std::sin(ang);
        double steep = r_eff / sigma;
        for (int y = 0; y < S; ++y) {
            double dy = double(y) - cy;
            for (int x = 0; x < S; ++x) {
                double dx = double(x) - cx;
                double xr = ca * dx + sa * dy;
                double yr = -sa * dx + ca * dy;
                double q = ellipse
                               ? std::sqrt((xr / rx) * (xr / rx) + (yr / ry) * (yr / ry))
                               : std::max(std::abs(xr) / rx, std::abs(yr) / ry);
                double t = std::clamp((q - 1.0) * steep, -40.0, 40.0);
                double alpha = 1.0 / (1.0 + std::exp(t));
                if (alpha < 1e-9) continue;
                double* px = &img[(std::size_t(y) * S + x) * 3];
                for (int ch = 0; ch < 3; ++ch)
                    px[ch] = alpha * color[ch] + (1.0 - alpha) * px[ch];
            }
        }
    }

    Image out(S, S, 3);
    for (std::size_t i = 0; i < img.size(); ++i)
        out.px[i] = float(0.03 + 0.94 * std::clamp(img[i], 0.0, 1.0));
    return out;
}

std::vector<Image> gen_clean_set(std::uint64_t seed, int count, int size, std::uint64_t first_id) {
    std::vector<Image> set;
    set.reserve(std::size_t(count));
    for (int i = 0; i < count; ++i) set.push_back(gen_clean(seed, first_id + std::uint64_t(i), size));
    return set;
}

} // namespace wmforge
