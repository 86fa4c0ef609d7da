#include "wmforge/refwm.hpp"

#include "wmforge/fft.hpp"
#include "wmforge/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace wmforge {

BitMessage random_message(Rng& rng, int L) {
    BitMessage m;
    m.bits.resize(std::size_t(L));
    for (auto& b : m.bits) b = std::uint8_t(rng.uniform_int(0, 1));
    return m;
}

BitMessage message_from_hex(const std::string& hex, int L) {
    if (L % 4 != 0 || int(hex.size()) != L / 4)
        throw std::invalid_argument("message hex must encode exactly " + std::to_string(L) + " bits");
    BitMessage m;
    m.bits.reserve(std::size_t(L));
    for (char ch : hex) {
        int v;
        if (ch >= '0' && ch <= '9') v = ch - '0';
        else if (ch >= 'a' && ch <= 'f') v = ch - 'a' + 10;
        else if (ch >= 'A' && ch <= 'F') v = ch - 'A' + 10;
        else throw std::invalid_argument("malformed message hex");
        for (int k = 3; k >= 0; --k) m.bits.push_back(std::uint8_t((v >> k) & 1));
    }
    return m;
}

std::string message_to_hex(const BitMessage& m) {
    if (m.length() % 4 != 0) throw std::invalid_argument("message length must be a multiple of 4");
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (int i = 0; i < m.length(); i += 4) {
        int v = (m.bits[std::size_t(i)] << 3) | (m.bits[std::size_t(i) + 1] << 2) |
                (m.bits[std::size_t(i) + 2] << 1) | m.bits[std::size_t(i) + 3];
        out += digits[v];
    }
    return out;
}

WatermarkKey make_key(std::uint64_t seed, int L, int grid, double alpha, bool content_aware) {
    if (L != 16 && L != 32 && L != 64 && L != 256)
        throw std::invalid_argument("message length must be one of 16, 32, 64, 256");
    if (!fft::is_pow2(grid) || grid < 16)
        throw std::invalid_argument("key grid must be a power of two, at least 16");

    WatermarkKey key;
    key.seed = seed;
    key.L = L;
    key.grid = grid;
    key.alpha = alpha;
    key.content_aware = content_aware;
    key.carriers.assign(std::size_t(L) * grid * grid, 0.0);

    const int S = grid;
    const double r_lo = double(S) / 8.0, r_hi = double(S) / 3.0;
    std::size_t plane = std::size_t(S) * S;

    for (int b = 0; b < L; ++b) {
        Rng rng({seed, 0x6b657932u, std::uint64_t(b)});

        // complex gaussian spectrum restricted to the annulus, then
        // conjugate-symmetrized so the inverse transform is real
        std::vector<std::complex<double>> grid_c(plane, {0.0, 0.0});
        for (int r = 0; r < S; ++r) {
            int i = r - S / 2;
            for (int c = 0; c < S; ++c) {
                int j = c - S / 2;
                double rad = std::sqrt(double(i) * i + double(j) * j);
                if (rad < r_lo || rad > r_hi) continue;
                double re = rng.normal();
                double im = rng.normal();
                int u = (i + S) % S, v = (j + S) % S;
                grid_c[std::size_t(u) * S + v] = {re, im};
            }
        }
        for (int u = 0; u < S; ++u)
            for (int v = 0; v < S; ++v) {
                int pu = (S - u) % S, pv = (S - v) % S;
                if (std::make_pair(u, v) > std::make_pair(pu, pv)) continue;
                if (u == pu && v == pv) {
                    grid_c[std::size_t(u) * S + v] = grid_c[std::size_t(u) * S + v].real();
                    continue;
                }
                grid_c[std::size_t(pu) * S + pv] = std::conj(grid_c[std::size_t(u) * S + v]);
            }

        fft::transform2d(grid_c, S, S, true);

        double* p = key.carriers.data() + std::size_t(b) * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] = grid_c[i].real();

        // Gram-Schmidt against the previous carriers, then unit norm
        for (int a = 0; a < b; ++a) {
            const double* q = key.carrier(a);
            double dot = 0.0;
            for (std::size_t i = 0; i < plane; ++i) dot += p[i] * q[i];
            for (std::size_t i = 0; i < plane; ++i) p[i] -= dot * q[i];
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < plane; ++i) norm += p[i] * p[i];
        norm = std::sqrt(norm);
        if (norm < 1e-9) throw std::logic_error("degenerate carrier; key seed unusable");
        for (std::size_t i = 0; i < plane; ++i) p[i] /= norm;
    }
    return key;
}

namespace {

// carrier combination for a message, at key-grid scale
std::vector<double> message_pattern(const BitMessage& m, const WatermarkKey& key) {
    std::size_t plane = std::size_t(key.grid) * key.grid;
    std::vector<double> w(plane, 0.0);
    for (int b = 0; b < key.L; ++b) {
        double s = key.alpha * (2.0 * double(m.bits[std::size_t(b)]) - 1.0);
        const double* p = key.carrier(b);
        for (std::size_t i = 0; i < plane; ++i) w[i] += s * p[i];
    }
    return w;
}

} // namespace

Image embed_residual(const Image& x, const BitMessage& m, const WatermarkKey& key) {
    if (m.length() != key.L)
        throw std::invalid_argument("message length does not match the key");
    std::vector<double> w = message_pattern(m, key);

    Image at_grid(key.grid, key.grid, 1);
    for (std::size_t i = 0; i < w.size(); ++i) at_grid.px[i] = float(w[i]);

    if (key.content_aware) {
        Image x_grid = (x.h == key.grid && x.w == key.grid)
                           ? x
                           : resize_bilinear(x, key.grid, key.grid);
        std::vector<float> mask = jnd_map(x_grid);
        for (std::size_t i = 0; i < at_grid.px.size(); ++i) at_grid.px[i] *= mask[i];
    }

    Image plane = (x.h == key.grid && x.w == key.grid)
                      ? at_grid
                      : resize_bilinear(at_grid, x.h, x.w);

    Image out(x.h, x.w, x.c);
    for (int y = 0; y < x.h; ++y)
        for (int xx = 0; xx < x.w; ++xx)
            for (int ch = 0; ch < x.c; ++ch) out.at(y, xx, ch) = plane.at(y, xx, 0);
    return out;
}

Image embed(const Image& x, const BitMessage& m, const WatermarkKey& key) {
    Image w = embed_residual(x, m, key);
    Image out = x;
    for (std::size_t i = 0; i < out.px.size(); ++i)
        out.px[i] = std::clamp(out.px[i] + w.px[i], 0.0f, 1.0f);
    return out;
}

DecodeResult decode(const Image& x, const WatermarkKey& key) {
    Image at_grid = (x.h == key.grid && x.w == key.grid)
                        ? x
                        : resize_bilinear(x, key.grid, key.grid);
    Image d = channel_mean(at_grid);
    double mean = 0.0;
    for (float v : d.px) mean += v;
    mean /= double(d.px.size());

    // a content-aware key embeds mask-shaped carriers, so its decoder
    // correlates against carriers reweighted by the receiver's own mask
    // estimate; the leak keeps flat regions contributing
    std::vector<float> mask;
    if (key.content_aware) {
        mask = jnd_map(at_grid);
        for (float& v : mask) v = (v + 0.25f) / 1.25f;
    }

    DecodeResult res;
    res.correlations.resize(std::size_t(key.L));
    res.bits.bits.resize(std::size_t(key.L));
    for (int b = 0; b < key.L; ++b) {
        const double* p = key.carrier(b);
        double corr = 0.0;
        if (key.content_aware) {
            double norm = 0.0;
            for (std::size_t i = 0; i < d.px.size(); ++i) {
                double pm = p[i] * double(mask[i]);
                corr += (double(d.px[i]) - mean) * pm;
                norm += pm * pm;
            }
            corr /= std::sqrt(std::max(norm, 1e-30));
        } else {
            for (std::size_t i = 0; i < d.px.size(); ++i) corr += (double(d.px[i]) - mean) * p[i];
        }
        res.correlations[std::size_t(b)] = corr;
        res.bits.bits[std::size_t(b)] = corr > 0.0 ? 1 : 0;
    }
    return res;
}

Image baseline_average(const std::vector<Image>& watermarked, const std::vector<Image>& clean) {
    if (watermarked.empty() || clean.empty())
        throw std::invalid_argument("baseline_average needs non-empty sets");
    const Image& ref = watermarked.front();
    Image acc(ref.h, ref.w, ref.c);
    std::vector<double> sum(ref.px.size(), 0.0);
    for (const Image& img : watermarked) {
        if (!img.same_shape(ref)) throw std::invalid_argument("set images must share a shape");
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += img.px[i];
    }
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] /= double(watermarked.size());
    std::vector<double> sum_c(ref.px.size(), 0.0);
    for (const Image& img : clean) {
        if (!img.same_shape(ref)) throw std::invalid_argument("set images must share a shape");
        for (std::size_t i = 0; i < sum_c.size(); ++i) sum_c[i] += img.px[i];
    }
    for (std::size_t i = 0; i < sum_c.size(); ++i) sum_c[i] /= double(clean.size());
    for (std::size_t i = 0; i < acc.px.size(); ++i) acc.px[i] = float(sum[i] - sum_c[i]);
    return acc;
}

Image baseline_gray(const WatermarkKey& key, const BitMessage& m) {
    Image gray(key.grid, key.grid, 3);
    std::fill(gray.px.begin(), gray.px.end(), 0.5f);
    Image xw = embed(gray, m, key);
    Image out(key.grid, key.grid, 3);
    for (std::size_t i = 0; i < out.px.size(); ++i) out.px[i] = xw.px[i] - 0.5f;
    return out;
}

Image baseline_noise_forge(const Image& y, const WatermarkKey& key, const BitMessage& m,
                           double alpha_blend, Rng& rng) {
    Image z(y.h, y.w, y.c);
    for (float& v : z.px) v = float(rng.uniform());
    Image zw = embed(z, m, key);
    Image out(y.h, y.w, y.c);
    for (std::size_t i = 0; i < out.px.size(); ++i)
        out.px[i] = float((1.0 - alpha_blend) * y.px[i] + alpha_blend * zw.px[i]);
    return out;
}

} // namespace wmforge
