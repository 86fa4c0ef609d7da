#include "wmforge/spectra.hpp"

#include "wmforge/fft.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace wmforge {

void Spectrum::mark(int i, int j) {
    int r = std::clamp(i, -h / 2, h / 2 - 1) + h / 2;
    int c = std::clamp(j, -w / 2, w / 2 - 1) + w / 2;
    at(r, c) = 1.0;
}

ArtifactStyle artifact_style_from(const std::string& name) {
    if (name == "wave") return ArtifactStyle::Wave;
    if (name == "noise") return ArtifactStyle::Noise;
    if (name == "line") return ArtifactStyle::Line;
    throw std::invalid_argument("unknown artifact style: " + name);
}

std::string to_string(ArtifactStyle s) {
    switch (s) {
        case ArtifactStyle::Wave: return "wave";
        case ArtifactStyle::Noise: return "noise";
        case ArtifactStyle::Line: return "line";
    }
    return "?";
}

ArtifactParams draw_artifact_params(Rng& rng) {
    ArtifactParams p;
    p.style = ArtifactStyle(rng.uniform_int(0, 2));
    p.gray = rng.bernoulli(0.5);
    p.jnd_mask = rng.bernoulli(0.5);
    return p;
}

namespace {

void check_grid(int h, int w) {
    if (h < 8 || w < 8 || h % 2 || w % 2)
        throw std::invalid_argument("spectrum grid must be even and at least 8x8");
}

} // namespace

Spectrum gen_wave(int h, int w, Rng& rng) {
    check_grid(h, w);
    Spectrum spec(h, w);
    double r_max = rng.uniform(60.0, 200.0); // one per image
    int n = int(rng.uniform_int(2, 50));
    for (int k = 0; k < n; ++k) {
        double r = rng.uniform(0.0, r_max);
        double theta = rng.uniform(0.0, 2.0 * M_PI);
        double rad = std::pow(r, 0.8);
        spec.mark(int(std::lround(rad * std::cos(theta))), int(std::lround(rad * std::sin(theta))));
    }
    return spec;
}

Spectrum gen_noise(int h, int w, Rng& rng) {
    check_grid(h, w);
    Spectrum spec(h, w);
    double sigma2 = rng.uniform(20.0, 50.0);
    double p = 4.0 - 3.0 * std::sqrt(rng.uniform());
    for (int r = 0; r < h; ++r) {
        double fi = std::abs(double(r - h / 2)) / sigma2;
        double fip = std::pow(fi, p);
        for (int c = 0; c < w; ++c) {
            double fj = std::abs(double(c - w / 2)) / sigma2;
            double envelope = std::exp(-std::pow(fip + std::pow(fj, p), 1.0 / p));
            spec.at(r, c) = envelope * rng.uniform();
        }
    }
    return spec;
}

Spectrum gen_line(int h, int w, Rng& rng) {
    check_grid(h, w);
    Spectrum spec(h, w);
    int m = int(rng.uniform_int(3, 10));
    double rho = rng.uniform(5.0, 35.0);
    auto clamp_row = [&](int i) { return std::clamp(i, -h / 2, h / 2 - 1) + h / 2; };
    auto clamp_col = [&](int j) { return std::clamp(j, -w / 2, w / 2 - 1) + w / 2; };
    for (int k = 0; k < m; ++k) {
        int l = int(std::lround(rng.normal() * rho));
        for (int sign : {1, -1}) {
            int r = clamp_row(sign * l);
            for (int c = 0; c < w; ++c) spec.at(r, c) = 1.0;
        }
    }
    for (int k = 0; k < m; ++k) {
        int l = int(std::lround(rng.normal() * rho));
        for (int sign : {1, -1}) {
            int c = clamp_col(sign * l);
            for (int r = 0; r < h; ++r) spec.at(r, c) = 1.0;
        }
    }
    return spec;
}

Spectrum gen_artifact(ArtifactStyle style, int h, int w, Rng& rng) {
    switch (style) {
        case ArtifactStyle::Wave: return gen_wave(h, w, rng);
        case ArtifactStyle::Noise: return gen_noise(h, w, rng);
        case ArtifactStyle::Line: return gen_line(h, w, rng);
    }
    throw std::logic_error("bad style");
}

std::vector<float> synthesize(const Spectrum& spec, Rng& rng, double* imag_residue) {
    check_grid(spec.h, spec.w);

    // phases for every centered bin, row-major, drawn before symmetrization
    std::vector<double> phase(spec.amp.size());
    for (double& p : phase) p = rng.uniform(0.0, 2.0 * M_PI);

    // pad the frequency canvas up to a radix-2 grid; frequencies keep their
    // centered coordinates, the extra area stays zero
    int fh = fft::next_pow2(spec.h);
    int fw = fft::next_pow2(spec.w);

    // standard DFT layout with conjugate symmetry; the half containing the
    // lexicographically smaller index wins, and a bin whose partner carries
    // the amplitude inherits the conjugate so no generated point is lost
    std::vector<std::complex<double>> grid(std::size_t(fh) * fw, {0.0, 0.0});
    auto centered_amp = [&](int u, int v) -> double {
        int i = u < fh / 2 ? u : u - fh;
        int j = v < fw / 2 ? v : v - fw;
        int r = i + spec.h / 2, c = j + spec.w / 2;
        if (r < 0 || r >= spec.h || c < 0 || c >= spec.w) return 0.0;
        return spec.at(r, c);
    };
    auto centered_phase = [&](int u, int v) -> double {
        int i = u < fh / 2 ? u : u - fh;
        int j = v < fw / 2 ? v : v - fw;
        int r = i + spec.h / 2, c = j + spec.w / 2;
        if (r < 0 || r >= spec.h || c < 0 || c >= spec.w) return 0.0;
        return phase[std::size_t(r) * spec.w + c];
    };
    for (int u = 0; u < fh; ++u)
        for (int v = 0; v < fw; ++v) {
            int pu = (fh - u) % fh, pv = (fw - v) % fw;
            if (std::make_pair(u, v) > std::make_pair(pu, pv)) continue;
            if (u == pu && v == pv) {
                // self-conjugate bins must be real
                grid[std::size_t(u) * fw + v] = centered_amp(u, v) * std::cos(centered_phase(u, v));
                continue;
            }
            double a = centered_amp(u, v), ph = centered_phase(u, v);
            if (a == 0.0 && centered_amp(pu, pv) != 0.0) {
                a = centered_amp(pu, pv);
                ph = -centered_phase(pu, pv);
            }
            std::complex<double> f = a * std::complex<double>(std::cos(ph), std::sin(ph));
            grid[std::size_t(u) * fw + v] = f;
            grid[std::size_t(pu) * fw + pv] = std::conj(f);
        }

    fft::transform2d(grid, fh, fw, true);

    double residue = 0.0;
    for (const auto& z : grid) residue = std::max(residue, std::abs(z.imag()));
    if (imag_residue) *imag_residue = residue;
    if (residue >= 1e-5)
        throw std::logic_error("synthesize: symmetrization failed, imaginary residue " +
                               std::to_string(residue));

    std::vector<double> plane(std::size_t(spec.h) * spec.w);
    double peak = 0.0;
    for (int y = 0; y < spec.h; ++y)
        for (int x = 0; x < spec.w; ++x) {
            double v = grid[std::size_t(y) * fw + x].real();
            plane[std::size_t(y) * spec.w + x] = v;
            peak = std::max(peak, std::abs(v));
        }

    std::vector<float> out(plane.size(), 0.0f);
    if (peak > 0.0)
        for (std::size_t i = 0; i < plane.size(); ++i)
            out[i] = float((plane[i] / peak) * 0.05);
    return out;
}

namespace {

// 95th percentile by nearest rank (lower), matching index floor(0.95*(n-1))
float percentile95(std::vector<float> v) {
    std::size_t k = std::size_t(std::floor(0.95 * double(v.size() - 1)));
    std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(k), v.end());
    return v[k];
}

} // namespace

std::vector<float> jnd_map(const Image& x) {
    std::vector<float> lum = luminance(x);
    int h = x.h, w = x.w;
    auto lat = [&](int y, int xx) {
        y = std::clamp(y, 0, h - 1);
        xx = std::clamp(xx, 0, w - 1);
        return double(lum[std::size_t(y) * w + xx]);
    };
    std::vector<float> mag(lum.size());
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
            double gx = -lat(y - 1, xx - 1) + lat(y - 1, xx + 1) - 2.0 * lat(y, xx - 1) +
                        2.0 * lat(y, xx + 1) - lat(y + 1, xx - 1) + lat(y + 1, xx + 1);
            double gy = -lat(y - 1, xx - 1) - 2.0 * lat(y - 1, xx) - lat(y - 1, xx + 1) +
                        lat(y + 1, xx - 1) + 2.0 * lat(y + 1, xx) + lat(y + 1, xx + 1);
            mag[std::size_t(y) * w + xx] = float(std::sqrt(gx * gx + gy * gy));
        }

    float q = percentile95(mag);
    std::vector<float> norm(mag.size(), 0.0f);
    if (q > 0.0f)
        for (std::size_t i = 0; i < mag.size(); ++i)
            norm[i] = std::clamp(mag[i] / q, 0.0f, 1.0f);

    std::vector<float> out(norm.size());
    auto nat = [&](int y, int xx) {
        y = std::clamp(y, 0, h - 1);
        xx = std::clamp(xx, 0, w - 1);
        return double(norm[std::size_t(y) * w + xx]);
    };
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
            double s = 0.0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) s += nat(y + dy, xx + dx);
            out[std::size_t(y) * w + xx] = float(s / 9.0);
        }
    return out;
}

ArtifactResult apply_artifact(const Image& x, const ArtifactParams& params, Rng& rng) {
    ArtifactResult res;
    res.omega = Image(x.h, x.w, x.c);

    if (params.gray) {
        Spectrum spec = gen_artifact(params.style, x.h, x.w, rng);
        std::vector<float> plane = synthesize(spec, rng);
        for (int y = 0; y < x.h; ++y)
            for (int xx = 0; xx < x.w; ++xx)
                for (int ch = 0; ch < x.c; ++ch)
                    res.omega.at(y, xx, ch) = plane[std::size_t(y) * x.w + xx];
    } else {
        for (int ch = 0; ch < x.c; ++ch) {
            Spectrum spec = gen_artifact(params.style, x.h, x.w, rng);
            std::vector<float> plane = synthesize(spec, rng);
            for (int y = 0; y < x.h; ++y)
                for (int xx = 0; xx < x.w; ++xx)
                    res.omega.at(y, xx, ch) = plane[std::size_t(y) * x.w + xx];
        }
    }

    if (params.jnd_mask) {
        std::vector<float> mask = jnd_map(x);
        for (int y = 0; y < x.h; ++y)
            for (int xx = 0; xx < x.w; ++xx)
                for (int ch = 0; ch < x.c; ++ch)
                    res.omega.at(y, xx, ch) *= mask[std::size_t(y) * x.w + xx];
    }

    res.corrupted = x;
    for (std::size_t i = 0; i < x.px.size(); ++i)
        res.corrupted.px[i] = std::clamp(x.px[i] + res.omega.px[i], 0.0f, 1.0f);
    return res;
}

} // namespace wmforge
