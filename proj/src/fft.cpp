#include "wmforge/fft.hpp"

#include <cmath>
#include <stdexcept>

namespace wmforge::fft {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

void transform(std::complex<double>* a, int n, bool inverse) {
    if (!is_pow2(n)) throw std::invalid_argument("fft length must be a power of two");
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * M_PI / len * (inverse ? 1.0 : -1.0);
        std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (int k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

void transform2d(std::vector<std::complex<double>>& grid, int h, int w, bool inverse) {
    if (int(grid.size()) != h * w) throw std::invalid_argument("grid size mismatch");
    for (int r = 0; r < h; ++r) transform(grid.data() + std::size_t(r) * w, w, inverse);
    std::vector<std::complex<double>> col(h);
    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) col[r] = grid[std::size_t(r) * w + c];
        transform(col.data(), h, inverse);
        for (int r = 0; r < h; ++r) grid[std::size_t(r) * w + c] = col[r];
    }
    if (inverse) {
        double norm = 1.0 / (double(h) * double(w));
        for (auto& z : grid) z *= norm;
    }
}

} // namespace wmforge::fft
