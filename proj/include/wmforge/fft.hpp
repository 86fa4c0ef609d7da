#pragma once

#include <complex>
#include <vector>

namespace wmforge::fft {

bool is_pow2(int n);
int next_pow2(int n);

// In-place radix-2 transform, n a power of two. No normalization here.
void transform(std::complex<double>* a, int n, bool inverse);

// Row-column 2-D transform on a row-major h*w grid. The inverse applies
// the 1/(h*w) factor, so sum(x^2) == sum(|F|^2)/(h*w) holds (Parseval).
void transform2d(std::vector<std::complex<double>>& grid, int h, int w, bool inverse);

} // namespace wmforge::fft
