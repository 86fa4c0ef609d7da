#include "wmforge/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace wmforge {

double bit_accuracy(const BitMessage& decoded, const BitMessage& truth) {
    if (decoded.length() != truth.length())
        throw std::invalid_argument("bit_accuracy needs equal-length messages");
    int match = 0;
    for (std::size_t i = 0; i < decoded.bits.size(); ++i)
        if (decoded.bits[i] == truth.bits[i]) ++match;
    return double(match) / double(decoded.length());
}

double psnr(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("psnr needs equally shaped images");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.px.size(); ++i) {
        double d = double(a.px[i]) - double(b.px[i]);
        mse += d * d;
    }
    mse /= double(a.px.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

namespace {

// C(L, j) for all j; every value fits u64 for L <= 64
std::vector<std::uint64_t> binomial_row(int L) {
    std::vector<std::uint64_t> row(std::size_t(L) + 1, 0);
    row[0] = 1;
    for (int n = 1; n <= L; ++n)
        for (int j = n; j >= 1; --j) row[std::size_t(j)] += row[std::size_t(j) - 1];
    return row;
}

} // namespace

double binomial_fpr(int tau, int L) {
    if (L < 1 || tau < 0 || tau > L + 1) throw std::invalid_argument("bad threshold or length");
    if (tau > L) return 0.0;
    if (L <= 64) {
        std::vector<std::uint64_t> row = binomial_row(L);
        unsigned __int128 num = 0;
        for (int j = tau; j <= L; ++j) num += row[std::size_t(j)];
        return std::ldexp(double(num), -L); // double(num) rounds once, ldexp is exact
    }
    // larger messages: accumulate scaled terms in long double
    long double acc = 0.0L;
    long double term = std::exp2l(-(long double)L); // C(L,0) * 2^-L
    for (int j = 0; j <= L; ++j) {
        if (j >= tau) acc += term;
        term = term * (long double)(L - j) / (long double)(j + 1);
    }
    return double(acc);
}

std::vector<RocPoint> detection_roc(const std::vector<int>& match_counts_pos, int L) {
    for (int c : match_counts_pos)
        if (c < 0 || c > L) throw std::invalid_argument("match count outside [0, L]");
    std::vector<RocPoint> curve;
    curve.reserve(std::size_t(L) + 2);
    for (int tau = 0; tau <= L + 1; ++tau) {
        RocPoint pt;
        pt.tau = tau;
        pt.fpr = binomial_fpr(tau, L);
        std::size_t hits = 0;
        for (int c : match_counts_pos)
            if (c >= tau) ++hits;
        pt.tpr = match_counts_pos.empty() ? 0.0 : double(hits) / double(match_counts_pos.size());
        curve.push_back(pt);
    }
    return curve;
}

std::vector<std::uint8_t> visualize_watermark(const Image& w, double alpha_vis) {
    if (alpha_vis <= 0.0) throw std::invalid_argument("alpha_vis must be positive");
    std::vector<std::uint8_t> out(w.px.size());
    for (std::size_t i = 0; i < w.px.size(); ++i) {
        double v = alpha_vis * std::abs(double(w.px[i])) * 255.0;
        out[i] = std::uint8_t(std::lround(std::clamp(v, 0.0, 255.0)));
    }
    return out;
}

} // namespace wmforge
