#pragma once

#include "wmforge/image.hpp"
#include "wmforge/refwm.hpp"

#include <cstdint>
#include <vector>

namespace wmforge {

double bit_accuracy(const BitMessage& decoded, const BitMessage& truth);

// 10*log10(1/MSE) with MAX = 1; +infinity when the images are identical
double psnr(const Image& a, const Image& b);

// Exact FPR of the count >= tau detector under the null hypothesis that
// every bit matches with probability 1/2. For L <= 64 the binomial sum is
// integer-exact and the only rounding is the final conversion to double.
double binomial_fpr(int tau, int L);

struct RocPoint {
    int tau;
    double fpr;
    double tpr;
};

// One point per integer threshold tau in {0, ..., L+1}; TPR is the
// empirical fraction of positive match counts >= tau.
std::vector<RocPoint> detection_roc(const std::vector<int>& match_counts_pos, int L);

// clip(alpha_vis * |w| * 255, 0, 255), rounded; w lives in unit scale
std::vector<std::uint8_t> visualize_watermark(const Image& w, double alpha_vis);

} // namespace wmforge
