#pragma once

#include "wmforge/image.hpp"
#include "wmforge/prefnet.hpp"

#include <vector>

namespace wmforge {

struct AttackConfig {
    int k = 500;         // optimization steps
    double lr = 0.05;    // raw-gradient step size, no momentum
    int working = 768;   // multi-resolution working grid, capped at source size
};

// Gradient ascent on the score of x_w - delta. The objective is evaluated
// on the clamped image, and the gradient is gated where the clamp is
// active, so returned residuals satisfy w_hat = x_w - clamp(x_w - delta).
Image extract(const PrefModel& m, const Image& x_w, const AttackConfig& cfg);

// Same optimization, reporting the residual at each step count in snap_ks
// (ascending, each <= cfg.k). One optimization run serves the whole grid.
std::vector<Image> extract_snapshots(const PrefModel& m, const Image& x_w,
                                     const AttackConfig& cfg, const std::vector<int>& snap_ks);

// Resize to the working grid, extract there, resize the residual back.
Image extract_multires(const PrefModel& m, const Image& x_w, const AttackConfig& cfg);
std::vector<Image> extract_multires_snapshots(const PrefModel& m, const Image& x_w,
                                              const AttackConfig& cfg,
                                              const std::vector<int>& snap_ks);

Image remove_watermark(const PrefModel& m, const Image& x_w, const AttackConfig& cfg);

// Transplant the residual estimated from x_w onto an unrelated image y.
Image forge(const PrefModel& m, const Image& x_w, const Image& y, const AttackConfig& cfg);

} // namespace wmforge
