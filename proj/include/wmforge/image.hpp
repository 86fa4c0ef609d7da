#pragma once

#include "wmforge/tensor.hpp"

#include <vector>

namespace wmforge {

// Unit-interval image stored interleaved (row, column, channel).
struct Image {
    int h = 0, w = 0, c = 0;
    std::vector<float> px;

    Image() = default;
    Image(int h_, int w_, int c_) : h(h_), w(w_), c(c_), px(std::size_t(h_) * w_ * c_, 0.0f) {}

    float& at(int y, int x, int ch) { return px[(std::size_t(y) * w + x) * c + ch]; }
    float at(int y, int x, int ch) const { return px[(std::size_t(y) * w + x) * c + ch]; }
    std::size_t size() const { return px.size(); }
    bool same_shape(const Image& o) const { return h == o.h && w == o.w && c == o.c; }
};

// Bilinear with half-pixel centers, edges clamped.
Image resize_bilinear(const Image& src, int out_h, int out_w);

Image crop(const Image& src, int y0, int x0, int ch, int cw);
Image hflip(const Image& src);
void clamp01(Image& img);

// HWC image <-> CHW network tensor
Tensor to_chw(const Image& img);
Image from_chw(const Tensor& t);

std::vector<float> luminance(const Image& img); // Rec. 601 weights
Image channel_mean(const Image& img);           // plain average, 1 channel

} // namespace wmforge
