#include "wmforge/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wmforge {

Image resize_bilinear(const Image& src, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("resize target must be positive");
    if (src.h == out_h && src.w == out_w) return src;
    Image dst(out_h, out_w, src.c);
    double sy = double(src.h) / out_h;
    double sx = double(src.w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = int(std::floor(fy));
        double wy = fy - y0;
        int y0c = std::clamp(y0, 0, src.h - 1);
        int y1c = std::clamp(y0 + 1, 0, src.h - 1);
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int x0 = int(std::floor(fx));
            double wx = fx - x0;
            int x0c = std::clamp(x0, 0, src.w - 1);
            int x1c = std::clamp(x0 + 1, 0, src.w - 1);
            for (int ch = 0; ch < src.c; ++ch) {
                double top = (1.0 - wx) * src.at(y0c, x0c, ch) + wx * src.at(y0c, x1c, ch);
                double bot = (1.0 - wx) * src.at(y1c, x0c, ch) + wx * src.at(y1c, x1c, ch);
                dst.at(y, x, ch) = float((1.0 - wy) * top + wy * bot);
            }
        }
    }
    return dst;
}

Image crop(const Image& src, int y0, int x0, int ch, int cw) {
    if (y0 < 0 || x0 < 0 || y0 + ch > src.h || x0 + cw > src.w)
        throw std::invalid_argument("crop window out of bounds");
    Image dst(ch, cw, src.c);
    for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x)
            for (int k = 0; k < src.c; ++k) dst.at(y, x, k) = src.at(y0 + y, x0 + x, k);
    return dst;
}

Image hflip(const Image& src) {
    Image dst(src.h, src.w, src.c);
    for (int y = 0; y < src.h; ++y)
        for (int x = 0; x < src.w; ++x)
            for (int k = 0; k < src.c; ++k) dst.at(y, x, k) = src.at(y, src.w - 1 - x, k);
    return dst;
}

void clamp01(Image& img) {
    for (float& v : img.px) v = std::clamp(v, 0.0f, 1.0f);
}

Tensor to_chw(const Image& img) {
    Tensor t({img.c, img.h, img.w});
    for (int ch = 0; ch < img.c; ++ch)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x)
                t.data[(std::size_t(ch) * img.h + y) * img.w + x] = img.at(y, x, ch);
    return t;
}

Image from_chw(const Tensor& t) {
    if (t.shape.size() != 3) throw std::invalid_argument("expected a CHW tensor");
    Image img(int(t.shape[1]), int(t.shape[2]), int(t.shape[0]));
    for (int ch = 0; ch < img.c; ++ch)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x)
                img.at(y, x, ch) = t.data[(std::size_t(ch) * img.h + y) * img.w + x];
    return img;
}

std::vector<float> luminance(const Image& img) {
    std::vector<float> lum(std::size_t(img.h) * img.w);
    if (img.c == 1) {
        std::copy(img.px.begin(), img.px.end(), lum.begin());
        return lum;
    }
    if (img.c != 3) throw std::invalid_argument("luminance expects 1 or 3 channels");
    for (std::size_t i = 0; i < lum.size(); ++i) {
        const float* p = img.px.data() + i * 3;
        lum[i] = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
    }
    return lum;
}

Image channel_mean(const Image& img) {
    Image out(img.h, img.w, 1);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            double s = 0.0;
            for (int k = 0; k < img.c; ++k) s += img.at(y, x, k);
            out.at(y, x, 0) = float(s / img.c);
        }
    return out;
}

} // namespace wmforge
