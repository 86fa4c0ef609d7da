#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace wmforge {

// Dense row-major float32 tensor. Accumulations elsewhere run in double
// and round once at the end, so the stored values are reproducible.
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::int64_t> s) : shape(std::move(s)) {
        data.assign(std::size_t(numel_of(shape)), 0.0f);
    }
    Tensor(std::vector<std::int64_t> s, std::vector<float> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (std::int64_t(data.size()) != numel_of(shape))
            throw std::invalid_argument("tensor data does not match shape");
    }

    static std::int64_t numel_of(const std::vector<std::int64_t>& s) {
        std::int64_t n = 1;
        for (std::int64_t e : s) {
            if (e <= 0) throw std::invalid_argument("tensor extents must be positive");
            n *= e;
        }
        return n;
    }

    std::int64_t numel() const { return std::int64_t(data.size()); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    float& operator[](std::size_t i) { return data[i]; }
    float operator[](std::size_t i) const { return data[i]; }

    void fill(float v) { std::fill(data.begin(), data.end(), v); }

    static Tensor scalar(float v) { return Tensor({1}, {v}); }

    static std::string shape_str(const std::vector<std::int64_t>& s) {
        std::string out = "[";
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i) out += ",";
            out += std::to_string(s[i]);
        }
        return out + "]";
    }
};

} // namespace wmforge
