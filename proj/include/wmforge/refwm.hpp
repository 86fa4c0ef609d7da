#pragma once

#include "wmforge/image.hpp"
#include "wmforge/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace wmforge {

struct BitMessage {
    std::vector<std::uint8_t> bits; // 0/1 each

    int length() const { return int(bits.size()); }
};

BitMessage random_message(Rng& rng, int L);
// hex string, most significant nibble first, must describe exactly L bits
BitMessage message_from_hex(const std::string& hex, int L);
std::string message_to_hex(const BitMessage& m);

// Spread-spectrum reference watermarker: unit-norm orthogonal carriers
// band-limited to the mid-frequency annulus [grid/8, grid/3], one per bit.
// Carriers are regenerated from the seed, never stored on disk.
struct WatermarkKey {
    std::uint64_t seed = 0;
    int L = 32;
    int grid = 128;
    double alpha = 0.02;
    bool content_aware = false;
    std::vector<double> carriers; // L x grid x grid, row-major

    const double* carrier(int b) const { return carriers.data() + std::size_t(b) * grid * grid; }
};

WatermarkKey make_key(std::uint64_t seed, int L = 32, int grid = 128, double alpha = 0.02,
                      bool content_aware = false);

// w = alpha * sum_b (2 m_b - 1) p_b, JND-modulated when the key is
// content-aware, added to every channel. Images that are not at the key
// grid are handled by computing w at the grid and resizing it onto x.
Image embed(const Image& x, const BitMessage& m, const WatermarkKey& key);
// the signed residual embed would add (before clamping)
Image embed_residual(const Image& x, const BitMessage& m, const WatermarkKey& key);

struct DecodeResult {
    BitMessage bits;
    std::vector<double> correlations;
};

// Blind: correlate the mean-free channel average with each carrier.
DecodeResult decode(const Image& x, const WatermarkKey& key);

// API-access baselines
Image baseline_average(const std::vector<Image>& watermarked, const std::vector<Image>& clean);
Image baseline_gray(const WatermarkKey& key, const BitMessage& m);
Image baseline_noise_forge(const Image& y, const WatermarkKey& key, const BitMessage& m,
                           double alpha_blend, Rng& rng);

} // namespace wmforge
