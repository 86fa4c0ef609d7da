#pragma once

#include "wmforge/image.hpp"

#include <cstdint>
#include <vector>

namespace wmforge {

// Synthetic clean images: smooth periodic cosine background plus a handful
// of soft-edged shapes kept fully inside the frame. Shapes that cross the
// frame would break the implicit DFT periodicity and leak broadband energy
// into the watermark carrier band, so their soft tails stay interior.
Image gen_clean(std::uint64_t seed, std::uint64_t image_id, int size);

std::vector<Image> gen_clean_set(std::uint64_t seed, int count, int size,
                                 std::uint64_t first_id = 0);

} // namespace wmforge
