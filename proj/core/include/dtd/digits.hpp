#pragma once

#include <cstdint>

#include "dtd/dataio.hpp"

namespace dtd {

// Procedurally rendered 28x28 digit glyphs (seven-segment strokes with random
// affine jitter and intensity variation). Background pixels are exactly 0.
// Stands in for MNIST when the real IDX files are not available; the output
// uses the same byte range and container format.
std::vector<std::uint8_t> render_digit(int digit, std::uint64_t seed);

Dataset make_digit_dataset(std::size_t n, std::uint64_t seed);

// Writes train/test IDX pairs compatible with load_idx_images/labels.
void write_digit_idx(const std::string& images_path, const std::string& labels_path,
                     std::size_t n, std::uint64_t seed);

}  // namespace dtd
