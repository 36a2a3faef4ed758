#pragma once

#include <cstdint>
#include <string>

#include "dtd/common.hpp"

namespace dtd {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
};

struct RgbImage {
    std::size_t width = 0, height = 0;
    std::vector<Rgb> pixels;  // row-major

    Rgb& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
    Rgb at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
};

struct HeatmapStyle {
    std::size_t upscale = 4;  // integer cell magnification
};

// Diverging blue-white-red map, symmetric about zero: v is normalized by the
// max absolute relevance of the image, zero lands exactly on white.
Rgb diverging_color(double v);

RgbImage render_heatmap(const Matrix& relevance, const HeatmapStyle& style = {});

// Grayscale magnitude map, P5.
void write_pgm(const RgbImage& img, const std::string& path);
void write_pgm_magnitude(const Matrix& relevance, const HeatmapStyle& style,
                         const std::string& path);
// Minimal deterministic PNG encoder (8-bit RGB, single IDAT).
void write_png(const RgbImage& img, const std::string& path);

// Grid compositing with per-cell labels (tiny built-in 5x7 font).
struct GridCell {
    Matrix relevance;
    std::string label;
};
RgbImage compose_grid(const std::vector<std::vector<GridCell>>& rows,
                      const HeatmapStyle& style = {});

}  // namespace dtd
