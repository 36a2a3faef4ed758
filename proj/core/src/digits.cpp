#include "dtd/digits.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace dtd {

namespace {

struct Segment {
    double x0, y0, x1, y1;
};

// seven-segment geometry in a unit box, y pointing down
constexpr Segment kSegments[7] = {
    {0.15, 0.10, 0.85, 0.10},  // A top
    {0.85, 0.10, 0.85, 0.50},  // B upper right
    {0.85, 0.50, 0.85, 0.90},  // C lower right
    {0.15, 0.90, 0.85, 0.90},  // D bottom
    {0.15, 0.50, 0.15, 0.90},  // E lower left
    {0.15, 0.10, 0.15, 0.50},  // F upper left
    {0.15, 0.50, 0.85, 0.50},  // G middle
};

constexpr std::uint8_t kDigitSegments[10] = {
    0b0111111,  // 0: ABCDEF
    0b0000110,  // 1: BC
    0b1011011,  // 2: ABDEG
    0b1001111,  // 3: ABCDG
    0b1100110,  // 4: BCFG
    0b1101101,  // 5: ACDFG
    0b1111101,  // 6: ACDEFG
    0b0000111,  // 7: ABC
    0b1111111,  // 8
    0b1101111,  // 9: ABCDFG
};

double point_segment_distance(double px, double py, const Segment& s) {
    const double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
    const double len2 = dx * dx + dy * dy;
    double t = ((px - s.x0) * dx + (py - s.y0) * dy) / len2;
    t = std::clamp(t, 0.0, 1.0);
    const double cx = s.x0 + t * dx, cy = s.y0 + t * dy;
    return std::hypot(px - cx, py - cy);
}

}  // namespace

std::vector<std::uint8_t> render_digit(int digit, std::uint64_t seed) {
    if (digit < 0 || digit > 9) throw DimensionError("render_digit: digit out of range");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    const double cx = 14.0 + (u01(rng) - 0.5) * 6.0;
    const double cy = 14.0 + (u01(rng) - 0.5) * 6.0;
    const double size = 17.0 + u01(rng) * 5.0;     // glyph box edge in pixels
    const double angle = (u01(rng) - 0.5) * 0.30;  // radians
    const double thick = 1.1 + u01(rng) * 0.9;     // stroke half-width
    const double soft = 1.0;
    const double peak = 0.70 + u01(rng) * 0.30;
    const double ca = std::cos(angle), sa = std::sin(angle);

    std::vector<std::uint8_t> img(28 * 28, 0);
    const std::uint8_t mask = kDigitSegments[digit];
    for (int py = 0; py < 28; ++py)
        for (int px = 0; px < 28; ++px) {
            // map pixel into glyph coordinates (inverse rotation about center)
            const double rx = px - cx, ry = py - cy;
            const double gx = (ca * rx + sa * ry) / size + 0.5;
            const double gy = (-sa * rx + ca * ry) / size + 0.5;
            double d = 1e9;
            for (int s = 0; s < 7; ++s)
                if ((mask >> s) & 1)
                    d = std::min(d, point_segment_distance(gx, gy, kSegments[s]) * size);
            const double v = std::clamp((thick + soft - d) / soft, 0.0, 1.0);
            img[py * 28 + px] = static_cast<std::uint8_t>(std::lround(255.0 * peak * v));
        }
    return img;
}

Dataset make_digit_dataset(std::size_t n, std::uint64_t seed) {
    Dataset ds;
    ds.images = Matrix(n, 784);
    ds.labels.resize(n);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const int digit = int(i % 10);
        ds.labels[i] = std::uint8_t(digit);
        const auto bytes = render_digit(digit, rng());
        for (std::size_t p = 0; p < 784; ++p) ds.images(i, p) = double(bytes[p]) / 255.0;
    }
    return ds;
}

void write_digit_idx(const std::string& images_path, const std::string& labels_path,
                     std::size_t n, std::uint64_t seed) {
    std::vector<std::uint8_t> pixels;
    pixels.reserve(n * 784);
    std::vector<std::uint8_t> labels(n);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const int digit = int(i % 10);
        labels[i] = std::uint8_t(digit);
        const auto bytes = render_digit(digit, rng());
        pixels.insert(pixels.end(), bytes.begin(), bytes.end());
    }
    write_idx_images(images_path, pixels, std::uint32_t(n), 28, 28);
    write_idx_labels(labels_path, labels);
}

}  // namespace dtd
