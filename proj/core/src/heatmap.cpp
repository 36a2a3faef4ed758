#include "dtd/heatmap.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <zlib.h>

#include "binio.hpp"

namespace dtd {

Rgb diverging_color(double v) {
    v = std::clamp(v, -1.0, 1.0);
    const auto ramp = [](double t) {
        return static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - t)));
    };
    if (v >= 0.0) return {255, ramp(v), ramp(v)};  // white -> red
    return {ramp(-v), ramp(-v), 255};              // white -> blue
}

namespace {

double max_abs(const Matrix& m) {
    double mx = 0.0;
    for (double v : m.data()) {
        if (!std::isfinite(v)) throw NumericalError("non-finite relevance value");
        mx = std::max(mx, std::abs(v));
    }
    return mx;
}

}  // namespace

RgbImage render_heatmap(const Matrix& relevance, const HeatmapStyle& style) {
    const double mx = max_abs(relevance);
    const std::size_t s = std::max<std::size_t>(style.upscale, 1);
    RgbImage img;
    img.width = relevance.cols() * s;
    img.height = relevance.rows() * s;
    img.pixels.resize(img.width * img.height);
    for (std::size_t r = 0; r < relevance.rows(); ++r)
        for (std::size_t c = 0; c < relevance.cols(); ++c) {
            const Rgb color =
                (mx == 0.0) ? Rgb{255, 255, 255} : diverging_color(relevance(r, c) / mx);
            for (std::size_t dy = 0; dy < s; ++dy)
                for (std::size_t dx = 0; dx < s; ++dx)
                    img.at(c * s + dx, r * s + dy) = color;
        }
    return img;
}

void write_pgm(const RgbImage& img, const std::string& path) {
    auto f = detail::open_out(path);
    f << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<std::uint8_t> gray(img.pixels.size());
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        const Rgb& p = img.pixels[i];
        gray[i] = static_cast<std::uint8_t>((std::uint32_t(p.r) * 299 +
                                             std::uint32_t(p.g) * 587 +
                                             std::uint32_t(p.b) * 114) / 1000);
    }
    f.write(reinterpret_cast<const char*>(gray.data()), std::streamsize(gray.size()));
}

void write_pgm_magnitude(const Matrix& relevance, const HeatmapStyle& style,
                         const std::string& path) {
    const double mx = max_abs(relevance);
    const std::size_t s = std::max<std::size_t>(style.upscale, 1);
    auto f = detail::open_out(path);
    f << "P5\n" << relevance.cols() * s << " " << relevance.rows() * s << "\n255\n";
    std::vector<std::uint8_t> row(relevance.cols() * s);
    for (std::size_t r = 0; r < relevance.rows(); ++r) {
        for (std::size_t c = 0; c < relevance.cols(); ++c) {
            const double mag = (mx == 0.0) ? 0.0 : std::abs(relevance(r, c)) / mx;
            const auto byte = static_cast<std::uint8_t>(std::lround(255.0 * mag));
            for (std::size_t dx = 0; dx < s; ++dx) row[c * s + dx] = byte;
        }
        for (std::size_t dy = 0; dy < s; ++dy)
            f.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
    }
}

namespace {

void png_chunk(std::ostream& os, const char type[4], const std::vector<std::uint8_t>& data) {
    detail::write_be32(os, std::uint32_t(data.size()));
    os.write(type, 4);
    if (!data.empty())
        os.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
    if (!data.empty()) crc = crc32(crc, data.data(), uInt(data.size()));
    detail::write_be32(os, std::uint32_t(crc));
}

}  // namespace

void write_png(const RgbImage& img, const std::string& path) {
    auto f = detail::open_out(path);
    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    f.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<std::uint8_t> ihdr(13);
    ihdr[0] = std::uint8_t(img.width >> 24); ihdr[1] = std::uint8_t(img.width >> 16);
    ihdr[2] = std::uint8_t(img.width >> 8);  ihdr[3] = std::uint8_t(img.width);
    ihdr[4] = std::uint8_t(img.height >> 24); ihdr[5] = std::uint8_t(img.height >> 16);
    ihdr[6] = std::uint8_t(img.height >> 8);  ihdr[7] = std::uint8_t(img.height);
    ihdr[8] = 8;   // bit depth
    ihdr[9] = 2;   // truecolor
    ihdr[10] = ihdr[11] = ihdr[12] = 0;
    png_chunk(f, "IHDR", ihdr);

    // filter byte 0 per scanline
    std::vector<std::uint8_t> raw;
    raw.reserve(img.height * (1 + img.width * 3));
    for (std::size_t y = 0; y < img.height; ++y) {
        raw.push_back(0);
        for (std::size_t x = 0; x < img.width; ++x) {
            const Rgb& p = img.at(x, y);
            raw.push_back(p.r);
            raw.push_back(p.g);
            raw.push_back(p.b);
        }
    }
    uLongf bound = compressBound(uLong(raw.size()));
    std::vector<std::uint8_t> idat(bound);
    if (compress2(idat.data(), &bound, raw.data(), uLong(raw.size()), 6) != Z_OK)
        throw NumericalError("zlib compression failed");
    idat.resize(bound);
    png_chunk(f, "IDAT", idat);
    png_chunk(f, "IEND", {});
    if (!f) throw FormatError("failed writing PNG file " + path);
}

namespace {

// 5x7 bitmap font, uppercase plus the punctuation the grid labels use.
struct Glyph {
    char ch;
    std::uint8_t rows[7];  // 5 bits per row, MSB left
};

constexpr Glyph kFont[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11}},
    {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}},
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
};

const Glyph* find_glyph(char c) {
    c = char(std::toupper(static_cast<unsigned char>(c)));
    for (const auto& g : kFont)
        if (g.ch == c) return &g;
    return nullptr;
}

void draw_text(RgbImage& img, std::size_t x0, std::size_t y0, const std::string& text) {
    std::size_t x = x0;
    for (char c : text) {
        const Glyph* g = find_glyph(c);
        if (g) {
            for (std::size_t r = 0; r < 7; ++r)
                for (std::size_t col = 0; col < 5; ++col)
                    if ((g->rows[r] >> (4 - col)) & 1u) {
                        const std::size_t px = x + col, py = y0 + r;
                        if (px < img.width && py < img.height) img.at(px, py) = {0, 0, 0};
                    }
        }
        x += 6;
    }
}

}  // namespace

RgbImage compose_grid(const std::vector<std::vector<GridCell>>& rows,
                      const HeatmapStyle& style) {
    if (rows.empty() || rows.front().empty())
        throw DimensionError("compose_grid: empty grid");
    const std::size_t n_cols = rows.front().size();
    for (const auto& row : rows)
        if (row.size() != n_cols) throw DimensionError("compose_grid: ragged grid");

    const std::size_t s = std::max<std::size_t>(style.upscale, 1);
    const std::size_t cell_w = rows[0][0].relevance.cols() * s;
    const std::size_t cell_h = rows[0][0].relevance.rows() * s;
    const std::size_t pad = 2, label_h = 10;

    RgbImage img;
    img.width = n_cols * (cell_w + pad) + pad;
    img.height = rows.size() * (cell_h + label_h + pad) + pad;
    img.pixels.assign(img.width * img.height, {200, 200, 200});

    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < n_cols; ++c) {
            const RgbImage cell = render_heatmap(rows[r][c].relevance, style);
            const std::size_t ox = pad + c * (cell_w + pad);
            const std::size_t oy = pad + r * (cell_h + label_h + pad);
            for (std::size_t y = 0; y < cell.height; ++y)
                for (std::size_t x = 0; x < cell.width; ++x)
                    img.at(ox + x, oy + y) = cell.at(x, y);
            draw_text(img, ox, oy + cell_h + 1, rows[r][c].label);
        }
    return img;
}

}  // namespace dtd
