#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dtd/heatmap.hpp"

using namespace dtd;

TEST_CASE("zero relevance maps to the exact midpoint color") {
    const Rgb mid = diverging_color(0.0);
    CHECK(mid.r == 255);
    CHECK(mid.g == 255);
    CHECK(mid.b == 255);
    Matrix rel(2, 2);  // all zero
    const RgbImage img = render_heatmap(rel, {1});
    for (const Rgb& p : img.pixels) {
        CHECK(p.r == 255);
        CHECK(p.g == 255);
        CHECK(p.b == 255);
    }
}

TEST_CASE("single positive pixel saturates warm, rest stays midpoint") {
    Matrix rel(2, 2);
    rel(0, 1) = 0.7;
    const RgbImage img = render_heatmap(rel, {1});
    CHECK(img.at(1, 0).r == 255);
    CHECK(img.at(1, 0).g == 0);
    CHECK(img.at(1, 0).b == 0);
    CHECK(img.at(0, 0).r == 255);
    CHECK(img.at(0, 0).g == 255);
    CHECK(img.at(0, 0).b == 255);
}

TEST_CASE("negating the relevance mirrors the colors about the midpoint") {
    Matrix rel(3, 1);
    rel(0, 0) = 1.0;
    rel(1, 0) = -0.25;
    rel(2, 0) = 0.5;
    Matrix neg = rel;
    for (auto& v : neg.data()) v = -v;
    const RgbImage a = render_heatmap(rel, {2});
    const RgbImage b = render_heatmap(neg, {2});
    REQUIRE(a.pixels.size() == b.pixels.size());
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        CHECK(a.pixels[i].r == b.pixels[i].b);
        CHECK(a.pixels[i].g == b.pixels[i].g);
        CHECK(a.pixels[i].b == b.pixels[i].r);
    }
}

TEST_CASE("non-finite relevance is rejected") {
    Matrix rel(1, 1);
    rel(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(render_heatmap(rel, {1}), NumericalError);
}

TEST_CASE("upscaling repeats cell pixels") {
    Matrix rel(1, 2);
    rel(0, 0) = 1.0;
    rel(0, 1) = -1.0;
    const RgbImage img = render_heatmap(rel, {3});
    CHECK(img.width == 6);
    CHECK(img.height == 3);
    for (std::size_t y = 0; y < 3; ++y)
        for (std::size_t x = 0; x < 3; ++x) {
            CHECK(img.at(x, y).r == 255);
            CHECK(img.at(x + 3, y).b == 255);
        }
}

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), {});
}

}  // namespace

TEST_CASE("PGM and PNG outputs are deterministic across reruns") {
    Matrix rel(4, 4);
    for (std::size_t i = 0; i < 16; ++i) rel.data()[i] = double(int(i) - 8) / 8.0;
    const RgbImage img = render_heatmap(rel, {2});
    write_png(img, "hm_a.png");
    write_png(img, "hm_b.png");
    write_pgm_magnitude(rel, {2}, "hm_a.pgm");
    write_pgm_magnitude(rel, {2}, "hm_b.pgm");
    const std::string png = slurp("hm_a.png");
    CHECK(png == slurp("hm_b.png"));
    CHECK(png.substr(1, 3) == "PNG");
    const std::string pgm = slurp("hm_a.pgm");
    CHECK(pgm == slurp("hm_b.pgm"));
    CHECK(pgm.substr(0, 2) == "P5");
    for (const char* f : {"hm_a.png", "hm_b.png", "hm_a.pgm", "hm_b.pgm"}) std::remove(f);
}

TEST_CASE("compose_grid has one cell per entry") {
    Matrix cell(2, 2);
    cell(0, 0) = 1.0;
    std::vector<std::vector<GridCell>> rows(3, std::vector<GridCell>(4, GridCell{cell, "x"}));
    const RgbImage img = compose_grid(rows, {2});
    // 4 columns of 2*2 pixels plus padding; 3 rows plus label bands
    CHECK(img.width == 4 * (4 + 2) + 2);
    CHECK(img.height == 3 * (4 + 10 + 2) + 2);
}

TEST_CASE("compose_grid rejects ragged input") {
    Matrix cell(2, 2);
    std::vector<std::vector<GridCell>> rows;
    rows.push_back({GridCell{cell, ""}, GridCell{cell, ""}});
    rows.push_back({GridCell{cell, ""}});
    CHECK_THROWS_AS(compose_grid(rows, {1}), DimensionError);
}
