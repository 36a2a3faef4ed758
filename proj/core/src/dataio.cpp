#include "dtd/dataio.hpp"

#include <random>

#include "binio.hpp"

namespace dtd {

namespace {
constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;
}  // namespace

Matrix load_idx_images(const std::string& path) {
    auto f = detail::open_in(path);
    const auto magic = detail::read_be32(f, "image magic");
    if (magic != kImageMagic)
        throw FormatError("wrong IDX image magic in " + path);
    const auto n = detail::read_be32(f, "image count");
    const auto rows = detail::read_be32(f, "row count");
    const auto cols = detail::read_be32(f, "column count");
    if (rows == 0 || cols == 0 || n == 0)
        throw FormatError("empty IDX image file " + path);
    const std::uint64_t per_image = std::uint64_t(rows) * cols;
    if (per_image > (1u << 24))
        throw FormatError("IDX image dimensions overflow sanity bound in " + path);

    Matrix out(n, per_image);
    std::vector<unsigned char> buf(per_image);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!f.read(reinterpret_cast<char*>(buf.data()), std::streamsize(per_image)))
            throw FormatError("truncated IDX image payload in " + path);
        for (std::uint64_t p = 0; p < per_image; ++p) out(i, p) = double(buf[p]);
    }
    return out;
}

std::vector<std::uint8_t> load_idx_labels(const std::string& path) {
    auto f = detail::open_in(path);
    const auto magic = detail::read_be32(f, "label magic");
    if (magic != kLabelMagic)
        throw FormatError("wrong IDX label magic in " + path);
    const auto n = detail::read_be32(f, "label count");
    if (n == 0) throw FormatError("empty IDX label file " + path);
    std::vector<std::uint8_t> labels(n);
    if (!f.read(reinterpret_cast<char*>(labels.data()), std::streamsize(n)))
        throw FormatError("truncated IDX label payload in " + path);
    for (auto l : labels)
        if (l > 9) throw FormatError("label out of range 0..9 in " + path);
    return labels;
}

void write_idx_images(const std::string& path, const std::vector<std::uint8_t>& pixels,
                      std::uint32_t n, std::uint32_t rows, std::uint32_t cols) {
    if (pixels.size() != std::uint64_t(n) * rows * cols)
        throw DimensionError("pixel buffer does not match declared IDX dimensions");
    auto f = detail::open_out(path);
    detail::write_be32(f, kImageMagic);
    detail::write_be32(f, n);
    detail::write_be32(f, rows);
    detail::write_be32(f, cols);
    f.write(reinterpret_cast<const char*>(pixels.data()), std::streamsize(pixels.size()));
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
    auto f = detail::open_out(path);
    detail::write_be32(f, kLabelMagic);
    detail::write_be32(f, std::uint32_t(labels.size()));
    f.write(reinterpret_cast<const char*>(labels.data()), std::streamsize(labels.size()));
}

Matrix scale_to_unit(const Matrix& raw) {
    Matrix out = raw;
    for (auto& v : out.data()) v /= 255.0;
    return out;
}

Dataset load_dataset(const std::string& images_path, const std::string& labels_path) {
    Dataset ds;
    ds.images = scale_to_unit(load_idx_images(images_path));
    ds.labels = load_idx_labels(labels_path);
    if (ds.images.rows() != ds.labels.size())
        throw FormatError("image/label count mismatch between " + images_path + " and " +
                          labels_path);
    return ds;
}

Dataset add_gaussian_noise(const Dataset& clean, const NoiseConfig& cfg) {
    if (clean.noise_sigma != 0.0)
        throw NumericalError("dataset already carries noise, refusing to noise twice");
    Dataset out = clean;
    out.noise_sigma = cfg.sigma;
    out.seed = cfg.seed;
    if (cfg.sigma == 0.0) return out;
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> noise(0.0, cfg.sigma);
    for (auto& v : out.images.data()) v += noise(rng);
    return out;
}

std::uint64_t dataset_hash(const Dataset& ds) {
    std::uint64_t h = fnv1a(ds.images.data().data(), ds.images.data().size() * sizeof(double));
    h = fnv1a(ds.labels.data(), ds.labels.size(), h);
    h = fnv1a(&ds.noise_sigma, sizeof(double), h);
    return h;
}

}  // namespace dtd
