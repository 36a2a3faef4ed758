#pragma once

#include <cstdint>
#include <string>

#include "dtd/common.hpp"

namespace dtd {

// Labelled image set. Pixels are in [0,1] before noise; noise injection may
// push them outside that range (no clipping, the activation masks of the
// w+/a+ rules rely on exact zeros staying exact only in the clean case).
struct Dataset {
    Matrix images;                    // [N x D]
    std::vector<std::uint8_t> labels; // values 0..9
    double noise_sigma = 0.0;         // provenance tag
    std::uint64_t seed = 0;

    std::size_t size() const { return images.rows(); }
    std::size_t dim() const { return images.cols(); }
};

struct NoiseConfig {
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

// IDX containers, big-endian headers. Magic 0x803 for images, 0x801 for labels.
Matrix load_idx_images(const std::string& path);
std::vector<std::uint8_t> load_idx_labels(const std::string& path);

void write_idx_images(const std::string& path, const std::vector<std::uint8_t>& pixels,
                      std::uint32_t n, std::uint32_t rows, std::uint32_t cols);
void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels);

// value/255, exact.
Matrix scale_to_unit(const Matrix& raw);

Dataset load_dataset(const std::string& images_path, const std::string& labels_path);

// Per-pixel i.i.d. N(0, sigma^2). Rejects a dataset that was already noised.
Dataset add_gaussian_noise(const Dataset& clean, const NoiseConfig& cfg);

std::uint64_t dataset_hash(const Dataset& ds);

}  // namespace dtd
