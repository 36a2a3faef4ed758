#pragma once

#include <cstdint>
#include <string>

#include "dtd/common.hpp"
#include "dtd/network.hpp"

namespace dtd {

// Streaming second moments for the per-neuron pattern regression
// a_hat_j = sum_n x'_n z_nj / sum_n z_nj^2, over the bias-augmented fan-in.
struct MomentAccumulator {
    // per layer: cross [fan_out x (fan_in+1)], z_sq [fan_out]
    std::vector<Matrix> cross;
    std::vector<Vector> z_sq;
    std::uint64_t count = 0;

    static MomentAccumulator for_model(const Mlp& mlp);
};

struct PatternFingerprint {
    std::uint64_t model_hash = 0;
    std::uint64_t dataset_hash = 0;
    std::uint64_t sample_count = 0;

    bool operator==(const PatternFingerprint&) const = default;
};

struct PatternSet {
    // per layer: [(fan_in+1) x fan_out], column j = a_hat for neuron j
    std::vector<Matrix> layers;
    std::vector<std::vector<bool>> degenerate;  // per layer, per neuron
    PatternFingerprint fingerprint;
};

void accumulate(MomentAccumulator& acc, const ForwardTrace& trace);
MomentAccumulator merge(const MomentAccumulator& a, const MomentAccumulator& b);
PatternSet finalize(const MomentAccumulator& acc, double degeneracy_threshold = 1e-12);

PatternSet estimate_patterns(const Mlp& mlp, const Dataset& data,
                             double degeneracy_threshold = 1e-12);

// DTDP container: magic "DTDP", version, fingerprint, layer count, per layer
// fan_out and fan_in+1, column-major f64 LE, degenerate-flag bitmap.
void save_patterns(const PatternSet& ps, const std::string& path);
PatternSet load_patterns(const std::string& path);

}  // namespace dtd
