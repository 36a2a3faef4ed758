#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "dtd/common.hpp"
#include "dtd/dataio.hpp"

namespace dtd {

enum class Activation : std::uint8_t { Identity = 0, ReLU = 1 };

struct DenseLayer {
    Matrix weights;  // [fan_out x fan_in]
    Vector bias;     // [fan_out]
    Activation activation = Activation::Identity;

    std::size_t fan_in() const { return weights.cols(); }
    std::size_t fan_out() const { return weights.rows(); }
};

// Dense MLP; the output layer is Identity (softmax lives in the training loss,
// explanations start from the logits).
struct Mlp {
    std::vector<DenseLayer> layers;
    std::size_t input_dim = 0;

    std::size_t output_dim() const { return layers.back().fan_out(); }
    void validate() const;  // throws DimensionError on inconsistent shapes
};

struct LayerTrace {
    Vector pre_activation;  // z^l
    Vector activation;      // x^l
};

struct ForwardTrace {
    Vector input;                   // x^0
    std::vector<LayerTrace> layers; // one entry per layer
};

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t epochs = 10;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
};

struct EpochStats {
    double loss = 0.0;
    double accuracy = 0.0;
};

Vector forward(const Mlp& mlp, const Vector& x);
ForwardTrace forward_trace(const Mlp& mlp, const Vector& x);

// d z^L_target / d x^0 through the recorded ReLU mask. No softmax term.
Vector input_gradient(const Mlp& mlp, const ForwardTrace& trace, std::size_t target);

// Bias-as-input view: the bias becomes one extra weight column against a
// constant input of 1.
Matrix augment_bias_as_input(const DenseLayer& layer);

// Glorot-uniform initialized net; the seed fully determines the weights.
Mlp make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
             std::size_t output_dim, std::uint64_t seed);

// Mini-batch SGD on softmax cross-entropy. Deterministic under cfg.seed.
std::vector<EpochStats> train(Mlp& mlp, const Dataset& data, const TrainConfig& cfg);

double accuracy(const Mlp& mlp, const Dataset& data);

// DTDN container: magic "DTDN", version, layer count, per layer fan_out/fan_in,
// activation code, weights row-major then bias, all little-endian, reals f64.
void save_model(const Mlp& mlp, const std::string& path);
Mlp load_model(const std::string& path);
std::uint64_t model_hash(const Mlp& mlp);

}  // namespace dtd
