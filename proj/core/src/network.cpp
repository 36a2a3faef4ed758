#include "dtd/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "binio.hpp"

namespace dtd {

void Mlp::validate() const {
    if (layers.empty()) throw DimensionError("mlp has no layers");
    std::size_t expect = input_dim;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (layer.fan_in() != expect)
            throw DimensionError("layer fan_in does not match previous fan_out");
        if (layer.bias.size() != layer.fan_out())
            throw DimensionError("bias length does not match fan_out");
        for (double v : layer.weights.data())
            if (!std::isfinite(v)) throw NumericalError("non-finite weight");
        for (double v : layer.bias)
            if (!std::isfinite(v)) throw NumericalError("non-finite bias");
        expect = layer.fan_out();
    }
    if (layers.back().activation != Activation::Identity)
        throw DimensionError("output layer must use Identity activation");
}

namespace {

void affine(const DenseLayer& layer, const Vector& x, Vector& z) {
    const std::size_t out = layer.fan_out(), in = layer.fan_in();
    z.resize(out);
    for (std::size_t j = 0; j < out; ++j) {
        const double* w = layer.weights.row_ptr(j);
        double s = layer.bias[j];
        for (std::size_t i = 0; i < in; ++i) s += w[i] * x[i];
        z[j] = s;
    }
}

void check_input(const Mlp& mlp, const Vector& x) {
    if (x.size() != mlp.input_dim)
        throw DimensionError("input length does not match input_dim");
    for (double v : x)
        if (!std::isfinite(v)) throw NumericalError("non-finite input entry");
}

}  // namespace

ForwardTrace forward_trace(const Mlp& mlp, const Vector& x) {
    check_input(mlp, x);
    ForwardTrace trace;
    trace.input = x;
    trace.layers.resize(mlp.layers.size());
    const Vector* cur = &trace.input;
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
        auto& lt = trace.layers[l];
        affine(mlp.layers[l], *cur, lt.pre_activation);
        lt.activation = lt.pre_activation;
        if (mlp.layers[l].activation == Activation::ReLU)
            for (auto& v : lt.activation) v = std::max(v, 0.0);
        cur = &lt.activation;
    }
    return trace;
}

Vector forward(const Mlp& mlp, const Vector& x) {
    return forward_trace(mlp, x).layers.back().pre_activation;
}

Vector input_gradient(const Mlp& mlp, const ForwardTrace& trace, std::size_t target) {
    if (target >= mlp.output_dim()) throw DimensionError("gradient target out of range");
    // grad holds d z^L_target / d z^l while walking down.
    Vector grad(mlp.output_dim(), 0.0);
    grad[target] = 1.0;
    for (std::size_t l = mlp.layers.size(); l-- > 0;) {
        const auto& layer = mlp.layers[l];
        if (l + 1 < mlp.layers.size() || layer.activation == Activation::ReLU) {
            // mask applies when this layer's activation feeds the next affine map
            if (layer.activation == Activation::ReLU)
                for (std::size_t j = 0; j < grad.size(); ++j)
                    if (trace.layers[l].pre_activation[j] <= 0.0) grad[j] = 0.0;
        }
        Vector lower(layer.fan_in(), 0.0);
        for (std::size_t j = 0; j < layer.fan_out(); ++j) {
            if (grad[j] == 0.0) continue;
            const double* w = layer.weights.row_ptr(j);
            for (std::size_t i = 0; i < layer.fan_in(); ++i) lower[i] += grad[j] * w[i];
        }
        grad = std::move(lower);
    }
    return grad;
}

Matrix augment_bias_as_input(const DenseLayer& layer) {
    Matrix out(layer.fan_out(), layer.fan_in() + 1);
    for (std::size_t j = 0; j < layer.fan_out(); ++j) {
        const double* w = layer.weights.row_ptr(j);
        double* o = out.row_ptr(j);
        std::copy(w, w + layer.fan_in(), o);
        o[layer.fan_in()] = layer.bias[j];
    }
    return out;
}

Mlp make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
             std::size_t output_dim, std::uint64_t seed) {
    Mlp mlp;
    mlp.input_dim = input_dim;
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> widths = {input_dim};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(output_dim);
    for (std::size_t l = 1; l < widths.size(); ++l) {
        DenseLayer layer;
        const std::size_t in = widths[l - 1], out = widths[l];
        layer.weights = Matrix(out, in);
        layer.bias.assign(out, 0.0);
        layer.activation = (l + 1 < widths.size()) ? Activation::ReLU : Activation::Identity;
        const double limit = std::sqrt(6.0 / double(in + out));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (auto& w : layer.weights.data()) w = u(rng);
        mlp.layers.push_back(std::move(layer));
    }
    mlp.validate();
    return mlp;
}

namespace {

struct BatchGrads {
    std::vector<Matrix> dW;
    std::vector<Vector> db;
    explicit BatchGrads(const Mlp& mlp) {
        for (const auto& l : mlp.layers) {
            dW.emplace_back(l.fan_out(), l.fan_in());
            db.emplace_back(l.fan_out(), 0.0);
        }
    }
    void reset() {
        for (auto& m : dW) std::fill(m.data().begin(), m.data().end(), 0.0);
        for (auto& v : db) std::fill(v.begin(), v.end(), 0.0);
    }
};

// softmax cross-entropy on logits; returns loss, fills dlogits
double softmax_ce(const Vector& logits, std::size_t label, Vector& dlogits) {
    const double zmax = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    dlogits.resize(logits.size());
    for (std::size_t k = 0; k < logits.size(); ++k) {
        dlogits[k] = std::exp(logits[k] - zmax);
        denom += dlogits[k];
    }
    for (auto& v : dlogits) v /= denom;
    const double loss = -std::log(std::max(dlogits[label], 1e-300));
    dlogits[label] -= 1.0;
    return loss;
}

}  // namespace

std::vector<EpochStats> train(Mlp& mlp, const Dataset& data, const TrainConfig& cfg) {
    mlp.validate();
    if (data.size() == 0) throw DimensionError("cannot train on an empty dataset");
    if (data.dim() != mlp.input_dim)
        throw DimensionError("dataset dimensionality does not match the network");
    for (auto l : data.labels)
        if (l >= mlp.output_dim()) throw DimensionError("label exceeds output width");

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<EpochStats> history;
    BatchGrads grads(mlp);
    Vector x(data.dim()), dlogits, delta, lower;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, order.size());
            grads.reset();
            for (std::size_t b = start; b < end; ++b) {
                const std::size_t n = order[b];
                const double* row = data.images.row_ptr(n);
                x.assign(row, row + data.dim());
                ForwardTrace trace = forward_trace(mlp, x);
                const Vector& logits = trace.layers.back().pre_activation;
                loss_sum += softmax_ce(logits, data.labels[n], dlogits);
                const auto argmax =
                    std::max_element(logits.begin(), logits.end()) - logits.begin();
                if (std::size_t(argmax) == data.labels[n]) ++correct;

                // backprop
                delta = dlogits;
                for (std::size_t l = mlp.layers.size(); l-- > 0;) {
                    const auto& layer = mlp.layers[l];
                    const Vector& below =
                        (l == 0) ? trace.input : trace.layers[l - 1].activation;
                    for (std::size_t j = 0; j < layer.fan_out(); ++j) {
                        if (delta[j] == 0.0) continue;
                        double* gw = grads.dW[l].row_ptr(j);
                        for (std::size_t i = 0; i < layer.fan_in(); ++i)
                            gw[i] += delta[j] * below[i];
                        grads.db[l][j] += delta[j];
                    }
                    if (l == 0) break;
                    lower.assign(layer.fan_in(), 0.0);
                    for (std::size_t j = 0; j < layer.fan_out(); ++j) {
                        if (delta[j] == 0.0) continue;
                        const double* w = layer.weights.row_ptr(j);
                        for (std::size_t i = 0; i < layer.fan_in(); ++i)
                            lower[i] += delta[j] * w[i];
                    }
                    const auto& prev = mlp.layers[l - 1];
                    if (prev.activation == Activation::ReLU)
                        for (std::size_t i = 0; i < lower.size(); ++i)
                            if (trace.layers[l - 1].pre_activation[i] <= 0.0) lower[i] = 0.0;
                    delta = lower;
                }
            }
            const double step = cfg.learning_rate / double(end - start);
            for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
                auto& wd = mlp.layers[l].weights.data();
                const auto& gd = grads.dW[l].data();
                for (std::size_t i = 0; i < wd.size(); ++i) wd[i] -= step * gd[i];
                for (std::size_t j = 0; j < mlp.layers[l].bias.size(); ++j)
                    mlp.layers[l].bias[j] -= step * grads.db[l][j];
            }
        }
        EpochStats stats;
        stats.loss = loss_sum / double(data.size());
        stats.accuracy = double(correct) / double(data.size());
        if (!std::isfinite(stats.loss))
            throw NumericalError("training diverged (non-finite loss) at epoch " +
                                 std::to_string(epoch));
        history.push_back(stats);
    }
    return history;
}

double accuracy(const Mlp& mlp, const Dataset& data) {
    if (data.size() == 0) throw DimensionError("accuracy of an empty dataset");
    std::size_t correct = 0;
    Vector x(data.dim());
    for (std::size_t n = 0; n < data.size(); ++n) {
        const double* row = data.images.row_ptr(n);
        x.assign(row, row + data.dim());
        const Vector logits = forward(mlp, x);
        // ties break to the lowest index
        std::size_t best = 0;
        for (std::size_t k = 1; k < logits.size(); ++k)
            if (logits[k] > logits[best]) best = k;
        if (best == data.labels[n]) ++correct;
    }
    return double(correct) / double(data.size());
}

namespace {
constexpr char kModelMagic[4] = {'D', 'T', 'D', 'N'};
constexpr std::uint32_t kModelVersion = 1;
}  // namespace

void save_model(const Mlp& mlp, const std::string& path) {
    mlp.validate();
    auto f = detail::open_out(path);
    f.write(kModelMagic, 4);
    detail::write_le<std::uint32_t>(f, kModelVersion);
    detail::write_le<std::uint32_t>(f, std::uint32_t(mlp.layers.size()));
    for (const auto& layer : mlp.layers) {
        detail::write_le<std::uint32_t>(f, std::uint32_t(layer.fan_out()));
        detail::write_le<std::uint32_t>(f, std::uint32_t(layer.fan_in()));
        f.put(char(static_cast<std::uint8_t>(layer.activation)));
        f.write(reinterpret_cast<const char*>(layer.weights.data().data()),
                std::streamsize(layer.weights.data().size() * sizeof(double)));
        f.write(reinterpret_cast<const char*>(layer.bias.data()),
                std::streamsize(layer.bias.size() * sizeof(double)));
    }
    if (!f) throw FormatError("failed writing model file " + path);
}

Mlp load_model(const std::string& path) {
    auto f = detail::open_in(path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, kModelMagic, 4) != 0)
        throw FormatError("not a DTDN model file: " + path);
    const auto version = detail::read_le<std::uint32_t>(f, "model version");
    if (version != kModelVersion)
        throw FormatError("unsupported DTDN version in " + path);
    const auto n_layers = detail::read_le<std::uint32_t>(f, "layer count");
    Mlp mlp;
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        DenseLayer layer;
        const auto out = detail::read_le<std::uint32_t>(f, "fan_out");
        const auto in = detail::read_le<std::uint32_t>(f, "fan_in");
        const int code = f.get();
        if (code != 0 && code != 1) throw FormatError("bad activation code in " + path);
        layer.activation = static_cast<Activation>(code);
        layer.weights = Matrix(out, in);
        layer.bias.assign(out, 0.0);
        if (!f.read(reinterpret_cast<char*>(layer.weights.data().data()),
                    std::streamsize(layer.weights.data().size() * sizeof(double))))
            throw FormatError("truncated weights in " + path);
        if (!f.read(reinterpret_cast<char*>(layer.bias.data()),
                    std::streamsize(layer.bias.size() * sizeof(double))))
            throw FormatError("truncated bias in " + path);
        if (l == 0) mlp.input_dim = in;
        mlp.layers.push_back(std::move(layer));
    }
    mlp.validate();
    return mlp;
}

std::uint64_t model_hash(const Mlp& mlp) {
    std::uint64_t h = fnv1a(&mlp.input_dim, sizeof(mlp.input_dim));
    for (const auto& layer : mlp.layers) {
        h = fnv1a(layer.weights.data().data(), layer.weights.data().size() * sizeof(double), h);
        h = fnv1a(layer.bias.data(), layer.bias.size() * sizeof(double), h);
        const auto a = static_cast<std::uint8_t>(layer.activation);
        h = fnv1a(&a, 1, h);
    }
    return h;
}

}  // namespace dtd
