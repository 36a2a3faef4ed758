#include "dtd/patterns.hpp"

#include <cmath>
#include <cstring>

#include "binio.hpp"

namespace dtd {

MomentAccumulator MomentAccumulator::for_model(const Mlp& mlp) {
    MomentAccumulator acc;
    for (const auto& layer : mlp.layers) {
        acc.cross.emplace_back(layer.fan_out(), layer.fan_in() + 1);
        acc.z_sq.emplace_back(layer.fan_out(), 0.0);
    }
    return acc;
}

void accumulate(MomentAccumulator& acc, const ForwardTrace& trace) {
    if (trace.layers.size() != acc.cross.size())
        throw DimensionError("accumulate: trace depth does not match accumulator");
    for (std::size_t l = 0; l < trace.layers.size(); ++l) {
        const Vector& below = (l == 0) ? trace.input : trace.layers[l - 1].activation;
        const Vector& z = trace.layers[l].pre_activation;
        Matrix& cross = acc.cross[l];
        if (z.size() != cross.rows() || below.size() + 1 != cross.cols())
            throw DimensionError("accumulate: layer shape mismatch");
        for (std::size_t j = 0; j < z.size(); ++j) {
            const double zj = z[j];
            double* c = cross.row_ptr(j);
            for (std::size_t i = 0; i < below.size(); ++i) c[i] += below[i] * zj;
            c[below.size()] += zj;  // bias coordinate, activation 1
            acc.z_sq[l][j] += zj * zj;
        }
    }
    ++acc.count;
}

MomentAccumulator merge(const MomentAccumulator& a, const MomentAccumulator& b) {
    if (a.cross.size() != b.cross.size())
        throw DimensionError("merge: accumulator layouts differ");
    MomentAccumulator out = a;
    for (std::size_t l = 0; l < a.cross.size(); ++l) {
        if (a.cross[l].rows() != b.cross[l].rows() || a.cross[l].cols() != b.cross[l].cols())
            throw DimensionError("merge: accumulator layouts differ");
        for (std::size_t i = 0; i < out.cross[l].data().size(); ++i)
            out.cross[l].data()[i] += b.cross[l].data()[i];
        for (std::size_t j = 0; j < out.z_sq[l].size(); ++j)
            out.z_sq[l][j] += b.z_sq[l][j];
    }
    out.count += b.count;
    return out;
}

PatternSet finalize(const MomentAccumulator& acc, double degeneracy_threshold) {
    if (acc.count == 0) throw NumericalError("finalize: no samples accumulated");
    PatternSet ps;
    ps.fingerprint.sample_count = acc.count;
    for (std::size_t l = 0; l < acc.cross.size(); ++l) {
        const Matrix& cross = acc.cross[l];
        Matrix pat(cross.cols(), cross.rows());  // [(fan_in+1) x fan_out]
        std::vector<bool> dead(cross.rows(), false);
        for (std::size_t j = 0; j < cross.rows(); ++j) {
            const double zsq = acc.z_sq[l][j];
            if (zsq > degeneracy_threshold * double(acc.count)) {
                for (std::size_t i = 0; i < cross.cols(); ++i)
                    pat(i, j) = cross(j, i) / zsq;
            } else {
                dead[j] = true;  // zero column stays
            }
        }
        ps.layers.push_back(std::move(pat));
        ps.degenerate.push_back(std::move(dead));
    }
    return ps;
}

PatternSet estimate_patterns(const Mlp& mlp, const Dataset& data,
                             double degeneracy_threshold) {
    if (data.size() == 0) throw DimensionError("estimate_patterns: empty dataset");
    auto acc = MomentAccumulator::for_model(mlp);
    Vector x(data.dim());
    for (std::size_t n = 0; n < data.size(); ++n) {
        const double* row = data.images.row_ptr(n);
        x.assign(row, row + data.dim());
        accumulate(acc, forward_trace(mlp, x));
    }
    PatternSet ps = finalize(acc, degeneracy_threshold);
    ps.fingerprint.model_hash = model_hash(mlp);
    ps.fingerprint.dataset_hash = dataset_hash(data);
    return ps;
}

namespace {
constexpr char kPatternMagic[4] = {'D', 'T', 'D', 'P'};
constexpr std::uint32_t kPatternVersion = 1;
}  // namespace

void save_patterns(const PatternSet& ps, const std::string& path) {
    auto f = detail::open_out(path);
    f.write(kPatternMagic, 4);
    detail::write_le<std::uint32_t>(f, kPatternVersion);
    detail::write_le<std::uint64_t>(f, ps.fingerprint.model_hash);
    detail::write_le<std::uint64_t>(f, ps.fingerprint.dataset_hash);
    detail::write_le<std::uint64_t>(f, ps.fingerprint.sample_count);
    detail::write_le<std::uint32_t>(f, std::uint32_t(ps.layers.size()));
    for (std::size_t l = 0; l < ps.layers.size(); ++l) {
        const Matrix& pat = ps.layers[l];  // [(fan_in+1) x fan_out]
        const std::size_t fan_out = pat.cols(), aug = pat.rows();
        detail::write_le<std::uint32_t>(f, std::uint32_t(fan_out));
        detail::write_le<std::uint32_t>(f, std::uint32_t(aug));
        // column-major: one pattern vector after another
        for (std::size_t j = 0; j < fan_out; ++j)
            for (std::size_t i = 0; i < aug; ++i)
                detail::write_le<double>(f, pat(i, j));
        std::vector<std::uint8_t> bitmap((fan_out + 7) / 8, 0);
        for (std::size_t j = 0; j < fan_out; ++j)
            if (ps.degenerate[l][j]) bitmap[j / 8] |= std::uint8_t(1u << (j % 8));
        f.write(reinterpret_cast<const char*>(bitmap.data()),
                std::streamsize(bitmap.size()));
    }
    if (!f) throw FormatError("failed writing pattern file " + path);
}

PatternSet load_patterns(const std::string& path) {
    auto f = detail::open_in(path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, kPatternMagic, 4) != 0)
        throw FormatError("not a DTDP pattern file: " + path);
    if (detail::read_le<std::uint32_t>(f, "pattern version") != kPatternVersion)
        throw FormatError("unsupported DTDP version in " + path);
    PatternSet ps;
    ps.fingerprint.model_hash = detail::read_le<std::uint64_t>(f, "model hash");
    ps.fingerprint.dataset_hash = detail::read_le<std::uint64_t>(f, "dataset hash");
    ps.fingerprint.sample_count = detail::read_le<std::uint64_t>(f, "sample count");
    const auto n_layers = detail::read_le<std::uint32_t>(f, "layer count");
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        const auto fan_out = detail::read_le<std::uint32_t>(f, "fan_out");
        const auto aug = detail::read_le<std::uint32_t>(f, "fan_in+1");
        Matrix pat(aug, fan_out);
        for (std::uint32_t j = 0; j < fan_out; ++j)
            for (std::uint32_t i = 0; i < aug; ++i)
                pat(i, j) = detail::read_le<double>(f, "pattern value");
        std::vector<std::uint8_t> bitmap((fan_out + 7) / 8);
        if (!f.read(reinterpret_cast<char*>(bitmap.data()), std::streamsize(bitmap.size())))
            throw FormatError("truncated degenerate bitmap in " + path);
        std::vector<bool> dead(fan_out, false);
        for (std::uint32_t j = 0; j < fan_out; ++j)
            dead[j] = (bitmap[j / 8] >> (j % 8)) & 1u;
        ps.layers.push_back(std::move(pat));
        ps.degenerate.push_back(std::move(dead));
    }
    return ps;
}

}  // namespace dtd
