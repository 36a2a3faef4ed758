#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "dtd/genmodel.hpp"
#include "dtd/patterns.hpp"

using namespace dtd;

namespace {

Mlp linear_unit(std::vector<double> w, double bias = 0.0) {
    Mlp m;
    m.input_dim = w.size();
    DenseLayer l;
    l.weights = Matrix(1, w.size());
    for (std::size_t i = 0; i < w.size(); ++i) l.weights(0, i) = w[i];
    l.bias = {bias};
    m.layers.push_back(std::move(l));
    return m;
}

Dataset dataset_from_columns(const Matrix& X) {  // X is [D x N]
    Dataset ds;
    ds.images = Matrix(X.cols(), X.rows());
    ds.labels.assign(X.cols(), 0);
    for (std::size_t n = 0; n < X.cols(); ++n)
        for (std::size_t i = 0; i < X.rows(); ++i) ds.images(n, i) = X(i, n);
    return ds;
}

}  // namespace

TEST_CASE("accumulate: hand single-sample moments") {
    const Mlp m = linear_unit({1, 2, 0});
    auto acc = MomentAccumulator::for_model(m);
    accumulate(acc, forward_trace(m, {1, 1, 1}));  // z = 3
    CHECK(acc.count == 1);
    CHECK(acc.cross[0](0, 0) == 3);
    CHECK(acc.cross[0](0, 1) == 3);
    CHECK(acc.cross[0](0, 2) == 3);
    CHECK(acc.cross[0](0, 3) == 3);  // bias coordinate
    CHECK(acc.z_sq[0][0] == 9);

    const PatternSet ps = finalize(acc);
    for (int i = 0; i < 4; ++i) CHECK(ps.layers[0](i, 0) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("finalize rejects an empty accumulator") {
    const Mlp m = linear_unit({1});
    auto acc = MomentAccumulator::for_model(m);
    CHECK_THROWS_AS(finalize(acc), NumericalError);
}

TEST_CASE("self-consistent regression: x = a z recovers a") {
    // choose w with w.a = 1 so z = w.x = z exactly
    const Vector a = {2, 0, 1};
    const Mlp m = linear_unit({0.5, 0, 0});
    auto acc = MomentAccumulator::for_model(m);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (int n = 0; n < 50; ++n) {
        const double z = g(rng);
        accumulate(acc, forward_trace(m, {a[0] * z, a[1] * z, a[2] * z}));
    }
    const PatternSet ps = finalize(acc);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(std::abs(ps.layers[0](i, 0) - a[i]) <= 1e-9);
    CHECK_FALSE(ps.degenerate[0][0]);
}

TEST_CASE("dead neuron yields a zero column with the degenerate flag") {
    const Mlp m = linear_unit({0, 0});  // z identically 0
    auto acc = MomentAccumulator::for_model(m);
    accumulate(acc, forward_trace(m, {1, 2}));
    accumulate(acc, forward_trace(m, {3, 4}));
    const PatternSet ps = finalize(acc);
    CHECK(ps.degenerate[0][0]);
    for (int i = 0; i < 3; ++i) CHECK(ps.layers[0](i, 0) == 0.0);
}

TEST_CASE("merge: identity element, commutativity, associativity") {
    const Mlp m = linear_unit({1, -1, 2});
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    auto mk = [&](int n) {
        auto acc = MomentAccumulator::for_model(m);
        for (int i = 0; i < n; ++i)
            accumulate(acc, forward_trace(m, {g(rng), g(rng), g(rng)}));
        return acc;
    };
    const auto a = mk(4), b = mk(7), c = mk(3);
    const auto empty = MomentAccumulator::for_model(m);

    auto close = [](const MomentAccumulator& p, const MomentAccumulator& q) {
        if (p.count != q.count) return false;
        for (std::size_t l = 0; l < p.cross.size(); ++l)
            for (std::size_t i = 0; i < p.cross[l].data().size(); ++i)
                if (std::abs(p.cross[l].data()[i] - q.cross[l].data()[i]) >
                    1e-12 * (1.0 + std::abs(q.cross[l].data()[i])))
                    return false;
        return true;
    };
    CHECK(close(merge(a, empty), a));
    CHECK(close(merge(a, b), merge(b, a)));
    CHECK(close(merge(merge(a, b), c), merge(a, merge(b, c))));
}

TEST_CASE("merge of shards equals accumulation of the concatenation") {
    const Mlp m = linear_unit({1, 0.5});
    std::vector<Vector> samples;
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g;
    for (int i = 0; i < 10; ++i) samples.push_back({g(rng), g(rng)});
    auto all = MomentAccumulator::for_model(m);
    auto sa = MomentAccumulator::for_model(m);
    auto sb = MomentAccumulator::for_model(m);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        accumulate(all, forward_trace(m, samples[i]));
        accumulate(i < 5 ? sa : sb, forward_trace(m, samples[i]));
    }
    const auto merged = merge(sa, sb);
    CHECK(merged.count == all.count);
    for (std::size_t i = 0; i < merged.cross[0].data().size(); ++i)
        CHECK(merged.cross[0].data()[i] ==
              doctest::Approx(all.cross[0].data()[i]).epsilon(1e-12));
}

TEST_CASE("streaming finalize matches the dense closed-form regression") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    for (int t = 0; t < 50; ++t) {
        const std::size_t d = 1 + rng() % 5;
        const std::size_t n = d + 2 + rng() % std::size_t(20 - d);
        std::vector<double> w(d);
        for (auto& v : w) v = g(rng);
        const Mlp m = linear_unit(w);
        Matrix X(d, n);
        for (auto& v : X.data()) v = g(rng);
        const PatternSet ps = estimate_patterns(m, dataset_from_columns(X));

        // dense oracle: a = (w^T X X^T w)^-1 w^T X X^T, over augmented rows
        Matrix Xa(d + 1, n);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t c = 0; c < n; ++c) Xa(i, c) = X(i, c);
        for (std::size_t c = 0; c < n; ++c) Xa(d, c) = 1.0;
        Vector wa(d + 1, 0.0);
        for (std::size_t i = 0; i < d; ++i) wa[i] = w[i];
        Vector z(n, 0.0);
        for (std::size_t c = 0; c < n; ++c)
            for (std::size_t i = 0; i <= d; ++i) z[c] += wa[i] * Xa(i, c);
        double denom = 0.0;
        for (double v : z) denom += v * v;
        for (std::size_t i = 0; i <= d; ++i) {
            double num = 0.0;
            for (std::size_t c = 0; c < n; ++c) num += Xa(i, c) * z[c];
            CHECK(std::abs(ps.layers[0](i, 0) - num / denom) <= 1e-10);
        }
    }
}

TEST_CASE("scaling the data leaves pixel patterns fixed, divides the bias one by c") {
    // For a bias-free unit z = w.x, scaling X by c scales both cross moments and
    // z_sq by c^2, so the pixel coordinates of a_hat cancel exactly.  The bias
    // coordinate regresses the constant 1 against z and picks up a 1/c instead.
    const Mlp m = linear_unit({1.5, -0.5, 0.25});
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    Matrix X(3, 15);
    for (auto& v : X.data()) v = g(rng);
    const double c = 3.0;
    Matrix Xc = X;
    for (auto& v : Xc.data()) v *= c;
    const PatternSet p1 = estimate_patterns(m, dataset_from_columns(X));
    const PatternSet p2 = estimate_patterns(m, dataset_from_columns(Xc));
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(std::abs(p2.layers[0](i, 0) - p1.layers[0](i, 0)) <= 1e-10);
    CHECK(std::abs(p2.layers[0](3, 0) - p1.layers[0](3, 0) / c) <= 1e-10);
}

TEST_CASE("estimate_patterns is order independent") {
    const Mlp m = linear_unit({1, 2});
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g;
    Dataset ds;
    ds.images = Matrix(20, 2);
    ds.labels.assign(20, 0);
    for (auto& v : ds.images.data()) v = g(rng);
    Dataset rev = ds;
    for (std::size_t n = 0; n < 20; ++n)
        for (std::size_t i = 0; i < 2; ++i) rev.images(n, i) = ds.images(19 - n, i);
    const PatternSet a = estimate_patterns(m, ds);
    const PatternSet b = estimate_patterns(m, rev);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(a.layers[0](i, 0) == doctest::Approx(b.layers[0](i, 0)).epsilon(1e-12));
}

TEST_CASE("identical samples give a pattern proportional to the augmented input") {
    const Mlp m = linear_unit({1, 1}, 0.5);
    Dataset ds;
    ds.images = Matrix(5, 2);
    for (std::size_t n = 0; n < 5; ++n) {
        ds.images(n, 0) = 2.0;
        ds.images(n, 1) = 4.0;
    }
    ds.labels.assign(5, 0);
    const PatternSet ps = estimate_patterns(m, ds);
    // a_hat = x_aug * z / z^2 = x_aug / z, so ratios match [2, 4, 1]
    const double r0 = ps.layers[0](0, 0);
    CHECK(ps.layers[0](1, 0) == doctest::Approx(2.0 * r0));
    CHECK(ps.layers[0](2, 0) == doctest::Approx(0.5 * r0));
}

TEST_CASE("pattern recovery on the generative model through a linear layer") {
    const GenerativeSpec spec = make_lab_spec(10, 3, 0.05, 77);
    const SyntheticBatch batch = sample(spec, 50000);
    const Vector w = fit_projection(batch, 0.0);
    const Mlp m = linear_unit(std::vector<double>(w.begin(), w.end()));
    const PatternSet ps = estimate_patterns(m, dataset_from_columns(batch.X));
    Vector a_hat(10);
    for (std::size_t i = 0; i < 10; ++i) a_hat[i] = ps.layers[0](i, 0);
    CHECK(cosine(a_hat, spec.a_t) >= 0.99);
}

TEST_CASE("DTDP persistence round trip preserves values, flags and fingerprint") {
    const Mlp m = linear_unit({1, 2, 3});
    Dataset ds;
    ds.images = Matrix(6, 3);
    ds.labels.assign(6, 0);
    std::mt19937_64 rng(10);
    std::normal_distribution<double> g;
    for (auto& v : ds.images.data()) v = g(rng);
    const PatternSet ps = estimate_patterns(m, ds);
    const std::string path = "test_patterns.dtdp";
    save_patterns(ps, path);
    const PatternSet back = load_patterns(path);
    CHECK(back.layers == ps.layers);
    CHECK(back.degenerate == ps.degenerate);
    CHECK(back.fingerprint == ps.fingerprint);
    std::remove(path.c_str());
}
