#include <doctest.h>

#include <cmath>

#include "dtd/genmodel.hpp"

using namespace dtd;

namespace {

GenerativeSpec orthogonal_2d() {
    GenerativeSpec spec;
    spec.a_t = {1, 0};
    spec.A_n = Matrix(2, 1);
    spec.A_n(1, 0) = 1;
    spec.sigma_eps = 0.0;
    spec.seed = 3;
    return spec;
}

}  // namespace

TEST_CASE("sample: degenerate model is exactly a_t s_t") {
    GenerativeSpec spec;
    spec.a_t = {2, -1};
    spec.A_n = Matrix(2, 0);
    spec.sigma_eps = 0.0;
    spec.seed = 1;
    const auto batch = sample(spec, 50);
    for (std::size_t n = 0; n < 50; ++n) {
        CHECK(batch.X(0, n) == 2.0 * batch.s_t[n]);
        CHECK(batch.X(1, n) == -1.0 * batch.s_t[n]);
    }
}

TEST_CASE("sample: orthogonal construction separates coordinates") {
    const auto batch = sample(orthogonal_2d(), 100);
    for (std::size_t n = 0; n < 100; ++n)
        CHECK(batch.X(0, n) == batch.s_t[n]);  // coordinate 0 is s_t only
}

TEST_CASE("sample: s_t and s_n are empirically uncorrelated") {
    GenerativeSpec spec;
    spec.a_t = {1, 0};
    spec.A_n = Matrix(2, 1);
    spec.A_n(1, 0) = 1;
    spec.seed = 5;
    const std::size_t n = 100000;
    const auto batch = sample(spec, n);
    // coordinate 1 equals s_n; covariance with s_t should be near zero
    double mean_t = 0, mean_n = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_t += batch.s_t[i];
        mean_n += batch.X(1, i);
    }
    mean_t /= double(n);
    mean_n /= double(n);
    double cov = 0;
    for (std::size_t i = 0; i < n; ++i)
        cov += (batch.s_t[i] - mean_t) * (batch.X(1, i) - mean_n);
    cov /= double(n);
    CHECK(std::abs(cov) <= 0.02);
}

TEST_CASE("sample is reproducible bitwise under a fixed seed") {
    const auto a = sample(orthogonal_2d(), 20);
    const auto b = sample(orthogonal_2d(), 20);
    CHECK(a.X == b.X);
    CHECK(a.s_t == b.s_t);
}

TEST_CASE("fit_projection: noise-free orthogonal case recovers w = [1, 0]") {
    const auto batch = sample(orthogonal_2d(), 500);
    const Vector w = fit_projection(batch);
    CHECK(std::abs(w[0] - 1.0) <= 1e-9);
    CHECK(std::abs(w[1]) <= 1e-9);
}

TEST_CASE("fit_projection: scalar case inverts the gain") {
    GenerativeSpec spec;
    spec.a_t = {2};
    spec.A_n = Matrix(1, 0);
    spec.seed = 6;
    const auto batch = sample(spec, 100);
    const Vector w = fit_projection(batch);
    CHECK(w[0] == doctest::Approx(0.5));
}

TEST_CASE("fit_projection: singular matrix without ridge raises, ridge repairs it") {
    // duplicate coordinate makes the gram matrix singular
    GenerativeSpec spec;
    spec.a_t = {1, 1};
    spec.A_n = Matrix(2, 0);
    spec.seed = 7;
    const auto batch = sample(spec, 50);
    CHECK_THROWS_AS(fit_projection(batch, 0.0), NumericalError);
    const Vector w = fit_projection(batch, 1e-6);
    CHECK(std::isfinite(w[0]));
}

TEST_CASE("fit_projection: out-of-sample correlation under noise") {
    const GenerativeSpec spec = make_lab_spec(20, 5, 0.1, 8);
    const auto train_batch = sample(spec, 50000);
    const Vector w = fit_projection(train_batch);
    GenerativeSpec test_spec = spec;
    test_spec.seed = 9;
    const auto test_batch = sample(test_spec, 20000);
    double mt = 0, mp = 0;
    Vector pred(test_batch.s_t.size());
    for (std::size_t n = 0; n < pred.size(); ++n) {
        double p = 0;
        for (std::size_t i = 0; i < 20; ++i) p += w[i] * test_batch.X(i, n);
        pred[n] = p;
        mt += test_batch.s_t[n];
        mp += p;
    }
    mt /= double(pred.size());
    mp /= double(pred.size());
    double ctp = 0, ct = 0, cp = 0, bias = 0;
    for (std::size_t n = 0; n < pred.size(); ++n) {
        ctp += (test_batch.s_t[n] - mt) * (pred[n] - mp);
        ct += (test_batch.s_t[n] - mt) * (test_batch.s_t[n] - mt);
        cp += (pred[n] - mp) * (pred[n] - mp);
        bias += pred[n] - test_batch.s_t[n];
    }
    CHECK(ctp / std::sqrt(ct * cp) >= 0.95);
    // E[w.x] tracks s_t
    CHECK(std::abs(bias / double(pred.size())) <= 0.02);
}

TEST_CASE("verify_filter_conditions: fitted w on the noise-free orthogonal case") {
    const auto spec = orthogonal_2d();
    const Vector w = fit_projection(sample(spec, 500));
    const auto diag = verify_filter_conditions(w, spec);
    CHECK(std::abs(diag.task_gain - 1.0) <= 1e-9);
    CHECK(diag.max_leak <= 1e-9);
}

TEST_CASE("verify_filter_conditions: constructed w with orthogonal distractors") {
    const auto spec = orthogonal_2d();
    const Vector w = {1.0, 0.0};  // a_t / |a_t|^2
    const auto diag = verify_filter_conditions(w, spec);
    CHECK(diag.task_gain == 1.0);
    CHECK(diag.max_leak == 0.0);
}

TEST_CASE("gradient direction leaks when distractors overlap the pattern") {
    GenerativeSpec spec;
    spec.a_t = {1, 0};
    spec.A_n = Matrix(2, 1);
    spec.A_n(0, 0) = 0.5;  // overlap with a_t
    spec.A_n(1, 0) = 1.0;
    const Vector w = {1.0, 0.0};  // a_t / |a_t|^2: fine gain, bad orthogonality
    const auto diag = verify_filter_conditions(w, spec);
    CHECK(diag.task_gain == 1.0);
    CHECK(diag.max_leak > 0.0);
}

TEST_CASE("pattern_vs_filter_demo: no distractors, no noise, both align") {
    GenerativeSpec spec;
    spec.a_t = {1, 2, -1};
    spec.A_n = Matrix(3, 0);
    spec.sigma_eps = 0.0;
    spec.seed = 11;
    // all samples lie on the a_t line, so the gram matrix is rank one and OLS
    // needs a ridge to pick the minimum-norm solution inside that line
    const auto rep = pattern_vs_filter_demo(spec, 200, 1e-10);
    // the rank-deficient solve amplifies rounding orthogonal to the line, so
    // allow a ~1e-3 rad misalignment (cosine error is quadratic in the angle)
    CHECK(std::abs(rep.cosine_w - 1.0) <= 1e-6);
    CHECK(std::abs(rep.cosine_a_hat - 1.0) <= 1e-6);
}

TEST_CASE("pattern_vs_filter_demo: pattern beats filter under overlapping distractors") {
    const GenerativeSpec spec = make_lab_spec(20, 5, 0.1, 12);
    const auto rep = pattern_vs_filter_demo(spec, 50000);
    CHECK(rep.cosine_a_hat >= 0.99);
    CHECK(rep.cosine_a_hat > rep.cosine_w);
    CHECK(std::abs(rep.filter.task_gain - 1.0) <= 0.02);
    CHECK(rep.filter.max_leak <= 0.02);
}

TEST_CASE("pattern_vs_filter_demo is deterministic for equal seeds") {
    const GenerativeSpec spec = make_lab_spec(8, 2, 0.1, 13);
    const auto a = pattern_vs_filter_demo(spec, 5000);
    const auto b = pattern_vs_filter_demo(spec, 5000);
    CHECK(a.w == b.w);
    CHECK(a.a_hat == b.a_hat);
}
