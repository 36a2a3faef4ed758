#include "dtd/genmodel.hpp"

#include <cmath>
#include <random>

namespace dtd {

SyntheticBatch sample(const GenerativeSpec& spec, std::size_t n) {
    if (n < 1) throw DimensionError("sample: need at least one draw");
    const std::size_t d = spec.dim(), k = spec.n_distractors();
    if (d == 0) throw DimensionError("sample: a_t must be non-empty");

    SyntheticBatch batch;
    batch.X = Matrix(d, n);
    batch.s_t.resize(n);

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);

    Vector s_n(k);
    for (std::size_t col = 0; col < n; ++col) {
        const double st = (spec.s_t_dist == SignalDist::StandardNormal)
                              ? gauss(rng)
                              : (coin(rng) ? 1.0 : -1.0);
        batch.s_t[col] = st;
        for (std::size_t j = 0; j < k; ++j) s_n[j] = gauss(rng);
        for (std::size_t i = 0; i < d; ++i) {
            double v = spec.a_t[i] * st;
            for (std::size_t j = 0; j < k; ++j) v += spec.A_n(i, j) * s_n[j];
            if (spec.sigma_eps > 0.0) v += spec.sigma_eps * gauss(rng);
            batch.X(i, col) = v;
        }
    }
    return batch;
}

namespace {

// In-place Cholesky solve of A x = b for symmetric positive definite A.
Vector cholesky_solve(Matrix A, Vector b) {
    const std::size_t n = A.rows();
    for (std::size_t j = 0; j < n; ++j) {
        double d = A(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= A(j, k) * A(j, k);
        if (d <= 0.0)
            throw NumericalError(
                "singular normal matrix; consider a positive ridge parameter");
        A(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = A(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= A(i, k) * A(j, k);
            A(i, j) = s / A(j, j);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {  // L y = b
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= A(i, k) * b[k];
        b[i] = s / A(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {  // L^T x = y
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= A(k, i) * b[k];
        b[i] = s / A(i, i);
    }
    return b;
}

}  // namespace

Vector fit_projection(const SyntheticBatch& batch, double ridge) {
    const std::size_t d = batch.X.rows(), n = batch.X.cols();
    if (n <= d) throw DimensionError("fit_projection: need more samples than dimensions");

    Matrix gram(d, d);
    Vector rhs(d, 0.0);
    for (std::size_t col = 0; col < n; ++col) {
        for (std::size_t i = 0; i < d; ++i) {
            const double xi = batch.X(i, col);
            rhs[i] += xi * batch.s_t[col];
            for (std::size_t j = 0; j <= i; ++j) gram(i, j) += xi * batch.X(j, col);
        }
    }
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) gram(i, j) = gram(j, i);
        gram(i, i) += ridge;
    }
    return cholesky_solve(std::move(gram), std::move(rhs));
}

FilterDiagnostics verify_filter_conditions(const Vector& w, const GenerativeSpec& spec) {
    if (w.size() != spec.dim())
        throw DimensionError("verify_filter_conditions: dimension mismatch");
    FilterDiagnostics diag;
    diag.task_gain = dot(w, spec.a_t);
    for (std::size_t k = 0; k < spec.n_distractors(); ++k) {
        double leak = 0.0;
        for (std::size_t i = 0; i < spec.dim(); ++i) leak += w[i] * spec.A_n(i, k);
        diag.max_leak = std::max(diag.max_leak, std::abs(leak));
    }
    return diag;
}

double cosine(const Vector& a, const Vector& b) {
    const double na = std::sqrt(dot(a, a)), nb = std::sqrt(dot(b, b));
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

PatternVsFilterReport pattern_vs_filter_demo(const GenerativeSpec& spec, std::size_t n,
                                             double ridge) {
    const SyntheticBatch batch = sample(spec, n);
    PatternVsFilterReport report;
    report.w = fit_projection(batch, ridge);
    report.filter = verify_filter_conditions(report.w, spec);

    // Pattern regression for the single linear unit z = w.x, raw moments as in
    // the streaming estimator (no bias coordinate in this lab: x has none).
    const std::size_t d = spec.dim();
    Vector cross(d, 0.0);
    double z_sq = 0.0;
    for (std::size_t col = 0; col < batch.X.cols(); ++col) {
        double z = 0.0;
        for (std::size_t i = 0; i < d; ++i) z += report.w[i] * batch.X(i, col);
        for (std::size_t i = 0; i < d; ++i) cross[i] += batch.X(i, col) * z;
        z_sq += z * z;
    }
    if (z_sq <= 0.0) throw NumericalError("degenerate projection output");
    report.a_hat.resize(d);
    for (std::size_t i = 0; i < d; ++i) report.a_hat[i] = cross[i] / z_sq;

    report.cosine_w = cosine(report.w, spec.a_t);
    report.cosine_a_hat = cosine(report.a_hat, spec.a_t);
    return report;
}

GenerativeSpec make_lab_spec(std::size_t dim, std::size_t n_distractors, double sigma,
                             std::uint64_t seed) {
    GenerativeSpec spec;
    spec.sigma_eps = sigma;
    spec.seed = seed;
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> gauss(0.0, 1.0);
    spec.a_t.resize(dim);
    for (auto& v : spec.a_t) v = gauss(rng);
    // distractors deliberately overlap a_t: random direction plus a slice of a_t
    spec.A_n = Matrix(dim, n_distractors);
    for (std::size_t k = 0; k < n_distractors; ++k)
        for (std::size_t i = 0; i < dim; ++i)
            spec.A_n(i, k) = gauss(rng) + 0.3 * spec.a_t[i];
    return spec;
}

}  // namespace dtd
