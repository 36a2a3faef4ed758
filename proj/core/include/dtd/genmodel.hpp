#pragma once

#include <cstdint>

#include "dtd/common.hpp"

namespace dtd {

enum class SignalDist { StandardNormal, PlusMinusOne };

// x = a_t * s_t + A_n * s_n + eps, with uncorrelated latent distractors and
// isotropic Gaussian noise. a_t and the columns of A_n need not be orthogonal.
struct GenerativeSpec {
    Vector a_t;            // [D]
    Matrix A_n;            // [D x K]
    double sigma_eps = 0.0;
    SignalDist s_t_dist = SignalDist::StandardNormal;
    std::uint64_t seed = 0;

    std::size_t dim() const { return a_t.size(); }
    std::size_t n_distractors() const { return A_n.cols(); }
};

struct SyntheticBatch {
    Matrix X;   // [D x N], one sample per column
    Vector s_t; // [N]
};

struct FilterDiagnostics {
    double task_gain = 0.0;  // w.a_t
    double max_leak = 0.0;   // max_k |w.A_n[:,k]|
};

struct PatternVsFilterReport {
    Vector w;
    Vector a_hat;
    double cosine_w = 0.0;      // cosine(w, a_t)
    double cosine_a_hat = 0.0;  // cosine(a_hat, a_t)
    FilterDiagnostics filter;
};

SyntheticBatch sample(const GenerativeSpec& spec, std::size_t n);

// Least-squares regression of s_t on X (optional ridge), via normal equations
// and a symmetric Cholesky solve.
Vector fit_projection(const SyntheticBatch& batch, double ridge = 0.0);

FilterDiagnostics verify_filter_conditions(const Vector& w, const GenerativeSpec& spec);

double cosine(const Vector& a, const Vector& b);

PatternVsFilterReport pattern_vs_filter_demo(const GenerativeSpec& spec, std::size_t n,
                                             double ridge = 0.0);

// Random non-orthogonal lab instance used by the CLI and tests.
GenerativeSpec make_lab_spec(std::size_t dim, std::size_t n_distractors, double sigma,
                             std::uint64_t seed);

}  // namespace dtd
