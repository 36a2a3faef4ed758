#pragma once

#include <optional>
#include <string>

#include "dtd/common.hpp"
#include "dtd/network.hpp"
#include "dtd/patterns.hpp"

namespace dtd {

enum class Rule { Saliency, GradTimesInput, Z, W2, WPlus, A, APlus };

const char* rule_name(Rule r);
std::optional<Rule> rule_from_name(const std::string& name);
bool rule_needs_patterns(Rule r);
bool is_deep_taylor(Rule r);

// Root point x~' = x' - t v on the plane w'.x~' = 0, over augmented coordinates.
struct RootPoint {
    Vector x_tilde;
    Vector direction;
    double scale = 0.0;
};

struct RelevanceReport {
    // layer_relevance[0] is the input layer (R^0), layer_relevance[l] = R^l.
    std::vector<Vector> layer_relevance;
    // bias_relevance[l] is relevance assigned to the constant-1 neuron while
    // propagating through layer l+1 (one vector of length fan_out per layer).
    std::vector<Vector> bias_relevance;
    std::size_t target = 0;
    Rule rule = Rule::Z;
    double conservation_residual = 0.0;

    const Vector& input_relevance() const { return layer_relevance.front(); }
};

// Rule-specific search direction over the augmented coordinates. a_row is the
// pattern column and must be present exactly for rules A/APlus. The bias
// coordinate has activation 1, so activation masks always keep it.
Vector search_direction(Rule rule, const Vector& w_row, const Vector& x_aug,
                        const Vector* a_row);

// Throws NumericalError when |w.v| < 1e-12.
RootPoint root_point(const Vector& x_aug, const Vector& w_row, const Vector& v);

// One dense redistribution step. weights_aug is [fan_out x (fan_in+1)] with
// the bias in the last column; x_aug carries the trailing 1. Returns the
// lower-layer relevance plus the per-neuron bias relevance.
struct PropagateResult {
    Vector lower;     // [fan_in]
    Vector bias_rel;  // [fan_out]
};
PropagateResult propagate_dense(const Vector& r_upper, const Vector& x_aug,
                                const Matrix& weights_aug, const Vector& z,
                                Rule rule, const Matrix* patterns_layer,
                                double stabilizer);

RelevanceReport explain(const Mlp& mlp, const Vector& x, std::size_t target, Rule rule,
                        const PatternSet* patterns = nullptr, double stabilizer = 0.0);

// |sum(input) + sum(all bias) - R_target| / max(|R_target|, 1e-12)
double check_conservation(const RelevanceReport& report);

}  // namespace dtd
