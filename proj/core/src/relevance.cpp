#include "dtd/relevance.hpp"

#include <cmath>

namespace dtd {

const char* rule_name(Rule r) {
    switch (r) {
        case Rule::Saliency: return "saliency";
        case Rule::GradTimesInput: return "gradxinput";
        case Rule::Z: return "z";
        case Rule::W2: return "w2";
        case Rule::WPlus: return "w+";
        case Rule::A: return "a";
        case Rule::APlus: return "a+";
    }
    return "?";
}

std::optional<Rule> rule_from_name(const std::string& name) {
    for (Rule r : {Rule::Saliency, Rule::GradTimesInput, Rule::Z, Rule::W2, Rule::WPlus,
                   Rule::A, Rule::APlus})
        if (name == rule_name(r)) return r;
    if (name == "wplus") return Rule::WPlus;
    if (name == "aplus") return Rule::APlus;
    return std::nullopt;
}

bool rule_needs_patterns(Rule r) { return r == Rule::A || r == Rule::APlus; }

bool is_deep_taylor(Rule r) {
    return r == Rule::Z || r == Rule::W2 || r == Rule::WPlus || r == Rule::A ||
           r == Rule::APlus;
}

Vector search_direction(Rule rule, const Vector& w_row, const Vector& x_aug,
                        const Vector* a_row) {
    if (w_row.size() != x_aug.size())
        throw DimensionError("search_direction: length mismatch");
    if (rule_needs_patterns(rule) && a_row == nullptr)
        throw DimensionError(std::string(rule_name(rule)) + " rule requires a pattern vector");
    switch (rule) {
        case Rule::Z:
            return x_aug;
        case Rule::W2:
            return w_row;
        case Rule::WPlus: {
            Vector v = w_row;
            for (std::size_t i = 0; i < v.size(); ++i)
                if (x_aug[i] == 0.0) v[i] = 0.0;
            return v;
        }
        case Rule::A:
            return *a_row;
        case Rule::APlus: {
            Vector v = *a_row;
            if (v.size() != x_aug.size())
                throw DimensionError("pattern length mismatch");
            for (std::size_t i = 0; i < v.size(); ++i)
                if (x_aug[i] == 0.0) v[i] = 0.0;
            return v;
        }
        default:
            throw DimensionError("search_direction is defined for deep Taylor rules only");
    }
}

RootPoint root_point(const Vector& x_aug, const Vector& w_row, const Vector& v) {
    const double wv = dot(w_row, v);
    if (std::abs(wv) < 1e-12)
        throw NumericalError("degenerate search direction: w.v ~ 0");
    RootPoint rp;
    rp.direction = v;
    rp.scale = dot(w_row, x_aug) / wv;
    rp.x_tilde.resize(x_aug.size());
    for (std::size_t i = 0; i < x_aug.size(); ++i)
        rp.x_tilde[i] = x_aug[i] - rp.scale * v[i];
    return rp;
}

PropagateResult propagate_dense(const Vector& r_upper, const Vector& x_aug,
                                const Matrix& weights_aug, const Vector& z,
                                Rule rule, const Matrix* patterns_layer,
                                double stabilizer) {
    const std::size_t fan_out = weights_aug.rows();
    const std::size_t aug = weights_aug.cols();  // fan_in + 1
    if (r_upper.size() != fan_out || z.size() != fan_out || x_aug.size() != aug)
        throw DimensionError("propagate_dense: inconsistent dimensions");
    if (rule_needs_patterns(rule)) {
        if (patterns_layer == nullptr)
            throw DimensionError("propagate_dense: rule requires patterns");
        if (patterns_layer->rows() != aug || patterns_layer->cols() != fan_out)
            throw DimensionError("propagate_dense: pattern matrix shape mismatch");
    }

    PropagateResult res;
    res.lower.assign(aug - 1, 0.0);
    res.bias_rel.assign(fan_out, 0.0);

    Vector w_row(aug), a_col;
    for (std::size_t j = 0; j < fan_out; ++j) {
        const double rj = r_upper[j];
        if (rj == 0.0) continue;
        const double* w = weights_aug.row_ptr(j);
        w_row.assign(w, w + aug);
        const Vector* a_ptr = nullptr;
        if (rule_needs_patterns(rule)) {
            a_col.resize(aug);
            for (std::size_t i = 0; i < aug; ++i) a_col[i] = (*patterns_layer)(i, j);
            a_ptr = &a_col;
        }
        const Vector v = search_direction(rule, w_row, x_aug, a_ptr);

        double denom = dot(w_row, v);
        if (stabilizer > 0.0) denom += (denom >= 0.0 ? stabilizer : -stabilizer);
        if (std::abs(denom) < 1e-12 || !std::isfinite(denom))
            throw NumericalError(std::string("degenerate denominator in ") + rule_name(rule) +
                                 " rule at neuron " + std::to_string(j));
        const double scale = rj / denom;
        for (std::size_t i = 0; i + 1 < aug; ++i) res.lower[i] += scale * w_row[i] * v[i];
        res.bias_rel[j] = scale * w_row[aug - 1] * v[aug - 1];
    }
    return res;
}

namespace {

Vector augmented(const Vector& x) {
    Vector out = x;
    out.push_back(1.0);
    return out;
}

Vector elementwise_product(const Vector& a, const Vector& b) {
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

}  // namespace

RelevanceReport explain(const Mlp& mlp, const Vector& x, std::size_t target, Rule rule,
                        const PatternSet* patterns, double stabilizer) {
    if (target >= mlp.output_dim()) throw DimensionError("explain: target out of range");
    if (rule_needs_patterns(rule)) {
        if (patterns == nullptr)
            throw DimensionError("explain: rule requires a PatternSet");
        if (patterns->layers.size() != mlp.layers.size())
            throw DimensionError("explain: PatternSet does not match the network depth");
    }

    RelevanceReport report;
    report.target = target;
    report.rule = rule;
    const ForwardTrace trace = forward_trace(mlp, x);

    if (rule == Rule::Saliency || rule == Rule::GradTimesInput) {
        Vector grad = input_gradient(mlp, trace, target);
        report.layer_relevance.push_back(
            rule == Rule::Saliency ? grad : elementwise_product(grad, x));
        return report;
    }

    const std::size_t n_layers = mlp.layers.size();
    std::vector<Vector> relevance(n_layers + 1);
    report.bias_relevance.resize(n_layers);

    relevance[n_layers].assign(mlp.output_dim(), 0.0);
    relevance[n_layers][target] = trace.layers.back().pre_activation[target];

    for (std::size_t l = n_layers; l-- > 0;) {
        const Vector x_aug =
            augmented(l == 0 ? trace.input : trace.layers[l - 1].activation);
        const Matrix w_aug = augment_bias_as_input(mlp.layers[l]);
        const Matrix* pat =
            rule_needs_patterns(rule) ? &patterns->layers[l] : nullptr;
        PropagateResult step =
            propagate_dense(relevance[l + 1], x_aug, w_aug,
                            trace.layers[l].pre_activation, rule, pat, stabilizer);
        relevance[l] = std::move(step.lower);
        report.bias_relevance[l] = std::move(step.bias_rel);
    }
    report.layer_relevance = std::move(relevance);
    report.conservation_residual = check_conservation(report);
    return report;
}

double check_conservation(const RelevanceReport& report) {
    if (report.layer_relevance.empty()) return 0.0;
    double total = 0.0;
    for (double v : report.input_relevance()) total += v;
    for (const auto& layer_bias : report.bias_relevance)
        for (double v : layer_bias) total += v;
    const Vector& top = report.layer_relevance.back();
    double r_out = 0.0;
    for (double v : top) r_out += v;
    return std::abs(total - r_out) / std::max(std::abs(r_out), 1e-12);
}

}  // namespace dtd
