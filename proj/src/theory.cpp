#include "netlattice/theory.hpp"

#include <gsl/gsl_integration.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <ostream>

#include "netlattice/format.hpp"

namespace netlattice {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_linear_regime(double sw2) {
    if (!(sw2 < 1.0))
        throw Error(ErrorCode::Supercritical,
                    "linear theory needs weight_variance < 1 (got " + format_double(sw2) + ")");
}

void require_relu_regime(double sw2) {
    if (!(sw2 < 2.0))
        throw Error(ErrorCode::Supercritical,
                    "relu theory needs weight_variance < 2 (got " + format_double(sw2) + ")");
}

void require_positive_bias(double sb2) {
    if (!(sb2 > 0.0)) throw Error(ErrorCode::NonPositiveBiasVariance, "bias_variance must be > 0");
}

// Probabilists' Gauss-Hermite rule, weights normalised to sum to one.
struct HermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

HermiteRule hermite_rule(int order) {
    if (order < 1) throw Error(ErrorCode::InvalidParameter, "quadrature order must be >= 1");
    std::unique_ptr<gsl_integration_fixed_workspace, decltype(&gsl_integration_fixed_free)> ws(
        gsl_integration_fixed_alloc(gsl_integration_fixed_hermite, static_cast<std::size_t>(order), 0.0, 0.5, 0.0,
                                    0.0),
        &gsl_integration_fixed_free);
    if (!ws) throw Error(ErrorCode::InvalidParameter, "GSL could not build the Hermite rule");
    const double* x = gsl_integration_fixed_nodes(ws.get());
    const double* w = gsl_integration_fixed_weights(ws.get());
    HermiteRule rule;
    rule.nodes.assign(x, x + order);
    rule.weights.assign(w, w + order);
    double total = 0.0;
    for (double v : rule.weights) total += v;
    for (double& v : rule.weights) v /= total;
    return rule;
}

double second_moment(Activation a, double q, const HermiteRule* rule) {
    switch (a) {
        case Activation::linear: return q;
        case Activation::relu: return 0.5 * q;
        case Activation::tanh: {
            const double s = std::sqrt(q);
            double acc = 0.0;
            for (std::size_t i = 0; i < rule->nodes.size(); ++i) {
                const double t = std::tanh(s * rule->nodes[i]);
                acc += rule->weights[i] * t * t;
            }
            return acc;
        }
    }
    return q;
}

}  // namespace

bool is_hermitian(const HermitianMatrix3& m, double tol) {
    return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

bool is_positive_definite(const HermitianMatrix3& m) {
    const HermitianMatrix3 h = 0.5 * (m + m.adjoint());
    const double m1 = h(0, 0).real();
    const double m2 = (h(0, 0) * h(1, 1) - h(0, 1) * h(1, 0)).real();
    const double m3 = h.determinant().real();
    return m1 > 0.0 && m2 > 0.0 && m3 > 0.0;
}

double linear_saddle(double width, double weight_variance, double bias_variance) {
    require_linear_regime(weight_variance);
    require_positive_bias(bias_variance);
    return std::sqrt(width * bias_variance / (1.0 - weight_variance));
}

ReluSaddle relu_saddle(double width, double weight_variance, double bias_variance) {
    require_relu_regime(weight_variance);
    require_positive_bias(bias_variance);
    const double r = std::sqrt(width * bias_variance / (2.0 * (1.0 - 0.5 * weight_variance)));
    return {r, r, 0.5 * width};
}

double meanfield_second_moment(Activation activation, double q, int quadrature_order) {
    if (activation == Activation::tanh) {
        auto rule = hermite_rule(quadrature_order);
        return second_moment(activation, q, &rule);
    }
    return second_moment(activation, q, nullptr);
}

namespace {

double iterate_map(Activation activation, double weight_variance, double bias_variance, double tol,
                   const HermiteRule* rule, int max_iterations) {
    double q = weight_variance + bias_variance;
    for (int it = 0; it < max_iterations; ++it) {
        const double next = weight_variance * second_moment(activation, q, rule) + bias_variance;
        const double step = std::abs(next - q);
        q = next;
        if (step <= tol * q) return q;
    }
    throw Error(ErrorCode::NoConvergence,
                "mean-field map did not converge in " + std::to_string(max_iterations) + " iterations");
}

}  // namespace

double meanfield_fixed_point(Activation activation, double weight_variance, double bias_variance, double tol,
                             int quadrature_order, int max_iterations) {
    if (activation == Activation::linear) require_linear_regime(weight_variance);
    if (activation == Activation::relu) require_relu_regime(weight_variance);
    if (!(bias_variance >= 0.0)) throw Error(ErrorCode::InvalidParameter, "bias_variance must be >= 0");
    if (activation != Activation::tanh)
        return iterate_map(activation, weight_variance, bias_variance, tol, nullptr, max_iterations);

    // Double the rule until the fixed point moves by less than kQuadratureGuard.
    int order = quadrature_order;
    auto rule = hermite_rule(order);
    double q = iterate_map(activation, weight_variance, bias_variance, tol, &rule, max_iterations);
    while (order < kMaxQuadratureOrder) {
        order *= 2;
        rule = hermite_rule(order);
        const double finer = iterate_map(activation, weight_variance, bias_variance, tol, &rule, max_iterations);
        const bool settled = std::abs(finer - q) < kQuadratureGuard;
        q = finer;
        if (settled) return q;
    }
    throw Error(ErrorCode::NoConvergence, "Gauss-Hermite quadrature did not settle by order " + std::to_string(order));
}

double linear_mode_coefficient(double q, double weight_variance) {
    require_linear_regime(weight_variance);
    return (1.0 + weight_variance * weight_variance) - 2.0 * weight_variance * std::cos(q);
}

double linear_mode_variance(double q, double weight_variance, double bias_variance, std::size_t window_len,
                            double kappa) {
    require_linear_regime(weight_variance);
    require_positive_bias(bias_variance);
    if (std::abs(std::remainder(q, kTwoPi)) < 1e-12)
        throw Error(ErrorCode::ZeroMode, "q = 0 carries the subtracted mean and has no prediction");
    const double gap = 1.0 - weight_variance;
    return kappa * bias_variance /
           (2.0 * static_cast<double>(window_len) * gap * linear_mode_coefficient(q, weight_variance));
}

HermitianMatrix3 relu_inverse_covariance(double q, double weight_variance) {
    require_relu_regime(weight_variance);
    using C = std::complex<double>;
    const double s = weight_variance;
    const C phase = std::polar(1.0, q);  // e^{iq}
    HermitianMatrix3 m;
    m << C(1.0 + 0.5 * s * s - s * std::cos(q)), -0.5 * s * std::conj(phase), C(0.5),
         -0.5 * s * phase, C(1.0), C(-0.5),
         C(0.5), C(-0.5), C(3.0);
    return m;
}

HermitianMatrix3 relu_covariance(double q, double weight_variance, std::size_t window_len, double kappa) {
    const HermitianMatrix3 inv = relu_inverse_covariance(q, weight_variance);
    Eigen::FullPivLU<HermitianMatrix3> lu(inv);
    if (!lu.isInvertible())
        throw Error(ErrorCode::SingularMatrix, "relu inverse covariance is singular at q = " + format_double(q));
    HermitianMatrix3 cov = lu.inverse() * (kappa / static_cast<double>(window_len));
    return 0.5 * (cov + cov.adjoint());
}

double correlation_length(double weight_variance) {
    require_linear_regime(weight_variance);
    if (weight_variance < 0.0) throw Error(ErrorCode::InvalidParameter, "weight_variance must be >= 0");
    return std::sqrt(weight_variance) / (1.0 - weight_variance);
}

std::vector<EftTerm> eft_coefficients(FieldModel model, double weight_variance, double bias_variance) {
    const double s = weight_variance;
    if (model == FieldModel::linear) {
        require_linear_regime(s);
        require_positive_bias(bias_variance);
        const double gap = 1.0 - s;
        return {{"eps^2", gap * gap * gap / bias_variance}, {"(d eps)^2", gap * s / bias_variance}};
    }
    require_relu_regime(s);
    return {
        {"eps+^2", 1.0 - s + 0.5 * s * s},
        {"eps-^2", 1.0},
        {"epsk^2", 3.0},
        {"eps+ eps-", -s},
        {"epsk (eps+ - eps-)", 1.0},
        {"(d eps+)^2", 0.5 * s},
        {"(d eps+) eps-", s},
    };
}

std::vector<double> wavevector_grid(std::size_t window_len) {
    std::vector<double> q(window_len);
    for (std::size_t n = 0; n < window_len; ++n) q[n] = kTwoPi * static_cast<double>(n) / static_cast<double>(window_len);
    return q;
}

TheoryPrediction predict(const EnsembleConfig& config) {
    TheoryPrediction p;
    p.model = config.activation();
    const double n = static_cast<double>(config.width());
    const double s = config.weight_variance();
    const double b = config.bias_variance();
    const std::size_t lw = config.window_len();
    p.q = wavevector_grid(lw);

    switch (config.activation()) {
        case Activation::linear:
            p.r_star = linear_saddle(n, s, b);
            p.xi = correlation_length(s);
            p.linear_variance.assign(lw, 0.0);
            for (std::size_t i = 1; i < lw; ++i) p.linear_variance[i] = linear_mode_variance(p.q[i], s, b, lw);
            break;
        case Activation::relu:
            p.relu = relu_saddle(n, s, b);
            p.relu_covariance.assign(lw, HermitianMatrix3::Zero());
            for (std::size_t i = 1; i < lw; ++i) p.relu_covariance[i] = relu_covariance(p.q[i], s, lw);
            break;
        case Activation::tanh:
            p.r_star = std::sqrt(n * meanfield_fixed_point(Activation::tanh, s, b));
            break;
    }
    return p;
}

std::vector<std::string> relu_entry_columns() {
    static const char* labels[] = {"p", "m", "k"};
    std::vector<std::string> cols;
    for (int a = 0; a < 3; ++a) {
        for (int c = 0; c < 3; ++c) {
            cols.push_back(std::string("re_") + labels[a] + labels[c]);
            cols.push_back(std::string("im_") + labels[a] + labels[c]);
        }
    }
    return cols;
}

void write_linear_theory_csv(std::ostream& os, const TheoryPrediction& p) {
    os << "q,prediction\n";
    for (std::size_t i = 1; i < p.linear_variance.size(); ++i)
        os << format_double(p.q[i]) << ',' << format_double(p.linear_variance[i]) << '\n';
}

void write_relu_theory_csv(std::ostream& os, const TheoryPrediction& p) {
    os << 'q';
    for (const auto& c : relu_entry_columns()) os << ',' << c;
    os << '\n';
    for (std::size_t i = 1; i < p.relu_covariance.size(); ++i) {
        os << format_double(p.q[i]);
        const auto& m = p.relu_covariance[i];
        for (int a = 0; a < 3; ++a)
            for (int c = 0; c < 3; ++c) os << ',' << format_double(m(a, c).real()) << ',' << format_double(m(a, c).imag());
        os << '\n';
    }
}

}  // namespace netlattice
