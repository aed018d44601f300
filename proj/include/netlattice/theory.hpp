#ifndef NETLATTICE_THEORY_HPP
#define NETLATTICE_THEORY_HPP

#include <Eigen/Dense>
#include <complex>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "netlattice/core.hpp"

namespace netlattice {

/// 3x3 complex matrix over the ReLU fluctuation fields, ordered (eps+, eps-, eps_k).
using HermitianMatrix3 = Eigen::Matrix3cd;

bool is_hermitian(const HermitianMatrix3& m, double tol = 1e-12);
/// Leading principal minors of the Hermitian part all positive.
bool is_positive_definite(const HermitianMatrix3& m);

// Normalisation of the Fourier-mode variances under the intensive
// eps_q = (1/L_w) sum_l eps_l e^{iql} convention. A Gaussian ring energy
// (1/2) sum_l eps.P eps gives E[eps_q eps_q^dagger] = P(q)^{-1} / L_w, i.e. both
// constants are exactly 1. Pinned against direct Metropolis sampling of the
// quadratic energies in tests/test_lattice.cpp and the acceptance suite.
inline constexpr double kLinearModeNormalization = 1.0;  // kappa  = 1/1
inline constexpr double kReluModeNormalization = 1.0;    // kappa' = 1/1

/// r* = sqrt(N sb2 / (1 - sw2)); Supercritical for sw2 >= 1.
double linear_saddle(double width, double weight_variance, double bias_variance);

struct ReluSaddle {
    double r_plus = 0.0;
    double r_minus = 0.0;
    double k = 0.0;
};

/// r+* = r-* = sqrt(N sb2 / (2 (1 - sw2/2))), k* = N/2; Supercritical for sw2 >= 2.
ReluSaddle relu_saddle(double width, double weight_variance, double bias_variance);

inline constexpr double kQuadratureGuard = 1e-10;
inline constexpr int kMaxQuadratureOrder = 1024;

/// Fixed point of q <- sw2 E[phi(sqrt(q) Z)^2] + sb2 (factorial mean-field map),
/// iterated until the step is at most tol * q.
/// Linear and ReLU use the closed-form expectations (q and q/2); tanh uses
/// Gauss-Hermite quadrature starting at `quadrature_order` nodes and doubling
/// the order until the fixed point changes by less than kQuadratureGuard.
double meanfield_fixed_point(Activation activation, double weight_variance, double bias_variance,
                             double tol = 1e-15, int quadrature_order = 31, int max_iterations = 10000);

/// E[phi(sqrt(q) Z)^2] for Z ~ N(0,1).
double meanfield_second_moment(Activation activation, double q, int quadrature_order = 31);

/// c(q) = (1 + sw2^2) - 2 sw2 cos q.
double linear_mode_coefficient(double q, double weight_variance);

/// Var(eps_q) = kappa sb2 / (2 L_w (1 - sw2) c(q)). ZeroMode for q == 0 (mod 2 pi).
double linear_mode_variance(double q, double weight_variance, double bias_variance, std::size_t window_len,
                            double kappa = kLinearModeNormalization);

HermitianMatrix3 relu_inverse_covariance(double q, double weight_variance);

/// kappa' / L_w * inverse(relu_inverse_covariance(q)), for the rescaled fields.
HermitianMatrix3 relu_covariance(double q, double weight_variance, std::size_t window_len,
                                 double kappa = kReluModeNormalization);

/// xi = sw / (1 - sw2). Returns 0 at sw2 == 0; Supercritical for sw2 >= 1.
double correlation_length(double weight_variance);

enum class FieldModel { linear, relu };

struct EftTerm {
    std::string term;
    double coefficient = 0.0;
};

/// Long-wavelength energy coefficients.
///
/// linear: U = int dx [mass eps^2 + gradient (d eps)^2], mass = (1-sw2)^3/sb2,
/// gradient = (1-sw2) sw2 / sb2.
///
/// relu: U = (1/2) int dx sum_i c_i T_i on the rescaled fields, terms in the
/// order eps+^2, eps-^2, epsk^2, eps+ eps-, epsk (eps+ - eps-), (d eps+)^2,
/// (d eps+) eps-. These are the coefficients obtained by rewriting the lattice
/// quadratic energy with eps+^{l-1} = eps+^l - (d eps+)^l, so they agree with the
/// q -> 0 expansion of relu_inverse_covariance.
std::vector<EftTerm> eft_coefficients(FieldModel model, double weight_variance, double bias_variance);

/// Wavevector grid q_n = 2 pi n / L_w, n = 0..L_w-1.
std::vector<double> wavevector_grid(std::size_t window_len);

struct TheoryPrediction {
    Activation model = Activation::linear;
    std::optional<double> r_star;            ///< linear
    std::optional<ReluSaddle> relu;          ///< relu
    std::vector<double> q;                   ///< analysis grid; q = 0 left at 0
    std::vector<double> linear_variance;     ///< per q (0 at q = 0)
    std::vector<HermitianMatrix3> relu_covariance;  ///< per q (zero at q = 0)
    double xi = 0.0;                         ///< linear only
};

/// Saddle and per-q predictions for the configured activation; Supercritical
/// outside the regime. For tanh only the mean-field norm sqrt(N q*) is filled in.
TheoryPrediction predict(const EnsembleConfig& config);

// CSV exports: "q,prediction" (linear) and "q,re_pp,im_pp,re_pm,..." (relu; p, m, k = eps+, eps-, eps_k).
// The q = 0 row is omitted.
void write_linear_theory_csv(std::ostream& os, const TheoryPrediction& p);
void write_relu_theory_csv(std::ostream& os, const TheoryPrediction& p);

/// Column names for the nine complex entries, e.g. re_pp, im_pp, re_pm, ...
std::vector<std::string> relu_entry_columns();

}  // namespace netlattice

#endif
