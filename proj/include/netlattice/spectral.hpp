#ifndef NETLATTICE_SPECTRAL_HPP
#define NETLATTICE_SPECTRAL_HPP

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "netlattice/core.hpp"
#include "netlattice/sampler.hpp"
#include "netlattice/theory.hpp"

namespace netlattice {

using Complex = std::complex<double>;

/// Fourier convention used everywhere in the analysis:
///   eps_q = (1/L) sum_l x_l e^{+i q l},  x_l = sum_q eps_q e^{-i q l},  q = 2 pi n / L.
/// Mode amplitudes are intensive in L and Parseval reads sum_q |eps_q|^2 = (1/L) sum_l x_l^2.
/// Backed by FFTW; BadLength unless L is a power of two.
std::vector<Complex> fft_modes(std::span<const double> series);
std::vector<double> inverse_fft_modes(std::span<const Complex> modes);

/// Fluctuation fields of one sample over the analysis window.
struct FluctuationSeries {
    std::vector<std::string> labels;          ///< {"eps"} or {"eps+", "eps-", "epsk"}
    std::vector<std::vector<double>> fields;  ///< fields[f][l], l over the window
};

/// linear: eps^l = r^l - r*.
/// relu:   eps+~ = s (r+^l - r+*), eps-~ = s (r-^l - r-*) with s = sqrt(2 (1 - sw2/2) / sb2),
///         epsk~ = ((N - k^l) - N/2) / sqrt(N).
/// The k field counts the components carried by r- (the non-positive ones), which
/// is the counting variable of the orthant energy the covariance model expands.
/// MissingReference if `reference` lacks the saddle for the activation.
FluctuationSeries fluctuation_series(const Trajectory& traj, const TheoryPrediction& reference,
                                     const EnsembleConfig& config);

/// Fourier modes of every field of one sample.
struct ModeSet {
    std::vector<double> q;
    std::vector<std::vector<Complex>> fields;  ///< fields[f][n]
};

ModeSet mode_set(const FluctuationSeries& series);

/// Per-q scalar spectrum of field `field` across samples.
struct SpectrumEstimate {
    std::string fingerprint;
    std::string label;
    std::vector<double> q;
    std::vector<double> variance;      ///< sum |eps_q - mean|^2 / (M - 1)
    std::vector<double> stderr_;       ///< variance * sqrt(2 / (M - 1))
    std::vector<double> kurtosis;      ///< unbiased excess kurtosis of Re eps_q (NaN if M < 4)
    std::vector<Complex> mean;         ///< sample mean of eps_q
    std::vector<std::size_t> count;
    std::vector<bool> excluded;        ///< q = 0: retained, but not compared against theory
};

/// Per-q 3x3 Hermitian cross-spectrum.
struct CrossSpectrumEstimate {
    std::string fingerprint;
    std::vector<std::string> labels;
    std::vector<double> q;
    std::vector<HermitianMatrix3> covariance;  ///< sum (a - mean_a)(b - mean_b)^* / (M - 1)
    /// Standard error of each entry, sqrt((C_aa C_bb + |C_ab|^2) / (M - 1)); on the
    /// diagonal this equals C_aa sqrt(2 / (M - 1)).
    std::vector<Eigen::Matrix3d> stderr_;
    std::vector<std::size_t> count;
    std::vector<bool> excluded;
};

/// Two-pass moments over the samples in the order given. The ensemble hands
/// samples over in ascending index, so the result does not depend on threading.
SpectrumEstimate estimate_spectrum(std::span<const ModeSet> samples, std::size_t field = 0);
CrossSpectrumEstimate estimate_cross_spectrum(std::span<const ModeSet> samples);

/// Fraction of non-excluded modes with q in (0, pi] and |excess kurtosis| <= threshold.
double gaussian_mode_fraction(const SpectrumEstimate& s, double threshold);

struct LorentzianFit {
    double a = 0.0;   ///< intercept of 1/Var
    double b = 0.0;   ///< slope in q^2
    double xi = 0.0;  ///< sqrt(b / a)
    double xi_stderr = 0.0;  ///< propagated from the fit covariance (0 without errors)
    std::size_t modes = 0;
    double q_max = 0.0;
};

/// Weighted least squares of 1/Var(eps_q) = a + b q^2 over 0 < q <= q_max, q < pi,
/// weighting each mode by the inverse variance of 1/Var propagated from its
/// standard error. InsufficientModes below 8 modes; NonPositiveFit if a or b <= 0.
LorentzianFit fit_lorentzian(const SpectrumEstimate& spectrum, double q_max = 0.5);

// Spectrum CSV: q,var,stderr,kurtosis,n  and  q,re_pp,im_pp,...  (17 significant digits)
void write_spectrum_csv(std::ostream& os, const SpectrumEstimate& s);
void write_cross_spectrum_csv(std::ostream& os, const CrossSpectrumEstimate& s);
SpectrumEstimate read_spectrum_csv(std::istream& is);

}  // namespace netlattice

#endif
