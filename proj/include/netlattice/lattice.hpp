#ifndef NETLATTICE_LATTICE_HPP
#define NETLATTICE_LATTICE_HPP

#include <boost/random/mersenne_twister.hpp>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "netlattice/core.hpp"
#include "netlattice/spectral.hpp"

namespace netlattice {

enum class ModelTag { linear_radial, relu_radial, linear_quadratic, relu_quadratic };

std::string_view to_string(ModelTag t);
ModelTag parse_model_tag(std::string_view s);
/// Field names per tag: {r}, {r+, r-, k}, {eps}, {eps+, eps-, epsk}.
std::vector<std::string> field_labels(ModelTag t);

struct RingParams {
    double width = 200.0;
    double weight_variance = 0.5;
    double bias_variance = 0.01;
};

RingParams ring_params(const EnsembleConfig& config);

/// Fields on a periodic ring. Site l couples to site l-1, and site -1 is site L_ring-1.
/// For relu_radial the k field is the (continuous) number of components carried
/// by r-, so N - k multiplies the r+ entropy.
class RingState {
public:
    RingState(ModelTag tag, std::size_t sites);

    /// Every site set to the saddle: r*, (r+*, r-*, N/2) or zero fields.
    static RingState uniform_saddle(ModelTag tag, std::size_t sites, const RingParams& p);

    ModelTag tag() const noexcept { return tag_; }
    std::size_t sites() const noexcept { return sites_; }
    std::size_t num_fields() const noexcept { return values_.size(); }

    double& at(std::size_t field, std::ptrdiff_t site);
    double at(std::size_t field, std::ptrdiff_t site) const;
    const std::vector<double>& field(std::size_t f) const { return values_[f]; }

private:
    ModelTag tag_;
    std::size_t sites_;
    std::vector<std::vector<double>> values_;
};

/// DomainViolation naming the first offending site, if any.
void check_domain(const RingState& state, const RingParams& p);

/// Total ring energy (natural log weight e^{-E}), with s = sw2, a = sw2/N, D = 1 - sw2:
///   linear_radial:    1/2 sum [r_l^2/(a r_{l-1}^2 + sb2) - N log(r_l^2/(a r_l^2 + sb2))]
///   relu_radial:      1/2 sum [(r+_l^2 + r-_l^2)/(a r+_{l-1}^2 + sb2) + N log(a r+_l^2 + sb2)
///                              + (N-k_l)(3 log(N-k_l) - 2 log r+_l) + k_l(3 log k_l - 2 log r-_l)]
///   linear_quadratic: (D/sb2) sum [(1 + s^2) e_l^2 - 2 s e_l e_{l-1}]
///   relu_quadratic:   1/2 sum [(1 + s^2/2) e+^2 + e-^2 + 3 ek^2 + ek (e+ - e-) - s e+_{l-1} (e+_l + e-_l)]
/// The relu_quadratic fields are the rescaled ones the ReLU covariance refers to.
double ring_energy(const RingState& state, const RingParams& p);
double ring_energy(const RingState& state, const EnsembleConfig& config);

/// Terms of ring_energy that involve site l (the l and l+1 summands). Needs >= 2 sites.
double local_energy(const RingState& state, const RingParams& p, std::size_t site);

struct MetropolisOptions {
    std::size_t sweeps = 110000;   ///< total, burn-in included
    std::size_t burn_in = 10000;
    std::size_t thin = 10;
    double proposal_width = 0.1;   ///< initial width for every field
    bool adapt = true;             ///< tune widths during burn-in, frozen afterwards
    double target_acceptance = 0.4;
    std::uint64_t seed = 1;
};

/// Single-chain Metropolis sampler with single-site Gaussian proposals.
/// Proposals for constrained fields are folded back into the domain (r > 0,
/// 0 < k < N), which keeps them symmetric.
class MetropolisChain {
public:
    MetropolisChain(const RingParams& params, RingState init, std::uint64_t seed, double proposal_width);

    /// One proposal at (site, field). Returns true if accepted.
    bool update(std::size_t site, std::size_t field);
    /// One update at a uniformly chosen site and field (reversible kernel).
    bool random_update();
    /// Systematic sweep: every site, every field.
    void sweep();

    const RingState& state() const noexcept { return state_; }
    double energy() const noexcept { return energy_; }
    std::vector<double>& widths() noexcept { return widths_; }
    const std::vector<std::size_t>& proposed() const noexcept { return proposed_; }
    const std::vector<std::size_t>& accepted() const noexcept { return accepted_; }
    void reset_counters();

private:
    RingParams params_;
    RingState state_;
    double energy_;
    std::vector<double> widths_;
    std::vector<std::size_t> proposed_, accepted_;
    boost::random::mt19937_64 rng_;
};

struct MetropolisResult {
    ModelTag tag = ModelTag::linear_quadratic;
    std::size_t sites = 0;
    MetropolisOptions options;
    std::vector<std::string> labels;
    std::vector<std::size_t> sample_sweeps;            ///< sweep index of each kept sample
    std::vector<std::vector<std::vector<double>>> samples;  ///< [sample][field][site]
    std::vector<double> energies;                      ///< per kept sample
    std::vector<double> acceptance;                    ///< per field, post burn-in
    std::vector<double> widths;                        ///< frozen widths per field
};

/// DomainViolation if `init` is invalid; NonFiniteEnergy if the energy stops being finite;
/// InvalidParameter unless sweeps > burn_in and thin >= 1.
MetropolisResult metropolis_run(const RingParams& params, const RingState& init, const MetropolisOptions& options);

struct Autocorrelation {
    double tau = 0.5;        ///< integrated autocorrelation time, 1/2 for white noise
    std::size_t window = 0;  ///< automatic window (Sokal, c = 5)
    double ess = 0.0;        ///< n / (2 tau)
};

/// SeriesTooShort below 1000 points.
Autocorrelation integrated_autocorrelation(std::span<const double> series, double c = 5.0);

/// Per-mode variances of one field from the kept samples, with standard errors
/// from the tau-corrected effective sample size of |eps_q - mean|^2.
struct ChainSpectrum {
    SpectrumEstimate spectrum;
    std::vector<double> tau;  ///< per q
    std::vector<double> ess;  ///< per q
};

ChainSpectrum chain_spectrum(const MetropolisResult& result, std::size_t field = 0);

/// Per-field site-averaged series of the kept samples.
std::vector<double> field_mean_series(const MetropolisResult& result, std::size_t field);

// Sample dump "sweep,site,field,value" and JSON run summary (acceptance, widths, tau_int).
void write_samples_csv(std::ostream& os, const MetropolisResult& result);
void write_run_summary(std::ostream& os, const MetropolisResult& result);

}  // namespace netlattice

#endif
