#ifndef NETLATTICE_SAMPLER_HPP
#define NETLATTICE_SAMPLER_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "netlattice/core.hpp"

namespace netlattice {

/// Norms of one layer's pre-activation vector z.
struct LayerObservables {
    double r = 0.0;        ///< ||z||
    double r_plus = 0.0;   ///< ||max(z, 0)||
    double r_minus = 0.0;  ///< ||min(z, 0)||
    std::size_t k = 0;     ///< #{i : z_i > 0}; exact zeros count as non-positive

    bool operator==(const LayerObservables&) const = default;
};

LayerObservables compute_layer_observables(std::span<const double> z);

struct Trajectory {
    std::string fingerprint;
    std::size_t sample_index = 0;
    std::vector<LayerObservables> layers;  ///< one entry per layer, length = depth

    bool operator==(const Trajectory&) const = default;
};

/// How z^l = W^l phi(z^{l-1}) + b^l is realised.
///
/// `dense` draws every entry of W^l (row-major) and then b^l, exactly as written.
/// `conditional` uses that, for fresh W^l independent of the past, the
/// pre-activation given phi(z^{l-1}) is N(0, (sw2 |phi|^2 / N + sb2) I) and draws
/// it directly. Both produce the same trajectory law; `conditional` costs O(N)
/// instead of O(N^2) normals per layer.
enum class PropagationMethod { dense, conditional };

std::string_view to_string(PropagationMethod m);
PropagationMethod parse_propagation_method(std::string_view s);

/// All random draws come from boost::random::mt19937_64 seeded with `seed`,
/// in the order: input x (N standard normals), then per layer W^l then b^l
/// (dense) or the N conditional normals (conditional). Normals use the boost
/// ziggurat normal_distribution.
///
/// Throws Error(NumericOverflow) naming the layer if the norm stops being finite.
Trajectory sample_trajectory(const EnsembleConfig& config, std::uint64_t seed,
                             std::size_t sample_index = 0,
                             PropagationMethod method = PropagationMethod::dense);

struct SampleFailure {
    std::size_t sample_index = 0;
    std::string message;
};

struct EnsembleOptions {
    unsigned threads = 1;
    PropagationMethod method = PropagationMethod::dense;
};

struct EnsembleResult {
    std::vector<Trajectory> trajectories;  ///< successful samples, ascending sample index
    std::vector<SampleFailure> failures;
};

/// Runs samples 0..M-1, sample i seeded with derive_sample_seed(master_seed, i).
/// The result is identical for any thread count.
EnsembleResult run_ensemble(const EnsembleConfig& config, const EnsembleOptions& options = {});

/// Streaming variant: `sink` is called once per successful trajectory in
/// ascending sample index. Memory stays bounded by the thread count.
template <typename Sink>
std::vector<SampleFailure> for_each_trajectory(const EnsembleConfig& config, const EnsembleOptions& options,
                                               Sink&& sink);

// --- window statistics ----------------------------------------------------

/// Mean and standard error of a per-sample quantity across the ensemble.
struct MeanEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t n = 0;
};

/// Ensemble statistics over the analysis window. Each sample contributes its
/// window average; standard errors are across samples, so in-sample layer
/// correlation is accounted for.
struct WindowSummary {
    MeanEstimate r;
    MeanEstimate r_plus;
    MeanEstimate r_minus;
    MeanEstimate k;
    MeanEstimate r2_over_n;  ///< |z|^2 / N
};

/// Per-sample window means of (r, r_plus, r_minus, k, r^2/N).
struct SampleWindowMeans {
    std::size_t sample_index = 0;
    double r = 0.0, r_plus = 0.0, r_minus = 0.0, k = 0.0, r2_over_n = 0.0;
};

SampleWindowMeans window_means(const Trajectory& t, std::size_t start, std::size_t len, std::size_t width);
WindowSummary summarize_window(std::span<const SampleWindowMeans> samples);
MeanEstimate mean_estimate(std::span<const double> values);

/// z-score between the first and second half window means of r.
double stationarity_z(std::span<const Trajectory> trajectories, std::size_t start, std::size_t len);

// --- CSV dump: sample,layer,r,r_plus,r_minus,k ------------------------------

void write_trajectories_csv(std::ostream& os, std::span<const Trajectory> trajectories);
/// Rows of one trajectory without the header, for streaming dumps.
void write_trajectory_rows(std::ostream& os, const Trajectory& t);
std::vector<Trajectory> read_trajectories_csv(std::istream& is);

}  // namespace netlattice

#include "netlattice/detail/ensemble_impl.hpp"

#endif
