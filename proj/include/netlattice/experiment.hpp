#ifndef NETLATTICE_EXPERIMENT_HPP
#define NETLATTICE_EXPERIMENT_HPP

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "netlattice/core.hpp"
#include "netlattice/report.hpp"
#include "netlattice/sampler.hpp"

namespace netlattice {

inline constexpr const char* kToolVersion = "1.0.0";

enum class ExperimentKind {
    fig3_linear_saddle,
    fig4_linear_spectrum,
    fig5_relu_saddle,
    fig6_relu_cross_spectrum,
    fig1_tanh_meanfield,
    mcmc_oracle,
    xi_fit,
};

std::string_view to_string(ExperimentKind k);
ExperimentKind parse_experiment_kind(std::string_view s);

struct McmcSettings {
    std::size_t sites = 64;
    std::size_t sweeps = 410000;
    std::size_t burn_in = 10000;
    std::size_t thin = 10;
    double proposal_width = 0.5;
    double relu_calibration = 1.0;  ///< weight_variance of the relu_quadratic normalisation chain
};

/// One experiment = one output directory. The sweep runs over weight_variance.
///
/// Plan files use the config format plus the keys
///   experiment, sweep (comma list), out, threads, method, dump_trajectories,
///   fit.q_max, mcmc.{sites,sweeps,burn_in,thin,proposal_width,relu_calibration},
///   tol.<name>.
/// `experiment` selects the defaults, so it is applied before every other key.
struct ExperimentPlan {
    ExperimentKind kind = ExperimentKind::fig3_linear_saddle;
    ConfigCandidate base;
    std::vector<double> sweep;
    std::string out_dir = "out";
    std::map<std::string, double> tol;
    unsigned threads = 1;
    PropagationMethod method = PropagationMethod::dense;
    bool dump_trajectories = false;
    double fit_q_max = 0.5;
    McmcSettings mcmc;

    /// InvalidParameter if the plan declares no such tolerance.
    double tolerance(const std::string& name) const;
};

/// Defaults for each kind: activation, sweep, and the tolerances of the
/// corresponding acceptance criterion.
ExperimentPlan default_plan(ExperimentKind kind);

ExperimentPlan parse_plan_text(std::string_view text);
ExperimentPlan load_plan_file(const std::string& path);
void set_plan_value(ExperimentPlan& plan, std::string_view key, std::string_view value);
std::string to_plan_text(const ExperimentPlan& plan);

/// ConfigError with every problem: invalid configs at any sweep point, sweep
/// values outside the theory regime of the experiment, empty sweep or output path.
void validate_plan(const ExperimentPlan& plan);

/// Validated config of one sweep point.
EnsembleConfig point_config(const ExperimentPlan& plan, double weight_variance);

struct PointFailure {
    std::string point;
    std::string code;
    std::string message;
};

struct ExperimentOutcome {
    ComparisonReport report;
    std::vector<std::string> artifacts;  ///< paths relative to the output directory
    std::vector<PointFailure> failures;
    std::size_t failed_samples = 0;
    double wall_seconds = 0.0;

    /// 0 all pass, 1 comparison failures, 2 execution errors.
    int exit_code() const;
};

/// Validates, runs every sweep point, and writes into plan.out_dir:
/// per-point raw CSVs, theory CSVs, report.json, report.csv, SVG plots and
/// manifest.json. Errors at one sweep point are recorded with the point and
/// do not stop the others.
ExperimentOutcome run_experiment(const ExperimentPlan& plan);

}  // namespace netlattice

#endif
