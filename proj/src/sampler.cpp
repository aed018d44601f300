#include "netlattice/sampler.hpp"

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "netlattice/format.hpp"

namespace netlattice {

std::string_view to_string(PropagationMethod m) {
    return m == PropagationMethod::dense ? "dense" : "conditional";
}

PropagationMethod parse_propagation_method(std::string_view s) {
    if (s == "dense") return PropagationMethod::dense;
    if (s == "conditional") return PropagationMethod::conditional;
    throw Error(ErrorCode::ParseError, "unknown propagation method '" + std::string(s) + "'");
}

LayerObservables compute_layer_observables(std::span<const double> z) {
    double pos = 0.0, neg = 0.0;
    std::size_t k = 0;
    for (double v : z) {
        if (v > 0.0) {
            pos += v * v;
            ++k;
        } else {
            neg += v * v;
        }
    }
    return {std::sqrt(pos + neg), std::sqrt(pos), std::sqrt(neg), k};
}

namespace {

void apply_activation(Activation a, std::span<const double> z, std::span<double> out) {
    switch (a) {
        case Activation::linear:
            std::copy(z.begin(), z.end(), out.begin());
            break;
        case Activation::relu:
            for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] > 0.0 ? z[i] : 0.0;
            break;
        case Activation::tanh:
            for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::tanh(z[i]);
            break;
    }
}

}  // namespace

Trajectory sample_trajectory(const EnsembleConfig& config, std::uint64_t seed, std::size_t sample_index,
                             PropagationMethod method) {
    const std::size_t n = config.width();
    const double weight_scale = std::sqrt(config.weight_variance() / static_cast<double>(n));
    const double bias_scale = std::sqrt(config.bias_variance());

    boost::random::mt19937_64 rng(seed);
    boost::random::normal_distribution<double> normal(0.0, 1.0);

    Trajectory traj;
    traj.fingerprint = config.fingerprint();
    traj.sample_index = sample_index;
    traj.layers.reserve(config.depth());

    // z^{-1} is the input; the first layer applies phi to it like any other.
    std::vector<double> z(n), phi(n);
    for (auto& v : z) v = normal(rng);

    for (std::size_t layer = 0; layer < config.depth(); ++layer) {
        apply_activation(config.activation(), z, phi);
        if (method == PropagationMethod::dense) {
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += normal(rng) * phi[j];
                z[i] = weight_scale * acc;
            }
            for (std::size_t i = 0; i < n; ++i) z[i] += bias_scale * normal(rng);
        } else {
            double phi2 = 0.0;
            for (double v : phi) phi2 += v * v;
            const double sd = std::sqrt(config.weight_variance() * phi2 / static_cast<double>(n) +
                                        config.bias_variance());
            for (std::size_t i = 0; i < n; ++i) z[i] = sd * normal(rng);
        }
        auto obs = compute_layer_observables(z);
        if (!std::isfinite(obs.r))
            throw Error(ErrorCode::NumericOverflow,
                        "pre-activation norm not finite at layer " + std::to_string(layer) + " (sample " +
                            std::to_string(sample_index) + ")");
        traj.layers.push_back(obs);
    }
    return traj;
}

EnsembleResult run_ensemble(const EnsembleConfig& config, const EnsembleOptions& options) {
    EnsembleResult result;
    result.trajectories.reserve(config.num_samples());
    result.failures =
        for_each_trajectory(config, options, [&](Trajectory&& t) { result.trajectories.push_back(std::move(t)); });
    return result;
}

SampleWindowMeans window_means(const Trajectory& t, std::size_t start, std::size_t len, std::size_t width) {
    if (len == 0 || start + len > t.layers.size())
        throw Error(ErrorCode::WindowOutOfRange, "window exceeds trajectory length");
    SampleWindowMeans m;
    m.sample_index = t.sample_index;
    for (std::size_t l = start; l < start + len; ++l) {
        const auto& o = t.layers[l];
        m.r += o.r;
        m.r_plus += o.r_plus;
        m.r_minus += o.r_minus;
        m.k += static_cast<double>(o.k);
        m.r2_over_n += o.r * o.r / static_cast<double>(width);
    }
    const double inv = 1.0 / static_cast<double>(len);
    m.r *= inv;
    m.r_plus *= inv;
    m.r_minus *= inv;
    m.k *= inv;
    m.r2_over_n *= inv;
    return m;
}

MeanEstimate mean_estimate(std::span<const double> values) {
    MeanEstimate e;
    e.n = values.size();
    if (values.empty()) return e;
    double sum = 0.0;
    for (double v : values) sum += v;
    e.mean = sum / static_cast<double>(e.n);
    if (e.n > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - e.mean) * (v - e.mean);
        e.stderr_ = std::sqrt(ss / static_cast<double>(e.n - 1) / static_cast<double>(e.n));
    }
    return e;
}

WindowSummary summarize_window(std::span<const SampleWindowMeans> samples) {
    auto column = [&](auto member) {
        std::vector<double> v;
        v.reserve(samples.size());
        for (const auto& s : samples) v.push_back(s.*member);
        return mean_estimate(v);
    };
    WindowSummary w;
    w.r = column(&SampleWindowMeans::r);
    w.r_plus = column(&SampleWindowMeans::r_plus);
    w.r_minus = column(&SampleWindowMeans::r_minus);
    w.k = column(&SampleWindowMeans::k);
    w.r2_over_n = column(&SampleWindowMeans::r2_over_n);
    return w;
}

double stationarity_z(std::span<const Trajectory> trajectories, std::size_t start, std::size_t len) {
    const std::size_t half = len / 2;
    std::vector<double> first, second;
    for (const auto& t : trajectories) {
        first.push_back(window_means(t, start, half, 1).r);
        second.push_back(window_means(t, start + half, len - half, 1).r);
    }
    auto a = mean_estimate(first);
    auto b = mean_estimate(second);
    const double se = std::hypot(a.stderr_, b.stderr_);
    return se > 0.0 ? (b.mean - a.mean) / se : 0.0;
}

void write_trajectory_rows(std::ostream& os, const Trajectory& t) {
    for (std::size_t l = 0; l < t.layers.size(); ++l) {
        const auto& o = t.layers[l];
        os << t.sample_index << ',' << l << ',' << format_double(o.r) << ',' << format_double(o.r_plus) << ','
           << format_double(o.r_minus) << ',' << o.k << '\n';
    }
}

void write_trajectories_csv(std::ostream& os, std::span<const Trajectory> trajectories) {
    os << "sample,layer,r,r_plus,r_minus,k\n";
    for (const auto& t : trajectories) write_trajectory_rows(os, t);
}

std::vector<Trajectory> read_trajectories_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || trim(line) != "sample,layer,r,r_plus,r_minus,k")
        throw Error(ErrorCode::ParseError, "trajectory CSV must start with header sample,layer,r,r_plus,r_minus,k");
    std::vector<Trajectory> out;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cols = split(trim(line), ',');
        if (cols.size() != 6)
            throw Error(ErrorCode::ParseError, "trajectory CSV line " + std::to_string(lineno) + ": expected 6 columns");
        const auto sample = static_cast<std::size_t>(parse_uint(cols[0]));
        const auto layer = static_cast<std::size_t>(parse_uint(cols[1]));
        if (out.empty() || out.back().sample_index != sample) {
            out.push_back(Trajectory{});
            out.back().sample_index = sample;
        }
        auto& t = out.back();
        if (layer != t.layers.size())
            throw Error(ErrorCode::ParseError, "trajectory CSV line " + std::to_string(lineno) + ": layers out of order");
        t.layers.push_back({parse_double(cols[2]), parse_double(cols[3]), parse_double(cols[4]),
                            static_cast<std::size_t>(parse_uint(cols[5]))});
    }
    return out;
}

}  // namespace netlattice
