#include "netlattice/lattice.hpp"

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <ostream>

#include "netlattice/format.hpp"
#include "netlattice/theory.hpp"

namespace netlattice {

std::string_view to_string(ModelTag t) {
    switch (t) {
        case ModelTag::linear_radial: return "linear_radial";
        case ModelTag::relu_radial: return "relu_radial";
        case ModelTag::linear_quadratic: return "linear_quadratic";
        case ModelTag::relu_quadratic: return "relu_quadratic";
    }
    return "?";
}

ModelTag parse_model_tag(std::string_view s) {
    for (auto t : {ModelTag::linear_radial, ModelTag::relu_radial, ModelTag::linear_quadratic, ModelTag::relu_quadratic})
        if (s == to_string(t)) return t;
    throw Error(ErrorCode::ParseError, "unknown model tag '" + std::string(s) + "'");
}

std::vector<std::string> field_labels(ModelTag t) {
    switch (t) {
        case ModelTag::linear_radial: return {"r"};
        case ModelTag::relu_radial: return {"r+", "r-", "k"};
        case ModelTag::linear_quadratic: return {"eps"};
        case ModelTag::relu_quadratic: return {"eps+", "eps-", "epsk"};
    }
    return {};
}

RingParams ring_params(const EnsembleConfig& config) {
    return {static_cast<double>(config.width()), config.weight_variance(), config.bias_variance()};
}

RingState::RingState(ModelTag tag, std::size_t sites) : tag_(tag), sites_(sites) {
    if (sites == 0) throw Error(ErrorCode::InvalidParameter, "ring needs at least one site");
    values_.assign(field_labels(tag).size(), std::vector<double>(sites, 0.0));
}

RingState RingState::uniform_saddle(ModelTag tag, std::size_t sites, const RingParams& p) {
    RingState s(tag, sites);
    if (tag == ModelTag::linear_radial) {
        std::fill(s.values_[0].begin(), s.values_[0].end(), linear_saddle(p.width, p.weight_variance, p.bias_variance));
    } else if (tag == ModelTag::relu_radial) {
        const auto sp = relu_saddle(p.width, p.weight_variance, p.bias_variance);
        std::fill(s.values_[0].begin(), s.values_[0].end(), sp.r_plus);
        std::fill(s.values_[1].begin(), s.values_[1].end(), sp.r_minus);
        std::fill(s.values_[2].begin(), s.values_[2].end(), sp.k);
    }
    return s;
}

double& RingState::at(std::size_t f, std::ptrdiff_t site) {
    const auto n = static_cast<std::ptrdiff_t>(sites_);
    return values_[f][static_cast<std::size_t>(((site % n) + n) % n)];
}

double RingState::at(std::size_t f, std::ptrdiff_t site) const {
    const auto n = static_cast<std::ptrdiff_t>(sites_);
    return values_[f][static_cast<std::size_t>(((site % n) + n) % n)];
}

namespace {

bool in_domain(ModelTag tag, std::size_t field, double v, double width) {
    if (!std::isfinite(v)) return false;
    if (tag == ModelTag::linear_radial) return v > 0.0;
    if (tag == ModelTag::relu_radial) return field < 2 ? v > 0.0 : (v > 0.0 && v < width);
    return true;
}

// The l-th summand of ring_energy.
double site_term(const RingState& s, const RingParams& p, std::ptrdiff_t l) {
    const double n = p.width;
    const double sw = p.weight_variance;
    const double a = sw / n;
    const double sb = p.bias_variance;
    switch (s.tag()) {
        case ModelTag::linear_radial: {
            const double r = s.at(0, l), rp = s.at(0, l - 1);
            return 0.5 * (r * r / (a * rp * rp + sb) - n * std::log(r * r / (a * r * r + sb)));
        }
        case ModelTag::relu_radial: {
            const double rp = s.at(0, l), rm = s.at(1, l), k = s.at(2, l);
            const double prev = s.at(0, l - 1);
            const double m = n - k;
            return 0.5 * ((rp * rp + rm * rm) / (a * prev * prev + sb) + n * std::log(a * rp * rp + sb) +
                          m * (3.0 * std::log(m) - 2.0 * std::log(rp)) + k * (3.0 * std::log(k) - 2.0 * std::log(rm)));
        }
        case ModelTag::linear_quadratic: {
            const double e = s.at(0, l), ep = s.at(0, l - 1);
            return (1.0 - sw) / sb * ((1.0 + sw * sw) * e * e - 2.0 * sw * e * ep);
        }
        case ModelTag::relu_quadratic: {
            const double ep = s.at(0, l), em = s.at(1, l), ek = s.at(2, l);
            const double prev = s.at(0, l - 1);
            return 0.5 * ((1.0 + 0.5 * sw * sw) * ep * ep + em * em + 3.0 * ek * ek + ek * (ep - em) -
                          sw * prev * (ep + em));
        }
    }
    return 0.0;
}

// Fold x back into (lo, hi) by repeated reflection; hi = +inf means one wall.
double reflect(double x, double lo, double hi) {
    if (std::isinf(hi)) return x < lo ? 2.0 * lo - x : x;
    const double span = hi - lo;
    double y = std::fmod(x - lo, 2.0 * span);
    if (y < 0.0) y += 2.0 * span;
    return y <= span ? lo + y : hi - (y - span);
}

}  // namespace

void check_domain(const RingState& state, const RingParams& p) {
    for (std::size_t f = 0; f < state.num_fields(); ++f)
        for (std::size_t l = 0; l < state.sites(); ++l)
            if (!in_domain(state.tag(), f, state.field(f)[l], p.width))
                throw Error(ErrorCode::DomainViolation, std::string(to_string(state.tag())) + " field " +
                                                            field_labels(state.tag())[f] + " out of range at site " +
                                                            std::to_string(l) + " (" +
                                                            format_double(state.field(f)[l]) + ")");
}

double ring_energy(const RingState& state, const RingParams& p) {
    check_domain(state, p);
    double e = 0.0;
    for (std::size_t l = 0; l < state.sites(); ++l) e += site_term(state, p, static_cast<std::ptrdiff_t>(l));
    return e;
}

double ring_energy(const RingState& state, const EnsembleConfig& config) {
    return ring_energy(state, ring_params(config));
}

double local_energy(const RingState& state, const RingParams& p, std::size_t site) {
    if (state.sites() < 2) throw Error(ErrorCode::InvalidParameter, "local energy needs at least 2 sites");
    const auto l = static_cast<std::ptrdiff_t>(site);
    return site_term(state, p, l) + site_term(state, p, l + 1);
}

MetropolisChain::MetropolisChain(const RingParams& params, RingState init, std::uint64_t seed, double proposal_width)
    : params_(params), state_(std::move(init)), energy_(0.0), rng_(seed) {
    if (state_.sites() < 2) throw Error(ErrorCode::InvalidParameter, "Metropolis ring needs at least 2 sites");
    energy_ = ring_energy(state_, params_);
    if (!std::isfinite(energy_)) throw Error(ErrorCode::NonFiniteEnergy, "initial energy is not finite");
    widths_.assign(state_.num_fields(), proposal_width);
    proposed_.assign(state_.num_fields(), 0);
    accepted_.assign(state_.num_fields(), 0);
}

void MetropolisChain::reset_counters() {
    std::fill(proposed_.begin(), proposed_.end(), 0);
    std::fill(accepted_.begin(), accepted_.end(), 0);
}

bool MetropolisChain::update(std::size_t site, std::size_t field) {
    boost::random::normal_distribution<double> normal(0.0, 1.0);
    boost::random::uniform_01<double> uniform;
    const auto l = static_cast<std::ptrdiff_t>(site);
    double& x = state_.at(field, l);
    const double old = x;
    double proposal = old + widths_[field] * normal(rng_);
    const ModelTag tag = state_.tag();
    if (tag == ModelTag::linear_radial || (tag == ModelTag::relu_radial && field < 2))
        proposal = reflect(proposal, 0.0, std::numeric_limits<double>::infinity());
    else if (tag == ModelTag::relu_radial)
        proposal = reflect(proposal, 0.0, params_.width);
    ++proposed_[field];
    // The accept draw happens for every proposal so the stream does not depend on the outcome.
    const double u = uniform(rng_);
    if (!in_domain(tag, field, proposal, params_.width)) return false;

    const double before = local_energy(state_, params_, site);
    x = proposal;
    const double after = local_energy(state_, params_, site);
    const double delta = after - before;
    if (std::isnan(delta)) {
        x = old;
        throw Error(ErrorCode::NonFiniteEnergy, "energy change not finite at site " + std::to_string(site));
    }
    if (delta <= 0.0 || u < std::exp(-delta)) {
        energy_ += delta;
        ++accepted_[field];
        return true;
    }
    x = old;
    return false;
}

bool MetropolisChain::random_update() {
    boost::random::uniform_int_distribution<std::size_t> pick_site(0, state_.sites() - 1);
    boost::random::uniform_int_distribution<std::size_t> pick_field(0, state_.num_fields() - 1);
    const std::size_t site = pick_site(rng_);
    const std::size_t field = pick_field(rng_);
    return update(site, field);
}

void MetropolisChain::sweep() {
    for (std::size_t l = 0; l < state_.sites(); ++l)
        for (std::size_t f = 0; f < state_.num_fields(); ++f) update(l, f);
}

MetropolisResult metropolis_run(const RingParams& params, const RingState& init, const MetropolisOptions& options) {
    if (options.sweeps <= options.burn_in)
        throw Error(ErrorCode::InvalidParameter, "sweeps must exceed burn_in");
    if (options.thin == 0) throw Error(ErrorCode::InvalidParameter, "thin must be >= 1");
    if (!(options.proposal_width >= 0.0)) throw Error(ErrorCode::InvalidParameter, "proposal_width must be >= 0");

    MetropolisChain chain(params, init, options.seed, options.proposal_width);
    MetropolisResult res;
    res.tag = init.tag();
    res.sites = init.sites();
    res.options = options;
    res.labels = field_labels(init.tag());

    const std::size_t block = 100;
    for (std::size_t s = 0; s < options.burn_in; ++s) {
        chain.sweep();
        if (options.adapt && (s + 1) % block == 0) {
            for (std::size_t f = 0; f < chain.widths().size(); ++f) {
                const double acc = static_cast<double>(chain.accepted()[f]) / static_cast<double>(chain.proposed()[f]);
                chain.widths()[f] *= std::exp(2.0 * (acc - options.target_acceptance));
            }
            chain.reset_counters();
        }
    }
    chain.reset_counters();

    for (std::size_t s = options.burn_in; s < options.sweeps; ++s) {
        chain.sweep();
        if ((s - options.burn_in + 1) % options.thin == 0) {
            const double e = ring_energy(chain.state(), params);
            if (!std::isfinite(e)) throw Error(ErrorCode::NonFiniteEnergy, "energy not finite at sweep " + std::to_string(s));
            res.sample_sweeps.push_back(s);
            res.energies.push_back(e);
            std::vector<std::vector<double>> snap;
            for (std::size_t f = 0; f < chain.state().num_fields(); ++f) snap.push_back(chain.state().field(f));
            res.samples.push_back(std::move(snap));
        }
    }
    for (std::size_t f = 0; f < chain.widths().size(); ++f) {
        res.acceptance.push_back(chain.proposed()[f]
                                     ? static_cast<double>(chain.accepted()[f]) / static_cast<double>(chain.proposed()[f])
                                     : 0.0);
        res.widths.push_back(chain.widths()[f]);
    }
    return res;
}

std::vector<double> field_mean_series(const MetropolisResult& result, std::size_t field) {
    std::vector<double> out;
    out.reserve(result.samples.size());
    for (const auto& s : result.samples) {
        double acc = 0.0;
        for (double v : s.at(field)) acc += v;
        out.push_back(acc / static_cast<double>(s.at(field).size()));
    }
    return out;
}

ChainSpectrum chain_spectrum(const MetropolisResult& result, std::size_t field) {
    std::vector<ModeSet> modes;
    modes.reserve(result.samples.size());
    for (const auto& s : result.samples) {
        ModeSet m;
        m.q = wavevector_grid(result.sites);
        m.fields.push_back(fft_modes(s.at(field)));
        modes.push_back(std::move(m));
    }
    ChainSpectrum out;
    out.spectrum = estimate_spectrum(modes);
    out.spectrum.label = result.labels.at(field);
    const std::size_t nq = out.spectrum.q.size();
    out.tau.assign(nq, 0.5);
    out.ess.assign(nq, static_cast<double>(modes.size()));
    std::vector<double> series(modes.size());
    for (std::size_t i = 0; i < nq; ++i) {
        for (std::size_t j = 0; j < modes.size(); ++j) series[j] = std::norm(modes[j].fields[0][i] - out.spectrum.mean[i]);
        const auto ac = integrated_autocorrelation(series);
        double m = 0.0, ss = 0.0;
        for (double v : series) m += v;
        m /= static_cast<double>(series.size());
        for (double v : series) ss += (v - m) * (v - m);
        const double sd = std::sqrt(ss / static_cast<double>(series.size() - 1));
        out.tau[i] = ac.tau;
        out.ess[i] = ac.ess;
        out.spectrum.stderr_[i] = sd / std::sqrt(ac.ess);
    }
    return out;
}

void write_samples_csv(std::ostream& os, const MetropolisResult& result) {
    os << "sweep,site,field,value\n";
    for (std::size_t s = 0; s < result.samples.size(); ++s)
        for (std::size_t l = 0; l < result.sites; ++l)
            for (std::size_t f = 0; f < result.labels.size(); ++f)
                os << result.sample_sweeps[s] << ',' << l << ',' << result.labels[f] << ','
                   << format_double(result.samples[s][f][l]) << '\n';
}

void write_run_summary(std::ostream& os, const MetropolisResult& result) {
    nlohmann::ordered_json j;
    j["model"] = std::string(to_string(result.tag));
    j["sites"] = result.sites;
    j["sweeps"] = result.options.sweeps;
    j["burn_in"] = result.options.burn_in;
    j["thin"] = result.options.thin;
    j["seed"] = result.options.seed;
    j["samples"] = result.samples.size();
    nlohmann::ordered_json fields = nlohmann::ordered_json::array();
    for (std::size_t f = 0; f < result.labels.size(); ++f) {
        nlohmann::ordered_json e;
        e["field"] = result.labels[f];
        e["acceptance"] = result.acceptance[f];
        e["proposal_width"] = result.widths[f];
        const auto series = field_mean_series(result, f);
        if (series.size() >= 1000) {
            const auto ac = integrated_autocorrelation(series);
            e["tau_int"] = ac.tau;
            e["ess"] = ac.ess;
        } else {
            e["tau_int"] = nullptr;
            e["ess"] = nullptr;
        }
        fields.push_back(e);
    }
    j["fields"] = fields;
    if (result.energies.size() >= 1000) {
        const auto ac = integrated_autocorrelation(result.energies);
        j["energy_tau_int"] = ac.tau;
    }
    os << j.dump(2) << '\n';
}

}  // namespace netlattice
