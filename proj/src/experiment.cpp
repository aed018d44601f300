#include "netlattice/experiment.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>
#include <optional>
#include <sstream>

#include "netlattice/format.hpp"
#include "netlattice/lattice.hpp"
#include "netlattice/plot.hpp"
#include "netlattice/spectral.hpp"
#include "netlattice/theory.hpp"

namespace netlattice {

namespace fs = std::filesystem;

namespace {

constexpr ExperimentKind kAllKinds[] = {
    ExperimentKind::fig3_linear_saddle,   ExperimentKind::fig4_linear_spectrum, ExperimentKind::fig5_relu_saddle,
    ExperimentKind::fig6_relu_cross_spectrum, ExperimentKind::fig1_tanh_meanfield, ExperimentKind::mcmc_oracle,
    ExperimentKind::xi_fit,
};

bool needs_linear_theory(ExperimentKind k) {
    return k == ExperimentKind::fig3_linear_saddle || k == ExperimentKind::fig4_linear_spectrum ||
           k == ExperimentKind::xi_fit || k == ExperimentKind::mcmc_oracle;
}

bool needs_relu_theory(ExperimentKind k) {
    return k == ExperimentKind::fig5_relu_saddle || k == ExperimentKind::fig6_relu_cross_spectrum;
}

std::string point_tag(double sw2) { return "sw2=" + format_shortest(sw2); }
std::string point_dir(double sw2) { return "sw2_" + format_shortest(sw2); }

bool parse_bool(std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error(ErrorCode::ParseError, "expected a boolean, got '" + std::string(v) + "'");
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

class ArtifactWriter {
public:
    ArtifactWriter(fs::path root, std::vector<std::string>& list) : root_(std::move(root)), list_(list) {}

    std::ofstream open(const std::string& rel) {
        const fs::path p = root_ / rel;
        fs::create_directories(p.parent_path());
        std::ofstream f(p, std::ios::binary);
        if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + p.string());
        list_.push_back(rel);
        return f;
    }

    void plot(const std::vector<PlotSeries>& series, const AxesSpec& axes, const std::string& rel) {
        const fs::path p = root_ / rel;
        fs::create_directories(p.parent_path());
        emit_plot(series, axes, p.string());
        list_.push_back(rel);
    }

private:
    fs::path root_;
    std::vector<std::string>& list_;
};

// Everything one sweep point keeps from its ensemble.
struct EnsembleData {
    std::vector<SampleWindowMeans> means;
    std::vector<double> first_half, second_half;
    std::vector<ModeSet> modes;
    std::size_t failed = 0;
};

EnsembleData collect(const EnsembleConfig& cfg, const ExperimentPlan& plan, const TheoryPrediction* reference,
                     ArtifactWriter& out, const std::string& dir) {
    EnsembleData d;
    std::ofstream dump;
    if (plan.dump_trajectories) {
        dump = out.open(dir + "/trajectories.csv");
        dump << "sample,layer,r,r_plus,r_minus,k\n";
    }
    const std::size_t start = cfg.window_start(), len = cfg.window_len(), half = len / 2;
    const auto failures = for_each_trajectory(cfg, {plan.threads, plan.method}, [&](Trajectory&& t) {
        if (dump.is_open()) write_trajectory_rows(dump, t);
        d.means.push_back(window_means(t, start, len, cfg.width()));
        d.first_half.push_back(window_means(t, start, half, cfg.width()).r);
        d.second_half.push_back(window_means(t, start + half, len - half, cfg.width()).r);
        if (reference) d.modes.push_back(mode_set(fluctuation_series(t, *reference, cfg)));
    });
    d.failed = failures.size();
    if (!failures.empty()) {
        auto f = out.open(dir + "/failed_samples.csv");
        f << "sample,message\n";
        for (const auto& x : failures) f << x.sample_index << ",\"" << x.message << "\"\n";
    }
    if (d.means.size() < 2)
        throw Error(ErrorCode::TooFewSamples, std::to_string(d.means.size()) + " usable samples");

    auto f = out.open(dir + "/window_means.csv");
    f << "sample,r,r_plus,r_minus,k,r2_over_n\n";
    for (const auto& m : d.means)
        f << m.sample_index << ',' << format_double(m.r) << ',' << format_double(m.r_plus) << ','
          << format_double(m.r_minus) << ',' << format_double(m.k) << ',' << format_double(m.r2_over_n) << '\n';
    return d;
}

double stationarity(const EnsembleData& d) {
    const auto a = mean_estimate(d.first_half);
    const auto b = mean_estimate(d.second_half);
    const double se = std::hypot(a.stderr_, b.stderr_);
    return se > 0.0 ? (b.mean - a.mean) / se : 0.0;
}

Tolerances tol_of(const ExperimentPlan& p, const std::string& rel, const std::string& z, double frac = 1.0) {
    return {rel.empty() ? 0.0 : p.tolerance(rel), z.empty() ? 0.0 : p.tolerance(z), frac};
}

// Gating check: all rows of `quantity` pass.
void all_rows_check(ComparisonReport& rep, const std::string& quantity) {
    std::size_t n = 0, ok = 0;
    for (const auto& r : rep.rows)
        if (r.quantity == quantity) {
            ++n;
            ok += r.pass ? 1 : 0;
        }
    rep.add_check(quantity + " pass fraction", n ? static_cast<double>(ok) / static_cast<double>(n) : 0.0, 1.0, ">=");
}

bool in_half_band(double q) { return q > 0.0 && q <= std::numbers::pi + 1e-12; }

// --- per-kind point runners ---------------------------------------------------

struct SaddleAccum {
    std::vector<double> x;
    std::vector<std::vector<double>> measured, stderr_, predicted;
};

void run_fig3_point(const ExperimentPlan& plan, double sw2, ArtifactWriter& out, ComparisonReport& rep,
                    SaddleAccum& acc, std::size_t& failed) {
    const auto cfg = point_config(plan, sw2);
    const auto d = collect(cfg, plan, nullptr, out, point_dir(sw2));
    failed += d.failed;
    const auto s = summarize_window(d.means);
    const double r_star = linear_saddle(static_cast<double>(cfg.width()), sw2, cfg.bias_variance());
    rep.add_row(point_tag(sw2), "r", sw2, r_star, s.r.mean, s.r.stderr_, tol_of(plan, "relative", "z"));
    rep.add_check(point_tag(sw2) + " stationarity |z|", std::abs(stationarity(d)), plan.tolerance("stationarity_z"),
                  "<=", false);
    acc.x.push_back(sw2);
    acc.measured[0].push_back(s.r.mean);
    acc.stderr_[0].push_back(s.r.stderr_);
    acc.predicted[0].push_back(r_star);
}

void run_fig5_point(const ExperimentPlan& plan, double sw2, ArtifactWriter& out, ComparisonReport& rep,
                    SaddleAccum& acc, std::size_t& failed) {
    const auto cfg = point_config(plan, sw2);
    const auto d = collect(cfg, plan, nullptr, out, point_dir(sw2));
    failed += d.failed;
    const auto s = summarize_window(d.means);
    const auto sp = relu_saddle(static_cast<double>(cfg.width()), sw2, cfg.bias_variance());
    const auto t = tol_of(plan, "relative", "z");
    rep.add_row(point_tag(sw2), "r_plus", sw2, sp.r_plus, s.r_plus.mean, s.r_plus.stderr_, t);
    rep.add_row(point_tag(sw2), "r_minus", sw2, sp.r_minus, s.r_minus.mean, s.r_minus.stderr_, t);
    rep.add_row(point_tag(sw2), "k", sw2, sp.k, s.k.mean, s.k.stderr_, tol_of(plan, "k_relative", "z"));
    const double zsym = (s.r_plus.mean - s.r_minus.mean) / std::hypot(s.r_plus.stderr_, s.r_minus.stderr_);
    rep.add_check(point_tag(sw2) + " r_plus/r_minus symmetry |z|", std::abs(zsym), plan.tolerance("symmetry_z"), "<=",
                  false);
    rep.add_check(point_tag(sw2) + " stationarity |z|", std::abs(stationarity(d)), plan.tolerance("stationarity_z"),
                  "<=", false);
    acc.x.push_back(sw2);
    const double m[] = {s.r_plus.mean, s.r_minus.mean, s.k.mean};
    const double e[] = {s.r_plus.stderr_, s.r_minus.stderr_, s.k.stderr_};
    const double p[] = {sp.r_plus, sp.r_minus, sp.k};
    for (int i = 0; i < 3; ++i) {
        acc.measured[i].push_back(m[i]);
        acc.stderr_[i].push_back(e[i]);
        acc.predicted[i].push_back(p[i]);
    }
}

void run_tanh_point(const ExperimentPlan& plan, double sw2, ArtifactWriter& out, ComparisonReport& rep,
                    SaddleAccum& acc, std::size_t& failed) {
    const auto cfg = point_config(plan, sw2);
    const auto d = collect(cfg, plan, nullptr, out, point_dir(sw2));
    failed += d.failed;
    const auto s = summarize_window(d.means);
    const double q = meanfield_fixed_point(Activation::tanh, sw2, cfg.bias_variance());
    rep.add_row(point_tag(sw2), "r2_over_n", sw2, q, s.r2_over_n.mean, s.r2_over_n.stderr_, tol_of(plan, "relative", "z"));
    acc.x.push_back(sw2);
    acc.measured[0].push_back(s.r2_over_n.mean);
    acc.stderr_[0].push_back(s.r2_over_n.stderr_);
    acc.predicted[0].push_back(q);
}

void spectrum_plot(ArtifactWriter& out, const std::string& rel, const std::string& title,
                   const std::vector<std::pair<std::string, std::pair<std::vector<double>, std::vector<double>>>>& meas,
                   const std::vector<std::pair<std::string, std::pair<std::vector<double>, std::vector<double>>>>& theory) {
    std::vector<PlotSeries> series;
    std::size_t c = 0;
    for (const auto& [label, xy] : meas) {
        PlotSeries s;
        s.label = label;
        s.x = xy.first;
        s.y = xy.second;
        s.color = kPalette[c++ % 7];
        series.push_back(std::move(s));
    }
    for (const auto& [label, xy] : theory) {
        PlotSeries s;
        s.label = label;
        s.x = xy.first;
        s.y = xy.second;
        s.color = "#000000";
        s.dashed = true;
        series.push_back(std::move(s));
    }
    AxesSpec axes;
    axes.title = title;
    axes.xlabel = "q";
    axes.ylabel = "variance";
    axes.log_y = true;
    out.plot(series, axes, rel);
}

void run_fig4_point(const ExperimentPlan& plan, double sw2, ArtifactWriter& out, ComparisonReport& rep,
                    std::size_t& failed) {
    const auto cfg = point_config(plan, sw2);
    const auto pred = predict(cfg);
    const auto dir = point_dir(sw2);
    const auto d = collect(cfg, plan, &pred, out, dir);
    failed += d.failed;
    auto spec = estimate_spectrum(d.modes);
    spec.fingerprint = cfg.fingerprint();
    spec.label = "eps";
    {
        auto f = out.open(dir + "/spectrum.csv");
        write_spectrum_csv(f, spec);
        auto g = out.open(dir + "/theory.csv");
        write_linear_theory_csv(g, pred);
    }
    auto cmp = compare(spec, pred, tol_of(plan, "relative", "z", plan.tolerance("mode_fraction")), point_tag(sw2));
    rep.append(cmp);
    rep.add_check(point_tag(sw2) + " log-log shape correlation", loglog_correlation(spec, pred),
                  plan.tolerance("loglog_corr"), ">=");
    const double m = static_cast<double>(d.modes.size());
    rep.add_check(point_tag(sw2) + " Gaussian mode fraction", gaussian_mode_fraction(spec, 3.0 * std::sqrt(24.0 / m)),
                  plan.tolerance("kurtosis_fraction"), ">=", false);
    rep.add_check(point_tag(sw2) + " stationarity |z|", std::abs(stationarity(d)), plan.tolerance("stationarity_z"),
                  "<=", false);

    std::vector<double> q, v, p;
    for (std::size_t i = 0; i < spec.q.size(); ++i)
        if (!spec.excluded[i] && in_half_band(spec.q[i])) {
            q.push_back(spec.q[i]);
            v.push_back(spec.variance[i]);
            p.push_back(pred.linear_variance[i]);
        }
    spectrum_plot(out, dir + "/spectrum.svg", "linear spectrum, " + point_tag(sw2), {{"measured", {q, v}}},
                  {{"theory", {q, p}}});
}

void run_fig6_point(const ExperimentPlan& plan, double sw2, ArtifactWriter& out, ComparisonReport& rep,
                    std::size_t& failed) {
    const auto cfg = point_config(plan, sw2);
    const auto pred = predict(cfg);
    const auto dir = point_dir(sw2);
    const auto d = collect(cfg, plan, &pred, out, dir);
    failed += d.failed;
    auto cs = estimate_cross_spectrum(d.modes);
    cs.fingerprint = cfg.fingerprint();
    {
        auto f = out.open(dir + "/cross_spectrum.csv");
        write_cross_spectrum_csv(f, cs);
        auto g = out.open(dir + "/theory.csv");
        write_relu_theory_csv(g, pred);
    }
    static const char* names[] = {"p", "m", "k"};
    const Tolerances diag_tol{plan.tolerance("diag_median"), 4.0, 0.0};
    const double sign_se = plan.tolerance("sign_se");
    std::vector<std::vector<double>> qs(3), meas(3), theo(3);
    std::size_t sign_total = 0, sign_ok = 0;
    for (int a = 0; a < 3; ++a) {
        std::vector<double> devs;
        const std::string quantity = std::string("cov_") + names[a] + names[a];
        for (std::size_t i = 0; i < cs.q.size(); ++i) {
            if (cs.excluded[i] || !in_half_band(cs.q[i])) continue;
            const double pv = pred.relu_covariance[i](a, a).real();
            const double mv = cs.covariance[i](a, a).real();
            const auto& row = rep.add_row(point_tag(sw2), quantity, cs.q[i], pv, mv, cs.stderr_[i](a, a), diag_tol);
            devs.push_back(std::abs(row.rel_dev));
            qs[a].push_back(cs.q[i]);
            meas[a].push_back(mv);
            theo[a].push_back(pv);
        }
        rep.add_check(point_tag(sw2) + " " + quantity + " median |rel dev|", median(devs), plan.tolerance("diag_median"),
                      "<=");
    }
    for (int a = 0; a < 3; ++a)
        for (int b = a + 1; b < 3; ++b)
            for (std::size_t i = 0; i < cs.q.size(); ++i) {
                if (cs.excluded[i] || !in_half_band(cs.q[i])) continue;
                const Complex pv = pred.relu_covariance[i](a, b), mv = cs.covariance[i](a, b);
                const double se = cs.stderr_[i](a, b);
                for (int part = 0; part < 2; ++part) {
                    const double t = part ? pv.imag() : pv.real();
                    const double m = part ? mv.imag() : mv.real();
                    if (std::abs(t) <= sign_se * se) continue;
                    ++sign_total;
                    sign_ok += (t > 0) == (m > 0) ? 1 : 0;
                }
            }
    rep.add_check(point_tag(sw2) + " off-diagonal sign agreement (" + std::to_string(sign_total) + " entries)",
                  sign_total ? static_cast<double>(sign_ok) / static_cast<double>(sign_total) : 1.0,
                  plan.tolerance("sign_fraction"), ">=");
    rep.add_check(point_tag(sw2) + " stationarity |z|", std::abs(stationarity(d)), plan.tolerance("stationarity_z"),
                  "<=", false);
    spectrum_plot(out, dir + "/cross_spectrum.svg", "relu diagonal covariances, " + point_tag(sw2),
                  {{"++ measured", {qs[0], meas[0]}}, {"-- measured", {qs[1], meas[1]}}, {"kk measured", {qs[2], meas[2]}}},
                  {{"++ theory", {qs[0], theo[0]}}, {"-- theory", {qs[1], theo[1]}}, {"kk theory", {qs[2], theo[2]}}});
}

void run_xi_point(const ExperimentPlan& plan, double sw2, ArtifactWriter& out, ComparisonReport& rep,
                  SaddleAccum& acc, std::size_t& failed) {
    const auto cfg = point_config(plan, sw2);
    const auto pred = predict(cfg);
    const auto dir = point_dir(sw2);
    const auto d = collect(cfg, plan, &pred, out, dir);
    failed += d.failed;
    const auto spec = estimate_spectrum(d.modes);
    {
        auto f = out.open(dir + "/spectrum.csv");
        write_spectrum_csv(f, spec);
    }
    const auto fit = fit_lorentzian(spec, plan.fit_q_max);
    const double xi = correlation_length(sw2);
    rep.add_row(point_tag(sw2), "xi", sw2, xi, fit.xi, fit.xi_stderr, tol_of(plan, "relative", "z"));
    acc.x.push_back(sw2);
    acc.measured[0].push_back(fit.xi);
    acc.stderr_[0].push_back(fit.xi_stderr);
    acc.predicted[0].push_back(xi);

    auto f = out.open(dir + "/xi_fit.csv");
    f << "q_max,modes,a,b,xi_fit,xi_stderr,xi_theory\n";
    for (double qm : {0.5 * plan.fit_q_max, plan.fit_q_max, 2.0 * plan.fit_q_max}) {
        try {
            const auto g = fit_lorentzian(spec, qm);
            f << format_double(qm) << ',' << g.modes << ',' << format_double(g.a) << ',' << format_double(g.b) << ','
              << format_double(g.xi) << ',' << format_double(g.xi_stderr) << ',' << format_double(xi) << '\n';
        } catch (const Error& e) {
            f << format_double(qm) << ",0,nan,nan,nan,nan," << format_double(xi) << '\n';
        }
    }

    std::vector<double> q, inv, line;
    for (std::size_t i = 0; i < spec.q.size(); ++i)
        if (spec.q[i] > 0.0 && spec.q[i] <= 2.0 * plan.fit_q_max && spec.q[i] < std::numbers::pi) {
            q.push_back(spec.q[i]);
            inv.push_back(1.0 / spec.variance[i]);
            line.push_back(fit.a + fit.b * spec.q[i] * spec.q[i]);
        }
    std::vector<PlotSeries> series(2);
    series[0].label = "1/var measured";
    series[0].x = q;
    series[0].y = inv;
    series[0].markers = true;
    series[1].label = "a + b q^2 fit";
    series[1].x = q;
    series[1].y = line;
    series[1].color = "#000000";
    series[1].dashed = true;
    AxesSpec axes;
    axes.title = "Lorentzian fit, " + point_tag(sw2);
    axes.xlabel = "q";
    axes.ylabel = "1/var";
    out.plot(series, axes, dir + "/lorentzian.svg");
}

// Weighted mean of measured/predicted over modes 0 < q <= pi.
double calibrate_ratio(const std::vector<double>& m, const std::vector<double>& se, const std::vector<double>& p) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double r = m[i] / p[i];
        const double w = (p[i] * p[i]) / (se[i] * se[i]);
        num += w * r;
        den += w;
    }
    return num / den;
}

MetropolisResult run_chain(const ExperimentPlan& plan, ModelTag tag, double sw2, std::uint64_t seed,
                           ArtifactWriter& out, const std::string& dir) {
    const auto cfg = point_config(plan, sw2);
    const auto params = ring_params(cfg);
    MetropolisOptions opt;
    opt.sweeps = plan.mcmc.sweeps;
    opt.burn_in = plan.mcmc.burn_in;
    opt.thin = plan.mcmc.thin;
    opt.proposal_width = plan.mcmc.proposal_width;
    opt.seed = seed;
    auto res = metropolis_run(params, RingState::uniform_saddle(tag, plan.mcmc.sites, params), opt);
    auto f = out.open(dir + "/run_summary.json");
    write_run_summary(f, res);
    if (plan.dump_trajectories) {
        auto g = out.open(dir + "/samples.csv");
        write_samples_csv(g, res);
    }
    return res;
}

void run_mcmc(const ExperimentPlan& plan, ArtifactWriter& out, ComparisonReport& rep,
              std::vector<PointFailure>& failures) {
    // Linear chain: sweep[0] calibrates kappa, the remaining points are held out.
    double kappa = std::nan("");
    const Tolerances row_tol{plan.tolerance("median"), 4.0, 0.0};
    for (std::size_t pi = 0; pi < plan.sweep.size(); ++pi) {
        const double sw2 = plan.sweep[pi];
        try {
            const std::string dir = "linear_" + point_dir(sw2);
            const auto res = run_chain(plan, ModelTag::linear_quadratic, sw2,
                                       derive_sample_seed(plan.base.master_seed, pi), out, dir);
            const auto cs = chain_spectrum(res);
            const double sb2 = plan.base.bias_variance;
            std::vector<double> q, m, se, p;
            for (std::size_t i = 0; i < cs.spectrum.q.size(); ++i) {
                if (!in_half_band(cs.spectrum.q[i])) continue;
                q.push_back(cs.spectrum.q[i]);
                m.push_back(cs.spectrum.variance[i]);
                se.push_back(cs.spectrum.stderr_[i]);
                p.push_back(linear_mode_variance(cs.spectrum.q[i], sw2, sb2, plan.mcmc.sites, 1.0));
            }
            {
                auto f = out.open(dir + "/spectrum.csv");
                f << "q,var,stderr,tau_int,ess,prediction_unit_kappa\n";
                std::size_t j = 0;
                for (std::size_t i = 0; i < cs.spectrum.q.size(); ++i) {
                    if (!in_half_band(cs.spectrum.q[i])) continue;
                    f << format_double(q[j]) << ',' << format_double(m[j]) << ',' << format_double(se[j]) << ','
                      << format_double(cs.tau[i]) << ',' << format_double(cs.ess[i]) << ',' << format_double(p[j])
                      << '\n';
                    ++j;
                }
            }
            if (pi == 0) {
                kappa = calibrate_ratio(m, se, p);
                rep.add_check(point_tag(sw2) + " calibrated kappa vs frozen " + format_shortest(kLinearModeNormalization),
                              std::abs(kappa - kLinearModeNormalization), plan.tolerance("kappa"), "<=");
                continue;
            }
            if (std::isnan(kappa)) throw Error(ErrorCode::MissingReference, "calibration point failed");
            std::vector<double> devs;
            for (std::size_t j = 0; j < q.size(); ++j) {
                const auto& row = rep.add_row(point_tag(sw2), "var", q[j], kappa * p[j], m[j], se[j], row_tol);
                devs.push_back(std::abs(row.rel_dev));
            }
            rep.add_check(point_tag(sw2) + " holdout median |rel dev|", median(devs), plan.tolerance("median"), "<=");
            for (auto& x : p) x *= kappa;
            spectrum_plot(out, dir + "/spectrum.svg", "quadratic ring chain, " + point_tag(sw2),
                          {{"MCMC", {q, m}}}, {{"theory", {q, p}}});
        } catch (const Error& e) {
            failures.push_back({"linear " + point_tag(sw2), std::string(to_string(e.code())), e.what()});
            rep.add_check("linear " + point_tag(sw2) + " executed", 0.0, 1.0, ">=");
        }
    }

    // ReLU chain: calibrates kappa' from the three diagonal spectra.
    const double sw2 = plan.mcmc.relu_calibration;
    try {
        const std::string dir = "relu_" + point_dir(sw2);
        const auto res = run_chain(plan, ModelTag::relu_quadratic, sw2,
                                   derive_sample_seed(plan.base.master_seed, plan.sweep.size()), out, dir);
        std::vector<double> m, se, p;
        for (std::size_t f = 0; f < 3; ++f) {
            const auto cs = chain_spectrum(res, f);
            for (std::size_t i = 0; i < cs.spectrum.q.size(); ++i) {
                if (!in_half_band(cs.spectrum.q[i])) continue;
                m.push_back(cs.spectrum.variance[i]);
                se.push_back(cs.spectrum.stderr_[i]);
                p.push_back(relu_covariance(cs.spectrum.q[i], sw2, plan.mcmc.sites, 1.0)(f, f).real());
            }
        }
        const double kp = calibrate_ratio(m, se, p);
        rep.add_check("relu " + point_tag(sw2) + " calibrated kappa' vs frozen " + format_shortest(kReluModeNormalization),
                      std::abs(kp - kReluModeNormalization), plan.tolerance("kappa"), "<=");
    } catch (const Error& e) {
        failures.push_back({"relu " + point_tag(sw2), std::string(to_string(e.code())), e.what()});
        rep.add_check("relu " + point_tag(sw2) + " executed", 0.0, 1.0, ">=");
    }
}

void saddle_plot(ArtifactWriter& out, const std::string& rel, const std::string& title, const std::string& ylabel,
                 const SaddleAccum& acc, const std::vector<std::string>& labels) {
    std::vector<PlotSeries> series;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        PlotSeries m;
        m.label = labels[i] + " measured";
        m.x = acc.x;
        m.y = acc.measured[i];
        m.yerr = acc.stderr_[i];
        m.markers = true;
        m.color = kPalette[i % 7];
        series.push_back(std::move(m));
        PlotSeries t;
        t.label = labels[i] + " theory";
        t.x = acc.x;
        t.y = acc.predicted[i];
        t.color = "#000000";
        t.dashed = true;
        series.push_back(std::move(t));
    }
    AxesSpec axes;
    axes.title = title;
    axes.xlabel = "weight variance";
    axes.ylabel = ylabel;
    out.plot(series, axes, rel);
}

void write_saddle_tables(ArtifactWriter& out, const SaddleAccum& acc, const std::vector<std::string>& names) {
    auto t = out.open("theory.csv");
    auto m = out.open("measured.csv");
    t << "weight_variance";
    m << "weight_variance";
    for (const auto& n : names) {
        t << ',' << n;
        m << ',' << n << ',' << n << "_stderr";
    }
    t << '\n';
    m << '\n';
    for (std::size_t i = 0; i < acc.x.size(); ++i) {
        t << format_double(acc.x[i]);
        m << format_double(acc.x[i]);
        for (std::size_t j = 0; j < names.size(); ++j) {
            t << ',' << format_double(acc.predicted[j][i]);
            m << ',' << format_double(acc.measured[j][i]) << ',' << format_double(acc.stderr_[j][i]);
        }
        t << '\n';
        m << '\n';
    }
}

}  // namespace

std::string_view to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::fig3_linear_saddle: return "fig3_linear_saddle";
        case ExperimentKind::fig4_linear_spectrum: return "fig4_linear_spectrum";
        case ExperimentKind::fig5_relu_saddle: return "fig5_relu_saddle";
        case ExperimentKind::fig6_relu_cross_spectrum: return "fig6_relu_cross_spectrum";
        case ExperimentKind::fig1_tanh_meanfield: return "fig1_tanh_meanfield";
        case ExperimentKind::mcmc_oracle: return "mcmc_oracle";
        case ExperimentKind::xi_fit: return "xi_fit";
    }
    return "?";
}

ExperimentKind parse_experiment_kind(std::string_view s) {
    for (auto k : kAllKinds)
        if (s == to_string(k)) return k;
    throw Error(ErrorCode::ParseError, "unknown experiment '" + std::string(s) + "'");
}

double ExperimentPlan::tolerance(const std::string& name) const {
    auto it = tol.find(name);
    if (it == tol.end()) throw Error(ErrorCode::InvalidParameter, "plan declares no tolerance tol." + name);
    return it->second;
}

ExperimentPlan default_plan(ExperimentKind kind) {
    ExperimentPlan p;
    p.kind = kind;
    p.out_dir = std::string(to_string(kind));
    p.tol["stationarity_z"] = 3.0;
    switch (kind) {
        case ExperimentKind::fig3_linear_saddle:
            p.sweep = {0.1, 0.2, 0.3, 0.5, 0.7, 0.8, 0.9};
            p.tol["relative"] = 0.02;
            p.tol["z"] = 0.0;
            break;
        case ExperimentKind::fig4_linear_spectrum:
            p.sweep = {0.02, 0.5, 0.98};
            p.tol["relative"] = 0.0;
            p.tol["z"] = 4.0;
            p.tol["mode_fraction"] = 0.95;
            p.tol["loglog_corr"] = 0.99;
            p.tol["kurtosis_fraction"] = 0.95;
            break;
        case ExperimentKind::fig5_relu_saddle:
            p.base.activation = Activation::relu;
            p.sweep = {0.2, 0.6, 1.0, 1.4, 1.8};
            p.tol["relative"] = 0.03;
            p.tol["k_relative"] = 0.01;
            p.tol["z"] = 0.0;
            p.tol["symmetry_z"] = 3.0;
            break;
        case ExperimentKind::fig6_relu_cross_spectrum:
            p.base.activation = Activation::relu;
            p.sweep = {0.02, 0.98, 1.94};
            p.tol["diag_median"] = 0.20;
            p.tol["sign_se"] = 2.0;
            p.tol["sign_fraction"] = 1.0;
            break;
        case ExperimentKind::fig1_tanh_meanfield:
            p.base.activation = Activation::tanh;
            p.base.width = 500;
            p.base.bias_variance = 0.001;
            p.base.depth = 100;
            p.base.window_start = 36;
            p.base.window_len = 64;
            p.sweep = {0.1, 1.5};
            p.tol["relative"] = 0.0;
            p.tol["z"] = 3.0;
            break;
        case ExperimentKind::mcmc_oracle:
            p.sweep = {0.5, 0.18, 0.82};
            p.tol["median"] = 0.05;
            p.tol["kappa"] = 0.05;
            break;
        case ExperimentKind::xi_fit:
            p.sweep = {0.5, 0.8, 0.9};
            p.tol["relative"] = 0.15;
            p.tol["z"] = 0.0;
            break;
    }
    return p;
}

void set_plan_value(ExperimentPlan& p, std::string_view key, std::string_view value) {
    value = trim(value);
    if (key == "experiment") {
        if (parse_experiment_kind(value) != p.kind)
            throw Error(ErrorCode::ParseError, "experiment kind can only be chosen first");
    } else if (key == "sweep") {
        p.sweep = parse_double_list(value);
    } else if (key == "out") {
        p.out_dir = std::string(value);
    } else if (key == "threads") {
        p.threads = static_cast<unsigned>(parse_uint(value));
    } else if (key == "method") {
        p.method = parse_propagation_method(value);
    } else if (key == "dump_trajectories") {
        p.dump_trajectories = parse_bool(value);
    } else if (key == "fit.q_max") {
        p.fit_q_max = parse_double(value);
    } else if (key == "mcmc.sites") {
        p.mcmc.sites = static_cast<std::size_t>(parse_uint(value));
    } else if (key == "mcmc.sweeps") {
        p.mcmc.sweeps = static_cast<std::size_t>(parse_uint(value));
    } else if (key == "mcmc.burn_in") {
        p.mcmc.burn_in = static_cast<std::size_t>(parse_uint(value));
    } else if (key == "mcmc.thin") {
        p.mcmc.thin = static_cast<std::size_t>(parse_uint(value));
    } else if (key == "mcmc.proposal_width") {
        p.mcmc.proposal_width = parse_double(value);
    } else if (key == "mcmc.relu_calibration") {
        p.mcmc.relu_calibration = parse_double(value);
    } else if (key.starts_with("tol.")) {
        p.tol[std::string(key.substr(4))] = parse_double(value);
    } else {
        set_config_value(p.base, key, value);
    }
}

ExperimentPlan parse_plan_text(std::string_view text) {
    std::vector<std::pair<std::string, std::string>> entries;
    std::optional<ExperimentKind> kind;
    std::size_t lineno = 0;
    for (auto raw : split(text, '\n')) {
        ++lineno;
        auto line = raw.substr(0, raw.find('#'));
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorCode::ParseError, "plan line " + std::to_string(lineno) + ": expected key = value");
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key == "experiment")
            kind = parse_experiment_kind(value);
        else
            entries.emplace_back(key, value);
    }
    if (!kind) throw Error(ErrorCode::ParseError, "plan has no experiment key");
    ExperimentPlan p = default_plan(*kind);
    for (const auto& [k, v] : entries) set_plan_value(p, k, v);
    return p;
}

ExperimentPlan load_plan_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorCode::IoFailure, "cannot read plan " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_plan_text(ss.str());
}

std::string to_plan_text(const ExperimentPlan& p) {
    std::ostringstream o;
    o << "experiment = " << to_string(p.kind) << '\n' << to_config_text(p.base) << "sweep = ";
    for (std::size_t i = 0; i < p.sweep.size(); ++i) o << (i ? ", " : "") << format_shortest(p.sweep[i]);
    o << "\nout = " << p.out_dir << "\nthreads = " << p.threads << "\nmethod = " << to_string(p.method)
      << "\ndump_trajectories = " << (p.dump_trajectories ? "true" : "false")
      << "\nfit.q_max = " << format_shortest(p.fit_q_max) << "\nmcmc.sites = " << p.mcmc.sites
      << "\nmcmc.sweeps = " << p.mcmc.sweeps << "\nmcmc.burn_in = " << p.mcmc.burn_in
      << "\nmcmc.thin = " << p.mcmc.thin << "\nmcmc.proposal_width = " << format_shortest(p.mcmc.proposal_width)
      << "\nmcmc.relu_calibration = " << format_shortest(p.mcmc.relu_calibration) << '\n';
    for (const auto& [k, v] : p.tol) o << "tol." << k << " = " << format_shortest(v) << '\n';
    return o.str();
}

EnsembleConfig point_config(const ExperimentPlan& plan, double weight_variance) {
    ConfigCandidate c = plan.base;
    c.weight_variance = weight_variance;
    return validate_config(c);
}

void validate_plan(const ExperimentPlan& plan) {
    std::vector<ConfigError::Violation> v;
    if (plan.sweep.empty()) v.push_back({ErrorCode::InvalidParameter, "sweep is empty"});
    if (plan.out_dir.empty()) v.push_back({ErrorCode::InvalidParameter, "output directory is empty"});
    if (plan.threads == 0) v.push_back({ErrorCode::InvalidParameter, "threads must be >= 1"});
    std::vector<double> points = plan.sweep;
    if (plan.kind == ExperimentKind::mcmc_oracle) points.push_back(plan.mcmc.relu_calibration);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double sw2 = points[i];
        const bool relu_point = plan.kind == ExperimentKind::mcmc_oracle && i + 1 == points.size();
        try {
            point_config(plan, sw2);
        } catch (const ConfigError& e) {
            for (const auto& x : e.violations()) v.push_back({x.code, point_tag(sw2) + ": " + x.message});
        }
        if ((needs_linear_theory(plan.kind) && !relu_point) && !(sw2 < 1.0))
            v.push_back({ErrorCode::Supercritical, point_tag(sw2) + " is outside the linear theory regime (< 1)"});
        if ((needs_relu_theory(plan.kind) || relu_point) && !(sw2 < 2.0))
            v.push_back({ErrorCode::Supercritical, point_tag(sw2) + " is outside the relu theory regime (< 2)"});
    }
    const bool linear_kind = plan.kind == ExperimentKind::fig3_linear_saddle ||
                             plan.kind == ExperimentKind::fig4_linear_spectrum || plan.kind == ExperimentKind::xi_fit;
    if (linear_kind && plan.base.activation != Activation::linear)
        v.push_back({ErrorCode::InvalidParameter, std::string(to_string(plan.kind)) + " needs activation = linear"});
    if (needs_relu_theory(plan.kind) && plan.base.activation != Activation::relu)
        v.push_back({ErrorCode::InvalidParameter, std::string(to_string(plan.kind)) + " needs activation = relu"});
    if (plan.kind == ExperimentKind::fig1_tanh_meanfield && plan.base.activation != Activation::tanh)
        v.push_back({ErrorCode::InvalidParameter, "fig1_tanh_meanfield needs activation = tanh"});
    if (plan.kind == ExperimentKind::mcmc_oracle) {
        if (plan.mcmc.sites < 2 || !is_power_of_two(plan.mcmc.sites))
            v.push_back({ErrorCode::WindowNotPowerOfTwo, "mcmc.sites must be a power of two >= 2"});
        if (plan.mcmc.sweeps <= plan.mcmc.burn_in)
            v.push_back({ErrorCode::InvalidParameter, "mcmc.sweeps must exceed mcmc.burn_in"});
        if (plan.mcmc.thin == 0 || (plan.mcmc.sweeps - std::min(plan.mcmc.sweeps, plan.mcmc.burn_in)) / std::max<std::size_t>(plan.mcmc.thin, 1) < 1000)
            v.push_back({ErrorCode::InvalidParameter, "mcmc run must keep at least 1000 samples"});
    }
    if (!v.empty()) throw ConfigError(std::move(v));
}

int ExperimentOutcome::exit_code() const {
    if (!failures.empty()) return 2;
    return report.pass() ? 0 : 1;
}

ExperimentOutcome run_experiment(const ExperimentPlan& plan) {
    validate_plan(plan);
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentOutcome outcome;
    const fs::path root(plan.out_dir);
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + root.string() + ": " + ec.message());
    ArtifactWriter out(root, outcome.artifacts);
    auto& rep = outcome.report;
    rep.experiment = std::string(to_string(plan.kind));

    SaddleAccum acc;
    const std::size_t nq = plan.kind == ExperimentKind::fig5_relu_saddle ? 3 : 1;
    acc.measured.resize(nq);
    acc.stderr_.resize(nq);
    acc.predicted.resize(nq);

    if (plan.kind == ExperimentKind::mcmc_oracle) {
        run_mcmc(plan, out, rep, outcome.failures);
    } else {
        for (double sw2 : plan.sweep) {
            try {
                switch (plan.kind) {
                    case ExperimentKind::fig3_linear_saddle:
                        run_fig3_point(plan, sw2, out, rep, acc, outcome.failed_samples);
                        break;
                    case ExperimentKind::fig5_relu_saddle:
                        run_fig5_point(plan, sw2, out, rep, acc, outcome.failed_samples);
                        break;
                    case ExperimentKind::fig1_tanh_meanfield:
                        run_tanh_point(plan, sw2, out, rep, acc, outcome.failed_samples);
                        break;
                    case ExperimentKind::fig4_linear_spectrum:
                        run_fig4_point(plan, sw2, out, rep, outcome.failed_samples);
                        break;
                    case ExperimentKind::fig6_relu_cross_spectrum:
                        run_fig6_point(plan, sw2, out, rep, outcome.failed_samples);
                        break;
                    case ExperimentKind::xi_fit:
                        run_xi_point(plan, sw2, out, rep, acc, outcome.failed_samples);
                        break;
                    case ExperimentKind::mcmc_oracle: break;
                }
            } catch (const Error& e) {
                outcome.failures.push_back({point_tag(sw2), std::string(to_string(e.code())), e.what()});
                rep.add_check(point_tag(sw2) + " executed", 0.0, 1.0, ">=");
                auto f = out.open(point_dir(sw2) + "/FAILED");
                f << e.what() << '\n';
            }
        }
    }

    switch (plan.kind) {
        case ExperimentKind::fig3_linear_saddle:
            all_rows_check(rep, "r");
            write_saddle_tables(out, acc, {"r"});
            if (!acc.x.empty()) saddle_plot(out, "fig3_linear_saddle.svg", "linear saddle", "window mean r", acc, {"r"});
            break;
        case ExperimentKind::fig5_relu_saddle:
            for (const char* q : {"r_plus", "r_minus", "k"}) all_rows_check(rep, q);
            write_saddle_tables(out, acc, {"r_plus", "r_minus", "k"});
            if (!acc.x.empty()) {
                SaddleAccum radii = acc;
                radii.measured.pop_back();
                radii.stderr_.pop_back();
                radii.predicted.pop_back();
                saddle_plot(out, "fig5_relu_saddle.svg", "relu saddle", "window mean", radii, {"r+", "r-"});
                SaddleAccum k;
                k.x = acc.x;
                k.measured = {acc.measured[2]};
                k.stderr_ = {acc.stderr_[2]};
                k.predicted = {acc.predicted[2]};
                saddle_plot(out, "fig5_relu_k.svg", "relu positive count", "window mean k", k, {"k"});
            }
            break;
        case ExperimentKind::fig1_tanh_meanfield:
            all_rows_check(rep, "r2_over_n");
            write_saddle_tables(out, acc, {"q_star"});
            if (!acc.x.empty())
                saddle_plot(out, "fig1_tanh_meanfield.svg", "tanh mean field", "window mean r^2/N", acc, {"q*"});
            break;
        case ExperimentKind::xi_fit:
            all_rows_check(rep, "xi");
            write_saddle_tables(out, acc, {"xi"});
            if (!acc.x.empty()) saddle_plot(out, "xi_fit.svg", "correlation length", "xi", acc, {"xi"});
            break;
        default: break;
    }

    {
        auto f = out.open("report.json");
        write_report_json(f, rep);
        auto g = out.open("report.csv");
        write_report_csv(g, rep);
    }
    outcome.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    nlohmann::ordered_json m;
    m["tool"] = "netlattice";
    m["version"] = kToolVersion;
    m["experiment"] = std::string(to_string(plan.kind));
    m["master_seed"] = plan.base.master_seed;
    m["config"] = to_config_text(plan.base);
    m["sweep"] = plan.sweep;
    m["tolerances"] = plan.tol;
    m["threads"] = plan.threads;
    m["method"] = std::string(to_string(plan.method));
    m["plan"] = to_plan_text(plan);
    m["wall_time_seconds"] = outcome.wall_seconds;
    m["failed_samples"] = outcome.failed_samples;
    auto fails = nlohmann::ordered_json::array();
    for (const auto& x : outcome.failures) fails.push_back({{"point", x.point}, {"code", x.code}, {"message", x.message}});
    m["failures"] = fails;
    m["verdict"] = rep.pass() ? "pass" : "fail";
    m["artifacts"] = outcome.artifacts;
    std::ofstream mf(root / "manifest.json", std::ios::binary);
    if (!mf) throw Error(ErrorCode::IoFailure, "cannot write manifest.json");
    mf << m.dump(2) << '\n';
    return outcome;
}

}  // namespace netlattice
