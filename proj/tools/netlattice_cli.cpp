#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>

#include "netlattice/experiment.hpp"
#include "netlattice/format.hpp"
#include "netlattice/lattice.hpp"
#include "netlattice/plot.hpp"
#include "netlattice/report.hpp"
#include "netlattice/sampler.hpp"
#include "netlattice/spectral.hpp"
#include "netlattice/theory.hpp"

namespace fs = std::filesystem;
using namespace netlattice;

namespace {

const char* kConfigKeys[] = {"width",       "depth",       "weight_variance", "bias_variance", "activation",
                             "num_samples", "master_seed", "window_start",    "window_len"};

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    unsigned threads = 1;
    std::string method;
    std::map<std::string, std::string> overrides;
};

void add_common(CLI::App* sub, CommonOptions& o, bool with_config_keys = true) {
    sub->add_option("--config", o.config, "config file (key = value)");
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--method", o.method, "propagation: dense or conditional");
    if (!with_config_keys) return;
    for (const char* k : kConfigKeys) {
        const std::string key = k;
        sub->add_option_function<std::string>(
            "--" + key, [&o, key](const std::string& v) { o.overrides[key] = v; }, "override config value");
    }
}

ConfigCandidate candidate_of(const CommonOptions& o) {
    ConfigCandidate c;
    if (!o.config.empty()) c = load_config_file(o.config, c);
    for (const auto& [k, v] : o.overrides) set_config_value(c, k, v);
    if (o.seed) c.master_seed = *o.seed;
    return c;
}

fs::path out_dir(const CommonOptions& o, const std::string& fallback) {
    fs::path p = o.out.empty() ? fs::path(fallback) : fs::path(o.out);
    fs::create_directories(p);
    return p;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + p.string());
    return f;
}

int cmd_theory(const CommonOptions& o) {
    const auto cfg = validate_config(candidate_of(o));
    const auto pred = predict(cfg);
    nlohmann::ordered_json j;
    j["activation"] = std::string(to_string(cfg.activation()));
    j["fingerprint"] = cfg.fingerprint();
    j["q_star"] = meanfield_fixed_point(cfg.activation(), cfg.weight_variance(), cfg.bias_variance());
    if (cfg.activation() == Activation::relu) {
        j["r_plus_star"] = pred.relu->r_plus;
        j["r_minus_star"] = pred.relu->r_minus;
        j["k_star"] = pred.relu->k;
    } else {
        j["r_star"] = *pred.r_star;
    }
    if (cfg.activation() != Activation::tanh) {
        const auto model = cfg.activation() == Activation::linear ? FieldModel::linear : FieldModel::relu;
        auto eft = nlohmann::ordered_json::object();
        for (const auto& t : eft_coefficients(model, cfg.weight_variance(), cfg.bias_variance())) eft[t.term] = t.coefficient;
        j["eft"] = eft;
    }
    if (cfg.activation() == Activation::linear) j["xi"] = pred.xi;
    if (o.out.empty()) {
        std::cout << j.dump(2) << '\n';
        return 0;
    }
    const auto dir = out_dir(o, ".");
    auto f = open_out(dir / "theory.json");
    f << j.dump(2) << '\n';
    if (cfg.activation() != Activation::tanh) {
        auto g = open_out(dir / "theory.csv");
        if (cfg.activation() == Activation::linear)
            write_linear_theory_csv(g, pred);
        else
            write_relu_theory_csv(g, pred);
    }
    std::cout << "wrote " << (dir / "theory.json").string() << '\n';
    return 0;
}

int cmd_simulate(const CommonOptions& o) {
    const auto cfg = validate_config(candidate_of(o));
    const auto dir = out_dir(o, "simulate");
    auto f = open_out(dir / "trajectories.csv");
    f << "sample,layer,r,r_plus,r_minus,k\n";
    std::vector<SampleWindowMeans> means;
    const auto failures = for_each_trajectory(
        cfg, {o.threads, parse_propagation_method(o.method.empty() ? "dense" : o.method)}, [&](Trajectory&& t) {
            write_trajectory_rows(f, t);
            means.push_back(window_means(t, cfg.window_start(), cfg.window_len(), cfg.width()));
        });
    {
        auto c = open_out(dir / "config.txt");
        c << to_config_text(cfg.candidate());
    }
    if (!failures.empty()) {
        auto g = open_out(dir / "failed_samples.csv");
        g << "sample,message\n";
        for (const auto& x : failures) g << x.sample_index << ",\"" << x.message << "\"\n";
    }
    std::cout << means.size() << " trajectories, " << failures.size() << " failed\n";
    if (means.empty()) return 2;
    const auto s = summarize_window(means);
    std::cout << "window mean r = " << format_double(s.r.mean) << " +- " << format_double(s.r.stderr_) << '\n';
    if (cfg.activation() == Activation::relu)
        std::cout << "window mean r_plus = " << format_double(s.r_plus.mean) << ", r_minus = "
                  << format_double(s.r_minus.mean) << ", k = " << format_double(s.k.mean) << '\n';
    return 0;
}

int cmd_spectrum(const CommonOptions& o, const std::string& trajectories, double fit_qmax) {
    const auto cfg = validate_config(candidate_of(o));
    std::ifstream in(trajectories);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + trajectories);
    const auto trajs = read_trajectories_csv(in);
    const auto pred = predict(cfg);
    std::vector<ModeSet> modes;
    for (const auto& t : trajs) modes.push_back(mode_set(fluctuation_series(t, pred, cfg)));
    const auto dir = out_dir(o, ".");
    if (cfg.activation() == Activation::relu) {
        auto cs = estimate_cross_spectrum(modes);
        auto f = open_out(dir / "cross_spectrum.csv");
        write_cross_spectrum_csv(f, cs);
        std::cout << "wrote " << (dir / "cross_spectrum.csv").string() << " (" << modes.size() << " samples)\n";
        return 0;
    }
    auto spec = estimate_spectrum(modes);
    auto f = open_out(dir / "spectrum.csv");
    write_spectrum_csv(f, spec);
    std::cout << "wrote " << (dir / "spectrum.csv").string() << " (" << modes.size() << " samples)\n";
    if (fit_qmax > 0.0) {
        const auto fit = fit_lorentzian(spec, fit_qmax);
        std::cout << "xi_fit = " << format_double(fit.xi) << " +- " << format_double(fit.xi_stderr) << " over "
                  << fit.modes << " modes\n";
    }
    return 0;
}

struct McmcCli {
    std::string model = "linear_quadratic";
    std::size_t sites = 64;
    std::size_t sweeps = 110000;
    std::size_t burn_in = 10000;
    std::size_t thin = 10;
    double proposal_width = 0.5;
    bool no_adapt = false;
    bool dump = false;
};

int cmd_mcmc(const CommonOptions& o, const McmcCli& m) {
    const auto c = candidate_of(o);
    const auto cfg = validate_config(c);
    const auto params = ring_params(cfg);
    const auto tag = parse_model_tag(m.model);
    MetropolisOptions opt;
    opt.sweeps = m.sweeps;
    opt.burn_in = m.burn_in;
    opt.thin = m.thin;
    opt.proposal_width = m.proposal_width;
    opt.adapt = !m.no_adapt;
    opt.seed = c.master_seed;
    const auto res = metropolis_run(params, RingState::uniform_saddle(tag, m.sites, params), opt);
    const auto dir = out_dir(o, "mcmc");
    {
        auto f = open_out(dir / "run_summary.json");
        write_run_summary(f, res);
    }
    if (m.dump) {
        auto f = open_out(dir / "samples.csv");
        write_samples_csv(f, res);
    }
    if (is_power_of_two(m.sites) && res.samples.size() >= 1000) {
        auto f = open_out(dir / "spectrum.csv");
        f << "field,q,var,stderr,tau_int,ess\n";
        for (std::size_t fld = 0; fld < res.labels.size(); ++fld) {
            const auto cs = chain_spectrum(res, fld);
            for (std::size_t i = 0; i < cs.spectrum.q.size(); ++i)
                f << res.labels[fld] << ',' << format_double(cs.spectrum.q[i]) << ','
                  << format_double(cs.spectrum.variance[i]) << ',' << format_double(cs.spectrum.stderr_[i]) << ','
                  << format_double(cs.tau[i]) << ',' << format_double(cs.ess[i]) << '\n';
        }
    }
    for (std::size_t f = 0; f < res.labels.size(); ++f)
        std::cout << res.labels[f] << ": acceptance " << format_double(res.acceptance[f]) << ", width "
                  << format_double(res.widths[f]) << '\n';
    std::cout << res.samples.size() << " samples kept\n";
    return 0;
}

int cmd_compare(const CommonOptions& o, const std::string& measured, const Tolerances& tol) {
    const auto cfg = validate_config(candidate_of(o));
    std::ifstream in(measured);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + measured);
    const auto spec = read_spectrum_csv(in);
    const auto pred = predict(cfg);
    auto rep = compare(spec, pred, tol);
    rep.experiment = "compare";
    const auto dir = out_dir(o, ".");
    auto f = open_out(dir / "report.json");
    write_report_json(f, rep);
    auto g = open_out(dir / "report.csv");
    write_report_csv(g, rep);
    for (const auto& c : rep.checks)
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " = " << format_double(c.value) << ' ' << c.relation << ' '
                  << format_double(c.threshold) << '\n';
    return rep.pass() ? 0 : 1;
}

int cmd_run(const CommonOptions& o, const std::string& plan_path, const std::vector<std::string>& sets) {
    auto plan = load_plan_file(plan_path);
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::ParseError, "--set expects key=value, got " + s);
        set_plan_value(plan, trim(std::string_view(s).substr(0, eq)), std::string_view(s).substr(eq + 1));
    }
    for (const auto& [k, v] : o.overrides) set_config_value(plan.base, k, v);
    if (o.seed) plan.base.master_seed = *o.seed;
    if (!o.out.empty()) plan.out_dir = o.out;
    if (o.threads != 1) plan.threads = o.threads;
    if (!o.method.empty()) plan.method = parse_propagation_method(o.method);
    const auto outcome = run_experiment(plan);
    for (const auto& c : outcome.report.checks)
        std::cout << (c.pass ? "PASS " : "FAIL ") << (c.gating ? "" : "[info] ") << c.name << " = "
                  << format_double(c.value) << ' ' << c.relation << ' ' << format_double(c.threshold) << '\n';
    for (const auto& f : outcome.failures) std::cout << "ERROR " << f.point << ": " << f.message << '\n';
    std::cout << "verdict: " << (outcome.report.pass() ? "pass" : "fail") << " (" << format_double(outcome.wall_seconds)
              << " s, artifacts in " << plan.out_dir << ")\n";
    return outcome.exit_code();
}

std::vector<std::vector<double>> read_columns(const std::string& path, const std::vector<std::string>& names) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, path + " is empty");
    const auto header = split(trim(line), ',');
    std::vector<std::size_t> idx;
    for (const auto& n : names) {
        auto it = std::find(header.begin(), header.end(), std::string_view(n));
        if (it == header.end()) throw Error(ErrorCode::ParseError, "column '" + n + "' not in " + path);
        idx.push_back(static_cast<std::size_t>(it - header.begin()));
    }
    std::vector<std::vector<double>> cols(names.size());
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto cells = split(trim(line), ',');
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (idx[i] >= cells.size()) throw Error(ErrorCode::ParseError, "short row in " + path);
            cols[i].push_back(parse_double(cells[idx[i]]));
        }
    }
    return cols;
}

int cmd_plot(const std::string& csv, const std::string& x, const std::string& ys, const AxesSpec& axes,
             const std::string& path) {
    std::vector<std::string> names{x};
    for (auto y : split(ys, ','))
        if (!trim(y).empty()) names.emplace_back(trim(y));
    const auto cols = read_columns(csv, names);
    static const char* palette[] = {"#1f77b4", "#000000", "#d62728", "#2ca02c", "#9467bd"};
    std::vector<PlotSeries> series;
    for (std::size_t i = 1; i < names.size(); ++i) {
        PlotSeries s;
        s.label = names[i];
        s.x = cols[0];
        s.y = cols[i];
        s.color = palette[(i - 1) % 5];
        s.dashed = i > 1;
        series.push_back(std::move(s));
    }
    AxesSpec a = axes;
    if (a.xlabel.empty()) a.xlabel = x;
    emit_plot(series, a, path);
    std::cout << "wrote " << path << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"netlattice: random deep networks as ring-lattice field theories"};
    app.require_subcommand(1);

    CommonOptions theory_o, sim_o, spec_o, mcmc_o, cmp_o, run_o;
    auto* theory = app.add_subcommand("theory", "saddle, mean-field and per-q predictions");
    add_common(theory, theory_o);

    auto* simulate = app.add_subcommand("simulate", "sample an ensemble and dump trajectories");
    add_common(simulate, sim_o);

    std::string trajectories = "trajectories.csv";
    double fit_qmax = 0.0;
    auto* spectrum = app.add_subcommand("spectrum", "fluctuation spectrum of dumped trajectories");
    add_common(spectrum, spec_o);
    spectrum->add_option("--trajectories", trajectories, "trajectory CSV")->check(CLI::ExistingFile);
    spectrum->add_option("--fit-qmax", fit_qmax, "also fit a Lorentzian up to this q (linear)");

    McmcCli mc;
    auto* mcmc = app.add_subcommand("mcmc", "Metropolis sampling of a ring energy");
    add_common(mcmc, mcmc_o);
    mcmc->add_option("--model", mc.model, "linear_radial, relu_radial, linear_quadratic or relu_quadratic");
    mcmc->add_option("--sites", mc.sites, "ring length");
    mcmc->add_option("--sweeps", mc.sweeps, "total sweeps including burn-in");
    mcmc->add_option("--burn-in", mc.burn_in, "burn-in sweeps");
    mcmc->add_option("--thin", mc.thin, "keep every n-th sweep");
    mcmc->add_option("--proposal-width", mc.proposal_width, "initial proposal width");
    mcmc->add_flag("--no-adapt", mc.no_adapt, "keep the proposal width fixed");
    mcmc->add_flag("--dump", mc.dump, "write samples.csv");

    std::string measured;
    Tolerances tol;
    tol.min_pass_fraction = 0.95;
    auto* cmp = app.add_subcommand("compare", "compare a spectrum CSV with the linear prediction");
    add_common(cmp, cmp_o);
    cmp->add_option("--measured", measured, "spectrum CSV (q,var,stderr,kurtosis,n)")->required()->check(CLI::ExistingFile);
    cmp->add_option("--tol-relative", tol.relative, "relative tolerance");
    cmp->add_option("--tol-z", tol.z, "standard-error tolerance");
    cmp->add_option("--min-fraction", tol.min_pass_fraction, "required pass fraction");

    std::string plan_path;
    std::vector<std::string> sets;
    auto* run = app.add_subcommand("run", "run a full experiment plan");
    add_common(run, run_o);
    run->add_option("--plan", plan_path, "plan file")->required()->check(CLI::ExistingFile);
    run->add_option("--set", sets, "plan override key=value (repeatable)");

    std::string csv, xcol, ycols, svg;
    AxesSpec axes;
    auto* plot = app.add_subcommand("plot", "SVG plot of CSV columns");
    plot->add_option("--csv", csv, "input CSV")->required()->check(CLI::ExistingFile);
    plot->add_option("--x", xcol, "x column")->required();
    plot->add_option("--y", ycols, "comma separated y columns")->required();
    plot->add_option("--out", svg, "output SVG")->required();
    plot->add_option("--title", axes.title);
    plot->add_option("--ylabel", axes.ylabel);
    plot->add_flag("--log-x", axes.log_x);
    plot->add_flag("--log-y", axes.log_y);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*theory) return cmd_theory(theory_o);
        if (*simulate) return cmd_simulate(sim_o);
        if (*spectrum) return cmd_spectrum(spec_o, trajectories, fit_qmax);
        if (*mcmc) return cmd_mcmc(mcmc_o, mc);
        if (*cmp) return cmd_compare(cmp_o, measured, tol);
        if (*run) return cmd_run(run_o, plan_path, sets);
        if (*plot) return cmd_plot(csv, xcol, ycols, axes, svg);
    } catch (const ConfigError& e) {
        std::cerr << "invalid configuration:\n";
        for (const auto& v : e.violations()) std::cerr << "  " << to_string(v.code) << ": " << v.message << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
