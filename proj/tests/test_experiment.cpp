#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "netlattice/experiment.hpp"

using namespace netlattice;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("netlattice_exp_" + name);
    fs::remove_all(p);
    return p;
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

ExperimentPlan small(ExperimentKind k, const std::string& name) {
    auto plan = default_plan(k);
    plan.base.width = 50;
    plan.base.depth = 256;
    plan.base.num_samples = 40;
    plan.base.window_start = 128;
    plan.base.window_len = 128;
    plan.method = PropagationMethod::conditional;
    plan.out_dir = scratch(name).string();
    return plan;
}

}  // namespace

TEST_CASE("experiment kinds round trip") {
    for (auto k : {ExperimentKind::fig3_linear_saddle, ExperimentKind::fig4_linear_spectrum,
                   ExperimentKind::fig5_relu_saddle, ExperimentKind::fig6_relu_cross_spectrum,
                   ExperimentKind::fig1_tanh_meanfield, ExperimentKind::mcmc_oracle, ExperimentKind::xi_fit})
        CHECK(parse_experiment_kind(to_string(k)) == k);
    CHECK_THROWS_AS(parse_experiment_kind("fig9"), Error);
}

TEST_CASE("defaults carry the criterion tolerances") {
    auto p = default_plan(ExperimentKind::fig3_linear_saddle);
    CHECK(p.tolerance("relative") == 0.02);
    CHECK(p.base.activation == Activation::linear);
    p = default_plan(ExperimentKind::fig6_relu_cross_spectrum);
    CHECK(p.base.activation == Activation::relu);
    CHECK(p.sweep == std::vector<double>{0.02, 0.98, 1.94});
    CHECK(p.tolerance("diag_median") == 0.2);
    CHECK_THROWS_AS(p.tolerance("nonsense"), Error);
    p = default_plan(ExperimentKind::fig1_tanh_meanfield);
    CHECK(p.base.width == 500);
    CHECK(p.base.bias_variance == 0.001);
}

TEST_CASE("plan text") {
    const auto p = parse_plan_text(
        "sweep = 0.2, 0.4\nexperiment = fig5_relu_saddle\nwidth = 64\ntol.relative = 0.1\nthreads = 3\n"
        "method = conditional\nmcmc.sites = 32\n");
    CHECK(p.kind == ExperimentKind::fig5_relu_saddle);
    CHECK(p.sweep == std::vector<double>{0.2, 0.4});
    CHECK(p.base.width == 64);
    CHECK(p.base.activation == Activation::relu);
    CHECK(p.tolerance("relative") == 0.1);
    CHECK(p.tolerance("k_relative") == 0.01);
    CHECK(p.threads == 3);
    CHECK(p.method == PropagationMethod::conditional);
    CHECK(p.mcmc.sites == 32);
    const auto back = parse_plan_text(to_plan_text(p));
    CHECK(back.sweep == p.sweep);
    CHECK(back.base == p.base);
    CHECK(back.tol == p.tol);
    CHECK_THROWS_AS(parse_plan_text("bogus = 1\n"), Error);
    CHECK_THROWS_AS(parse_plan_text("dump_trajectories = maybe\n"), Error);
}

TEST_CASE("supercritical sweeps are rejected before running") {
    auto p = default_plan(ExperimentKind::fig4_linear_spectrum);
    p.sweep = {0.5, 1.2};
    try {
        validate_plan(p);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.has(ErrorCode::Supercritical));
    }
    p = default_plan(ExperimentKind::fig5_relu_saddle);
    p.sweep = {2.5};
    CHECK_THROWS_AS(validate_plan(p), ConfigError);
    p = default_plan(ExperimentKind::fig3_linear_saddle);
    p.base.activation = Activation::relu;
    CHECK_THROWS_AS(validate_plan(p), ConfigError);
    p = default_plan(ExperimentKind::mcmc_oracle);
    p.mcmc.sites = 48;
    CHECK_THROWS_AS(validate_plan(p), ConfigError);
    p = default_plan(ExperimentKind::fig3_linear_saddle);
    p.base.window_len = 100;
    try {
        validate_plan(p);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.has(ErrorCode::WindowNotPowerOfTwo));
    }
}

TEST_CASE("point configs") {
    const auto p = default_plan(ExperimentKind::fig3_linear_saddle);
    const auto c = point_config(p, 0.7);
    CHECK(c.weight_variance() == 0.7);
    CHECK(c.width() == 200);
}

TEST_CASE("a small saddle experiment writes its artifacts") {
    auto plan = small(ExperimentKind::fig3_linear_saddle, "fig3");
    plan.sweep = {0.3, 0.6};
    plan.tol["relative"] = 0.2;
    const auto out = run_experiment(plan);
    CHECK(out.failures.empty());
    CHECK(out.exit_code() == 0);
    CHECK(out.report.rows.size() == 2);
    const fs::path root = plan.out_dir;
    for (const char* f : {"report.json", "report.csv", "manifest.json", "theory.csv", "measured.csv"})
        CHECK(fs::exists(root / f));
    CHECK(fs::exists(root / "sw2_0.3" / "window_means.csv"));
    const auto m = read_json(root / "manifest.json");
    CHECK(m["experiment"] == "fig3_linear_saddle");
    CHECK(m["verdict"] == "pass");
    CHECK(m["version"] == kToolVersion);
    for (const auto& a : m["artifacts"]) CHECK(fs::exists(root / a.get<std::string>()));

    plan.tol["relative"] = 1e-6;
    plan.out_dir = scratch("fig3_tight").string();
    CHECK(run_experiment(plan).exit_code() == 1);
}

TEST_CASE("spectrum and cross-spectrum experiments run") {
    auto lin = small(ExperimentKind::fig4_linear_spectrum, "fig4");
    lin.sweep = {0.5};
    auto a = run_experiment(lin);
    CHECK(a.failures.empty());
    CHECK(fs::exists(fs::path(lin.out_dir) / "sw2_0.5" / "theory.csv"));
    CHECK(a.report.rows.size() == 64);

    auto relu = small(ExperimentKind::fig6_relu_cross_spectrum, "fig6");
    relu.sweep = {0.98};
    auto b = run_experiment(relu);
    CHECK(b.failures.empty());
    CHECK(fs::exists(fs::path(relu.out_dir) / "report.json"));

    auto xi = small(ExperimentKind::xi_fit, "xi");
    xi.sweep = {0.5};
    auto c = run_experiment(xi);
    CHECK(c.failures.empty());
    CHECK(fs::exists(fs::path(xi.out_dir) / "sw2_0.5" / "xi_fit.csv"));
}

TEST_CASE("a small mcmc experiment runs") {
    auto plan = default_plan(ExperimentKind::mcmc_oracle);
    plan.mcmc.sites = 16;
    plan.mcmc.sweeps = 11000;
    plan.mcmc.burn_in = 1000;
    plan.out_dir = scratch("mcmc").string();
    const auto out = run_experiment(plan);
    CHECK(out.failures.empty());
    CHECK(out.exit_code() != 2);
    CHECK(fs::exists(fs::path(plan.out_dir) / "manifest.json"));
}
