#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <sstream>

#include "netlattice/sampler.hpp"

using namespace netlattice;

namespace {

EnsembleConfig make(std::int64_t n, std::int64_t l, double sw2, Activation a, std::int64_t m, std::int64_t ws,
                    std::int64_t wl, std::uint64_t seed = 99) {
    ConfigCandidate c;
    c.width = n;
    c.depth = l;
    c.weight_variance = sw2;
    c.bias_variance = 0.01;
    c.activation = a;
    c.num_samples = m;
    c.window_start = ws;
    c.window_len = wl;
    c.master_seed = seed;
    return validate_config(c);
}

struct Moments {
    double mean = 0.0, se = 0.0;
};

Moments moments(const std::vector<double>& v) {
    double s = 0.0, ss = 0.0;
    for (double x : v) s += x;
    const double m = s / static_cast<double>(v.size());
    for (double x : v) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()))};
}

// Independent reference: Eigen matrices with std:: RNG, written straight from
// z^l = W^l phi(z^{l-1}) + b^l.
std::vector<double> reference_window_r(std::size_t n, std::size_t depth, double sw2, double sb2, std::size_t samples,
                                       std::size_t ws, std::size_t wl) {
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> out;
    for (std::size_t s = 0; s < samples; ++s) {
        Eigen::VectorXd z(n);
        for (std::size_t i = 0; i < n; ++i) z(i) = g(rng);
        double acc = 0.0;
        for (std::size_t l = 0; l < depth; ++l) {
            Eigen::MatrixXd w(n, n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) w(i, j) = g(rng) * std::sqrt(sw2 / static_cast<double>(n));
            Eigen::VectorXd b(n);
            for (std::size_t i = 0; i < n; ++i) b(i) = g(rng) * std::sqrt(sb2);
            z = w * z + b;
            if (l >= ws && l < ws + wl) acc += z.norm();
        }
        out.push_back(acc / static_cast<double>(wl));
    }
    return out;
}

}  // namespace

TEST_CASE("layer observables") {
    const std::vector<double> a{1.0, -1.0};
    auto o = compute_layer_observables(a);
    CHECK(o.r == doctest::Approx(std::sqrt(2.0)));
    CHECK(o.r_plus == 1.0);
    CHECK(o.r_minus == 1.0);
    CHECK(o.k == 1);

    const std::vector<double> zero{0.0, 0.0};
    o = compute_layer_observables(zero);
    CHECK(o.r == 0.0);
    CHECK(o.r_plus == 0.0);
    CHECK(o.r_minus == 0.0);
    CHECK(o.k == 0);

    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> z(10000);
    for (auto& v : z) v = g(rng);
    o = compute_layer_observables(z);
    double direct = 0.0;
    for (double v : z) direct += v * v;
    CHECK(std::abs(o.r * o.r - (o.r_plus * o.r_plus + o.r_minus * o.r_minus)) <= 1e-10 * o.r * o.r);
    CHECK(std::abs(o.r * o.r - direct) <= 1e-10 * direct);
}

TEST_CASE("trajectory shape and determinism") {
    const auto cfg = make(20, 64, 0.5, Activation::relu, 4, 32, 32);
    const auto a = sample_trajectory(cfg, 42, 0);
    const auto b = sample_trajectory(cfg, 42, 0);
    CHECK(a.layers.size() == 64);
    CHECK(a == b);
    CHECK(a.fingerprint == cfg.fingerprint());
    CHECK_FALSE(a == sample_trajectory(cfg, 43, 0));
    for (const auto& o : a.layers) {
        CHECK(std::abs(o.r * o.r - (o.r_plus * o.r_plus + o.r_minus * o.r_minus)) <= 1e-10 * o.r * o.r);
        if (o.k == 0) CHECK(o.r_plus == 0.0);
        if (o.k == 20) CHECK(o.r_minus == 0.0);
    }
}

TEST_CASE("ensemble is reproducible and independent of the thread count") {
    for (auto method : {PropagationMethod::dense, PropagationMethod::conditional}) {
        const auto cfg = make(30, 128, 0.7, Activation::linear, 37, 64, 64);
        const auto one = run_ensemble(cfg, {1, method});
        const auto again = run_ensemble(cfg, {1, method});
        const auto eight = run_ensemble(cfg, {8, method});
        REQUIRE(one.trajectories.size() == 37);
        CHECK(one.trajectories == again.trajectories);
        CHECK(one.trajectories == eight.trajectories);
        for (std::size_t i = 0; i < 37; ++i) {
            CHECK(one.trajectories[i].sample_index == i);
            CHECK(one.trajectories[i] ==
                  sample_trajectory(cfg, derive_sample_seed(cfg.master_seed(), i), i, method));
        }
    }
}

TEST_CASE("vanishing weights leave only the bias") {
    for (auto act : {Activation::linear, Activation::relu, Activation::tanh}) {
        const auto cfg = make(50, 64, 0.0, act, 200, 0, 64);
        const auto res = run_ensemble(cfg, {1, PropagationMethod::dense});
        std::vector<double> r2;
        for (const auto& t : res.trajectories) r2.push_back(window_means(t, 0, 64, 50).r2_over_n * 50.0);
        const auto m = moments(r2);
        CHECK(std::abs(m.mean - 50 * 0.01) < 4.0 * m.se);
    }
}

TEST_CASE("dense and conditional propagation agree with an independent reference") {
    // N = 20, L = 64, 10^4 samples, window = last 32 layers.
    const std::size_t m = 10000;
    const auto cfg = make(20, 64, 0.5, Activation::linear, static_cast<std::int64_t>(m), 32, 32, 7);
    std::vector<double> dense, cond;
    for_each_trajectory(cfg, {1, PropagationMethod::dense},
                        [&](Trajectory&& t) { dense.push_back(window_means(t, 32, 32, 20).r); });
    for_each_trajectory(cfg, {1, PropagationMethod::conditional},
                        [&](Trajectory&& t) { cond.push_back(window_means(t, 32, 32, 20).r); });
    const auto ref = reference_window_r(20, 64, 0.5, 0.01, m, 32, 32);
    const auto a = moments(dense), b = moments(cond), c = moments(ref);
    CHECK(std::abs(a.mean - c.mean) < 4.0 * std::hypot(a.se, c.se));
    CHECK(std::abs(b.mean - c.mean) < 4.0 * std::hypot(b.se, c.se));
    CHECK(std::abs(a.mean - b.mean) < 4.0 * std::hypot(a.se, b.se));
    // Finite-N shift below the saddle, r* = sqrt(20 * 0.01 / 0.5).
    CHECK(c.mean == doctest::Approx(std::sqrt(0.4)).epsilon(0.03));
}

TEST_CASE("linear window mean near the saddle") {
    const auto cfg = make(200, 1024, 0.5, Activation::linear, 50, 512, 512);
    std::vector<SampleWindowMeans> w;
    for_each_trajectory(cfg, {1, PropagationMethod::conditional},
                        [&](Trajectory&& t) { w.push_back(window_means(t, 512, 512, 200)); });
    const auto s = summarize_window(w);
    CHECK(s.r.mean == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("relu at unit weight variance: k at N/2, r+ and r- symmetric, stationary") {
    const auto cfg = make(200, 1024, 1.0, Activation::relu, 200, 512, 512);
    std::vector<Trajectory> ts;
    std::vector<SampleWindowMeans> w;
    for_each_trajectory(cfg, {1, PropagationMethod::conditional}, [&](Trajectory&& t) {
        w.push_back(window_means(t, 512, 512, 200));
        ts.push_back(std::move(t));
    });
    const auto s = summarize_window(w);
    CHECK(std::abs(s.k.mean - 100.0) < 3.0 * s.k.stderr_);
    CHECK(std::abs(s.r_plus.mean - s.r_minus.mean) < 3.0 * std::hypot(s.r_plus.stderr_, s.r_minus.stderr_));
    CHECK(std::abs(stationarity_z(ts, 512, 512)) < 3.0);
}

TEST_CASE("supercritical linear runs overflow with the layer index, ensemble keeps going") {
    const auto cfg = make(10, 1024, 1e4, Activation::linear, 3, 0, 512);
    try {
        sample_trajectory(cfg, 1, 0, PropagationMethod::conditional);
        FAIL("expected overflow");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NumericOverflow);
        CHECK(std::string(e.what()).find("layer") != std::string::npos);
    }
    const auto res = run_ensemble(cfg, {2, PropagationMethod::conditional});
    CHECK(res.trajectories.empty());
    CHECK(res.failures.size() == 3);
}

TEST_CASE("trajectory CSV round trip") {
    const auto cfg = make(8, 16, 0.5, Activation::relu, 3, 0, 16);
    const auto res = run_ensemble(cfg);
    std::stringstream ss;
    write_trajectories_csv(ss, res.trajectories);
    CHECK(ss.str().rfind("sample,layer,r,r_plus,r_minus,k\n", 0) == 0);
    const auto back = read_trajectories_csv(ss);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back[i].sample_index == res.trajectories[i].sample_index);
        CHECK(back[i].layers == res.trajectories[i].layers);
    }
    std::stringstream bad("sample,layer,r\n");
    CHECK_THROWS_AS(read_trajectories_csv(bad), Error);
}
