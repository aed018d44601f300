#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "netlattice/lattice.hpp"

using namespace netlattice;

namespace {

double central_difference(RingState s, const RingParams& p, std::size_t field, std::size_t site, double h) {
    const double x = s.at(field, static_cast<std::ptrdiff_t>(site));
    s.at(field, static_cast<std::ptrdiff_t>(site)) = x + h;
    const double up = local_energy(s, p, site);
    s.at(field, static_cast<std::ptrdiff_t>(site)) = x - h;
    const double down = local_energy(s, p, site);
    return (up - down) / (2.0 * h);
}

double site_mean(const MetropolisResult& r, std::size_t field) {
    const auto s = field_mean_series(r, field);
    double acc = 0.0;
    for (double v : s) acc += v;
    return acc / static_cast<double>(s.size());
}

}  // namespace

TEST_CASE("model tags") {
    for (auto t : {ModelTag::linear_radial, ModelTag::relu_radial, ModelTag::linear_quadratic, ModelTag::relu_quadratic})
        CHECK(parse_model_tag(to_string(t)) == t);
    CHECK(field_labels(ModelTag::relu_radial) == std::vector<std::string>{"r+", "r-", "k"});
    CHECK_THROWS_AS(parse_model_tag("ising"), Error);
}

TEST_CASE("ring indexing is periodic") {
    RingState s(ModelTag::linear_quadratic, 4);
    for (int l = 0; l < 4; ++l) s.at(0, l) = l;
    CHECK(s.at(0, -1) == 3.0);
    CHECK(s.at(0, 4) == 0.0);
    CHECK(s.at(0, -5) == 3.0);
}

TEST_CASE("quadratic energies vanish at zero and are positive elsewhere") {
    const RingParams p;
    for (auto t : {ModelTag::linear_quadratic, ModelTag::relu_quadratic}) {
        RingState s(t, 16);
        CHECK(ring_energy(s, p) == 0.0);
        std::mt19937_64 rng(1);
        std::normal_distribution<double> g;
        for (int rep = 0; rep < 50; ++rep) {
            for (std::size_t f = 0; f < s.num_fields(); ++f)
                for (int l = 0; l < 16; ++l) s.at(f, l) = g(rng);
            CHECK(ring_energy(s, p) > 0.0);
        }
    }
}

TEST_CASE("local energy collects the terms of one site") {
    const RingParams p{50.0, 0.7, 0.02};
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    for (auto t : {ModelTag::linear_radial, ModelTag::relu_radial, ModelTag::linear_quadratic, ModelTag::relu_quadratic}) {
        auto s = RingState::uniform_saddle(t, 8, p);
        for (std::size_t f = 0; f < s.num_fields(); ++f)
            for (int l = 0; l < 8; ++l) s.at(f, l) = (t == ModelTag::relu_radial && f == 2) ? 25.0 * u(rng) : u(rng);
        const double before = ring_energy(s, p);
        const double local_before = local_energy(s, p, 3);
        s.at(0, 3) *= 1.1;
        CHECK(ring_energy(s, p) - before == doctest::Approx(local_energy(s, p, 3) - local_before));
    }
    RingState one(ModelTag::linear_quadratic, 1);
    CHECK_THROWS_AS(local_energy(one, p, 0), Error);
}

TEST_CASE("saddle configurations are stationary") {
    for (double sw2 : {0.1, 0.5, 0.9}) {
        const RingParams p{200.0, sw2, 0.01};
        const auto s = RingState::uniform_saddle(ModelTag::linear_radial, 16, p);
        CHECK(s.at(0, 0) == doctest::Approx(linear_saddle(200, sw2, 0.01)));
        for (std::size_t l : {0u, 7u, 15u}) CHECK(std::abs(central_difference(s, p, 0, l, 1e-5)) <= 1e-6);
    }
    for (double sw2 : {0.2, 1.0, 1.8}) {
        const RingParams p{200.0, sw2, 0.01};
        const auto s = RingState::uniform_saddle(ModelTag::relu_radial, 16, p);
        CHECK(s.at(2, 0) == 100.0);
        for (std::size_t f = 0; f < 3; ++f)
            for (std::size_t l : {0u, 9u}) CHECK(std::abs(central_difference(s, p, f, l, 1e-5)) <= 1e-6);
    }
    // Away from the saddle the gradient is clearly nonzero.
    const RingParams p{200.0, 0.5, 0.01};
    auto off = RingState::uniform_saddle(ModelTag::linear_radial, 16, p);
    off.at(0, 4) *= 1.05;
    CHECK(std::abs(central_difference(off, p, 0, 4, 1e-5)) > 1.0);
}

TEST_CASE("domain violations name the site") {
    const RingParams p;
    auto s = RingState::uniform_saddle(ModelTag::linear_radial, 8, p);
    s.at(0, 5) = -1.0;
    try {
        ring_energy(s, p);
        FAIL("expected DomainViolation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DomainViolation);
        CHECK(std::string(e.what()).find("site 5") != std::string::npos);
    }
    auto r = RingState::uniform_saddle(ModelTag::relu_radial, 8, p);
    r.at(2, 2) = p.width;
    CHECK_THROWS_AS(check_domain(r, p), Error);
    r.at(2, 2) = 0.0;
    CHECK_THROWS_AS(check_domain(r, p), Error);
    MetropolisOptions o;
    CHECK_THROWS_AS(metropolis_run(p, r, o), Error);
}

TEST_CASE("run options are validated") {
    const RingParams p;
    const RingState s(ModelTag::linear_quadratic, 8);
    MetropolisOptions o;
    o.sweeps = 100;
    o.burn_in = 100;
    CHECK_THROWS_AS(metropolis_run(p, s, o), Error);
    o.sweeps = 200;
    o.thin = 0;
    CHECK_THROWS_AS(metropolis_run(p, s, o), Error);
}

TEST_CASE("tiny proposals are always accepted") {
    const RingParams p;
    MetropolisChain c(p, RingState(ModelTag::linear_quadratic, 16), 3, 1e-9);
    for (int i = 0; i < 200; ++i) c.sweep();
    CHECK(c.accepted()[0] == c.proposed()[0]);
    CHECK(c.proposed()[0] == 200u * 16u);
}

TEST_CASE("chain energy is tracked incrementally") {
    const RingParams p{40.0, 1.2, 0.05};
    MetropolisChain c(p, RingState::uniform_saddle(ModelTag::relu_radial, 8, p), 4, 0.05);
    for (int i = 0; i < 500; ++i) c.sweep();
    CHECK(c.energy() == doctest::Approx(ring_energy(c.state(), p)).epsilon(1e-9));
    check_domain(c.state(), p);
}

TEST_CASE("random single-site updates sample the Gaussian on a 3-site ring") {
    // E = (D/sb) sum [(1 + s^2) e_l^2 - 2 s e_l e_{l-1}] = e^T P e / 2.
    const double s = 0.5, sb = 1.0, d = 1.0 - s;
    const RingParams p{10.0, s, sb};
    Eigen::Matrix3d prec;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) prec(i, j) = 2.0 * d / sb * (i == j ? 1.0 + s * s : -s);
    const Eigen::Matrix3d cov = prec.inverse();

    MetropolisChain c(p, RingState(ModelTag::linear_quadratic, 3), 5, 1.0);
    for (int i = 0; i < 20000; ++i) c.random_update();
    Eigen::Matrix3d acc = Eigen::Matrix3d::Zero();
    const int n = 400000;
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k) c.random_update();
        Eigen::Vector3d e(c.state().at(0, 0), c.state().at(0, 1), c.state().at(0, 2));
        acc += e * e.transpose();
    }
    acc /= n;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(std::abs(acc(i, j) - cov(i, j)) < 0.03 * cov(0, 0));
}

TEST_CASE("runs are deterministic in the seed and adapt widths during burn-in") {
    const RingParams p;
    MetropolisOptions o;
    o.sweeps = 3000;
    o.burn_in = 1000;
    o.proposal_width = 5.0;
    const RingState init(ModelTag::linear_quadratic, 16);
    const auto a = metropolis_run(p, init, o);
    const auto b = metropolis_run(p, init, o);
    CHECK(a.samples == b.samples);
    CHECK(a.samples.size() == 200);
    CHECK(a.sample_sweeps.front() == 1009);
    CHECK(a.widths[0] < 1.0);
    CHECK(a.acceptance[0] == doctest::Approx(0.4).epsilon(0.25));
    o.seed = 2;
    CHECK_FALSE(metropolis_run(p, init, o).samples == a.samples);
}

TEST_CASE("radial chains sit at the saddle") {
    const RingParams lp{200.0, 0.5, 0.01};
    MetropolisOptions o;
    o.sweeps = 6000;
    o.burn_in = 1000;
    o.proposal_width = 0.1;
    const auto lin = metropolis_run(lp, RingState::uniform_saddle(ModelTag::linear_radial, 256, lp), o);
    CHECK(site_mean(lin, 0) == doctest::Approx(2.0).epsilon(0.02));

    const RingParams rp{200.0, 1.0, 0.01};
    o.sweeps = 11000;
    const auto relu = metropolis_run(rp, RingState::uniform_saddle(ModelTag::relu_radial, 64, rp), o);
    CHECK(site_mean(relu, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(0.03));
    CHECK(site_mean(relu, 1) == doctest::Approx(std::sqrt(2.0)).epsilon(0.03));
    CHECK(site_mean(relu, 2) == doctest::Approx(100.0).epsilon(0.01));
}

TEST_CASE("quadratic chain reproduces the analytic mode variances") {
    const RingParams p{200.0, 0.5, 0.01};
    MetropolisOptions o;
    o.sweeps = 110000;
    o.burn_in = 10000;
    o.proposal_width = 0.05;
    const auto r = metropolis_run(p, RingState(ModelTag::linear_quadratic, 64), o);
    const auto cs = chain_spectrum(r);
    std::vector<double> dev;
    std::size_t within = 0;
    for (std::size_t i = 1; i < 64; ++i) {
        const double pred = linear_mode_variance(cs.spectrum.q[i], 0.5, 0.01, 64);
        dev.push_back(std::abs(cs.spectrum.variance[i] / pred - 1.0));
        if (std::abs(cs.spectrum.variance[i] - pred) <= 4.0 * cs.spectrum.stderr_[i]) ++within;
        CHECK(cs.tau[i] >= 0.4);
        CHECK(cs.ess[i] <= static_cast<double>(r.samples.size()) * 1.25);
    }
    std::nth_element(dev.begin(), dev.begin() + dev.size() / 2, dev.end());
    CHECK(dev[dev.size() / 2] <= 0.05);
    CHECK(within >= 60);
}

TEST_CASE("integrated autocorrelation time") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g;
    std::vector<double> iid(100000);
    for (auto& v : iid) v = g(rng);
    const auto a = integrated_autocorrelation(iid);
    CHECK(a.tau == doctest::Approx(0.5).epsilon(0.1));
    CHECK(a.ess == doctest::Approx(100000.0 / (2.0 * a.tau)));

    std::vector<double> ar(100000);
    double x = 0.0;
    for (auto& v : ar) {
        x = 0.9 * x + std::sqrt(1.0 - 0.81) * g(rng);
        v = x;
    }
    const auto b = integrated_autocorrelation(ar);
    CHECK(b.tau == doctest::Approx(9.5).epsilon(0.2));
    CHECK(b.window >= 5.0 * b.tau);

    std::vector<double> shorty(999, 1.0);
    try {
        integrated_autocorrelation(shorty);
        FAIL("expected SeriesTooShort");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SeriesTooShort);
    }
}

TEST_CASE("sample dump and run summary") {
    const RingParams p;
    MetropolisOptions o;
    o.sweeps = 10200;
    o.burn_in = 200;
    o.thin = 1;
    const auto r = metropolis_run(p, RingState(ModelTag::relu_quadratic, 4), o);
    std::ostringstream csv;
    write_samples_csv(csv, r);
    const auto text = csv.str();
    CHECK(text.rfind("sweep,site,field,value\n200,0,eps+,", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 10000 * 4 * 3);

    std::ostringstream js;
    write_run_summary(js, r);
    const auto j = nlohmann::json::parse(js.str());
    CHECK(j["model"] == "relu_quadratic");
    CHECK(j["samples"] == 10000);
    REQUIRE(j["fields"].size() == 3);
    CHECK(j["fields"][0]["field"] == "eps+");
    CHECK(j["fields"][0]["tau_int"].get<double>() > 0.0);
    CHECK(j.contains("energy_tau_int"));
}
