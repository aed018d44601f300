#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "netlattice/report.hpp"

using namespace netlattice;

TEST_CASE("identical inputs pass, a 1.5x scaling fails") {
    const std::vector<double> x{0.1, 0.3, 0.5}, pred{1.0, 2.0, 3.0}, se{0.01, 0.01, 0.01};
    Tolerances tol{0.02, 0.0, 1.0};
    auto r = compare(x, pred, se, pred, tol, "r");
    CHECK(r.pass());
    CHECK(r.rows.size() == 3);
    CHECK(r.failed_rows() == 0);
    for (const auto& row : r.rows) CHECK(row.rel_dev == 0.0);

    std::vector<double> scaled;
    for (double v : pred) scaled.push_back(1.5 * v);
    r = compare(x, scaled, se, pred, tol, "r");
    CHECK_FALSE(r.pass());
    CHECK(r.failed_rows() == 3);
    CHECK(r.rows[1].rel_dev == doctest::Approx(0.5));
    CHECK(r.rows[1].z == doctest::Approx(100.0));
}

TEST_CASE("the looser bound decides") {
    ComparisonReport r;
    auto& a = r.add_row("p", "v", 0.0, 1.0, 1.03, 0.01, Tolerances{0.05, 2.0, 1.0});
    CHECK(a.pass);
    CHECK(a.rule == "relative");
    auto& b = r.add_row("p", "v", 0.0, 1.0, 1.3, 0.1, Tolerances{0.05, 4.0, 1.0});
    CHECK(b.pass);
    CHECK(b.rule == "stderr");
    auto& c = r.add_row("p", "v", 0.0, 1.0, 1.3, 0.01, Tolerances{0.05, 4.0, 1.0});
    CHECK_FALSE(c.pass);
}

TEST_CASE("pass fraction and non-gating checks") {
    const std::vector<double> x{1, 2, 3, 4}, pred{1, 1, 1, 1}, meas{1, 1, 1, 2}, se{0.1, 0.1, 0.1, 0.1};
    auto r = compare(x, meas, se, pred, Tolerances{0.0, 4.0, 0.75});
    CHECK(r.pass());
    CHECK(r.failed_rows() == 1);
    r = compare(x, meas, se, pred, Tolerances{0.0, 4.0, 0.8});
    CHECK_FALSE(r.pass());

    ComparisonReport d;
    d.add_check("diagnostic", 0.1, 0.5, ">=", false);
    CHECK(d.pass());
    d.add_check("real", 0.6, 0.5, "<=");
    CHECK_FALSE(d.pass());
}

TEST_CASE("grid mismatch") {
    const std::vector<double> a{1, 2, 3}, b{1, 2};
    try {
        compare(a, a, b, a, Tolerances{});
        FAIL("expected GridMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::GridMismatch);
    }
}

TEST_CASE("spectrum comparison over 0 < q <= pi") {
    ConfigCandidate c;
    c.window_len = 16;
    c.window_start = 0;
    const auto th = predict(validate_config(c));
    SpectrumEstimate s;
    s.q = th.q;
    s.variance = th.linear_variance;
    for (double v : s.variance) s.stderr_.push_back(0.1 * v + 1e-30);
    s.excluded.assign(16, false);
    s.excluded[0] = true;
    s.count.assign(16, 10);
    auto r = compare(s, th, Tolerances{0.0, 4.0, 0.95});
    CHECK(r.rows.size() == 8);
    CHECK(r.pass());
    CHECK(loglog_correlation(s, th) == doctest::Approx(1.0));
    s.q.pop_back();
    CHECK_THROWS_AS(compare(s, th, Tolerances{}), Error);
}

TEST_CASE("median") {
    CHECK(median({3, 1, 2}) == 2.0);
    CHECK(median({4, 1, 2, 3}) == 2.5);
    CHECK(std::isnan(median({})));
}

TEST_CASE("report serialisation") {
    const std::vector<double> x{0.5}, pred{2.0}, meas{2.01}, se{0.01};
    auto r = compare(x, meas, se, pred, Tolerances{0.02, 0.0, 1.0}, "r", "weight_variance=0.5");
    r.experiment = "fig3_linear_saddle";
    std::ostringstream js;
    write_report_json(js, r);
    const auto j = nlohmann::json::parse(js.str());
    CHECK(j["experiment"] == "fig3_linear_saddle");
    CHECK(j["verdict"] == "pass");
    CHECK(j["rows"][0]["point"] == "weight_variance=0.5");
    std::ostringstream cs;
    write_report_csv(cs, r);
    CHECK(cs.str().rfind("point,quantity,x,predicted,measured,stderr,rel_dev,z,tolerance,z_tolerance,rule,pass\n", 0) == 0);
}
