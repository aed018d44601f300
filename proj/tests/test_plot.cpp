#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "netlattice/error.hpp"
#include "netlattice/plot.hpp"

using namespace netlattice;

namespace {

std::size_t count(const std::string& s, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
    return n;
}

}  // namespace

TEST_CASE("one polyline per series, byte-stable output") {
    std::vector<PlotSeries> s(2);
    s[0].label = "measured";
    s[0].x = {1, 2, 3};
    s[0].y = {1, 4, 9};
    s[1].label = "theory";
    s[1].x = {1, 2, 3};
    s[1].y = {1, 4, 8};
    s[1].dashed = true;
    AxesSpec ax;
    ax.title = "t";
    const auto svg = render_svg(s, ax);
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(count(svg, "<polyline") == 2);
    CHECK(svg.find("measured") != std::string::npos);
    CHECK(svg.find("stroke-dasharray") != std::string::npos);
    CHECK(render_svg(s, ax) == svg);

    s[0].markers = true;
    CHECK(count(render_svg(s, ax), "<circle") >= 3);
}

TEST_CASE("points outside a log axis are skipped") {
    std::vector<PlotSeries> s(1);
    s[0].x = {1, 2, 3, 4};
    s[0].y = {1, -1, std::numeric_limits<double>::quiet_NaN(), 10};
    AxesSpec ax;
    ax.log_y = true;
    const auto svg = render_svg(s, ax);
    const auto start = svg.find("<polyline");
    const auto end = svg.find("/>", start);
    const auto poly = svg.substr(start, end - start);
    const auto pts = poly.substr(poly.find("points=\""));
    CHECK(count(pts, ",") == 2);
}

TEST_CASE("empty input") {
    std::vector<PlotSeries> none;
    try {
        render_svg(none, AxesSpec{});
        FAIL("expected EmptySeries");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptySeries);
    }
    std::vector<PlotSeries> hollow(1);
    CHECK_THROWS_AS(render_svg(hollow, AxesSpec{}), Error);
}

TEST_CASE("emit_plot writes the file or fails with IoFailure") {
    std::vector<PlotSeries> s(1);
    s[0].x = {0, 1};
    s[0].y = {0, 1};
    const auto path = std::filesystem::temp_directory_path() / "netlattice_plot_test.svg";
    emit_plot(s, AxesSpec{}, path.string());
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == render_svg(s, AxesSpec{}));
    std::filesystem::remove(path);
    try {
        emit_plot(s, AxesSpec{}, "/nonexistent-dir/x/plot.svg");
        FAIL("expected IoFailure");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IoFailure);
    }
}
