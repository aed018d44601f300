#include "netlattice/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>
#include <ostream>

#include "netlattice/format.hpp"

namespace netlattice {

namespace {

double ratio_or_inf(double num, double den) {
    if (den != 0.0) return num / den;
    if (num == 0.0) return 0.0;
    return std::copysign(std::numeric_limits<double>::infinity(), num);
}

bool within_pi(double q) { return q > 0.0 && q <= std::numbers::pi + 1e-12; }

}  // namespace

bool ComparisonReport::pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return !c.gating || c.pass; });
}

std::size_t ComparisonReport::failed_rows() const {
    return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) { return !r.pass; }));
}

ComparisonRow& ComparisonReport::add_row(std::string point, std::string quantity, double x, double predicted,
                                         double measured, double stderr_, const Tolerances& tol) {
    ComparisonRow r;
    r.point = std::move(point);
    r.quantity = std::move(quantity);
    r.x = x;
    r.predicted = predicted;
    r.measured = measured;
    r.stderr_ = stderr_;
    const double dev = measured - predicted;
    r.rel_dev = ratio_or_inf(dev, std::abs(predicted));
    r.z = ratio_or_inf(dev, stderr_);
    r.tolerance = tol.relative;
    r.z_tolerance = tol.z;
    const double rel_bound = tol.relative * std::abs(predicted);
    const double se_bound = tol.z * stderr_;
    r.rule = rel_bound >= se_bound ? "relative" : "stderr";
    r.pass = std::abs(dev) <= std::max(rel_bound, se_bound);
    rows.push_back(std::move(r));
    return rows.back();
}

ComparisonCheck& ComparisonReport::add_check(std::string name, double value, double threshold, std::string relation,
                                             bool gating) {
    ComparisonCheck c;
    c.name = std::move(name);
    c.value = value;
    c.threshold = threshold;
    c.relation = std::move(relation);
    c.gating = gating;
    if (c.relation == ">=")
        c.pass = value >= threshold;
    else if (c.relation == "<=")
        c.pass = value <= threshold;
    else
        throw Error(ErrorCode::InvalidParameter, "check relation must be >= or <=");
    checks.push_back(std::move(c));
    return checks.back();
}

void ComparisonReport::append(const ComparisonReport& other) {
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
    checks.insert(checks.end(), other.checks.begin(), other.checks.end());
}

ComparisonReport compare(std::span<const double> x, std::span<const double> measured, std::span<const double> stderr_,
                         std::span<const double> predicted, const Tolerances& tol, const std::string& quantity,
                         const std::string& point) {
    if (measured.size() != x.size() || stderr_.size() != x.size() || predicted.size() != x.size())
        throw Error(ErrorCode::GridMismatch, "measured, stderr and predicted tables differ in length");
    ComparisonReport rep;
    for (std::size_t i = 0; i < x.size(); ++i) rep.add_row(point, quantity, x[i], predicted[i], measured[i], stderr_[i], tol);
    const std::size_t n = rep.rows.size();
    const double frac = n ? static_cast<double>(n - rep.failed_rows()) / static_cast<double>(n) : 1.0;
    rep.add_check((point.empty() ? "" : point + " ") + quantity + " pass fraction", frac, tol.min_pass_fraction, ">=");
    return rep;
}

ComparisonReport compare(const SpectrumEstimate& measured, const TheoryPrediction& predicted, const Tolerances& tol,
                         const std::string& point) {
    if (measured.q.size() != predicted.q.size() || predicted.linear_variance.size() != predicted.q.size())
        throw Error(ErrorCode::GridMismatch, "spectrum has " + std::to_string(measured.q.size()) +
                                                 " modes, prediction has " + std::to_string(predicted.q.size()));
    std::vector<double> x, m, se, p;
    for (std::size_t i = 0; i < measured.q.size(); ++i) {
        if (std::abs(measured.q[i] - predicted.q[i]) > 1e-9)
            throw Error(ErrorCode::GridMismatch, "wavevector " + std::to_string(i) + " differs between inputs");
        if (measured.excluded[i] || !within_pi(measured.q[i])) continue;
        x.push_back(measured.q[i]);
        m.push_back(measured.variance[i]);
        se.push_back(measured.stderr_[i]);
        p.push_back(predicted.linear_variance[i]);
    }
    return compare(x, m, se, p, tol, "var", point);
}

double loglog_correlation(const SpectrumEstimate& measured, const TheoryPrediction& predicted) {
    if (measured.q.size() != predicted.linear_variance.size())
        throw Error(ErrorCode::GridMismatch, "spectrum and prediction differ in length");
    std::vector<double> a, b;
    for (std::size_t i = 0; i < measured.q.size(); ++i) {
        if (measured.excluded[i] || !within_pi(measured.q[i]) || !(measured.variance[i] > 0.0)) continue;
        a.push_back(std::log(measured.variance[i]));
        b.push_back(std::log(predicted.linear_variance[i]));
    }
    const double n = static_cast<double>(a.size());
    if (a.size() < 2) return std::nan("");
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

void write_report_json(std::ostream& os, const ComparisonReport& r) {
    nlohmann::ordered_json j;
    j["experiment"] = r.experiment;
    j["verdict"] = r.pass() ? "pass" : "fail";
    j["rows_total"] = r.rows.size();
    j["rows_failed"] = r.failed_rows();
    auto checks = nlohmann::ordered_json::array();
    for (const auto& c : r.checks)
        checks.push_back({{"name", c.name},
                          {"value", c.value},
                          {"relation", c.relation},
                          {"threshold", c.threshold},
                          {"gating", c.gating},
                          {"pass", c.pass}});
    j["checks"] = checks;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& x : r.rows)
        rows.push_back({{"point", x.point},
                        {"quantity", x.quantity},
                        {"x", x.x},
                        {"predicted", x.predicted},
                        {"measured", x.measured},
                        {"stderr", x.stderr_},
                        {"rel_dev", x.rel_dev},
                        {"z", x.z},
                        {"tolerance", x.tolerance},
                        {"z_tolerance", x.z_tolerance},
                        {"rule", x.rule},
                        {"pass", x.pass}});
    j["rows"] = rows;
    os << j.dump(2) << '\n';
}

void write_report_csv(std::ostream& os, const ComparisonReport& r) {
    os << "point,quantity,x,predicted,measured,stderr,rel_dev,z,tolerance,z_tolerance,rule,pass\n";
    for (const auto& x : r.rows)
        os << x.point << ',' << x.quantity << ',' << format_double(x.x) << ',' << format_double(x.predicted) << ','
           << format_double(x.measured) << ',' << format_double(x.stderr_) << ',' << format_double(x.rel_dev) << ','
           << format_double(x.z) << ',' << format_double(x.tolerance) << ',' << format_double(x.z_tolerance) << ','
           << x.rule << ',' << (x.pass ? 1 : 0) << '\n';
}

}  // namespace netlattice
