#include "netlattice/spectral.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>

#include "netlattice/format.hpp"

namespace netlattice {

namespace {

constexpr double kPi = std::numbers::pi;

// Unbiased excess kurtosis (G2); NaN below four samples or for a constant column.
double excess_kurtosis(const std::vector<double>& x) {
    const std::size_t n = x.size();
    if (n < 4) return std::nan("");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double m2 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = (v - mean) * (v - mean);
        m2 += d;
        m4 += d * d;
    }
    m2 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);
    if (m2 <= 0.0) return std::nan("");
    const double g2 = m4 / (m2 * m2) - 3.0;
    const double nn = static_cast<double>(n);
    return ((nn + 1.0) * g2 + 6.0) * (nn - 1.0) / ((nn - 2.0) * (nn - 3.0));
}

void check_samples(std::span<const ModeSet> samples, std::size_t fields) {
    if (samples.size() < 2)
        throw Error(ErrorCode::TooFewSamples, "need at least 2 samples, got " + std::to_string(samples.size()));
    const std::size_t modes = samples.front().q.size();
    for (const auto& s : samples) {
        if (s.fields.size() < fields || s.q.size() != modes)
            throw Error(ErrorCode::FieldMisalignment, "samples disagree on field count or grid");
        for (std::size_t f = 0; f < fields; ++f)
            if (s.fields[f].size() != modes)
                throw Error(ErrorCode::FieldMisalignment, "field " + std::to_string(f) + " has the wrong length");
    }
}

std::vector<bool> zero_mode_mask(const std::vector<double>& q) {
    std::vector<bool> m(q.size(), false);
    for (std::size_t i = 0; i < q.size(); ++i) m[i] = std::abs(std::remainder(q[i], 2.0 * kPi)) < 1e-12;
    return m;
}

}  // namespace

FluctuationSeries fluctuation_series(const Trajectory& traj, const TheoryPrediction& reference,
                                     const EnsembleConfig& config) {
    const std::size_t start = config.window_start();
    const std::size_t len = config.window_len();
    if (start + len > traj.layers.size())
        throw Error(ErrorCode::WindowOutOfRange, "analysis window exceeds trajectory length");

    FluctuationSeries out;
    if (config.activation() == Activation::relu) {
        if (!reference.relu) throw Error(ErrorCode::MissingReference, "no relu saddle in the reference prediction");
        const auto& sp = *reference.relu;
        const double n = static_cast<double>(config.width());
        const double scale = std::sqrt(2.0 * (1.0 - 0.5 * config.weight_variance()) / config.bias_variance());
        const double root_n = std::sqrt(n);
        out.labels = {"eps+", "eps-", "epsk"};
        out.fields.assign(3, std::vector<double>(len));
        for (std::size_t l = 0; l < len; ++l) {
            const auto& o = traj.layers[start + l];
            out.fields[0][l] = scale * (o.r_plus - sp.r_plus);
            out.fields[1][l] = scale * (o.r_minus - sp.r_minus);
            out.fields[2][l] = ((n - static_cast<double>(o.k)) - 0.5 * n) / root_n;
        }
        return out;
    }
    if (!reference.r_star) throw Error(ErrorCode::MissingReference, "no saddle in the reference prediction");
    const double r_star = *reference.r_star;
    out.labels = {"eps"};
    out.fields.assign(1, std::vector<double>(len));
    for (std::size_t l = 0; l < len; ++l) out.fields[0][l] = traj.layers[start + l].r - r_star;
    return out;
}

ModeSet mode_set(const FluctuationSeries& series) {
    ModeSet m;
    if (series.fields.empty()) return m;
    m.q = wavevector_grid(series.fields.front().size());
    for (const auto& f : series.fields) {
        if (f.size() != m.q.size()) throw Error(ErrorCode::FieldMisalignment, "fields differ in length");
        m.fields.push_back(fft_modes(f));
    }
    return m;
}

SpectrumEstimate estimate_spectrum(std::span<const ModeSet> samples, std::size_t field) {
    check_samples(samples, field + 1);
    const std::size_t modes = samples.front().q.size();
    const std::size_t m = samples.size();
    const double dm = static_cast<double>(m);

    SpectrumEstimate s;
    s.q = samples.front().q;
    s.variance.assign(modes, 0.0);
    s.stderr_.assign(modes, 0.0);
    s.kurtosis.assign(modes, 0.0);
    s.mean.assign(modes, Complex{});
    s.count.assign(modes, m);
    s.excluded = zero_mode_mask(s.q);

    std::vector<double> re(m);
    for (std::size_t i = 0; i < modes; ++i) {
        Complex mean{};
        for (const auto& x : samples) mean += x.fields[field][i];
        mean /= dm;
        double ss = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const Complex v = samples[j].fields[field][i];
            ss += std::norm(v - mean);
            re[j] = v.real();
        }
        s.mean[i] = mean;
        s.variance[i] = ss / (dm - 1.0);
        s.stderr_[i] = s.variance[i] * std::sqrt(2.0 / (dm - 1.0));
        s.kurtosis[i] = excess_kurtosis(re);
    }
    return s;
}

CrossSpectrumEstimate estimate_cross_spectrum(std::span<const ModeSet> samples) {
    check_samples(samples, 3);
    const std::size_t modes = samples.front().q.size();
    const std::size_t m = samples.size();
    const double dm = static_cast<double>(m);

    CrossSpectrumEstimate s;
    s.labels = {"eps+", "eps-", "epsk"};
    s.q = samples.front().q;
    s.covariance.assign(modes, HermitianMatrix3::Zero());
    s.stderr_.assign(modes, Eigen::Matrix3d::Zero());
    s.count.assign(modes, m);
    s.excluded = zero_mode_mask(s.q);

    for (std::size_t i = 0; i < modes; ++i) {
        Eigen::Vector3cd mean = Eigen::Vector3cd::Zero();
        for (const auto& x : samples)
            for (int a = 0; a < 3; ++a) mean(a) += x.fields[a][i];
        mean /= dm;
        HermitianMatrix3 c = HermitianMatrix3::Zero();
        for (const auto& x : samples) {
            Eigen::Vector3cd d;
            for (int a = 0; a < 3; ++a) d(a) = x.fields[a][i] - mean(a);
            c += d * d.adjoint();
        }
        c /= dm - 1.0;
        c = 0.5 * (c + c.adjoint()).eval();
        s.covariance[i] = c;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                s.stderr_[i](a, b) = std::sqrt((c(a, a).real() * c(b, b).real() + std::norm(c(a, b))) / (dm - 1.0));
    }
    return s;
}

double gaussian_mode_fraction(const SpectrumEstimate& s, double threshold) {
    std::size_t total = 0, good = 0;
    for (std::size_t i = 0; i < s.q.size(); ++i) {
        if (s.excluded[i] || s.q[i] <= 0.0 || s.q[i] > kPi + 1e-12) continue;
        ++total;
        if (std::isfinite(s.kurtosis[i]) && std::abs(s.kurtosis[i]) <= threshold) ++good;
    }
    return total ? static_cast<double>(good) / static_cast<double>(total) : 0.0;
}

LorentzianFit fit_lorentzian(const SpectrumEstimate& spectrum, double q_max) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < spectrum.q.size(); ++i) {
        const double q = spectrum.q[i];
        if (q > 0.0 && q <= q_max && q < kPi) idx.push_back(i);
    }
    if (idx.size() < 8)
        throw Error(ErrorCode::InsufficientModes,
                    std::to_string(idx.size()) + " modes with 0 < q <= " + format_double(q_max) + ", need 8");

    // sigma(1/v) = se / v^2; fall back to equal weights when no errors are given.
    bool have_errors = spectrum.stderr_.size() == spectrum.q.size();
    for (auto i : idx)
        if (have_errors && !(spectrum.stderr_[i] > 0.0 && std::isfinite(spectrum.stderr_[i]))) have_errors = false;

    double sw = 0.0, sx = 0.0, sxx = 0.0, sy = 0.0, sxy = 0.0;
    for (auto i : idx) {
        const double v = spectrum.variance[i];
        if (!(v > 0.0)) throw Error(ErrorCode::NonPositiveFit, "non-positive variance at q = " + format_double(spectrum.q[i]));
        const double w = have_errors ? std::pow(v, 4) / (spectrum.stderr_[i] * spectrum.stderr_[i]) : 1.0;
        const double x = spectrum.q[i] * spectrum.q[i];
        const double y = 1.0 / v;
        sw += w;
        sx += w * x;
        sxx += w * x * x;
        sy += w * y;
        sxy += w * x * y;
    }
    const double det = sw * sxx - sx * sx;
    LorentzianFit fit;
    fit.modes = idx.size();
    fit.q_max = q_max;
    fit.a = (sxx * sy - sx * sxy) / det;
    fit.b = (sw * sxy - sx * sy) / det;
    if (!(fit.a > 0.0) || !(fit.b > 0.0))
        throw Error(ErrorCode::NonPositiveFit,
                    "Lorentzian fit gave a = " + format_double(fit.a) + ", b = " + format_double(fit.b));
    fit.xi = std::sqrt(fit.b / fit.a);
    if (have_errors) {
        // (X^T W X)^{-1} is the parameter covariance when w = 1 / sigma^2.
        const double vaa = sxx / det, vbb = sw / det, vab = -sx / det;
        const double da = -0.5 * fit.xi / fit.a, db = 0.5 * fit.xi / fit.b;
        fit.xi_stderr = std::sqrt(std::max(0.0, da * da * vaa + db * db * vbb + 2.0 * da * db * vab));
    }
    return fit;
}

void write_spectrum_csv(std::ostream& os, const SpectrumEstimate& s) {
    os << "q,var,stderr,kurtosis,n\n";
    for (std::size_t i = 0; i < s.q.size(); ++i)
        os << format_double(s.q[i]) << ',' << format_double(s.variance[i]) << ',' << format_double(s.stderr_[i])
           << ',' << format_double(s.kurtosis[i]) << ',' << s.count[i] << '\n';
}

void write_cross_spectrum_csv(std::ostream& os, const CrossSpectrumEstimate& s) {
    os << 'q';
    for (const auto& c : relu_entry_columns()) os << ',' << c;
    os << '\n';
    for (std::size_t i = 0; i < s.q.size(); ++i) {
        os << format_double(s.q[i]);
        const auto& m = s.covariance[i];
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) os << ',' << format_double(m(a, b).real()) << ',' << format_double(m(a, b).imag());
        os << '\n';
    }
}

SpectrumEstimate read_spectrum_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || trim(line) != "q,var,stderr,kurtosis,n")
        throw Error(ErrorCode::ParseError, "spectrum CSV must start with header q,var,stderr,kurtosis,n");
    SpectrumEstimate s;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cols = split(trim(line), ',');
        if (cols.size() != 5)
            throw Error(ErrorCode::ParseError, "spectrum CSV line " + std::to_string(lineno) + ": expected 5 columns");
        s.q.push_back(parse_double(cols[0]));
        s.variance.push_back(parse_double(cols[1]));
        s.stderr_.push_back(parse_double(cols[2]));
        s.kurtosis.push_back(parse_double(cols[3]));
        s.count.push_back(static_cast<std::size_t>(parse_uint(cols[4])));
    }
    s.mean.assign(s.q.size(), Complex{});
    s.excluded = zero_mode_mask(s.q);
    return s;
}

}  // namespace netlattice
