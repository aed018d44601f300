#include <cmath>

#include "netlattice/lattice.hpp"

namespace netlattice {

// Sokal's automatic window: tau(W) = 1/2 + sum_{t=1}^{W} rho(t), stopping at the
// first W with W >= c tau(W).
Autocorrelation integrated_autocorrelation(std::span<const double> series, double c) {
    const std::size_t n = series.size();
    if (n < 1000) throw Error(ErrorCode::SeriesTooShort, std::to_string(n) + " points, need at least 1000");
    double mean = 0.0;
    for (double v : series) mean += v;
    mean /= static_cast<double>(n);
    std::vector<double> d(n);
    double c0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = series[i] - mean;
        c0 += d[i] * d[i];
    }
    Autocorrelation out;
    out.ess = static_cast<double>(n);
    if (c0 <= 0.0) return out;

    double tau = 0.5;
    std::size_t w = 1;
    for (; w < n / 2; ++w) {
        double ct = 0.0;
        for (std::size_t i = 0; i + w < n; ++i) ct += d[i] * d[i + w];
        tau += ct / c0;
        if (static_cast<double>(w) >= c * tau) break;
    }
    out.tau = std::max(tau, 0.5);
    out.window = w;
    out.ess = static_cast<double>(n) / (2.0 * out.tau);
    return out;
}

}  // namespace netlattice
