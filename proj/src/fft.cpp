#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>

#include "netlattice/spectral.hpp"

namespace netlattice {

namespace {

// FFTW planning is not thread-safe; execution with fresh arrays is.
// FFTW_ESTIMATE keeps the chosen algorithm, and so the bits, fixed run to run.
std::mutex plan_mutex;

struct Plans {
    fftw_plan r2c = nullptr;
    fftw_plan c2c = nullptr;
};

const Plans& plans_for(std::size_t n) {
    static std::map<std::size_t, Plans> cache;
    std::lock_guard<std::mutex> lock(plan_mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    const int len = static_cast<int>(n);
    double* in = fftw_alloc_real(n);
    fftw_complex* out = fftw_alloc_complex(n);
    fftw_complex* cin = fftw_alloc_complex(n);
    Plans p;
    p.r2c = fftw_plan_dft_r2c_1d(len, in, out, FFTW_ESTIMATE);
    p.c2c = fftw_plan_dft_1d(len, cin, out, FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
    fftw_free(cin);
    return cache.emplace(n, p).first->second;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

void require_length(std::size_t n) {
    if (n == 0 || !is_power_of_two(n))
        throw Error(ErrorCode::BadLength, "series length " + std::to_string(n) + " is not a power of two");
}

}  // namespace

std::vector<Complex> fft_modes(std::span<const double> series) {
    const std::size_t n = series.size();
    require_length(n);
    const Plans& p = plans_for(n);
    std::unique_ptr<double, FftwFree> in(fftw_alloc_real(n));
    std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(n / 2 + 1));
    std::copy(series.begin(), series.end(), in.get());
    fftw_execute_dft_r2c(p.r2c, in.get(), out.get());

    // FFTW gives sum x_l e^{-iql}; the analysis convention is its conjugate over n.
    const double inv = 1.0 / static_cast<double>(n);
    std::vector<Complex> modes(n);
    for (std::size_t k = 0; k <= n / 2; ++k) {
        modes[k] = Complex(out.get()[k][0], -out.get()[k][1]) * inv;
        if (k > 0 && k < n - k) modes[n - k] = std::conj(modes[k]);
    }
    return modes;
}

std::vector<double> inverse_fft_modes(std::span<const Complex> modes) {
    const std::size_t n = modes.size();
    require_length(n);
    const Plans& p = plans_for(n);
    std::unique_ptr<fftw_complex, FftwFree> in(fftw_alloc_complex(n));
    std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(n));
    for (std::size_t k = 0; k < n; ++k) {
        in.get()[k][0] = modes[k].real();
        in.get()[k][1] = modes[k].imag();
    }
    fftw_execute_dft(p.c2c, in.get(), out.get());
    std::vector<double> x(n);
    for (std::size_t l = 0; l < n; ++l) x[l] = out.get()[l][0];
    return x;
}

}  // namespace netlattice
