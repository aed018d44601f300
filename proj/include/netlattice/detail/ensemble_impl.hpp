#ifndef NETLATTICE_DETAIL_ENSEMBLE_IMPL_HPP
#define NETLATTICE_DETAIL_ENSEMBLE_IMPL_HPP

#include <algorithm>
#include <atomic>
#include <optional>
#include <thread>
#include <utility>

namespace netlattice {

template <typename Sink>
std::vector<SampleFailure> for_each_trajectory(const EnsembleConfig& config, const EnsembleOptions& options,
                                               Sink&& sink) {
    const std::size_t m = config.num_samples();
    const unsigned threads = std::max(1u, options.threads);
    const std::size_t chunk = static_cast<std::size_t>(threads) * 4;

    std::vector<SampleFailure> failures;
    std::vector<std::optional<Trajectory>> slots;
    std::vector<std::string> errors;

    for (std::size_t begin = 0; begin < m; begin += chunk) {
        const std::size_t end = std::min(m, begin + chunk);
        slots.assign(end - begin, std::nullopt);
        errors.assign(end - begin, std::string{});

        auto work = [&](std::size_t i) {
            try {
                slots[i - begin] = sample_trajectory(config, derive_sample_seed(config.master_seed(), i), i,
                                                     options.method);
            } catch (const Error& e) {
                errors[i - begin] = e.what();
            }
        };

        if (threads == 1) {
            for (std::size_t i = begin; i < end; ++i) work(i);
        } else {
            std::atomic<std::size_t> next{begin};
            std::vector<std::thread> pool;
            for (unsigned t = 0; t < threads; ++t) {
                pool.emplace_back([&] {
                    for (std::size_t i = next++; i < end; i = next++) work(i);
                });
            }
            for (auto& th : pool) th.join();
        }

        for (std::size_t i = begin; i < end; ++i) {
            if (slots[i - begin]) {
                sink(std::move(*slots[i - begin]));
            } else {
                failures.push_back({i, errors[i - begin]});
            }
        }
    }
    return failures;
}

}  // namespace netlattice

#endif
