#ifndef NETLATTICE_CORE_HPP
#define NETLATTICE_CORE_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "netlattice/error.hpp"

namespace netlattice {

enum class Activation { linear, relu, tanh };

std::string_view to_string(Activation a);
std::optional<Activation> parse_activation(std::string_view s);

/// Unvalidated ensemble parameters. Field names double as the keys of the
/// flat config file format (see config_io).
struct ConfigCandidate {
    std::int64_t width = 200;
    std::int64_t depth = 1024;
    double weight_variance = 0.5;
    double bias_variance = 0.01;
    Activation activation = Activation::linear;
    std::int64_t num_samples = 200;
    std::uint64_t master_seed = 20180212;
    std::int64_t window_start = 512;
    std::int64_t window_len = 512;

    bool operator==(const ConfigCandidate&) const = default;
};

/// Validated, immutable ensemble configuration. Only validate_config makes one.
class EnsembleConfig {
public:
    std::size_t width() const noexcept { return width_; }
    std::size_t depth() const noexcept { return depth_; }
    double weight_variance() const noexcept { return weight_variance_; }
    double bias_variance() const noexcept { return bias_variance_; }
    Activation activation() const noexcept { return activation_; }
    std::size_t num_samples() const noexcept { return num_samples_; }
    std::uint64_t master_seed() const noexcept { return master_seed_; }
    std::size_t window_start() const noexcept { return window_start_; }
    std::size_t window_len() const noexcept { return window_len_; }

    // Soft regime flags. The sampler runs anywhere; theory operations throw
    // Supercritical outside these.
    bool linear_theory_valid() const noexcept { return weight_variance_ < 1.0; }
    bool relu_theory_valid() const noexcept { return weight_variance_ < 2.0; }
    /// Regime flag for the configured activation (tanh has no fluctuation theory, always true).
    bool theory_regime_ok() const noexcept;

    ConfigCandidate candidate() const;
    /// 16 hex digit FNV-1a hash of the canonical text serialization.
    std::string fingerprint() const;

    bool operator==(const EnsembleConfig&) const = default;

private:
    friend EnsembleConfig validate_config(const ConfigCandidate&);
    EnsembleConfig() = default;

    std::size_t width_ = 0;
    std::size_t depth_ = 0;
    double weight_variance_ = 0.0;
    double bias_variance_ = 0.0;
    Activation activation_ = Activation::linear;
    std::size_t num_samples_ = 0;
    std::uint64_t master_seed_ = 0;
    std::size_t window_start_ = 0;
    std::size_t window_len_ = 0;
};

/// Throws ConfigError listing every violated invariant.
EnsembleConfig validate_config(const ConfigCandidate& raw);

/// Per-sample seed: splitmix64 finaliser applied to
/// mix(master_seed) + (sample_index + 1) * 0x9E3779B97F4A7C15 (mod 2^64).
/// The finaliser is a bijection on 64-bit words and the affine step is
/// injective in sample_index, so distinct indices always give distinct seeds.
std::uint64_t derive_sample_seed(std::uint64_t master_seed, std::uint64_t sample_index);

/// The splitmix64 output finaliser (Steele, Lea & Flood 2014 constants).
std::uint64_t splitmix64_mix(std::uint64_t x);

bool is_power_of_two(std::uint64_t n);

// Flat "key = value" text. '#' starts a comment. Unknown keys are a ParseError.
std::string to_config_text(const ConfigCandidate& c);
ConfigCandidate parse_config_text(std::string_view text, ConfigCandidate base = {});
/// Apply a single key/value pair (used for CLI overrides).
void set_config_value(ConfigCandidate& c, std::string_view key, std::string_view value);
ConfigCandidate load_config_file(const std::string& path, ConfigCandidate base = {});

}  // namespace netlattice

#endif
