#include "netlattice/core.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

#include "netlattice/format.hpp"

namespace netlattice {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::NonPositiveBiasVariance: return "NonPositiveBiasVariance";
        case ErrorCode::WindowOutOfRange: return "WindowOutOfRange";
        case ErrorCode::WindowNotPowerOfTwo: return "WindowNotPowerOfTwo";
        case ErrorCode::InvalidParameter: return "InvalidParameter";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::NumericOverflow: return "NumericOverflow";
        case ErrorCode::Supercritical: return "Supercritical";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::ZeroMode: return "ZeroMode";
        case ErrorCode::SingularMatrix: return "SingularMatrix";
        case ErrorCode::MissingReference: return "MissingReference";
        case ErrorCode::BadLength: return "BadLength";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::FieldMisalignment: return "FieldMisalignment";
        case ErrorCode::InsufficientModes: return "InsufficientModes";
        case ErrorCode::NonPositiveFit: return "NonPositiveFit";
        case ErrorCode::DomainViolation: return "DomainViolation";
        case ErrorCode::NonFiniteEnergy: return "NonFiniteEnergy";
        case ErrorCode::SeriesTooShort: return "SeriesTooShort";
        case ErrorCode::GridMismatch: return "GridMismatch";
        case ErrorCode::EmptySeries: return "EmptySeries";
        case ErrorCode::IoFailure: return "IoFailure";
    }
    return "Unknown";
}

namespace {

std::string join_violations(const std::vector<ConfigError::Violation>& v) {
    std::string out;
    for (const auto& item : v) {
        if (!out.empty()) out += "; ";
        out += std::string(to_string(item.code)) + " (" + item.message + ")";
    }
    return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<Violation> violations)
    : Error(violations.empty() ? ErrorCode::InvalidParameter : violations.front().code,
            join_violations(violations)),
      violations_(std::move(violations)) {}

bool ConfigError::has(ErrorCode code) const noexcept {
    for (const auto& v : violations_) {
        if (v.code == code) return true;
    }
    return false;
}

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::linear: return "linear";
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
    }
    return "linear";
}

std::optional<Activation> parse_activation(std::string_view s) {
    if (s == "linear") return Activation::linear;
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    return std::nullopt;
}

bool is_power_of_two(std::uint64_t n) { return n != 0 && (n & (n - 1)) == 0; }

bool EnsembleConfig::theory_regime_ok() const noexcept {
    switch (activation_) {
        case Activation::linear: return linear_theory_valid();
        case Activation::relu: return relu_theory_valid();
        case Activation::tanh: return true;
    }
    return false;
}

ConfigCandidate EnsembleConfig::candidate() const {
    ConfigCandidate c;
    c.width = static_cast<std::int64_t>(width_);
    c.depth = static_cast<std::int64_t>(depth_);
    c.weight_variance = weight_variance_;
    c.bias_variance = bias_variance_;
    c.activation = activation_;
    c.num_samples = static_cast<std::int64_t>(num_samples_);
    c.master_seed = master_seed_;
    c.window_start = static_cast<std::int64_t>(window_start_);
    c.window_len = static_cast<std::int64_t>(window_len_);
    return c;
}

std::string EnsembleConfig::fingerprint() const {
    // FNV-1a, 64 bit
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : to_config_text(candidate())) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    auto res = std::to_chars(buf, buf + 16, h, 16);
    std::string hex(buf, res.ptr);
    return std::string(16 - hex.size(), '0') + hex;
}

EnsembleConfig validate_config(const ConfigCandidate& raw) {
    std::vector<ConfigError::Violation> bad;
    auto fail = [&](ErrorCode code, std::string msg) { bad.push_back({code, std::move(msg)}); };

    if (raw.width <= 0) fail(ErrorCode::InvalidParameter, "width must be positive");
    if (raw.depth <= 0) fail(ErrorCode::InvalidParameter, "depth must be positive");
    if (raw.num_samples <= 0) fail(ErrorCode::InvalidParameter, "num_samples must be positive");
    if (!std::isfinite(raw.weight_variance) || raw.weight_variance < 0.0)
        fail(ErrorCode::InvalidParameter, "weight_variance must be finite and nonnegative");
    if (!std::isfinite(raw.bias_variance) || !(raw.bias_variance > 0.0))
        fail(ErrorCode::NonPositiveBiasVariance, "bias_variance must be > 0");
    if (raw.window_len <= 0) {
        fail(ErrorCode::WindowNotPowerOfTwo, "window_len must be a positive power of two");
    } else if (!is_power_of_two(static_cast<std::uint64_t>(raw.window_len))) {
        fail(ErrorCode::WindowNotPowerOfTwo,
             "window_len = " + std::to_string(raw.window_len) + " is not a power of two");
    }
    if (raw.window_start < 0 || raw.window_len < 0 || raw.window_start + raw.window_len > raw.depth)
        fail(ErrorCode::WindowOutOfRange, "window [" + std::to_string(raw.window_start) + ", " +
                                              std::to_string(raw.window_start + raw.window_len) +
                                              ") does not fit in depth " + std::to_string(raw.depth));
    if (!bad.empty()) throw ConfigError(std::move(bad));

    EnsembleConfig c;
    c.width_ = static_cast<std::size_t>(raw.width);
    c.depth_ = static_cast<std::size_t>(raw.depth);
    c.weight_variance_ = raw.weight_variance;
    c.bias_variance_ = raw.bias_variance;
    c.activation_ = raw.activation;
    c.num_samples_ = static_cast<std::size_t>(raw.num_samples);
    c.master_seed_ = raw.master_seed;
    c.window_start_ = static_cast<std::size_t>(raw.window_start);
    c.window_len_ = static_cast<std::size_t>(raw.window_len);
    return c;
}

std::uint64_t splitmix64_mix(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

std::uint64_t derive_sample_seed(std::uint64_t master_seed, std::uint64_t sample_index) {
    constexpr std::uint64_t golden = 0x9E3779B97F4A7C15ULL;
    return splitmix64_mix(splitmix64_mix(master_seed) + (sample_index + 1) * golden);
}

}  // namespace netlattice
