#ifndef NETLATTICE_ERROR_HPP
#define NETLATTICE_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace netlattice {

enum class ErrorCode {
    // configuration
    NonPositiveBiasVariance,
    WindowOutOfRange,
    WindowNotPowerOfTwo,
    InvalidParameter,
    ParseError,
    // sampler
    NumericOverflow,
    // theory
    Supercritical,
    NoConvergence,
    ZeroMode,
    SingularMatrix,
    // spectral
    MissingReference,
    BadLength,
    TooFewSamples,
    FieldMisalignment,
    InsufficientModes,
    NonPositiveFit,
    // lattice
    DomainViolation,
    NonFiniteEnergy,
    SeriesTooShort,
    // reporting / io
    GridMismatch,
    EmptySeries,
    IoFailure,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Raised by validate_config; carries every violated invariant, not just the first.
class ConfigError : public Error {
public:
    struct Violation {
        ErrorCode code;
        std::string message;
    };

    explicit ConfigError(std::vector<Violation> violations);

    const std::vector<Violation>& violations() const noexcept { return violations_; }
    bool has(ErrorCode code) const noexcept;

private:
    std::vector<Violation> violations_;
};

}  // namespace netlattice

#endif
