#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace td0 {

/// Shape or dimension mismatch between operands.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation
/// (negative elapsed time, sigma out of range, wrong branch, ...).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Matrix numerically singular at the configured pivot threshold.
struct SingularMatrixError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Iteration failed to converge, a guard tripped, or a value left
/// the representable range (QR sweep budget, divergence, index caps).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Caller violated an API precondition that is not a plain domain issue
/// (missing recorded data, missing metadata, inconsistent options).
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

/// An iterate left the representable range during a trajectory.
struct DivergenceError : NumericalError {
    DivergenceError(std::size_t at_step)
        : NumericalError("divergence at step " + std::to_string(at_step)),
          step(at_step) {}

    std::size_t step;
};

/// Markov chain failed the ergodicity requirements.
struct ErgodicityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The requested constants or bounds do not exist for this system
/// (e.g. expectation constants of a non-positive-definite system).
struct InapplicabilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Filesystem read or write failed.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Configuration rejected; carries every problem found, not just the first.
struct ConfigError : std::runtime_error {
    explicit ConfigError(std::vector<std::string> problems)
        : std::runtime_error(join(problems)), issues(std::move(problems)) {}

    std::vector<std::string> issues;

  private:
    static std::string join(const std::vector<std::string>& v) {
        std::string s = "invalid configuration:";
        for (const auto& e : v) {
            s += "\n  - ";
            s += e;
        }
        return s;
    }
};

} // namespace td0
