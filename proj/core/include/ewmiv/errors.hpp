#ifndef EWMIV_ERRORS_HPP
#define EWMIV_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace ewmiv {

/// Bad user input: malformed config files, invalid hyperparameters.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure while fitting (rank deficiency, no usable neighborhood).
struct EstimationError : std::runtime_error {
    explicit EstimationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// The data cannot identify the requested object (e.g. too little
/// continuous variation in the propensity score for a LIV fit).
struct IdentificationError : std::runtime_error {
    explicit IdentificationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A required integration range falls outside the range on which the MTE
/// model is valid. Carries the offending rows when raised row-wise.
struct ExtrapolationError : std::runtime_error {
    std::vector<int> rows;
    explicit ExtrapolationError(const std::string& msg, std::vector<int> offending = {})
        : std::runtime_error(msg), rows(std::move(offending)) {}
};

/// A budget/resource constraint cannot be met.
struct InfeasibleError : std::runtime_error {
    explicit InfeasibleError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ewmiv

#endif
