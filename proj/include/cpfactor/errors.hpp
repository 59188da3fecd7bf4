#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cpfactor {

/// Broad failure classes. The CLI maps them onto exit codes 2/3/4.
enum class ErrorCategory { input, estimation, numerical };

/// Base of every exception thrown by the library. `code()` is a
/// module-qualified identifier such as "cp-init/insufficient-survivors".
class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, std::string code, const std::string& message)
        : std::runtime_error(message), category_(category), code_(std::move(code)) {}

    ErrorCategory category() const noexcept { return category_; }
    const std::string& code() const noexcept { return code_; }

private:
    ErrorCategory category_;
    std::string code_;
};

class InputError : public Error {
public:
    InputError(std::string code, const std::string& message)
        : Error(ErrorCategory::input, std::move(code), message) {}
};

class EstimationError : public Error {
public:
    EstimationError(std::string code, const std::string& message)
        : Error(ErrorCategory::estimation, std::move(code), message) {}
};

class NumericalError : public Error {
public:
    NumericalError(std::string code, const std::string& message)
        : Error(ErrorCategory::numerical, std::move(code), message) {}
};

/// Procedure-2 redundancy filter left fewer candidate tuples than factors
/// requested. Callers may retry with more projections.
class InsufficientSurvivors : public EstimationError {
public:
    InsufficientSurvivors(std::size_t requested, std::size_t selected)
        : EstimationError("cp-init/insufficient-survivors",
                          "randomized projection: only " + std::to_string(selected) +
                              " of " + std::to_string(requested) +
                              " tuples survived the redundancy filter"),
          requested_(requested), selected_(selected) {}

    std::size_t requested() const noexcept { return requested_; }
    std::size_t survivors() const noexcept { return selected_; }

private:
    std::size_t requested_;
    std::size_t selected_;
};

/// A loading matrix whose columns are (numerically) linearly dependent.
class RankDeficient : public NumericalError {
public:
    RankDeficient(std::string code, double smallest_singular, const std::string& context)
        : NumericalError(std::move(code),
                         context + ": smallest singular value " +
                             std::to_string(smallest_singular) + " below 1e-10"),
          smallest_(smallest_singular) {}

    double smallest_singular_value() const noexcept { return smallest_; }

private:
    double smallest_;
};

inline int exit_code_for(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::input: return 2;
    case ErrorCategory::estimation: return 3;
    case ErrorCategory::numerical: return 4;
    }
    return 1;
}

}  // namespace cpfactor
