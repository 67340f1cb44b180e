#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace drss {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Failure categories reported by the library.
enum class ErrorCode {
    invalid_argument,
    coincident_points,
    singular_model,
    hard_case,
    bracket_not_found,
    solver_failure,
    config,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::coincident_points: return "coincident_points";
        case ErrorCode::singular_model: return "singular_model";
        case ErrorCode::hard_case: return "hard_case";
        case ErrorCode::bracket_not_found: return "bracket_not_found";
        case ErrorCode::solver_failure: return "solver_failure";
        case ErrorCode::config: return "config";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

namespace detail {

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) throw Error(code, message);
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace detail

}  // namespace drss
