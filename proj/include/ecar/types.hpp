#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace ecar {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Eigen::Index;

// Invalid inputs (bad arguments, malformed files) throw std::invalid_argument.
// Numeric failures (non-finite posterior, Cholesky breakdown, eigensolver
// non-convergence) throw numeric_error. The CLI maps these to exit codes 2 / 3.
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace ecar
