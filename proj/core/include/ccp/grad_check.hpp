#pragma once

#include <functional>

#include "ccp/tape.hpp"

namespace ccp {

/// Builds a scalar Var from a tape and one trainable leaf placed at `at`.
using ScalarFn = std::function<Var(Tape&, Var leaf)>;

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::size_t worst_index = 0;
    double tape_grad_at_worst = 0.0;
    double fd_grad_at_worst = 0.0;
    bool pass = false;
};

/// Compares the tape gradient of f at `at` against central finite
/// differences, element by element. pass iff max relative error < tol.
/// The function must be evaluable at `at` (finite), and the caller is
/// responsible for avoiding sort-tie points of discontinuity.
GradCheckReport grad_check(const ScalarFn& f, const Tensor& at, double step, double tol);

/// Relative error with a floor guarding the tiny-gradient regime, where
/// central differences are dominated by cancellation noise.
double relative_error(double a, double b);

}  // namespace ccp
