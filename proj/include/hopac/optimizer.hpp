#pragma once

#include <functional>
#include <span>
#include <vector>

namespace hopac {

struct NelderMeadOptions {
    int max_iterations = 400;
    /// Stop when the simplex's objective spread falls below ftol * max(1, |f_best|).
    double ftol = 1e-9;
    /// Edge length of the initial simplex along each coordinate.
    double initial_step = 0.5;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
    /// Best objective value after each iteration.
    std::vector<double> trace;
};

using Objective = std::function<double(std::span<const double>)>;

/// Unconstrained Nelder-Mead minimization. Non-finite objective values are
/// treated as +infinity.
NelderMeadResult nelder_mead(const Objective& f, std::vector<double> x0, const NelderMeadOptions& options = {});

}  // namespace hopac
