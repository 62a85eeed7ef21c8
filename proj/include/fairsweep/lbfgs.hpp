#pragma once

#include <functional>
#include <span>
#include <vector>

namespace fairsweep {

struct LbfgsOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-8;  // Euclidean norm
  int history = 10;
};

struct LbfgsResult {
  std::vector<double> x;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Evaluates f(x) and writes the gradient into the second argument.
using ValueAndGradFn =
    std::function<double(std::span<const double>, std::span<double>)>;

// Limited-memory BFGS with two-loop recursion and Armijo backtracking.
// Deterministic: no randomness, fixed evaluation order.
LbfgsResult lbfgs_minimize(const ValueAndGradFn& fn, std::vector<double> x0,
                           const LbfgsOptions& options = {});

}  // namespace fairsweep
