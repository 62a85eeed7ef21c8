#include "fairsweep/lbfgs.hpp"

#include <cmath>
#include <deque>

#include "fairsweep/errors.hpp"

namespace fairsweep {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += a[i] * b[i];
  return total;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace

LbfgsResult lbfgs_minimize(const ValueAndGradFn& fn, std::vector<double> x0,
                           const LbfgsOptions& options) {
  if (x0.empty()) throw ConfigError("lbfgs: empty starting point");
  const std::size_t n = x0.size();

  std::vector<double> x = std::move(x0);
  std::vector<double> grad(n, 0.0);
  double fx = fn(x, grad);

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> history;

  std::vector<double> direction(n), x_next(n), grad_next(n, 0.0), alpha_buf;
  LbfgsResult result;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    const double gnorm = norm2(grad);
    if (gnorm < options.gradient_tolerance) {
      result.converged = true;
      break;
    }

    // Two-loop recursion: direction = -H * grad.
    direction = grad;
    alpha_buf.assign(history.size(), 0.0);
    for (std::size_t h = history.size(); h-- > 0;) {
      const Pair& p = history[h];
      alpha_buf[h] = p.rho * dot(p.s, direction);
      for (std::size_t i = 0; i < n; ++i) direction[i] -= alpha_buf[h] * p.y[i];
    }
    if (!history.empty()) {
      const Pair& last = history.back();
      const double yy = dot(last.y, last.y);
      if (yy > 0.0) {
        const double scale = dot(last.s, last.y) / yy;
        for (double& d : direction) d *= scale;
      }
    }
    for (std::size_t h = 0; h < history.size(); ++h) {
      const Pair& p = history[h];
      const double beta = p.rho * dot(p.y, direction);
      for (std::size_t i = 0; i < n; ++i) direction[i] += (alpha_buf[h] - beta) * p.s[i];
    }
    for (double& d : direction) d = -d;

    double descent = dot(grad, direction);
    if (!(descent < 0.0)) {  // fall back to steepest descent
      for (std::size_t i = 0; i < n; ++i) direction[i] = -grad[i];
      descent = -gnorm * gnorm;
      history.clear();
    }

    // Armijo backtracking.
    constexpr double c1 = 1e-4;
    double step = 1.0;
    double fx_next = fx;
    bool accepted = false;
    for (int half = 0; half < 60; ++half) {
      for (std::size_t i = 0; i < n; ++i) x_next[i] = x[i] + step * direction[i];
      fx_next = fn(x_next, grad_next);
      if (std::isfinite(fx_next) && fx_next <= fx + c1 * step * descent) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // line search failed; report best point so far

    Pair pair;
    pair.s.resize(n);
    pair.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      pair.s[i] = x_next[i] - x[i];
      pair.y[i] = grad_next[i] - grad[i];
    }
    const double sy = dot(pair.s, pair.y);
    if (sy > 1e-300) {
      pair.rho = 1.0 / sy;
      history.push_back(std::move(pair));
      if (static_cast<int>(history.size()) > options.history) history.pop_front();
    }

    x.swap(x_next);
    grad.swap(grad_next);
    fx = fx_next;
  }

  result.x = std::move(x);
  result.value = fx;
  result.gradient_norm = norm2(grad);
  result.iterations = it;
  if (!result.converged) {
    result.converged = result.gradient_norm < options.gradient_tolerance;
  }
  return result;
}

}  // namespace fairsweep
