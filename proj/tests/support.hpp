#pragma once

// Independent oracles shared by the unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "repsq/quantization.hpp"
#include "repsq/rng.hpp"

namespace repsq::testing {

// Tanh-sinh (double exponential) quadrature of f over (a, b). Robust to
// integrable endpoint singularities because nodes cluster doubly
// exponentially toward the ends and f is never evaluated on them.
inline double tanh_sinh(const std::function<double(double)>& f, double a, double b,
                        int levels = 9) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  const double pi_2 = 2.0 * std::atan(1.0);
  double h = 1.0;
  double prev = 0.0;
  double sum = f(mid) * pi_2;
  for (int level = 0; level <= levels; ++level) {
    const int step = level == 0 ? 1 : 2;
    for (int k = 1;; k += step) {
      const double t = k * h;
      const double u = pi_2 * std::sinh(t);
      const double ch = std::cosh(u);
      const double w = pi_2 * std::cosh(t) / (ch * ch);
      // Distance of the node from each endpoint, computed without cancellation.
      const double gap = half / (std::exp(u) * ch);
      if (w < 1e-300 || gap == 0.0) break;
      // Each side stops contributing once its node rounds onto the endpoint,
      // so a singularity at an exactly representable zero keeps full depth.
      const double xl = a + gap;
      const double xr = b - gap;
      const bool left = xl > a;
      const bool right = xr < b;
      if (!left && !right) break;
      if (left) sum += w * f(xl);
      if (right) sum += w * f(xr);
      if (t > 6.0) break;
    }
    const double est = sum * h * half;
    if (level > 3 && std::abs(est - prev) <= 1e-13 * std::abs(est)) return est;
    prev = est;
    h *= 0.5;
  }
  return prev;
}

// B(a, b) = integral_0^1 u^(a-1) (1-u)^(b-1) du, split at 1/2 so both
// endpoint singularities sit at an exactly representable small argument.
inline double beta_function_quadrature(double a, double b) {
  return tanh_sinh(
      [&](double s) {
        return std::pow(s, a - 1.0) * std::pow(1.0 - s, b - 1.0) +
               std::pow(1.0 - s, a - 1.0) * std::pow(s, b - 1.0);
      },
      0.0, 0.5, 12);
}

struct BatchStats {
  double mean = 0.0;
  double variance = 0.0;  // population
};

// Two-pass mean and population variance in long double.
inline BatchStats two_pass(std::span<const double> xs) {
  long double s = 0.0L;
  for (double x : xs) s += x;
  const long double m = s / static_cast<long double>(xs.size());
  long double ss = 0.0L;
  for (double x : xs) ss += (x - m) * (x - m);
  return {static_cast<double>(m), static_cast<double>(ss / static_cast<long double>(xs.size()))};
}

// Exact same-cell probability of two independent uniforms on an interval of
// width 2 gamma under a uniformly random cell offset, for alpha <= 2 gamma:
//   integral_0^alpha (1 - d/alpha) (2 gamma - d) / (2 gamma^2) dd
//   = alpha / (2 gamma) - alpha^2 / (12 gamma^2).
inline double exact_independent_collision(double gamma, double alpha) {
  return alpha / (2.0 * gamma) - alpha * alpha / (12.0 * gamma * gamma);
}

struct Proportion {
  double rate = 0.0;
  double std_error = 0.0;
};

// Fraction of pairs (m1, m2), independent uniforms on [centre - gamma,
// centre + gamma], quantized to the same midpoint when each pair gets a fresh
// offset drawn uniformly from [0, alpha]. The measure interval is wide enough
// that the uniforms never reach its edges.
inline Proportion simulate_collision(double gamma, double alpha, std::size_t pairs, Rng& rng) {
  const double centre = 10.0 * (gamma + alpha);
  const double low = 0.0;
  const double high = 20.0 * (gamma + alpha);
  std::size_t same = 0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const double offset = alpha * rng.uniform();
    const Partition p = build_partition(low, high, alpha, offset);
    const double m1 = centre + gamma * (2.0 * rng.uniform() - 1.0);
    const double m2 = centre + gamma * (2.0 * rng.uniform() - 1.0);
    if (quantize(m1, p).cell == quantize(m2, p).cell) ++same;
  }
  const double rate = static_cast<double>(same) / static_cast<double>(pairs);
  return {rate, std::sqrt(rate * (1.0 - rate) / static_cast<double>(pairs))};
}

}  // namespace repsq::testing
