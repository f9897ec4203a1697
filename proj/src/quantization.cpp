#include "repsq/quantization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "repsq/error.hpp"

namespace repsq {
namespace {

// Rounding can push a zero discriminant slightly negative.
constexpr double kDiscriminantSlack = 1e-15;
constexpr double kMergeTolerance = 1e-12;

double discriminant(const AccuracySpec& s) {
  const double q = 1.0 - s.c;
  return q * q - (1.0 - s.beta);
}

}  // namespace

void AccuracySpec::validate() const {
  if (!(std::isfinite(gamma) && gamma > 0.0))
    throw DomainError("gamma must be positive and finite, got " + std::to_string(gamma));
  if (!(c > 0.0 && c < 1.0)) throw DomainError("c must lie in (0, 1), got " + std::to_string(c));
  if (!(beta > 0.0 && beta < 1.0))
    throw DomainError("beta must lie in (0, 1), got " + std::to_string(beta));
  if (!feasible()) {
    throw InfeasibleRepeatability(
        "repeatability confidence exceeds squared accuracy confidence: (1-c)^2 = " +
        std::to_string((1.0 - c) * (1.0 - c)) + " < 1-beta = " + std::to_string(1.0 - beta));
  }
}

bool AccuracySpec::feasible() const noexcept {
  return discriminant(*this) >= -kDiscriminantSlack;
}

AlphaRoots alpha_roots(const AccuracySpec& spec) {
  spec.validate();
  const double q = 1.0 - spec.c;
  const double root = std::sqrt(std::max(0.0, discriminant(spec)));
  // q - root rewritten as (1-beta)/(q+root) to avoid cancellation when beta -> 1.
  AlphaRoots r;
  r.smaller = 2.0 * spec.gamma * (1.0 - spec.beta) / (q * (q + root));
  r.larger = 2.0 * spec.gamma * (q + root) / q;
  return r;
}

double compute_alpha(const AccuracySpec& spec) {
  const double alpha = alpha_roots(spec).smaller;
  return std::min(alpha, 2.0 * spec.gamma);
}

double quantized_tolerance(const AccuracySpec& spec) {
  return spec.gamma + 0.5 * compute_alpha(spec);
}

double collision_probability_lower_bound(double gamma, double alpha) {
  if (!(gamma > 0.0) || !(alpha > 0.0))
    throw DomainError("collision bound needs positive gamma and alpha");
  if (alpha > 2.0 * gamma) throw DomainError("collision bound needs alpha <= 2 gamma");
  return (4.0 * gamma * alpha - alpha * alpha) / (4.0 * gamma * gamma);
}

Partition::Partition(double m_low, double m_high, double alpha, double offset)
    : m_low_(m_low), m_high_(m_high), alpha_(alpha), offset_(offset), first_(0.0) {
  if (!(std::isfinite(m_low) && std::isfinite(m_high)) || !(m_high > m_low))
    throw DomainError("partition interval must be finite with m_high > m_low");
  if (!(std::isfinite(alpha) && alpha > 0.0)) throw DomainError("alpha must be positive");
  if (!(offset >= 0.0 && offset <= alpha)) throw DomainError("offset must lie in [0, alpha]");
  const double scale = std::max(std::abs(m_low), std::abs(m_high));
  if (alpha <= 4.0 * std::numeric_limits<double>::epsilon() * scale)
    throw DomainError("alpha is below the floating-point resolution of the interval");

  first_ = offset > 0.0 ? offset : alpha;
  // An offset below the resolution of m_low would make a zero-length first
  // cell; fold it into the next one.
  if (!(m_low_ + first_ > m_low_)) first_ += alpha;
  const double span = m_high - m_low;
  if (span <= alpha) {
    interior_ = 0;
    return;
  }
  const double limit = m_high - kMergeTolerance * alpha;
  const double estimate = std::ceil((span - first_) / alpha);
  std::size_t k = estimate > 0.0 ? static_cast<std::size_t>(estimate) : 0;
  while (k > 0 && !(interior_boundary(k - 1) < limit)) --k;
  while (interior_boundary(k) < limit) ++k;
  interior_ = k;
}

double Partition::boundary(std::size_t j) const {
  if (j == 0) return m_low_;
  if (j <= interior_) return interior_boundary(j - 1);
  if (j == interior_ + 1) return m_high_;
  throw DomainError("boundary index out of range");
}

std::vector<double> Partition::boundaries() const {
  std::vector<double> out;
  out.reserve(boundary_count());
  for (std::size_t j = 0; j < boundary_count(); ++j) out.push_back(boundary(j));
  return out;
}

std::size_t Partition::cell_of(double v) const {
  if (!(v >= m_low_ && v <= m_high_)) throw DomainError("value outside the partition interval");
  if (interior_ == 0) return 0;
  const double guess = std::floor((v - m_low_ - first_) / alpha_) + 1.0;
  std::size_t j = 0;
  if (guess > 0.0) j = std::min<std::size_t>(interior_, static_cast<std::size_t>(guess));
  // The arithmetic guess may be off by one either way; settle it against the
  // stored boundary values so membership is decided by exact comparison.
  while (j < interior_ && boundary(j + 1) <= v) ++j;
  while (j > 0 && boundary(j) > v) --j;
  return j;
}

double Partition::midpoint(std::size_t cell) const {
  return 0.5 * (boundary(cell) + boundary(cell + 1));
}

double Partition::cell_length(std::size_t cell) const {
  return boundary(cell + 1) - boundary(cell);
}

Partition build_partition(double m_low, double m_high, double alpha, double offset) {
  return Partition(m_low, m_high, alpha, offset);
}

Quantized quantize(double value, const Partition& partition) {
  if (std::isnan(value)) throw DomainError("cannot quantize NaN");
  Quantized q;
  double v = value;
  if (v < partition.m_low() || v > partition.m_high()) {
    q.clamped = true;
    v = std::clamp(v, partition.m_low(), partition.m_high());
  }
  q.cell = partition.cell_of(v);
  q.value = partition.midpoint(q.cell);
  return q;
}

}  // namespace repsq
