#include "repsq/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "repsq/error.hpp"

namespace repsq {

void EstimatorState::update(double x) {
  if (!std::isfinite(x)) throw DomainError("weighted measure must be finite");
  ++n_;
  const double delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (x - mean_);
  if (m2_ < 0.0) m2_ = 0.0;
}

EstimatorState update(EstimatorState state, double weighted_measure) {
  state.update(weighted_measure);
  return state;
}

std::string_view to_string(RangeTermMode mode) noexcept {
  return mode == RangeTermMode::kPaperExact ? "paper_exact" : "linear_range";
}

std::optional<RangeTermMode> parse_range_term_mode(std::string_view text) noexcept {
  if (text == "paper_exact" || text == "paper-exact") return RangeTermMode::kPaperExact;
  if (text == "linear_range" || text == "linear-range") return RangeTermMode::kLinearRange;
  return std::nullopt;
}

void BoundSpec::validate() const {
  if (!(std::isfinite(m) && m > 0.0)) throw DomainError("measure range m must be positive");
  if (!(std::isfinite(w_bar) && w_bar >= 1.0))
    throw DomainError("importance-weight bound w_bar must be >= 1");
  if (!(c > 0.0 && c < 1.0)) throw DomainError("c must lie in (0, 1)");
  if (joint && !(std::isfinite(*joint) && *joint > 0.0))
    throw DomainError("joint measure-weight bound must be positive and finite");
  if (!std::isfinite(range())) throw DomainError("m * w_bar must be finite");
}

double bernstein_radius(std::uint64_t n, double variance, const BoundSpec& bounds,
                        RangeTermMode mode) {
  if (n < 2) throw InsufficientSamples("empirical-Bernstein radius needs n >= 2");
  const double log_term = std::log(2.0 / bounds.c);
  const double nn = static_cast<double>(n);
  const double r = bounds.range();
  const double range_term = mode == RangeTermMode::kPaperExact ? r * r : r;
  return std::sqrt(2.0 * variance * log_term / nn) +
         7.0 * range_term * log_term / (3.0 * (nn - 1.0));
}

double bernstein_radius(const EstimatorState& state, const BoundSpec& bounds,
                        RangeTermMode mode) {
  return bernstein_radius(state.n(), state.variance(), bounds, mode);
}

double hoeffding_radius(std::uint64_t n, const BoundSpec& bounds) {
  if (n < 1) throw InsufficientSamples("Hoeffding radius needs n >= 1");
  return bounds.range() * std::sqrt(std::log(2.0 / bounds.c) / (2.0 * static_cast<double>(n)));
}

std::uint64_t required_n_hoeffding(double gamma, const BoundSpec& bounds) {
  if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
  const double r = bounds.range();
  const double exact = r * r * std::log(2.0 / bounds.c) / (2.0 * gamma * gamma);
  if (!(exact < 9.0e18)) throw DomainError("required sample size overflows");
  auto n = static_cast<std::uint64_t>(std::ceil(exact));
  if (n < 1) n = 1;
  // ceil() of a rounded quotient can land one step either side of the
  // smallest n that satisfies the radius; settle it on the radius itself.
  while (n > 1 && hoeffding_radius(n - 1, bounds) <= gamma) --n;
  while (hoeffding_radius(n, bounds) > gamma) ++n;
  return n;
}

std::string_view to_string(TerminationReason reason) noexcept {
  switch (reason) {
    case TerminationReason::kBernstein: return "bernstein";
    case TerminationReason::kHoeffding: return "hoeffding";
    case TerminationReason::kNone: break;
  }
  return "none";
}

TerminationCheck check_termination(const EstimatorState& state, double gamma,
                                   const BoundSpec& bounds, RangeTermMode mode) {
  TerminationCheck out;
  if (state.n() < 2) {
    out.bernstein = std::numeric_limits<double>::infinity();
    out.hoeffding = state.n() == 1 ? hoeffding_radius(1, bounds)
                                   : std::numeric_limits<double>::infinity();
    return out;
  }
  out.bernstein = bernstein_radius(state, bounds, mode);
  out.hoeffding = hoeffding_radius(state.n(), bounds);
  if (std::min(out.bernstein, out.hoeffding) <= gamma) {
    out.terminate = true;
    out.reason = out.bernstein <= out.hoeffding ? TerminationReason::kBernstein
                                                : TerminationReason::kHoeffding;
  }
  return out;
}

bool should_terminate(const EstimatorState& state, double gamma, const BoundSpec& bounds,
                      RangeTermMode mode) {
  return check_termination(state, gamma, bounds, mode).terminate;
}

}  // namespace repsq
