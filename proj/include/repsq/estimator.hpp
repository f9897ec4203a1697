#pragma once

// Streaming weighted-measure estimator and its termination radii.

#include <cstdint>
#include <optional>
#include <string_view>

namespace repsq {

// Running count, mean and sum of squared deviations (Welford).
// Variance is the population form m2 / n.
class EstimatorState {
 public:
  EstimatorState() = default;

  std::uint64_t n() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  double m2() const noexcept { return m2_; }
  double variance() const noexcept { return n_ == 0 ? 0.0 : m2_ / static_cast<double>(n_); }

  // Throws DomainError on non-finite input.
  void update(double weighted_measure);

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

EstimatorState update(EstimatorState state, double weighted_measure);

// Second term of the empirical-Bernstein radius uses the squared range as
// printed (paper_exact) or the linear range (linear_range).
enum class RangeTermMode { kPaperExact, kLinearRange };

std::string_view to_string(RangeTermMode mode) noexcept;
std::optional<RangeTermMode> parse_range_term_mode(std::string_view text) noexcept;

struct BoundSpec {
  double m = 1.0;      // measure range m_high - m_low
  double w_bar = 1.0;  // importance-weight upper bound
  double c = 0.05;     // accuracy failure probability
  // Optional direct bound on |psi * w| replacing the product m * w_bar.
  std::optional<double> joint = std::nullopt;

  double range() const noexcept { return joint ? *joint : m * w_bar; }
  void validate() const;
};

// sqrt(2 var ln(2/c) / n) + 7 R^k ln(2/c) / (3 (n - 1)), R = range(), k = 2 or 1.
double bernstein_radius(const EstimatorState& state, const BoundSpec& bounds,
                        RangeTermMode mode = RangeTermMode::kPaperExact);

// Same radius from raw ingredients; used for tables and tests.
double bernstein_radius(std::uint64_t n, double variance, const BoundSpec& bounds,
                        RangeTermMode mode = RangeTermMode::kPaperExact);

// R sqrt(ln(2/c) / (2 n)): the tolerance at which Hoeffding's two-sided tail equals c.
double hoeffding_radius(std::uint64_t n, const BoundSpec& bounds);

// Smallest n with hoeffding_radius(n) <= gamma.
std::uint64_t required_n_hoeffding(double gamma, const BoundSpec& bounds);

enum class TerminationReason { kNone, kBernstein, kHoeffding };

std::string_view to_string(TerminationReason reason) noexcept;

struct TerminationCheck {
  bool terminate = false;
  TerminationReason reason = TerminationReason::kNone;
  double bernstein = 0.0;
  double hoeffding = 0.0;
};

// Evaluates both radii; never terminates before n = 2.
TerminationCheck check_termination(const EstimatorState& state, double gamma,
                                   const BoundSpec& bounds,
                                   RangeTermMode mode = RangeTermMode::kPaperExact);

bool should_terminate(const EstimatorState& state, double gamma, const BoundSpec& bounds,
                      RangeTermMode mode = RangeTermMode::kPaperExact);

}  // namespace repsq
