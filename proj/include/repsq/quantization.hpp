#pragma once

// Output quantization for repeatable statistical queries.
//
// A gamma-accurate estimator becomes repeatable by reporting the midpoint of
// the cell of a fixed almost-uniform alpha-partition that contains its raw
// output. Cells are half-open [x_{j}, x_{j+1}) except the last, which is
// closed, so every value of [m_low, m_high] has exactly one home.

#include <cstddef>
#include <vector>

namespace repsq {

struct AccuracySpec {
  double gamma = 0.0;  // accuracy tolerance, measure units
  double c = 0.0;      // accuracy failure probability
  double beta = 0.0;   // repeatability failure probability

  // Throws DomainError or InfeasibleRepeatability.
  void validate() const;
  bool feasible() const noexcept;
};

struct AlphaRoots {
  double smaller = 0.0;
  double larger = 0.0;
};

// Both roots of (1-c)^2 (4 gamma a - a^2) = 4 gamma^2 (1-beta) in a.
AlphaRoots alpha_roots(const AccuracySpec& spec);

// Quantization width: the smaller root above.
double compute_alpha(const AccuracySpec& spec);

// gamma + alpha/2, the accuracy guaranteed after quantization.
double quantized_tolerance(const AccuracySpec& spec);

// (4 gamma alpha - alpha^2) / (4 gamma^2), for 0 < alpha <= 2 gamma.
double collision_probability_lower_bound(double gamma, double alpha);

// Almost-uniform alpha-partition of [m_low, m_high].
//
// Boundaries are a pure function of (m_low, m_high, alpha, offset):
//   x_0 = m_low,
//   x_j = m_low + (first + (j-1) * alpha)   for 1 <= j <= K,
//   x_{K+1} = m_high,
// with first = offset, or alpha when offset is 0. Interior boundaries within
// 1e-12 * alpha of m_high are dropped. Cells are located arithmetically, so
// partitions with hundreds of millions of cells cost O(1) memory, and two
// builds from the same four doubles agree bit for bit.
class Partition {
 public:
  Partition(double m_low, double m_high, double alpha, double offset);

  double m_low() const noexcept { return m_low_; }
  double m_high() const noexcept { return m_high_; }
  double alpha() const noexcept { return alpha_; }
  double offset() const noexcept { return offset_; }

  std::size_t cell_count() const noexcept { return interior_ + 1; }
  std::size_t boundary_count() const noexcept { return interior_ + 2; }
  double boundary(std::size_t j) const;
  std::vector<double> boundaries() const;

  // Index of the cell containing v; v must lie in [m_low, m_high].
  std::size_t cell_of(double v) const;
  double midpoint(std::size_t cell) const;
  double cell_length(std::size_t cell) const;

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  double interior_boundary(std::size_t k) const noexcept {
    return m_low_ + (first_ + static_cast<double>(k) * alpha_);
  }

  double m_low_;
  double m_high_;
  double alpha_;
  double offset_;
  double first_;
  std::size_t interior_ = 0;
};

Partition build_partition(double m_low, double m_high, double alpha, double offset = 0.0);

struct Quantized {
  double value = 0.0;     // cell midpoint
  std::size_t cell = 0;
  bool clamped = false;   // raw value lay outside [m_low, m_high]
};

Quantized quantize(double value, const Partition& partition);

}  // namespace repsq
