#pragma once

// Target and proposal distributions, importance weights, and the adaptive
// Beta proposal with mixture sampling.

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "repsq/rng.hpp"

namespace repsq {

// A test case. Continuous spaces use one coordinate per dimension; discrete
// spaces use a single coordinate holding the cell index.
using Point = std::vector<double>;

struct BoxDomain {
  std::vector<double> lo;
  std::vector<double> hi;

  static BoxDomain cube(std::size_t dims, double lo, double hi);

  std::size_t dims() const noexcept { return lo.size(); }
  double volume() const noexcept;
  bool contains(const Point& x) const noexcept;
  void validate() const;
};

class Distribution {
 public:
  virtual ~Distribution() = default;
  virtual Point sample(Rng& rng) const = 0;
  // Density for continuous spaces, probability mass for discrete ones.
  virtual double density(const Point& x) const = 0;
  virtual std::size_t dims() const noexcept = 0;
  virtual bool discrete() const noexcept { return false; }
};

class DiscreteDistribution final : public Distribution {
 public:
  // Masses must be non-negative and sum to 1 within 1e-12.
  explicit DiscreteDistribution(std::vector<double> masses);

  Point sample(Rng& rng) const override;
  double density(const Point& x) const override;
  std::size_t dims() const noexcept override { return 1; }
  bool discrete() const noexcept override { return true; }

  std::size_t size() const noexcept { return masses_.size(); }
  double mass(std::size_t k) const { return masses_.at(k); }
  const std::vector<double>& masses() const noexcept { return masses_; }
  std::size_t sample_index(Rng& rng) const;

 private:
  std::vector<double> masses_;
  std::vector<double> cdf_;
  std::size_t last_positive_ = 0;
};

class UniformBox final : public Distribution {
 public:
  explicit UniformBox(BoxDomain domain);

  Point sample(Rng& rng) const override;
  double density(const Point& x) const override;
  std::size_t dims() const noexcept override { return domain_.dims(); }
  const BoxDomain& domain() const noexcept { return domain_; }

 private:
  BoxDomain domain_;
  double inv_volume_;
};

inline constexpr double kShapeMin = 0.05;
inline constexpr double kShapeMax = 100.0;

double clamp_shape(double s) noexcept;

// Beta(a, b) density on [lo, hi], including the 1/(hi - lo) Jacobian.
double beta_density(double x, double a, double b, double lo, double hi);

// Beta(a, b) draw mapped to [lo, hi]. The unit-scale variate is kept within
// [2^-53, 1 - 2^-53] so densities stay finite at the draw.
double beta_sample(double a, double b, double lo, double hi, Rng& rng);

// inf over (0,1) of the unit Beta(a, b) density; 0 when a > 1 or b > 1.
double beta_min_density(double a, double b);

struct BetaShape {
  double a = 1.0;
  double b = 1.0;
};

// Method of moments on u = (x - lo)/(hi - lo):
//   k = mean (1 - mean) / var - 1,  (a, b) = (mean k, (1 - mean) k),
// clamped to [kShapeMin, kShapeMax]. Throws DegenerateBatch when the batch has
// no spread or its mean sits on an endpoint.
BetaShape fit_beta(std::span<const double> samples, double lo, double hi);

// Weighted moments; weights need not be normalized.
BetaShape fit_beta(std::span<const double> samples, std::span<const double> weights, double lo,
                   double hi);

// Product of per-dimension linearly mapped Beta densities on a box.
class BetaProposal final : public Distribution {
 public:
  BetaProposal(BoxDomain domain, std::vector<double> a, std::vector<double> b);
  static BetaProposal uniform_like(BoxDomain domain, double shape);

  Point sample(Rng& rng) const override;
  double density(const Point& x) const override;
  std::size_t dims() const noexcept override { return domain_.dims(); }

  const BoxDomain& domain() const noexcept { return domain_; }
  const std::vector<double>& a() const noexcept { return a_; }
  const std::vector<double>& b() const noexcept { return b_; }

 private:
  BoxDomain domain_;
  std::vector<double> a_;
  std::vector<double> b_;
  std::vector<double> log_norm_;  // -log B(a,b) - log(hi - lo), per dimension
};

struct AisPolicy {
  double mix_p = 0.1;
  std::size_t batch_size = 30;
  double learning_rate = 0.1;
  double initial_shape = 0.99;

  void validate() const;
};

// Per dimension: fit a Beta to the batch coordinates, then
//   a <- (1 - lr) a + lr a',  b <- (1 - lr) b + lr b'.
// Dimensions whose batch is degenerate keep their shapes.
BetaProposal ais_update(const BetaProposal& current, std::span<const Point> batch,
                        const AisPolicy& policy, std::span<const double> fit_weights = {});

struct WeightedDraw {
  Point point;
  double weight = 1.0;
};

// p(x) / (mix_p p(x) + (1 - mix_p) q(x)).
double mixture_weight(const Distribution& p, const BetaProposal& q, double mix_p, const Point& x);

// Draw from the mixture (p with probability mix_p, else q) with its weight.
WeightedDraw mixture_sample(const Distribution& p, const BetaProposal& q, double mix_p, Rng& rng);

// Provable sup of mixture_weight when p is uniform on q's box.
double mixture_weight_bound(const BetaProposal& q, double mix_p);

struct ImportanceWeight {
  double value = 1.0;
  bool exceeds_cap = false;  // value > declared w_bar; diagnostic only
};

ImportanceWeight importance_weight(const Distribution& p, const Distribution& q, const Point& x,
                                   double w_bar = std::numeric_limits<double>::infinity());

// Campaign-scoped sampling strategy. Draw returns a test case with the
// importance weight of the proposal in force when it was drawn; observe feeds
// back the evaluated measure.
class Sampler {
 public:
  virtual ~Sampler() = default;
  virtual WeightedDraw draw(Rng& rng) = 0;
  virtual void observe(const Point& /*x*/, double /*psi*/, double /*weight*/) {}
  // Provable sup of the weights this sampler can emit (may be +inf).
  virtual double weight_bound() const = 0;
  virtual std::string name() const = 0;
};

class MonteCarloSampler final : public Sampler {
 public:
  explicit MonteCarloSampler(const Distribution& target) : p_(target) {}
  WeightedDraw draw(Rng& rng) override { return {p_.sample(rng), 1.0}; }
  double weight_bound() const override { return 1.0; }
  std::string name() const override { return "monte_carlo"; }

 private:
  const Distribution& p_;
};

// Fixed proposal q; weights p/q.
class ImportanceSampler final : public Sampler {
 public:
  ImportanceSampler(const Distribution& target, const Distribution& proposal, double bound)
      : p_(target), q_(proposal), bound_(bound) {}
  WeightedDraw draw(Rng& rng) override;
  double weight_bound() const override { return bound_; }
  std::string name() const override { return "importance"; }

 private:
  const Distribution& p_;
  const Distribution& q_;
  double bound_;
};

// Fixed Beta proposal mixed with the target.
class MixtureSampler final : public Sampler {
 public:
  MixtureSampler(const Distribution& target, BetaProposal proposal, double mix_p, double bound);
  WeightedDraw draw(Rng& rng) override { return mixture_sample(p_, q_, mix_p_, rng); }
  double weight_bound() const override { return bound_; }
  std::string name() const override { return "importance"; }

 private:
  const Distribution& p_;
  BetaProposal q_;
  double mix_p_;
  double bound_;
};

struct ShapeSnapshot {
  std::size_t batch = 0;
  std::vector<double> a;
  std::vector<double> b;
};

// Adaptive Beta proposal, refit every batch_size draws. The batch fit is
// weighted by psi * w so the proposal drifts toward p * psi.
class AdaptiveSampler final : public Sampler {
 public:
  AdaptiveSampler(const Distribution& target, const BoxDomain& domain, AisPolicy policy);
  WeightedDraw draw(Rng& rng) override { return mixture_sample(p_, q_, policy_.mix_p, rng); }
  void observe(const Point& x, double psi, double weight) override;
  double weight_bound() const override;
  std::string name() const override { return "ais"; }

  const BetaProposal& proposal() const noexcept { return q_; }
  const std::vector<ShapeSnapshot>& trajectory() const noexcept { return trajectory_; }

 private:
  const Distribution& p_;
  BetaProposal q_;
  AisPolicy policy_;
  std::vector<Point> batch_;
  std::vector<double> batch_weights_;
  std::vector<ShapeSnapshot> trajectory_;
};

}  // namespace repsq
