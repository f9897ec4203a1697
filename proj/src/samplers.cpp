#include "repsq/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "repsq/error.hpp"

namespace repsq {
namespace {

constexpr double kUnitFloor = 0x1.0p-53;
constexpr double kDegenerateTol = 1e-12;

double log_beta_fn(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Unit-interval Beta density from its log normalizer.
double unit_beta_density(double u, double a, double b, double log_norm) {
  if (u <= 0.0) {
    if (a < 1.0) return std::numeric_limits<double>::infinity();
    if (a > 1.0) return 0.0;
    return std::exp(log_norm);
  }
  if (u >= 1.0) {
    if (b < 1.0) return std::numeric_limits<double>::infinity();
    if (b > 1.0) return 0.0;
    return std::exp(log_norm);
  }
  return std::exp((a - 1.0) * std::log(u) + (b - 1.0) * std::log1p(-u) + log_norm);
}

void check_shapes(double a, double b) {
  if (!(a > 0.0 && b > 0.0 && std::isfinite(a) && std::isfinite(b)))
    throw DomainError("Beta shapes must be positive and finite");
}

}  // namespace

BoxDomain BoxDomain::cube(std::size_t dims, double lo, double hi) {
  BoxDomain d{std::vector<double>(dims, lo), std::vector<double>(dims, hi)};
  d.validate();
  return d;
}

double BoxDomain::volume() const noexcept {
  double v = 1.0;
  for (std::size_t k = 0; k < dims(); ++k) v *= hi[k] - lo[k];
  return v;
}

bool BoxDomain::contains(const Point& x) const noexcept {
  if (x.size() != dims()) return false;
  for (std::size_t k = 0; k < dims(); ++k)
    if (!(x[k] >= lo[k] && x[k] <= hi[k])) return false;
  return true;
}

void BoxDomain::validate() const {
  if (lo.empty() || lo.size() != hi.size())
    throw DomainError("box domain needs matching, non-empty bounds");
  for (std::size_t k = 0; k < dims(); ++k)
    if (!(std::isfinite(lo[k]) && std::isfinite(hi[k]) && lo[k] < hi[k]))
      throw DomainError("box domain needs lo[k] < hi[k] in every dimension");
}

DiscreteDistribution::DiscreteDistribution(std::vector<double> masses)
    : masses_(std::move(masses)) {
  if (masses_.empty()) throw DomainError("discrete distribution needs at least one cell");
  double total = 0.0;
  cdf_.reserve(masses_.size());
  for (std::size_t k = 0; k < masses_.size(); ++k) {
    if (!(masses_[k] >= 0.0 && std::isfinite(masses_[k])))
      throw DomainError("discrete masses must be non-negative and finite");
    total += masses_[k];
    cdf_.push_back(total);
    if (masses_[k] > 0.0) last_positive_ = k;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("discrete masses must sum to 1");
}

std::size_t DiscreteDistribution::sample_index(Rng& rng) const {
  const double u = rng.uniform();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) return last_positive_;
  return static_cast<std::size_t>(it - cdf_.begin());
}

Point DiscreteDistribution::sample(Rng& rng) const {
  return Point{static_cast<double>(sample_index(rng))};
}

double DiscreteDistribution::density(const Point& x) const {
  if (x.size() != 1 || !(x[0] >= 0.0) || x[0] != std::floor(x[0]) ||
      x[0] >= static_cast<double>(masses_.size()))
    throw DomainError("point is not a cell of this discrete distribution");
  return masses_[static_cast<std::size_t>(x[0])];
}

UniformBox::UniformBox(BoxDomain domain) : domain_(std::move(domain)), inv_volume_(0.0) {
  domain_.validate();
  inv_volume_ = 1.0 / domain_.volume();
}

Point UniformBox::sample(Rng& rng) const {
  Point x(domain_.dims());
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = rng.uniform(domain_.lo[k], domain_.hi[k]);
  return x;
}

double UniformBox::density(const Point& x) const {
  return domain_.contains(x) ? inv_volume_ : 0.0;
}

double clamp_shape(double s) noexcept { return std::clamp(s, kShapeMin, kShapeMax); }

double beta_density(double x, double a, double b, double lo, double hi) {
  check_shapes(a, b);
  if (!(lo < hi)) throw DomainError("Beta support needs lo < hi");
  if (!(x >= lo && x <= hi)) throw DomainError("x lies outside the Beta support");
  const double width = hi - lo;
  const double u = (x - lo) / width;
  return unit_beta_density(u, a, b, -log_beta_fn(a, b)) / width;
}

double beta_sample(double a, double b, double lo, double hi, Rng& rng) {
  check_shapes(a, b);
  double u;
  if (a >= 1.0 && b >= 1.0) {
    const double x = rng.gamma(a);
    const double y = rng.gamma(b);
    u = x / (x + y);
  } else {
    // Log space keeps tiny shapes from underflowing both gamma variates to 0.
    const double lx = rng.log_gamma_variate(a);
    const double ly = rng.log_gamma_variate(b);
    u = 1.0 / (1.0 + std::exp(ly - lx));
  }
  u = std::clamp(u, kUnitFloor, 1.0 - kUnitFloor);
  return lo + (hi - lo) * u;
}

double beta_min_density(double a, double b) {
  check_shapes(a, b);
  if (a > 1.0 || b > 1.0) return 0.0;
  if (a == 1.0 && b == 1.0) return 1.0;
  if (a == 1.0) return b;  // (1-u)^(b-1) b, smallest at u = 0
  if (b == 1.0) return a;
  const double u = (1.0 - a) / (2.0 - a - b);
  return unit_beta_density(u, a, b, -log_beta_fn(a, b));
}

BetaShape fit_beta(std::span<const double> samples, double lo, double hi) {
  const std::vector<double> ones(samples.size(), 1.0);
  return fit_beta(samples, ones, lo, hi);
}

BetaShape fit_beta(std::span<const double> samples, std::span<const double> weights, double lo,
                   double hi) {
  if (samples.size() < 2) throw DomainError("Beta fit needs at least two samples");
  if (weights.size() != samples.size()) throw DomainError("one fit weight per sample");
  if (!(lo < hi)) throw DomainError("Beta support needs lo < hi");
  const double width = hi - lo;
  double total = 0.0;
  double mean = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!(samples[i] >= lo && samples[i] <= hi)) throw DomainError("sample outside [lo, hi]");
    if (!(weights[i] >= 0.0 && std::isfinite(weights[i])))
      throw DomainError("fit weights must be non-negative and finite");
    total += weights[i];
    mean += weights[i] * ((samples[i] - lo) / width);
  }
  if (!(total > 0.0)) throw DegenerateBatch("batch carries no fit weight");
  mean /= total;
  double var = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double d = (samples[i] - lo) / width - mean;
    var += weights[i] * d * d;
  }
  var /= total;
  if (var <= kDegenerateTol) throw DegenerateBatch("batch has no spread");
  if (mean <= kDegenerateTol || mean >= 1.0 - kDegenerateTol)
    throw DegenerateBatch("batch mean sits on an endpoint");
  const double k = mean * (1.0 - mean) / var - 1.0;
  return {clamp_shape(mean * k), clamp_shape((1.0 - mean) * k)};
}

BetaProposal::BetaProposal(BoxDomain domain, std::vector<double> a, std::vector<double> b)
    : domain_(std::move(domain)), a_(std::move(a)), b_(std::move(b)) {
  domain_.validate();
  if (a_.size() != domain_.dims() || b_.size() != domain_.dims())
    throw DomainError("one (a, b) pair per box dimension");
  log_norm_.resize(domain_.dims());
  for (std::size_t k = 0; k < domain_.dims(); ++k) {
    check_shapes(a_[k], b_[k]);
    a_[k] = clamp_shape(a_[k]);
    b_[k] = clamp_shape(b_[k]);
    log_norm_[k] = -log_beta_fn(a_[k], b_[k]);
  }
}

BetaProposal BetaProposal::uniform_like(BoxDomain domain, double shape) {
  const std::size_t d = domain.dims();
  return BetaProposal(std::move(domain), std::vector<double>(d, shape),
                      std::vector<double>(d, shape));
}

Point BetaProposal::sample(Rng& rng) const {
  Point x(dims());
  for (std::size_t k = 0; k < x.size(); ++k)
    x[k] = beta_sample(a_[k], b_[k], domain_.lo[k], domain_.hi[k], rng);
  return x;
}

double BetaProposal::density(const Point& x) const {
  if (!domain_.contains(x)) return 0.0;
  double d = 1.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double width = domain_.hi[k] - domain_.lo[k];
    d *= unit_beta_density((x[k] - domain_.lo[k]) / width, a_[k], b_[k], log_norm_[k]) / width;
  }
  return d;
}

void AisPolicy::validate() const {
  if (!(mix_p >= 0.0 && mix_p <= 1.0)) throw DomainError("mix_p must lie in [0, 1]");
  if (batch_size < 2) throw DomainError("AIS batch size must be >= 2");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0))
    throw DomainError("learning rate must lie in (0, 1]");
  if (!(initial_shape > 0.0)) throw DomainError("initial shape must be positive");
}

BetaProposal ais_update(const BetaProposal& current, std::span<const Point> batch,
                        const AisPolicy& policy, std::span<const double> fit_weights) {
  policy.validate();
  if (batch.size() != policy.batch_size) throw DomainError("AIS batch length must equal d");
  if (!fit_weights.empty() && fit_weights.size() != batch.size())
    throw DomainError("one fit weight per batch point");
  const auto& dom = current.domain();
  std::vector<double> a = current.a();
  std::vector<double> b = current.b();
  std::vector<double> coords(batch.size());
  const std::vector<double> ones(batch.size(), 1.0);
  const std::span<const double> w = fit_weights.empty() ? std::span<const double>(ones) : fit_weights;
  const double lr = policy.learning_rate;
  for (std::size_t k = 0; k < dom.dims(); ++k) {
    for (std::size_t i = 0; i < batch.size(); ++i) coords[i] = batch[i].at(k);
    try {
      const BetaShape fit = fit_beta(coords, w, dom.lo[k], dom.hi[k]);
      a[k] = clamp_shape((1.0 - lr) * a[k] + lr * fit.a);
      b[k] = clamp_shape((1.0 - lr) * b[k] + lr * fit.b);
    } catch (const DegenerateBatch&) {
      // keep this dimension's shapes
    }
  }
  return BetaProposal(dom, std::move(a), std::move(b));
}

double mixture_weight(const Distribution& p, const BetaProposal& q, double mix_p, const Point& x) {
  const double px = p.density(x);
  if (px == 0.0) return 0.0;
  const double qx = q.density(x);
  const double denom = mix_p * px + (1.0 - mix_p) * qx;
  if (!(denom > 0.0))
    throw ZeroProposalDensity("mixture proposal has zero density where the target is positive");
  if (std::isinf(denom)) return 0.0;
  const double w = px / denom;
  // Exact arithmetic gives w <= 1/mix_p; drop the rounding excess.
  return mix_p > 0.0 ? std::min(w, 1.0 / mix_p) : w;
}

WeightedDraw mixture_sample(const Distribution& p, const BetaProposal& q, double mix_p,
                            Rng& rng) {
  if (!(mix_p >= 0.0 && mix_p <= 1.0)) throw DomainError("mix_p must lie in [0, 1]");
  if (p.dims() != q.dims()) throw DomainError("target and proposal dimensions differ");
  WeightedDraw out;
  out.point = rng.uniform() < mix_p ? p.sample(rng) : q.sample(rng);
  out.weight = mixture_weight(p, q, mix_p, out.point);
  return out;
}

double mixture_weight_bound(const BetaProposal& q, double mix_p) {
  double min_ratio = 1.0;
  for (std::size_t k = 0; k < q.dims(); ++k) min_ratio *= beta_min_density(q.a()[k], q.b()[k]);
  const double denom = mix_p + (1.0 - mix_p) * min_ratio;
  return denom > 0.0 ? 1.0 / denom : std::numeric_limits<double>::infinity();
}

ImportanceWeight importance_weight(const Distribution& p, const Distribution& q, const Point& x,
                                   double w_bar) {
  const double px = p.density(x);
  const double qx = q.density(x);
  ImportanceWeight w;
  if (!(qx > 0.0)) {
    if (px > 0.0) throw ZeroProposalDensity("proposal has zero density where the target is positive");
    w.value = 0.0;
    return w;
  }
  w.value = std::isinf(qx) ? 0.0 : px / qx;
  w.exceeds_cap = w.value > w_bar;
  return w;
}

WeightedDraw ImportanceSampler::draw(Rng& rng) {
  WeightedDraw out;
  out.point = q_.sample(rng);
  out.weight = importance_weight(p_, q_, out.point).value;
  return out;
}

MixtureSampler::MixtureSampler(const Distribution& target, BetaProposal proposal, double mix_p,
                               double bound)
    : p_(target), q_(std::move(proposal)), mix_p_(mix_p), bound_(bound) {
  if (!(mix_p >= 0.0 && mix_p <= 1.0)) throw DomainError("mix_p must lie in [0, 1]");
}

AdaptiveSampler::AdaptiveSampler(const Distribution& target, const BoxDomain& domain,
                                 AisPolicy policy)
    : p_(target),
      q_(BetaProposal::uniform_like(domain, policy.initial_shape)),
      policy_(policy) {
  policy_.validate();
  batch_.reserve(policy_.batch_size);
  batch_weights_.reserve(policy_.batch_size);
  trajectory_.push_back({0, q_.a(), q_.b()});
}

void AdaptiveSampler::observe(const Point& x, double psi, double weight) {
  batch_.push_back(x);
  batch_weights_.push_back(std::max(0.0, psi * weight));
  if (batch_.size() < policy_.batch_size) return;
  const bool any_weight =
      std::any_of(batch_weights_.begin(), batch_weights_.end(), [](double w) { return w > 0.0; });
  if (any_weight) q_ = ais_update(q_, batch_, policy_, batch_weights_);
  trajectory_.push_back({trajectory_.size(), q_.a(), q_.b()});
  batch_.clear();
  batch_weights_.clear();
}

double AdaptiveSampler::weight_bound() const {
  return policy_.mix_p > 0.0 ? 1.0 / policy_.mix_p : std::numeric_limits<double>::infinity();
}

}  // namespace repsq
