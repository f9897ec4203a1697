#pragma once

// Synthetic testing systems with knowable ground truth.
//
// Each testbed bundles a target distribution p over test cases, an evaluator
// psi into a declared measure interval, and an oracle for r* = E_p[psi].

#include <array>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "repsq/samplers.hpp"

namespace repsq {

struct MeasureInterval {
  double low = 0.0;
  double high = 1.0;
  double range() const noexcept { return high - low; }
};

struct Oracle {
  double value = 0.0;
  double std_error = 0.0;
  std::string method;
  std::uint64_t samples = 0;
};

class Testbed {
 public:
  virtual ~Testbed() = default;

  virtual std::string kind() const = 0;
  virtual const Distribution& target() const = 0;
  virtual MeasureInterval measure() const = 0;
  // psi(x). Stochastic evaluators draw only from `noise`.
  virtual double evaluate(const Point& x, Rng& noise) const = 0;
  // Computed on first use, then cached; thread-safe.
  const Oracle& oracle() const;
  // Resolved parameters; make_testbed(descriptor()) rebuilds an identical testbed.
  virtual nlohmann::json descriptor() const = 0;

  // Continuous testbeds expose their box so Beta proposals can live on it.
  virtual const BoxDomain* box() const { return nullptr; }
  // Companion importance proposal shipped with the testbed, if any.
  virtual const Distribution* proposal() const { return nullptr; }
  virtual double proposal_weight_bound() const { return 1.0; }
  // sup of |psi * w| under the companion proposal.
  virtual double proposal_joint_bound() const { return measure().range(); }

 protected:
  virtual Oracle compute_oracle() const = 0;

 private:
  mutable std::once_flag oracle_once_;
  mutable std::optional<Oracle> oracle_;
};

std::shared_ptr<const Testbed> make_testbed(const nlohmann::json& descriptor);

// ---------------------------------------------------------------------------
// Rare-event risk: K scenario cells, Bernoulli failures with probability f_k.

class RareEventTestbed final : public Testbed {
 public:
  // Companion proposal q: half its mass on failure cells in proportion to
  // p_k f_k, half on the remaining cells in proportion to p_k.
  // `generator`, when given, replaces the explicit cell lists in descriptor().
  RareEventTestbed(std::vector<double> masses, std::vector<double> failure,
                   nlohmann::json generator = nullptr);

  std::string kind() const override { return "rare_event"; }
  const Distribution& target() const override { return p_; }
  MeasureInterval measure() const override { return {0.0, 1.0}; }
  double evaluate(const Point& x, Rng& noise) const override;
  nlohmann::json descriptor() const override;

  const Distribution* proposal() const override { return &q_; }
  double proposal_weight_bound() const override { return weight_bound_; }
  double proposal_joint_bound() const override { return joint_bound_; }

  const DiscreteDistribution& target_masses() const noexcept { return p_; }
  const DiscreteDistribution& proposal_masses() const noexcept { return q_; }
  const std::vector<double>& failure() const noexcept { return failure_; }
  std::size_t cells() const noexcept { return failure_.size(); }

  // Sum_k p_k f_k.
  double exact_r_star() const noexcept;

 protected:
  Oracle compute_oracle() const override;

 private:
  static std::vector<double> companion_masses(const std::vector<double>& p,
                                              const std::vector<double>& f);

  DiscreteDistribution p_;
  std::vector<double> failure_;
  DiscreteDistribution q_;
  double weight_bound_ = 1.0;
  double joint_bound_ = 1.0;
  nlohmann::json generator_;  // (K, seed, target) when generated
};

// Heavy-tailed K-cell testbed with r* calibrated into [1e-8, 1e-7]. When
// target_r_star is absent it is drawn log-uniformly from that range.
std::shared_ptr<const RareEventTestbed> rare_event_testbed(
    std::size_t cells, std::uint64_t seed, std::optional<double> target_r_star = std::nullopt);

// ---------------------------------------------------------------------------
// Positioning displacement (mm) over a square workspace.

struct DisplacementParams {
  double workspace = 0.4;      // side of the square target box, metres
  double base = 0.012;         // displacement at the workspace centre, mm
  double gain = 0.01;          // extra displacement at the corners, mm
  double noise = 0.008;        // half-width of uniform measurement noise, mm
  double m_high = 6.0;         // declared upper bound of psi, mm
  std::uint64_t oracle_seed = 0;
  std::uint64_t oracle_samples = 10'000'000;
};

class DisplacementTestbed final : public Testbed {
 public:
  explicit DisplacementTestbed(DisplacementParams params);

  std::string kind() const override { return "displacement"; }
  const Distribution& target() const override { return p_; }
  MeasureInterval measure() const override { return {0.0, params_.m_high}; }
  double evaluate(const Point& x, Rng& noise) const override;
  nlohmann::json descriptor() const override;
  const BoxDomain* box() const override { return &p_.domain(); }

  double mean_displacement(const Point& x) const;
  const DisplacementParams& params() const noexcept { return params_; }

 protected:
  Oracle compute_oracle() const override;

 private:
  DisplacementParams params_;
  UniformBox p_;
};

// ---------------------------------------------------------------------------
// Velocity-command tracking. Commands (v_x, v_y, yaw rate) in [-0.3, 0.3]^3.

inline constexpr std::size_t kTrackingHorizon = 150;
inline constexpr double kTrackingCommandBound = 0.3;

using TrackingState = std::array<double, 3>;

// 1 - exp(-6 sum_i ||observed_i - commanded||^2) over exactly 150 states.
double tracking_loss(std::span<const TrackingState> observed, const TrackingState& commanded);

struct TrackingParams {
  double sim_gap = 0.0;     // relative inflation of the noise scale
  double noise_base = 0.004;
  double noise_gain = 0.04;  // noise grows with |command| per axis
  double bias_gain = 0.06;   // steady under-tracking proportional to the command
  std::uint64_t oracle_seed = 0;
  std::uint64_t oracle_samples = 10'000'000;
};

// Observed state per step and axis: s_d + bias(s_d) + sigma(s_d) z,
// bias = -bias_gain s_d, sigma = (noise_base + noise_gain |s_d|)(1 + sim_gap).
struct TrackingScenario {
  TrackingState commanded{};
  TrackingParams params;

  TrackingState bias() const noexcept;
  TrackingState noise_scale() const noexcept;
  std::vector<TrackingState> simulate(Rng& noise) const;
  // E[psi | commanded] in closed form (noncentral chi-square MGF).
  double expected_loss() const noexcept;
};

class TrackingTestbed final : public Testbed {
 public:
  explicit TrackingTestbed(TrackingParams params);

  std::string kind() const override { return "tracking"; }
  const Distribution& target() const override { return p_; }
  MeasureInterval measure() const override { return {0.0, 1.0}; }
  double evaluate(const Point& x, Rng& noise) const override;
  nlohmann::json descriptor() const override;
  const BoxDomain* box() const override { return &p_.domain(); }

  TrackingScenario scenario(const Point& x) const;
  const TrackingParams& params() const noexcept { return params_; }

 protected:
  // Monte Carlo over commands of the closed-form conditional loss.
  Oracle compute_oracle() const override;

 private:
  TrackingParams params_;
  UniformBox p_;
};

std::shared_ptr<const TrackingTestbed> tracking_testbed(double sim_gap, std::uint64_t seed);
std::shared_ptr<const DisplacementTestbed> displacement_testbed(std::uint64_t seed);

}  // namespace repsq
