#include "repsq/testbeds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "repsq/error.hpp"
#include "repsq/estimator.hpp"

namespace repsq {
namespace {

constexpr std::uint64_t kRareEventStream = 0x72617265ULL;  // "rare"
constexpr std::uint64_t kOracleStream = 0x6f72636cULL;     // "orcl"
constexpr double kLossScale = 6.0;

Oracle monte_carlo_oracle(std::uint64_t seed, std::uint64_t samples, const char* method,
                          auto&& draw_value) {
  if (samples < 2) throw DomainError("oracle needs at least two samples");
  Rng rng = Rng::derive(seed, {kOracleStream});
  EstimatorState acc;
  for (std::uint64_t i = 0; i < samples; ++i) acc.update(draw_value(rng));
  Oracle o;
  o.value = acc.mean();
  o.std_error = std::sqrt(acc.variance() / static_cast<double>(acc.n()));
  o.method = method;
  o.samples = samples;
  return o;
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

const Oracle& Testbed::oracle() const {
  std::call_once(oracle_once_, [this] { oracle_ = compute_oracle(); });
  return *oracle_;
}

// ---------------------------------------------------------------------------

std::vector<double> RareEventTestbed::companion_masses(const std::vector<double>& p,
                                                       const std::vector<double>& f) {
  double failing = 0.0;
  double benign = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (f[k] > 0.0) failing += p[k] * f[k];
    else benign += p[k];
  }
  if (failing == 0.0) return p;
  const double fail_share = benign > 0.0 ? 0.5 : 1.0;
  std::vector<double> q(p.size(), 0.0);
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (f[k] > 0.0) q[k] = fail_share * p[k] * f[k] / failing;
    else if (benign > 0.0) q[k] = (1.0 - fail_share) * p[k] / benign;
  }
  return q;
}

RareEventTestbed::RareEventTestbed(std::vector<double> masses, std::vector<double> failure,
                                   nlohmann::json generator)
    : p_(masses),
      failure_(std::move(failure)),
      q_(companion_masses(masses, failure_)),
      generator_(std::move(generator)) {
  if (failure_.size() != p_.size()) throw DomainError("one failure probability per cell");
  if (p_.size() < 2) throw DomainError("rare-event testbed needs at least two cells");
  for (double f : failure_)
    if (!(f >= 0.0 && f <= 1.0)) throw DomainError("failure probabilities must lie in [0, 1]");
  weight_bound_ = 1.0;
  double joint = 0.0;
  for (std::size_t k = 0; k < p_.size(); ++k) {
    if (q_.mass(k) == 0.0) continue;
    const double w = p_.mass(k) / q_.mass(k);
    weight_bound_ = std::max(weight_bound_, w);
    if (failure_[k] > 0.0) joint = std::max(joint, w);
  }
  joint_bound_ = joint > 0.0 ? joint : weight_bound_;
}

double RareEventTestbed::evaluate(const Point& x, Rng& noise) const {
  const double mass = p_.density(x);  // validates the cell index
  (void)mass;
  const auto k = static_cast<std::size_t>(x[0]);
  return noise.uniform() < failure_[k] ? 1.0 : 0.0;
}

double RareEventTestbed::exact_r_star() const noexcept {
  double r = 0.0;
  for (std::size_t k = 0; k < failure_.size(); ++k) r += p_.masses()[k] * failure_[k];
  return r;
}

Oracle RareEventTestbed::compute_oracle() const {
  return {exact_r_star(), 0.0, "exact_enumeration", failure_.size()};
}

nlohmann::json RareEventTestbed::descriptor() const {
  nlohmann::json j;
  if (!generator_.is_null()) {
    j = generator_;
  } else {
    j["masses"] = p_.masses();
    j["failure"] = failure_;
  }
  j["kind"] = kind();
  j["m_low"] = 0.0;
  j["m_high"] = 1.0;
  j["w_bar"] = weight_bound_;
  return j;
}

std::shared_ptr<const RareEventTestbed> rare_event_testbed(std::size_t cells, std::uint64_t seed,
                                                           std::optional<double> target_r_star) {
  if (cells < 2) throw DomainError("rare-event testbed needs K >= 2");
  if (target_r_star && !(*target_r_star > 0.0 && *target_r_star <= 0.1))
    throw DomainError("target r* must lie in (0, 0.1]");
  Rng rng = Rng::derive(seed, {kRareEventStream, cells});

  std::vector<double> raw(cells);
  for (std::size_t k = 0; k < cells; ++k)
    raw[k] = std::pow(static_cast<double>(k + 1), -1.5) * std::exp(0.5 * rng.normal());
  const std::size_t n_fail = std::max<std::size_t>(1, cells / 10);
  const std::size_t first_fail = cells - n_fail;

  std::vector<double> failure(cells, 0.0);
  for (std::size_t k = first_fail; k < cells; ++k) failure[k] = rng.uniform(0.2, 1.0);
  const double target = target_r_star ? *target_r_star : std::pow(10.0, -8.0 + rng.uniform());

  double weighted = 0.0;
  for (std::size_t k = first_fail; k < cells; ++k) weighted += raw[k] * failure[k];
  std::vector<double> masses(cells, 0.0);
  double fail_mass = 0.0;
  for (std::size_t k = first_fail; k < cells; ++k) {
    masses[k] = target * raw[k] / weighted;
    fail_mass += masses[k];
  }
  const double benign_raw = std::accumulate(raw.begin(), raw.begin() + first_fail, 0.0);
  for (std::size_t k = 0; k < first_fail; ++k) masses[k] = (1.0 - fail_mass) * raw[k] / benign_raw;

  nlohmann::json gen{{"cells", cells}, {"seed", seed}};
  if (target_r_star) gen["target_r_star"] = *target_r_star;
  return std::make_shared<RareEventTestbed>(std::move(masses), std::move(failure), std::move(gen));
}

// ---------------------------------------------------------------------------

DisplacementTestbed::DisplacementTestbed(DisplacementParams params)
    : params_(params), p_(BoxDomain::cube(2, 0.0, params.workspace)) {
  if (!(params_.workspace > 0.0)) throw DomainError("workspace side must be positive");
  if (!(params_.base >= 0.0 && params_.gain >= 0.0 && params_.noise >= 0.0))
    throw DomainError("displacement parameters must be non-negative");
  if (!(params_.m_high > 0.0)) throw DomainError("declared displacement bound must be positive");
}

double DisplacementTestbed::mean_displacement(const Point& x) const {
  const double c = 0.5 * params_.workspace;
  const double dx = x.at(0) - c;
  const double dy = x.at(1) - c;
  const double corner = 2.0 * c * c;
  return params_.base + params_.gain * (dx * dx + dy * dy) / corner;
}

double DisplacementTestbed::evaluate(const Point& x, Rng& noise) const {
  const double e = params_.noise * (2.0 * noise.uniform() - 1.0);
  return std::clamp(mean_displacement(x) + e, 0.0, params_.m_high);
}

Oracle DisplacementTestbed::compute_oracle() const {
  return monte_carlo_oracle(params_.oracle_seed, params_.oracle_samples, "monte_carlo",
                            [this](Rng& rng) { return evaluate(p_.sample(rng), rng); });
}

nlohmann::json DisplacementTestbed::descriptor() const {
  return {{"kind", kind()},
          {"workspace", params_.workspace},
          {"base", params_.base},
          {"gain", params_.gain},
          {"noise", params_.noise},
          {"oracle_seed", params_.oracle_seed},
          {"oracle_samples", params_.oracle_samples},
          {"m_low", 0.0},
          {"m_high", params_.m_high},
          {"w_bar", 1.0}};
}

std::shared_ptr<const DisplacementTestbed> displacement_testbed(std::uint64_t seed) {
  DisplacementParams p;
  p.oracle_seed = seed;
  return std::make_shared<DisplacementTestbed>(p);
}

// ---------------------------------------------------------------------------

double tracking_loss(std::span<const TrackingState> observed, const TrackingState& commanded) {
  if (observed.size() != kTrackingHorizon)
    throw DomainError("tracking loss needs exactly 150 observed states");
  double total = 0.0;
  for (const auto& s : observed) {
    for (std::size_t a = 0; a < 3; ++a) {
      if (!std::isfinite(s[a]) || !std::isfinite(commanded[a]))
        throw DomainError("tracking states must be finite");
      const double d = s[a] - commanded[a];
      total += d * d;
    }
  }
  return -std::expm1(-kLossScale * total);
}

TrackingState TrackingScenario::bias() const noexcept {
  TrackingState b{};
  for (std::size_t a = 0; a < 3; ++a) b[a] = -params.bias_gain * commanded[a];
  return b;
}

TrackingState TrackingScenario::noise_scale() const noexcept {
  TrackingState s{};
  for (std::size_t a = 0; a < 3; ++a)
    s[a] = (params.noise_base + params.noise_gain * std::abs(commanded[a])) * (1.0 + params.sim_gap);
  return s;
}

std::vector<TrackingState> TrackingScenario::simulate(Rng& noise) const {
  const TrackingState b = bias();
  const TrackingState sigma = noise_scale();
  std::vector<TrackingState> out(kTrackingHorizon);
  for (auto& s : out)
    for (std::size_t a = 0; a < 3; ++a) s[a] = commanded[a] + b[a] + sigma[a] * noise.normal();
  return out;
}

double TrackingScenario::expected_loss() const noexcept {
  // Per axis, sum_i (b + sigma z_i)^2 = sigma^2 chi'^2(H, H b^2 / sigma^2), whose
  // Laplace transform at t gives
  //   E exp(-t S) = exp(-t H b^2 / (1 + 2 t sigma^2)) (1 + 2 t sigma^2)^(-H/2).
  const TrackingState b = bias();
  const TrackingState sigma = noise_scale();
  const double h = static_cast<double>(kTrackingHorizon);
  double log_survive = 0.0;
  for (std::size_t a = 0; a < 3; ++a) {
    const double g = 2.0 * kLossScale * sigma[a] * sigma[a];
    log_survive += -kLossScale * h * b[a] * b[a] / (1.0 + g) - 0.5 * h * std::log1p(g);
  }
  return -std::expm1(log_survive);
}

TrackingTestbed::TrackingTestbed(TrackingParams params)
    : params_(params), p_(BoxDomain::cube(3, -kTrackingCommandBound, kTrackingCommandBound)) {
  if (!(params_.sim_gap >= 0.0)) throw DomainError("sim_gap must be non-negative");
  if (!(params_.noise_base >= 0.0 && params_.noise_gain >= 0.0 && params_.bias_gain >= 0.0))
    throw DomainError("tracking noise parameters must be non-negative");
}

TrackingScenario TrackingTestbed::scenario(const Point& x) const {
  if (x.size() != 3) throw DomainError("tracking commands are 3-vectors");
  return {{x[0], x[1], x[2]}, params_};
}

double TrackingTestbed::evaluate(const Point& x, Rng& noise) const {
  const TrackingScenario sc = scenario(x);
  const auto trajectory = sc.simulate(noise);
  return tracking_loss(trajectory, sc.commanded);
}

Oracle TrackingTestbed::compute_oracle() const {
  return monte_carlo_oracle(params_.oracle_seed, params_.oracle_samples,
                            "monte_carlo_conditional_expectation",
                            [this](Rng& rng) { return scenario(p_.sample(rng)).expected_loss(); });
}

nlohmann::json TrackingTestbed::descriptor() const {
  return {{"kind", kind()},
          {"sim_gap", params_.sim_gap},
          {"noise_base", params_.noise_base},
          {"noise_gain", params_.noise_gain},
          {"bias_gain", params_.bias_gain},
          {"oracle_seed", params_.oracle_seed},
          {"oracle_samples", params_.oracle_samples},
          {"m_low", 0.0},
          {"m_high", 1.0},
          {"w_bar", 1.0}};
}

std::shared_ptr<const TrackingTestbed> tracking_testbed(double sim_gap, std::uint64_t seed) {
  TrackingParams p;
  p.sim_gap = sim_gap;
  p.oracle_seed = seed;
  return std::make_shared<TrackingTestbed>(p);
}

// ---------------------------------------------------------------------------

std::shared_ptr<const Testbed> make_testbed(const nlohmann::json& d) {
  try {
    const std::string kind = d.at("kind").get<std::string>();
    if (kind == "rare_event") {
      if (d.contains("masses")) {
        return std::make_shared<RareEventTestbed>(d.at("masses").get<std::vector<double>>(),
                                                  d.at("failure").get<std::vector<double>>());
      }
      std::optional<double> target;
      if (d.contains("target_r_star")) target = d.at("target_r_star").get<double>();
      return rare_event_testbed(d.at("cells").get<std::size_t>(),
                                d.at("seed").get<std::uint64_t>(), target);
    }
    if (kind == "displacement") {
      DisplacementParams p;
      p.workspace = get_or(d, "workspace", p.workspace);
      p.base = get_or(d, "base", p.base);
      p.gain = get_or(d, "gain", p.gain);
      p.noise = get_or(d, "noise", p.noise);
      p.m_high = get_or(d, "m_high", p.m_high);
      p.oracle_seed = get_or(d, "oracle_seed", p.oracle_seed);
      p.oracle_samples = get_or(d, "oracle_samples", p.oracle_samples);
      return std::make_shared<DisplacementTestbed>(p);
    }
    if (kind == "tracking") {
      TrackingParams p;
      p.sim_gap = get_or(d, "sim_gap", p.sim_gap);
      p.noise_base = get_or(d, "noise_base", p.noise_base);
      p.noise_gain = get_or(d, "noise_gain", p.noise_gain);
      p.bias_gain = get_or(d, "bias_gain", p.bias_gain);
      p.oracle_seed = get_or(d, "oracle_seed", p.oracle_seed);
      p.oracle_samples = get_or(d, "oracle_samples", p.oracle_samples);
      return std::make_shared<TrackingTestbed>(p);
    }
    throw ConfigError("unknown testbed kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed testbed descriptor: ") + e.what());
  }
}

}  // namespace repsq
