// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failing criteria (0 when all pass).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>

#include "repsq/harness.hpp"
#include "repsq/io.hpp"
#include "support.hpp"

using namespace repsq;

namespace {

int failures = 0;

void report(int id, const char* title, bool pass, const std::string& detail, double seconds) {
  std::printf("[%s] %2d %-34s %s (%.1fs)\n", pass ? "PASS" : "FAIL", id, title, detail.c_str(),
              seconds);
  std::fflush(stdout);
  if (!pass) ++failures;
}

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string config_path(const char* name) { return std::string(REPSQ_CONFIG_DIR) + "/" + name; }

double binomial_floor(double p, std::size_t n) {
  return p - 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

// r* of a discrete testbed by summation in long double.
long double enumerate_r_star(const RareEventTestbed& tb) {
  long double r = 0.0L;
  for (std::size_t k = 0; k < tb.cells(); ++k)
    r += static_cast<long double>(tb.target_masses().mass(k)) * tb.failure()[k];
  return r;
}

template <typename F>
void parallel_for(std::size_t n, F&& body) {
  const unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) body(i);
    });
  for (auto& th : pool) th.join();
}

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

void tolerances() {
  const auto t0 = Clock::now();
  struct Case {
    AccuracySpec spec;
    double expected;
  };
  const Case cases[] = {{{0.1, 0.05, 0.1}, 0.195}, {{3e-9, 0.01, 0.1}, 5.14e-9},
                        {{0.04, 0.05, 0.1}, 0.078}};
  bool ok = true;
  std::string detail;
  for (const auto& c : cases) {
    const double tol = quantized_tolerance(c.spec);
    const double rel = std::abs(tol - c.expected) / c.expected;
    ok = ok && rel <= 0.005;
    detail += fmt("%.4g(rel %.2g) ", tol, rel);
  }
  report(1, "alpha tolerance reproduction", ok, detail + "limit 0.5%", since(t0));
}

void quadratic_identity() {
  const auto t0 = Clock::now();
  Rng rng = Rng::derive(2, {});
  double worst = 0.0;
  bool in_range = true;
  for (int i = 0; i < 10000; ++i) {
    AccuracySpec s;
    s.gamma = std::pow(10.0, rng.uniform(-10.0, 2.0));
    s.c = rng.uniform(1e-4, 0.5);
    const double q = 1.0 - s.c;
    s.beta = std::min(1.0 - q * q * rng.uniform(1e-6, 1.0), std::nextafter(1.0, 0.0));
    const double a = compute_alpha(s);
    in_range = in_range && a > 0.0 && a <= 2.0 * s.gamma;
    const long double lq = q, g = s.gamma, la = a;
    const long double rhs = 4.0L * g * g * (1.0L - s.beta);
    const long double lhs = lq * lq * (4.0L * g * la - la * la);
    worst = std::max(worst, static_cast<double>(std::abs(lhs - rhs) / rhs));
  }
  report(2, "quadratic identity", in_range && worst <= 1e-9,
         fmt("max rel residual %.3g (limit 1e-9), alpha in (0, 2 gamma]: %s", worst,
             in_range ? "yes" : "no"),
         since(t0));
}

void repeatability_and_accuracy() {
  const auto t0 = Clock::now();
  const Campaign campaign(load_config(config_path("rare_event.json")));
  const auto& tb = dynamic_cast<const RareEventTestbed&>(campaign.testbed());
  const double r_star = static_cast<double>(enumerate_r_star(tb));
  const PairwiseResult res = pairwise_experiment(campaign, 500);

  const double floor3 = binomial_floor(0.90, 500);
  const double rate = res.report.repeat_rate;
  report(3, "repeatability floor", rate >= 0.86,
         fmt("repeat_rate %.3f (%zu/500), floor 0.86 [%.4f]", rate, res.report.repeats, floor3),
         since(t0));

  const double tol = campaign.config().accuracy.gamma + 0.5 * campaign.alpha();
  std::size_t hits = 0, trials = 0;
  for (const auto& p : res.pairs)
    for (const TrialResult* t : {&p.initiator, &p.replicator}) {
      ++trials;
      hits += std::abs(t->quantized - r_star) <= tol;
    }
  const double acc = static_cast<double>(hits) / static_cast<double>(trials);
  report(4, "accuracy floor", trials == 1000 && acc >= 0.965,
         fmt("hit rate %.4f (%zu/%zu) within gamma+alpha/2 = %.4g of r* %.6g, floor 0.965", acc,
             hits, trials, tol, r_star),
         since(t0));
}

void cross_sampler() {
  const auto t0 = Clock::now();
  const Campaign campaign(load_config(config_path("cross_sampler.json")));
  PairwiseOptions opts;
  opts.replicator_sampler = sampler_from_json(read_json(config_path("cross_sampler_replicator.json")));
  const PairwiseResult res = pairwise_experiment(campaign, 200, opts);
  const double floor = binomial_floor(0.90, 200);
  const bool mixed = res.report.initiator_sampler == "monte_carlo" &&
                     res.report.replicator_sampler == "importance";
  report(5, "cross-sampler repeatability", mixed && res.report.repeat_rate >= floor,
         fmt("repeat_rate %.3f (%zu/200) %s vs %s, floor %.3f", res.report.repeat_rate,
             res.report.repeats, res.report.initiator_sampler.c_str(),
             res.report.replicator_sampler.c_str(), floor),
         since(t0));
}

void efficiency() {
  const auto t0 = Clock::now();
  const Campaign campaign(load_config(config_path("rare_event.json")));
  const EffortTable t = effort_comparison(campaign);
  const BoundSpec b = campaign.bounds();
  const double gamma = campaign.config().accuracy.gamma;
  // ceil(R^2 ln(2/c) / (2 gamma^2)), evaluated in long double.
  const long double need = std::ceil(static_cast<long double>(b.range()) * b.range() *
                                     std::log(2.0L / b.c) / (2.0L * gamma * gamma));
  const double ratio = static_cast<double>(t.result.n) / static_cast<double>(need);
  report(6, "efficiency ordering", t.result.terminated && ratio <= 0.25,
         fmt("n %llu vs Hoeffding %.0Lf, ratio %.3g (limit 0.25)",
             static_cast<unsigned long long>(t.result.n), need, ratio),
         since(t0));
}

void zero_variance() {
  const auto t0 = Clock::now();
  CampaignConfig c = load_config(config_path("zero_variance.json"));
  c.range_term_mode = RangeTermMode::kPaperExact;
  const Campaign campaign(c);
  const EffortTable t = effort_comparison(campaign);
  const double l = std::log(2.0 / c.accuracy.c);
  // Smallest n with 7 ln(2/c) / (3 (n - 1)) <= gamma, and with sqrt(ln(2/c) / (2 n)) <= gamma.
  std::uint64_t n_b = 2;
  while (7.0 * l / (3.0 * static_cast<double>(n_b - 1)) > c.accuracy.gamma) ++n_b;
  std::uint64_t n_h = 1;
  while (std::sqrt(l / (2.0 * static_cast<double>(n_h))) > c.accuracy.gamma) ++n_h;
  report(7, "zero-variance termination",
         t.result.n == 88 && n_b == 88 && t.required_n_hoeffding == 185 && n_h == 185,
         fmt("n %llu (expected 88), Hoeffding %llu (expected 185)",
             static_cast<unsigned long long>(t.result.n),
             static_cast<unsigned long long>(t.required_n_hoeffding)),
         since(t0));
}

void collision_bound() {
  const auto t0 = Clock::now();
  Rng cfg = Rng::derive(8, {});
  int ok = 0;
  double worst = INFINITY;
  std::string worst_case;
  for (int i = 0; i < 20; ++i) {
    const double gamma = std::pow(10.0, cfg.uniform(-6.0, 0.0));
    const double alpha = 2.0 * gamma * cfg.uniform_open();
    Rng rng = Rng::derive(8, {static_cast<std::uint64_t>(i)});
    const auto sim = testing::simulate_collision(gamma, alpha, 100000, rng);
    const double bound = collision_probability_lower_bound(gamma, alpha);
    const double margin = sim.rate - (bound - 3.0 * sim.std_error);
    ok += margin >= 0.0;
    if (margin < worst) {
      worst = margin;
      worst_case = fmt("alpha/gamma %.3f: rate %.4f vs bound %.4f (exact %.4f)", alpha / gamma,
                       sim.rate, bound, testing::exact_independent_collision(gamma, alpha));
    }
  }
  report(8, "collision-bound check", ok == 20,
         fmt("%d/20 configs at or above bound - 3 SE; worst %s", ok, worst_case.c_str()),
         since(t0));
}

void convergence() {
  const auto t0 = Clock::now();
  const Campaign campaign(load_config(config_path("rare_event.json")));
  const auto& tb = dynamic_cast<const RareEventTestbed&>(campaign.testbed());
  const long double r_star = enumerate_r_star(tb);
  // Per-draw variance of psi * w under the companion proposal, by enumeration.
  long double second = 0.0L;
  for (std::size_t k = 0; k < tb.cells(); ++k) {
    const long double q = tb.proposal_masses().mass(k);
    if (q == 0.0L) continue;
    const long double w = tb.target_masses().mass(k) / q;
    second += q * tb.failure()[k] * w * w;
  }
  const double sd = static_cast<double>(std::sqrt((second - r_star * r_star) / 1e6L));

  const std::size_t seeds = 100;
  Rng master(1);
  std::vector<std::uint64_t> seed(seeds);
  for (auto& s : seed) s = master.next();
  std::vector<double> e3(seeds), e6(seeds);
  const std::uint64_t checkpoints[] = {1000, 1000000};
  parallel_for(seeds, [&](std::size_t i) {
    const auto traj = estimate_trajectory(campaign, campaign.config().sampler, seed[i], checkpoints);
    e3[i] = std::abs(traj[0] - static_cast<double>(r_star));
    e6[i] = std::abs(traj[1] - static_cast<double>(r_star));
  });
  int decreased = 0, within = 0;
  for (std::size_t i = 0; i < seeds; ++i) {
    decreased += e6[i] < e3[i];
    within += e6[i] <= 5.0 * sd;
  }
  report(9, "estimator convergence", decreased >= 99 && within == 100,
         fmt("error decreased for %d/100 seeds (need 99); n=1e6 error within 5 SD (%.3g) for "
             "%d/100",
             decreased, sd, within),
         since(t0));
}

void unbiasedness() {
  const auto t0 = Clock::now();
  Rng rng = Rng::derive(10, {});
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t k = 2 + static_cast<std::size_t>(rng.uniform() * 200);
    std::shared_ptr<const RareEventTestbed> tb;
    if (t % 2 == 0) {
      tb = rare_event_testbed(k, rng.next());
    } else {
      // Arbitrary masses and failure probabilities.
      std::vector<double> p(k), f(k);
      double total = 0.0;
      for (auto& v : p) total += v = rng.uniform_open();
      for (auto& v : p) v /= total;
      double renorm = 0.0;
      for (double v : p) renorm += v;
      p.back() += 1.0 - renorm;
      for (auto& v : f) v = rng.bernoulli(0.7) ? 0.0 : rng.uniform();
      f[0] = 0.5;
      tb = std::make_shared<RareEventTestbed>(p, f);
    }
    const DiscreteDistribution& p = tb->target_masses();
    const DiscreteDistribution& q = tb->proposal_masses();
    long double expectation = 0.0L;
    for (std::size_t c = 0; c < tb->cells(); ++c) {
      const Point x{static_cast<double>(c)};
      const double w = importance_weight(p, q, x).value;
      expectation += static_cast<long double>(q.mass(c)) * w * tb->failure()[c];
    }
    const long double exact = enumerate_r_star(*tb);
    worst = std::max(worst, static_cast<double>(std::abs(expectation - exact) / exact));
  }
  // Machine precision: a few ulps per cell accumulated over at most ~200 cells.
  const double limit = 1e-12;
  report(10, "IS unbiasedness by enumeration", worst <= limit,
         fmt("max rel error %.3g over 50 testbeds (limit %.0e)", worst, limit), since(t0));
}

void ais_mechanics() {
  const auto t0 = Clock::now();
  Rng rng = Rng::derive(11, {});
  std::vector<double> xs(100000);
  for (auto& x : xs) x = beta_sample(2.0, 5.0, 0.0, 1.0, rng);
  const BetaShape fit = fit_beta(xs, 0.0, 1.0);
  const bool fit_ok = std::abs(fit.a - 2.0) <= 0.1 && std::abs(fit.b - 5.0) <= 0.1;

  const BoxDomain box = BoxDomain::cube(1, 0.0, 1.0);
  AisPolicy policy{0.1, 30, 1.0, 0.99};
  std::vector<Point> batch(30);
  std::vector<double> coords(30);
  for (std::size_t i = 0; i < 30; ++i) coords[i] = (batch[i] = {beta_sample(2.0, 5.0, 0.0, 1.0, rng)})[0];
  const BetaShape fresh = fit_beta(coords, 0.0, 1.0);
  const BetaProposal start(box, {0.99}, {0.99});
  const BetaProposal full = ais_update(start, batch, policy);
  const bool lr1_ok = std::abs(full.a()[0] - fresh.a) <= 1e-12 * fresh.a &&
                      std::abs(full.b()[0] - fresh.b) <= 1e-12 * fresh.b;
  policy.learning_rate = 0.37;
  const BetaProposal at_fit(box, {fresh.a}, {fresh.b});
  const BetaProposal fixed = ais_update(at_fit, batch, policy);
  const bool fixed_ok = std::abs(fixed.a()[0] - fresh.a) <= 1e-12 * fresh.a &&
                        std::abs(fixed.b()[0] - fresh.b) <= 1e-12 * fresh.b;

  // Weights under a sharply peaked 3-D proposal.
  const BoxDomain cube = BoxDomain::cube(3, -0.3, 0.3);
  const UniformBox target(cube);
  const BetaProposal peaked(cube, {kShapeMax, kShapeMin, 2.0}, {kShapeMin, kShapeMax, 0.5});
  const double mix_p = 0.1;
  double max_w = 0.0;
  for (int i = 0; i < 1000000; ++i)
    max_w = std::max(max_w, mixture_sample(target, peaked, mix_p, rng).weight);
  const bool cap_ok = max_w <= 1.0 / mix_p;

  report(11, "AIS mechanics", fit_ok && lr1_ok && fixed_ok && cap_ok,
         fmt("fit (%.3f, %.3f) vs (2, 5) +-0.1; lr=1 equals fit: %s; fixed point: %s; max weight "
             "%.4g <= %.4g",
             fit.a, fit.b, lr1_ok ? "yes" : "no", fixed_ok ? "yes" : "no", max_w, 1.0 / mix_p),
         since(t0));
}

void tracking_examples() {
  const auto t0 = Clock::now();
  const TrackingState cmd{0.2, -0.1, 0.05};
  std::vector<TrackingState> obs(kTrackingHorizon, cmd);
  const double zero = tracking_loss(obs, cmd);
  const double step = std::sqrt(std::log(2.0) / 6.0 / static_cast<double>(kTrackingHorizon));
  for (auto& s : obs) s[2] = cmd[2] + step;
  const double half = tracking_loss(obs, cmd);
  obs.assign(kTrackingHorizon, cmd);
  for (auto& s : obs) s[0] = cmd[0] - 0.1;
  const double sat = tracking_loss(obs, cmd);
  const double e0 = std::abs(zero), e1 = std::abs(half - 0.5),
               e2 = std::abs(sat - (1.0 - std::exp(-9.0)));
  report(12, "tracking loss", e0 <= 1e-12 && e1 <= 1e-12 && e2 <= 1e-12,
         fmt("errors %.2g, %.2g, %.2g (limit 1e-12)", e0, e1, e2), since(t0));
}

}  // namespace

int main() {
  tolerances();
  quadratic_identity();
  repeatability_and_accuracy();
  cross_sampler();
  efficiency();
  zero_variance();
  collision_bound();
  convergence();
  unbiasedness();
  ais_mechanics();
  tracking_examples();
  std::printf("%d of 12 criteria failed\n", failures);
  return failures;
}
