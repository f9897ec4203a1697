#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "repsq/harness.hpp"
#include "repsq/io.hpp"

using namespace repsq;
using doctest::Approx;

namespace {

nlohmann::json cells(std::vector<double> masses, std::vector<double> failure) {
  return {{"kind", "rare_event"}, {"masses", masses}, {"failure", failure}};
}

CampaignConfig monte_carlo_config(double gamma, nlohmann::json testbed) {
  CampaignConfig c;
  c.accuracy = {gamma, 0.05, 0.1};
  c.measure = {0.0, 1.0};
  c.w_bar = 1.0;
  c.testbed = std::move(testbed);
  c.seed = 1;
  return c;
}

CampaignConfig zero_variance_config() {
  CampaignConfig c = monte_carlo_config(
      0.1, {{"kind", "displacement"}, {"base", 0.02}, {"gain", 0.0}, {"noise", 0.0},
            {"m_high", 1.0}, {"oracle_samples", 1000}});
  return c;
}

CampaignConfig rare_event_config() {
  CampaignConfig c;
  c.accuracy = {3e-9, 0.01, 0.1};
  c.measure = {0.0, 1.0};
  c.joint_bound = 1e-4;
  c.sampler.kind = SamplerKind::kImportance;
  c.testbed = {{"kind", "rare_event"}, {"cells", 100}, {"seed", 7}};
  c.seed = 1;
  return c;
}

CampaignConfig tracking_ais_config() {
  CampaignConfig c;
  c.accuracy = {0.1, 0.05, 0.1};
  c.measure = {0.0, 1.0};
  c.w_bar = 10.0;
  c.sampler.kind = SamplerKind::kAis;
  c.testbed = {{"kind", "tracking"}, {"sim_gap", 0.0}, {"oracle_samples", 100000}};
  c.seed = 3;
  return c;
}

bool is_midpoint(const Partition& p, const TrialResult& r) {
  return r.cell < p.cell_count() && r.quantized == p.midpoint(r.cell);
}

}  // namespace

TEST_CASE("huge tolerance terminates at the minimum sample count") {
  CampaignConfig c = monte_carlo_config(1.0, cells({0.99, 0.01}, {0.0, 3e-6}));
  const Campaign campaign(c);
  const TrialResult r = run_quantized_sq(campaign, campaign.partition(), c.sampler, 1);
  CHECK(r.n == 2);
  CHECK(r.terminated);

  c.n_min = 5;
  const Campaign later(c);
  CHECK(run_quantized_sq(later, later.partition(), c.sampler, 1).n == 5);
}

TEST_CASE("importance sampling with q = p reproduces Monte Carlo") {
  const CampaignConfig c = monte_carlo_config(0.05, cells({0.5, 0.3, 0.2}, {0.1, 0.5, 0.9}));
  const Campaign campaign(c);
  const Partition part = campaign.partition();
  const Distribution& p = campaign.testbed().target();
  MonteCarloSampler mc(p);
  ImportanceSampler is(p, p, 1.0);
  TrialOptions opts;
  opts.record_trace = true;
  Rng s1(10), n1(11), s2(10), n2(11);
  const TrialResult a = run_quantized_sq(campaign, part, mc, s1, n1, opts);
  const TrialResult b = run_quantized_sq(campaign, part, is, s2, n2, opts);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) REQUIRE(a.trace[i].mean == b.trace[i].mean);
  CHECK(a.raw == b.raw);
  CHECK(a.n == b.n);
}

TEST_CASE("discrete campaigns are accurate and sound") {
  // r* = 0.38; gamma is a tenth of it.
  const CampaignConfig c = monte_carlo_config(0.038, cells({0.5, 0.3, 0.2}, {0.1, 0.5, 0.9}));
  const Campaign campaign(c);
  const Partition part = campaign.partition();
  const double r_star = 0.38;
  const double tol = c.accuracy.gamma + 0.5 * campaign.alpha();
  int hits = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const std::uint64_t path[] = {i};
    const TrialResult r = run_quantized_sq(campaign, part, c.sampler, 99, path);
    hits += std::abs(r.quantized - r_star) <= tol;
    REQUIRE(r.terminated);
    REQUIRE(r.n >= c.n_min);
    REQUIRE(std::min(r.bernstein, r.hoeffding) <= c.accuracy.gamma);
    REQUIRE(is_midpoint(part, r));
    REQUIRE(std::abs(r.quantized - r.raw) <= 0.5 * campaign.alpha() * (1.0 + 1e-12));
  }
  CHECK(hits >= 950);
}

TEST_CASE("artifacts embed the expected quantization width") {
  CampaignConfig disp = monte_carlo_config(0.1, {{"kind", "displacement"}});
  disp.measure = {0.0, 6.0};
  CHECK(Campaign(disp).alpha() == Approx(0.18947).epsilon(1e-4));
  CHECK(Campaign(rare_event_config()).alpha() == Approx(4.285e-9).epsilon(1e-3));

  const InitiatorOutput out = initiator(zero_variance_config());
  CHECK(out.artifact.partition.alpha() == compute_alpha(out.artifact.config.accuracy));
  CHECK(out.result.partition_checksum == partition_checksum(out.artifact.partition));
  const TrialResult rep = replicator(out.artifact, 77);
  CHECK(rep.partition_checksum == out.result.partition_checksum);
  CHECK(rep.cell == out.result.cell);
}

TEST_CASE("replicator rejects inconsistent artifacts and unbounded overrides") {
  CampaignConfig c = zero_variance_config();
  c.w_bar = 1.2;
  InitiatorOutput out = initiator(c);

  SamplerSpec ais;
  ais.kind = SamplerKind::kAis;
  CHECK_THROWS_AS(replicator(out.artifact, 2, ais), BoundViolation);

  SamplerSpec beta;
  beta.kind = SamplerKind::kImportance;
  beta.testbed_proposal = false;
  beta.beta_a = {0.9};
  beta.beta_b = {0.9};
  CHECK_NOTHROW(replicator(out.artifact, 2, beta));

  SharedArtifact bad = out.artifact;
  bad.partition = build_partition(0.0, 1.0, bad.partition.alpha() * 0.5, 0.0);
  CHECK_THROWS_AS(replicator(bad, 2), ArtifactVersionMismatch);
  bad = out.artifact;
  bad.format_version = 99;
  CHECK_THROWS_AS(replicator(bad, 2), ArtifactVersionMismatch);
}

TEST_CASE("invalid configs are rejected") {
  CampaignConfig c = zero_variance_config();
  c.accuracy.c = 0.5;
  CHECK_THROWS_AS(Campaign{c}, InfeasibleRepeatability);
  c = zero_variance_config();
  c.measure = {0.0, 0.5};
  CHECK_THROWS_AS(Campaign{c}, ConfigError);
  c = zero_variance_config();
  c.n_min = 1;
  CHECK_THROWS_AS(Campaign{c}, ConfigError);
  c = zero_variance_config();
  c.sampler.kind = SamplerKind::kImportance;
  CHECK_THROWS_AS(Campaign{c}, ConfigError);  // displacement ships no proposal
  c = zero_variance_config();
  c.sampler.kind = SamplerKind::kAis;
  CHECK_THROWS_AS(Campaign{c}, BoundViolation);  // w_bar 1 < 1/mix_p
  c.w_bar.reset();
  CHECK(Campaign{c}.config().w_bar.value() == Approx(10.0));
}

TEST_CASE("n_max without termination throws with the partial result") {
  CampaignConfig c = monte_carlo_config(0.01, cells({0.5, 0.5}, {0.0, 1.0}));
  c.n_max = 50;
  const Campaign campaign(c);
  try {
    run_quantized_sq(campaign, campaign.partition(), c.sampler, 1);
    FAIL("expected NonTerminated");
  } catch (const NonTerminated& e) {
    CHECK(e.code() == 3);
    CHECK(e.partial().n == 50);
    CHECK_FALSE(e.partial().terminated);
  }
}

TEST_CASE("pairwise experiments are deterministic") {
  const CampaignConfig c = monte_carlo_config(0.05, cells({0.5, 0.3, 0.2}, {0.1, 0.5, 0.9}));
  const Campaign campaign(c);

  PairwiseOptions same;
  same.same_seed = true;
  const PairwiseResult s = pairwise_experiment(campaign, 20, same);
  for (const auto& p : s.pairs) {
    CHECK(p.initiator.raw == p.replicator.raw);
    CHECK(p.repeat());
  }
  CHECK(s.report.repeat_rate == 1.0);

  PairwiseOptions one, many;
  one.threads = 1;
  many.threads = 4;
  const PairwiseResult a = pairwise_experiment(campaign, 40, one);
  const PairwiseResult b = pairwise_experiment(campaign, 40, many);
  for (std::size_t i = 0; i < 40; ++i) {
    REQUIRE(a.pairs[i].initiator.raw == b.pairs[i].initiator.raw);
    REQUIRE(a.pairs[i].replicator.raw == b.pairs[i].replicator.raw);
  }
  CHECK(a.report.repeats == b.report.repeats);
  CHECK(a.report.graded);
  CHECK(a.report.trials == 80);
  CHECK(a.report.initiator_effort.min <= a.report.initiator_effort.max);
}

TEST_CASE("effort comparisons") {
  SUBCASE("zero variance terminates at 88 against Hoeffding's 185") {
    const EffortTable t = effort_comparison(Campaign(zero_variance_config()));
    CHECK(t.result.n == 88);
    CHECK(t.required_n_hoeffding == 185);
    CHECK(t.result.reason == TerminationReason::kBernstein);
    REQUIRE(t.result.trace.size() == 88);
    CHECK(t.result.trace.back().terminated);
    CHECK_FALSE(t.result.trace[86].terminated);
  }
  SUBCASE("maximal-variance Bernoulli binds on Hoeffding") {
    const CampaignConfig c = monte_carlo_config(0.1, cells({0.5, 0.5}, {0.0, 1.0}));
    const EffortTable t = effort_comparison(Campaign(c));
    CHECK(t.result.reason == TerminationReason::kHoeffding);
    CHECK(t.result.n == t.required_n_hoeffding);
    for (const auto& row : t.result.trace)
      if (row.n > 2) REQUIRE(row.hoeffding < row.bernstein);
  }
  SUBCASE("low-variance importance sampling terminates far earlier") {
    const EffortTable t = effort_comparison(Campaign(rare_event_config()));
    CHECK(t.result.n < t.required_n_hoeffding);
    CHECK(t.ratio <= 0.25);
  }
}

TEST_CASE("adaptive campaigns keep shapes bounded on a fixed partition") {
  const Campaign campaign(tracking_ais_config());
  const PairwiseResult r = pairwise_experiment(campaign, 3);
  std::set<std::string> checksums;
  for (const auto& p : r.pairs) {
    for (const TrialResult* t : {&p.initiator, &p.replicator}) {
      checksums.insert(t->partition_checksum);
      REQUIRE_FALSE(t->shapes.empty());
      for (const auto& snap : t->shapes)
        for (std::size_t k = 0; k < snap.a.size(); ++k) {
          REQUIRE((snap.a[k] >= kShapeMin && snap.a[k] <= kShapeMax));
          REQUIRE((snap.b[k] >= kShapeMin && snap.b[k] <= kShapeMax));
        }
      REQUIRE(t->final_proposal.has_value());
      REQUIRE(t->weight_cap_exceeded == 0);
    }
  }
  CHECK(checksums.size() == 1);
  CHECK(*checksums.begin() == partition_checksum(r.partition));
}

TEST_CASE("random offsets come from the campaign seed") {
  CampaignConfig c = zero_variance_config();
  c.offset_policy = OffsetPolicy::kUniformRandom;
  const Partition a = Campaign(c).partition();
  const Partition b = Campaign(c).partition();
  CHECK(a == b);
  CHECK(a.offset() > 0.0);
  CHECK(a.offset() < a.alpha());
  c.seed = 2;
  CHECK_FALSE(Campaign(c).partition() == a);
}

TEST_CASE("estimate trajectory matches a fixed-length run") {
  const CampaignConfig c = monte_carlo_config(0.05, cells({0.5, 0.3, 0.2}, {0.1, 0.5, 0.9}));
  const Campaign campaign(c);
  const std::uint64_t checkpoints[] = {10, 100, 1000};
  const auto traj = estimate_trajectory(campaign, c.sampler, 5, checkpoints);
  REQUIRE(traj.size() == 3);
  TrialOptions opts;
  opts.fixed_n = 1000;
  const TrialResult r = run_quantized_sq(campaign, campaign.partition(), c.sampler, 5, {}, opts);
  CHECK(r.n == 1000);
  CHECK(r.raw == traj[2]);
}
