#include "repsq/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "repsq/io.hpp"

namespace repsq {
namespace {

constexpr std::uint64_t kPairTag = 0x70616972ULL;  // "pair"
// Declared and provable weight bounds are compared with this much slack for
// rounding in the bound computations themselves.
constexpr double kBoundSlack = 1e-12;

std::vector<std::uint64_t> with_role(std::span<const std::uint64_t> path, StreamRole role) {
  std::vector<std::uint64_t> out(path.begin(), path.end());
  out.push_back(static_cast<std::uint64_t>(role));
  return out;
}

std::vector<double> broadcast(const std::vector<double>& v, std::size_t dims, const char* what) {
  if (v.size() == dims) return v;
  if (v.size() == 1) return std::vector<double>(dims, v[0]);
  throw ConfigError(std::string("Beta proposal '") + what + "' needs 1 or " +
                    std::to_string(dims) + " shapes");
}

// Sampler without the declared-bound check.
std::unique_ptr<Sampler> build_sampler(const SamplerSpec& spec, const Testbed& tb) {
  switch (spec.kind) {
    case SamplerKind::kMonteCarlo:
      return std::make_unique<MonteCarloSampler>(tb.target());
    case SamplerKind::kImportance: {
      if (spec.testbed_proposal) {
        if (!tb.proposal())
          throw ConfigError("testbed '" + tb.kind() + "' ships no companion proposal");
        return std::make_unique<ImportanceSampler>(tb.target(), *tb.proposal(),
                                                   tb.proposal_weight_bound());
      }
      const BoxDomain* box = tb.box();
      if (!box) throw ConfigError("Beta proposals need a continuous testbed");
      if (!dynamic_cast<const UniformBox*>(&tb.target()))
        throw ConfigError("Beta mixture weight bound assumes a uniform target");
      if (!(spec.mix_p >= 0.0 && spec.mix_p <= 1.0))
        throw ConfigError("mix_p must lie in [0, 1]");
      BetaProposal q(*box, broadcast(spec.beta_a, box->dims(), "a"),
                     broadcast(spec.beta_b, box->dims(), "b"));
      const double bound = mixture_weight_bound(q, spec.mix_p);
      return std::make_unique<MixtureSampler>(tb.target(), std::move(q), spec.mix_p, bound);
    }
    case SamplerKind::kAis: {
      const BoxDomain* box = tb.box();
      if (!box) throw ConfigError("adaptive Beta proposals need a continuous testbed");
      return std::make_unique<AdaptiveSampler>(tb.target(), *box, spec.ais);
    }
  }
  throw ConfigError("unknown sampler kind");
}

void check_declared_bound(const Sampler& s, double w_bar) {
  const double bound = s.weight_bound();
  if (!(bound <= w_bar * (1.0 + kBoundSlack)))
    throw BoundViolation("sampler '" + s.name() + "' has weight bound " + std::to_string(bound) +
                         " above the declared w_bar " + std::to_string(w_bar));
}

struct Resolved {
  CampaignConfig config;
  std::shared_ptr<const Testbed> testbed;
};

Resolved resolve(CampaignConfig config) {
  try {
    config.accuracy.validate();
  } catch (const InfeasibleRepeatability&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("accuracy: ") + e.what());
  }
  const auto& m = config.measure;
  if (!(std::isfinite(m.low) && std::isfinite(m.high) && m.low < m.high))
    throw ConfigError("measure interval must satisfy low < high");
  if (config.n_min < 2) throw ConfigError("n_min must be at least 2");
  if (config.n_max && *config.n_max < config.n_min) throw ConfigError("n_max must be >= n_min");
  if (!config.testbed.is_object()) throw ConfigError("testbed descriptor must be an object");

  std::shared_ptr<const Testbed> tb;
  try {
    tb = make_testbed(config.testbed);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("testbed: ") + e.what());
  }
  // Artifacts carry the fully resolved descriptor.
  config.testbed = tb->descriptor();
  const MeasureInterval declared = tb->measure();
  if (declared.low < m.low || declared.high > m.high)
    throw ConfigError("measure interval does not contain the testbed's declared range");

  std::unique_ptr<Sampler> sampler;
  try {
    sampler = build_sampler(config.sampler, *tb);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("sampler: ") + e.what());
  }
  if (!config.w_bar) {
    const double bound = std::max(1.0, sampler->weight_bound());
    if (!std::isfinite(bound))
      throw ConfigError("sampler has no finite weight bound; declare w_bar explicitly");
    config.w_bar = bound;
  }
  try {
    config.bounds().validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("bounds: ") + e.what());
  }
  return {std::move(config), std::move(tb)};
}

double wall_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

EffortStats effort_of(std::span<const PairRecord> pairs, bool initiator_arm) {
  EffortStats s;
  if (pairs.empty()) return s;
  s.min = std::numeric_limits<std::uint64_t>::max();
  double total = 0.0;
  for (const auto& p : pairs) {
    const auto n = initiator_arm ? p.initiator.n : p.replicator.n;
    s.min = std::min(s.min, n);
    s.max = std::max(s.max, n);
    total += static_cast<double>(n);
  }
  s.mean = total / static_cast<double>(pairs.size());
  return s;
}

}  // namespace

BoundSpec CampaignConfig::bounds() const {
  if (!w_bar) throw ConfigError("w_bar is unresolved");
  return {measure.range(), *w_bar, accuracy.c, joint_bound};
}

std::string_view to_string(SamplerKind kind) noexcept {
  switch (kind) {
    case SamplerKind::kMonteCarlo: return "monte_carlo";
    case SamplerKind::kImportance: return "importance";
    case SamplerKind::kAis: return "ais";
  }
  return "unknown";
}

std::string_view to_string(OffsetPolicy policy) noexcept {
  return policy == OffsetPolicy::kZero ? "zero" : "uniform-random";
}

std::optional<OffsetPolicy> parse_offset_policy(std::string_view text) noexcept {
  if (text == "zero") return OffsetPolicy::kZero;
  if (text == "uniform-random" || text == "uniform_random") return OffsetPolicy::kUniformRandom;
  return std::nullopt;
}

CampaignConfig resolve_config(CampaignConfig config) { return resolve(std::move(config)).config; }

Campaign::Campaign(CampaignConfig config) {
  auto r = resolve(std::move(config));
  config_ = std::move(r.config);
  testbed_ = std::move(r.testbed);
  check_declared_bound(*build_sampler(config_.sampler, *testbed_), *config_.w_bar);
}

Partition Campaign::partition() const {
  const double a = alpha();
  double offset = 0.0;
  if (config_.offset_policy == OffsetPolicy::kUniformRandom) {
    Rng rng = Rng::derive(config_.seed, {static_cast<std::uint64_t>(StreamRole::kOffset)});
    offset = a * rng.uniform();
  }
  return build_partition(config_.measure.low, config_.measure.high, a, offset);
}

std::unique_ptr<Sampler> Campaign::make_sampler(const SamplerSpec& spec) const {
  auto s = build_sampler(spec, *testbed_);
  check_declared_bound(*s, *config_.w_bar);
  return s;
}

std::string partition_checksum(const Partition& p) {
  std::string bytes;
  for (double v : {p.m_low(), p.m_high(), p.alpha(), p.offset()}) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((bits >> (8 * i)) & 0xffU));
  }
  return fnv1a_hex(bytes);
}

TrialResult run_quantized_sq(const Campaign& campaign, const Partition& partition,
                             Sampler& sampler, Rng& sampler_rng, Rng& noise_rng,
                             const TrialOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  const CampaignConfig& cfg = campaign.config();
  const BoundSpec bounds = campaign.bounds();
  const Testbed& tb = campaign.testbed();
  const MeasureInterval meas = cfg.measure;
  const double gamma = cfg.accuracy.gamma;
  const double w_bar = *cfg.w_bar;
  if (partition.m_low() != meas.low || partition.m_high() != meas.high)
    throw DomainError("partition does not cover the campaign's measure interval");

  TrialResult r;
  r.sampler = sampler.name();
  r.partition_checksum = partition_checksum(partition);
  EstimatorState st;
  TerminationCheck chk;
  const bool fixed = options.fixed_n.has_value();

  auto finish = [&] {
    r.raw = st.mean();
    r.n = st.n();
    r.sigma_hat = st.variance();
    r.bernstein = chk.bernstein;
    r.hoeffding = chk.hoeffding;
    const Quantized q = quantize(r.raw, partition);
    r.quantized = q.value;
    r.cell = q.cell;
    r.clamped = q.clamped;
    if (auto* ais = dynamic_cast<AdaptiveSampler*>(&sampler)) {
      r.shapes = ais->trajectory();
      r.final_proposal = ais->proposal();
    }
    r.wall_seconds = wall_since(t0);
  };

  for (;;) {
    if (fixed) {
      if (st.n() >= *options.fixed_n) break;
    } else if (cfg.n_max && st.n() >= *cfg.n_max) {
      finish();
      throw NonTerminated("no termination within n_max = " + std::to_string(*cfg.n_max) +
                              " samples",
                          std::move(r));
    }
    const WeightedDraw d = sampler.draw(sampler_rng);
    const double psi = tb.evaluate(d.point, noise_rng);
    if (!(psi >= meas.low && psi <= meas.high))
      throw DomainError("testbed '" + tb.kind() + "' produced a measure outside its interval");
    if (d.weight > w_bar) ++r.weight_cap_exceeded;
    sampler.observe(d.point, psi, d.weight);
    st.update(psi * d.weight);
    chk = check_termination(st, gamma, bounds, cfg.range_term_mode);
    const bool stop = !fixed && chk.terminate && st.n() >= cfg.n_min;
    if (options.record_trace)
      r.trace.push_back({st.n(), st.mean(), st.variance(), chk.bernstein, chk.hoeffding, stop});
    if (stop) {
      r.terminated = true;
      r.reason = chk.reason;
      break;
    }
  }
  finish();
  return r;
}

TrialResult run_quantized_sq(const Campaign& campaign, const Partition& partition,
                             const SamplerSpec& spec, std::uint64_t seed,
                             std::span<const std::uint64_t> path, const TrialOptions& options) {
  auto sampler = campaign.make_sampler(spec);
  Rng srng = Rng::derive(seed, with_role(path, StreamRole::kSampler));
  Rng nrng = Rng::derive(seed, with_role(path, StreamRole::kNoise));
  return run_quantized_sq(campaign, partition, *sampler, srng, nrng, options);
}

std::vector<double> estimate_trajectory(const Campaign& campaign, const SamplerSpec& spec,
                                        std::uint64_t seed,
                                        std::span<const std::uint64_t> checkpoints) {
  if (!std::is_sorted(checkpoints.begin(), checkpoints.end()))
    throw DomainError("checkpoints must be ascending");
  auto sampler = campaign.make_sampler(spec);
  Rng srng = Rng::derive(seed, {static_cast<std::uint64_t>(StreamRole::kSampler)});
  Rng nrng = Rng::derive(seed, {static_cast<std::uint64_t>(StreamRole::kNoise)});
  const Testbed& tb = campaign.testbed();
  EstimatorState st;
  std::vector<double> out;
  out.reserve(checkpoints.size());
  for (std::uint64_t target : checkpoints) {
    while (st.n() < target) {
      const WeightedDraw d = sampler->draw(srng);
      const double psi = tb.evaluate(d.point, nrng);
      sampler->observe(d.point, psi, d.weight);
      st.update(psi * d.weight);
    }
    out.push_back(st.mean());
  }
  return out;
}

InitiatorOutput initiator(const CampaignConfig& config, const TrialOptions& options) {
  Campaign campaign(config);
  InitiatorOutput out;
  out.artifact.config = campaign.config();
  out.artifact.partition = campaign.partition();
  out.artifact.checksum = artifact_to_json(out.artifact).at("checksum").get<std::string>();
  out.result = run_quantized_sq(campaign, out.artifact.partition, campaign.config().sampler,
                                campaign.config().seed, {}, options);
  return out;
}

TrialResult replicator(const SharedArtifact& artifact, std::uint64_t seed,
                       const std::optional<SamplerSpec>& sampler_override,
                       const TrialOptions& options) {
  if (artifact.format_version != kArtifactFormatVersion)
    throw ArtifactVersionMismatch("unsupported artifact format version " +
                                  std::to_string(artifact.format_version));
  Campaign campaign(artifact.config);
  const Partition& p = artifact.partition;
  if (p.alpha() != campaign.alpha())
    throw ArtifactVersionMismatch("artifact alpha does not match its (gamma, c, beta)");
  if (p.m_low() != campaign.config().measure.low || p.m_high() != campaign.config().measure.high)
    throw ArtifactVersionMismatch("artifact partition does not cover its measure interval");
  return run_quantized_sq(campaign, p, sampler_override.value_or(campaign.config().sampler), seed,
                          {}, options);
}

RepeatabilityReport summarize_pairs(const Campaign& campaign, const Partition& partition,
                                    std::span<const PairRecord> pairs) {
  const CampaignConfig& cfg = campaign.config();
  RepeatabilityReport rep;
  rep.pairs = pairs.size();
  rep.trials = 2 * pairs.size();
  rep.range_term_mode = cfg.range_term_mode;
  rep.alpha = partition.alpha();
  rep.partition_checksum = partition_checksum(partition);
  rep.tolerance = cfg.accuracy.gamma + 0.5 * partition.alpha();
  const Oracle& oracle = campaign.testbed().oracle();
  rep.oracle = oracle.value;
  rep.oracle_std_error = oracle.std_error;
  rep.oracle_method = oracle.method;
  rep.graded = oracle.std_error <= cfg.accuracy.gamma / 10.0;
  for (const auto& p : pairs) {
    if (p.initiator.partition_checksum != rep.partition_checksum ||
        p.replicator.partition_checksum != rep.partition_checksum)
      throw DomainError("pair results reference different partitions");
    if (p.repeat()) ++rep.repeats;
    for (const TrialResult* t : {&p.initiator, &p.replicator}) {
      if (t->clamped) ++rep.clamped;
      if (std::abs(t->quantized - oracle.value) <= rep.tolerance) ++rep.accuracy_hits;
      if (std::abs(t->raw - oracle.value) <= cfg.accuracy.gamma) ++rep.raw_gamma_hits;
    }
  }
  if (!pairs.empty()) {
    rep.repeat_rate = static_cast<double>(rep.repeats) / static_cast<double>(rep.pairs);
    rep.accuracy_hit_rate = static_cast<double>(rep.accuracy_hits) / static_cast<double>(rep.trials);
    rep.raw_gamma_rate = static_cast<double>(rep.raw_gamma_hits) / static_cast<double>(rep.trials);
    rep.initiator_sampler = pairs.front().initiator.sampler;
    rep.replicator_sampler = pairs.front().replicator.sampler;
  }
  if (!rep.graded) {
    rep.accuracy_hits = rep.raw_gamma_hits = 0;
    rep.accuracy_hit_rate = rep.raw_gamma_rate = 0.0;
  }
  rep.initiator_effort = effort_of(pairs, true);
  rep.replicator_effort = effort_of(pairs, false);
  return rep;
}

PairwiseResult pairwise_experiment(const Campaign& campaign, std::size_t n_pairs,
                                   const PairwiseOptions& options) {
  if (n_pairs < 1) throw DomainError("pairwise experiment needs at least one pair");
  const CampaignConfig& cfg = campaign.config();
  const SamplerSpec& init_spec = cfg.sampler;
  const SamplerSpec& rep_spec = options.replicator_sampler.value_or(cfg.sampler);
  // Surface bound violations before any work starts.
  campaign.make_sampler(init_spec);
  campaign.make_sampler(rep_spec);

  PairwiseResult out;
  out.partition = campaign.partition();
  out.pairs.resize(n_pairs);
  std::vector<std::exception_ptr> errors(n_pairs);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < n_pairs; i = next++) {
      try {
        const std::uint64_t rep_arm = options.same_seed ? 0 : 1;
        const std::uint64_t ipath[] = {kPairTag, i, 0};
        const std::uint64_t rpath[] = {kPairTag, i, rep_arm};
        out.pairs[i].initiator = run_quantized_sq(campaign, out.partition, init_spec, cfg.seed, ipath);
        out.pairs[i].replicator = run_quantized_sq(campaign, out.partition, rep_spec, cfg.seed, rpath);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = static_cast<unsigned>(std::clamp<std::size_t>(threads, 1, n_pairs));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  out.report = summarize_pairs(campaign, out.partition, out.pairs);
  return out;
}

EffortTable effort_comparison(const Campaign& campaign) {
  EffortTable t;
  TrialOptions opts;
  opts.record_trace = true;
  t.result = run_quantized_sq(campaign, campaign.partition(), campaign.config().sampler,
                              campaign.config().seed, {}, opts);
  t.required_n_hoeffding = required_n_hoeffding(campaign.config().accuracy.gamma, campaign.bounds());
  t.ratio = static_cast<double>(t.result.n) / static_cast<double>(t.required_n_hoeffding);
  return t;
}

}  // namespace repsq
