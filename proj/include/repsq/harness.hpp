#pragma once

// Initiator / replicator protocol, pairwise repeatability campaigns and
// effort comparisons.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "repsq/error.hpp"
#include "repsq/estimator.hpp"
#include "repsq/quantization.hpp"
#include "repsq/samplers.hpp"
#include "repsq/testbeds.hpp"

namespace repsq {

inline constexpr int kArtifactFormatVersion = 1;

enum class SamplerKind { kMonteCarlo, kImportance, kAis };

struct SamplerSpec {
  SamplerKind kind = SamplerKind::kMonteCarlo;
  // importance: the testbed's companion proposal, or a Beta proposal on the
  // testbed box mixed with p at rate mix_p.
  bool testbed_proposal = true;
  std::vector<double> beta_a;
  std::vector<double> beta_b;
  double mix_p = 0.1;
  // ais
  AisPolicy ais;
};

enum class OffsetPolicy { kZero, kUniformRandom };

struct CampaignConfig {
  AccuracySpec accuracy;
  MeasureInterval measure;
  // Absent until resolved; resolve_config takes the sampler's own bound.
  std::optional<double> w_bar;
  std::optional<double> joint_bound;
  SamplerSpec sampler;
  nlohmann::json testbed;
  std::uint64_t seed = 0;
  OffsetPolicy offset_policy = OffsetPolicy::kZero;
  std::uint64_t n_min = 2;
  std::optional<std::uint64_t> n_max;
  RangeTermMode range_term_mode = RangeTermMode::kPaperExact;

  BoundSpec bounds() const;
};

struct TracePoint {
  std::uint64_t n = 0;
  double mean = 0.0;
  double sigma_hat = 0.0;
  double bernstein = 0.0;
  double hoeffding = 0.0;
  bool terminated = false;
};

struct TrialResult {
  double quantized = 0.0;
  std::size_t cell = 0;
  double raw = 0.0;
  bool clamped = false;
  std::uint64_t n = 0;
  double sigma_hat = 0.0;
  bool terminated = false;
  TerminationReason reason = TerminationReason::kNone;
  double bernstein = 0.0;
  double hoeffding = 0.0;
  std::uint64_t weight_cap_exceeded = 0;
  std::string sampler;
  std::string partition_checksum;
  std::vector<TracePoint> trace;           // filled when requested
  std::vector<ShapeSnapshot> shapes;       // AIS only
  std::optional<BetaProposal> final_proposal;  // AIS only
  double wall_seconds = 0.0;               // never serialized into result files
};

// Thrown when n_max is reached before the termination rule fires.
class NonTerminated : public Error {
 public:
  NonTerminated(const std::string& what, TrialResult partial)
      : Error(what), partial_(std::move(partial)) {}
  int code() const noexcept override { return 3; }
  const TrialResult& partial() const noexcept { return partial_; }

 private:
  TrialResult partial_;
};

struct TrialOptions {
  bool record_trace = false;
  // Fixed sample count with termination disabled; n_max is ignored.
  std::optional<std::uint64_t> fixed_n;
};

// Resolved, validated config with its testbed built once.
class Campaign {
 public:
  explicit Campaign(CampaignConfig config);

  const CampaignConfig& config() const noexcept { return config_; }
  const Testbed& testbed() const noexcept { return *testbed_; }
  std::shared_ptr<const Testbed> testbed_ptr() const noexcept { return testbed_; }
  BoundSpec bounds() const { return config_.bounds(); }
  double alpha() const { return compute_alpha(config_.accuracy); }

  // Partition under the configured offset policy; the random offset is drawn
  // from the campaign seed's offset stream.
  Partition partition() const;

  // Throws BoundViolation when the sampler's provable weight bound exceeds
  // the declared w_bar, ConfigError when the testbed cannot host it.
  std::unique_ptr<Sampler> make_sampler(const SamplerSpec& spec) const;

 private:
  CampaignConfig config_;
  std::shared_ptr<const Testbed> testbed_;
};

// Fills w_bar from the sampler's own bound when absent and validates the
// config against its testbed.
CampaignConfig resolve_config(CampaignConfig config);

// Sample, evaluate, weight and update until the termination rule holds (and
// n >= n_min), then quantize. Streams: sampler = derive(seed, path + {0}),
// noise = derive(seed, path + {1}).
TrialResult run_quantized_sq(const Campaign& campaign, const Partition& partition,
                             const SamplerSpec& sampler, std::uint64_t seed,
                             std::span<const std::uint64_t> path = {},
                             const TrialOptions& options = {});

// Lower-level form over caller-owned sampler and streams.
TrialResult run_quantized_sq(const Campaign& campaign, const Partition& partition,
                             Sampler& sampler, Rng& sampler_rng, Rng& noise_rng,
                             const TrialOptions& options = {});

// Running estimate at each checkpoint of a fixed-length run; no termination.
std::vector<double> estimate_trajectory(const Campaign& campaign, const SamplerSpec& sampler,
                                        std::uint64_t seed,
                                        std::span<const std::uint64_t> checkpoints);

std::string partition_checksum(const Partition& partition);

struct SharedArtifact {
  int format_version = kArtifactFormatVersion;
  CampaignConfig config;
  Partition partition{0.0, 1.0, 1.0, 0.0};
  std::string checksum;  // filled by serialization
};

struct InitiatorOutput {
  SharedArtifact artifact;
  TrialResult result;
};

InitiatorOutput initiator(const CampaignConfig& config, const TrialOptions& options = {});

// Rebuilds the campaign from the artifact and runs one trial on its partition.
// Requires the artifact's alpha to equal compute_alpha of its (gamma, c, beta).
TrialResult replicator(const SharedArtifact& artifact, std::uint64_t seed,
                       const std::optional<SamplerSpec>& sampler_override = std::nullopt,
                       const TrialOptions& options = {});

struct EffortStats {
  std::uint64_t min = 0;
  double mean = 0.0;
  std::uint64_t max = 0;
};

struct RepeatabilityReport {
  std::size_t pairs = 0;
  std::size_t repeats = 0;
  double repeat_rate = 0.0;
  std::size_t trials = 0;
  // Accuracy is graded only when the oracle's standard error is <= gamma/10.
  bool graded = false;
  double oracle = 0.0;
  double oracle_std_error = 0.0;
  std::string oracle_method;
  double tolerance = 0.0;  // gamma + alpha/2
  std::size_t accuracy_hits = 0;
  double accuracy_hit_rate = 0.0;
  std::size_t raw_gamma_hits = 0;
  double raw_gamma_rate = 0.0;
  std::size_t clamped = 0;
  EffortStats initiator_effort;
  EffortStats replicator_effort;
  std::string initiator_sampler;
  std::string replicator_sampler;
  RangeTermMode range_term_mode = RangeTermMode::kPaperExact;
  double alpha = 0.0;
  std::string partition_checksum;
};

struct PairRecord {
  TrialResult initiator;
  TrialResult replicator;
  bool repeat() const noexcept { return initiator.cell == replicator.cell; }
};

struct PairwiseOptions {
  std::optional<SamplerSpec> replicator_sampler;
  // Both arms draw from the same streams (determinism check).
  bool same_seed = false;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct PairwiseResult {
  Partition partition{0.0, 1.0, 1.0, 0.0};
  std::vector<PairRecord> pairs;
  RepeatabilityReport report;
};

// One partition shared by every pair; pair i arm a draws from
// derive(seed, {pair_tag, i, a, role}). Aggregation is ordered by pair index.
PairwiseResult pairwise_experiment(const Campaign& campaign, std::size_t n_pairs,
                                   const PairwiseOptions& options = {});

RepeatabilityReport summarize_pairs(const Campaign& campaign, const Partition& partition,
                                    std::span<const PairRecord> pairs);

struct EffortTable {
  TrialResult result;  // trace always recorded
  std::uint64_t required_n_hoeffding = 0;
  double ratio = 0.0;  // result.n / required_n_hoeffding
};

EffortTable effort_comparison(const Campaign& campaign);

std::string_view to_string(SamplerKind kind) noexcept;
std::string_view to_string(OffsetPolicy policy) noexcept;
std::optional<OffsetPolicy> parse_offset_policy(std::string_view text) noexcept;

}  // namespace repsq
