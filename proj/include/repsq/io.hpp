#pragma once

// JSON and CSV exchange formats.
//
// Doubles in JSON objects are written by the shortest round-trip repr, which
// reloads bit-identically. Partition boundaries are additionally written as
// 17-significant-digit decimal strings.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "repsq/harness.hpp"

namespace repsq {

// Partitions with more boundaries than this are serialized without the
// explicit list; the four defining doubles reproduce it exactly.
inline constexpr std::size_t kMaxSerializedBoundaries = 100'000;

std::string exact_decimal(double v);
double parse_exact_decimal(const std::string& text);

// 64-bit FNV-1a, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

nlohmann::json partition_to_json(const Partition& partition, const AccuracySpec& accuracy);
// Throws ArtifactVersionMismatch when listed boundaries disagree with the
// ones the defining doubles produce.
Partition partition_from_json(const nlohmann::json& j);

nlohmann::json sampler_to_json(const SamplerSpec& spec);
SamplerSpec sampler_from_json(const nlohmann::json& j);

nlohmann::json config_to_json(const CampaignConfig& config);
// Throws ConfigError on schema violations. A missing measure interval is the
// testbed's declared one.
CampaignConfig config_from_json(const nlohmann::json& j);
CampaignConfig load_config(const std::filesystem::path& path);

nlohmann::json artifact_to_json(const SharedArtifact& artifact);
// Verifies format version and checksum.
SharedArtifact artifact_from_json(const nlohmann::json& j);
SharedArtifact load_artifact(const std::filesystem::path& path);

nlohmann::json result_to_json(const TrialResult& result);
nlohmann::json report_to_json(const RepeatabilityReport& report);
nlohmann::json proposal_snapshot(const BetaProposal& proposal, const AisPolicy& policy,
                                 std::uint64_t seed);

void write_trace_csv(std::ostream& out, std::span<const TracePoint> trace, double gamma);
void write_effort_csv(std::ostream& out, std::span<const TracePoint> trace, double gamma);
void write_pairs_csv(std::ostream& out, std::span<const PairRecord> pairs);
void write_shapes_csv(std::ostream& out, std::span<const ShapeSnapshot> shapes);

nlohmann::json read_json(const std::filesystem::path& path);
// Writes to a sibling temporary file, then renames over the target.
void atomic_write(const std::filesystem::path& path, std::string_view content);

}  // namespace repsq
