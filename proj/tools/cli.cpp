#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "repsq/error.hpp"
#include "repsq/harness.hpp"
#include "repsq/io.hpp"
#include "repsq/quantization.hpp"
#include "repsq/rng.hpp"

namespace repsq::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

#ifndef REPSQ_VERSION
#define REPSQ_VERSION "unknown"
#endif

// Everything a command needs; stored verbatim in manifest.json so `rerun`
// reproduces the outputs without the original files.
struct Invocation {
  std::string command;
  std::string config_path;
  json config;    // init, pairwise, effort; CLI overrides already applied
  json artifact;  // replicate
  std::optional<std::uint64_t> seed;
  std::size_t pairs = 100;
  std::optional<std::uint64_t> n_max;
  json replicator_sampler;  // null: same as the initiator's
  fs::path out;
};

using Outputs = std::map<std::string, std::string>;

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool quiet() {
  const char* v = std::getenv("REPSQ_QUIET");
  return v && *v && std::string(v) != "0";
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json invocation_to_json(const Invocation& inv) {
  json j{{"command", inv.command},
         {"config_path", inv.config_path},
         {"pairs", inv.pairs},
         {"seed", inv.seed ? json(*inv.seed) : json(nullptr)},
         {"n_max", inv.n_max ? json(*inv.n_max) : json(nullptr)},
         {"replicator_sampler", inv.replicator_sampler},
         {"out_dir", inv.out.string()}};
  if (!inv.config.is_null()) j["config"] = inv.config;
  if (!inv.artifact.is_null()) j["artifact"] = inv.artifact;
  return j;
}

Invocation invocation_from_manifest(const json& m) {
  try {
    const json& j = m.at("invocation");
    Invocation inv;
    inv.command = j.at("command").get<std::string>();
    inv.config_path = j.value("config_path", "");
    inv.pairs = j.at("pairs").get<std::size_t>();
    if (!j.at("seed").is_null()) inv.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("n_max").is_null()) inv.n_max = j.at("n_max").get<std::uint64_t>();
    inv.replicator_sampler = j.at("replicator_sampler");
    inv.out = j.at("out_dir").get<std::string>();
    if (j.contains("config")) inv.config = j.at("config");
    if (j.contains("artifact")) inv.artifact = j.at("artifact");
    return inv;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
}

void apply_overrides(json& config, const std::optional<std::uint64_t>& seed,
                     const std::optional<std::uint64_t>& n_max, const std::string& mode,
                     const std::string& offset_policy) {
  if (!config.is_object()) throw ConfigError("config must be a JSON object");
  if (seed) config["seed"] = *seed;
  if (n_max) config["n_max"] = *n_max;
  if (!mode.empty()) {
    if (!parse_range_term_mode(mode)) throw ConfigError("--range-term-mode: unknown mode '" + mode + "'");
    config["range_term_mode"] = mode;
  }
  if (!offset_policy.empty()) {
    if (!parse_offset_policy(offset_policy))
      throw ConfigError("--offset-policy: unknown policy '" + offset_policy + "'");
    config["offset_policy"] = offset_policy;
  }
}

std::string trace_csv(const TrialResult& r, double gamma) {
  std::ostringstream s;
  write_trace_csv(s, r.trace, gamma);
  return s.str();
}

void add_ais_outputs(Outputs& files, const TrialResult& r, const CampaignConfig& cfg,
                     std::uint64_t seed) {
  if (!r.final_proposal) return;
  files["proposal.json"] = dump(proposal_snapshot(*r.final_proposal, cfg.sampler.ais, seed));
  std::ostringstream s;
  write_shapes_csv(s, r.shapes);
  files["shapes.csv"] = s.str();
}

Outputs do_init(const Invocation& inv, std::ostream& out) {
  const CampaignConfig cfg = config_from_json(inv.config);
  TrialOptions opts;
  opts.record_trace = true;
  const InitiatorOutput io = initiator(cfg, opts);
  Outputs files;
  files["artifact.json"] = dump(artifact_to_json(io.artifact));
  files["result.json"] = dump(result_to_json(io.result));
  files["trace.csv"] = trace_csv(io.result, cfg.accuracy.gamma);
  add_ais_outputs(files, io.result, io.artifact.config, io.artifact.config.seed);
  if (!quiet())
    out << "quantized " << exact_decimal(io.result.quantized) << "  raw "
        << exact_decimal(io.result.raw) << "  n " << io.result.n << "  ("
        << to_string(io.result.reason) << ")\n";
  return files;
}

Outputs do_replicate(const Invocation& inv, std::ostream& out) {
  SharedArtifact artifact = artifact_from_json(inv.artifact);
  if (!inv.seed) throw ConfigError("replicate needs --seed");
  if (inv.n_max) artifact.config.n_max = *inv.n_max;
  std::optional<SamplerSpec> override;
  if (!inv.replicator_sampler.is_null()) override = sampler_from_json(inv.replicator_sampler);
  TrialOptions opts;
  opts.record_trace = true;
  const TrialResult r = replicator(artifact, *inv.seed, override, opts);
  Outputs files;
  files["result.json"] = dump(result_to_json(r));
  files["trace.csv"] = trace_csv(r, artifact.config.accuracy.gamma);
  add_ais_outputs(files, r, artifact.config, *inv.seed);
  if (!quiet())
    out << "quantized " << exact_decimal(r.quantized) << "  raw " << exact_decimal(r.raw)
        << "  n " << r.n << "  (" << to_string(r.reason) << ")\n";
  return files;
}

Outputs do_pairwise(const Invocation& inv, std::ostream& out) {
  if (inv.pairs < 1) throw ConfigError("--pairs must be at least 1");
  const Campaign campaign(config_from_json(inv.config));
  PairwiseOptions opts;
  if (!inv.replicator_sampler.is_null())
    opts.replicator_sampler = sampler_from_json(inv.replicator_sampler);
  const PairwiseResult res = pairwise_experiment(campaign, inv.pairs, opts);
  SharedArtifact artifact;
  artifact.config = campaign.config();
  artifact.partition = res.partition;
  Outputs files;
  files["artifact.json"] = dump(artifact_to_json(artifact));
  files["report.json"] = dump(report_to_json(res.report));
  std::ostringstream s;
  write_pairs_csv(s, res.pairs);
  files["pairs.csv"] = s.str();
  if (!quiet()) {
    out << "repeat_rate " << res.report.repeat_rate << " (" << res.report.repeats << "/"
        << res.report.pairs << ")";
    if (res.report.graded) out << "  accuracy_hit_rate " << res.report.accuracy_hit_rate;
    out << "\n";
  }
  return files;
}

Outputs do_effort(const Invocation& inv, std::ostream& out) {
  const Campaign campaign(config_from_json(inv.config));
  const EffortTable t = effort_comparison(campaign);
  Outputs files;
  std::ostringstream s;
  write_effort_csv(s, t.result.trace, campaign.config().accuracy.gamma);
  files["effort.csv"] = s.str();
  json r = result_to_json(t.result);
  r["required_n_hoeffding"] = t.required_n_hoeffding;
  r["effort_ratio"] = t.ratio;
  r["range_term_mode"] = std::string(to_string(campaign.config().range_term_mode));
  files["result.json"] = dump(r);
  if (!quiet())
    out << "terminated at n " << t.result.n << " (" << to_string(t.result.reason)
        << "); Hoeffding alone needs " << t.required_n_hoeffding << "\n";
  return files;
}

int execute(const Invocation& inv, std::ostream& out) {
  const std::string started = utc_now();
  Outputs files;
  if (inv.command == "init") files = do_init(inv, out);
  else if (inv.command == "replicate") files = do_replicate(inv, out);
  else if (inv.command == "pairwise") files = do_pairwise(inv, out);
  else if (inv.command == "effort") files = do_effort(inv, out);
  else throw ConfigError("cannot re-run command '" + inv.command + "'");

  json outputs = json::object();
  for (const auto& [name, content] : files) {
    atomic_write(inv.out / name, content);
    outputs[name] = fnv1a_hex(content);
  }
  const json manifest{{"tool", "repsq"},
                      {"tool_version", REPSQ_VERSION},
                      {"rng_algorithm", std::string(kRngAlgorithm)},
                      {"command", inv.command},
                      {"config_path", inv.config_path},
                      {"out_dir", inv.out.string()},
                      {"resolved_seed", inv.seed ? json(*inv.seed)
                                                 : inv.config.is_object() && inv.config.contains("seed")
                                                       ? inv.config.at("seed")
                                                       : json(0)},
                      {"invocation", invocation_to_json(inv)},
                      {"outputs", outputs},
                      {"started_at", started},
                      {"finished_at", utc_now()}};
  atomic_write(inv.out / "manifest.json", dump(manifest));
  return 0;
}

int cmd_alpha(double gamma, double c, double beta, bool as_json, std::ostream& out) {
  const AccuracySpec spec{gamma, c, beta};
  const double alpha = compute_alpha(spec);
  const double tol = quantized_tolerance(spec);
  if (as_json) {
    out << json{{"alpha", alpha}, {"tolerance", tol}, {"feasible", true}}.dump() << "\n";
  } else {
    char buf[160];
    std::snprintf(buf, sizeof buf, "alpha=%.6g tolerance=%.6g feasible=true\n", alpha, tol);
    out << buf;
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Repeatable statistical-query campaigns with quantized outputs", "repsq"};
  app.set_version_flag("--version", std::string(REPSQ_VERSION));
  app.require_subcommand(1);

  double gamma = 0, c = 0, beta = 0;
  bool as_json = false;
  auto* alpha = app.add_subcommand("alpha", "Quantization width and tolerance for (gamma, c, beta)");
  alpha->add_option("--gamma", gamma, "accuracy tolerance")->required();
  alpha->add_option("--c", c, "accuracy failure probability")->required();
  alpha->add_option("--beta", beta, "repeatability failure probability")->required();
  alpha->add_flag("--json", as_json, "exact JSON output");

  std::string config_path, artifact_path, manifest_path, mode, offset_policy, sampler_arg, out_dir;
  std::optional<std::uint64_t> seed, n_max;
  std::size_t pairs = 100;

  auto common = [&](CLI::App* sub, bool needs_config) {
    if (needs_config) sub->add_option("--config", config_path, "campaign config JSON")->required();
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--seed", seed, "campaign seed override");
    sub->add_option("--n-max", n_max, "sample cap; hitting it is an error");
    sub->add_option("--range-term-mode", mode, "paper-exact | linear-range")
        ->check(CLI::IsMember({"paper-exact", "linear-range", "paper_exact", "linear_range"}));
    sub->add_option("--offset-policy", offset_policy, "zero | uniform-random")
        ->check(CLI::IsMember({"zero", "uniform-random"}));
  };
  auto* init = app.add_subcommand("init", "Run the initiator and write the shared artifact");
  common(init, true);
  auto* replicate = app.add_subcommand("replicate", "Reproduce a campaign from a shared artifact");
  replicate->add_option("--artifact", artifact_path, "artifact.json from init")->required();
  replicate->add_option("--out", out_dir, "output directory")->required();
  replicate->add_option("--seed", seed, "replicator seed")->required();
  replicate->add_option("--n-max", n_max, "sample cap; hitting it is an error");
  replicate->add_option("--sampler", sampler_arg, "sampler override: JSON text or file");
  auto* pairwise = app.add_subcommand("pairwise", "Initiator/replicator pairs on one partition");
  common(pairwise, true);
  pairwise->add_option("--pairs", pairs, "number of pairs")->check(CLI::PositiveNumber);
  pairwise->add_option("--replicator-sampler", sampler_arg, "replicator sampler: JSON text or file");
  auto* effort = app.add_subcommand("effort", "Radius trace of one campaign against Hoeffding");
  common(effort, true);
  auto* rerun = app.add_subcommand("rerun", "Repeat a command from its manifest");
  rerun->add_option("--manifest", manifest_path, "manifest.json of an earlier run")->required();
  rerun->add_option("--out", out_dir, "output directory (default: the original one)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (alpha->parsed()) return cmd_alpha(gamma, c, beta, as_json, out);

    auto sampler_json = [&]() -> json {
      if (sampler_arg.empty()) return nullptr;
      if (fs::exists(sampler_arg)) return read_json(sampler_arg);
      try {
        return json::parse(sampler_arg);
      } catch (const json::exception&) {
        return json(sampler_arg);  // bare kind name
      }
    };

    Invocation inv;
    if (rerun->parsed()) {
      inv = invocation_from_manifest(read_json(manifest_path));
      if (!out_dir.empty()) inv.out = out_dir;
      return execute(inv, out);
    }
    inv.out = out_dir;
    inv.seed = seed;
    inv.n_max = n_max;
    inv.pairs = pairs;
    inv.replicator_sampler = sampler_json();
    if (replicate->parsed()) {
      inv.command = "replicate";
      inv.artifact = read_json(artifact_path);
      // Catch tampering before anything runs.
      (void)artifact_from_json(inv.artifact);
    } else {
      inv.command = init->parsed() ? "init" : pairwise->parsed() ? "pairwise" : "effort";
      inv.config_path = config_path;
      inv.config = read_json(config_path);
      apply_overrides(inv.config, seed, n_max, mode, offset_policy);
    }
    return execute(inv, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace repsq::cli
