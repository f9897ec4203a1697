#include "repsq/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include "repsq/rng.hpp"

namespace repsq {
namespace {

using nlohmann::json;

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback) {
  return j.contains(key) && !j.at(key).is_null() ? field<T>(j, key) : fallback;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError(std::string("unknown key '") + k + "' in " + where);
  }
}

json artifact_body(const SharedArtifact& a) {
  json j = partition_to_json(a.partition, a.config.accuracy);
  j["format_version"] = a.format_version;
  j["rng_algorithm"] = std::string(kRngAlgorithm);
  j["campaign"] = config_to_json(a.config);
  return j;
}

}  // namespace

std::string exact_decimal(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_exact_decimal(const std::string& text) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0' || errno == ERANGE)
    throw ArtifactVersionMismatch("malformed decimal '" + text + "'");
  return v;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json partition_to_json(const Partition& p, const AccuracySpec& acc) {
  json j{{"m_low", p.m_low()},
         {"m_high", p.m_high()},
         {"alpha", p.alpha()},
         {"offset", p.offset()},
         {"gamma", acc.gamma},
         {"c", acc.c},
         {"beta", acc.beta},
         {"cell_count", p.cell_count()},
         {"format_version", kArtifactFormatVersion}};
  if (p.boundary_count() <= kMaxSerializedBoundaries) {
    json b = json::array();
    for (std::size_t k = 0; k < p.boundary_count(); ++k) b.push_back(exact_decimal(p.boundary(k)));
    j["boundaries"] = std::move(b);
  } else {
    j["boundaries_elided"] = true;
  }
  return j;
}

Partition partition_from_json(const json& j) {
  try {
    Partition p(j.at("m_low").get<double>(), j.at("m_high").get<double>(),
                j.at("alpha").get<double>(), j.at("offset").get<double>());
    if (j.contains("cell_count") && j.at("cell_count").get<std::size_t>() != p.cell_count())
      throw ArtifactVersionMismatch("partition cell count disagrees with its defining values");
    if (j.contains("boundaries")) {
      const auto& b = j.at("boundaries");
      if (b.size() != p.boundary_count())
        throw ArtifactVersionMismatch("partition boundary count disagrees with its defining values");
      for (std::size_t k = 0; k < b.size(); ++k)
        if (parse_exact_decimal(b[k].get<std::string>()) != p.boundary(k))
          throw ArtifactVersionMismatch("partition boundary " + std::to_string(k) +
                                        " disagrees with its defining values");
    }
    return p;
  } catch (const json::exception& e) {
    throw ArtifactVersionMismatch(std::string("malformed partition: ") + e.what());
  } catch (const DomainError& e) {
    throw ArtifactVersionMismatch(std::string("invalid partition: ") + e.what());
  }
}

json sampler_to_json(const SamplerSpec& s) {
  json j{{"kind", std::string(to_string(s.kind))}};
  if (s.kind == SamplerKind::kImportance) {
    if (s.testbed_proposal) {
      j["proposal"] = "testbed";
    } else {
      j["proposal"] = "beta";
      j["beta"] = {{"a", s.beta_a}, {"b", s.beta_b}};
      j["mix_p"] = s.mix_p;
    }
  } else if (s.kind == SamplerKind::kAis) {
    j["mix_p"] = s.ais.mix_p;
    j["batch_size"] = s.ais.batch_size;
    j["learning_rate"] = s.ais.learning_rate;
    j["initial_shape"] = s.ais.initial_shape;
  }
  return j;
}

SamplerSpec sampler_from_json(const json& j) {
  SamplerSpec s;
  if (j.is_string()) return sampler_from_json(json{{"kind", j}});
  check_keys(j, {"kind", "proposal", "beta", "mix_p", "batch_size", "learning_rate", "initial_shape"},
             "sampler");
  const auto kind = field<std::string>(j, "kind");
  if (kind == "monte_carlo" || kind == "mc") {
    s.kind = SamplerKind::kMonteCarlo;
  } else if (kind == "importance" || kind == "is") {
    s.kind = SamplerKind::kImportance;
    const auto proposal = field_or<std::string>(j, "proposal", j.contains("beta") ? "beta" : "testbed");
    if (proposal == "testbed") {
      s.testbed_proposal = true;
    } else if (proposal == "beta") {
      s.testbed_proposal = false;
      const json& b = j.contains("beta") ? j.at("beta") : throw ConfigError("beta proposal needs 'beta'");
      check_keys(b, {"a", "b"}, "sampler.beta");
      auto vec = [&](const char* key) {
        const json& v = b.contains(key) ? b.at(key) : throw ConfigError("beta proposal needs a and b");
        return v.is_array() ? field<std::vector<double>>(b, key)
                            : std::vector<double>{field<double>(b, key)};
      };
      s.beta_a = vec("a");
      s.beta_b = vec("b");
      s.mix_p = field_or<double>(j, "mix_p", 0.1);
    } else {
      throw ConfigError("importance proposal must be 'testbed' or 'beta'");
    }
  } else if (kind == "ais") {
    s.kind = SamplerKind::kAis;
    s.ais.mix_p = field_or<double>(j, "mix_p", s.ais.mix_p);
    s.ais.batch_size = field_or<std::size_t>(j, "batch_size", s.ais.batch_size);
    s.ais.learning_rate = field_or<double>(j, "learning_rate", s.ais.learning_rate);
    s.ais.initial_shape = field_or<double>(j, "initial_shape", s.ais.initial_shape);
    try {
      s.ais.validate();
    } catch (const Error& e) {
      throw ConfigError(std::string("ais: ") + e.what());
    }
  } else {
    throw ConfigError("unknown sampler kind '" + kind + "'");
  }
  return s;
}

json config_to_json(const CampaignConfig& c) {
  json j{{"accuracy", {{"gamma", c.accuracy.gamma}, {"c", c.accuracy.c}, {"beta", c.accuracy.beta}}},
         {"measure", {{"low", c.measure.low}, {"high", c.measure.high}}},
         {"sampler", sampler_to_json(c.sampler)},
         {"testbed", c.testbed},
         {"seed", c.seed},
         {"offset_policy", std::string(to_string(c.offset_policy))},
         {"n_min", c.n_min},
         {"n_max", c.n_max ? json(*c.n_max) : json(nullptr)},
         {"range_term_mode", std::string(to_string(c.range_term_mode))}};
  json bounds = json::object();
  if (c.w_bar) bounds["w_bar"] = *c.w_bar;
  if (c.joint_bound) bounds["joint_bound"] = *c.joint_bound;
  j["bounds"] = std::move(bounds);
  return j;
}

CampaignConfig config_from_json(const json& j) {
  check_keys(j,
             {"accuracy", "measure", "bounds", "sampler", "testbed", "seed", "offset_policy",
              "n_min", "n_max", "range_term_mode", "description"},
             "campaign config");
  CampaignConfig c;
  const json acc = field<json>(j, "accuracy");
  check_keys(acc, {"gamma", "c", "beta"}, "accuracy");
  c.accuracy = {field<double>(acc, "gamma"), field<double>(acc, "c"), field<double>(acc, "beta")};

  c.testbed = field<json>(j, "testbed");
  if (!c.testbed.is_object()) throw ConfigError("testbed must be a descriptor object");
  if (j.contains("measure")) {
    const json m = j.at("measure");
    check_keys(m, {"low", "high"}, "measure");
    c.measure = {field<double>(m, "low"), field<double>(m, "high")};
  } else {
    c.measure = make_testbed(c.testbed)->measure();
  }
  if (j.contains("bounds")) {
    const json b = j.at("bounds");
    check_keys(b, {"w_bar", "joint_bound"}, "bounds");
    if (b.contains("w_bar") && !b.at("w_bar").is_null()) c.w_bar = field<double>(b, "w_bar");
    if (b.contains("joint_bound") && !b.at("joint_bound").is_null())
      c.joint_bound = field<double>(b, "joint_bound");
  }
  c.sampler = j.contains("sampler") ? sampler_from_json(j.at("sampler")) : SamplerSpec{};
  c.seed = field_or<std::uint64_t>(j, "seed", 0);
  const auto policy = field_or<std::string>(j, "offset_policy", "zero");
  const auto op = parse_offset_policy(policy);
  if (!op) throw ConfigError("offset_policy must be 'zero' or 'uniform-random'");
  c.offset_policy = *op;
  c.n_min = field_or<std::uint64_t>(j, "n_min", 2);
  if (j.contains("n_max") && !j.at("n_max").is_null()) c.n_max = field<std::uint64_t>(j, "n_max");
  const auto mode = field_or<std::string>(j, "range_term_mode", "paper_exact");
  const auto m = parse_range_term_mode(mode);
  if (!m) throw ConfigError("range_term_mode must be 'paper-exact' or 'linear-range'");
  c.range_term_mode = *m;
  return c;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

CampaignConfig load_config(const std::filesystem::path& path) {
  return config_from_json(read_json(path));
}

json artifact_to_json(const SharedArtifact& a) {
  json j = artifact_body(a);
  j["checksum"] = fnv1a_hex(j.dump());
  return j;
}

SharedArtifact artifact_from_json(const json& j) {
  if (!j.is_object() || !j.contains("format_version") || !j.contains("checksum"))
    throw ArtifactVersionMismatch("not a shared artifact");
  try {
    if (j.at("format_version").get<int>() != kArtifactFormatVersion)
      throw ArtifactVersionMismatch("unsupported artifact format version " +
                                    j.at("format_version").dump());
    if (j.at("rng_algorithm").get<std::string>() != kRngAlgorithm)
      throw ArtifactVersionMismatch("artifact was produced with a different generator");
    json body = j;
    body.erase("checksum");
    const auto stored = j.at("checksum").get<std::string>();
    if (fnv1a_hex(body.dump()) != stored)
      throw ArtifactVersionMismatch("artifact checksum mismatch");

    SharedArtifact a;
    a.format_version = kArtifactFormatVersion;
    a.partition = partition_from_json(j);
    try {
      a.config = config_from_json(j.at("campaign"));
    } catch (const ConfigError& e) {
      throw ArtifactVersionMismatch(std::string("artifact campaign: ") + e.what());
    }
    const AccuracySpec& acc = a.config.accuracy;
    if (acc.gamma != j.at("gamma").get<double>() || acc.c != j.at("c").get<double>() ||
        acc.beta != j.at("beta").get<double>())
      throw ArtifactVersionMismatch("artifact accuracy fields disagree with its campaign");
    a.checksum = stored;
    return a;
  } catch (const json::exception& e) {
    throw ArtifactVersionMismatch(std::string("malformed artifact: ") + e.what());
  }
}

SharedArtifact load_artifact(const std::filesystem::path& path) {
  json j;
  try {
    j = read_json(path);
  } catch (const ConfigError& e) {
    throw ArtifactVersionMismatch(e.what());
  }
  return artifact_from_json(j);
}

json result_to_json(const TrialResult& r) {
  json j{{"quantized_estimate", r.quantized},
         {"cell", r.cell},
         {"raw_estimate", r.raw},
         {"clamped", r.clamped},
         {"n", r.n},
         {"sigma_hat", r.sigma_hat},
         {"terminated", r.terminated},
         {"terminated_by", std::string(to_string(r.reason))},
         {"bernstein_radius", r.bernstein},
         {"hoeffding_radius", r.hoeffding},
         {"weight_cap_exceeded", r.weight_cap_exceeded},
         {"sampler", r.sampler},
         {"partition_checksum", r.partition_checksum}};
  if (r.final_proposal) {
    j["final_shapes_a"] = r.final_proposal->a();
    j["final_shapes_b"] = r.final_proposal->b();
  }
  return j;
}

json report_to_json(const RepeatabilityReport& r) {
  auto effort = [](const EffortStats& e) {
    return json{{"min", e.min}, {"mean", e.mean}, {"max", e.max}};
  };
  json j{{"pairs", r.pairs},
         {"repeats", r.repeats},
         {"repeat_rate", r.repeat_rate},
         {"trials", r.trials},
         {"graded", r.graded},
         {"oracle_r_star", r.oracle},
         {"oracle_std_error", r.oracle_std_error},
         {"oracle_method", r.oracle_method},
         {"tolerance", r.tolerance},
         {"clamped", r.clamped},
         {"effort", {{"initiator", effort(r.initiator_effort)}, {"replicator", effort(r.replicator_effort)}}},
         {"initiator_sampler", r.initiator_sampler},
         {"replicator_sampler", r.replicator_sampler},
         {"range_term_mode", std::string(to_string(r.range_term_mode))},
         {"alpha", r.alpha},
         {"partition_checksum", r.partition_checksum}};
  if (r.graded) {
    j["accuracy_hits"] = r.accuracy_hits;
    j["accuracy_hit_rate"] = r.accuracy_hit_rate;
    j["raw_gamma_hits"] = r.raw_gamma_hits;
    j["raw_gamma_rate"] = r.raw_gamma_rate;
  } else {
    j["accuracy_hit_rate"] = nullptr;
    j["raw_gamma_rate"] = nullptr;
  }
  return j;
}

json proposal_snapshot(const BetaProposal& q, const AisPolicy& policy, std::uint64_t seed) {
  return {{"shapes_a", q.a()},
          {"shapes_b", q.b()},
          {"domain", {{"lo", q.domain().lo}, {"hi", q.domain().hi}}},
          {"mix_p", policy.mix_p},
          {"d", policy.batch_size},
          {"l_r", policy.learning_rate},
          {"rng_algorithm", std::string(kRngAlgorithm)},
          {"rng_seed", seed}};
}

void write_trace_csv(std::ostream& out, std::span<const TracePoint> trace, double) {
  out << "n,r_n,sigma_hat,bernstein_radius,hoeffding_radius,terminated\n";
  for (const auto& t : trace)
    out << t.n << ',' << exact_decimal(t.mean) << ',' << exact_decimal(t.sigma_hat) << ','
        << exact_decimal(t.bernstein) << ',' << exact_decimal(t.hoeffding) << ','
        << (t.terminated ? 1 : 0) << '\n';
}

void write_effort_csv(std::ostream& out, std::span<const TracePoint> trace, double gamma) {
  out << "n,r_n,sigma_hat,bernstein_radius,hoeffding_radius,terminated,terminated_by\n";
  for (const auto& t : trace) {
    const bool b = t.n >= 2 && t.bernstein <= gamma;
    const bool h = t.hoeffding <= gamma;
    const char* by = !(b || h) ? "none" : (b && h) ? "both" : b ? "bernstein" : "hoeffding";
    out << t.n << ',' << exact_decimal(t.mean) << ',' << exact_decimal(t.sigma_hat) << ','
        << exact_decimal(t.bernstein) << ',' << exact_decimal(t.hoeffding) << ','
        << (t.terminated ? 1 : 0) << ',' << by << '\n';
  }
}

void write_pairs_csv(std::ostream& out, std::span<const PairRecord> pairs) {
  out << "pair_id,arm,sampler,raw_estimate,quantized_estimate,n,sigma_hat,clamped,repeat\n";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const bool rep = pairs[i].repeat();
    const TrialResult* arms[] = {&pairs[i].initiator, &pairs[i].replicator};
    for (int a = 0; a < 2; ++a) {
      const TrialResult& t = *arms[a];
      out << i << ',' << (a == 0 ? "initiator" : "replicator") << ',' << t.sampler << ','
          << exact_decimal(t.raw) << ',' << exact_decimal(t.quantized) << ',' << t.n << ','
          << exact_decimal(t.sigma_hat) << ',' << (t.clamped ? 1 : 0) << ',' << (rep ? 1 : 0)
          << '\n';
    }
  }
}

void write_shapes_csv(std::ostream& out, std::span<const ShapeSnapshot> shapes) {
  const std::size_t dims = shapes.empty() ? 0 : shapes.front().a.size();
  out << "batch";
  for (std::size_t k = 0; k < dims; ++k) out << ",a" << k;
  for (std::size_t k = 0; k < dims; ++k) out << ",b" << k;
  out << '\n';
  for (const auto& s : shapes) {
    out << s.batch;
    for (double v : s.a) out << ',' << exact_decimal(v);
    for (double v : s.b) out << ',' << exact_decimal(v);
    out << '\n';
  }
}

void atomic_write(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, path);
}

}  // namespace repsq
