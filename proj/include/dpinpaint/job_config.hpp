// Copyright 2026 The dpinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Experiment configuration shared by the CLI subcommands. Serialized as JSON
// with a schema_version field; unknown keys are rejected at every level.
// Every field is written on save, so load(save(c)) == c.

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <string>

#include <json.hpp>

#include "dpinpaint/common.hpp"

namespace dpinpaint {

inline constexpr int kJobSchemaVersion = 1;

struct SamplerSettings {
  std::size_t steps = 70;
  double sigma_min = 1e-4;
  double sigma_max = 1.0;
  double rho = 13.0;
  double s_churn = 10.0;
  std::string order = "first";
  bool operator==(const SamplerSettings&) const = default;
};

struct DenoiserSettings {
  // gaussian-white | gaussian-ar1 | linear-cqt
  std::string kind = "gaussian-ar1";
  double ar1_a = 0.95;
  double variance = 0.01;
  std::string checkpoint;  // linear-cqt only
  bool use_ema = true;
  bool operator==(const DenoiserSettings&) const = default;
};

struct CqtSettings {
  int bins_per_octave = 64;
  int num_octaves = 8;
  double f_min = 0.0;  // 0: sample_rate / 2^(num_octaves + 1)
  bool operator==(const CqtSettings&) const = default;
};

struct JanssenSettings {
  std::size_t order = 0;  // 0: automatic
  std::size_t iterations = 5;
  std::size_t max_context = 2048;
  bool operator==(const JanssenSettings&) const = default;
};

struct JobConfig {
  int schema_version = kJobSchemaVersion;
  std::string command;
  std::string input;
  std::string output;
  std::string gaps;
  std::size_t equal_gaps = 0;  // used when `gaps` is empty
  double gap_ms = 50.0;
  std::string reference;
  std::string trace;
  std::string metrics;
  std::uint64_t seed = 0;
  double xi_prime = 0.25;
  double fade_ms = 1.0;
  bool post_filter = true;
  SamplerSettings sampler;
  DenoiserSettings denoiser;
  CqtSettings cqt;
  JanssenSettings janssen;
  bool operator==(const JobConfig&) const = default;
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError("config: " + where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ValidationError("config: unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline nlohmann::json to_json(const JobConfig& c) {
  return {
      {"schema_version", c.schema_version},
      {"command", c.command},
      {"input", c.input},
      {"output", c.output},
      {"gaps", c.gaps},
      {"equal_gaps", c.equal_gaps},
      {"gap_ms", c.gap_ms},
      {"reference", c.reference},
      {"trace", c.trace},
      {"metrics", c.metrics},
      {"seed", c.seed},
      {"xi_prime", c.xi_prime},
      {"fade_ms", c.fade_ms},
      {"post_filter", c.post_filter},
      {"sampler",
       {{"steps", c.sampler.steps},
        {"sigma_min", c.sampler.sigma_min},
        {"sigma_max", c.sampler.sigma_max},
        {"rho", c.sampler.rho},
        {"s_churn", c.sampler.s_churn},
        {"order", c.sampler.order}}},
      {"denoiser",
       {{"kind", c.denoiser.kind},
        {"ar1_a", c.denoiser.ar1_a},
        {"variance", c.denoiser.variance},
        {"checkpoint", c.denoiser.checkpoint},
        {"use_ema", c.denoiser.use_ema}}},
      {"cqt",
       {{"bins_per_octave", c.cqt.bins_per_octave},
        {"num_octaves", c.cqt.num_octaves},
        {"f_min", c.cqt.f_min}}},
      {"janssen",
       {{"order", c.janssen.order},
        {"iterations", c.janssen.iterations},
        {"max_context", c.janssen.max_context}}},
  };
}

/// Missing keys keep their defaults.
inline JobConfig job_config_from_json(const nlohmann::json& j) {
  using detail::read_opt;
  JobConfig c;
  try {
    detail::check_keys(j, "config",
                       {"schema_version", "command", "input", "output", "gaps",
                        "equal_gaps", "gap_ms", "reference", "trace", "metrics", "seed", "xi_prime",
                        "fade_ms", "post_filter", "sampler", "denoiser", "cqt",
                        "janssen"});
    if (!j.contains("schema_version"))
      throw ValidationError("config: missing schema_version");
    c.schema_version = j.at("schema_version").get<int>();
    if (c.schema_version != kJobSchemaVersion)
      throw ValidationError("config: unsupported schema_version " +
                            std::to_string(c.schema_version));
    read_opt(j, "command", c.command);
    read_opt(j, "input", c.input);
    read_opt(j, "output", c.output);
    read_opt(j, "gaps", c.gaps);
    read_opt(j, "equal_gaps", c.equal_gaps);
    read_opt(j, "gap_ms", c.gap_ms);
    read_opt(j, "reference", c.reference);
    read_opt(j, "trace", c.trace);
    read_opt(j, "metrics", c.metrics);
    read_opt(j, "seed", c.seed);
    read_opt(j, "xi_prime", c.xi_prime);
    read_opt(j, "fade_ms", c.fade_ms);
    read_opt(j, "post_filter", c.post_filter);
    if (j.contains("sampler")) {
      const auto& s = j.at("sampler");
      detail::check_keys(s, "sampler",
                         {"steps", "sigma_min", "sigma_max", "rho", "s_churn", "order"});
      read_opt(s, "steps", c.sampler.steps);
      read_opt(s, "sigma_min", c.sampler.sigma_min);
      read_opt(s, "sigma_max", c.sampler.sigma_max);
      read_opt(s, "rho", c.sampler.rho);
      read_opt(s, "s_churn", c.sampler.s_churn);
      read_opt(s, "order", c.sampler.order);
    }
    if (j.contains("denoiser")) {
      const auto& d = j.at("denoiser");
      detail::check_keys(d, "denoiser",
                         {"kind", "ar1_a", "variance", "checkpoint", "use_ema"});
      read_opt(d, "kind", c.denoiser.kind);
      read_opt(d, "ar1_a", c.denoiser.ar1_a);
      read_opt(d, "variance", c.denoiser.variance);
      read_opt(d, "checkpoint", c.denoiser.checkpoint);
      read_opt(d, "use_ema", c.denoiser.use_ema);
    }
    if (j.contains("cqt")) {
      const auto& q = j.at("cqt");
      detail::check_keys(q, "cqt", {"bins_per_octave", "num_octaves", "f_min"});
      read_opt(q, "bins_per_octave", c.cqt.bins_per_octave);
      read_opt(q, "num_octaves", c.cqt.num_octaves);
      read_opt(q, "f_min", c.cqt.f_min);
    }
    if (j.contains("janssen")) {
      const auto& q = j.at("janssen");
      detail::check_keys(q, "janssen", {"order", "iterations", "max_context"});
      read_opt(q, "order", c.janssen.order);
      read_opt(q, "iterations", c.janssen.iterations);
      read_opt(q, "max_context", c.janssen.max_context);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

inline JobConfig load_job_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config " + path + ": " + e.what());
  }
  return job_config_from_json(j);
}

inline void save_job_config(const std::string& path, const JobConfig& c) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config: " + path);
  out << to_json(c).dump(2) << '\n';
}

}  // namespace dpinpaint
