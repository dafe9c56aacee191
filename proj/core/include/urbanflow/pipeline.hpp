#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "urbanflow/config.hpp"

namespace urbanflow::pipeline {

/// Upstream artifact absent; the CLI maps this to exit code 2. The message
/// names the stage that produces the artifact.
struct MissingArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A model fit failed to converge; the CLI maps this to exit code 3.
struct NonConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StageResult {
  std::string stage;
  bool skipped = false;  // inputs unchanged, outputs already present
  std::vector<std::string> outputs;
};

StageResult run_ingest(const config::PipelineConfig& cfg);
StageResult run_homes(const config::PipelineConfig& cfg);
StageResult run_visits(const config::PipelineConfig& cfg);
StageResult run_mixing(const config::PipelineConfig& cfg);
StageResult run_gravity(const config::PipelineConfig& cfg, bool with_attraction);
StageResult run_covisit_fit(const config::PipelineConfig& cfg);
StageResult run_covisit_cluster(const config::PipelineConfig& cfg);
StageResult run_covisit_network(const config::PipelineConfig& cfg);
StageResult run_synth_city(const config::PipelineConfig& cfg);
StageResult run_synth_traces(const config::PipelineConfig& cfg);
StageResult run_report(const config::PipelineConfig& cfg);

/// FNV-1a 64-bit content hashes used for the stage stamps and the
/// determinism checks.
std::uint64_t fnv1a(std::string_view data);
std::uint64_t fnv1a_file(const std::string& path);
std::string hash_hex(std::uint64_t h);

}  // namespace urbanflow::pipeline
