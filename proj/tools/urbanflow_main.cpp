#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "urbanflow/config.hpp"
#include "urbanflow/jsonlog.hpp"
#include "urbanflow/pipeline.hpp"

namespace {

using urbanflow::config::ConfigError;
using urbanflow::config::PipelineConfig;
namespace pipeline = urbanflow::pipeline;
namespace jsonlog = urbanflow::jsonlog;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNonConvergence = 3;

struct CliState {
  std::string config_path = "pipeline.toml";
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::function<pipeline::StageResult(const PipelineConfig&)> action;
};

PipelineConfig load_config(const CliState& state) {
  PipelineConfig cfg = PipelineConfig::from_file(state.config_path);
  if (state.seed) cfg.seed = *state.seed;
  if (!state.out_dir.empty()) cfg.output_dir = state.out_dir;
  return cfg;
}

void add_common(CLI::App* cmd, CliState& state) {
  cmd->add_option("--config", state.config_path, "Pipeline configuration file")
      ->capture_default_str();
  cmd->add_option("--seed", state.seed, "Override the config seed");
  cmd->add_option("--out", state.out_dir, "Override the output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"urbanflow: mobility, mixing and mall-attraction pipeline"};
  app.require_subcommand(1);
  CliState state;

  auto stage = [&](CLI::App* parent, const char* name, const char* desc,
                   std::function<pipeline::StageResult(const PipelineConfig&)> fn) {
    CLI::App* cmd = parent->add_subcommand(name, desc);
    add_common(cmd, state);
    cmd->callback([&state, fn = std::move(fn)]() { state.action = fn; });
    return cmd;
  };

  stage(&app, "ingest", "Validate and summarize all input files", pipeline::run_ingest);
  stage(&app, "homes", "Infer home antennas and attach comuna HDI", pipeline::run_homes);
  stage(&app, "visits", "Detect mall visits and filter non-customers", pipeline::run_visits);
  stage(&app, "mixing", "Exposure/isolation metrics with bootstrap significance",
        pipeline::run_mixing);

  CLI::App* grav = app.add_subcommand("gravity", "Gravity model of mall in-flows");
  grav->require_subcommand(1);
  bool with_attraction = false;
  CLI::App* grav_fit =
      stage(grav, "fit", "Fit the Poisson gravity model", [&](const PipelineConfig& cfg) {
        return pipeline::run_gravity(cfg, with_attraction);
      });
  grav_fit->add_flag("--attraction", with_attraction,
                     "Also fit the attraction-augmented model");

  CLI::App* covisit = app.add_subcommand("covisit", "Co-visitation analyses");
  covisit->require_subcommand(1);
  stage(covisit, "fit", "Fit the co-visitation logit model", pipeline::run_covisit_fit);
  stage(covisit, "cluster", "Cluster malls by customer-profile similarity",
        pipeline::run_covisit_cluster);
  stage(covisit, "network", "Export the thresholded co-visitation network",
        pipeline::run_covisit_network);

  CLI::App* synth = app.add_subcommand("synth", "Synthetic city and trace generation");
  synth->require_subcommand(1);
  stage(synth, "city", "Generate city input files from a scenario",
        pipeline::run_synth_city);
  stage(synth, "traces", "Generate the event stream for the scenario",
        pipeline::run_synth_traces);

  stage(&app, "report", "Render SVG figures from fitted artifacts", pipeline::run_report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    const PipelineConfig cfg = load_config(state);
    const pipeline::StageResult result = state.action(cfg);
    jsonlog::info("done").field("stage", result.stage).field("skipped", result.skipped);
    return kExitOk;
  } catch (const ConfigError& e) {
    jsonlog::error(e.what()).field("exit", kExitValidation);
    return kExitValidation;
  } catch (const pipeline::MissingArtifactError& e) {
    jsonlog::error(e.what()).field("exit", kExitValidation);
    return kExitValidation;
  } catch (const pipeline::NonConvergenceError& e) {
    jsonlog::error(e.what()).field("exit", kExitNonConvergence);
    return kExitNonConvergence;
  } catch (const std::exception& e) {
    jsonlog::error(e.what()).field("exit", 1);
    return 1;
  }
}
