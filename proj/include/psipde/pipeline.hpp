#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "psipde/baseline.hpp"
#include "psipde/config.hpp"
#include "psipde/denoise.hpp"
#include "psipde/featlib.hpp"
#include "psipde/report.hpp"

namespace psipde {

enum class Stage { config, simulate, denoise, featlib, spectral, select, refine, report };
const char* to_string(Stage s);
// Process exit code for a failure in `s`; 0 is success and 1 a usage error.
int exit_code(Stage s);

class StageError : public Error {
 public:
  StageError(Stage stage, const Error& cause)
      : Error(cause.code(), std::string(to_string(stage)) + ": " + cause.what()), stage_(stage) {}
  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

// Progress messages go to stderr when verbose; every message is also
// appended, timestamped, to run.log in the output directory.
class RunLog {
 public:
  RunLog(const std::filesystem::path& dir, bool verbose);
  void operator()(const std::string& msg);

 private:
  std::ofstream file_;
  bool verbose_;
};

// Sub-seeds of the root seed, keyed by stream name.
std::map<std::string, std::uint64_t> stream_seeds(std::uint64_t root);

SimSpec resolve_spec(const PipelineConfig& cfg);
LibrarySpec resolve_library(const PipelineConfig& cfg);

struct PipelineState {
  PipelineConfig config;
  SimSpec spec;
  std::optional<FieldTensor> clean;
  std::optional<FieldTensor> measured;
  std::optional<FieldTensor> denoised;
  std::optional<SurrogateModel> model;
  std::optional<Library> library;
  std::optional<RegressionSystem> system;
  std::optional<FieldTensor> learned;
  RunReport report;

  // Field the library is built from: denoised when available.
  const FieldTensor& working_field() const { return denoised ? *denoised : *measured; }
};

// Individual stages; each throws StageError tagged with its stage.
void stage_simulate(PipelineState& st);
void stage_denoise(PipelineState& st);
void stage_library(PipelineState& st);  // featlib and spectral
void stage_select(PipelineState& st);
void stage_refine(PipelineState& st);
void stage_report(PipelineState& st);

// Validated fresh state with stream seeds filled in.
PipelineState initial_state(const PipelineConfig& cfg);
// simulate (or read input), optional denoise, then featlib and spectral.
void prepare_system(PipelineState& st, RunLog* log = nullptr);
// Reloads fields and the selection trace written by an earlier run in
// cfg.out_dir; `trace` and `data` override the default locations.
void resume_from_artifacts(PipelineState& st, const std::filesystem::path& trace = {},
                           const std::filesystem::path& data = {});

// Runs the enabled stages in order, persisting fields, the selection trace
// and the report under cfg.out_dir as they become available.
PipelineState run_pipeline(const PipelineConfig& cfg, RunLog* log = nullptr);

// STRidge on the regression system the pipeline would hand to selection.
StridgeResult run_stridge(PipelineState& st);

}  // namespace psipde
