#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "psipde/core.hpp"
#include "psipde/refine.hpp"
#include "psipde/select.hpp"

namespace psipde {

struct DenoiseSummary {
  bool ran = false;
  int epochs = 0;
  int best_epoch = -1;
  double best_val_loss = 0.0;
  // std(field - clean) / std(clean), only when the clean field is known
  std::optional<double> noisy_residual;
  std::optional<double> denoised_residual;
};

struct CoefficientError {
  std::string term;
  double truth = 0.0;
  std::optional<double> learned;  // empty when the term is missing
  std::optional<double> relative_error;
};

// Everything a run reports. Timings are deliberately absent so identical
// configs give byte-identical JSON.
struct RunReport {
  std::string system;
  double noise = 0.0;
  std::string input;
  std::uint64_t seed = 0;
  std::map<std::string, std::uint64_t> seeds;
  Grid grid;

  DenoiseSummary denoise;
  int library_size = 0;
  std::size_t library_rows = 0;
  std::size_t regression_rows = 0;
  bool fft = false;
  double cutoff_fraction = 1.0;

  SelectionTrace trace;
  std::optional<RefineReport> refine;
  std::string ic_source;

  CandidateEquation equation;  // the run's answer
  std::vector<WeightedTerm> truth;
  std::vector<CoefficientError> coefficient_errors;
  std::optional<bool> support_matches;
};

nlohmann::json to_json(const CandidateEquation& eq);
CandidateEquation equation_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SelectionTrace& tr);
SelectionTrace selection_trace_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RefineReport& rep);
nlohmann::json to_json(const RunReport& rep);
RunReport run_report_from_json(const nlohmann::json& j);

// Compares learned coefficients with the known right-hand side by term label.
std::vector<CoefficientError> coefficient_errors(const CandidateEquation& learned,
                                                 const std::vector<WeightedTerm>& truth);

// Canonical text form: two-space indent, trailing newline.
std::string dump_json(const nlohmann::json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

// CSV row per report: noise, equation, learned coefficients and their
// relative errors against the truth.
std::string summary_csv(const std::vector<RunReport>& reports);
std::string candidates_csv(const RunReport& rep);
std::string trace_csv(const SelectionTrace& tr);

// t, x[, y], measured, learned, residual at every grid node.
void write_plot_data(const FieldTensor& measured, const FieldTensor& learned, const std::filesystem::path& path);

// Writes report.json, summary.csv, candidates.csv, trace.csv and (when
// `learned` is given) fields.csv into `dir` according to `formats`.
void emit_report(const RunReport& rep, const std::vector<std::string>& formats, const std::filesystem::path& dir,
                 const FieldTensor* measured = nullptr, const FieldTensor* learned = nullptr);

}  // namespace psipde
