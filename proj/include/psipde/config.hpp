#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "psipde/baseline.hpp"
#include "psipde/core.hpp"
#include "psipde/denoise.hpp"
#include "psipde/featlib.hpp"
#include "psipde/refine.hpp"
#include "psipde/select.hpp"

namespace psipde {

// Values of the TOML subset we accept: strings, integers, floats, booleans
// and flat arrays of those.
struct TomlValue;
using TomlArray = std::vector<TomlValue>;
struct TomlValue {
  std::variant<std::string, std::int64_t, double, bool, TomlArray> v;
};

// Keys are flattened to "table.key".
using TomlDocument = std::map<std::string, TomlValue>;

TomlDocument parse_toml(const std::string& text);

struct PipelineConfig {
  SystemKind system = SystemKind::burgers1d;
  std::uint64_t seed = 42;
  double noise = 0.0;
  // Optional measured field; when set, the simulate stage is skipped.
  std::string input;
  std::string out_dir = "psi_out";
  std::vector<std::string> formats = {"json", "csv", "plot-data"};
  int threads = 0;

  // grid overrides, 0 keeps the system default
  std::size_t nt = 0, nx = 0, ny = 0;
  int solver_refine = 0;

  bool denoise_enabled = true;
  TrainConfig denoise;

  DiffOptions diff;
  // max_deriv_order 0 picks 3 for 1D systems and 2 for burgers2d
  LibrarySpec library{3, 0, true, {}};

  bool fft_enabled = true;
  double cutoff_fraction = 0.1;

  SelectionConfig select;

  bool refine_enabled = true;
  RefineConfig refine;
  std::string ic_source = "auto";    // auto | analytic | from_data
  std::string loss_target = "auto";  // auto | raw | denoised

  StridgeConfig stridge;

  static PipelineConfig defaults();
  void validate() const;
};

// Unknown tables or keys and wrongly typed values raise config_error.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig config_from_toml(const std::string& text);

// Annotated TOML listing every key with its default.
std::string default_config_toml();

}  // namespace psipde
