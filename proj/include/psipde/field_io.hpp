#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "psipde/core.hpp"

namespace psipde {

// Raw contents of a PSIG file: "PSIG", u16 version, u8 ndim, ndim x u64 dims,
// ndim x (f64 min, f64 max), then f64 values. All little-endian.
struct PsigArray {
  std::vector<std::uint64_t> dims;
  std::vector<std::pair<double, double>> ranges;
  std::vector<double> values;
};

inline constexpr std::uint16_t kPsigVersion = 1;

std::size_t psig_header_size(std::size_t ndim);

void write_psig(const std::filesystem::path& path, const PsigArray& array);
PsigArray read_psig(const std::filesystem::path& path);

// Dims are stored as (n_t, n_x[, n_y]) in the time-major layout of FieldTensor.
void write_field(const FieldTensor& f, const std::filesystem::path& path);
FieldTensor read_field(const std::filesystem::path& path);

// Header "t,x[,y],u"; one row per grid point.
void write_field_csv(const FieldTensor& f, const std::filesystem::path& path);

}  // namespace psipde
