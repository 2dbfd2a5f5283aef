#pragma once

#include <filesystem>
#include <string>

#include "coagflux/coagulation.hpp"
#include "coagflux/grid.hpp"

namespace coagflux {

/// Shortest round-trip decimal representation ('.' decimal point, no locale).
std::string format_double(double v);

/// Columns: x_center, x_lo, x_hi, f_value.
void write_profile_csv(const std::filesystem::path& path, const GridDensity& f);

/// Columns: z_edge, J_value.
void write_flux_csv(const std::filesystem::path& path, const FluxProfile& flux);

/// Reads a profile written by write_profile_csv, rebuilding the grid from the
/// cell-edge columns. Throws ConfigError on malformed input.
GridDensity read_profile_csv(const std::filesystem::path& path);

} // namespace coagflux
