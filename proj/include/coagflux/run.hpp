#pragma once

#include <filesystem>

#include "coagflux/config.hpp"

namespace coagflux {

inline constexpr const char* kVersion = "0.1.0";

/// Executes a validated config, writing all artifacts under out_dir.
/// Returns 0 on success, 4 when a diagnostics band check fails; throws
/// ConfigError / NumericError for the CLI to map onto exit codes 2 / 3.
int run(const RunConfig& cfg, const std::filesystem::path& out_dir);

} // namespace coagflux
