#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "vtolmpc/sim_harness.hpp"

namespace vtolmpc {

/// Parses a scenario from TOML text. Sections: [body], [initial], [goal],
/// [[obstacle]], [mpc], [sim]; every key is optional and falls back to the
/// built-in defaults. Throws ConfigError on malformed input.
Scenario parse_scenario(std::string_view toml_text);
Scenario load_scenario(const std::filesystem::path& path);

SafetyMode parse_mode(std::string_view text);
std::string_view to_string(SafetyMode mode);

/// Column header of the per-run CSV.
std::string csv_header();

void write_csv(const TrajectoryLog& log, std::ostream& out);
void write_csv(const TrajectoryLog& log, const std::filesystem::path& path);

}  // namespace vtolmpc
