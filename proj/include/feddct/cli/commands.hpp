#pragma once

#include "feddct/cli/config.hpp"

#include <iosfwd>
#include <optional>
#include <string>

namespace feddct::cli {

inline constexpr const char *kVersion = "0.1.0";

enum ExitCode : int { exit_ok = 0, exit_failure = 1, exit_config = 2, exit_aborted = 3 };

// Trains per the config; writes the metrics CSV, the manifest and the final
// checkpoint (and the message trace when configured).
int run_command(const std::string &config_path, std::ostream &out, std::ostream &err);

// Division report for a model spec: JSON followed by a table, or JSON only.
int divide_command(const std::string &spec_path, int split_factor, bool json_only, std::ostream &out,
                   std::ostream &err);

// Per-layer parameter/FLOP table, memory estimates and per-client
// communication projections for the configured model. With a trace, the
// measured mean bytes per client are reported next to the projections.
int cost_command(const std::string &config_path, const std::optional<std::string> &trace_path, bool json_only,
                 std::ostream &out, std::ostream &err);

// Runs feddct and fedavg from one config and seed; writes a joined CSV.
int compare_command(const std::string &config_path, const std::string &csv_path, std::ostream &out,
                    std::ostream &err);

} // namespace feddct::cli
