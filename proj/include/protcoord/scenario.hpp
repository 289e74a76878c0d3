#pragma once

// Command layer behind the CLI. Each command runs library operations on a
// loaded scenario, writes its CSV tables and report.json into the output
// directory, and returns the same content as a RunReport.

#include "protcoord/io.hpp"

#include <optional>
#include <string>
#include <vector>

namespace protcoord {

enum ExitCode : int { kExitOk = 0, kExitFailed = 1, kExitInput = 2 };

struct ManifestEntry {
    std::string path;  // relative to the output directory
    std::size_t rows = 0;
};

struct RunReport {
    std::string command;
    int exit_code = kExitOk;
    std::string text;  // human-readable summary for stdout
    nlohmann::json summary;
    std::vector<ManifestEntry> manifest;
};

struct Overrides {
    std::optional<double> tol;
    std::optional<int> max_iters;
    std::optional<std::string> curve_family;
    std::optional<Margins> margins;
};

/// Throws InputError for unknown families or non-positive values.
void apply_overrides(Scenario& scenario, const Overrides& overrides);

/// "0.1,0.3" -> {fuse_recloser, recloser_recloser}.
Margins parse_margins(const std::string& text);

/// An empty `out_dir` skips file output; the report is still complete.
RunReport cmd_powerflow(const Scenario& scenario, const fs::path& out_dir);
RunReport cmd_fault(const Scenario& scenario, const std::optional<FaultLocation>& location,
                    const fs::path& out_dir);
RunReport cmd_coordinate(const Scenario& scenario, const fs::path& out_dir);
RunReport cmd_optimize(const Scenario& scenario, const fs::path& out_dir);
RunReport cmd_timeseries(const Scenario& scenario, const fs::path& out_dir);

/// Max/min fault current seen by every recloser and fuse over its zone.
std::size_t write_zones_csv(std::ostream& os, const Network& network, const PowerFlowSolution& sol,
                            const FaultOptions& options);

}  // namespace protcoord
