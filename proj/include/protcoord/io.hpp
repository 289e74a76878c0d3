#pragma once

// File formats: network, curve-family and fuse-curve libraries, scenarios and
// operating-state snapshots (JSON), plus the CSV tables the CLI emits.
// Engineering units live only here; everything returned is per-unit.

#include "protcoord/fault_engine.hpp"
#include "protcoord/grid_model.hpp"
#include "protcoord/optimizer.hpp"
#include "protcoord/power_flow.hpp"
#include "protcoord/study.hpp"

#include "json.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace protcoord {

namespace fs = std::filesystem;

/// Named fuse curves with currents in amperes, as stored on disk.
using FuseLibrary = std::map<std::string, FuseCurve>;

struct Library {
    CurveFamilies families;
    FuseLibrary fuses;
};

/// Data directory: $PROTCOORD_DATA, else the build-time default.
fs::path default_data_dir();
/// Fixture directory: $PROTCOORD_FIXTURES, else the build-time default.
fs::path default_fixture_dir();
/// Returns `p` if it exists, else the same relative path under the fixture directory.
fs::path resolve_input(const fs::path& p);

std::string read_text(const fs::path& path);

CurveFamilies parse_curve_families(const std::string& text, const std::string& source);
FuseLibrary parse_fuse_curves(const std::string& text, const std::string& source);
Library load_library(const fs::path& families, const fs::path& fuses);

Network parse_network(const std::string& text, const std::string& source, const Library& lib);
Network load_network(const fs::path& path, const Library& lib);

struct Scenario {
    fs::path source;
    fs::path network_path;
    Library library;
    Network network;
    OptimizationConfig optimization;
    TimeseriesConfig timeseries;
    std::vector<double> available;                // per DG, per-unit
    std::vector<std::vector<double>> profile;     // [step][dg], per-unit
};

/// Scenario file. Relative paths inside it resolve against its directory.
Scenario load_scenario(const fs::path& path);

/// Scenario with default settings wrapped around a bare network file.
Scenario scenario_for_network(const fs::path& network_path);

/// Operating-state snapshot: DG outputs and first-curve recloser settings.
nlohmann::json state_to_json(const Network& network);
Network apply_state(const Network& network, const nlohmann::json& state, const std::string& source);

/// Replaces every recloser shot's constants with the named family.
Network with_curve_family(const Network& network, const CurveFamilies& families,
                          const std::string& family);

// Number formatting shared by every table: fixed precision, no locale.
std::string fmt_num(double v, int precision = 6);

/// CSV writers return the number of data rows written.
std::size_t write_powerflow_csv(std::ostream& os, const Network& network,
                                const PowerFlowSolution& sol);
std::size_t write_fault_csv(std::ostream& os, const Network& network, const FaultStudy& study);
std::size_t write_pairs_csv(std::ostream& os, const Network& network,
                            const std::vector<PairInstance>& pairs,
                            const std::vector<CoordinationReport>& reports);
std::size_t write_curve_samples_csv(std::ostream& os, const Network& network,
                                    const std::vector<CoordinationReport>& reports);
std::size_t write_trace_csv(std::ostream& os, const Network& network,
                            const OptimizationTrace& trace);
std::size_t write_timeseries_csv(std::ostream& os, const Network& network,
                                 const TimeseriesResult& result);

}  // namespace protcoord
