#pragma once

// Alternating optimization of recloser settings and DG dispatch.
//
// Settings: with the fault state and pickups fixed, every operating time is
// affine in the time dials, so minimizing the total clearing time subject to
// the fuse-recloser and recloser-recloser margins is a linear program in D.
//
// Dispatch: every fuse-recloser pair bounds the DG current fed in downstream
// of its recloser. That current is monotone in each unit's output, so the
// largest admissible dispatch is found by bisection on a common curtailment
// factor followed by per-unit restoration from the feeder tail.

#include "protcoord/linear_program.hpp"
#include "protcoord/study.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace protcoord {

struct PickupWindow {
    double lower = 0.0;  // twice the largest load current through the recloser
    double upper = 0.0;  // half the smallest line-line fault current in its zone
};

/// Load currents come from the feeder without DG; fault currents from `state`.
std::vector<PickupWindow> pickup_windows(const Network& network, const FaultState& state,
                                         const StudyConfig& config);

/// g * D <= rhs on one recloser's first-curve dial.
struct DialLimit {
    std::size_t recloser = 0;
    double g = 0.0;
    double rhs = 0.0;
    std::string pair;
    bool from_fuse = false;  // fuse-recloser margin rather than the fast/slow ordering
};

/// g_b * D_b - g_p * D_p >= rhs between a backup and a primary recloser.
struct DialLink {
    std::size_t backup = 0;
    std::size_t primary = 0;
    double g_backup = 0.0;
    double g_primary = 0.0;
    double rhs = 0.0;
    std::string pair;
};

struct SettingsConstraints {
    std::vector<double> pickups;
    std::vector<double> cost;        // dial factor at each zone maximum
    std::vector<double> constant;    // K of each first curve
    std::vector<DialLimit> limits;
    std::vector<DialLink> links;
    /// Pairs whose primary does not trip somewhere in its range; no dial fixes them.
    std::vector<DialLimit> impossible;
};

SettingsConstraints settings_constraints(const Network& network, const FaultState& state,
                                         const StudyConfig& config,
                                         const std::vector<double>& pickups);

LinearProgram settings_lp(const SettingsConstraints& constraints);

enum class PickupChoice { Lower, Upper };

struct SettingsResult {
    bool feasible = false;
    std::vector<RecloserSettings> settings;  // first-curve settings per recloser
    double objective = 0.0;                  // sum of first-curve times at zone maxima
    PickupChoice pickups = PickupChoice::Lower;
    LpStatus lp_status = LpStatus::Infeasible;
    std::string violated_pair;
    std::string diagnostic;
};

/// LP at the lower pickups, then once more at the upper pickups. On failure
/// the result names the pair that blocks the sequential construction.
SettingsResult solve_settings(const Network& network, const FaultState& state,
                              const StudyConfig& config);

/// Sequential pairwise coordination from the feeder end: each recloser takes
/// the smallest dial that coordinates with the one below it. This is the
/// least feasible dial vector when one exists. With `ignore_fuse_limits`,
/// fuse-recloser limits are not enforced (dials are still capped at 1).
SettingsResult sequential_settings(const Network& network, const FaultState& state,
                                   const StudyConfig& config, const std::vector<double>& pickups,
                                   bool ignore_fuse_limits = false);

Network apply_settings(const Network& network, const std::vector<RecloserSettings>& settings);

std::vector<RecloserSettings> current_settings(const Network& network);

/// Fuse-saving bound: DG current downstream of the pair's recloser may not
/// exceed `bound` for the fault at the lateral's near end.
struct DispatchBound {
    std::size_t lateral = 0;
    std::size_t recloser = 0;
    double bound = 0.0;
    std::string pair;
};

/// Bounds from the network's current settings, for fuse-saving pairs whose
/// recloser has DG downstream.
std::vector<DispatchBound> dispatch_bounds(const Network& network, const FaultState& state,
                                           const StudyConfig& config);

struct DispatchResult {
    bool feasible = false;
    std::vector<double> p_out;
    std::string diagnostic;
    int evaluations = 0;
};

/// Upper limit on each unit's real output: available power clipped to the
/// rating at the unit's power factor.
std::vector<double> dispatch_ceiling(const Network& network, const std::vector<double>& available);

bool dispatch_feasible(const Network& network, const std::vector<double>& p_out,
                       const std::vector<DispatchBound>& bounds, const StudyConfig& config);

/// Non-curtailable units are held at their ceiling.
DispatchResult solve_dispatch(const Network& network, const std::vector<double>& available,
                              const std::vector<DispatchBound>& bounds, const StudyConfig& config);

struct OptimizationConfig {
    StudyConfig study;
    double tol = 1e-4;
    int max_iters = 20;
    int cycle_window = 4;
    /// Added to both margins in the settings and dispatch steps (not in the
    /// final verdicts), so settings held between re-optimizations tolerate
    /// small drifts in the fault state.
    double settings_headroom = 0.0;
};

enum class StopReason { SlackFixedPoint, MaxIters, Infeasible };

const char* to_string(StopReason reason);

struct IterationRecord {
    int k = 0;
    std::vector<double> dg_outputs;
    std::vector<RecloserSettings> settings;
    double obj_clearing_time = 0.0;
    double obj_dg_output = 0.0;
    std::vector<double> slacks;  // worst margin minus required margin, per pair
    double worst_slack = 0.0;
    std::vector<double> delta_fr;  // per fuse link
    bool settings_lp_feasible = false;
    bool coordinated = false;      // every pair verdict is None
    std::string note;
};

struct OptimizationTrace {
    std::vector<IterationRecord> iterations;
    bool converged = false;
    StopReason stop_reason = StopReason::MaxIters;
    std::string diagnostic;
    Network final_network;
    std::vector<std::string> pair_labels;
    std::vector<CoordinationReport> final_reports;
};

/// Alternates dispatch and settings starting from the network's own outputs
/// and settings. `available` is the per-unit available real power.
OptimizationTrace alternate(const Network& network, const std::vector<double>& available,
                            const OptimizationConfig& config);

/// Evaluates the network as it stands: record k, pair reports.
IterationRecord evaluate_iterate(const Network& network, const FaultState& state,
                                 const StudyConfig& config,
                                 std::vector<CoordinationReport>* reports = nullptr);

struct TimeseriesConfig {
    int dispatch_every = 1;
    int settings_every = 5;
    OptimizationConfig optimization;
};

struct StepRecord {
    int step = 0;
    std::vector<double> available;
    std::vector<double> dg_outputs;
    std::vector<RecloserSettings> settings;
    double total_clearing_time = 0.0;
    double worst_slack = 0.0;
    bool dispatched = false;
    bool settings_updated = false;
    bool feasible = true;
    std::string status;
};

struct TimeseriesResult {
    std::vector<StepRecord> steps;
    bool degraded = false;
    Network final_network;
};

/// profile[t][i] is unit i's available power at step t.
TimeseriesResult run_timeseries(const Network& network,
                                const std::vector<std::vector<double>>& profile,
                                const TimeseriesConfig& config);

}  // namespace protcoord
