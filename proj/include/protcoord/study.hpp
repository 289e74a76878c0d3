#pragma once

// Coordination pairs of a network at one operating point.
//
// A fault state gathers what the pair checks and the optimizer need from one
// load flow plus a sweep of fault studies: each recloser's zone currents, the
// recloser currents and downstream-DG disparity for every fused lateral, and
// the currents and between-recloser disparity for every adjacent recloser pair.

#include "protcoord/coordination.hpp"
#include "protcoord/fault_engine.hpp"
#include "protcoord/grid_model.hpp"
#include "protcoord/power_flow.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace protcoord {

struct Margins {
    double fuse_recloser = 0.1;
    double recloser_recloser = 0.3;
};

enum class FuseScheme { Saving, Sacrificing };

/// Where a pair's admissible current range comes from: the current operating
/// point, or the feeder without DG (the range the devices were designed for).
enum class RangeBasis { Fresh, Passive };

struct StudyConfig {
    PowerFlowOptions power_flow;
    FaultOptions fault;
    CoordinationOptions coordination;
    Margins margins;
    FuseScheme fuse_scheme = FuseScheme::Saving;
    RangeBasis range_basis = RangeBasis::Fresh;
};

struct RecloserZone {
    FaultCurrentRange range;
};

/// Fused lateral and the nearest recloser upstream of its tap. Currents are
/// what the recloser sees for faults at the lateral's near (max) and far (min)
/// ends; delta_fr is the downstream-DG sum for the near-end fault.
struct FuseRecloserLink {
    std::size_t lateral = 0;
    std::size_t recloser = 0;
    double i_recloser_max = 0.0;
    double i_recloser_min = 0.0;
    double delta_fr = 0.0;
};

/// Adjacent reclosers: backup upstream, primary downstream. Currents are the
/// primary's zone range; delta_rr is the DG between the two for the fault at
/// the primary's maximum.
struct RecloserLink {
    std::size_t backup = 0;
    std::size_t primary = 0;
    double i_primary_max = 0.0;
    double i_primary_min = 0.0;
    double delta_rr = 0.0;
};

struct FaultState {
    PowerFlowSolution power_flow;
    std::vector<RecloserZone> zones;
    std::vector<FuseRecloserLink> fuse_links;
    std::vector<RecloserLink> recloser_links;
};

FaultState analyze_fault_state(const Network& network, const StudyConfig& config);

struct PairInstance {
    CoordinationPair pair;
    CurrentSweep sweep;
    double binding_current = 0.0;  // primary current at the top of the range
    std::optional<std::size_t> fuse_link;
    std::optional<std::size_t> recloser_link;
};

std::string fuse_recloser_label(const Network& network, const FuseRecloserLink& link);
std::string recloser_pair_label(const Network& network, const RecloserLink& link);

/// Builds every pair with the network's current recloser settings. `passive`
/// supplies ranges when config.range_basis is Passive.
std::vector<PairInstance> build_pairs(const Network& network, const FaultState& state,
                                      const StudyConfig& config,
                                      const FaultState* passive = nullptr);

std::vector<CoordinationReport> check_all(const std::vector<PairInstance>& pairs,
                                          const StudyConfig& config);

/// Sum over reclosers of the first-curve operating time at the zone maximum.
double total_clearing_time(const Network& network, const FaultState& state);

/// Recloser current magnitudes at the given power-flow solution.
std::vector<double> recloser_load_currents(const Network& network, const PowerFlowSolution& sol);

}  // namespace protcoord
