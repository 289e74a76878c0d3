#pragma once

// Pre-fault DistFlow load flow on the radial feeder.
//
// Indexing: p_flow[i], q_flow[i] are the sending-end flows of section i
// (node i -> node i+1). Loads and DG are constant-PQ injections at their tap
// nodes; DG nodes are PQ, never voltage-controlled.

#include "protcoord/grid_model.hpp"

#include <complex>
#include <cstddef>
#include <map>
#include <vector>

namespace protcoord {

struct PowerFlowOptions {
    double tol = 1e-8;
    int max_iter = 50;
};

/// Voltage magnitude below which the sweep is declared collapsed.
inline constexpr double kCollapseVoltage = 0.5;

struct PowerFlowSolution {
    std::vector<double> p_flow;
    std::vector<double> q_flow;
    std::vector<double> v_mag;
    std::vector<double> v_angle;  // radians, node 0 is the reference
    double p_head = 0.0;          // power delivered by the substation into node 0
    double q_head = 0.0;
    bool converged = false;
    int iterations = 0;
    double max_mismatch = 0.0;

    std::complex<double> voltage(NodeId n) const;
    /// Current delivered by the substation into node 0.
    std::complex<double> head_current() const;
};

/// Net demand (load minus generation) at every node.
std::vector<std::complex<double>> net_demand(const Network& network);

PowerFlowSolution solve_distflow(const Network& network, const PowerFlowOptions& options = {});

/// Largest violation of the branch-flow recursion at the given solution.
double distflow_residual(const Network& network, const PowerFlowSolution& sol);

/// DG id -> voltage magnitude at its tap node.
std::map<std::size_t, double> dg_terminal_voltages(const Network& network,
                                                   const PowerFlowSolution& sol);

}  // namespace protcoord
