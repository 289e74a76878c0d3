#pragma once

// Radial feeder data model.
//
// A network is a single main feeder: nodes 0..N-1 joined by sections i -> i+1,
// with node 0 connected to the substation. Laterals and DG units tap feeder
// nodes. Everything is per-unit on the network bases; conversion to and from
// engineering units happens only in io.
//
// A recloser placed at node n sits on the upstream terminal of n: it carries
// the current flowing from node n-1 (or the substation, for n = 0) into n, so
// every tap at n is downstream of it.

#include "protcoord/protection_curves.hpp"

#include <complex>
#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace protcoord {

struct NodeId {
    std::size_t index = 0;

    friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

struct FeederSection {
    NodeId from;
    NodeId to;
    double r = 0.0;
    double x = 0.0;
};

/// Aggregate load branch tapped on the feeder, optionally fused at the tap.
/// (r, x) is the lumped impedance from the tap to the lateral's far end; it
/// only matters for faults on the lateral.
struct Lateral {
    std::size_t id = 0;
    std::string name;
    NodeId tap;
    double load_p = 0.0;
    double load_q = 0.0;
    double r = 0.0;
    double x = 0.0;
    std::optional<FuseCurve> fuse;
};

enum class DgKind { Synchronous, Asynchronous, InverterBased };

/// Reactances are per-unit on the unit's own rating.
struct SynchronousParams {
    double x_subtransient = 0.2;
};

struct AsynchronousParams {
    double x_locked_rotor = 0.2;
    double rated_slip = 0.02;
};

struct InverterParams {
    double k_off = 2.5;         // shut-off multiple of rated current, [2, 3]
    double k_clamp = 1.5;       // clamp multiple of rated current, [1.25, 2]
    double coupling_x = 0.15;   // reactance used to estimate the subtransient current
};

using MachineParams = std::variant<SynchronousParams, AsynchronousParams, InverterParams>;

struct DGUnit {
    std::size_t id = 0;
    std::string name;
    NodeId tap;
    double rating_s = 0.0;
    double p_out = 0.0;
    double q_out = 0.0;
    MachineParams machine = SynchronousParams{};
    bool curtailable = false;
    std::optional<double> q_per_p;  // kept across re-dispatch once known


    DgKind kind() const noexcept;
};

struct SubstationSource {
    double voltage = 1.0;
    std::complex<double> impedance{0.0, 0.05};
};

struct RecloserPlacement {
    std::size_t id = 0;
    std::string name;
    NodeId node;
    ReclosingSequence sequence;
};

struct Bases {
    double mva = 1.0;
    double kv = 1.0;

    double current_a() const;    // three-phase base current, amperes
    double impedance_ohm() const;
};

struct Network {
    std::vector<std::string> bus_names;  // optional, one per node
    std::vector<FeederSection> sections;
    std::vector<Lateral> laterals;
    std::vector<DGUnit> dg_units;
    SubstationSource source;
    std::vector<RecloserPlacement> reclosers;
    Bases bases;

    std::size_t node_count() const noexcept { return sections.size() + 1; }
    bool has_node(NodeId n) const noexcept { return n.index < node_count(); }
    std::string node_label(NodeId n) const;
};

struct Violation {
    std::string element;
    std::string rule;
};

/// Checks every structural invariant; an empty result means the network is
/// well formed.
std::vector<Violation> validate(const Network& network);

/// DG ids whose tap index is >= node.index. Throws QueryError for unknown nodes.
std::vector<std::size_t> downstream_dg(const Network& network, NodeId node);

/// DG ids on the section leaving node j (tap index == j). Throws QueryError
/// when j is the terminal node or unknown.
std::vector<std::size_t> section_dg(const Network& network, NodeId j);

/// Index of the last node protected by recloser k (the node before the next
/// recloser downstream, or the feeder end).
NodeId recloser_zone_end(const Network& network, std::size_t recloser);

/// DG between recloser k and the next recloser downstream (or the feeder end).
std::vector<std::size_t> recloser_span_dg(const Network& network, std::size_t recloser);

/// Nearest recloser at or upstream of the node, if any.
std::optional<std::size_t> recloser_for_node(const Network& network, NodeId node);

/// Copy of the network with DG outputs replaced. Reactive outputs are scaled
/// with the real output at each unit's nominal power factor.
Network with_dg_outputs(const Network& network, const std::vector<double>& p_out);

/// Copy of the network with every DG unit removed.
Network without_dg(const Network& network);

/// Reactive-to-real output ratio used when a unit is re-dispatched: q/p when
/// the unit is producing, else the remembered ratio (0 if none).
double dg_q_ratio(const DGUnit& dg);

/// Largest real output allowed by the rating at the unit's power factor.
double dg_p_capability(const DGUnit& dg);

}  // namespace protcoord
