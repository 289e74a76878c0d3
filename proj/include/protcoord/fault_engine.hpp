#pragma once

// Three-phase bolted (or impedance) fault studies with DG contributions.
//
// The fault network neglects loads: the substation and rotating DG are
// voltage sources behind impedance, inverter DG are constant-current
// injections or disconnected. Reclosers are directional, so a recloser at
// node n sees only the substation and the DG tapped upstream of n, and only
// for faults at or beyond n. A lateral fuse sees the total fault current for
// faults on its lateral.

#include "protcoord/grid_model.hpp"
#include "protcoord/power_flow.hpp"

#include <complex>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace protcoord {

using cplx = std::complex<double>;

struct TheveninEquivalent {
    cplx emf;
    cplx impedance;
};

struct ConstantCurrent {
    cplx current;  // injected phasor; |current| <= k_clamp * rating

    double magnitude() const { return std::abs(current); }
};

struct Disconnected {};

struct DGFaultModel {
    std::size_t dg_id = 0;
    std::variant<TheveninEquivalent, ConstantCurrent, Disconnected> representation;

    bool is_off() const { return std::holds_alternative<Disconnected>(representation); }
};

/// `v_terminal` is the pre-fault terminal voltage phasor. Throws
/// PreconditionError when its magnitude is not positive.
DGFaultModel build_dg_fault_model(const DGUnit& dg, cplx v_terminal);
DGFaultModel build_dg_fault_model(const DGUnit& dg, double v_terminal);

struct FaultLocation {
    enum class Kind { Node, LateralNear, LateralFar };
    Kind kind = Kind::Node;
    std::size_t index = 0;  // node index or lateral id

    static FaultLocation node(std::size_t i) { return {Kind::Node, i}; }
    static FaultLocation lateral(std::size_t id, bool far = false) {
        return {far ? Kind::LateralFar : Kind::LateralNear, id};
    }
    bool on_lateral() const { return kind != Kind::Node; }

    friend bool operator==(const FaultLocation&, const FaultLocation&) = default;
};

/// Parses "node:3", "lateral:2" or "lateral:2:far".
FaultLocation parse_fault_location(const std::string& text);
std::string to_string(const FaultLocation& loc);

struct FaultOptions {
    double fault_impedance = 0.0;  // per-unit, resistive
};

struct FaultStudy {
    FaultLocation location;
    double i_fault = 0.0;       // total current into the fault
    double i_substation = 0.0;  // substation contribution
    std::map<std::size_t, double> i_recloser;  // recloser id -> seen current
    std::map<std::size_t, double> i_fuse;      // lateral id (fused) -> seen current
    std::map<std::size_t, double> i_dg;        // DG id -> contribution magnitude
    std::map<std::size_t, double> delta_fr;    // recloser id -> downstream DG sum
    std::map<std::size_t, double> delta_rr;    // recloser id -> DG between it and the next recloser
    std::vector<DGFaultModel> models;
    std::vector<cplx> node_voltages;           // feeder nodes during the fault
};

/// Substation emf behind its impedance, including the pre-fault load current.
cplx substation_emf(const Network& network, const PowerFlowSolution& sol);

std::vector<DGFaultModel> build_fault_models(const Network& network, const PowerFlowSolution& sol);

FaultStudy solve_fault(const Network& network, const PowerFlowSolution& sol,
                       const FaultLocation& location, const FaultOptions& options = {});

struct DeviceRef {
    enum class Kind { Recloser, Fuse };
    Kind kind = Kind::Recloser;
    std::size_t id = 0;  // recloser id or lateral id

    static DeviceRef recloser(std::size_t k) { return {Kind::Recloser, k}; }
    static DeviceRef fuse(std::size_t lateral) { return {Kind::Fuse, lateral}; }
};

struct FaultCurrentRange {
    double i_max = 0.0;
    double i_min = 0.0;
    FaultLocation at_max;
    FaultLocation at_min;
};

/// Every fault location inside the device's protection zone.
std::vector<FaultLocation> zone_locations(const Network& network, const DeviceRef& device);

/// Max over the zone of the device's bolted-fault current; min over the zone
/// with the configured fault impedance.
FaultCurrentRange max_min_fault_currents(const Network& network, const PowerFlowSolution& sol,
                                         const DeviceRef& device, const FaultOptions& options = {});

}  // namespace protcoord
