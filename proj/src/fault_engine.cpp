#include "protcoord/fault_engine.hpp"

#include "protcoord/errors.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <limits>

namespace protcoord {

namespace {

constexpr cplx kJ{0.0, 1.0};

double rating_current(const DGUnit& dg)
{
    return dg.rating_s;  // at 1 pu voltage
}

}  // namespace

DGFaultModel build_dg_fault_model(const DGUnit& dg, cplx v_terminal)
{
    const double vm = std::abs(v_terminal);
    if (!(vm > 0.0)) {
        throw PreconditionError(fmt::format("dg {}: terminal voltage must be positive", dg.id));
    }
    DGFaultModel model{dg.id, Disconnected{}};
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, SynchronousParams>) {
                const double x = m.x_subtransient / dg.rating_s;
                const cplx i_pre = std::conj(cplx(dg.p_out, dg.q_out) / v_terminal);
                model.representation = TheveninEquivalent{v_terminal + kJ * x * i_pre, kJ * x};
            } else if constexpr (std::is_same_v<T, AsynchronousParams>) {
                // Slip grows linearly with output up to the rated slip; the
                // rotor current it drives sets the emf behind x_lr.
                const double x = m.x_locked_rotor / dg.rating_s;
                const double slip = m.rated_slip * dg.p_out / dg.rating_s;
                const double i_rotor = (slip / m.rated_slip) * rating_current(dg) / vm;
                const cplx i_pre = i_rotor * v_terminal / vm;
                model.representation = TheveninEquivalent{v_terminal + kJ * x * i_pre, kJ * x};
            } else {
                if (dg.p_out == 0.0 && dg.q_out == 0.0) {
                    return;  // idle inverter is not connected
                }
                const double prospective_multiple = vm / m.coupling_x;
                if (prospective_multiple > m.k_off) {
                    return;
                }
                model.representation =
                    ConstantCurrent{m.k_clamp * rating_current(dg) * v_terminal / vm};
            }
        },
        dg.machine);
    return model;
}

DGFaultModel build_dg_fault_model(const DGUnit& dg, double v_terminal)
{
    return build_dg_fault_model(dg, cplx(v_terminal, 0.0));
}

FaultLocation parse_fault_location(const std::string& text)
{
    auto bad = [&]() {
        return InputError(fmt::format(
            "bad fault location '{}': expected node:<i>, lateral:<id> or lateral:<id>:far", text));
    };
    auto parse_index = [&](std::string_view s) {
        std::size_t v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
            throw bad();
        }
        return v;
    };
    const std::string_view sv(text);
    if (sv.rfind("node:", 0) == 0) {
        return FaultLocation::node(parse_index(sv.substr(5)));
    }
    if (sv.rfind("lateral:", 0) == 0) {
        auto rest = sv.substr(8);
        bool far = false;
        if (rest.size() > 4 && rest.substr(rest.size() - 4) == ":far") {
            far = true;
            rest = rest.substr(0, rest.size() - 4);
        }
        return FaultLocation::lateral(parse_index(rest), far);
    }
    throw bad();
}

std::string to_string(const FaultLocation& loc)
{
    switch (loc.kind) {
    case FaultLocation::Kind::Node:
        return fmt::format("node:{}", loc.index);
    case FaultLocation::Kind::LateralNear:
        return fmt::format("lateral:{}", loc.index);
    default:
        return fmt::format("lateral:{}:far", loc.index);
    }
}

cplx substation_emf(const Network& network, const PowerFlowSolution& sol)
{
    return sol.voltage(NodeId{0}) + network.source.impedance * sol.head_current();
}

std::vector<DGFaultModel> build_fault_models(const Network& network, const PowerFlowSolution& sol)
{
    std::vector<DGFaultModel> models;
    models.reserve(network.dg_units.size());
    for (const auto& dg : network.dg_units) {
        models.push_back(build_dg_fault_model(dg, sol.voltage(dg.tap)));
    }
    return models;
}

namespace {

// Feeder position of a fault, for the directional test at reclosers.
std::size_t feeder_position(const Network& network, const FaultLocation& loc)
{
    return loc.on_lateral() ? network.laterals[loc.index].tap.index : loc.index;
}

void check_location(const Network& network, const FaultLocation& loc)
{
    if (loc.on_lateral()) {
        if (loc.index >= network.laterals.size()) {
            throw QueryError(fmt::format("unknown lateral {}", loc.index));
        }
    } else if (loc.index >= network.node_count()) {
        throw QueryError(fmt::format("unknown node {}", loc.index));
    }
}

}  // namespace

FaultStudy solve_fault(const Network& network, const PowerFlowSolution& sol,
                       const FaultLocation& location, const FaultOptions& options)
{
    if (!sol.converged) {
        throw PreconditionError("fault study needs a converged power-flow solution");
    }
    if (sol.v_mag.size() != network.node_count()) {
        throw PreconditionError("power-flow solution does not belong to this network");
    }
    check_location(network, location);
    if (!(options.fault_impedance >= 0.0)) {
        throw PreconditionError("fault impedance must be non-negative");
    }

    const std::size_t n = network.node_count();
    const Lateral* lat = location.on_lateral() ? &network.laterals[location.index] : nullptr;
    const bool extra = location.kind == FaultLocation::Kind::LateralFar &&
                       (lat->r > 0.0 || lat->x > 0.0);
    const std::size_t dim = n + (extra ? 1 : 0);
    const std::size_t fault_node = extra ? n : feeder_position(network, location);

    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(dim, dim);
    Eigen::VectorXcd j = Eigen::VectorXcd::Zero(dim);
    auto add_branch = [&](std::size_t a, std::size_t b, cplx z) {
        const cplx adm = 1.0 / z;
        y(a, a) += adm;
        y(b, b) += adm;
        y(a, b) -= adm;
        y(b, a) -= adm;
    };

    const cplx zs = network.source.impedance;
    const cplx es = substation_emf(network, sol);
    y(0, 0) += 1.0 / zs;
    j(0) += es / zs;
    for (const auto& s : network.sections) {
        add_branch(s.from.index, s.to.index, cplx(s.r, s.x));
    }
    if (extra) {
        add_branch(lat->tap.index, n, cplx(lat->r, lat->x));
    }

    FaultStudy study;
    study.location = location;
    study.models = build_fault_models(network, sol);
    for (const auto& model : study.models) {
        const std::size_t t = network.dg_units[model.dg_id].tap.index;
        if (const auto* th = std::get_if<TheveninEquivalent>(&model.representation)) {
            y(t, t) += 1.0 / th->impedance;
            j(t) += th->emf / th->impedance;
        } else if (const auto* cc = std::get_if<ConstantCurrent>(&model.representation)) {
            j(t) += cc->current;
        }
    }

    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(dim);
    if (options.fault_impedance > 0.0) {
        y(fault_node, fault_node) += 1.0 / options.fault_impedance;
        v = y.partialPivLu().solve(j);
    } else {
        // Bolted: V_f = 0, solve for the remaining nodes.
        std::vector<std::size_t> keep;
        for (std::size_t i = 0; i < dim; ++i) {
            if (i != fault_node) keep.push_back(i);
        }
        if (!keep.empty()) {
            Eigen::MatrixXcd yr(keep.size(), keep.size());
            Eigen::VectorXcd jr(keep.size());
            for (std::size_t a = 0; a < keep.size(); ++a) {
                jr(a) = j(keep[a]);
                for (std::size_t b = 0; b < keep.size(); ++b) {
                    yr(a, b) = y(keep[a], keep[b]);
                }
            }
            const Eigen::VectorXcd vr = yr.partialPivLu().solve(jr);
            for (std::size_t a = 0; a < keep.size(); ++a) {
                v(keep[a]) = vr(a);
            }
        }
    }

    // Source terminal currents. With loads neglected, KCL makes their sum the
    // fault current.
    const cplx i_sub = (es - v(0)) / zs;
    std::vector<cplx> i_dg(network.dg_units.size());
    for (const auto& model : study.models) {
        const std::size_t t = network.dg_units[model.dg_id].tap.index;
        if (const auto* th = std::get_if<TheveninEquivalent>(&model.representation)) {
            i_dg[model.dg_id] = (th->emf - v(t)) / th->impedance;
        } else if (const auto* cc = std::get_if<ConstantCurrent>(&model.representation)) {
            i_dg[model.dg_id] = cc->current;
        }
    }
    cplx total = i_sub;
    for (const auto& c : i_dg) total += c;

    study.i_fault = std::abs(total);
    study.i_substation = std::abs(i_sub);
    for (std::size_t i = 0; i < i_dg.size(); ++i) {
        study.i_dg[i] = std::abs(i_dg[i]);
    }
    study.node_voltages.assign(v.data(), v.data() + n);

    const std::size_t pos = feeder_position(network, location);
    const auto& recs = network.reclosers;
    for (std::size_t k = 0; k < recs.size(); ++k) {
        const std::size_t node = recs[k].node.index;
        double seen = 0.0;
        if (pos >= node) {
            cplx upstream = i_sub;
            for (const auto& dg : network.dg_units) {
                if (dg.tap.index < node) upstream += i_dg[dg.id];
            }
            seen = std::abs(upstream);
        }
        study.i_recloser[k] = seen;

        const std::size_t span_end =
            k + 1 < recs.size() ? recs[k + 1].node.index : network.node_count();
        double fr = 0.0;
        double rr = 0.0;
        for (const auto& dg : network.dg_units) {
            if (dg.tap.index >= node) {
                fr += study.i_dg[dg.id];
                if (dg.tap.index < span_end) rr += study.i_dg[dg.id];
            }
        }
        study.delta_fr[k] = fr;
        study.delta_rr[k] = rr;
    }
    for (const auto& l : network.laterals) {
        if (l.fuse) {
            study.i_fuse[l.id] = (lat && lat->id == l.id) ? study.i_fault : 0.0;
        }
    }
    return study;
}

std::vector<FaultLocation> zone_locations(const Network& network, const DeviceRef& device)
{
    std::vector<FaultLocation> locs;
    if (device.kind == DeviceRef::Kind::Fuse) {
        if (device.id >= network.laterals.size() || !network.laterals[device.id].fuse) {
            throw QueryError(fmt::format("lateral {} has no fuse", device.id));
        }
        locs.push_back(FaultLocation::lateral(device.id, false));
        locs.push_back(FaultLocation::lateral(device.id, true));
        return locs;
    }
    if (device.id >= network.reclosers.size()) {
        throw QueryError(fmt::format("unknown recloser {}", device.id));
    }
    const NodeId begin = network.reclosers[device.id].node;
    const NodeId end = recloser_zone_end(network, device.id);
    for (std::size_t i = begin.index; i <= end.index; ++i) {
        locs.push_back(FaultLocation::node(i));
    }
    for (const auto& l : network.laterals) {
        if (l.tap >= begin && l.tap <= end) {
            locs.push_back(FaultLocation::lateral(l.id, false));
            locs.push_back(FaultLocation::lateral(l.id, true));
        }
    }
    return locs;
}

FaultCurrentRange max_min_fault_currents(const Network& network, const PowerFlowSolution& sol,
                                         const DeviceRef& device, const FaultOptions& options)
{
    const auto locs = zone_locations(network, device);
    auto seen = [&](const FaultStudy& s) {
        return device.kind == DeviceRef::Kind::Recloser ? s.i_recloser.at(device.id)
                                                        : s.i_fuse.at(device.id);
    };
    FaultCurrentRange out;
    out.i_max = -1.0;
    out.i_min = std::numeric_limits<double>::infinity();
    for (const auto& loc : locs) {
        const auto bolted = solve_fault(network, sol, loc);
        const double i_bolted = seen(bolted);
        if (i_bolted > out.i_max) {
            out.i_max = i_bolted;
            out.at_max = loc;
        }
        const double i_floor = options.fault_impedance > 0.0
                                   ? seen(solve_fault(network, sol, loc, options))
                                   : i_bolted;
        if (i_floor < out.i_min) {
            out.i_min = i_floor;
            out.at_min = loc;
        }
    }
    return out;
}

}  // namespace protcoord
