#include "protcoord/grid_model.hpp"

#include "protcoord/errors.hpp"

#include <fmt/format.h>

#include <cmath>

namespace protcoord {

DgKind DGUnit::kind() const noexcept
{
    switch (machine.index()) {
    case 0:
        return DgKind::Synchronous;
    case 1:
        return DgKind::Asynchronous;
    default:
        return DgKind::InverterBased;
    }
}

double Bases::current_a() const
{
    return mva * 1e6 / (std::sqrt(3.0) * kv * 1e3);
}

double Bases::impedance_ohm() const
{
    return kv * kv / mva;
}

std::string Network::node_label(NodeId n) const
{
    if (n.index < bus_names.size() && !bus_names[n.index].empty()) {
        return bus_names[n.index];
    }
    return fmt::format("node {}", n.index);
}

namespace {

void check_dg(const Network& net, const DGUnit& dg, std::vector<Violation>& out)
{
    const std::string el = fmt::format("dg[{}] {}", dg.id, dg.name);
    if (!net.has_node(dg.tap)) {
        out.push_back({el, fmt::format("tap node {} does not exist", dg.tap.index)});
    }
    if (!(dg.rating_s > 0.0)) {
        out.push_back({el, "rating must be positive"});
    }
    if (!(dg.p_out >= 0.0)) {
        out.push_back({el, "real output must be non-negative"});
    }
    if (dg.p_out * dg.p_out + dg.q_out * dg.q_out > dg.rating_s * dg.rating_s * (1.0 + 1e-12)) {
        out.push_back({el, "p_out^2 + q_out^2 exceeds rating^2"});
    }
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, SynchronousParams>) {
                if (!(m.x_subtransient > 0.0)) {
                    out.push_back({el, "subtransient reactance must be positive"});
                }
            } else if constexpr (std::is_same_v<T, AsynchronousParams>) {
                if (!(m.x_locked_rotor > 0.0)) {
                    out.push_back({el, "locked-rotor reactance must be positive"});
                }
                if (!(m.rated_slip > 0.0) || !(m.rated_slip < 1.0)) {
                    out.push_back({el, "rated slip must lie in (0, 1)"});
                }
            } else {
                if (!(1.25 <= m.k_clamp && m.k_clamp <= 2.0 && 2.0 <= m.k_off && m.k_off <= 3.0)) {
                    out.push_back({el, "inverter requires 1.25 <= k_clamp <= 2 <= k_off <= 3"});
                }
                if (!(m.coupling_x > 0.0)) {
                    out.push_back({el, "coupling reactance must be positive"});
                }
            }
        },
        dg.machine);
}

void check_sequence(const RecloserPlacement& rec, std::vector<Violation>& out)
{
    const std::string el = fmt::format("recloser[{}] {}", rec.id, rec.name);
    if (rec.sequence.shots.empty()) {
        out.push_back({el, "reclosing sequence has no shots"});
        return;
    }
    for (std::size_t s = 0; s < rec.sequence.shots.size(); ++s) {
        const auto& shot = rec.sequence.shots[s];
        for (const auto& msg : validate_tci_constants(shot.curve)) {
            out.push_back({el, fmt::format("shot {}: {}", s, msg)});
        }
        if (!(shot.settings.time_dial >= kMinTimeDial - 1e-12 &&
              shot.settings.time_dial <= kMaxTimeDial + 1e-12)) {
            out.push_back({el, fmt::format("shot {}: time dial outside [0.1, 1]", s)});
        }
        if (!(shot.settings.pickup > 0.0)) {
            out.push_back({el, fmt::format("shot {}: pickup must be positive", s)});
        }
    }
}

}  // namespace

std::vector<Violation> validate(const Network& network)
{
    std::vector<Violation> out;
    const auto& net = network;

    if (!net.bus_names.empty() && net.bus_names.size() != net.node_count()) {
        out.push_back({"bus_names", "must name every node or none"});
    }
    for (std::size_t i = 0; i < net.sections.size(); ++i) {
        const auto& s = net.sections[i];
        const std::string el = fmt::format("section[{}]", i);
        if (s.from.index != i || s.to.index != i + 1) {
            out.push_back({el, "sections must form the chain i -> i+1 in order"});
        }
        if (!(s.r >= 0.0) || !(s.x >= 0.0)) {
            out.push_back({el, "r and x must be non-negative"});
        } else if (s.r == 0.0 && s.x == 0.0) {
            out.push_back({el, "r and x cannot both be zero"});
        }
    }
    for (std::size_t i = 0; i < net.laterals.size(); ++i) {
        const auto& lat = net.laterals[i];
        const std::string el = fmt::format("lateral[{}] {}", lat.id, lat.name);
        if (lat.id != i) {
            out.push_back({el, "lateral ids must equal their position"});
        }
        if (!net.has_node(lat.tap)) {
            out.push_back({el, fmt::format("tap node {} does not exist", lat.tap.index)});
        }
        if (!(lat.load_p >= 0.0)) {
            out.push_back({el, "load_p must be non-negative"});
        }
        if (std::abs(lat.load_q) > 2.0 * lat.load_p + 1e-15) {
            out.push_back({el, "|load_q| must not exceed 2 * load_p"});
        }
        if (!(lat.r >= 0.0) || !(lat.x >= 0.0)) {
            out.push_back({el, "lateral impedance must be non-negative"});
        }
        if (lat.fuse && lat.r == 0.0 && lat.x == 0.0) {
            out.push_back({el, "a fused lateral needs a nonzero impedance to its far end"});
        }
        if (lat.fuse) {
            for (const auto& msg : validate_fuse_curve(*lat.fuse)) {
                out.push_back({el, fmt::format("fuse {}: {}", lat.fuse->id, msg)});
            }
        }
    }
    for (std::size_t i = 0; i < net.dg_units.size(); ++i) {
        if (net.dg_units[i].id != i) {
            out.push_back({fmt::format("dg[{}]", i), "dg ids must equal their position"});
        }
        check_dg(net, net.dg_units[i], out);
    }
    if (!(net.source.voltage >= 0.9 && net.source.voltage <= 1.1)) {
        out.push_back({"source", "voltage must lie in [0.9, 1.1] pu"});
    }
    if (!(std::abs(net.source.impedance) > 0.0)) {
        out.push_back({"source", "source impedance magnitude must be positive"});
    }
    for (std::size_t k = 0; k < net.reclosers.size(); ++k) {
        const auto& rec = net.reclosers[k];
        const std::string el = fmt::format("recloser[{}] {}", rec.id, rec.name);
        if (rec.id != k) {
            out.push_back({el, "recloser ids must equal their position"});
        }
        if (!net.has_node(rec.node)) {
            out.push_back({el, fmt::format("node {} does not exist", rec.node.index)});
        }
        if (k > 0 && !(rec.node > net.reclosers[k - 1].node)) {
            out.push_back({el, "recloser nodes must be strictly increasing along the feeder"});
        }
        const bool slow_only = !rec.sequence.shots.empty() && !rec.sequence.has_fast();
        if (slow_only && rec.node.index != 0) {
            out.push_back({el, "a slow-only (relay) device is only permitted at node 0"});
        }
        check_sequence(rec, out);
    }
    if (!(net.bases.mva > 0.0) || !(net.bases.kv > 0.0)) {
        out.push_back({"bases", "base MVA and kV must be positive"});
    }
    return out;
}

std::vector<std::size_t> downstream_dg(const Network& network, NodeId node)
{
    if (!network.has_node(node)) {
        throw QueryError(fmt::format("unknown node {}", node.index));
    }
    std::vector<std::size_t> ids;
    for (const auto& dg : network.dg_units) {
        if (dg.tap.index >= node.index) {
            ids.push_back(dg.id);
        }
    }
    return ids;
}

std::vector<std::size_t> section_dg(const Network& network, NodeId j)
{
    if (!network.has_node(j)) {
        throw QueryError(fmt::format("unknown node {}", j.index));
    }
    if (j.index + 1 >= network.node_count()) {
        throw QueryError(fmt::format("node {} is the feeder end and has no section", j.index));
    }
    std::vector<std::size_t> ids;
    for (const auto& dg : network.dg_units) {
        if (dg.tap.index == j.index) {
            ids.push_back(dg.id);
        }
    }
    return ids;
}

NodeId recloser_zone_end(const Network& network, std::size_t recloser)
{
    if (recloser >= network.reclosers.size()) {
        throw QueryError(fmt::format("unknown recloser {}", recloser));
    }
    if (recloser + 1 < network.reclosers.size()) {
        return NodeId{network.reclosers[recloser + 1].node.index - 1};
    }
    return NodeId{network.node_count() - 1};
}

std::vector<std::size_t> recloser_span_dg(const Network& network, std::size_t recloser)
{
    const NodeId begin = network.reclosers.at(recloser).node;
    const NodeId end = recloser_zone_end(network, recloser);
    std::vector<std::size_t> ids;
    for (const auto& dg : network.dg_units) {
        if (dg.tap >= begin && dg.tap <= end) {
            ids.push_back(dg.id);
        }
    }
    return ids;
}

std::optional<std::size_t> recloser_for_node(const Network& network, NodeId node)
{
    std::optional<std::size_t> found;
    for (const auto& rec : network.reclosers) {
        if (rec.node <= node) {
            found = rec.id;
        }
    }
    return found;
}

double dg_q_ratio(const DGUnit& dg)
{
    return dg.p_out > 0.0 ? dg.q_out / dg.p_out : dg.q_per_p.value_or(0.0);
}

double dg_p_capability(const DGUnit& dg)
{
    const double ratio = dg_q_ratio(dg);
    return dg.rating_s / std::sqrt(1.0 + ratio * ratio);
}

Network with_dg_outputs(const Network& network, const std::vector<double>& p_out)
{
    if (p_out.size() != network.dg_units.size()) {
        throw PreconditionError("dispatch vector size does not match the DG count");
    }
    Network out = network;
    for (std::size_t i = 0; i < out.dg_units.size(); ++i) {
        auto& dg = out.dg_units[i];
        const double ratio = dg_q_ratio(dg);
        dg.q_per_p = ratio;
        dg.p_out = p_out[i];
        dg.q_out = ratio * p_out[i];
    }
    return out;
}

Network without_dg(const Network& network)
{
    Network out = network;
    out.dg_units.clear();
    return out;
}

}  // namespace protcoord
