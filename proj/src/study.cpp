#include "protcoord/study.hpp"

#include "protcoord/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace protcoord {

FaultState analyze_fault_state(const Network& network, const StudyConfig& config)
{
    FaultState state;
    state.power_flow = solve_distflow(network, config.power_flow);
    if (!state.power_flow.converged) {
        throw DivergenceError("", fmt::format("power flow did not converge in {} iterations "
                                              "(mismatch {:.3g} pu)",
                                              state.power_flow.iterations,
                                              state.power_flow.max_mismatch));
    }
    const auto& sol = state.power_flow;

    for (std::size_t k = 0; k < network.reclosers.size(); ++k) {
        state.zones.push_back(
            {max_min_fault_currents(network, sol, DeviceRef::recloser(k), config.fault)});
    }
    for (const auto& lat : network.laterals) {
        if (!lat.fuse) continue;
        const auto rec = recloser_for_node(network, lat.tap);
        if (!rec) continue;
        const auto near = solve_fault(network, sol, FaultLocation::lateral(lat.id, false));
        const auto far = solve_fault(network, sol, FaultLocation::lateral(lat.id, true), config.fault);
        state.fuse_links.push_back({lat.id, *rec, near.i_recloser.at(*rec), far.i_recloser.at(*rec),
                                    near.delta_fr.at(*rec)});
    }
    for (std::size_t k = 1; k < network.reclosers.size(); ++k) {
        const auto& zone = state.zones[k].range;
        const auto at_max = solve_fault(network, sol, zone.at_max);
        state.recloser_links.push_back({k - 1, k, zone.i_max, zone.i_min, at_max.delta_rr.at(k - 1)});
    }
    return state;
}

std::string fuse_recloser_label(const Network& network, const FuseRecloserLink& link)
{
    return fmt::format("{}/{}", network.reclosers[link.recloser].name,
                       network.laterals[link.lateral].name);
}

std::string recloser_pair_label(const Network& network, const RecloserLink& link)
{
    return fmt::format("{}/{}", network.reclosers[link.backup].name,
                       network.reclosers[link.primary].name);
}

namespace {

RecloserCurve recloser_curve(const RecloserPlacement& rec, const TripShot& shot)
{
    return {rec.id,
            fmt::format("{} {}", rec.name, shot.speed == ShotSpeed::Fast ? "fast" : "slow"),
            shot.curve, shot.settings};
}

FuseDevice fuse_device(const Lateral& lat, FuseCharacteristic which)
{
    return {lat.id,
            fmt::format("{} {}", lat.name, which == FuseCharacteristic::MinimumMelting ? "MM" : "TC"),
            *lat.fuse, which};
}

const FuseRecloserLink* find_fuse_link(const FaultState* state, std::size_t lateral)
{
    if (!state) return nullptr;
    for (const auto& l : state->fuse_links) {
        if (l.lateral == lateral) return &l;
    }
    return nullptr;
}

}  // namespace

std::vector<PairInstance> build_pairs(const Network& network, const FaultState& state,
                                      const StudyConfig& config, const FaultState* passive)
{
    const bool use_passive = config.range_basis == RangeBasis::Passive;
    if (use_passive && !passive) {
        throw PreconditionError("passive range basis needs the no-DG fault state");
    }
    const int ppd = config.coordination.points_per_decade;
    std::vector<PairInstance> pairs;

    for (std::size_t li = 0; li < state.fuse_links.size(); ++li) {
        const auto& link = state.fuse_links[li];
        const auto& rec = network.reclosers[link.recloser];
        const auto& lat = network.laterals[link.lateral];
        const double d = link.delta_fr;
        PairInstance inst;
        inst.fuse_link = li;
        inst.pair.label = fuse_recloser_label(network, link);
        inst.pair.kind = PairKind::FuseRecloser;
        inst.pair.margin = config.margins.fuse_recloser;
        inst.pair.range = {link.i_recloser_min, link.i_recloser_max + d};
        if (use_passive) {
            const auto* p = find_fuse_link(passive, link.lateral);
            if (!p) throw PreconditionError("passive state lacks lateral " + lat.name);
            inst.pair.range = {p->i_recloser_min, p->i_recloser_max};
        }
        if (config.fuse_scheme == FuseScheme::Saving) {
            inst.pair.primary = recloser_curve(rec, rec.sequence.first());
            inst.pair.backup = fuse_device(lat, FuseCharacteristic::MinimumMelting);
            inst.sweep = log_sweep(link.i_recloser_min, link.i_recloser_max, ppd, d);
            inst.binding_current = link.i_recloser_max;
        } else {
            const TripShot* slow = rec.sequence.first_slow();
            inst.pair.primary = fuse_device(lat, FuseCharacteristic::TotalClearing);
            inst.pair.backup = recloser_curve(rec, slow ? *slow : rec.sequence.first());
            inst.sweep = log_sweep(link.i_recloser_min + d, link.i_recloser_max + d, ppd, -d);
            inst.binding_current = link.i_recloser_max + d;
        }
        pairs.push_back(std::move(inst));
    }

    for (std::size_t li = 0; li < state.recloser_links.size(); ++li) {
        const auto& link = state.recloser_links[li];
        const auto& backup = network.reclosers[link.backup];
        const auto& primary = network.reclosers[link.primary];
        const double d = link.delta_rr;
        PairInstance inst;
        inst.recloser_link = li;
        inst.pair.label = recloser_pair_label(network, link);
        inst.pair.kind = PairKind::RecloserRecloser;
        inst.pair.margin = config.margins.recloser_recloser;
        inst.pair.primary = recloser_curve(primary, primary.sequence.first());
        inst.pair.backup = recloser_curve(backup, backup.sequence.first());
        inst.pair.range = {std::max(link.i_primary_min - d, 1e-9), link.i_primary_max};
        if (use_passive) {
            const auto& z = passive->zones.at(link.primary).range;
            inst.pair.range = {z.i_min, z.i_max};
        }
        inst.sweep = log_sweep(link.i_primary_min, link.i_primary_max, ppd, -d);
        inst.binding_current = link.i_primary_max;
        pairs.push_back(std::move(inst));
    }
    return pairs;
}

std::vector<CoordinationReport> check_all(const std::vector<PairInstance>& pairs,
                                          const StudyConfig& config)
{
    std::vector<CoordinationReport> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        out.push_back(check_pair(p.pair, p.sweep, config.coordination));
    }
    return out;
}

double total_clearing_time(const Network& network, const FaultState& state)
{
    double total = 0.0;
    for (std::size_t k = 0; k < network.reclosers.size(); ++k) {
        const auto& shot = network.reclosers[k].sequence.first();
        total += tci_time(shot.curve, shot.settings, state.zones.at(k).range.i_max).seconds;
    }
    return total;
}

std::vector<double> recloser_load_currents(const Network& network, const PowerFlowSolution& sol)
{
    std::vector<double> out;
    for (const auto& rec : network.reclosers) {
        const std::size_t n = rec.node.index;
        if (n == 0) {
            out.push_back(std::abs(sol.head_current()));
        } else {
            const double s = std::hypot(sol.p_flow[n - 1], sol.q_flow[n - 1]);
            out.push_back(s / sol.v_mag[n - 1]);
        }
    }
    return out;
}

}  // namespace protcoord
