#include "protcoord/coordination.hpp"

#include "protcoord/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace protcoord {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRelTol = 1e-9;

}  // namespace

CurveTime device_time(const DeviceCurve& device, double current)
{
    if (const auto* r = std::get_if<RecloserCurve>(&device)) {
        return tci_time(r->curve, r->settings, current);
    }
    const auto& f = std::get<FuseDevice>(device);
    return fuse_time(f.curve, f.which, current);
}

double device_current_for_time(const DeviceCurve& device, double t_target)
{
    try {
        if (const auto* r = std::get_if<RecloserCurve>(&device)) {
            return invert_tci_for_current(r->curve, r->settings, t_target);
        }
        const auto& f = std::get<FuseDevice>(device);
        return fuse_current_for_time(f.curve, f.which, t_target);
    } catch (const UnreachableTimeError& e) {
        throw UnreachableTimeError(fmt::format("{}: {}", device_label(device), e.what()));
    }
}

const std::string& device_label(const DeviceCurve& device)
{
    return std::visit([](const auto& d) -> const std::string& { return d.label; }, device);
}

const char* to_string(FailureMode mode)
{
    switch (mode) {
    case FailureMode::None:
        return "None";
    case FailureMode::RangeExceeded:
        return "RangeExceeded";
    default:
        return "MarginViolated";
    }
}

CurrentSweep log_sweep(double lo, double hi, int points_per_decade, double backup_offset)
{
    if (!(lo > 0.0) || !(hi >= lo) || points_per_decade < 1) {
        throw PreconditionError(fmt::format(
            "log sweep needs 0 < lo <= hi and points_per_decade >= 1 (lo={:.6g}, hi={:.6g})", lo,
            hi));
    }
    CurrentSweep sweep;
    sweep.backup_offset = backup_offset;
    if (hi == lo) {
        sweep.primary_currents = {lo};
        return sweep;
    }
    const double decades = std::log10(hi / lo);
    const auto intervals = static_cast<std::size_t>(std::ceil(decades * points_per_decade));
    sweep.primary_currents.reserve(intervals + 1);
    for (std::size_t i = 0; i <= intervals; ++i) {
        const double u = static_cast<double>(i) / static_cast<double>(intervals);
        sweep.primary_currents.push_back(lo * std::pow(hi / lo, u));
    }
    sweep.primary_currents.front() = lo;
    sweep.primary_currents.back() = hi;
    return sweep;
}

namespace {

void check_sweep(const CurrentSweep& sweep, int points_per_decade)
{
    const auto& c = sweep.primary_currents;
    if (c.empty()) {
        throw SweepGapError("current sweep is empty");
    }
    const double max_ratio = std::pow(10.0, 1.0 / points_per_decade) * (1.0 + kRelTol);
    for (std::size_t i = 1; i < c.size(); ++i) {
        if (!(c[i] > c[i - 1])) {
            throw SweepGapError(fmt::format("sweep currents must increase (index {})", i));
        }
        if (c[i] / c[i - 1] > max_ratio) {
            throw SweepGapError(fmt::format(
                "sweep gap {:.6g} -> {:.6g} is coarser than {} points per decade; densify the sweep",
                c[i - 1], c[i], points_per_decade));
        }
    }
}

bool within(const CurrentRange& r, double i)
{
    return i >= r.lo * (1.0 - kRelTol) && i <= r.hi * (1.0 + kRelTol);
}

// Gap T_B - T_P; a primary that does not operate is an unconditional violation,
// a backup that does not operate never limits the margin.
double gap(const CurveTime& tp, const CurveTime& tb)
{
    if (!tp.operates()) return -kInf;
    if (!tb.operates()) return kInf;
    return tb.seconds - tp.seconds;
}

}  // namespace

CoordinationReport check_pair(const CoordinationPair& pair, const CurrentSweep& sweep,
                              const CoordinationOptions& options)
{
    if (!(pair.margin > 0.0)) {
        throw PreconditionError(fmt::format("pair {}: margin must be positive", pair.label));
    }
    if (!(pair.range.lo > 0.0) || !(pair.range.lo < pair.range.hi)) {
        throw PreconditionError(fmt::format("pair {}: range must satisfy 0 < min < max", pair.label));
    }
    check_sweep(sweep, options.points_per_decade);

    CoordinationReport rep;
    rep.pair_label = pair.label;
    rep.kind = pair.kind;

    const auto& currents = sweep.primary_currents;
    rep.samples.reserve(currents.size());
    rep.worst_margin = kInf;
    for (double ip : currents) {
        const double ib = ip + sweep.backup_offset;
        const auto tp = device_time(pair.primary, ip);
        const auto tb = ib > 0.0 ? device_time(pair.backup, ib) : CurveTime::no_operation();
        rep.samples.push_back({ip, ib, tp.seconds, tb.seconds});
        const double g = gap(tp, tb);
        if (g < rep.worst_margin) {
            rep.worst_margin = g;
            rep.worst_current = ip;
        }
    }
    if (options.independent_currents) {
        // Slowest primary against fastest backup anywhere in the swept band.
        const double ip = currents.front();
        const double ib = currents.back() + sweep.backup_offset;
        const double g = gap(device_time(pair.primary, ip), device_time(pair.backup, ib));
        if (g < rep.worst_margin) {
            rep.worst_margin = g;
            rep.worst_current = ip;
        }
    }

    // Range condition at both ends of the sweep, top first: that is where the
    // disparity pushes the backup current past the range.
    rep.range_ok = true;
    for (double ip : {currents.back(), currents.front()}) {
        const double ib = ip + sweep.backup_offset;
        if (!within(pair.range, ip) || !within(pair.range, ib)) {
            rep.range_ok = false;
            rep.trigger = fmt::format(
                "I_P = {:.6g} pu or I_B = I_P {:+.6g} = {:.6g} pu outside [{:.6g}, {:.6g}] pu", ip,
                sweep.backup_offset, ib, pair.range.lo, pair.range.hi);
            break;
        }
        const double g = gap(device_time(pair.primary, ip), ib > 0.0 ? device_time(pair.backup, ib)
                                                                      : CurveTime::no_operation());
        if (!(g >= 0.0)) {
            rep.range_ok = false;
            rep.trigger = fmt::format("T_P({:.6g} pu) > T_B({:.6g} pu): backup operates first", ip, ib);
            break;
        }
    }
    rep.margin_ok = rep.worst_margin >= pair.margin - 1e-12;

    if (!rep.range_ok) {
        rep.failure_mode = FailureMode::RangeExceeded;
    } else if (!rep.margin_ok) {
        rep.failure_mode = FailureMode::MarginViolated;
        rep.trigger = fmt::format("T_B - T_P = {:.6g} s < {:.6g} s at I_P = {:.6g} pu",
                                  rep.worst_margin, pair.margin, rep.worst_current);
    }

    if (pair.kind == PairKind::RecloserRecloser) {
        const auto& last = rep.samples.back();
        if (std::isfinite(last.t_primary) && std::isfinite(last.t_backup)) {
            rep.backup_delay = last.t_backup - last.t_primary;
        }
    }
    return rep;
}

std::optional<double> backup_delay(const CoordinationPair& pair, double delta, double i_primary)
{
    const auto t_shift = device_time(pair.backup, i_primary + delta);
    const auto t_base = device_time(pair.backup, i_primary);
    if (!t_shift.operates() || !t_base.operates()) {
        return std::nullopt;
    }
    return t_shift.seconds - t_base.seconds;
}

double coordination_current_margin(const CoordinationPair& pair, double delta_t,
                                   double i_binding)
{
    const auto tp = device_time(pair.primary, i_binding);
    if (!tp.operates()) {
        throw UnreachableTimeError(fmt::format("{}: primary does not operate at {:.6g} pu",
                                               device_label(pair.primary), i_binding));
    }
    return device_current_for_time(pair.backup, tp.seconds + delta_t) - i_binding;
}

}  // namespace protcoord
