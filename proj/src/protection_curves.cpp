#include "protcoord/protection_curves.hpp"

#include "protcoord/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace protcoord {

std::optional<double> tci_dial_factor(const TCIConstants& curve, double pickup, double current)
{
    if (!(pickup > 0.0) || !(current > 0.0)) {
        return std::nullopt;
    }
    const double denom = std::pow(current / pickup, curve.m) - curve.c;
    if (!(denom > 0.0)) {
        return std::nullopt;
    }
    return curve.a / denom + curve.b;
}

CurveTime tci_time(const TCIConstants& curve, const RecloserSettings& settings, double current)
{
    const auto factor = tci_dial_factor(curve, settings.pickup, current);
    if (!factor) {
        return CurveTime::no_operation();
    }
    return {settings.time_dial * *factor + curve.k, CurveStatus::Operates};
}

double invert_tci_for_current(const TCIConstants& curve, const RecloserSettings& settings,
                              double t_target)
{
    const double asymptote = curve.b * settings.time_dial + curve.k;
    const double excess = t_target - asymptote;
    if (!(excess > 0.0)) {
        throw UnreachableTimeError(fmt::format(
            "time {:.6g} s is at or below the curve asymptote b*D+K = {:.6g} s", t_target,
            asymptote));
    }
    const double multiple_pow = curve.a * settings.time_dial / excess + curve.c;
    return settings.pickup * std::pow(multiple_pow, 1.0 / curve.m);
}

std::vector<std::string> validate_tci_constants(const TCIConstants& curve)
{
    std::vector<std::string> out;
    if (!(curve.a > 0.0)) out.push_back("a must be positive");
    if (!(curve.m > 0.0)) out.push_back("m must be positive");
    if (!(curve.k >= 0.0)) out.push_back("K must be non-negative");
    if (!(curve.c >= 0.0)) out.push_back("c must be non-negative");
    if (!(curve.b >= 0.0)) out.push_back("b must be non-negative");
    return out;
}

std::string ReclosingSequence::pattern() const
{
    std::string p;
    for (const auto& s : shots) {
        p.push_back(s.speed == ShotSpeed::Fast ? 'F' : 'S');
    }
    return p;
}

const TripShot& ReclosingSequence::first() const
{
    if (shots.empty()) {
        throw PreconditionError("reclosing sequence has no shots");
    }
    return shots.front();
}

TripShot& ReclosingSequence::first()
{
    if (shots.empty()) {
        throw PreconditionError("reclosing sequence has no shots");
    }
    return shots.front();
}

const TripShot* ReclosingSequence::first_slow() const
{
    auto it = std::find_if(shots.begin(), shots.end(),
                           [](const TripShot& s) { return s.speed == ShotSpeed::Slow; });
    return it == shots.end() ? nullptr : &*it;
}

bool ReclosingSequence::has_fast() const
{
    return std::any_of(shots.begin(), shots.end(),
                       [](const TripShot& s) { return s.speed == ShotSpeed::Fast; });
}

void ReclosingSequence::apply_first_curve_settings(const RecloserSettings& settings)
{
    const ShotSpeed speed = first().speed;
    for (auto& s : shots) {
        s.settings.pickup = settings.pickup;
        if (s.speed == speed) {
            s.settings.time_dial = settings.time_dial;
        }
    }
}

namespace {

void check_table(const std::vector<CurvePoint>& pts, const char* name,
                 std::vector<std::string>& out)
{
    if (pts.size() < 2) {
        out.push_back(fmt::format("{} curve needs at least 2 points", name));
        return;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!(pts[i].current > 0.0) || !(pts[i].seconds > 0.0)) {
            out.push_back(fmt::format("{} point {} must have positive current and time", name, i));
        }
        if (i > 0) {
            if (!(pts[i].current > pts[i - 1].current)) {
                out.push_back(fmt::format("{} currents must be strictly increasing (point {})", name, i));
            }
            if (!(pts[i].seconds < pts[i - 1].seconds)) {
                out.push_back(fmt::format("{} times must be strictly decreasing (point {})", name, i));
            }
        }
    }
}

// Log-log interpolation on one segment.
double loglog(const CurvePoint& lo, const CurvePoint& hi, double current)
{
    const double u = (std::log(current) - std::log(lo.current)) /
                     (std::log(hi.current) - std::log(lo.current));
    return std::exp(std::log(lo.seconds) + u * (std::log(hi.seconds) - std::log(lo.seconds)));
}

double loglog_inverse(const CurvePoint& lo, const CurvePoint& hi, double seconds)
{
    const double u = (std::log(seconds) - std::log(lo.seconds)) /
                     (std::log(hi.seconds) - std::log(lo.seconds));
    return std::exp(std::log(lo.current) + u * (std::log(hi.current) - std::log(lo.current)));
}

}  // namespace

std::vector<std::string> validate_fuse_curve(const FuseCurve& curve)
{
    std::vector<std::string> out;
    check_table(curve.minimum_melting, "MM", out);
    check_table(curve.total_clearing, "TC", out);
    if (!out.empty()) {
        return out;
    }
    // MM must not exceed TC wherever both are tabulated.
    std::vector<double> probe;
    for (const auto& p : curve.minimum_melting) probe.push_back(p.current);
    for (const auto& p : curve.total_clearing) probe.push_back(p.current);
    for (double i : probe) {
        const auto mm = fuse_time(curve, FuseCharacteristic::MinimumMelting, i);
        const auto tc = fuse_time(curve, FuseCharacteristic::TotalClearing, i);
        if (mm.status == CurveStatus::Operates && tc.status == CurveStatus::Operates &&
            mm.seconds > tc.seconds) {
            out.push_back(fmt::format("MM time exceeds TC time at current {:.6g}", i));
        }
    }
    return out;
}

CurveTime fuse_time(const FuseCurve& curve, FuseCharacteristic which, double current)
{
    const auto& pts = curve.points(which);
    if (pts.size() < 2 || !(current >= pts.front().current)) {
        return CurveTime::no_operation();
    }
    if (current > pts.back().current) {
        return {loglog(pts[pts.size() - 2], pts.back(), current), CurveStatus::Extrapolated};
    }
    // First point whose current is >= the query.
    auto it = std::lower_bound(pts.begin(), pts.end(), current,
                               [](const CurvePoint& p, double i) { return p.current < i; });
    if (it->current == current) {
        return {it->seconds, CurveStatus::Operates};
    }
    return {loglog(*(it - 1), *it, current), CurveStatus::Operates};
}

double fuse_current_for_time(const FuseCurve& curve, FuseCharacteristic which, double t_target)
{
    const auto& pts = curve.points(which);
    if (pts.size() < 2) {
        throw UnreachableTimeError(fmt::format("fuse curve {} has no usable table", curve.id));
    }
    if (!(t_target > 0.0) || !(t_target <= pts.front().seconds)) {
        throw UnreachableTimeError(fmt::format(
            "time {:.6g} s is above the slowest tabulated time {:.6g} s of fuse {}", t_target,
            pts.front().seconds, curve.id));
    }
    if (t_target < pts.back().seconds) {
        return loglog_inverse(pts[pts.size() - 2], pts.back(), t_target);
    }
    // Times are strictly decreasing: find the first point at or below the target.
    auto it = std::find_if(pts.begin(), pts.end(),
                           [t_target](const CurvePoint& p) { return p.seconds <= t_target; });
    if (it->seconds == t_target) {
        return it->current;
    }
    return loglog_inverse(*(it - 1), *it, t_target);
}

FuseCurve scale_fuse_currents(FuseCurve curve, double factor)
{
    for (auto* table : {&curve.minimum_melting, &curve.total_clearing}) {
        for (auto& p : *table) {
            p.current *= factor;
        }
    }
    return curve;
}

const TCIConstants& CurveFamilies::at(const std::string& name) const
{
    auto it = families.find(name);
    if (it == families.end()) {
        throw InputError(fmt::format("unknown curve family '{}'", name));
    }
    return it->second;
}

}  // namespace protcoord
