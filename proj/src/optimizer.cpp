#include "protcoord/optimizer.hpp"

#include "protcoord/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace protcoord {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_saving(const StudyConfig& config)
{
    if (config.fuse_scheme != FuseScheme::Saving) {
        throw InputError("optimization supports the fuse-saving scheme only");
    }
}

}  // namespace

// ---------------------------------------------------------------- settings

std::vector<PickupWindow> pickup_windows(const Network& network, const FaultState& state,
                                         const StudyConfig& config)
{
    const Network passive = without_dg(network);
    const auto sol = solve_distflow(passive, config.power_flow);
    const auto load = recloser_load_currents(passive, sol);
    std::vector<PickupWindow> out;
    for (std::size_t k = 0; k < network.reclosers.size(); ++k) {
        const double line_line_min = std::sqrt(3.0) / 2.0 * state.zones.at(k).range.i_min;
        out.push_back({2.0 * load[k], 0.5 * line_line_min});
    }
    return out;
}

SettingsConstraints settings_constraints(const Network& network, const FaultState& state,
                                         const StudyConfig& config,
                                         const std::vector<double>& pickups)
{
    require_saving(config);
    const auto& recs = network.reclosers;
    if (pickups.size() != recs.size()) {
        throw PreconditionError("one pickup per recloser is required");
    }
    const int ppd = config.coordination.points_per_decade;
    SettingsConstraints c;
    c.pickups = pickups;

    for (std::size_t k = 0; k < recs.size(); ++k) {
        const auto& shot = recs[k].sequence.first();
        const auto g = tci_dial_factor(shot.curve, pickups[k], state.zones.at(k).range.i_max);
        if (!g) {
            c.impossible.push_back({k, 0.0, 0.0, recs[k].name + " zone", false});
        }
        c.cost.push_back(g.value_or(1.0));
        c.constant.push_back(shot.curve.k);
    }

    for (const auto& link : state.fuse_links) {
        const std::size_t k = link.recloser;
        const auto& shot = recs[k].sequence.first();
        const auto& fuse = *network.laterals[link.lateral].fuse;
        const std::string label = fuse_recloser_label(network, link);
        const auto sweep = log_sweep(link.i_recloser_min, link.i_recloser_max, ppd, link.delta_fr);
        for (double i : sweep.primary_currents) {
            const auto tf = fuse_time(fuse, FuseCharacteristic::MinimumMelting, i + link.delta_fr);
            if (!tf.operates()) continue;  // fuse never melts here
            const auto g = tci_dial_factor(shot.curve, pickups[k], i);
            if (!g) {
                c.impossible.push_back({k, 0.0, 0.0, label, true});
                break;
            }
            c.limits.push_back({k, *g, tf.seconds - shot.curve.k - config.margins.fuse_recloser,
                                label, true});
        }
    }

    for (const auto& link : state.recloser_links) {
        const auto& bshot = recs[link.backup].sequence.first();
        const auto& pshot = recs[link.primary].sequence.first();
        const std::string label = recloser_pair_label(network, link);
        const auto sweep = log_sweep(link.i_primary_min, link.i_primary_max, ppd, -link.delta_rr);
        for (double i : sweep.primary_currents) {
            const auto gp = tci_dial_factor(pshot.curve, pickups[link.primary], i);
            if (!gp) {
                c.impossible.push_back({link.primary, 0.0, 0.0, label, false});
                break;
            }
            const auto gb = tci_dial_factor(bshot.curve, pickups[link.backup], i - link.delta_rr);
            if (!gb) continue;  // backup never operates here
            c.links.push_back({link.backup, link.primary, *gb, *gp,
                               config.margins.recloser_recloser + pshot.curve.k - bshot.curve.k,
                               label});
        }
    }

    // Fast curves stay below the (fixed) slow curves of the same sequence.
    for (std::size_t k = 0; k < recs.size(); ++k) {
        const auto& seq = recs[k].sequence;
        const auto& first = seq.first();
        const TripShot* slow = seq.first_slow();
        if (first.speed != ShotSpeed::Fast || !slow) continue;
        const auto& zone = state.zones.at(k).range;
        const auto sweep = log_sweep(zone.i_min, zone.i_max, ppd, 0.0);
        const RecloserSettings slow_settings{pickups[k], slow->settings.time_dial};
        for (double i : sweep.primary_currents) {
            const auto ts = tci_time(slow->curve, slow_settings, i);
            const auto g = tci_dial_factor(first.curve, pickups[k], i);
            if (!ts.operates() || !g) continue;
            c.limits.push_back({k, *g, ts.seconds - first.curve.k, recs[k].name + " fast/slow",
                                false});
        }
    }
    return c;
}

LinearProgram settings_lp(const SettingsConstraints& c)
{
    LinearProgram lp;
    for (double cost : c.cost) {
        lp.add_variable(cost, kMinTimeDial, kMaxTimeDial);
    }
    for (const auto& l : c.limits) {
        lp.rows.push_back({{{l.recloser, l.g}}, RowSense::LessEqual, l.rhs, l.pair});
    }
    for (const auto& l : c.links) {
        lp.rows.push_back({{{l.backup, l.g_backup}, {l.primary, -l.g_primary}},
                           RowSense::GreaterEqual,
                           l.rhs,
                           l.pair});
    }
    for (const auto& imp : c.impossible) {
        lp.rows.push_back({{}, RowSense::GreaterEqual, 1.0, imp.pair});
    }
    return lp;
}

namespace {

std::vector<RecloserSettings> to_settings(const std::vector<double>& pickups,
                                          const std::vector<double>& dials)
{
    std::vector<RecloserSettings> out;
    for (std::size_t k = 0; k < dials.size(); ++k) {
        out.push_back({pickups[k], dials[k]});
    }
    return out;
}

double clearing_objective(const SettingsConstraints& c, const std::vector<double>& dials)
{
    double total = 0.0;
    for (std::size_t k = 0; k < dials.size(); ++k) {
        total += c.cost[k] * dials[k] + c.constant[k];
    }
    return total;
}

std::vector<double> choose_pickups(const std::vector<PickupWindow>& windows, PickupChoice choice)
{
    std::vector<double> out;
    for (const auto& w : windows) {
        out.push_back(choice == PickupChoice::Lower ? w.lower : w.upper);
    }
    return out;
}

std::string empty_window(const Network& network, const std::vector<PickupWindow>& windows)
{
    for (std::size_t k = 0; k < windows.size(); ++k) {
        if (!(windows[k].lower <= windows[k].upper)) {
            return fmt::format("{}: pickup window empty (2x load {:.6g} > half line-line fault {:.6g})",
                               network.reclosers[k].name, windows[k].lower, windows[k].upper);
        }
    }
    return {};
}

}  // namespace

SettingsResult sequential_settings(const Network& network, const FaultState& state,
                                   const StudyConfig& config, const std::vector<double>& pickups,
                                   bool ignore_fuse_limits)
{
    const auto c = settings_constraints(network, state, config, pickups);
    const std::size_t n = network.reclosers.size();
    SettingsResult res;
    res.feasible = true;
    std::vector<double> dial(n, kMinTimeDial);

    for (const auto& imp : c.impossible) {
        if (ignore_fuse_limits && imp.from_fuse) continue;
        res.feasible = false;
        res.violated_pair = imp.pair;
        res.diagnostic = fmt::format("{}: primary does not trip over the whole range", imp.pair);
        break;
    }

    // The chain runs from the feeder end upward; each dial only depends on
    // the dial of the recloser below it.
    for (std::size_t k = n; k-- > 0;) {
        double lower = kMinTimeDial;
        std::string pushed_by;
        for (const auto& l : c.links) {
            if (l.backup != k) continue;
            const double need = (l.rhs + l.g_primary * dial[l.primary]) / l.g_backup;
            if (need > lower) {
                lower = need;
                pushed_by = l.pair;
            }
        }
        double upper = kMaxTimeDial;
        std::string capped_by;
        for (const auto& l : c.limits) {
            if (l.recloser != k || (ignore_fuse_limits && l.from_fuse)) continue;
            const double cap = l.rhs / l.g;
            if (cap < upper) {
                upper = cap;
                capped_by = l.pair;
            }
        }
        if (lower > upper + 1e-12) {
            if (res.feasible) {
                res.feasible = false;
                res.violated_pair = !capped_by.empty() ? capped_by : pushed_by;
                res.diagnostic = fmt::format(
                    "{}: dial must be >= {:.6g}{} and <= {:.6g}{}", network.reclosers[k].name,
                    lower, pushed_by.empty() ? "" : " (" + pushed_by + ")", upper,
                    capped_by.empty() ? " (dial limit)" : " (" + capped_by + ")");
            }
            lower = std::min(lower, kMaxTimeDial);
        }
        dial[k] = lower;
    }
    res.settings = to_settings(pickups, dial);
    res.objective = clearing_objective(c, dial);
    res.lp_status = res.feasible ? LpStatus::Optimal : LpStatus::Infeasible;
    return res;
}

SettingsResult solve_settings(const Network& network, const FaultState& state,
                              const StudyConfig& config)
{
    const auto windows = pickup_windows(network, state, config);
    SettingsResult res;
    if (const auto why = empty_window(network, windows); !why.empty()) {
        res.diagnostic = why;
        res.violated_pair = why.substr(0, why.find(':'));
        return res;
    }
    for (const auto choice : {PickupChoice::Lower, PickupChoice::Upper}) {
        const auto pickups = choose_pickups(windows, choice);
        const auto c = settings_constraints(network, state, config, pickups);
        const auto lp = solve_lp(settings_lp(c));
        res.lp_status = lp.status;
        if (lp.status == LpStatus::Optimal) {
            // Costs are positive and every coupling row bounds a backup dial
            // from below, so the optimum is the unique least feasible vector;
            // no tie-break is needed.
            res.feasible = true;
            res.pickups = choice;
            res.settings = to_settings(pickups, lp.x);
            res.objective = clearing_objective(c, lp.x);
            return res;
        }
    }
    const auto diag = sequential_settings(network, state, config,
                                          choose_pickups(windows, PickupChoice::Lower));
    res.violated_pair = diag.violated_pair;
    res.diagnostic = diag.diagnostic.empty() ? "settings LP infeasible" : diag.diagnostic;
    return res;
}

Network apply_settings(const Network& network, const std::vector<RecloserSettings>& settings)
{
    if (settings.size() != network.reclosers.size()) {
        throw PreconditionError("one settings record per recloser is required");
    }
    Network out = network;
    for (std::size_t k = 0; k < settings.size(); ++k) {
        out.reclosers[k].sequence.apply_first_curve_settings(settings[k]);
    }
    return out;
}

std::vector<RecloserSettings> current_settings(const Network& network)
{
    std::vector<RecloserSettings> out;
    for (const auto& r : network.reclosers) {
        out.push_back(r.sequence.first().settings);
    }
    return out;
}

// ---------------------------------------------------------------- dispatch

std::vector<DispatchBound> dispatch_bounds(const Network& network, const FaultState& state,
                                           const StudyConfig& config)
{
    require_saving(config);
    StudyConfig fresh = config;
    fresh.range_basis = RangeBasis::Fresh;
    const auto pairs = build_pairs(network, state, fresh);
    std::vector<DispatchBound> out;
    for (const auto& inst : pairs) {
        if (!inst.fuse_link) continue;
        const auto& link = state.fuse_links[*inst.fuse_link];
        if (downstream_dg(network, network.reclosers[link.recloser].node).empty()) continue;
        // The disparity is one number for the whole sweep, so the tightest
        // sample sets the bound.
        double bound = kInf;
        try {
            for (double i : inst.sweep.primary_currents) {
                bound = std::min(bound, coordination_current_margin(
                                            inst.pair, config.margins.fuse_recloser, i));
            }
        } catch (const UnreachableTimeError&) {
            // No DG current restores this margin at the present settings.
            bound = -kInf;
        }
        out.push_back({link.lateral, link.recloser, bound, inst.pair.label});
    }
    return out;
}

std::vector<double> dispatch_ceiling(const Network& network, const std::vector<double>& available)
{
    if (available.size() != network.dg_units.size()) {
        throw PreconditionError("available-power vector size does not match the DG count");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < available.size(); ++i) {
        out.push_back(std::clamp(available[i], 0.0, dg_p_capability(network.dg_units[i])));
    }
    return out;
}

namespace {

// Largest downstream-DG current over the bounds, minus the bound (<= 0 when feasible).
double bound_excess(const Network& network, const std::vector<double>& p_out,
                    const std::vector<DispatchBound>& bounds, const StudyConfig& config,
                    std::string* worst_pair)
{
    const Network net = with_dg_outputs(network, p_out);
    PowerFlowSolution sol;
    try {
        sol = solve_distflow(net, config.power_flow);
    } catch (const DivergenceError&) {
        if (worst_pair) *worst_pair = "power flow";
        return kInf;
    }
    if (!sol.converged) {
        if (worst_pair) *worst_pair = "power flow";
        return kInf;
    }
    double worst = -kInf;
    for (const auto& b : bounds) {
        const auto study = solve_fault(net, sol, FaultLocation::lateral(b.lateral, false));
        const double excess = study.delta_fr.at(b.recloser) - b.bound;
        if (excess > worst) {
            worst = excess;
            if (worst_pair) *worst_pair = b.pair;
        }
    }
    return worst;
}

}  // namespace

bool dispatch_feasible(const Network& network, const std::vector<double>& p_out,
                       const std::vector<DispatchBound>& bounds, const StudyConfig& config)
{
    return bound_excess(network, p_out, bounds, config, nullptr) <= 0.0;
}

DispatchResult solve_dispatch(const Network& network, const std::vector<double>& available,
                              const std::vector<DispatchBound>& bounds, const StudyConfig& config)
{
    const auto ceiling = dispatch_ceiling(network, available);
    const auto& units = network.dg_units;
    DispatchResult res;
    auto feasible = [&](const std::vector<double>& p) {
        ++res.evaluations;
        return dispatch_feasible(network, p, bounds, config);
    };

    if (feasible(ceiling)) {
        res.feasible = true;
        res.p_out = ceiling;
        return res;
    }
    std::vector<double> floor = ceiling;
    for (std::size_t i = 0; i < units.size(); ++i) {
        if (units[i].curtailable) floor[i] = 0.0;
    }
    std::string worst;
    if (bound_excess(network, floor, bounds, config, &worst) > 0.0) {
        res.diagnostic = fmt::format(
            "{}: bound exceeded with every curtailable unit at zero output", worst);
        res.p_out = floor;
        return res;
    }

    auto scaled = [&](double alpha) {
        std::vector<double> p = floor;
        for (std::size_t i = 0; i < units.size(); ++i) {
            if (units[i].curtailable) p[i] = alpha * ceiling[i];
        }
        return p;
    };
    constexpr int kBisections = 60;
    constexpr double kWidth = 1e-10;
    double lo = 0.0;
    double hi = 1.0;
    for (int it = 0; it < kBisections && hi - lo > kWidth; ++it) {
        const double mid = 0.5 * (lo + hi);
        (feasible(scaled(mid)) ? lo : hi) = mid;
    }
    std::vector<double> p = scaled(lo);

    // Restore units one at a time from the feeder tail.
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < units.size(); ++i) {
        if (units[i].curtailable) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return units[a].tap.index > units[b].tap.index;
    });
    for (std::size_t i : order) {
        if (p[i] >= ceiling[i]) continue;
        std::vector<double> trial = p;
        trial[i] = ceiling[i];
        if (feasible(trial)) {
            p = trial;
            continue;
        }
        double a = p[i];
        double b = ceiling[i];
        for (int it = 0; it < kBisections && b - a > kWidth * std::max(1.0, ceiling[i]); ++it) {
            trial[i] = 0.5 * (a + b);
            (feasible(trial) ? a : b) = trial[i];
        }
        p[i] = a;
    }
    res.feasible = true;
    res.p_out = p;
    return res;
}

// ---------------------------------------------------------------- alternate

const char* to_string(StopReason reason)
{
    switch (reason) {
    case StopReason::SlackFixedPoint:
        return "SlackFixedPoint";
    case StopReason::MaxIters:
        return "MaxIters";
    default:
        return "Infeasible";
    }
}

IterationRecord evaluate_iterate(const Network& network, const FaultState& state,
                                 const StudyConfig& config,
                                 std::vector<CoordinationReport>* reports)
{
    std::optional<FaultState> passive;
    if (config.range_basis == RangeBasis::Passive) {
        passive = analyze_fault_state(without_dg(network), config);
    }
    const auto pairs = build_pairs(network, state, config, passive ? &*passive : nullptr);
    const auto reps = check_all(pairs, config);

    IterationRecord rec;
    for (const auto& dg : network.dg_units) rec.dg_outputs.push_back(dg.p_out);
    rec.settings = current_settings(network);
    rec.obj_clearing_time = total_clearing_time(network, state);
    rec.obj_dg_output = std::accumulate(rec.dg_outputs.begin(), rec.dg_outputs.end(), 0.0);
    rec.worst_slack = kInf;
    rec.coordinated = true;
    for (std::size_t i = 0; i < reps.size(); ++i) {
        const double slack = reps[i].worst_margin - pairs[i].pair.margin;
        rec.slacks.push_back(slack);
        rec.worst_slack = std::min(rec.worst_slack, slack);
        if (reps[i].failure_mode != FailureMode::None) rec.coordinated = false;
    }
    for (const auto& l : state.fuse_links) rec.delta_fr.push_back(l.delta_fr);
    if (reports) *reports = reps;
    return rec;
}

namespace {

bool close(double a, double b, double tol)
{
    if (std::isinf(a) || std::isinf(b)) return a == b;
    return std::abs(a - b) < tol;
}

bool slacks_close(const IterationRecord& a, const IterationRecord& b, double tol)
{
    if (a.slacks.size() != b.slacks.size()) return false;
    for (std::size_t i = 0; i < a.slacks.size(); ++i) {
        if (!close(a.slacks[i], b.slacks[i], tol)) return false;
    }
    return true;
}

bool objectives_close(const IterationRecord& a, const IterationRecord& b, double tol)
{
    return close(a.obj_clearing_time, b.obj_clearing_time, tol) &&
           close(a.obj_dg_output, b.obj_dg_output, tol);
}

}  // namespace

OptimizationTrace alternate(const Network& network, const std::vector<double>& available,
                            const OptimizationConfig& config)
{
    if (const auto v = validate(network); !v.empty()) {
        throw PreconditionError(fmt::format("invalid network: {}: {}", v.front().element, v.front().rule));
    }
    require_saving(config.study);
    dispatch_ceiling(network, available);  // size check

    const auto& study = config.study;
    // Dispatch and settings both work to the margins plus headroom; only the
    // evaluation uses the bare margins.
    StudyConfig settings_study = study;
    settings_study.margins.fuse_recloser += config.settings_headroom;
    settings_study.margins.recloser_recloser += config.settings_headroom;
    OptimizationTrace trace;
    Network net = network;
    FaultState state = analyze_fault_state(net, study);
    std::vector<CoordinationReport> reports;
    {
        auto rec = evaluate_iterate(net, state, study, &reports);
        rec.k = 0;
        rec.note = "initial";
        trace.iterations.push_back(std::move(rec));
    }
    for (const auto& l : state.fuse_links) trace.pair_labels.push_back(fuse_recloser_label(net, l));
    for (const auto& l : state.recloser_links) trace.pair_labels.push_back(recloser_pair_label(net, l));

    trace.stop_reason = StopReason::MaxIters;
    trace.diagnostic = fmt::format("no fixed point within {} iterations", config.max_iters);
    for (int k = 1; k <= config.max_iters; ++k) {
        const auto bounds = dispatch_bounds(net, state, settings_study);
        const auto dispatch = solve_dispatch(net, available, bounds, settings_study);
        // With no admissible dispatch under the current settings, curtail
        // fully and let the settings step try to recover.
        std::string note;
        if (!dispatch.feasible) note = "dispatch infeasible (" + dispatch.diagnostic + "); curtailed; ";
        net = with_dg_outputs(net, dispatch.p_out);
        state = analyze_fault_state(net, study);

        const auto settings = solve_settings(net, state, settings_study);
        if (settings.feasible) {
            net = apply_settings(net, settings.settings);
        } else {
            const auto windows = pickup_windows(net, state, study);
            if (const auto why = empty_window(net, windows); !why.empty()) {
                trace.stop_reason = StopReason::Infeasible;
                trace.diagnostic = why;
                break;
            }
            const auto relaxed = sequential_settings(
                net, state, settings_study, choose_pickups(windows, PickupChoice::Lower), true);
            net = apply_settings(net, relaxed.settings);
            note += fmt::format("settings infeasible ({}); relaxed", settings.violated_pair);
        }

        auto rec = evaluate_iterate(net, state, study, &reports);
        rec.k = k;
        rec.settings_lp_feasible = settings.feasible;
        rec.note = note;
        const auto& prev = trace.iterations.back();
        // The LP may miss the headroom by a hair while the dispatch creeps
        // toward its bound; a coordinated stationary point still counts.
        const bool fixed = dispatch.feasible && rec.coordinated &&
                           objectives_close(rec, prev, config.tol) &&
                           slacks_close(rec, prev, config.tol);
        const bool moved = !objectives_close(rec, prev, config.tol);
        const bool stuck = (!dispatch.feasible || (!settings.feasible && !rec.coordinated)) &&
                           prev.k >= 1 && !moved && slacks_close(rec, prev, config.tol);
        trace.iterations.push_back(std::move(rec));
        if (stuck) {
            trace.stop_reason = StopReason::Infeasible;
            trace.diagnostic = settings.feasible
                                   ? "dispatch infeasible: " + dispatch.diagnostic
                                   : fmt::format("settings stay infeasible at a stationary dispatch ({})",
                                                 settings.violated_pair);
            break;
        }
        if (fixed) {
            trace.converged = true;
            trace.stop_reason = StopReason::SlackFixedPoint;
            trace.diagnostic.clear();
            break;
        }
        if (moved) {
            const auto& cur = trace.iterations.back();
            const int n = static_cast<int>(trace.iterations.size());
            for (int lag = 2; lag <= config.cycle_window && n - 1 - lag >= 1; ++lag) {
                if (objectives_close(cur, trace.iterations[n - 1 - lag], config.tol)) {
                    trace.stop_reason = StopReason::MaxIters;
                    trace.diagnostic = fmt::format(
                        "objectives cycle with period {} at iteration {}", lag, k);
                    k = config.max_iters + 1;
                    break;
                }
            }
        }
    }
    trace.final_network = net;
    trace.final_reports = reports;
    return trace;
}

// ---------------------------------------------------------------- timeseries

namespace {

Network follow_profile(const Network& network, const std::vector<double>& ceiling)
{
    std::vector<double> p;
    for (std::size_t i = 0; i < network.dg_units.size(); ++i) {
        const auto& dg = network.dg_units[i];
        p.push_back(dg.curtailable ? std::min(dg.p_out, ceiling[i]) : ceiling[i]);
    }
    return with_dg_outputs(network, p);
}

}  // namespace

TimeseriesResult run_timeseries(const Network& network,
                                const std::vector<std::vector<double>>& profile,
                                const TimeseriesConfig& config)
{
    if (profile.empty()) {
        throw PreconditionError("time series needs at least one step");
    }
    if (config.dispatch_every < 1 || config.settings_every < config.dispatch_every ||
        config.settings_every % config.dispatch_every != 0) {
        throw PreconditionError("settings_every must be a positive multiple of dispatch_every");
    }
    const auto& study = config.optimization.study;
    const double tol = config.optimization.tol;
    // Re-dispatch between settings updates keeps the headroom, so fault-state
    // drift inside the dispatch fixed point cannot eat into the margin itself.
    StudyConfig held_study = study;
    held_study.margins.fuse_recloser += config.optimization.settings_headroom;

    TimeseriesResult result;
    Network net = network;
    for (std::size_t t = 0; t < profile.size(); ++t) {
        const int step = static_cast<int>(t);
        StepRecord rec;
        rec.step = step;
        rec.available = profile[t];
        const auto ceiling = dispatch_ceiling(net, profile[t]);
        Network candidate = follow_profile(net, ceiling);
        std::string failure;

        try {
            if (step % config.settings_every == 0) {
                const auto trace = alternate(candidate, profile[t], config.optimization);
                if (trace.converged) {
                    candidate = trace.final_network;
                } else {
                    failure = fmt::format("{}: {}", to_string(trace.stop_reason), trace.diagnostic);
                }
                rec.settings_updated = true;
                rec.dispatched = true;
            } else if (step % config.dispatch_every == 0) {
                rec.dispatched = true;
                for (int it = 0; it < config.optimization.max_iters; ++it) {
                    const auto state = analyze_fault_state(candidate, study);
                    const auto bounds = dispatch_bounds(candidate, state, held_study);
                    const auto d = solve_dispatch(candidate, profile[t], bounds, held_study);
                    if (!d.feasible) {
                        failure = "dispatch infeasible: " + d.diagnostic;
                        break;
                    }
                    double change = 0.0;
                    for (std::size_t i = 0; i < d.p_out.size(); ++i) {
                        change = std::max(change, std::abs(d.p_out[i] - candidate.dg_units[i].p_out));
                    }
                    candidate = with_dg_outputs(candidate, d.p_out);
                    if (change < tol) break;
                }
            }
        } catch (const DivergenceError& e) {
            failure = e.what();
        }

        if (failure.empty()) {
            const auto state = analyze_fault_state(candidate, study);
            std::vector<CoordinationReport> reps;
            const auto it = evaluate_iterate(candidate, state, study, &reps);
            if (!it.coordinated) {
                for (std::size_t i = 0; i < reps.size(); ++i) {
                    if (reps[i].failure_mode != FailureMode::None) {
                        failure = fmt::format("{}: {} (slack {:.3g} s)", reps[i].pair_label,
                                              to_string(reps[i].failure_mode), it.slacks[i]);
                        break;
                    }
                }
            }
        }

        if (failure.empty()) {
            net = candidate;
            rec.status = "ok";
        } else {
            rec.feasible = false;
            rec.status = "held: " + failure;
            result.degraded = true;
        }
        const auto state = analyze_fault_state(net, study);
        const auto it = evaluate_iterate(net, state, study);
        rec.dg_outputs = it.dg_outputs;
        rec.settings = it.settings;
        rec.total_clearing_time = it.obj_clearing_time;
        rec.worst_slack = it.worst_slack;
        result.steps.push_back(std::move(rec));
    }
    result.final_network = net;
    return result;
}

}  // namespace protcoord
