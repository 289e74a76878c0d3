#pragma once

// Fixture loading and the independent oracles shared by the unit tests and
// the acceptance runner. Oracles use only the formulas they check, never the
// library routine under test.

#include "protcoord/io.hpp"
#include "protcoord/optimizer.hpp"

#include <cmath>
#include <complex>
#include <random>
#include <string>
#include <vector>

namespace testsupport {

using namespace protcoord;

inline const Library& library()
{
    static const Library lib = load_library(default_data_dir() / "curve_families.json",
                                            default_data_dir() / "fuse_curves.json");
    return lib;
}

inline fs::path fixture(const std::string& name) { return default_fixture_dir() / name; }

inline Network network(const std::string& name) { return load_network(fixture(name), library()); }

inline Scenario scenario(const std::string& name)
{
    const auto path = fixture(name);
    const auto text = read_text(path);
    if (text.find("protcoord-scenario") != std::string::npos) return load_scenario(path);
    return scenario_for_network(path);
}

/// Every network fixture shipped in fixtures/.
inline std::vector<std::string> network_fixtures()
{
    return {"no_load.json",       "five_node.json",        "five_node_dg.json",
            "five_node_margin.json", "toy_two_recloser.json", "toy_three_recloser.json",
            "ieee37.json",        "case_a_network.json",   "case_b_network.json"};
}

/// Every scenario fixture shipped in fixtures/.
inline std::vector<std::string> scenario_fixtures()
{
    return {"five_node_range.json", "case_a.json", "case_b.json"};
}

/// Fault state, pairs and verdicts of a network under a study config.
struct Checked {
    FaultState state;
    std::vector<PairInstance> pairs;
    std::vector<CoordinationReport> reports;
};

inline Checked check_network(const Network& net, const StudyConfig& config)
{
    Checked c;
    c.state = analyze_fault_state(net, config);
    if (config.range_basis == RangeBasis::Passive) {
        const auto passive = analyze_fault_state(without_dg(net), config);
        c.pairs = build_pairs(net, c.state, config, &passive);
    } else {
        c.pairs = build_pairs(net, c.state, config);
    }
    c.reports = check_all(c.pairs, config);
    return c;
}

inline Checked check_scenario(const Scenario& s) { return check_network(s.network, s.optimization.study); }

// ------------------------------------------------------------ builders

/// Chain of n nodes with identical sections and a stiff source.
inline Network chain(std::size_t n, double r = 0.01, double x = 0.02)
{
    Network net;
    for (std::size_t i = 0; i + 1 < n; ++i) net.sections.push_back({{i}, {i + 1}, r, x});
    net.source = {1.0, {0.0, 0.05}};
    return net;
}

inline void add_load(Network& net, std::size_t node, double p, double q, double r = 0.0,
                     double x = 0.0)
{
    Lateral lat;
    lat.id = net.laterals.size();
    lat.name = "L" + std::to_string(lat.id);
    lat.tap = {node};
    lat.load_p = p;
    lat.load_q = q;
    lat.r = r;
    lat.x = x;
    net.laterals.push_back(lat);
}

inline std::size_t add_dg(Network& net, std::size_t node, double rating, double p, double q,
                          MachineParams machine = SynchronousParams{}, bool curtailable = true)
{
    DGUnit dg;
    dg.id = net.dg_units.size();
    dg.name = "G" + std::to_string(dg.id);
    dg.tap = {node};
    dg.rating_s = rating;
    dg.p_out = p;
    dg.q_out = q;
    dg.machine = machine;
    dg.curtailable = curtailable;
    net.dg_units.push_back(dg);
    return dg.id;
}

inline void add_recloser(Network& net, std::size_t node, double pickup, double fast_dial,
                         const std::string& fast = "moderately_inverse",
                         const std::string& slow = "very_inverse", double slow_dial = 1.0)
{
    RecloserPlacement rec;
    rec.id = net.reclosers.size();
    rec.name = "R" + std::to_string(rec.id + 1);
    rec.node = {node};
    const auto& fam = library().families;
    rec.sequence.shots = {{ShotSpeed::Fast, fast, fam.at(fast), {pickup, fast_dial}},
                          {ShotSpeed::Fast, fast, fam.at(fast), {pickup, fast_dial}},
                          {ShotSpeed::Slow, slow, fam.at(slow), {pickup, slow_dial}}};
    net.reclosers.push_back(rec);
}

// ------------------------------------------------------------ power flow

struct TwoBus {
    double p0 = 0.0;
    double q0 = 0.0;
    double v1 = 0.0;
};

/// Sending-end fixed point P0 = Pd + r S^2 / V0^2 (and the Q twin), then the
/// voltage drop law, iterated until the step is below 1e-14.
inline TwoBus two_bus_oracle(double r, double x, double pd, double qd, double v0)
{
    TwoBus o{pd, qd, v0};
    for (int it = 0; it < 1000; ++it) {
        const double s2 = (o.p0 * o.p0 + o.q0 * o.q0) / (v0 * v0);
        const double p = pd + r * s2;
        const double q = qd + x * s2;
        const double step = std::abs(p - o.p0) + std::abs(q - o.q0);
        o.p0 = p;
        o.q0 = q;
        if (step < 1e-14) break;
    }
    const double s2 = (o.p0 * o.p0 + o.q0 * o.q0) / (v0 * v0);
    o.v1 = std::sqrt(v0 * v0 - 2.0 * (r * o.p0 + x * o.q0) + (r * r + x * x) * s2);
    return o;
}

// ------------------------------------------------------------ curves

inline double tci_formula(const TCIConstants& c, double dial, double pickup, double current)
{
    const double mult = current / pickup;
    const double denom = std::pow(mult, c.m) - c.c;
    if (!(denom > 0.0)) return INFINITY;
    return c.a * dial / denom + c.b * dial + c.k;
}

/// Log-log interpolation through the table, last segment continued upward,
/// infinite below the first point.
inline double loglog_table(const std::vector<CurvePoint>& pts, double current)
{
    if (current < pts.front().current) return INFINITY;
    std::size_t seg = pts.size() - 2;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        if (current <= pts[i + 1].current) {
            seg = i;
            break;
        }
    }
    const auto& a = pts[seg];
    const auto& b = pts[seg + 1];
    const double u = std::log(current / a.current) / std::log(b.current / a.current);
    return std::exp(std::log(a.seconds) + u * std::log(b.seconds / a.seconds));
}

inline double oracle_time(const DeviceCurve& d, double current)
{
    if (const auto* r = std::get_if<RecloserCurve>(&d)) {
        return tci_formula(r->curve, r->settings.time_dial, r->settings.pickup, current);
    }
    const auto& f = std::get<FuseDevice>(d);
    return current > 0.0 ? loglog_table(f.curve.points(f.which), current) : INFINITY;
}

/// Verdict of the pair from a dense evaluation of the range and margin
/// conditions on n log-spaced primary currents over [lo, hi].
inline FailureMode exhaustive_verdict(const CoordinationPair& pair, double lo, double hi,
                                      double offset, int n = 10000)
{
    auto gap = [&](double ip) -> double {
        const double tp = oracle_time(pair.primary, ip);
        const double ib = ip + offset;
        const double tb = ib > 0.0 ? oracle_time(pair.backup, ib) : INFINITY;
        if (!std::isfinite(tp)) return -INFINITY;
        if (!std::isfinite(tb)) return INFINITY;
        return tb - tp;
    };
    const double tol = 1e-9;
    for (double ip : {hi, lo}) {
        const double ib = ip + offset;
        const bool inside = ip >= pair.range.lo * (1 - tol) && ip <= pair.range.hi * (1 + tol) &&
                            ib >= pair.range.lo * (1 - tol) && ib <= pair.range.hi * (1 + tol);
        if (!inside || !(gap(ip) >= 0.0)) return FailureMode::RangeExceeded;
    }
    double worst = INFINITY;
    for (int i = 0; i < n; ++i) {
        const double u = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
        const double ip = lo == hi ? lo : lo * std::pow(hi / lo, u);
        worst = std::min(worst, gap(ip));
    }
    return worst >= pair.margin - 1e-12 ? FailureMode::None : FailureMode::MarginViolated;
}

// ------------------------------------------------------------ fault circuit

struct MeshResult {
    std::complex<double> i_source;
    std::complex<double> i_dg;
};

/// Two-loop circuit: source (es, zs) through z1 to a node where a machine
/// (eg, zg) joins, then zf to the bolted fault. Solved by Cramer's rule.
inline MeshResult two_loop_mesh(std::complex<double> es, std::complex<double> zs,
                                std::complex<double> z1, std::complex<double> eg,
                                std::complex<double> zg, std::complex<double> zf)
{
    const std::complex<double> a11 = zs + z1 + zf;
    const std::complex<double> a12 = zf;
    const std::complex<double> a22 = zg + zf;
    const std::complex<double> det = a11 * a22 - a12 * a12;
    return {(es * a22 - a12 * eg) / det, (a11 * eg - a12 * es) / det};
}

// ------------------------------------------------------------ settings grid

/// Dense restatement of the settings constraints for a dial vector: every
/// margin and fast/slow condition sampled at 200 points per decade.
struct GridProblem {
    struct Limit {
        std::size_t k;
        double g;
        double rhs;  // g * D <= rhs
    };
    struct Link {
        std::size_t b, p;
        double gb, gp, rhs;  // gb * Db - gp * Dp >= rhs
    };
    std::vector<double> cost;
    double constant = 0.0;
    std::vector<Limit> limits;
    std::vector<Link> links;
};

inline std::vector<double> log_points(double lo, double hi, int ppd = 200)
{
    if (hi <= lo) return {lo};
    const int n = static_cast<int>(std::ceil(std::log10(hi / lo) * ppd));
    std::vector<double> out;
    for (int i = 0; i <= n; ++i) out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / n));
    return out;
}

inline GridProblem grid_problem(const Network& net, const FaultState& st, const Margins& margins,
                                const std::vector<double>& pickups)
{
    GridProblem g;
    const auto& recs = net.reclosers;
    auto factor = [](const TCIConstants& c, double pickup, double i) {
        return tci_formula(c, 1.0, pickup, i) - c.k;
    };
    for (std::size_t k = 0; k < recs.size(); ++k) {
        const auto& shot = recs[k].sequence.shots.front();
        g.cost.push_back(factor(shot.curve, pickups[k], st.zones[k].range.i_max));
        g.constant += shot.curve.k;
    }
    for (const auto& l : st.fuse_links) {
        const auto& shot = recs[l.recloser].sequence.shots.front();
        const auto& fuse = *net.laterals[l.lateral].fuse;
        for (double i : log_points(l.i_recloser_min, l.i_recloser_max)) {
            const double tf = loglog_table(fuse.minimum_melting, i + l.delta_fr);
            if (!std::isfinite(tf)) continue;
            g.limits.push_back({l.recloser, factor(shot.curve, pickups[l.recloser], i),
                                tf - shot.curve.k - margins.fuse_recloser});
        }
    }
    for (const auto& l : st.recloser_links) {
        const auto& bs = recs[l.backup].sequence.shots.front();
        const auto& ps = recs[l.primary].sequence.shots.front();
        for (double i : log_points(l.i_primary_min, l.i_primary_max)) {
            const double gb = factor(bs.curve, pickups[l.backup], i - l.delta_rr);
            if (!std::isfinite(gb)) continue;
            g.links.push_back({l.backup, l.primary, gb, factor(ps.curve, pickups[l.primary], i),
                               margins.recloser_recloser + ps.curve.k - bs.curve.k});
        }
    }
    for (std::size_t k = 0; k < recs.size(); ++k) {
        const auto& seq = recs[k].sequence.shots;
        const TripShot* slow = nullptr;
        for (const auto& s : seq) {
            if (s.speed == ShotSpeed::Slow) {
                slow = &s;
                break;
            }
        }
        if (seq.front().speed != ShotSpeed::Fast || !slow) continue;
        const auto& z = st.zones[k].range;
        for (double i : log_points(z.i_min, z.i_max)) {
            const double ts = tci_formula(slow->curve, slow->settings.time_dial, pickups[k], i);
            g.limits.push_back({k, factor(seq.front().curve, pickups[k], i),
                                ts - seq.front().curve.k});
        }
    }
    return g;
}

struct GridBest {
    bool found = false;
    std::vector<double> dials;
    double objective = INFINITY;
};

inline double grid_dial(int i) { return (100.0 + i) / 1000.0; }

/// Exhaustive search over the 1e-3 dial grid for up to three reclosers. For
/// three, the head recloser's dial is the least grid value meeting its
/// constraints: every remaining condition on it is a lower bound or an upper
/// bound and the objective grows with it, so no other grid value can win.
inline GridBest grid_search(const GridProblem& g)
{
    const std::size_t n = g.cost.size();
    constexpr int kSteps = 901;
    GridBest best;
    auto limits_ok = [&](std::size_t k, double d) {
        for (const auto& l : g.limits) {
            if (l.k == k && l.g * d > l.rhs + 1e-12) return false;
        }
        return true;
    };
    auto links_ok = [&](const std::vector<double>& d, std::size_t backup) {
        for (const auto& l : g.links) {
            if (l.b == backup && l.gb * d[l.b] - l.gp * d[l.p] < l.rhs - 1e-12) return false;
        }
        return true;
    };
    auto consider = [&](const std::vector<double>& d) {
        double obj = g.constant;
        for (std::size_t k = 0; k < n; ++k) obj += g.cost[k] * d[k];
        if (obj < best.objective) {
            best = {true, d, obj};
        }
    };
    std::vector<double> d(n);
    if (n == 1) {
        for (int i = 0; i < kSteps; ++i) {
            d[0] = grid_dial(i);
            if (limits_ok(0, d[0])) consider(d);
        }
    } else if (n == 2) {
        for (int i1 = 0; i1 < kSteps; ++i1) {
            d[1] = grid_dial(i1);
            if (!limits_ok(1, d[1])) continue;
            for (int i0 = 0; i0 < kSteps; ++i0) {
                d[0] = grid_dial(i0);
                if (limits_ok(0, d[0]) && links_ok(d, 0)) consider(d);
            }
        }
    } else if (n == 3) {
        for (int i2 = 0; i2 < kSteps; ++i2) {
            d[2] = grid_dial(i2);
            if (!limits_ok(2, d[2])) continue;
            for (int i1 = 0; i1 < kSteps; ++i1) {
                d[1] = grid_dial(i1);
                if (!limits_ok(1, d[1]) || !links_ok(d, 1)) continue;
                double need = 0.1;
                for (const auto& l : g.links) {
                    if (l.b == 0) need = std::max(need, (l.rhs + l.gp * d[l.p]) / l.gb);
                }
                int i0 = std::max(0, static_cast<int>(std::ceil(need * 1000.0 - 1e-9)) - 100);
                while (i0 < kSteps && !(d[0] = grid_dial(i0), links_ok(d, 0))) ++i0;
                if (i0 < kSteps && limits_ok(0, d[0])) consider(d);
            }
        }
    }
    return best;
}

}  // namespace testsupport
