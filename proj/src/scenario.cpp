#include "protcoord/scenario.hpp"

#include "protcoord/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace protcoord {

using nlohmann::json;

void apply_overrides(Scenario& sc, const Overrides& o)
{
    if (o.tol) {
        if (!(*o.tol > 0.0)) throw InputError("--tol must be positive");
        sc.optimization.tol = *o.tol;
    }
    if (o.max_iters) {
        if (*o.max_iters < 1) throw InputError("--max-iters must be at least 1");
        sc.optimization.max_iters = *o.max_iters;
    }
    if (o.margins) {
        if (!(o.margins->fuse_recloser > 0.0) || !(o.margins->recloser_recloser > 0.0)) {
            throw InputError("--margins must be positive");
        }
        sc.optimization.study.margins = *o.margins;
    }
    if (o.curve_family) {
        if (!sc.library.families.families.count(*o.curve_family)) {
            throw InputError(fmt::format("--curve-family: unknown family '{}'", *o.curve_family));
        }
        sc.network = with_curve_family(sc.network, sc.library.families, *o.curve_family);
    }
    sc.timeseries.optimization = sc.optimization;
}

Margins parse_margins(const std::string& text)
{
    const auto comma = text.find(',');
    if (comma == std::string::npos) throw InputError("--margins expects FR,RR in seconds");
    try {
        std::size_t used = 0;
        Margins m;
        const std::string fr = text.substr(0, comma);
        const std::string rr = text.substr(comma + 1);
        m.fuse_recloser = std::stod(fr, &used);
        if (used != fr.size()) throw std::invalid_argument(fr);
        m.recloser_recloser = std::stod(rr, &used);
        if (used != rr.size()) throw std::invalid_argument(rr);
        return m;
    } catch (const std::logic_error&) {
        throw InputError(fmt::format("--margins: cannot parse '{}'", text));
    }
}

namespace {

class Output {
public:
    Output(const fs::path& dir, RunReport& report) : dir_(dir), report_(report)
    {
        if (!dir_.empty()) {
            std::error_code ec;
            fs::create_directories(dir_, ec);
            if (ec) throw InputError(fmt::format("{}: cannot create directory", dir_.string()));
        }
    }

    template <class Writer>
    void table(const std::string& name, Writer&& write)
    {
        std::ostringstream ss;
        const std::size_t rows = write(ss);
        report_.manifest.push_back({name, rows});
        save(name, ss.str());
    }

    void json_file(const std::string& name, const json& j)
    {
        save(name, j.dump(2) + "\n");
    }

    void finish()
    {
        json manifest = json::array();
        for (const auto& m : report_.manifest) manifest.push_back({{"path", m.path}, {"rows", m.rows}});
        const json report{{"command", report_.command},
                          {"exit_code", report_.exit_code},
                          {"summary", report_.summary},
                          {"manifest", manifest}};
        save("report.json", report.dump(2) + "\n");
    }

private:
    void save(const std::string& name, const std::string& content)
    {
        if (dir_.empty()) return;
        const fs::path p = dir_ / name;
        std::ofstream out(p, std::ios::binary);
        out << content;
        if (!out) throw InputError(fmt::format("{}: cannot write", p.string()));
    }

    fs::path dir_;
    RunReport& report_;
};

json settings_json(const Network& net, const std::vector<RecloserSettings>& settings)
{
    json out = json::object();
    const double ib = net.bases.current_a();
    for (std::size_t k = 0; k < settings.size(); ++k) {
        out[net.reclosers[k].name] = {{"pickup_a", settings[k].pickup * ib},
                                      {"time_dial", settings[k].time_dial}};
    }
    return out;
}

json dispatch_json(const Network& net, const std::vector<double>& p)
{
    json out = json::object();
    for (std::size_t i = 0; i < p.size(); ++i) {
        out[net.dg_units[i].name] = p[i] * net.bases.mva * 1000.0;
    }
    return out;
}

std::string pair_lines(const std::vector<CoordinationReport>& reports)
{
    std::string text;
    for (const auto& r : reports) {
        text += fmt::format("  {:<24} {:<15} worst margin {:>10} s", r.pair_label,
                            to_string(r.failure_mode), fmt_num(r.worst_margin, 4));
        if (!r.trigger.empty()) text += "  (" + r.trigger + ")";
        text += '\n';
    }
    return text;
}

json reports_json(const std::vector<CoordinationReport>& reports)
{
    json out = json::array();
    for (const auto& r : reports) {
        json j{{"pair", r.pair_label},
               {"failure_mode", to_string(r.failure_mode)},
               {"range_ok", r.range_ok},
               {"margin_ok", r.margin_ok},
               {"worst_margin_s", std::isfinite(r.worst_margin) ? json(r.worst_margin) : json(fmt_num(r.worst_margin))}};
        if (r.backup_delay) j["backup_delay_s"] = *r.backup_delay;
        out.push_back(j);
    }
    return out;
}

bool all_coordinated(const std::vector<CoordinationReport>& reports)
{
    return std::all_of(reports.begin(), reports.end(),
                       [](const CoordinationReport& r) { return r.failure_mode == FailureMode::None; });
}

struct PairStudy {
    FaultState state;
    std::vector<PairInstance> pairs;
    std::vector<CoordinationReport> reports;
};

PairStudy study_pairs(const Network& net, const StudyConfig& config)
{
    PairStudy s;
    s.state = analyze_fault_state(net, config);
    std::optional<FaultState> passive;
    if (config.range_basis == RangeBasis::Passive) passive = analyze_fault_state(without_dg(net), config);
    s.pairs = build_pairs(net, s.state, config, passive ? &*passive : nullptr);
    s.reports = check_all(s.pairs, config);
    return s;
}

template <class Body>
RunReport run(const std::string& command, const fs::path& out_dir, Body&& body)
{
    RunReport report;
    report.command = command;
    Output out(out_dir, report);
    try {
        body(report, out);
    } catch (const DivergenceError& e) {
        report.exit_code = kExitFailed;
        report.summary["error"] = e.what();
        report.text += fmt::format("diverged: {}\n", e.what());
    }
    out.finish();
    return report;
}

}  // namespace

std::size_t write_zones_csv(std::ostream& os, const Network& net, const PowerFlowSolution& sol,
                            const FaultOptions& options)
{
    const double ib = net.bases.current_a();
    os << "# protcoord zones v1\n";
    os << "device,id,name,i_max_a,at_max,i_min_a,at_min\n";
    std::size_t rows = 0;
    auto row = [&](const char* kind, std::size_t id, const std::string& name, const FaultCurrentRange& r) {
        os << fmt::format("{},{},{},{},{},{},{}\n", kind, id, name, fmt_num(r.i_max * ib, 4),
                          to_string(r.at_max), fmt_num(r.i_min * ib, 4), to_string(r.at_min));
        ++rows;
    };
    for (const auto& rec : net.reclosers) {
        row("recloser", rec.id, rec.name, max_min_fault_currents(net, sol, DeviceRef::recloser(rec.id), options));
    }
    for (const auto& lat : net.laterals) {
        if (!lat.fuse) continue;
        row("fuse", lat.id, lat.name, max_min_fault_currents(net, sol, DeviceRef::fuse(lat.id), options));
    }
    return rows;
}

RunReport cmd_powerflow(const Scenario& sc, const fs::path& out_dir)
{
    return run("powerflow", out_dir, [&](RunReport& report, Output& out) {
        const auto& net = sc.network;
        const auto sol = solve_distflow(net, sc.optimization.study.power_flow);
        out.table("powerflow.csv", [&](std::ostream& os) { return write_powerflow_csv(os, net, sol); });

        const double s_kva = net.bases.mva * 1000.0;
        const auto vmin = std::min_element(sol.v_mag.begin(), sol.v_mag.end());
        const std::size_t vmin_node = static_cast<std::size_t>(vmin - sol.v_mag.begin());
        report.summary = {{"converged", sol.converged},
                          {"iterations", sol.iterations},
                          {"max_mismatch_pu", sol.max_mismatch},
                          {"p_head_kw", sol.p_head * s_kva},
                          {"q_head_kvar", sol.q_head * s_kva},
                          {"v_min_pu", *vmin},
                          {"v_min_bus", net.node_label(NodeId{vmin_node})}};
        report.text = fmt::format("power flow: {} after {} iterations (mismatch {:.2e} pu)\n",
                                  sol.converged ? "converged" : "NOT converged", sol.iterations,
                                  sol.max_mismatch);
        report.text += fmt::format("substation: {} kW, {} kvar\n", fmt_num(sol.p_head * s_kva, 2),
                                   fmt_num(sol.q_head * s_kva, 2));
        report.text += fmt::format("{:>4}  {:<8} {:>10} {:>11}\n", "node", "bus", "V (pu)", "angle (deg)");
        for (std::size_t i = 0; i < net.node_count(); ++i) {
            report.text += fmt::format("{:>4}  {:<8} {:>10} {:>11}\n", i, net.node_label(NodeId{i}),
                                       fmt_num(sol.v_mag[i], 6), fmt_num(sol.v_angle[i] * 180.0 / M_PI, 4));
        }
        if (!sol.converged) report.exit_code = kExitFailed;
    });
}

RunReport cmd_fault(const Scenario& sc, const std::optional<FaultLocation>& location,
                    const fs::path& out_dir)
{
    return run("fault", out_dir, [&](RunReport& report, Output& out) {
        const auto& net = sc.network;
        const auto& config = sc.optimization.study;
        const auto sol = solve_distflow(net, config.power_flow);
        if (!sol.converged) {
            throw DivergenceError("", "pre-fault power flow did not converge");
        }
        const FaultLocation loc = location.value_or(FaultLocation::node(net.node_count() - 1));
        if (loc.on_lateral() ? loc.index >= net.laterals.size() : loc.index >= net.node_count()) {
            throw InputError(fmt::format("--location {}: no such element", to_string(loc)));
        }
        const auto study = solve_fault(net, sol, loc, config.fault);
        out.table("fault.csv", [&](std::ostream& os) { return write_fault_csv(os, net, study); });
        out.table("zones.csv", [&](std::ostream& os) { return write_zones_csv(os, net, sol, config.fault); });

        const double ib = net.bases.current_a();
        json rec = json::object();
        report.text = fmt::format("fault at {}: {} A total, substation {} A\n", to_string(loc),
                                  fmt_num(study.i_fault * ib, 1), fmt_num(study.i_substation * ib, 1));
        for (const auto& [k, i] : study.i_recloser) {
            const auto& name = net.reclosers[k].name;
            rec[name] = {{"current_a", i * ib},
                         {"delta_fr_a", study.delta_fr.at(k) * ib},
                         {"delta_rr_a", study.delta_rr.at(k) * ib}};
            report.text += fmt::format("  {:<8} {:>10} A   dI_FR {:>9} A   dI_RR {:>9} A\n", name,
                                       fmt_num(i * ib, 1), fmt_num(study.delta_fr.at(k) * ib, 1),
                                       fmt_num(study.delta_rr.at(k) * ib, 1));
        }
        json zones = json::object();
        report.text += "zone fault currents (max / min):\n";
        for (const auto& r : net.reclosers) {
            const auto z = max_min_fault_currents(net, sol, DeviceRef::recloser(r.id), config.fault);
            zones[r.name] = {{"i_max_a", z.i_max * ib}, {"i_min_a", z.i_min * ib}};
            report.text += fmt::format("  {:<8} {:>10} A  {:>10} A\n", r.name, fmt_num(z.i_max * ib, 1),
                                       fmt_num(z.i_min * ib, 1));
        }
        report.summary = {{"location", to_string(loc)},
                          {"i_fault_a", study.i_fault * ib},
                          {"i_substation_a", study.i_substation * ib},
                          {"reclosers", rec},
                          {"zones", zones}};
    });
}

RunReport cmd_coordinate(const Scenario& sc, const fs::path& out_dir)
{
    return run("coordinate", out_dir, [&](RunReport& report, Output& out) {
        const auto& net = sc.network;
        const auto s = study_pairs(net, sc.optimization.study);
        out.table("pairs.csv", [&](std::ostream& os) { return write_pairs_csv(os, net, s.pairs, s.reports); });
        out.table("curve_samples.csv",
                  [&](std::ostream& os) { return write_curve_samples_csv(os, net, s.reports); });
        const bool ok = all_coordinated(s.reports);
        report.summary = {{"coordinated", ok},
                          {"total_clearing_time_s", total_clearing_time(net, s.state)},
                          {"pairs", reports_json(s.reports)}};
        report.text = fmt::format("{} pairs, {}\n", s.reports.size(),
                                  ok ? "all coordinated" : "miscoordination found");
        report.text += pair_lines(s.reports);
    });
}

RunReport cmd_optimize(const Scenario& sc, const fs::path& out_dir)
{
    return run("optimize", out_dir, [&](RunReport& report, Output& out) {
        const auto trace = alternate(sc.network, sc.available, sc.optimization);
        const auto& net = trace.final_network;
        out.table("trace.csv", [&](std::ostream& os) { return write_trace_csv(os, net, trace); });
        const auto s = study_pairs(net, sc.optimization.study);
        out.table("pairs.csv", [&](std::ostream& os) { return write_pairs_csv(os, net, s.pairs, s.reports); });
        out.json_file("final_state.json", state_to_json(net));

        const auto& last = trace.iterations.back();
        report.summary = {{"converged", trace.converged},
                          {"stop_reason", to_string(trace.stop_reason)},
                          {"diagnostic", trace.diagnostic},
                          {"iterations", trace.iterations.size() - 1},
                          {"total_clearing_time_s", last.obj_clearing_time},
                          {"total_dg_kw", last.obj_dg_output * net.bases.mva * 1000.0},
                          {"settings", settings_json(net, last.settings)},
                          {"dispatch_kw", dispatch_json(net, last.dg_outputs)},
                          {"pairs", reports_json(s.reports)}};
        report.text = fmt::format("alternating optimization: {} ({}) after {} iterations\n",
                                  trace.converged ? "converged" : "stopped", to_string(trace.stop_reason),
                                  trace.iterations.size() - 1);
        if (!trace.diagnostic.empty()) report.text += "  " + trace.diagnostic + "\n";
        report.text += fmt::format("total clearing time {} s, DG output {} kW\n",
                                   fmt_num(last.obj_clearing_time, 4),
                                   fmt_num(last.obj_dg_output * net.bases.mva * 1000.0, 1));
        for (std::size_t k = 0; k < last.settings.size(); ++k) {
            report.text += fmt::format("  {:<8} TDS {}  pickup {} A\n", net.reclosers[k].name,
                                       fmt_num(last.settings[k].time_dial, 4),
                                       fmt_num(last.settings[k].pickup * net.bases.current_a(), 1));
        }
        for (std::size_t i = 0; i < last.dg_outputs.size(); ++i) {
            report.text += fmt::format("  {:<8} {} kW\n", net.dg_units[i].name,
                                       fmt_num(last.dg_outputs[i] * net.bases.mva * 1000.0, 1));
        }
        report.text += pair_lines(s.reports);
        if (!trace.converged) report.exit_code = kExitFailed;
    });
}

RunReport cmd_timeseries(const Scenario& sc, const fs::path& out_dir)
{
    return run("timeseries", out_dir, [&](RunReport& report, Output& out) {
        if (sc.profile.empty()) throw InputError("timeseries needs at least one profile step");
        const auto result = run_timeseries(sc.network, sc.profile, sc.timeseries);
        const auto& net = result.final_network;
        out.table("timeseries.csv", [&](std::ostream& os) { return write_timeseries_csv(os, net, result); });
        out.json_file("final_state.json", state_to_json(net));

        json failed = json::array();
        std::size_t settings_updates = 0;
        for (const auto& st : result.steps) {
            if (!st.feasible) failed.push_back(st.step);
            if (st.settings_updated) ++settings_updates;
        }
        report.summary = {{"steps", result.steps.size()},
                          {"degraded", result.degraded},
                          {"failed_steps", failed},
                          {"settings_updates", settings_updates},
                          {"dispatch_every", sc.timeseries.dispatch_every},
                          {"settings_every", sc.timeseries.settings_every}};
        report.text = fmt::format("{} steps, dispatch every {}, settings every {}: {}\n", result.steps.size(),
                                  sc.timeseries.dispatch_every, sc.timeseries.settings_every,
                                  result.degraded ? "DEGRADED" : "all steps feasible");
        const double s_kva = net.bases.mva * 1000.0;
        for (const auto& st : result.steps) {
            std::string dg;
            for (double p : st.dg_outputs) dg += fmt::format(" {:>9}", fmt_num(p * s_kva, 1));
            std::string tds;
            for (const auto& s : st.settings) tds += fmt::format(" {:>7}", fmt_num(s.time_dial, 4));
            report.text += fmt::format("  {:>3} {}{} | TDS{} | T {:>8} s  {}\n", st.step,
                                       st.settings_updated ? '*' : ' ', dg, tds,
                                       fmt_num(st.total_clearing_time, 4), st.status);
        }
        if (result.degraded) report.exit_code = kExitFailed;
    });
}

}  // namespace protcoord
