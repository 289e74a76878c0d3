// protcoord: power flow, fault, coordination and optimization studies on
// radial feeders with DG. Exit codes: 0 ok, 1 infeasible/diverged, 2 input error.

#include "protcoord/errors.hpp"
#include "protcoord/scenario.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace {

struct Args {
    std::string network;
    std::string scenario;
    std::string out_dir;
    std::string location;
    std::optional<double> tol;
    std::optional<int> max_iters;
    std::string curve_family;
    std::string margins;
};

void add_common(CLI::App* cmd, Args& a)
{
    cmd->add_option("--network", a.network, "network file (JSON); default scenario settings");
    cmd->add_option("--scenario", a.scenario, "scenario file (JSON)");
    cmd->add_option("--out-dir", a.out_dir, "directory for CSV tables and report.json");
    cmd->add_option("--tol", a.tol, "optimization convergence tolerance");
    cmd->add_option("--max-iters", a.max_iters, "optimization iteration limit");
    cmd->add_option("--curve-family", a.curve_family, "use this TCI family for every recloser curve");
    cmd->add_option("--margins", a.margins, "coordination margins FR,RR in seconds");
}

protcoord::Scenario load(const Args& a)
{
    using namespace protcoord;
    if (a.network.empty() == a.scenario.empty()) {
        throw InputError("give exactly one of --network or --scenario");
    }
    Scenario sc = a.scenario.empty() ? scenario_for_network(a.network) : load_scenario(a.scenario);
    Overrides o;
    o.tol = a.tol;
    o.max_iters = a.max_iters;
    if (!a.curve_family.empty()) o.curve_family = a.curve_family;
    if (!a.margins.empty()) o.margins = parse_margins(a.margins);
    apply_overrides(sc, o);
    return sc;
}

}  // namespace

int main(int argc, char** argv)
{
    using namespace protcoord;
    CLI::App app{"Protection coordination studies for radial feeders with distributed generation"};
    app.require_subcommand(1);
    Args args;

    auto* pf = app.add_subcommand("powerflow", "DistFlow load flow");
    auto* fault = app.add_subcommand("fault", "fault currents, DG contributions and disparities");
    auto* coord = app.add_subcommand("coordinate", "coordination verdict for every device pair");
    auto* opt = app.add_subcommand("optimize", "alternating settings/dispatch optimization");
    auto* ts = app.add_subcommand("timeseries", "optimization over a DG availability profile");
    for (auto* cmd : {pf, fault, coord, opt, ts}) add_common(cmd, args);
    fault->add_option("--location", args.location,
                      "node:<i>, lateral:<id> or lateral:<id>:far (default: last feeder node)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitInput;
    }

    try {
        const Scenario sc = load(args);
        const fs::path out(args.out_dir);
        RunReport report;
        if (pf->parsed()) {
            report = cmd_powerflow(sc, out);
        } else if (fault->parsed()) {
            std::optional<FaultLocation> loc;
            if (!args.location.empty()) loc = parse_fault_location(args.location);
            report = cmd_fault(sc, loc, out);
        } else if (coord->parsed()) {
            report = cmd_coordinate(sc, out);
        } else if (opt->parsed()) {
            report = cmd_optimize(sc, out);
        } else {
            report = cmd_timeseries(sc, out);
        }
        std::cout << report.text;
        for (const auto& m : args.out_dir.empty() ? std::vector<ManifestEntry>{} : report.manifest) {
            std::cout << "wrote " << (out / m.path).string() << " (" << m.rows << " rows)\n";
        }
        return report.exit_code;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailed;
    }
}
