#include "doctest.h"
#include "support.hpp"

#include "protcoord/errors.hpp"
#include "protcoord/scenario.hpp"

#include <sstream>

using namespace protcoord;
using namespace testsupport;

namespace {

const char* kTiny = R"({
  "format": "protcoord-network", "version": 1, "name": "tiny",
  "bases": {"mva": 2.5, "kv": 4.8},
  "buses": ["A", "B"],
  "source": {"voltage_pu": 1.0, "r_ohm": 0.0, "x_ohm": 0.5},
  "sections": [{"from": "A", "to": "B", "r_ohm": 0.1, "x_ohm": 0.2}],
  "laterals": [{"name": "L", "tap": "B", "p_kw": 100, "q_kvar": 50}]
})";

Network tiny(const std::string& from = "", const std::string& to = "")
{
    std::string text = kTiny;
    if (!from.empty()) text.replace(text.find(from), from.size(), to);
    return parse_network(text, "tiny.json", library());
}

}  // namespace

TEST_CASE("network parsing converts to per-unit")
{
    const auto net = tiny();
    REQUIRE(net.node_count() == 2);
    CHECK(net.sections[0].r == doctest::Approx(0.1 / 9.216));
    CHECK(net.laterals[0].load_p == doctest::Approx(0.04));
    CHECK(net.source.impedance.imag() == doctest::Approx(0.5 / 9.216));
}

TEST_CASE("malformed networks are input errors")
{
    CHECK_THROWS_AS(parse_network("{", "x", library()), InputError);
    CHECK_THROWS_AS(tiny("\"version\": 1", "\"version\": 7"), InputError);
    CHECK_THROWS_AS(tiny("\"to\": \"B\"", "\"to\": \"Q\""), InputError);
    CHECK_THROWS_AS(tiny("\"p_kw\": 100", "\"p_kw\": \"lots\""), InputError);
    CHECK_THROWS_AS(tiny("\"name\": \"tiny\"", "\"name\": \"tiny\", \"colour\": 1"), InputError);
    CHECK_THROWS_AS(tiny("\"x_ohm\": 0.2", "\"x_ohm\": 0.0, \"r\": 0"), InputError);
    CHECK_THROWS_AS(tiny("\"r_ohm\": 0.1, \"x_ohm\": 0.2", "\"r_ohm\": 0.0, \"x_ohm\": 0.0"), InputError);
    try {
        tiny("\"to\": \"B\"", "\"to\": \"Q\"");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("tiny.json") != std::string::npos);
    }
}

TEST_CASE("every fixture loads and validates")
{
    for (const auto& name : network_fixtures()) {
        CHECK_MESSAGE(validate(network(name)).empty(), name);
    }
    for (const auto& name : scenario_fixtures()) {
        CHECK_NOTHROW(load_scenario(fixture(name)));
    }
    CHECK_THROWS_AS(load_scenario(fixture("five_node.json")), InputError);
    CHECK_THROWS_AS(load_network(fixture("missing.json"), library()), InputError);
}

TEST_CASE("margins and overrides")
{
    const auto m = parse_margins("0.2,0.4");
    CHECK(m.fuse_recloser == 0.2);
    CHECK(m.recloser_recloser == 0.4);
    CHECK_THROWS_AS(parse_margins("0.2"), InputError);
    CHECK_THROWS_AS(parse_margins("0.2,x"), InputError);

    auto s = scenario("five_node.json");
    Overrides o;
    o.tol = 1e-3;
    o.max_iters = 7;
    o.margins = m;
    o.curve_family = "extremely_inverse";
    apply_overrides(s, o);
    CHECK(s.optimization.tol == 1e-3);
    CHECK(s.optimization.max_iters == 7);
    CHECK(s.optimization.study.margins.recloser_recloser == 0.4);
    for (const auto& r : s.network.reclosers) {
        for (const auto& shot : r.sequence.shots) CHECK(shot.family == "extremely_inverse");
    }
    Overrides bad;
    bad.curve_family = "nonsense";
    CHECK_THROWS_AS(apply_overrides(s, bad), InputError);
    bad = {};
    bad.margins = parse_margins("-0.1,0.3");
    CHECK_THROWS_AS(apply_overrides(s, bad), InputError);
    bad = {};
    bad.max_iters = 0;
    CHECK_THROWS_AS(apply_overrides(s, bad), InputError);
}

TEST_CASE("operating state round trip")
{
    const auto s = scenario("case_a.json");
    const auto trace = alternate(s.network, s.available, s.optimization);
    const auto& net = trace.final_network;
    const auto state = state_to_json(net);
    const auto back = apply_state(s.network, state, "state");
    CHECK(current_settings(back) == current_settings(net));
    for (std::size_t i = 0; i < net.dg_units.size(); ++i) {
        CHECK(back.dg_units[i].p_out == net.dg_units[i].p_out);
        CHECK(back.dg_units[i].q_out == net.dg_units[i].q_out);
    }
    CHECK(state_to_json(back).dump() == state.dump());
}

TEST_CASE("table writers")
{
    const auto net = network("ieee37.json");
    const auto sol = solve_distflow(net);
    std::ostringstream os;
    CHECK(write_powerflow_csv(os, net, sol) == net.node_count());
    CHECK(os.str().find("\nnode,bus,v_pu,") != std::string::npos);
    CHECK(fmt_num(0.1) == "0.100000");
    CHECK(fmt_num(-0.0) == "0.000000");
    CHECK(fmt_num(1.23456789, 3) == "1.235");
}

TEST_CASE("command exit codes")
{
    CHECK(cmd_powerflow(scenario("ieee37.json"), {}).exit_code == kExitOk);
    CHECK(cmd_coordinate(scenario("five_node.json"), {}).exit_code == kExitOk);
    // A miscoordinated feeder is a finding, not a failure of the command.
    CHECK(cmd_coordinate(scenario("five_node_margin.json"), {}).exit_code == kExitOk);
    CHECK(cmd_optimize(scenario("case_a.json"), {}).exit_code == kExitOk);
    CHECK_THROWS_AS(cmd_fault(scenario("five_node.json"), FaultLocation::node(9), {}), InputError);
}

TEST_CASE("commands are deterministic")
{
    const auto s = scenario("case_a.json");
    const auto a = cmd_optimize(s, {});
    const auto b = cmd_optimize(s, {});
    CHECK(a.text == b.text);
    CHECK(a.summary.dump() == b.summary.dump());
}
