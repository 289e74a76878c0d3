#include "doctest.h"
#include "support.hpp"

#include "protcoord/errors.hpp"

using namespace protcoord;
using namespace testsupport;

namespace {

const CoordinationReport& report(const Checked& c, const std::string& label)
{
    for (const auto& r : c.reports) {
        if (r.pair_label == label) return r;
    }
    FAIL("no pair " << label);
    throw 0;
}

CoordinationPair recloser_pair(double margin)
{
    const auto& fam = library().families;
    CoordinationPair p;
    p.label = "B/P";
    p.kind = PairKind::RecloserRecloser;
    p.primary = RecloserCurve{1, "P", fam.at("very_inverse"), {1.0, 0.1}};
    p.backup = RecloserCurve{0, "B", fam.at("very_inverse"), {1.5, 0.5}};
    p.margin = margin;
    p.range = {4.0, 20.0};
    return p;
}

}  // namespace

TEST_CASE("five-node feeder without DG coordinates")
{
    const auto c = check_scenario(scenario("five_node.json"));
    REQUIRE(c.reports.size() == 3);
    for (const auto& r : c.reports) {
        CHECK_MESSAGE(r.failure_mode == FailureMode::None, r.pair_label << ": " << r.trigger);
        CHECK(r.range_ok);
        CHECK(r.margin_ok);
        CHECK(r.worst_margin >= 0.0);
    }
}

TEST_CASE("DG fixture keeps every pair coordinated")
{
    const auto c = check_scenario(scenario("five_node_dg.json"));
    for (const auto& r : c.reports) CHECK(r.failure_mode == FailureMode::None);
}

TEST_CASE("large downstream machine violates the fuse-saving margin")
{
    const auto c = check_scenario(scenario("five_node_margin.json"));
    const auto& r = report(c, "R1/F1");
    CHECK(r.failure_mode == FailureMode::MarginViolated);
    CHECK(r.range_ok);
    CHECK_FALSE(r.margin_ok);
    CHECK(r.worst_margin < 0.1);
    CHECK(r.trigger.find("T_B - T_P") != std::string::npos);
}

TEST_CASE("passive ranges are exceeded once DG is connected")
{
    const auto c = check_scenario(scenario("five_node_range.json"));
    REQUIRE(c.reports.size() == 3);
    for (const auto& r : c.reports) {
        CHECK(r.failure_mode == FailureMode::RangeExceeded);
        CHECK_FALSE(r.range_ok);
        CHECK_FALSE(r.trigger.empty());
    }
}

TEST_CASE("recloser pairs get a positive backup delay and never lose margin to it")
{
    for (const auto& name : {"five_node_dg.json", "ieee37.json", "case_a_network.json"}) {
        const auto c = check_scenario(scenario(name));
        for (std::size_t i = 0; i < c.pairs.size(); ++i) {
            const auto& inst = c.pairs[i];
            if (inst.pair.kind != PairKind::RecloserRecloser) continue;
            const double delta = inst.sweep.backup_offset;  // -dI_RR
            if (delta >= 0.0) continue;
            const auto d = backup_delay(inst.pair, delta, inst.binding_current);
            REQUIRE(d.has_value());
            CHECK(*d > 0.0);
            // Shrinking the backup current only slows the backup down.
            auto linked = inst.sweep;
            linked.backup_offset = 0.0;
            const auto without = check_pair(inst.pair, linked);
            CHECK(c.reports[i].worst_margin >= without.worst_margin - 1e-12);
        }
    }
}

TEST_CASE("backup delay")
{
    const auto p = recloser_pair(0.3);
    CHECK(*backup_delay(p, 0.0, 10.0) == 0.0);
    double prev = 0.0;
    for (double delta : {0.5, 1.0, 2.0, 4.0}) {
        // The backup curve falls, so a larger shift moves further from zero,
        // and a backup that sees less current is delayed.
        const double d = *backup_delay(p, delta, 10.0);
        CHECK(d < prev);
        CHECK(*backup_delay(p, -delta, 10.0) > 0.0);
        prev = d;
    }
    CHECK_FALSE(backup_delay(p, 10.0, 1.0).has_value());
}

TEST_CASE("coordination current margin inverts the backup curve")
{
    const auto p = recloser_pair(0.3);
    const double ib = 5.0;
    const double tp = oracle_time(p.primary, ib);
    double prev = INFINITY;
    for (double dt : {0.2, 0.3, 0.5, 0.8}) {
        const double m = coordination_current_margin(p, dt, ib);
        CHECK(oracle_time(p.backup, ib + m) == doctest::Approx(tp + dt).epsilon(1e-9));
        CHECK(m < prev);  // a larger gap leaves less room
        prev = m;
    }
    CHECK_THROWS_AS(coordination_current_margin(p, -0.1, ib), UnreachableTimeError);
}

TEST_CASE("sweeps")
{
    const auto s = log_sweep(2.0, 200.0, 50, 0.5);
    CHECK(s.primary_currents.front() == 2.0);
    CHECK(s.primary_currents.back() == 200.0);
    CHECK(s.primary_currents.size() >= 101);
    CHECK(s.backup_offset == 0.5);
    CHECK(log_sweep(3.0, 3.0, 50, 0.0).primary_currents.size() == 1);

    const auto p = recloser_pair(0.3);
    CHECK_THROWS_AS(check_pair(p, {{4.0, 8.0}, 0.0}), SweepGapError);
    CHECK_THROWS_AS(check_pair(p, {{}, 0.0}), SweepGapError);
    CHECK_THROWS_AS(check_pair(p, {{5.0, 5.0}, 0.0}), SweepGapError);
    CHECK_NOTHROW(check_pair(p, log_sweep(4.0, 8.0, 200, 0.0)));
}

TEST_CASE("hand-built pair verdicts")
{
    auto p = recloser_pair(0.3);
    const auto sweep = log_sweep(4.0, 20.0, 200, 0.0);
    const auto ok = check_pair(p, sweep);
    CHECK(ok.failure_mode == exhaustive_verdict(p, 4.0, 20.0, 0.0));
    CHECK(ok.backup_delay.has_value());

    p.margin = 10.0;
    CHECK(check_pair(p, sweep).failure_mode == FailureMode::MarginViolated);

    p.margin = 0.3;
    p.range = {4.0, 15.0};
    const auto out = check_pair(p, sweep);
    CHECK(out.failure_mode == FailureMode::RangeExceeded);
    CHECK_FALSE(out.range_ok);
}

TEST_CASE("sweep verdicts agree with a dense independent evaluation")
{
    for (const auto& name : network_fixtures()) {
        const auto c = check_scenario(scenario(name));
        for (std::size_t i = 0; i < c.pairs.size(); ++i) {
            const auto& inst = c.pairs[i];
            const auto& cur = inst.sweep.primary_currents;
            CHECK_MESSAGE(exhaustive_verdict(inst.pair, cur.front(), cur.back(),
                                             inst.sweep.backup_offset) == c.reports[i].failure_mode,
                          name << " " << inst.pair.label);
        }
    }
}

TEST_CASE("independent-current mode is never more lenient")
{
    for (const auto& name : {"five_node_dg.json", "ieee37.json"}) {
        auto s = scenario(name);
        const auto linked = check_scenario(s);
        s.optimization.study.coordination.independent_currents = true;
        const auto strict = check_scenario(s);
        for (std::size_t i = 0; i < linked.reports.size(); ++i) {
            CHECK(strict.reports[i].worst_margin <= linked.reports[i].worst_margin + 1e-12);
        }
    }
}

TEST_CASE("coordinated fuse-saving pairs keep the fast curve below melting")
{
    for (const auto& name : network_fixtures()) {
        const auto c = check_scenario(scenario(name));
        for (std::size_t i = 0; i < c.pairs.size(); ++i) {
            const auto& inst = c.pairs[i];
            if (inst.pair.kind != PairKind::FuseRecloser || c.reports[i].failure_mode != FailureMode::None) {
                continue;
            }
            for (double ip : inst.sweep.primary_currents) {
                CHECK(oracle_time(inst.pair.primary, ip) <
                      oracle_time(inst.pair.backup, ip + inst.sweep.backup_offset));
            }
        }
    }
}
