#include "doctest.h"
#include "support.hpp"

#include "protcoord/errors.hpp"

#include <random>

using namespace protcoord;
using namespace testsupport;

TEST_CASE("inverter below the shut-off threshold clamps")
{
    DGUnit dg;
    dg.rating_s = 1.0;
    dg.p_out = 0.8;
    dg.machine = InverterParams{3.0, 1.5, 0.5};  // prospective 2x rating
    const auto m = build_dg_fault_model(dg, 1.0);
    const auto* cc = std::get_if<ConstantCurrent>(&m.representation);
    REQUIRE(cc != nullptr);
    CHECK(cc->magnitude() == doctest::Approx(1.5));
}

TEST_CASE("inverter above the shut-off threshold disconnects")
{
    DGUnit dg;
    dg.rating_s = 1.0;
    dg.p_out = 0.8;
    dg.machine = InverterParams{3.0, 1.5, 0.2};  // prospective 5x rating
    CHECK(build_dg_fault_model(dg, 1.0).is_off());
    dg.machine = InverterParams{2.5, 1.5, 0.5};
    dg.p_out = 0.0;
    CHECK(build_dg_fault_model(dg, 1.0).is_off());  // idle
}

TEST_CASE("idle synchronous machine has emf equal to its terminal voltage")
{
    DGUnit dg;
    dg.rating_s = 0.5;
    dg.machine = SynchronousParams{0.2};
    const auto m = build_dg_fault_model(dg, 1.0);
    const auto& th = std::get<TheveninEquivalent>(m.representation);
    CHECK(th.emf == cplx(1.0, 0.0));
    CHECK(th.impedance == cplx(0.0, 0.4));
    CHECK_THROWS_AS(build_dg_fault_model(dg, 0.0), PreconditionError);
}

TEST_CASE("loaded synchronous machine emf")
{
    DGUnit dg;
    dg.rating_s = 1.0;
    dg.p_out = 0.6;
    dg.q_out = 0.2;
    dg.machine = SynchronousParams{0.25};
    const cplx v = std::polar(0.98, -0.05);
    const auto m = build_dg_fault_model(dg, v);
    const auto& th = std::get<TheveninEquivalent>(m.representation);
    CHECK(std::abs(th.emf - (v + cplx(0, 0.25) * std::conj(cplx(0.6, 0.2) / v))) < 1e-15);
}

TEST_CASE("asynchronous emf grows with output")
{
    DGUnit dg;
    dg.rating_s = 1.0;
    dg.machine = AsynchronousParams{0.2, 0.02};
    auto emf = [&](double p) {
        dg.p_out = p;
        return std::abs(std::get<TheveninEquivalent>(build_dg_fault_model(dg, 1.0).representation).emf);
    };
    CHECK(emf(0.0) == doctest::Approx(1.0));
    CHECK(emf(0.5) < emf(1.0));
}

TEST_CASE("no DG: disparities vanish and fuse and recloser see the same current")
{
    const auto net = network("five_node.json");
    const auto sol = solve_distflow(net);
    for (std::size_t l = 0; l < net.laterals.size(); ++l) {
        if (!net.laterals[l].fuse) continue;
        const auto st = solve_fault(net, sol, FaultLocation::lateral(l, true));
        for (const auto& [k, d] : st.delta_fr) CHECK(d == 0.0);
        for (const auto& [k, d] : st.delta_rr) CHECK(d == 0.0);
        const auto rec = *recloser_for_node(net, net.laterals[l].tap);
        CHECK(st.i_fuse.at(l) == doctest::Approx(st.i_recloser.at(rec)).epsilon(1e-12));
    }
}

TEST_CASE("three-node circuit against a two-loop mesh solve")
{
    auto net = chain(3, 0.02, 0.04);
    net.source = {1.0, {0.005, 0.06}};
    add_load(net, 1, 0.3, 0.1);
    add_load(net, 2, 0.2, 0.1, 0.03, 0.02);
    add_dg(net, 1, 0.5, 0.3, 0.1, SynchronousParams{0.18});
    add_recloser(net, 1, 0.5, 0.2);
    add_recloser(net, 2, 0.4, 0.1);
    REQUIRE(validate(net).empty());
    const auto sol = solve_distflow(net);

    const cplx v0 = sol.voltage({0}), v1 = sol.voltage({1});
    const cplx es = v0 + net.source.impedance * std::conj(cplx(sol.p_head, sol.q_head) / v0);
    const cplx xg(0.0, 0.18 / 0.5);
    const cplx eg = v1 + xg * std::conj(cplx(0.3, 0.1) / v1);
    const auto o = two_loop_mesh(es, net.source.impedance, {0.02, 0.04}, eg, xg,
                                 cplx(0.02, 0.04) + cplx(0.03, 0.02));

    const auto st = solve_fault(net, sol, FaultLocation::lateral(1, true));
    CHECK(std::abs(st.i_substation - std::abs(o.i_source)) < 1e-6);
    CHECK(std::abs(st.i_dg.at(0) - std::abs(o.i_dg)) < 1e-6);
    CHECK(std::abs(st.i_fault - std::abs(o.i_source + o.i_dg)) < 1e-6);
    // R1 at node 1 does not see the unit tapped there; R2 at node 2 does.
    CHECK(std::abs(st.i_recloser.at(0) - std::abs(o.i_source)) < 1e-6);
    CHECK(std::abs(st.i_recloser.at(1) - std::abs(o.i_source + o.i_dg)) < 1e-6);
    CHECK(st.delta_fr.at(0) == doctest::Approx(std::abs(o.i_dg)).epsilon(1e-9));
    CHECK(st.delta_fr.at(1) == 0.0);
}

TEST_CASE("disparity identities for random placements")
{
    const auto base = network("five_node.json");
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::size_t> node(0, 4), count(1, 3), kind(0, 2);
    std::uniform_real_distribution<double> frac(0.1, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        Network net = base;
        const std::size_t n = count(rng);
        for (std::size_t i = 0; i < n; ++i) {
            const double rating = 0.1 + 0.3 * frac(rng);
            const MachineParams m = kind(rng) == 0   ? MachineParams{SynchronousParams{0.2}}
                                    : kind(rng) == 1 ? MachineParams{AsynchronousParams{0.2, 0.02}}
                                                     : MachineParams{InverterParams{2.5, 1.5, 0.5}};
            add_dg(net, node(rng), rating, rating * frac(rng) * 0.9, 0.0, m);
        }
        const auto sol = solve_distflow(net);
        for (std::size_t loc = 0; loc < net.node_count(); ++loc) {
            const auto st = solve_fault(net, sol, FaultLocation::node(loc));
            for (std::size_t k = 0; k < net.reclosers.size(); ++k) {
                double fr = 0.0, rr = 0.0;
                for (const auto& dg : net.dg_units) {
                    if (dg.tap.index >= net.reclosers[k].node.index) fr += st.i_dg.at(dg.id);
                }
                for (auto id : recloser_span_dg(net, k)) rr += st.i_dg.at(id);
                CHECK(std::abs(st.delta_fr.at(k) - fr) < 1e-9);
                CHECK(std::abs(st.delta_rr.at(k) - rr) < 1e-9);
            }
        }
    }
}

TEST_CASE("passive fault current decays along the feeder")
{
    for (const auto& name : {"five_node.json", "ieee37.json"}) {
        const auto net = network(name);
        const auto sol = solve_distflow(net);
        double prev = INFINITY;
        for (std::size_t n = 0; n < net.node_count(); ++n) {
            const double i = solve_fault(net, sol, FaultLocation::node(n)).i_fault;
            CHECK(i <= prev);
            prev = i;
        }
    }
}

TEST_CASE("fault current equals the branch currents into the fault node")
{
    // KCL from the solved node voltages, independent of how the library sums
    // the source contributions.
    const auto net = network("five_node_dg.json");
    const auto sol = solve_distflow(net);
    const auto models = build_fault_models(net, sol);
    for (std::size_t f = 0; f < net.node_count(); ++f) {
        const auto st = solve_fault(net, sol, FaultLocation::node(f));
        const auto& v = st.node_voltages;
        CHECK(std::abs(v[f]) == 0.0);
        cplx into{0.0, 0.0};
        for (const auto& sec : net.sections) {
            const cplx z(sec.r, sec.x);
            if (sec.to.index == f) into += v[sec.from.index] / z;
            if (sec.from.index == f) into += v[sec.to.index] / z;
        }
        if (f == 0) into += substation_emf(net, sol) / net.source.impedance;
        for (const auto& m : models) {
            if (net.dg_units[m.dg_id].tap.index != f) continue;
            if (const auto* th = std::get_if<TheveninEquivalent>(&m.representation)) into += th->emf / th->impedance;
            if (const auto* cc = std::get_if<ConstantCurrent>(&m.representation)) into += cc->current;
        }
        CHECK(std::abs(std::abs(into) - st.i_fault) < 1e-6);

        // A recloser carries the current of the section entering its node.
        for (std::size_t k = 0; k < net.reclosers.size(); ++k) {
            const auto n = net.reclosers[k].node.index;
            if (n == 0 || f < n) continue;
            const auto& sec = net.sections[n - 1];
            const double through = std::abs((v[n - 1] - v[n]) / cplx(sec.r, sec.x));
            CHECK(std::abs(through - st.i_recloser.at(k)) < 1e-6);
        }
    }
    for (const auto& l : net.laterals) {
        if (l.r == 0.0 && l.x == 0.0) continue;
        const auto st = solve_fault(net, sol, FaultLocation::lateral(l.id, true));
        const double through = std::abs(st.node_voltages[l.tap.index] / cplx(l.r, l.x));
        CHECK(std::abs(through - st.i_fault) < 1e-6);
    }
}

TEST_CASE("DG beyond the fault does not change the recloser currents")
{
    const auto base = network("five_node.json");
    const auto sol = solve_distflow(base);
    auto net = base;
    add_dg(net, net.node_count() - 1, 0.3, 0.2, 0.0);
    for (std::size_t f = 0; f + 1 < net.node_count(); ++f) {
        const auto a = solve_fault(base, sol, FaultLocation::node(f));
        const auto b = solve_fault(net, sol, FaultLocation::node(f));
        for (const auto& [k, i] : a.i_recloser) CHECK(std::abs(b.i_recloser.at(k) - i) < 1e-12);
        CHECK(b.i_fault > a.i_fault);
    }
}

TEST_CASE("source contributions add up to the fault current")
{
    const auto net = network("five_node_dg.json");
    const auto sol = solve_distflow(net);
    for (std::size_t n = 0; n < net.node_count(); ++n) {
        const auto st = solve_fault(net, sol, FaultLocation::node(n));
        // Magnitudes bound the phasor sum from above.
        double sum = st.i_substation;
        for (const auto& [id, i] : st.i_dg) sum += i;
        CHECK(st.i_fault <= sum + 1e-6);
        CHECK(st.i_fault > st.i_substation);
    }
}

TEST_CASE("larger inverter clamp never lowers the upstream disparity")
{
    auto net = network("five_node_dg.json");
    const auto sol = solve_distflow(net);
    double prev = -1.0;
    for (double clamp : {1.25, 1.5, 1.75, 2.0}) {
        std::get<InverterParams>(net.dg_units[0].machine).k_clamp = clamp;
        const auto st = solve_fault(net, sol, FaultLocation::lateral(3, false));
        CHECK(st.delta_fr.at(0) >= prev);
        prev = st.delta_fr.at(0);
    }
}

TEST_CASE("zone currents equal a per-location sweep")
{
    const auto net = network("five_node_dg.json");
    const auto sol = solve_distflow(net);
    for (std::size_t k = 0; k < net.reclosers.size(); ++k) {
        const auto range = max_min_fault_currents(net, sol, DeviceRef::recloser(k));
        double hi = 0.0, lo = INFINITY;
        const auto end = recloser_zone_end(net, k).index;
        for (std::size_t n = net.reclosers[k].node.index; n <= end; ++n) {
            const double i = solve_fault(net, sol, FaultLocation::node(n)).i_recloser.at(k);
            hi = std::max(hi, i);
            lo = std::min(lo, i);
        }
        for (const auto& l : net.laterals) {
            if (l.tap.index < net.reclosers[k].node.index || l.tap.index > end) continue;
            for (bool far : {false, true}) {
                const double i = solve_fault(net, sol, FaultLocation::lateral(l.id, far)).i_recloser.at(k);
                hi = std::max(hi, i);
                lo = std::min(lo, i);
            }
        }
        CHECK(range.i_max == hi);
        CHECK(range.i_min == lo);
        CHECK(range.i_max >= range.i_min);
    }
}

TEST_CASE("fault impedance lowers the zone minimum")
{
    const auto net = network("five_node.json");
    const auto sol = solve_distflow(net);
    const auto bolted = max_min_fault_currents(net, sol, DeviceRef::recloser(1));
    const auto floor = max_min_fault_currents(net, sol, DeviceRef::recloser(1), {0.05});
    CHECK(floor.i_max == bolted.i_max);
    CHECK(floor.i_min < bolted.i_min);
    const auto fuse = max_min_fault_currents(net, sol, DeviceRef::fuse(3));
    CHECK(fuse.at_max == FaultLocation::lateral(3, false));
    CHECK(fuse.at_min == FaultLocation::lateral(3, true));
}

TEST_CASE("upstream-feeding DG raises the zone maximum")
{
    const auto base = network("five_node.json");
    auto net = base;
    add_dg(net, 0, 0.3, 0.2, 0.0);  // upstream of both reclosers
    const auto a = max_min_fault_currents(base, solve_distflow(base), DeviceRef::recloser(1));
    const auto b = max_min_fault_currents(net, solve_distflow(net), DeviceRef::recloser(1));
    CHECK(b.i_max >= a.i_max);
}

TEST_CASE("fault locations")
{
    CHECK(parse_fault_location("node:3") == FaultLocation::node(3));
    CHECK(parse_fault_location("lateral:2") == FaultLocation::lateral(2));
    CHECK(parse_fault_location("lateral:2:far") == FaultLocation::lateral(2, true));
    CHECK(to_string(FaultLocation::lateral(2, true)) == "lateral:2:far");
    CHECK_THROWS_AS(parse_fault_location("bus:1"), InputError);
    CHECK_THROWS_AS(parse_fault_location("node:x"), InputError);

    const auto net = network("five_node.json");
    const auto sol = solve_distflow(net);
    CHECK_THROWS_AS(solve_fault(net, sol, FaultLocation::node(9)), QueryError);
    CHECK_THROWS_AS(max_min_fault_currents(net, sol, DeviceRef::fuse(0)), QueryError);
    auto bad = sol;
    bad.converged = false;
    CHECK_THROWS_AS(solve_fault(net, bad, FaultLocation::node(1)), PreconditionError);
}
