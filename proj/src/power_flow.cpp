#include "protcoord/power_flow.hpp"

#include "protcoord/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace protcoord {

std::complex<double> PowerFlowSolution::voltage(NodeId n) const
{
    return std::polar(v_mag.at(n.index), v_angle.at(n.index));
}

std::complex<double> PowerFlowSolution::head_current() const
{
    return std::conj(std::complex<double>(p_head, q_head) / voltage(NodeId{0}));
}

std::vector<std::complex<double>> net_demand(const Network& network)
{
    std::vector<std::complex<double>> d(network.node_count());
    for (const auto& lat : network.laterals) {
        d.at(lat.tap.index) += std::complex<double>(lat.load_p, lat.load_q);
    }
    for (const auto& dg : network.dg_units) {
        d.at(dg.tap.index) -= std::complex<double>(dg.p_out, dg.q_out);
    }
    return d;
}

namespace {

void require_valid(const Network& network)
{
    const auto violations = validate(network);
    if (!violations.empty()) {
        throw PreconditionError(fmt::format("invalid network: {}: {}", violations.front().element,
                                            violations.front().rule));
    }
}

// Phasor angles from the converged flows: V_{i+1} = V_i - z_i * conj(S_i / V_i).
void recover_angles(const Network& network, PowerFlowSolution& sol)
{
    const std::size_t n = network.node_count();
    sol.v_angle.assign(n, 0.0);
    std::complex<double> v = sol.v_mag[0];
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto& s = network.sections[i];
        const std::complex<double> z(s.r, s.x);
        const std::complex<double> flow(sol.p_flow[i], sol.q_flow[i]);
        v = v - z * std::conj(flow / v);
        sol.v_angle[i + 1] = std::arg(v);
    }
}

}  // namespace

double distflow_residual(const Network& network, const PowerFlowSolution& sol)
{
    const auto demand = net_demand(network);
    const std::size_t n = network.node_count();
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto& s = network.sections[i];
        const double p = sol.p_flow[i];
        const double q = sol.q_flow[i];
        const double v2 = sol.v_mag[i] * sol.v_mag[i];
        const double p_next = i + 2 < n ? sol.p_flow[i + 1] : 0.0;
        const double q_next = i + 2 < n ? sol.q_flow[i + 1] : 0.0;
        const double sq = p * p + q * q;
        worst = std::max(worst, std::abs(p_next - (p - s.r * sq / v2 - demand[i + 1].real())));
        worst = std::max(worst, std::abs(q_next - (q - s.x * sq / v2 - demand[i + 1].imag())));
    }
    return worst;
}

PowerFlowSolution solve_distflow(const Network& network, const PowerFlowOptions& options)
{
    require_valid(network);
    if (!(options.tol > 0.0) || options.max_iter < 1) {
        throw PreconditionError("power flow needs tol > 0 and max_iter >= 1");
    }

    const std::size_t n = network.node_count();
    const auto demand = net_demand(network);
    PowerFlowSolution sol;
    sol.p_flow.assign(n - 1, 0.0);
    sol.q_flow.assign(n - 1, 0.0);
    sol.v_mag.assign(n, network.source.voltage);

    for (int iter = 1; iter <= options.max_iter; ++iter) {
        // Backward: accumulate from the feeder end, where the flow leaving the
        // last node is zero. Losses use the receiving-end flow and voltage.
        double p_out = 0.0;
        double q_out = 0.0;
        for (std::size_t i = n - 1; i-- > 0;) {
            const auto& s = network.sections[i];
            const double p_recv = p_out + demand[i + 1].real();
            const double q_recv = q_out + demand[i + 1].imag();
            const double v2 = sol.v_mag[i + 1] * sol.v_mag[i + 1];
            const double sq = (p_recv * p_recv + q_recv * q_recv) / v2;
            sol.p_flow[i] = p_recv + s.r * sq;
            sol.q_flow[i] = q_recv + s.x * sq;
            p_out = sol.p_flow[i];
            q_out = sol.q_flow[i];
        }

        // Forward: voltage magnitudes from the source.
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const auto& s = network.sections[i];
            const double p = sol.p_flow[i];
            const double q = sol.q_flow[i];
            const double v2 = sol.v_mag[i] * sol.v_mag[i];
            const double next = v2 - 2.0 * (s.r * p + s.x * q) +
                                (s.r * s.r + s.x * s.x) * (p * p + q * q) / v2;
            if (!(next >= kCollapseVoltage * kCollapseVoltage)) {
                const NodeId bad{i + 1};
                throw DivergenceError(
                    network.node_label(bad),
                    fmt::format("voltage collapse at {}: |V| fell below {} pu in iteration {}",
                                network.node_label(bad), kCollapseVoltage, iter));
            }
            sol.v_mag[i + 1] = std::sqrt(next);
        }

        sol.iterations = iter;
        sol.max_mismatch = distflow_residual(network, sol);
        if (sol.max_mismatch <= options.tol) {
            sol.converged = true;
            break;
        }
    }

    if (n > 1) {
        sol.p_head = sol.p_flow[0] + demand[0].real();
        sol.q_head = sol.q_flow[0] + demand[0].imag();
    } else {
        sol.p_head = demand[0].real();
        sol.q_head = demand[0].imag();
        sol.converged = true;
    }
    recover_angles(network, sol);
    return sol;
}

std::map<std::size_t, double> dg_terminal_voltages(const Network& network,
                                                   const PowerFlowSolution& sol)
{
    if (!sol.converged) {
        throw PreconditionError("power-flow solution is not converged");
    }
    std::map<std::size_t, double> out;
    for (const auto& dg : network.dg_units) {
        out[dg.id] = sol.v_mag.at(dg.tap.index);
    }
    return out;
}

}  // namespace protcoord
