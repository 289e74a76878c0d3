#pragma once

// Small dense linear programs: minimize c'x subject to linear rows and finite
// lower / optional upper bounds on x. Two-phase tableau simplex with Bland's
// rule, sized for the settings subproblem (a handful of variables, a few
// hundred rows).

#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace protcoord {

enum class RowSense { LessEqual, GreaterEqual, Equal };

struct LpRow {
    std::vector<std::pair<std::size_t, double>> coeffs;
    RowSense sense = RowSense::GreaterEqual;
    double rhs = 0.0;
    std::string tag;  // caller's label, carried into diagnostics
};

struct LinearProgram {
    std::vector<double> cost;
    std::vector<double> lower;
    std::vector<double> upper;  // +inf allowed
    std::vector<LpRow> rows;

    std::size_t add_variable(double c, double lo,
                             double hi = std::numeric_limits<double>::infinity());
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

const char* to_string(LpStatus status);

struct LpResult {
    LpStatus status = LpStatus::Infeasible;
    std::vector<double> x;
    double objective = 0.0;
    int pivots = 0;
};

LpResult solve_lp(const LinearProgram& lp);

/// Largest violation of any row or bound at x (0 when feasible).
double lp_violation(const LinearProgram& lp, const std::vector<double>& x);

}  // namespace protcoord
