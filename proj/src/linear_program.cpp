#include "protcoord/linear_program.hpp"

#include "protcoord/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace protcoord {

std::size_t LinearProgram::add_variable(double c, double lo, double hi)
{
    cost.push_back(c);
    lower.push_back(lo);
    upper.push_back(hi);
    return cost.size() - 1;
}

const char* to_string(LpStatus status)
{
    switch (status) {
    case LpStatus::Optimal:
        return "Optimal";
    case LpStatus::Infeasible:
        return "Infeasible";
    case LpStatus::Unbounded:
        return "Unbounded";
    default:
        return "IterationLimit";
    }
}

double lp_violation(const LinearProgram& lp, const std::vector<double>& x)
{
    double worst = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        worst = std::max({worst, lp.lower[j] - x[j], x[j] - lp.upper[j]});
    }
    for (const auto& row : lp.rows) {
        double lhs = 0.0;
        for (const auto& [j, a] : row.coeffs) lhs += a * x[j];
        switch (row.sense) {
        case RowSense::LessEqual:
            worst = std::max(worst, lhs - row.rhs);
            break;
        case RowSense::GreaterEqual:
            worst = std::max(worst, row.rhs - lhs);
            break;
        case RowSense::Equal:
            worst = std::max(worst, std::abs(lhs - row.rhs));
            break;
        }
    }
    return worst;
}

namespace {

constexpr double kEps = 1e-10;

class Tableau {
public:
    Tableau(std::size_t rows, std::size_t cols)
        : m_(rows), n_(cols), t_((rows + 1) * (cols + 1), 0.0), basis_(rows)
    {
    }

    double& at(std::size_t r, std::size_t c) { return t_[r * (n_ + 1) + c]; }
    double& rhs(std::size_t r) { return at(r, n_); }
    double& obj(std::size_t c) { return at(m_, c); }
    std::vector<std::size_t>& basis() { return basis_; }

    void pivot(std::size_t pr, std::size_t pc)
    {
        const double p = at(pr, pc);
        for (std::size_t c = 0; c <= n_; ++c) at(pr, c) /= p;
        for (std::size_t r = 0; r <= m_; ++r) {
            if (r == pr) continue;
            const double f = at(r, pc);
            if (f == 0.0) continue;
            for (std::size_t c = 0; c <= n_; ++c) at(r, c) -= f * at(pr, c);
        }
        basis_[pr] = pc;
    }

    // Bland's rule simplex on the objective row; columns with allowed[c] false
    // never enter. Returns Optimal, Unbounded or IterationLimit.
    LpStatus run(const std::vector<bool>& allowed, int& pivots, int max_pivots)
    {
        while (pivots < max_pivots) {
            std::size_t enter = n_;
            for (std::size_t c = 0; c < n_; ++c) {
                if (allowed[c] && obj(c) < -kEps) {
                    enter = c;
                    break;
                }
            }
            if (enter == n_) return LpStatus::Optimal;
            std::size_t leave = m_;
            double best = 0.0;
            for (std::size_t r = 0; r < m_; ++r) {
                const double a = at(r, enter);
                if (a > kEps) {
                    const double ratio = rhs(r) / a;
                    if (leave == m_ || ratio < best - kEps ||
                        (std::abs(ratio - best) <= kEps && basis_[r] < basis_[leave])) {
                        leave = r;
                        best = ratio;
                    }
                }
            }
            if (leave == m_) return LpStatus::Unbounded;
            pivot(leave, enter);
            ++pivots;
        }
        return LpStatus::IterationLimit;
    }

private:
    std::size_t m_;
    std::size_t n_;
    std::vector<double> t_;
    std::vector<std::size_t> basis_;
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp)
{
    const std::size_t nv = lp.cost.size();
    if (lp.lower.size() != nv || lp.upper.size() != nv) {
        throw PreconditionError("LP bound vectors do not match the variable count");
    }
    LpResult result;

    // Presolve: rows touching a single variable become bounds.
    std::vector<double> lo = lp.lower;
    std::vector<double> hi = lp.upper;
    std::vector<const LpRow*> rows;
    for (const auto& row : lp.rows) {
        for (const auto& [j, a] : row.coeffs) {
            if (j >= nv) throw PreconditionError("LP row references an unknown variable");
        }
        std::map<std::size_t, double> merged;
        for (const auto& [j, a] : row.coeffs) merged[j] += a;
        std::erase_if(merged, [](const auto& e) { return e.second == 0.0; });
        const std::size_t nz = merged.size();
        if (nz == 0) {
            const bool ok = (row.sense == RowSense::LessEqual && 0.0 <= row.rhs + kEps) ||
                            (row.sense == RowSense::GreaterEqual && 0.0 >= row.rhs - kEps) ||
                            (row.sense == RowSense::Equal && std::abs(row.rhs) <= kEps);
            if (!ok) return result;
            continue;
        }
        if (nz == 1) {
            const auto [var, coef] = *merged.begin();
            const double bound = row.rhs / coef;
            const bool is_upper = (row.sense == RowSense::LessEqual) == (coef > 0.0);
            if (row.sense == RowSense::Equal) {
                lo[var] = std::max(lo[var], bound);
                hi[var] = std::min(hi[var], bound);
            } else if (is_upper) {
                hi[var] = std::min(hi[var], bound);
            } else {
                lo[var] = std::max(lo[var], bound);
            }
            continue;
        }
        rows.push_back(&row);
    }
    for (std::size_t j = 0; j < nv; ++j) {
        if (!std::isfinite(lo[j])) throw PreconditionError("LP variables need finite lower bounds");
        if (lo[j] > hi[j] + 1e-9) return result;
        hi[j] = std::max(hi[j], lo[j]);
    }

    // Shift x = lo + y, y >= 0; finite upper bounds become rows.
    struct StdRow {
        std::vector<double> a;
        RowSense sense;
        double b;
    };
    std::vector<StdRow> std_rows;
    for (const auto* row : rows) {
        StdRow r{std::vector<double>(nv, 0.0), row->sense, row->rhs};
        for (const auto& [j, a] : row->coeffs) {
            r.a[j] += a;
            r.b -= a * lo[j];
        }
        std_rows.push_back(std::move(r));
    }
    for (std::size_t j = 0; j < nv; ++j) {
        if (std::isfinite(hi[j])) {
            StdRow r{std::vector<double>(nv, 0.0), RowSense::LessEqual, hi[j] - lo[j]};
            r.a[j] = 1.0;
            std_rows.push_back(std::move(r));
        }
    }
    for (auto& r : std_rows) {
        if (r.b < 0.0) {
            for (auto& a : r.a) a = -a;
            r.b = -r.b;
            if (r.sense == RowSense::LessEqual) r.sense = RowSense::GreaterEqual;
            else if (r.sense == RowSense::GreaterEqual) r.sense = RowSense::LessEqual;
        }
    }

    // Columns: structural, one slack/surplus per inequality, one artificial
    // per >= or = row.
    const std::size_t m = std_rows.size();
    std::size_t n_slack = 0;
    std::size_t n_art = 0;
    for (const auto& r : std_rows) {
        if (r.sense != RowSense::Equal) ++n_slack;
        if (r.sense != RowSense::LessEqual) ++n_art;
    }
    const std::size_t art0 = nv + n_slack;
    const std::size_t ncols = art0 + n_art;
    Tableau tab(m, ncols);
    std::size_t slack = nv;
    std::size_t art = art0;
    for (std::size_t r = 0; r < m; ++r) {
        const auto& sr = std_rows[r];
        for (std::size_t j = 0; j < nv; ++j) tab.at(r, j) = sr.a[j];
        tab.rhs(r) = sr.b;
        if (sr.sense == RowSense::LessEqual) {
            tab.at(r, slack) = 1.0;
            tab.basis()[r] = slack++;
        } else {
            if (sr.sense == RowSense::GreaterEqual) tab.at(r, slack++) = -1.0;
            tab.at(r, art) = 1.0;
            tab.basis()[r] = art++;
        }
    }

    const int max_pivots = 50 * static_cast<int>(m + ncols + 1);
    std::vector<bool> allowed(ncols, true);

    // Phase 1: minimize the sum of artificials.
    if (n_art > 0) {
        for (std::size_t c = 0; c <= ncols; ++c) tab.obj(c) = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            if (tab.basis()[r] >= art0) {
                for (std::size_t c = 0; c <= ncols; ++c) tab.obj(c) -= tab.at(r, c);
            }
        }
        for (std::size_t c = art0; c < ncols; ++c) tab.obj(c) = 0.0;
        const auto st = tab.run(allowed, result.pivots, max_pivots);
        if (st == LpStatus::IterationLimit) {
            result.status = st;
            return result;
        }
        if (-tab.obj(ncols) > 1e-9 * std::max(1.0, static_cast<double>(m))) {
            result.status = LpStatus::Infeasible;
            return result;
        }
        // Drive zero-level artificials out of the basis where possible.
        for (std::size_t r = 0; r < m; ++r) {
            if (tab.basis()[r] < art0) continue;
            for (std::size_t c = 0; c < art0; ++c) {
                if (std::abs(tab.at(r, c)) > 1e-9) {
                    tab.pivot(r, c);
                    break;
                }
            }
        }
        for (std::size_t c = art0; c < ncols; ++c) allowed[c] = false;
    }

    // Phase 2: original costs in reduced form.
    for (std::size_t c = 0; c <= ncols; ++c) tab.obj(c) = 0.0;
    for (std::size_t j = 0; j < nv; ++j) tab.obj(j) = lp.cost[j];
    for (std::size_t r = 0; r < m; ++r) {
        const std::size_t b = tab.basis()[r];
        const double cb = b < nv ? lp.cost[b] : 0.0;
        if (cb != 0.0) {
            for (std::size_t c = 0; c <= ncols; ++c) tab.obj(c) -= cb * tab.at(r, c);
        }
    }
    const auto st = tab.run(allowed, result.pivots, max_pivots);
    if (st != LpStatus::Optimal) {
        result.status = st;
        return result;
    }

    result.x = lo;
    for (std::size_t r = 0; r < m; ++r) {
        const std::size_t b = tab.basis()[r];
        if (b < nv) result.x[b] = lo[b] + tab.rhs(r);
    }
    result.objective = 0.0;
    for (std::size_t j = 0; j < nv; ++j) result.objective += lp.cost[j] * result.x[j];
    result.status = LpStatus::Optimal;
    return result;
}

}  // namespace protcoord
