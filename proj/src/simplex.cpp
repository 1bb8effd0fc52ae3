#include "ecosched/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ecosched/errors.hpp"

namespace ecosched {

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kFeasTol = 1e-7;
constexpr int kMaxPivots = 20000;

struct Tableau {
    int m = 0;         // constraint rows
    int n_total = 0;   // structural + slack + artificial columns
    int n_struct = 0;
    int first_artificial = 0;  // columns >= this are artificial
    std::vector<std::vector<double>> a;  // m rows, n_total + 1 (rhs last)
    std::vector<double> obj;             // reduced cost row, n_total + 1
    std::vector<int> basis;              // basic column per row

    double& rhs(int i) { return a[static_cast<size_t>(i)][static_cast<size_t>(n_total)]; }

    void pivot(int row, int col) {
        auto& prow = a[static_cast<size_t>(row)];
        const double piv = prow[static_cast<size_t>(col)];
        for (double& v : prow) v /= piv;
        for (int i = 0; i < m; ++i) {
            if (i == row) continue;
            auto& r = a[static_cast<size_t>(i)];
            const double factor = r[static_cast<size_t>(col)];
            if (std::abs(factor) < 1e-14) continue;
            for (int j = 0; j <= n_total; ++j)
                r[static_cast<size_t>(j)] -= factor * prow[static_cast<size_t>(j)];
            r[static_cast<size_t>(col)] = 0.0;
        }
        const double ofac = obj[static_cast<size_t>(col)];
        if (std::abs(ofac) > 1e-14) {
            for (int j = 0; j <= n_total; ++j)
                obj[static_cast<size_t>(j)] -= ofac * prow[static_cast<size_t>(j)];
            obj[static_cast<size_t>(col)] = 0.0;
        }
        basis[static_cast<size_t>(row)] = col;
    }

    // Bland's rule. Returns Optimal when no entering column, Unbounded when a
    // column has no blocking row.
    LpResult::Status run(bool allow_artificial_entering) {
        for (int iter = 0; iter < kMaxPivots; ++iter) {
            int enter = -1;
            const int limit = allow_artificial_entering ? n_total : first_artificial;
            for (int j = 0; j < limit; ++j) {
                if (obj[static_cast<size_t>(j)] < -kPivotTol) { enter = j; break; }
            }
            if (enter < 0) return LpResult::Status::Optimal;

            int leave = -1;
            double best_ratio = std::numeric_limits<double>::infinity();
            for (int i = 0; i < m; ++i) {
                const double aij = a[static_cast<size_t>(i)][static_cast<size_t>(enter)];
                if (aij > kPivotTol) {
                    const double ratio = rhs(i) / aij;
                    if (ratio < best_ratio - kPivotTol ||
                        (ratio < best_ratio + kPivotTol &&
                         (leave < 0 || basis[static_cast<size_t>(i)] < basis[static_cast<size_t>(leave)]))) {
                        best_ratio = ratio;
                        leave = i;
                    }
                }
            }
            if (leave < 0) return LpResult::Status::Unbounded;
            pivot(leave, enter);
        }
        throw InternalError("simplex: pivot limit exceeded");
    }
};

}  // namespace

LpResult solve_lp(const LpProblem& problem) {
    const int n = problem.num_vars;
    if (static_cast<int>(problem.cost.size()) != n ||
        static_cast<int>(problem.upper.size()) != n)
        throw InternalError("solve_lp: cost/upper size mismatch");

    // Materialize upper bounds as rows, normalize rhs >= 0, add slack per row
    // and artificials where the slack cannot serve as the initial basis.
    struct NormRow {
        std::vector<double> a;
        double b;
        bool geq;
    };
    std::vector<NormRow> rows;
    for (const auto& r : problem.rows) {
        if (static_cast<int>(r.coeff.size()) != n)
            throw InternalError("solve_lp: row width mismatch");
        NormRow nr{r.coeff, r.rhs, r.sense == '>'};
        if (nr.b < 0) {  // flip so rhs >= 0
            for (double& v : nr.a) v = -v;
            nr.b = -nr.b;
            nr.geq = !nr.geq;
        }
        rows.push_back(std::move(nr));
    }
    for (int j = 0; j < n; ++j) {
        if (problem.upper[static_cast<size_t>(j)] < 0) continue;  // unbounded above
        NormRow nr;
        nr.a.assign(static_cast<size_t>(n), 0.0);
        nr.a[static_cast<size_t>(j)] = 1.0;
        nr.b = problem.upper[static_cast<size_t>(j)];
        nr.geq = false;
        rows.push_back(std::move(nr));
    }

    const int m = static_cast<int>(rows.size());
    int n_artificial = 0;
    for (const auto& r : rows)
        if (r.geq) ++n_artificial;

    Tableau t;
    t.m = m;
    t.n_struct = n;
    t.first_artificial = n + m;
    t.n_total = n + m + n_artificial;
    t.a.assign(static_cast<size_t>(m), std::vector<double>(static_cast<size_t>(t.n_total) + 1, 0.0));
    t.basis.assign(static_cast<size_t>(m), -1);

    int art = 0;
    for (int i = 0; i < m; ++i) {
        auto& row = t.a[static_cast<size_t>(i)];
        for (int j = 0; j < n; ++j) row[static_cast<size_t>(j)] = rows[static_cast<size_t>(i)].a[static_cast<size_t>(j)];
        row[static_cast<size_t>(t.n_total)] = rows[static_cast<size_t>(i)].b;
        const int slack = n + i;
        if (rows[static_cast<size_t>(i)].geq) {
            row[static_cast<size_t>(slack)] = -1.0;  // surplus
            const int acol = t.first_artificial + art++;
            row[static_cast<size_t>(acol)] = 1.0;
            t.basis[static_cast<size_t>(i)] = acol;
        } else {
            row[static_cast<size_t>(slack)] = 1.0;
            t.basis[static_cast<size_t>(i)] = slack;
        }
    }

    // Phase 1: minimize sum of artificials.
    if (n_artificial > 0) {
        t.obj.assign(static_cast<size_t>(t.n_total) + 1, 0.0);
        for (int j = t.first_artificial; j < t.n_total; ++j) t.obj[static_cast<size_t>(j)] = 1.0;
        for (int i = 0; i < m; ++i) {
            const int b = t.basis[static_cast<size_t>(i)];
            if (b >= t.first_artificial)
                for (int j = 0; j <= t.n_total; ++j)
                    t.obj[static_cast<size_t>(j)] -= t.a[static_cast<size_t>(i)][static_cast<size_t>(j)];
        }
        const auto st = t.run(true);
        if (st == LpResult::Status::Unbounded)
            throw InternalError("simplex: phase 1 unbounded");
        const double infeas = -t.obj[static_cast<size_t>(t.n_total)];  // phase-1 objective value
        if (infeas > kFeasTol) return {LpResult::Status::Infeasible, 0.0, {}};

        // Drive leftover artificials out of the basis (degenerate rows).
        for (int i = 0; i < m; ++i) {
            if (t.basis[static_cast<size_t>(i)] < t.first_artificial) continue;
            int col = -1;
            for (int j = 0; j < t.first_artificial; ++j)
                if (std::abs(t.a[static_cast<size_t>(i)][static_cast<size_t>(j)]) > kPivotTol) { col = j; break; }
            if (col >= 0) t.pivot(i, col);
            // else: redundant all-zero row; the artificial stays basic at 0.
        }
    }

    // Phase 2: price the real objective over the current basis.
    t.obj.assign(static_cast<size_t>(t.n_total) + 1, 0.0);
    for (int j = 0; j < n; ++j) t.obj[static_cast<size_t>(j)] = problem.cost[static_cast<size_t>(j)];
    for (int i = 0; i < m; ++i) {
        const int b = t.basis[static_cast<size_t>(i)];
        if (b < n && std::abs(t.obj[static_cast<size_t>(b)]) > 1e-14) {
            const double factor = t.obj[static_cast<size_t>(b)];
            for (int j = 0; j <= t.n_total; ++j)
                t.obj[static_cast<size_t>(j)] -= factor * t.a[static_cast<size_t>(i)][static_cast<size_t>(j)];
        }
    }
    const auto st = t.run(false);
    if (st == LpResult::Status::Unbounded) return {LpResult::Status::Unbounded, 0.0, {}};

    LpResult res;
    res.status = LpResult::Status::Optimal;
    res.x.assign(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < m; ++i) {
        const int b = t.basis[static_cast<size_t>(i)];
        if (b < n) res.x[static_cast<size_t>(b)] = t.rhs(i);
    }
    for (double& v : res.x)
        if (v < 0 && v > -kFeasTol) v = 0.0;
    res.objective = 0.0;
    for (int j = 0; j < n; ++j)
        res.objective += problem.cost[static_cast<size_t>(j)] * res.x[static_cast<size_t>(j)];
    return res;
}

}  // namespace ecosched
