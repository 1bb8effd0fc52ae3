#pragma once

#include <vector>

namespace ecosched {

// Small dense LP:  min c.x  s.t. rows (a.x <= b or a.x >= b), 0 <= x <= upper.
// Written for the pool allocator's relaxations: tens of variables, exact
// enough to bound a branch-and-bound search. Two-phase primal simplex with
// Bland's rule.
struct LpRow {
    std::vector<double> coeff;
    double rhs = 0.0;
    char sense = '<';  // '<' (<=) or '>' (>=)
};

struct LpProblem {
    int num_vars = 0;
    std::vector<double> cost;
    std::vector<double> upper;  // per-variable upper bound; negative = unbounded
    std::vector<LpRow> rows;
};

struct LpResult {
    enum class Status { Optimal, Infeasible, Unbounded };
    Status status = Status::Infeasible;
    double objective = 0.0;
    std::vector<double> x;
};

LpResult solve_lp(const LpProblem& problem);

}  // namespace ecosched
