#include "ecosched/pool_ip.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

#include "ecosched/errors.hpp"
#include "ecosched/simplex.hpp"

namespace ecosched {

namespace {

constexpr double kTieEps = 1e-9;
constexpr double kIntTol = 1e-6;

// (objective, total workers, x lexicographic, partition order) comparison.
bool solution_better(double obj_a, int64_t tot_a, const std::vector<int64_t>& xa, int part_pos_a,
                     double obj_b, int64_t tot_b, const std::vector<int64_t>& xb, int part_pos_b) {
    if (obj_a < obj_b - kTieEps) return true;
    if (obj_a > obj_b + kTieEps) return false;
    if (tot_a != tot_b) return tot_a < tot_b;
    if (part_pos_a != part_pos_b) return part_pos_a < part_pos_b;
    return std::lexicographical_compare(xa.begin(), xa.end(), xb.begin(), xb.end());
}

struct SubProblem {
    int partition_id = 0;
    int partition_pos = 0;
    std::vector<size_t> var_index;  // into instance.vars
    std::vector<double> cost;
    std::vector<int64_t> ub;
    // demand rows: coeff per var (rate if rtype matches), min rhs
    struct DemandRow { RType rtype; int step; std::vector<double> rate; double min; };
    std::vector<DemandRow> demand_rows;
    // capacity rows: coeff per var (GPUs used), max rhs
    struct CapRow { std::string location, gpu; std::vector<double> use; double max; };
    std::vector<CapRow> cap_rows;
};

SubProblem make_subproblem(const IpInstance& inst, int partition_id, int partition_pos) {
    SubProblem sp;
    sp.partition_id = partition_id;
    sp.partition_pos = partition_pos;
    for (size_t k = 0; k < inst.vars.size(); ++k)
        if (inst.vars[k].partition == partition_id) sp.var_index.push_back(k);

    const size_t n = sp.var_index.size();
    for (size_t j = 0; j < n; ++j) {
        const auto& v = inst.vars[sp.var_index[j]];
        sp.cost.push_back(v.cost);
        sp.ub.push_back(v.ub);
    }

    const auto& dem = inst.demand.at(partition_id);
    for (int r = 0; r < kNumRTypes; ++r) {
        for (size_t t = 0; t < dem[static_cast<size_t>(r)].size(); ++t) {
            const double need = inst.alpha * dem[static_cast<size_t>(r)][t];
            if (need <= 0) continue;
            SubProblem::DemandRow row;
            row.rtype = static_cast<RType>(r);
            row.step = static_cast<int>(t);
            row.min = need;
            row.rate.assign(n, 0.0);
            for (size_t j = 0; j < n; ++j) {
                const auto& v = inst.vars[sp.var_index[j]];
                if (static_cast<int>(v.rtype) == r) row.rate[j] = v.rate_rps;
            }
            sp.demand_rows.push_back(std::move(row));
        }
    }

    for (const auto& [key, max_gpus] : inst.capacity) {
        SubProblem::CapRow row;
        row.location = key.first;
        row.gpu = key.second;
        row.max = static_cast<double>(max_gpus);
        row.use.assign(n, 0.0);
        bool any = false;
        for (size_t j = 0; j < n; ++j) {
            const auto& v = inst.vars[sp.var_index[j]];
            if (v.location != key.first) continue;
            auto it = v.footprint.find(key.second);
            if (it != v.footprint.end() && it->second > 0) {
                row.use[j] = static_cast<double>(it->second);
                any = true;
            }
        }
        if (any) sp.cap_rows.push_back(std::move(row));
    }
    return sp;
}

// LP relaxation of a node: variables shifted by their lower bounds.
LpResult node_relaxation(const SubProblem& sp, const std::vector<int64_t>& lb,
                         const std::vector<int64_t>& ub) {
    const size_t n = sp.cost.size();
    LpProblem lp;
    lp.num_vars = static_cast<int>(n);
    lp.cost = sp.cost;
    lp.upper.resize(n);
    for (size_t j = 0; j < n; ++j) lp.upper[j] = static_cast<double>(ub[j] - lb[j]);

    for (const auto& row : sp.demand_rows) {
        double fixed = 0.0;
        for (size_t j = 0; j < n; ++j) fixed += row.rate[j] * static_cast<double>(lb[j]);
        LpRow r;
        r.coeff = row.rate;
        r.rhs = row.min - fixed;
        r.sense = '>';
        lp.rows.push_back(std::move(r));
    }
    for (const auto& row : sp.cap_rows) {
        double fixed = 0.0;
        for (size_t j = 0; j < n; ++j) fixed += row.use[j] * static_cast<double>(lb[j]);
        LpRow r;
        r.coeff = row.use;
        r.rhs = row.max - fixed;
        r.sense = '<';
        if (r.rhs < 0) return {LpResult::Status::Infeasible, 0.0, {}};  // lb already over capacity
        lp.rows.push_back(std::move(r));
    }
    LpResult res = solve_lp(lp);
    if (res.status == LpResult::Status::Optimal) {
        double off = 0.0;
        for (size_t j = 0; j < n; ++j) {
            res.x[j] += static_cast<double>(lb[j]);
            off += sp.cost[j] * static_cast<double>(lb[j]);
        }
        res.objective += off;
    }
    return res;
}

bool integer_feasible(const SubProblem& sp, const std::vector<int64_t>& x) {
    for (const auto& row : sp.demand_rows) {
        double got = 0.0;
        for (size_t j = 0; j < x.size(); ++j) got += row.rate[j] * static_cast<double>(x[j]);
        if (got < row.min - 1e-9) return false;
    }
    for (const auto& row : sp.cap_rows) {
        double used = 0.0;
        for (size_t j = 0; j < x.size(); ++j) used += row.use[j] * static_cast<double>(x[j]);
        if (used > row.max + 1e-9) return false;
    }
    for (size_t j = 0; j < x.size(); ++j)
        if (x[j] < 0 || x[j] > sp.ub[j]) return false;
    return true;
}

double exact_objective(const SubProblem& sp, const std::vector<int64_t>& x) {
    double obj = 0.0;
    for (size_t j = 0; j < x.size(); ++j) obj += sp.cost[j] * static_cast<double>(x[j]);
    return obj;
}

struct SubSolution {
    bool feasible = false;
    double objective = 0.0;
    std::vector<int64_t> x;
    int64_t total = 0;
};

// Branch-and-bound with best-first node order. Prunes a node only when its
// LP bound is strictly worse than the incumbent, or when it ties but cannot
// improve the total-worker tie-break (sum of lower bounds already exceeds
// the incumbent's total).
SubSolution branch_and_bound(const SubProblem& sp) {
    const size_t n = sp.cost.size();
    SubSolution best;

    struct Node {
        double bound;
        uint64_t seq;
        std::vector<int64_t> lb, ub;
        std::vector<double> relax_x;
    };
    struct NodeOrder {
        bool operator()(const Node& a, const Node& b) const {
            if (a.bound != b.bound) return a.bound > b.bound;  // min-heap on bound
            return a.seq > b.seq;
        }
    };
    std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
    uint64_t seq = 0;

    auto consider = [&](const std::vector<int64_t>& x, double node_bound) {
        if (!integer_feasible(sp, x)) return;
        const double obj = exact_objective(sp, x);
        if (obj < node_bound - 1e-6)
            throw InternalError("branch-and-bound: integer objective beat its node's LP bound");
        int64_t tot = 0;
        for (int64_t v : x) tot += v;
        if (!best.feasible ||
            solution_better(obj, tot, x, 0, best.objective, best.total, best.x, 0)) {
            best.feasible = true;
            best.objective = obj;
            best.x = x;
            best.total = tot;
        }
    };

    std::vector<int64_t> lb0(n, 0), ub0(sp.ub);
    LpResult root = node_relaxation(sp, lb0, ub0);
    if (root.status != LpResult::Status::Optimal) return best;

    // Greedy incumbent: round the relaxation up and repair nothing; it only
    // seeds the search when already feasible.
    {
        std::vector<int64_t> guess(n);
        for (size_t j = 0; j < n; ++j)
            guess[j] = std::min<int64_t>(sp.ub[j], static_cast<int64_t>(std::ceil(root.x[j] - kIntTol)));
        consider(guess, root.objective);
    }
    open.push({root.objective, seq++, std::move(lb0), std::move(ub0), std::move(root.x)});

    int nodes = 0;
    while (!open.empty()) {
        if (++nodes > 500000) throw InternalError("branch-and-bound: node limit exceeded");
        Node node = open.top();
        open.pop();

        if (best.feasible) {
            if (node.bound > best.objective + kTieEps) continue;
            int64_t min_total = 0;
            for (int64_t v : node.lb) min_total += v;
            if (node.bound > best.objective - kTieEps && min_total > best.total) continue;
        }

        // Most fractional variable; ties toward the lowest index.
        int branch_var = -1;
        double best_frac = kIntTol;
        for (size_t j = 0; j < n; ++j) {
            const double v = node.relax_x[j];
            const double frac = std::min(v - std::floor(v), std::ceil(v) - v);
            if (frac > best_frac) {
                best_frac = frac;
                branch_var = static_cast<int>(j);
            }
        }
        if (branch_var < 0) {
            // Integral relaxation: its rounding is the node's optimum.
            std::vector<int64_t> x(n);
            for (size_t j = 0; j < n; ++j) x[j] = std::llround(node.relax_x[j]);
            consider(x, node.bound);
            continue;
        }

        const double v = node.relax_x[static_cast<size_t>(branch_var)];
        const auto lo = static_cast<int64_t>(std::floor(v));
        // down child: x <= floor(v)
        {
            auto lb = node.lb;
            auto ub = node.ub;
            ub[static_cast<size_t>(branch_var)] = lo;
            if (lb[static_cast<size_t>(branch_var)] <= lo) {
                LpResult r = node_relaxation(sp, lb, ub);
                if (r.status == LpResult::Status::Optimal)
                    open.push({r.objective, seq++, std::move(lb), std::move(ub), std::move(r.x)});
            }
        }
        // up child: x >= floor(v) + 1
        {
            auto lb = node.lb;
            auto ub = node.ub;
            lb[static_cast<size_t>(branch_var)] = lo + 1;
            if (lb[static_cast<size_t>(branch_var)] <= ub[static_cast<size_t>(branch_var)]) {
                LpResult r = node_relaxation(sp, lb, ub);
                if (r.status == LpResult::Status::Optimal)
                    open.push({r.objective, seq++, std::move(lb), std::move(ub), std::move(r.x)});
            }
        }
    }
    return best;
}

std::string diagnose_infeasibility(const SubProblem& sp) {
    // If even the max-capacity assignment cannot cover some demand row, the
    // throughput constraint family binds; otherwise the GPU capacity rows do.
    for (const auto& row : sp.demand_rows) {
        double most = 0.0;
        for (size_t j = 0; j < sp.ub.size(); ++j)
            most += row.rate[j] * static_cast<double>(sp.ub[j]);
        if (most < row.min - 1e-9) {
            std::ostringstream os;
            os << "throughput demand (type " << to_string(row.rtype) << ", step " << row.step
               << ": need " << row.min << " req/s, capacity " << most << ")";
            return os.str();
        }
    }
    return "GPU capacity";
}

AllocationPlan plan_from(const IpInstance& inst, const SubProblem& sp, const SubSolution& sol) {
    AllocationPlan plan;
    plan.status = AllocationPlan::Status::Optimal;
    plan.partition = sp.partition_id;
    plan.objective = sol.objective;
    for (size_t j = 0; j < sol.x.size(); ++j) {
        if (sol.x[j] == 0) continue;
        const auto& v = inst.vars[sp.var_index[j]];
        plan.workers.push_back({v.location, v.partition, v.rtype, v.mode, sol.x[j]});
    }
    return plan;
}

}  // namespace

int64_t AllocationPlan::total_workers() const {
    int64_t tot = 0;
    for (const auto& w : workers) tot += w.count;
    return tot;
}

IpInstance build_instance(const ProfileSet& profiles,
                          const CarbonSeries& carbon,
                          const std::map<int, TrafficSummary>& traffic,
                          double epoch_start_s,
                          const std::string& objective,
                          double alpha) {
    if (objective != "emission" && objective != "energy")
        throw ConfigError("objective must be 'emission' or 'energy'");
    if (alpha < 1.0) throw ConfigError("risk factor alpha must be >= 1");

    IpInstance inst;
    inst.objective = objective;
    inst.alpha = alpha;
    inst.epoch_start_s = epoch_start_s;

    const auto locations = profiles.locations();
    if (locations.empty()) throw ConfigError("profiles declare no GPU availability");

    for (const auto& gpu : profiles.gpus)
        for (const auto& [loc, count] : gpu.available)
            if (count > 0) inst.capacity[{loc, gpu.name}] = count;

    // Modes per (partition, rtype), sorted for the lexicographic var order.
    bool steps_set = false;
    for (const auto& scheme : profiles.partitions) {
        inst.partition_ids.push_back(scheme.id);
        auto it = traffic.find(scheme.id);
        if (it == traffic.end())
            throw ConfigError("no traffic summary for partition " + std::to_string(scheme.id));
        const TrafficSummary& ts = it->second;
        if (!steps_set) {
            // One decision step per 5-minute forecast interval.
            inst.steps = ts.intervals();
            steps_set = true;
        }
        if (ts.intervals() != inst.steps)
            throw ConfigError("traffic summaries disagree on the epoch's steps");

        auto& dem = inst.demand[scheme.id];
        for (int r = 0; r < kNumRTypes; ++r)
            dem[static_cast<size_t>(r)] = ts.peak_qps[static_cast<size_t>(r)];

        for (const auto& loc : locations) {
            for (RType rtype : kAllRTypes) {
                std::vector<const ConfigProfile*> modes;
                for (const auto& [key, cfg] : profiles.configs)
                    if (key.partition == scheme.id && key.rtype == rtype) modes.push_back(&cfg);
                if (modes.empty()) {
                    std::ostringstream os;
                    os << "no config profile for (partition=" << scheme.id << ", rtype="
                       << to_string(rtype) << ")";
                    throw ConfigError(os.str());
                }
                std::sort(modes.begin(), modes.end(),
                          [](const ConfigProfile* a, const ConfigProfile* b) {
                              return a->key.mode < b->key.mode;
                          });
                for (const ConfigProfile* cfg : modes) {
                    IpVar var;
                    var.location = loc;
                    var.partition = scheme.id;
                    var.rtype = rtype;
                    var.mode = cfg->key.mode;
                    var.rate_rps = cfg->max_throughput_rps;
                    var.footprint = cfg->gpu_footprint;

                    // lambda-weighted energy; energy objective prices every
                    // site and step at 1.
                    double cost = 0.0;
                    const double kwh_per_step = cfg->power_full_w / 1000.0 * inst.delta_t_s / 3600.0;
                    for (int t = 0; t < inst.steps; ++t) {
                        const double lam =
                            objective == "energy"
                                ? 1.0
                                : lme_at(carbon, loc, epoch_start_s + t * inst.delta_t_s);
                        cost += lam * kwh_per_step;
                    }
                    var.cost = cost;

                    int64_t ub = std::numeric_limits<int64_t>::max();
                    for (const auto& [gname, need] : cfg->gpu_footprint) {
                        auto cap = inst.capacity.find({loc, gname});
                        const int64_t have = cap == inst.capacity.end() ? 0 : cap->second;
                        ub = std::min(ub, have / need);
                    }
                    var.ub = ub;
                    if (cfg->measured_latency_s >
                        profiles.slo_tolerance_s[static_cast<int>(rtype)]) {
                        var.ub = 0;  // SLO pre-filter: x forced to zero
                        var.slo_filtered = true;
                    }
                    inst.vars.push_back(std::move(var));
                }
            }
        }
    }
    return inst;
}

AllocationPlan solve(const IpInstance& instance) {
    AllocationPlan best;
    best.status = AllocationPlan::Status::Infeasible;
    SubSolution best_sol;
    int best_pos = -1;
    std::vector<std::string> families;

    for (size_t pos = 0; pos < instance.partition_ids.size(); ++pos) {
        const SubProblem sp =
            make_subproblem(instance, instance.partition_ids[pos], static_cast<int>(pos));
        SubSolution sol = branch_and_bound(sp);
        if (!sol.feasible) {
            families.push_back("partition " + std::to_string(sp.partition_id) + ": " +
                               diagnose_infeasibility(sp));
            continue;
        }
        if (best.status == AllocationPlan::Status::Infeasible ||
            solution_better(sol.objective, sol.total, sol.x, static_cast<int>(pos),
                            best_sol.objective, best_sol.total, best_sol.x, best_pos)) {
            best = plan_from(instance, sp, sol);
            best_sol = std::move(sol);
            best_pos = static_cast<int>(pos);
        }
    }
    if (best.status == AllocationPlan::Status::Infeasible) {
        std::ostringstream os;
        for (size_t i = 0; i < families.size(); ++i) os << (i ? "; " : "") << families[i];
        best.infeasible_family = os.str();
    }
    return best;
}

AllocationPlan brute_force_solve(const IpInstance& instance, uint64_t budget) {
    // Enumeration size check first, across all partitions.
    long double space = 0.0;
    for (int pid : instance.partition_ids) {
        long double prod = 1.0;
        for (const auto& v : instance.vars)
            if (v.partition == pid) prod *= static_cast<long double>(v.ub + 1);
        space += prod;
    }
    if (space > static_cast<long double>(budget)) {
        std::ostringstream os;
        os << "brute force budget exceeded: " << static_cast<double>(space)
           << " assignments > " << budget;
        throw ConfigError(os.str());
    }

    AllocationPlan best;
    best.status = AllocationPlan::Status::Infeasible;
    SubSolution best_sol;
    int best_pos = -1;
    std::vector<std::string> families;

    for (size_t pos = 0; pos < instance.partition_ids.size(); ++pos) {
        const SubProblem sp =
            make_subproblem(instance, instance.partition_ids[pos], static_cast<int>(pos));
        const size_t n = sp.cost.size();
        std::vector<int64_t> x(n, 0);
        SubSolution sol;
        while (true) {
            if (integer_feasible(sp, x)) {
                const double obj = exact_objective(sp, x);
                int64_t tot = 0;
                for (int64_t v : x) tot += v;
                if (!sol.feasible ||
                    solution_better(obj, tot, x, 0, sol.objective, sol.total, sol.x, 0)) {
                    sol.feasible = true;
                    sol.objective = obj;
                    sol.x = x;
                    sol.total = tot;
                }
            }
            // odometer increment
            size_t j = 0;
            while (j < n) {
                if (x[j] < sp.ub[j]) {
                    ++x[j];
                    break;
                }
                x[j] = 0;
                ++j;
            }
            if (j == n) break;
        }
        if (!sol.feasible) {
            families.push_back("partition " + std::to_string(sp.partition_id) + ": " +
                               diagnose_infeasibility(sp));
            continue;
        }
        if (best.status == AllocationPlan::Status::Infeasible ||
            solution_better(sol.objective, sol.total, sol.x, static_cast<int>(pos),
                            best_sol.objective, best_sol.total, best_sol.x, best_pos)) {
            best = plan_from(instance, sp, sol);
            best_sol = std::move(sol);
            best_pos = static_cast<int>(pos);
        }
    }
    if (best.status == AllocationPlan::Status::Infeasible) {
        std::ostringstream os;
        for (size_t i = 0; i < families.size(); ++i) os << (i ? "; " : "") << families[i];
        best.infeasible_family = os.str();
    }
    return best;
}

bool validate_plan(const IpInstance& instance, const AllocationPlan& plan, std::string* why) {
    auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    if (plan.status != AllocationPlan::Status::Optimal) return fail("plan not optimal");

    // Exactly one partition active.
    for (const auto& w : plan.workers)
        if (w.partition != plan.partition) return fail("plan mixes partitions");

    // Map counts back onto instance vars.
    std::map<std::tuple<std::string, int, RType, std::string>, int64_t> counts;
    for (const auto& w : plan.workers) {
        if (w.count < 0) return fail("negative worker count");
        counts[{w.location, w.partition, w.rtype, w.mode}] += w.count;
    }
    std::vector<int64_t> x(instance.vars.size(), 0);
    for (size_t k = 0; k < instance.vars.size(); ++k) {
        const auto& v = instance.vars[k];
        auto it = counts.find({v.location, v.partition, v.rtype, v.mode});
        if (it != counts.end()) {
            x[k] = it->second;
            counts.erase(it);
        }
    }
    if (!counts.empty()) return fail("plan references an index missing from the instance");

    for (size_t k = 0; k < instance.vars.size(); ++k) {
        if (x[k] > instance.vars[k].ub)
            return fail("worker count exceeds capacity bound at var " + std::to_string(k));
        if (instance.vars[k].slo_filtered && x[k] > 0)
            return fail("SLO-filtered index has nonzero workers");
    }

    // Demand rows for the chosen partition.
    const auto& dem = instance.demand.at(plan.partition);
    for (int r = 0; r < kNumRTypes; ++r) {
        for (size_t t = 0; t < dem[static_cast<size_t>(r)].size(); ++t) {
            const double need = instance.alpha * dem[static_cast<size_t>(r)][t];
            double got = 0.0;
            for (size_t k = 0; k < instance.vars.size(); ++k) {
                const auto& v = instance.vars[k];
                if (v.partition == plan.partition && static_cast<int>(v.rtype) == r)
                    got += v.rate_rps * static_cast<double>(x[k]);
            }
            if (got < need - 1e-9)
                return fail("demand unmet for type " + std::string(to_string(static_cast<RType>(r))));
        }
    }

    // Capacity rows.
    for (const auto& [key, max_gpus] : instance.capacity) {
        double used = 0.0;
        for (size_t k = 0; k < instance.vars.size(); ++k) {
            const auto& v = instance.vars[k];
            if (v.location != key.first) continue;
            auto it = v.footprint.find(key.second);
            if (it != v.footprint.end()) used += static_cast<double>(it->second * x[k]);
        }
        if (used > static_cast<double>(max_gpus) + 1e-9)
            return fail("GPU capacity exceeded at " + key.first + "/" + key.second);
    }

    // Objective re-computation.
    double obj = 0.0;
    for (size_t k = 0; k < instance.vars.size(); ++k)
        obj += instance.vars[k].cost * static_cast<double>(x[k]);
    if (std::abs(obj - plan.objective) > 1e-6 * std::max(1.0, std::abs(obj)))
        return fail("reported objective does not match the plan");
    return true;
}

std::string dump_instance(const IpInstance& inst) {
    std::ostringstream os;
    os.precision(17);
    os << "ip-instance v1\n";
    os << "objective " << inst.objective << "\n";
    os << "alpha " << inst.alpha << "\n";
    os << "delta_t " << inst.delta_t_s << "\n";
    os << "steps " << inst.steps << "\n";
    os << "epoch_start " << inst.epoch_start_s << "\n";
    for (const auto& [key, max_gpus] : inst.capacity)
        os << "capacity " << key.first << " " << key.second << " " << max_gpus << "\n";
    for (int pid : inst.partition_ids) {
        os << "partition " << pid << "\n";
        const auto& dem = inst.demand.at(pid);
        for (int r = 0; r < kNumRTypes; ++r) {
            os << "demand " << to_string(static_cast<RType>(r));
            for (double d : dem[static_cast<size_t>(r)]) os << " " << d;
            os << "\n";
        }
        for (const auto& v : inst.vars) {
            if (v.partition != pid) continue;
            os << "var " << v.location << " " << to_string(v.rtype) << " " << v.mode
               << " cost=" << v.cost << " rate=" << v.rate_rps << " ub=" << v.ub
               << " slo=" << (v.slo_filtered ? 1 : 0) << " footprint=";
            bool first = true;
            for (const auto& [g, cnt] : v.footprint) {
                if (!first) os << ",";
                os << g << ":" << cnt;
                first = false;
            }
            os << "\n";
        }
    }
    return os.str();
}

IpInstance parse_instance(const std::string& text) {
    IpInstance inst;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "ip-instance v1")
        throw ParseError("instance dump: bad magic line");
    int current_partition = -1;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string kw;
        ss >> kw;
        const std::string where = "instance dump line " + std::to_string(line_no);
        if (kw == "objective") {
            ss >> inst.objective;
        } else if (kw == "alpha") {
            ss >> inst.alpha;
        } else if (kw == "delta_t") {
            ss >> inst.delta_t_s;
        } else if (kw == "steps") {
            ss >> inst.steps;
        } else if (kw == "epoch_start") {
            ss >> inst.epoch_start_s;
        } else if (kw == "capacity") {
            std::string loc, gpu;
            int64_t max_gpus;
            if (!(ss >> loc >> gpu >> max_gpus)) throw ParseError(where + ": bad capacity");
            inst.capacity[{loc, gpu}] = max_gpus;
        } else if (kw == "partition") {
            if (!(ss >> current_partition)) throw ParseError(where + ": bad partition");
            inst.partition_ids.push_back(current_partition);
            inst.demand[current_partition] = {};
        } else if (kw == "demand") {
            if (current_partition < 0) throw ParseError(where + ": demand before partition");
            std::string rname;
            ss >> rname;
            const RType r = rtype_from_string(rname);
            std::vector<double> vals;
            double v;
            while (ss >> v) vals.push_back(v);
            inst.demand[current_partition][static_cast<size_t>(static_cast<int>(r))] = vals;
        } else if (kw == "var") {
            if (current_partition < 0) throw ParseError(where + ": var before partition");
            IpVar var;
            var.partition = current_partition;
            std::string rname;
            if (!(ss >> var.location >> rname >> var.mode))
                throw ParseError(where + ": bad var header");
            var.rtype = rtype_from_string(rname);
            std::string tok;
            while (ss >> tok) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos) throw ParseError(where + ": bad var field " + tok);
                const std::string key = tok.substr(0, eq);
                const std::string val = tok.substr(eq + 1);
                if (key == "cost")
                    var.cost = std::stod(val);
                else if (key == "rate")
                    var.rate_rps = std::stod(val);
                else if (key == "ub")
                    var.ub = std::stoll(val);
                else if (key == "slo")
                    var.slo_filtered = val == "1";
                else if (key == "footprint") {
                    std::istringstream fs(val);
                    std::string item;
                    while (std::getline(fs, item, ',')) {
                        const auto colon = item.find(':');
                        if (colon == std::string::npos)
                            throw ParseError(where + ": bad footprint " + val);
                        var.footprint[item.substr(0, colon)] = std::stoll(item.substr(colon + 1));
                    }
                } else {
                    throw ParseError(where + ": unknown var field " + key);
                }
            }
            inst.vars.push_back(std::move(var));
        } else {
            throw ParseError(where + ": unknown keyword " + kw);
        }
    }
    return inst;
}

}  // namespace ecosched
