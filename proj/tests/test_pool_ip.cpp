#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>
#include <random>

#include "ecosched/errors.hpp"
#include "ecosched/pool_ip.hpp"
#include "ecosched/rng.hpp"

using namespace ecosched;

namespace {

IpVar make_var(const std::string& loc, int partition, RType rtype, const std::string& mode,
               double cost, double rate, int64_t ub,
               std::map<std::string, int64_t> footprint = {{"g", 1}}) {
    IpVar v;
    v.location = loc;
    v.partition = partition;
    v.rtype = rtype;
    v.mode = mode;
    v.cost = cost;
    v.rate_rps = rate;
    v.ub = ub;
    v.footprint = std::move(footprint);
    return v;
}

// Test-side constraint checker, independent of the library's validate_plan.
bool independently_valid(const IpInstance& inst, const AllocationPlan& plan) {
    if (plan.status != AllocationPlan::Status::Optimal) return false;
    std::vector<int64_t> x(inst.vars.size(), 0);
    for (const auto& w : plan.workers) {
        if (w.partition != plan.partition) return false;
        bool found = false;
        for (size_t k = 0; k < inst.vars.size(); ++k) {
            const auto& v = inst.vars[k];
            if (v.location == w.location && v.partition == w.partition && v.rtype == w.rtype &&
                v.mode == w.mode) {
                x[k] += w.count;
                found = true;
                break;
            }
        }
        if (!found) return false;
    }
    for (size_t k = 0; k < inst.vars.size(); ++k)
        if (x[k] < 0 || x[k] > inst.vars[k].ub) return false;

    const auto& dem = inst.demand.at(plan.partition);
    for (int r = 0; r < kNumRTypes; ++r)
        for (size_t t = 0; t < dem[static_cast<size_t>(r)].size(); ++t) {
            double got = 0;
            for (size_t k = 0; k < inst.vars.size(); ++k)
                if (inst.vars[k].partition == plan.partition &&
                    static_cast<int>(inst.vars[k].rtype) == r)
                    got += inst.vars[k].rate_rps * static_cast<double>(x[k]);
            if (got < inst.alpha * dem[static_cast<size_t>(r)][t] - 1e-9) return false;
        }
    for (const auto& [key, cap] : inst.capacity) {
        double used = 0;
        for (size_t k = 0; k < inst.vars.size(); ++k) {
            const auto& v = inst.vars[k];
            if (v.location != key.first) continue;
            auto it = v.footprint.find(key.second);
            if (it != v.footprint.end()) used += static_cast<double>(it->second * x[k]);
        }
        if (used > static_cast<double>(cap) + 1e-9) return false;
    }
    double obj = 0;
    for (size_t k = 0; k < inst.vars.size(); ++k)
        obj += inst.vars[k].cost * static_cast<double>(x[k]);
    return std::abs(obj - plan.objective) <= 1e-9 * std::max(1.0, std::abs(obj));
}

ProfileSet tiny_profiles() {
    ProfileSet ps;
    GpuModel g;
    g.name = "g";
    g.f_min_mhz = 300;
    g.f_max_mhz = 1410;
    g.p0_w = 100;
    g.p1_w_per_mhz = 0.2;
    g.available = {{"loc1", 4}, {"loc2", 4}};
    ps.gpus.push_back(g);
    ps.partitions.push_back({1, 184, 444, 4096});
    for (RType r : kAllRTypes) {
        ConfigProfile c;
        c.key = {1, r, "m1"};
        c.power_full_w = 1000.0;
        c.max_throughput_rps = 100.0;
        c.measured_latency_s = 1.0;
        c.gpu_footprint = {{"g", 2}};
        c.base_ttft_s = 0.1;
        c.base_tbt_s = 0.01;
        c.decode_a_tok_per_s_mhz = 0.1;
        c.slots = 4;
        c.f_min_mhz = 300;
        c.f_max_mhz = 1410;
        ps.configs[c.key] = c;
    }
    ps.slo_tolerance_s = {10, 10, 10, 10};
    return ps;
}

TrafficSummary flat_traffic(double ss_qps) {
    TrafficSummary ts;
    ts.start_s = 0;
    ts.horizon_s = 1800;
    for (auto& v : ts.peak_qps) v.assign(6, 0.0);
    for (auto& v : ts.peak_qps[0]) v = ss_qps;  // SS
    return ts;
}

}  // namespace

TEST_CASE("build_instance: unit cost arithmetic, lambda == 1") {
    const ProfileSet ps = tiny_profiles();
    CarbonSeries carbon;
    carbon.samples["loc1"] = {{0.0, 0.7}};
    carbon.samples["loc2"] = {{0.0, 0.7}};
    std::map<int, TrafficSummary> traffic{{1, flat_traffic(1.0)}};

    const IpInstance inst = build_instance(ps, carbon, traffic, 0.0, "energy", 1.1);
    // P = 1000 W, 6 steps of 300 s: 0.5 kWh per worker
    for (const auto& v : inst.vars) CHECK(v.cost == doctest::Approx(0.5));
    CHECK(inst.vars.size() == 2 * 4 * 1);  // 2 locations x 4 types x 1 mode
    for (const auto& v : inst.vars) CHECK(v.ub == 2);  // 4 GPUs / 2 per worker
}

TEST_CASE("build_instance: negative lambda gives negative cost") {
    const ProfileSet ps = tiny_profiles();
    CarbonSeries carbon;
    carbon.samples["loc1"] = {{0.0, -0.1}};
    carbon.samples["loc2"] = {{0.0, 0.2}};
    std::map<int, TrafficSummary> traffic{{1, flat_traffic(1.0)}};
    const IpInstance inst = build_instance(ps, carbon, traffic, 0.0, "emission", 1.1);
    for (const auto& v : inst.vars) {
        if (v.location == "loc1")
            CHECK(v.cost < 0);
        else
            CHECK(v.cost > 0);
    }
}

TEST_CASE("build_instance: SLO pre-filter forces the index to zero") {
    ProfileSet ps = tiny_profiles();
    ps.configs[{1, RType::SS, "m1"}].measured_latency_s = 99.0;  // above the 10 s bar
    CarbonSeries carbon;
    carbon.samples["loc1"] = {{0.0, 0.1}};
    carbon.samples["loc2"] = {{0.0, 0.1}};
    std::map<int, TrafficSummary> traffic{{1, flat_traffic(0.0)}};
    const IpInstance inst = build_instance(ps, carbon, traffic, 0.0, "emission", 1.1);
    for (const auto& v : inst.vars) {
        if (v.rtype == RType::SS) {
            CHECK(v.ub == 0);
            CHECK(v.slo_filtered);
        } else {
            CHECK(v.ub == 2);
        }
    }
}

TEST_CASE("build_instance: missing profile entry is a configuration error") {
    ProfileSet ps = tiny_profiles();
    ps.configs.erase({1, RType::LL, "m1"});
    CarbonSeries carbon;
    carbon.samples["loc1"] = {{0.0, 0.1}};
    carbon.samples["loc2"] = {{0.0, 0.1}};
    std::map<int, TrafficSummary> traffic{{1, flat_traffic(1.0)}};
    CHECK_THROWS_AS(build_instance(ps, carbon, traffic, 0.0, "emission", 1.1), ConfigError);
}

TEST_CASE("solve: zero demand gives the empty plan at objective zero") {
    IpInstance inst;
    inst.partition_ids = {1};
    inst.alpha = 1.1;
    inst.vars.push_back(make_var("a", 1, RType::SS, "m", 0.25, 1.0, 3));
    inst.vars.push_back(make_var("b", 1, RType::SS, "m", 0.5, 1.0, 3));
    inst.demand[1] = {};
    for (auto& d : inst.demand[1]) d.assign(1, 0.0);
    const AllocationPlan plan = solve(inst);
    REQUIRE(plan.status == AllocationPlan::Status::Optimal);
    CHECK(plan.objective == 0.0);
    CHECK(plan.workers.empty());
    CHECK(plan.total_workers() == 0);
}

TEST_CASE("solve: two locations, negative lambda attracts all workers") {
    // 1 type, 1 mode, P = 1 kW, Lbar = 100 req/s, 2 GPUs per worker, 4 GPUs
    // per site, demand alpha*L = 150 req/s. Verified below by exhaustive
    // enumeration over x in {0,1,2}^2.
    IpInstance inst;
    inst.partition_ids = {1};
    inst.alpha = 1.0;  // demand already includes the risk factor
    const double cost1 = 0.01 * 1.0 * 0.5;    // lambda=+0.01 over 0.5 kWh
    const double cost2 = -0.005 * 1.0 * 0.5;  // lambda=-0.005
    inst.vars.push_back(make_var("loc1", 1, RType::SS, "m", cost1, 100.0, 2, {{"g", 2}}));
    inst.vars.push_back(make_var("loc2", 1, RType::SS, "m", cost2, 100.0, 2, {{"g", 2}}));
    inst.capacity[{"loc1", "g"}] = 4;
    inst.capacity[{"loc2", "g"}] = 4;
    inst.demand[1] = {};
    for (auto& d : inst.demand[1]) d.clear();
    inst.demand[1][0] = {150.0};

    // independent oracle: enumerate all four corners
    double best = 1e18;
    std::vector<int64_t> best_x;
    for (int64_t x1 = 0; x1 <= 2; ++x1)
        for (int64_t x2 = 0; x2 <= 2; ++x2) {
            if (100.0 * static_cast<double>(x1 + x2) < 150.0) continue;
            const double obj = cost1 * static_cast<double>(x1) + cost2 * static_cast<double>(x2);
            if (obj < best) {
                best = obj;
                best_x = {x1, x2};
            }
        }
    REQUIRE(best_x == std::vector<int64_t>{0, 2});

    const AllocationPlan plan = solve(inst);
    REQUIRE(plan.status == AllocationPlan::Status::Optimal);
    CHECK(plan.objective == doctest::Approx(best).epsilon(1e-12));
    CHECK(plan.objective < 0);
    REQUIRE(plan.workers.size() == 1);
    CHECK(plan.workers[0].location == "loc2");
    CHECK(plan.workers[0].count == 2);

    const AllocationPlan bf = brute_force_solve(inst);
    CHECK(bf.objective == plan.objective);
}

TEST_CASE("solve: demand beyond capacity is infeasible with a named family") {
    IpInstance inst;
    inst.partition_ids = {1};
    inst.alpha = 1.0;
    inst.vars.push_back(make_var("a", 1, RType::SS, "m", 1.0, 1.0, 2));
    inst.demand[1] = {};
    for (auto& d : inst.demand[1]) d.clear();
    inst.demand[1][0] = {10.0};  // needs 10 req/s, capacity 2
    const AllocationPlan plan = solve(inst);
    CHECK(plan.status == AllocationPlan::Status::Infeasible);
    CHECK(plan.infeasible_family.find("throughput demand") != std::string::npos);

    const AllocationPlan bf = brute_force_solve(inst);
    CHECK(bf.status == AllocationPlan::Status::Infeasible);
}

TEST_CASE("brute force: single index examples and budget refusal") {
    IpInstance inst;
    inst.partition_ids = {1};
    inst.alpha = 1.0;
    inst.vars.push_back(make_var("a", 1, RType::SS, "m", 1.0, 1.0, 3));
    inst.demand[1] = {};
    for (auto& d : inst.demand[1]) d.clear();
    inst.demand[1][0] = {2.0};
    const AllocationPlan plan = brute_force_solve(inst);
    REQUIRE(plan.status == AllocationPlan::Status::Optimal);
    REQUIRE(plan.workers.size() == 1);
    CHECK(plan.workers[0].count == 2);

    IpInstance big;
    big.partition_ids = {1};
    big.demand[1] = {};
    for (auto& d : big.demand[1]) d.clear();
    for (int i = 0; i < 30; ++i)
        big.vars.push_back(make_var("a" + std::to_string(i), 1, RType::SS, "m", 1.0, 1.0, 3));
    CHECK_THROWS_AS(brute_force_solve(big, 1000), ConfigError);
}

namespace {

IpInstance random_instance(std::mt19937_64& rng) {
    IpInstance inst;
    const int n_loc = static_cast<int>(uniform_int(rng, 1, 2));
    const int n_modes = static_cast<int>(uniform_int(rng, 1, 2));
    const int n_types = static_cast<int>(uniform_int(rng, 1, 3));
    const int n_parts = static_cast<int>(uniform_int(rng, 1, 2));
    inst.alpha = 1.0 + uniform01(rng) * 0.3;

    for (int loc = 0; loc < n_loc; ++loc)
        inst.capacity[{"L" + std::to_string(loc), "g"}] = uniform_int(rng, 1, 6);

    for (int p = 0; p < n_parts; ++p) {
        const int pid = p + 1;
        inst.partition_ids.push_back(pid);
        inst.demand[pid] = {};
        for (auto& d : inst.demand[pid]) d.clear();
        for (int t = 0; t < n_types; ++t) {
            const int steps = 2;
            inst.demand[pid][static_cast<size_t>(t)].assign(
                static_cast<size_t>(steps), 0.0);
            for (int s = 0; s < steps; ++s)
                inst.demand[pid][static_cast<size_t>(t)][static_cast<size_t>(s)] =
                    uniform01(rng) * 4.0;
        }
        for (int loc = 0; loc < n_loc; ++loc)
            for (int t = 0; t < n_types; ++t)
                for (int m = 0; m < n_modes; ++m) {
                    const int64_t g_per_worker = uniform_int(rng, 1, 2);
                    const int64_t cap = inst.capacity[{"L" + std::to_string(loc), "g"}];
                    IpVar v = make_var("L" + std::to_string(loc), pid,
                                       static_cast<RType>(t), "m" + std::to_string(m),
                                       uniform01(rng) * 3.0 - 1.0,            // cost in [-1, 2)
                                       0.5 + uniform01(rng) * 2.5,            // rate
                                       std::min<int64_t>(4, cap / g_per_worker),
                                       {{"g", g_per_worker}});
                    inst.vars.push_back(v);
                }
    }
    // keep the exhaustive reference within its enumeration budget
    for (bool shrunk = true; shrunk;) {
        long double space = 0.0;
        for (int pid : inst.partition_ids) {
            long double prod = 1.0;
            for (const auto& v : inst.vars)
                if (v.partition == pid) prod *= static_cast<long double>(v.ub + 1);
            space += prod;
        }
        shrunk = false;
        if (space > 2000000.0L)
            for (auto& v : inst.vars)
                if (v.ub > 1) {
                    v.ub -= 1;
                    shrunk = true;
                    break;
                }
    }
    return inst;
}

}  // namespace

TEST_CASE("oracle equivalence: solve matches brute force on 200 random instances") {
    auto rng = make_rng(20240917);
    int optimal = 0, infeasible = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const IpInstance inst = random_instance(rng);
        const AllocationPlan fast = solve(inst);
        const AllocationPlan slow = brute_force_solve(inst, 50000000);
        REQUIRE(fast.status == slow.status);
        if (fast.status == AllocationPlan::Status::Optimal) {
            ++optimal;
            CHECK(fast.objective == slow.objective);  // exact double equality
            CHECK(independently_valid(inst, fast));
        } else {
            ++infeasible;
        }
    }
    // the generator must exercise both outcomes
    CHECK(optimal > 50);
    CHECK(infeasible > 0);
}

TEST_CASE("monotonicity: adding capacity never hurts, adding demand never helps") {
    auto rng = make_rng(777);
    for (int trial = 0; trial < 40; ++trial) {
        IpInstance inst = random_instance(rng);
        const AllocationPlan base = solve(inst);

        IpInstance more_cap = inst;
        for (auto& [k, v] : more_cap.capacity) v += 2;
        for (auto& v : more_cap.vars) {
            const int64_t g = v.footprint.at("g");
            v.ub = std::min<int64_t>(4, more_cap.capacity.at({v.location, "g"}) / g);
        }
        const AllocationPlan richer = solve(more_cap);
        if (base.status == AllocationPlan::Status::Optimal) {
            REQUIRE(richer.status == AllocationPlan::Status::Optimal);
            CHECK(richer.objective <= base.objective + 1e-9);
        }

        IpInstance more_demand = inst;
        for (auto& [pid, dem] : more_demand.demand)
            for (auto& per_type : dem)
                for (double& d : per_type) d *= 1.2;
        const AllocationPlan tighter = solve(more_demand);
        if (tighter.status == AllocationPlan::Status::Optimal &&
            base.status == AllocationPlan::Status::Optimal)
            CHECK(tighter.objective >= base.objective - 1e-9);
    }
}

TEST_CASE("negative-LME attraction: strictly cheaper site takes the whole plan") {
    auto rng = make_rng(31337);
    for (int trial = 0; trial < 25; ++trial) {
        IpInstance inst;
        inst.partition_ids = {1};
        inst.alpha = 1.0;
        inst.capacity[{"cheap", "g"}] = 8;
        inst.capacity[{"dear", "g"}] = 8;
        const double lam_cheap = -0.2 * uniform01(rng) - 0.01;
        const double lam_dear = 0.3 * uniform01(rng) + 0.01;
        inst.demand[1] = {};
        for (auto& d : inst.demand[1]) d.clear();
        inst.demand[1][0] = {uniform01(rng) * 3.0};
        inst.vars.push_back(make_var("cheap", 1, RType::SS, "m", lam_cheap, 1.0, 8));
        inst.vars.push_back(make_var("dear", 1, RType::SS, "m", lam_dear, 1.0, 8));
        const AllocationPlan plan = solve(inst);
        REQUIRE(plan.status == AllocationPlan::Status::Optimal);
        CHECK(plan.objective < 0);
        for (const auto& w : plan.workers) CHECK(w.location == "cheap");
        // capacity-filling at negative cost
        CHECK(plan.total_workers() == 8);
    }
}

TEST_CASE("plan validation: the library checker agrees") {
    auto rng = make_rng(111);
    const IpInstance inst = random_instance(rng);
    const AllocationPlan plan = solve(inst);
    if (plan.status == AllocationPlan::Status::Optimal) {
        std::string why;
        CHECK(validate_plan(inst, plan, &why));
        AllocationPlan corrupt = plan;
        corrupt.objective += 1.0;
        CHECK_FALSE(validate_plan(inst, corrupt, &why));
    }
}

TEST_CASE("instance dump/parse round-trip") {
    auto rng = make_rng(5150);
    const IpInstance inst = random_instance(rng);
    const std::string text = dump_instance(inst);
    const IpInstance back = parse_instance(text);
    CHECK(back.objective == inst.objective);
    CHECK(back.alpha == inst.alpha);
    CHECK(back.partition_ids == inst.partition_ids);
    CHECK(back.capacity == inst.capacity);
    REQUIRE(back.vars.size() == inst.vars.size());
    for (size_t k = 0; k < inst.vars.size(); ++k) {
        CHECK(back.vars[k].location == inst.vars[k].location);
        CHECK(back.vars[k].cost == inst.vars[k].cost);
        CHECK(back.vars[k].rate_rps == inst.vars[k].rate_rps);
        CHECK(back.vars[k].ub == inst.vars[k].ub);
        CHECK(back.vars[k].footprint == inst.vars[k].footprint);
    }
    // solving the round-tripped instance gives the same objective
    const AllocationPlan a = solve(inst);
    const AllocationPlan b = solve(back);
    CHECK((a.status == AllocationPlan::Status::Optimal) ==
          (b.status == AllocationPlan::Status::Optimal));
    if (a.status == AllocationPlan::Status::Optimal) CHECK(a.objective == b.objective);
    CHECK_THROWS_AS(parse_instance("garbage"), ParseError);
}
