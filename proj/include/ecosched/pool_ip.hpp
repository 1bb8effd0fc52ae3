#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ecosched/profiles.hpp"
#include "ecosched/workload.hpp"

namespace ecosched {

// One decision variable of the epoch allocation program: the number of
// workers at `location` running config (partition, rtype, mode).
struct IpVar {
    std::string location;
    int partition = 0;
    RType rtype = RType::SS;
    std::string mode;

    double cost = 0.0;      // lambda-weighted energy over the epoch (kg, or kWh for energy objective)
    double rate_rps = 0.0;  // admission capacity per worker
    std::map<std::string, int64_t> footprint;  // GPUs per worker, by model
    int64_t ub = 0;         // capacity-implied bound; 0 when SLO-filtered
    bool slo_filtered = false;
};

struct IpInstance {
    std::string objective = "emission";  // or "energy"
    double alpha = 1.1;
    double delta_t_s = 300.0;
    int steps = 6;
    double epoch_start_s = 0.0;

    std::vector<int> partition_ids;  // declared order; also the cross-partition tie order
    std::vector<IpVar> vars;         // grouped by partition, (location, rtype, mode) sorted
    std::map<std::pair<std::string, std::string>, int64_t> capacity;  // (location, gpu) -> max
    std::map<int, std::array<std::vector<double>, kNumRTypes>> demand;  // [partition][rtype][step]
};

struct PlanEntry {
    std::string location;
    int partition = 0;
    RType rtype = RType::SS;
    std::string mode;
    int64_t count = 0;
};

struct AllocationPlan {
    enum class Status { Optimal, Infeasible };
    Status status = Status::Infeasible;
    int partition = -1;
    double objective = 0.0;
    std::vector<PlanEntry> workers;      // nonzero counts, instance var order
    std::string infeasible_family;       // set when infeasible: which constraint family binds
    int64_t total_workers() const;
};

// Assembles the epoch program from profiles, the carbon series and per-
// partition peak-QPS forecasts. `traffic` must hold one summary per declared
// partition covering exactly the epoch's steps. The energy objective uses
// lambda = 1 everywhere. Indices whose measured latency exceeds the type's
// SLO bar are fixed to zero.
IpInstance build_instance(const ProfileSet& profiles,
                          const CarbonSeries& carbon,
                          const std::map<int, TrafficSummary>& traffic,
                          double epoch_start_s,
                          const std::string& objective,
                          double alpha);

// Exact solve: one bounded integer program per partition (branch-and-bound
// over the LP relaxation), then the best partition. Ties: lower objective,
// then fewer total workers, then lexicographic var order, then partition
// declaration order.
AllocationPlan solve(const IpInstance& instance);

// Exhaustive reference search; refuses when the enumeration space exceeds
// `budget` assignments.
AllocationPlan brute_force_solve(const IpInstance& instance, uint64_t budget = 10000000);

// Re-checks a plan against every constraint. Returns true when valid;
// otherwise fills `why`.
bool validate_plan(const IpInstance& instance, const AllocationPlan& plan, std::string* why = nullptr);

// Text round-trip for offline debugging.
std::string dump_instance(const IpInstance& instance);
IpInstance parse_instance(const std::string& text);

}  // namespace ecosched
