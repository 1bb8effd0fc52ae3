#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ecosched/freq_control.hpp"
#include "ecosched/pool_ip.hpp"
#include "ecosched/profiles.hpp"
#include "ecosched/scenario.hpp"
#include "ecosched/scheduler.hpp"
#include "ecosched/workload.hpp"

namespace ecosched {

// Raised when an epoch's allocation program has no solution and the run is
// not in best-effort mode.
struct InfeasibleEpochError : std::runtime_error {
    int epoch;
    explicit InfeasibleEpochError(int epoch_k, const std::string& family)
        : std::runtime_error("epoch " + std::to_string(epoch_k) +
                             ": allocation infeasible (" + family + ")"),
          epoch(epoch_k) {}
};

// Everything metrics needs about one request after the run.
struct RequestOutcome {
    int64_t id = -1;
    double arrival_s = 0.0;
    int64_t input_tokens = 0;
    int64_t output_tokens = 0;
    int64_t predicted_tokens = 0;
    RType true_label = RType::SS;
    RType pred_label = RType::SS;
    double lat_est_s = 0.0;
    double window_s = 0.0;  // alpha_llf * lat_est
    double first_token_at = -1.0;
    double finished_at = -1.0;
    int64_t tokens_done = 0;
    int preemptions = 0;
    std::vector<double> token_times;
};

struct WorkerSummary {
    int id = -1;
    std::string location;
    ConfigKey cfg;
    double energy_wh = 0.0;
    double emission_kg = 0.0;
    double spawned_at = 0.0;
    double retired_at = -1.0;  // -1: alive at end
};

struct EpochSummary {
    int k = 0;
    double start_s = 0.0;
    AllocationPlan plan;
    bool reused_previous = false;  // best-effort fallback or tp_change disabled
};

struct RunState {
    Scenario scenario;
    std::string config_hash;
    double horizon_s = 0.0;
    double total_energy_wh = 0.0;
    double total_emission_kg = 0.0;
    std::vector<RequestOutcome> requests;
    std::vector<WorkerSummary> workers;
    std::vector<EpochSummary> epochs;
    int64_t preemption_count = 0;
};

// Applies the qps sweep multiplier: m < 1 thins requests (seeded keep/drop),
// m >= 1 replicates whole copies plus a seeded fractional remainder; copies
// get small arrival offsets. Ids are reassigned after re-sorting.
std::vector<Request> apply_qps_multiplier(const std::vector<Request>& trace,
                                          double multiplier,
                                          uint64_t seed);

// Partition set visible to the allocator: trimmed to the first declared
// scheme when the multipartition knob is disabled.
ProfileSet restrict_profiles(const ProfileSet& profiles, const Scenario& scenario);

// Perfect-forecast traffic for the epoch starting at `start_s`: the upcoming
// arrivals classified per partition on true lengths (all-LL when the run is
// the untyped baseline), with the scenario's multiplicative noise knob
// applied. One summary per partition in `restricted`.
std::map<int, TrafficSummary> forecast_epoch_traffic(const Scenario& scenario,
                                                     const ProfileSet& restricted,
                                                     const std::vector<Request>& trace,
                                                     double start_s,
                                                     int epoch_k);

class Simulation {
  public:
    explicit Simulation(Scenario scenario);

    // Runs every epoch and, when `out_dir` is nonempty, writes events.jsonl
    // and freq_power.csv into it.
    RunState run(const std::string& out_dir = "");

    const ProfileSet& profiles() const { return *profiles_; }
    const CarbonSeries& carbon() const { return *carbon_; }

  private:
    Scenario scenario_;
    std::shared_ptr<ProfileSet> profiles_;
    std::shared_ptr<CarbonSeries> carbon_;
    std::vector<Request> trace_;       // actual arrivals (qps multiplier applied)
    std::vector<Request> base_trace_;  // what the forecaster sees

    struct Impl;
};

}  // namespace ecosched
