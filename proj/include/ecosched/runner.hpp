#pragma once

#include <string>
#include <vector>

#include "ecosched/metrics.hpp"
#include "ecosched/pool_ip.hpp"
#include "ecosched/scenario.hpp"
#include "ecosched/sim.hpp"

namespace ecosched {

struct RunPaths {
    std::string dir;
    std::string report_json;
    std::string report_csv;
    std::string events;
    std::string freq_csv;
};

// <out_root>/<scenario name>-<config hash>/
RunPaths artifact_paths(const Scenario& scenario, const std::string& out_root);

// Executes the scenario and writes report.json, report.csv, events.jsonl and
// freq_power.csv under the artifact directory.
SimReport run_scenario_to_disk(const Scenario& scenario, const std::string& out_root);

// The epoch's allocation program exactly as the run would build it (perfect
// forecast of the epoch's arrivals), for offline debugging dumps.
IpInstance build_epoch_instance(const Scenario& scenario, int epoch_k);

struct SweepPoint {
    int index = 0;
    double value = 0.0;
    bool ok = false;
    std::string error;
    SimReport report;  // valid when ok
};

// One run per grid point with seeds derived from (base seed, point index);
// failed points are recorded and the sweep continues. Points may run in
// parallel up to `jobs`. Writes sweep_<axis>.csv under out_root and returns
// its path.
std::string run_sweep_to_disk(const Scenario& scenario,
                              const std::string& axis,
                              const std::string& out_root,
                              int jobs,
                              std::vector<SweepPoint>* points_out = nullptr);

}  // namespace ecosched
