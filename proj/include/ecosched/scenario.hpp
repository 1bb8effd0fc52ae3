#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ecosched/scheduler.hpp"

namespace ecosched {

struct PolicyConfig {
    Policy kind = Policy::LLF;
    double alpha_llf = 1.4;  // scheduling window factor
    double beta_llf = 5.0;   // violation window factor
    double tick_s = 1.0;
};

struct ControllerConfig {
    double mi = 2.0;
    double ad_mhz = 100.0;
    double tick_s = 1.0;
};

// Ablation knobs, named per the experiment harness flags.
inline const std::set<std::string>& known_knobs() {
    static const std::set<std::string> k{"multipartition", "tp_change", "miad", "llf"};
    return k;
}

struct Scenario {
    std::string name;
    std::string trace_path;
    std::string profile_path;
    std::string carbon_path;
    std::string objective = "emission";  // emission | energy
    PolicyConfig policy;
    ControllerConfig controller;
    double epoch_s = 1800.0;
    int epochs = 1;
    double alpha_risk = 1.1;
    double classifier_accuracy = 1.0;
    double forecast_noise = 0.0;
    uint64_t seed = 0;
    double switch_delay_s = 0.0354;
    double preempt_cost_s = 0.0;
    double idle_fraction = 1.0;
    bool best_effort = false;
    std::set<std::string> disabled;
    double qps_multiplier = 1.0;
    std::map<std::string, std::vector<double>> sweep_axes;  // qps | accuracy

    bool knob_disabled(const std::string& knob) const { return disabled.count(knob) > 0; }
    // Baseline = every knob off: one untyped pool, FCFS, f_max, epoch-1 plan held.
    bool baseline() const {
        for (const auto& k : known_knobs())
            if (!disabled.count(k)) return false;
        return true;
    }
    Policy effective_policy() const { return knob_disabled("llf") ? Policy::FCFS : policy.kind; }
};

// Parses a scenario file; relative data paths resolve against the scenario
// file's directory.
Scenario load_scenario(const std::string& path);

// Canonical serialization of the effective configuration; this is what gets
// hashed into artifact names and reports.
std::string scenario_canonical_json(const Scenario& s);
std::string scenario_config_hash(const Scenario& s);

}  // namespace ecosched
