#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecosched/sim.hpp"

namespace ecosched {

// Nearest-rank percentile: the value at index ceil(p/100 * n) of the sorted
// sample (1-based). Empty samples yield no value. 0 < p <= 100.
std::optional<double> percentile(std::vector<double> samples, double p);

// (sum X)^2 / (K sum X^2) over the given group totals. Groups given as-is;
// K = X.size(). All-zero totals yield no value.
std::optional<double> jain_index(std::span<const double> group_totals);

struct MetricBlock {
    std::optional<double> mean, p50, p90, p99;
    int64_t samples = 0;
};

struct TypeBreakdown {
    int64_t requests = 0;
    std::optional<double> violation_rate;
    std::optional<double> jain;
    MetricBlock e2e, ttft, tbt;
};

struct SimReport {
    std::string scenario_name;
    std::string config_hash;
    uint64_t seed = 0;
    std::string policy;
    std::string objective;
    double qps_multiplier = 1.0;
    double classifier_accuracy = 1.0;
    double horizon_s = 0.0;

    double energy_wh = 0.0;
    double emission_kg = 0.0;
    MetricBlock e2e, ttft, tbt, tbt_pooled;
    std::optional<double> violation_rate;
    std::optional<double> jain_fairness;
    std::array<TypeBreakdown, kNumRTypes> per_type;
    int64_t total_requests = 0;
    int64_t finished_requests = 0;
    int64_t preemptions = 0;

    struct EpochRow {
        int k = 0;
        int partition = -1;
        std::string status;  // optimal | reused | held
        double objective = 0.0;
        int64_t workers = 0;
        std::vector<PlanEntry> plan;
    };
    std::vector<EpochRow> epochs;

    std::string to_json() const;    // pretty-printed, stable field order
    std::string to_csv_row() const; // one flat row
    static std::string csv_header();
};

// Fraction of requests whose end-to-end latency exceeds beta * Lat; requests
// unfinished at the end of the run count as violations. No value when there
// are no requests.
std::optional<double> violation_rate(std::span<const RequestOutcome> requests, double beta_llf);

// Jain fairness over K quartile groups by true output length; x_i counts a
// request's tokens finishing within its window W_i. Empty quartiles are
// excluded from K; no value when every group total is zero.
std::optional<double> jain_fairness(std::span<const RequestOutcome> requests, int k_groups = 4);

SimReport build_report(const RunState& run);

// Second-pass integrator over the written artifacts; used to cross-check the
// report's accounting totals.
struct RecomputedTotals {
    double energy_wh = 0.0;
    double emission_kg = 0.0;
    int64_t finish_events = 0;
    int64_t token_count = 0;
};
RecomputedTotals recompute_from_artifacts(const std::string& events_path,
                                          const std::string& freq_csv_path,
                                          const CarbonSeries& carbon,
                                          double tick_s);

}  // namespace ecosched
