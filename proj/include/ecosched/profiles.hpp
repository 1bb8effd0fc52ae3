#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ecosched/workload.hpp"

namespace ecosched {

// One GPU model at some set of sites. Power is affine in clock frequency,
// fitted from frequency-power curves; a sampled (f, W) table with linear
// interpolation may be supplied instead.
struct GpuModel {
    std::string name;
    double f_min_mhz = 300.0;
    double f_max_mhz = 1410.0;
    double p0_w = 0.0;          // per-GPU static term
    double p1_w_per_mhz = 0.0;  // per-GPU slope
    std::vector<std::pair<double, double>> power_table;  // overrides the affine fit when nonempty
    double freq_step_mhz = 15.0;
    std::map<std::string, int64_t> available;  // location -> GPU count
};

// Per-GPU power at clock f: the affine fit p0 + p1 f, or linear interpolation
// over the sampled table when one is present. f outside [f_min, f_max] is a
// DomainError.
double power_at(const GpuModel& gpu, double f_mhz);

struct ConfigKey {
    int partition = 0;
    RType rtype = RType::SS;
    std::string mode;

    auto operator<=>(const ConfigKey&) const = default;
};

// Measured characteristics of one worker configuration (partition, request
// type, work mode). A worker is a TP instance: `gpu_footprint` GPUs sharing
// one clock.
struct ConfigProfile {
    ConfigKey key;
    double power_full_w = 0.0;        // whole worker at f_max
    double max_throughput_rps = 0.0;  // admission capacity at f_max
    double measured_latency_s = 0.0;  // average latency used by the SLO pre-filter
    std::map<std::string, int64_t> gpu_footprint;
    double base_ttft_s = 0.0;  // at f_max
    double base_tbt_s = 0.0;   // at f_max
    double decode_a_tok_per_s_mhz = 0.0;  // r(f) = a f + b, whole worker
    double decode_b_tok_per_s = 0.0;
    int slots = 1;  // batch capacity B

    // Resolved at load from the footprint GPUs (intersection of their ranges).
    double f_min_mhz = 0.0;
    double f_max_mhz = 0.0;
    double freq_step_mhz = 15.0;

    double decode_rate(double f_mhz) const {
        return decode_a_tok_per_s_mhz * f_mhz + decode_b_tok_per_s;
    }
};

// (ttft, tbt) at frequency f: inverse-linear scaling from the profiled values
// at f_max. Isolated here so the scaling law can be swapped.
std::pair<double, double> scaled_latency(const ConfigProfile& profile, double f_mhz);

// Worker power at frequency f: sum of the footprint GPUs' curves at the
// shared clock.
double worker_power_at(const ConfigProfile& profile,
                       const std::vector<GpuModel>& gpus,
                       double f_mhz);

// Per-type latency thresholds driving the frequency controller's congestion
// signal.
struct SloThresholds {
    double tbt_ms = 150.0;
    double ttft_ms = 300.0;
    double e2e_s = 7.0;
};

// Locational marginal emission rate per site, kg CO2 per kWh, 5-minute
// samples. May be negative.
struct CarbonSeries {
    std::map<std::string, std::vector<std::pair<double, double>>> samples;  // (t_s, kg/kWh)

    double first_t(const std::string& location) const;
    double last_t(const std::string& location) const;
};

// Zero-order hold: value of the latest sample at or before t. t before the
// first sample is a DomainError; after the last sample the value holds.
double lme_at(const CarbonSeries& series, const std::string& location, double t_s);

struct ProfileSet {
    int64_t max_model_len = 4096;
    std::vector<GpuModel> gpus;
    std::vector<PartitionScheme> partitions;
    std::map<ConfigKey, ConfigProfile> configs;
    std::array<SloThresholds, kNumRTypes> miad_thresholds;
    std::array<double, kNumRTypes> slo_tolerance_s{0, 0, 0, 0};  // SLO-bar per type

    const GpuModel& gpu(const std::string& name) const;
    const PartitionScheme& partition(int id) const;
    const ConfigProfile& config(const ConfigKey& key) const;
    std::vector<std::string> locations() const;
};

ProfileSet load_profiles(const std::string& path);

// CSV with columns timestamp_s,location,lme and a "# unit: kg/kWh" or
// "# unit: g/kWh" header line; grams are converted to kg on ingest.
CarbonSeries load_carbon(const std::string& path);

}  // namespace ecosched
