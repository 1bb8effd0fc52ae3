#pragma once

#include <array>
#include <span>
#include <vector>

#include "ecosched/profiles.hpp"
#include "ecosched/workload.hpp"

namespace ecosched {

// Utility-maximization instance: choose per-request service rates y_i and a
// GPU frequency f to maximize sum U_i(y_i) - beta P(f) subject to
// sum y_i <= r(f). Used as the verification reference for the runtime MIAD
// policy; the built-in forms keep derivatives analytic.
struct UtilityProblem {
    enum class Utility { Log, Linear };
    Utility utility = Utility::Log;
    int num_requests = 1;
    double linear_weight = 1.0;  // U(y) = w y
    double log_eps = 1e-9;       // U(y) = log(y + eps)

    double power_p0_w = 0.0;  // P(f) = p0 + p1 f
    double power_p1 = 0.0;
    double rate_a = 1.0;  // r(f) = a f + b
    double rate_b = 0.0;
    double beta = 1.0;
    double f_min = 0.0;
    double f_max = 0.0;
};

struct PrimalDualResult {
    std::vector<double> y;
    double f = 0.0;
    double gamma = 0.0;
    // KKT residuals at the returned point.
    double stationarity_f = 0.0;      // |beta P'(f) - gamma r'(f)| for interior f
    double stationarity_y = 0.0;      // max_i |U'(y_i) - gamma| over y_i > 0
    double complementary_slack = 0.0; // |gamma (r(f) - sum y)|
    double primal_infeasibility = 0.0;  // max(0, sum y - r(f))
    int iterations = 0;
    // Duality-gap surrogate |sum y - r(f)| + |U'(y_1) - gamma| averaged over
    // blocks of 1000 iterations; the trend diagnostic for convergence.
    std::vector<double> window_residuals;
};

// Projected gradient ascent on primal (y, f) and descent on the dual gamma.
// Throws DivergenceError when an iterate goes non-finite.
PrimalDualResult primal_dual_solve(const UtilityProblem& problem,
                                   int steps,
                                   double k_y,
                                   double k_f,
                                   double k_gamma);

// Multiplicative-increase / additive-decrease frequency controller state for
// one worker.
struct MiadState {
    double f_mhz = 0.0;
    double mi = 2.0;        // multiplier under congestion
    double ad_mhz = 100.0;  // decrement when idle
    double f_min = 300.0;
    double f_max = 1410.0;
};

// One controller tick: congested -> min(M f, f_max); else max(f - delta,
// f_min). Returns the new (continuous) frequency.
double miad_step(MiadState& state, bool congested);

// One latency observation from the previous controller tick. Negative fields
// are absent.
struct SloObservation {
    double ttft_s = -1.0;
    double tbt_s = -1.0;
    double projected_e2e_s = -1.0;
};

// True iff any observation exceeds its per-type threshold. No observations
// means no congestion.
bool detect_congestion(std::span<const SloObservation> observations,
                       const std::array<SloThresholds, kNumRTypes>& thresholds,
                       RType rtype);

// Snap a continuous frequency onto the actuation grid (step anchored at
// f_min), clamped into [f_min, f_max].
double quantize_frequency(double f_mhz, double f_min, double f_max, double step_mhz);

}  // namespace ecosched
