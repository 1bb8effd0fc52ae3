#include "ecosched/freq_control.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ecosched/errors.hpp"

namespace ecosched {

namespace {

double utility_grad(const UtilityProblem& p, double y) {
    switch (p.utility) {
        case UtilityProblem::Utility::Log:
            return 1.0 / (y + p.log_eps);
        case UtilityProblem::Utility::Linear:
            return p.linear_weight;
    }
    return 0.0;
}

}  // namespace

PrimalDualResult primal_dual_solve(const UtilityProblem& problem,
                                   int steps,
                                   double k_y,
                                   double k_f,
                                   double k_gamma) {
    if (k_y <= 0 || k_f <= 0 || k_gamma <= 0)
        throw ConfigError("primal-dual step sizes must be positive");
    if (problem.num_requests < 1) throw ConfigError("need at least one request");
    if (problem.f_min >= problem.f_max) throw ConfigError("need f_min < f_max");

    const int n = problem.num_requests;
    std::vector<double> y(static_cast<size_t>(n), 1.0);
    double f = 0.5 * (problem.f_min + problem.f_max);
    double gamma = 1.0;

    const double p_slope = problem.power_p1;  // P'(f), affine power curve
    const double r_slope = problem.rate_a;    // r'(f), affine rate curve

    constexpr int kWindow = 1000;
    std::vector<double> windows;
    double window_acc = 0.0;
    int window_fill = 0;

    for (int it = 0; it < steps; ++it) {
        double sum_y = 0.0;
        for (double v : y) sum_y += v;
        const double r_f = problem.rate_a * f + problem.rate_b;

        window_acc += std::abs(sum_y - r_f) + std::abs(utility_grad(problem, y[0]) - gamma);
        if (++window_fill == kWindow) {
            windows.push_back(window_acc / kWindow);
            window_acc = 0.0;
            window_fill = 0;
        }

        for (double& v : y) {
            v += k_y * (utility_grad(problem, v) - gamma);
            v = std::max(0.0, v);
        }
        f += k_f * (-problem.beta * p_slope + gamma * r_slope);
        f = std::clamp(f, problem.f_min, problem.f_max);
        gamma += k_gamma * (sum_y - r_f);
        gamma = std::max(0.0, gamma);

        if (!std::isfinite(f) || !std::isfinite(gamma) ||
            std::any_of(y.begin(), y.end(), [](double v) { return !std::isfinite(v); })) {
            std::ostringstream os;
            os << "primal-dual diverged at iteration " << it << " with steps (" << k_y << ", "
               << k_f << ", " << k_gamma << ")";
            throw DivergenceError(os.str());
        }
    }

    PrimalDualResult res;
    res.y = y;
    res.f = f;
    res.gamma = gamma;
    res.iterations = steps;

    double sum_y = 0.0;
    for (double v : y) sum_y += v;
    const double r_f = problem.rate_a * f + problem.rate_b;
    const bool interior = f > problem.f_min + 1e-9 && f < problem.f_max - 1e-9;
    res.stationarity_f = interior ? std::abs(problem.beta * p_slope - gamma * r_slope) : 0.0;
    res.stationarity_y = 0.0;
    for (double v : y)
        if (v > 1e-12)
            res.stationarity_y = std::max(res.stationarity_y,
                                          std::abs(utility_grad(problem, v) - gamma));
    res.complementary_slack = std::abs(gamma * (r_f - sum_y));
    res.primal_infeasibility = std::max(0.0, sum_y - r_f);
    res.window_residuals = std::move(windows);
    return res;
}

double miad_step(MiadState& state, bool congested) {
    if (congested)
        state.f_mhz = std::min(state.mi * state.f_mhz, state.f_max);
    else
        state.f_mhz = std::max(state.f_mhz - state.ad_mhz, state.f_min);
    return state.f_mhz;
}

bool detect_congestion(std::span<const SloObservation> observations,
                       const std::array<SloThresholds, kNumRTypes>& thresholds,
                       RType rtype) {
    const SloThresholds& th = thresholds[static_cast<int>(rtype)];
    for (const auto& obs : observations) {
        if (obs.tbt_s >= 0 && obs.tbt_s * 1000.0 > th.tbt_ms) return true;
        if (obs.ttft_s >= 0 && obs.ttft_s * 1000.0 > th.ttft_ms) return true;
        if (obs.projected_e2e_s >= 0 && obs.projected_e2e_s > th.e2e_s) return true;
    }
    return false;
}

double quantize_frequency(double f_mhz, double f_min, double f_max, double step_mhz) {
    if (step_mhz <= 0) return std::clamp(f_mhz, f_min, f_max);
    const double snapped = f_min + std::round((f_mhz - f_min) / step_mhz) * step_mhz;
    return std::clamp(snapped, f_min, f_max);
}

}  // namespace ecosched
