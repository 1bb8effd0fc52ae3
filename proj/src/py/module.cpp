#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "ecosched/freq_control.hpp"
#include "ecosched/metrics.hpp"
#include "ecosched/pool_ip.hpp"
#include "ecosched/runner.hpp"
#include "ecosched/scheduler.hpp"
#include "ecosched/workload.hpp"

namespace py = pybind11;
using namespace ecosched;

namespace {

py::object json_loads(const std::string& text) {
    return py::module_::import("json").attr("loads")(text);
}

Scenario scenario_with_overrides(const std::string& path, py::kwargs kw) {
    Scenario s = load_scenario(path);
    if (kw.contains("objective")) s.objective = kw["objective"].cast<std::string>();
    if (kw.contains("seed")) s.seed = kw["seed"].cast<uint64_t>();
    if (kw.contains("qps_multiplier")) s.qps_multiplier = kw["qps_multiplier"].cast<double>();
    if (kw.contains("classifier_accuracy"))
        s.classifier_accuracy = kw["classifier_accuracy"].cast<double>();
    if (kw.contains("best_effort")) s.best_effort = kw["best_effort"].cast<bool>();
    if (kw.contains("disable"))
        for (auto knob : kw["disable"]) s.disabled.insert(knob.cast<std::string>());
    if (kw.contains("policy")) s.policy.kind = policy_from_string(kw["policy"].cast<std::string>());
    return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "carbon- and energy-aware LLM serving simulator (C++ core)";

    m.def(
        "classify",
        [](int64_t input_tokens, int64_t output_tokens, int64_t input_threshold,
           int64_t output_threshold, int64_t max_model_len) {
            PartitionScheme s{0, input_threshold, output_threshold, max_model_len};
            return std::string(to_string(classify(input_tokens, output_tokens, s)));
        },
        py::arg("input_tokens"), py::arg("output_tokens"), py::arg("input_threshold"),
        py::arg("output_threshold"), py::arg("max_model_len") = 4096,
        "Length-based request type (SS/SL/LS/LL); threshold values are Long.");

    m.def("expected_lat", &expected_lat, py::arg("predicted_tokens"), py::arg("ttft_s"),
          py::arg("tbt_s"), "Queueing-free execution estimate: tokens*tbt + ttft.");

    m.def(
        "laxity",
        [](double deadline_s, double now_s, double remaining_s) {
            return deadline_s - now_s - remaining_s;
        },
        py::arg("deadline_s"), py::arg("now_s"), py::arg("remaining_s"));

    m.def(
        "miad_step",
        [](double f_mhz, bool congested, double mi, double ad_mhz, double f_min, double f_max) {
            MiadState st{f_mhz, mi, ad_mhz, f_min, f_max};
            return miad_step(st, congested);
        },
        py::arg("f_mhz"), py::arg("congested"), py::arg("mi") = 2.0, py::arg("ad_mhz") = 100.0,
        py::arg("f_min") = 300.0, py::arg("f_max") = 1410.0,
        "One MIAD controller step: doubles under congestion, steps down otherwise.");

    m.def(
        "percentile",
        [](std::vector<double> samples, double p) -> py::object {
            auto v = percentile(std::move(samples), p);
            return v ? py::cast(*v) : py::none();
        },
        py::arg("samples"), py::arg("p"), "Nearest-rank percentile; None for empty samples.");

    m.def(
        "jain_index",
        [](std::vector<double> totals) -> py::object {
            auto v = jain_index(totals);
            return v ? py::cast(*v) : py::none();
        },
        py::arg("group_totals"), "(sum X)^2 / (K sum X^2); None when all totals are zero.");

    m.def(
        "primal_dual_solve",
        [](int num_requests, double p0, double p1, double rate_a, double rate_b, double beta,
           double f_min, double f_max, int steps, double k_y, double k_f, double k_gamma,
           const std::string& utility) {
            UtilityProblem up;
            up.num_requests = num_requests;
            up.power_p0_w = p0;
            up.power_p1 = p1;
            up.rate_a = rate_a;
            up.rate_b = rate_b;
            up.beta = beta;
            up.f_min = f_min;
            up.f_max = f_max;
            up.utility = utility == "linear" ? UtilityProblem::Utility::Linear
                                             : UtilityProblem::Utility::Log;
            const PrimalDualResult r = primal_dual_solve(up, steps, k_y, k_f, k_gamma);
            py::dict d;
            d["y"] = r.y;
            d["f"] = r.f;
            d["gamma"] = r.gamma;
            d["stationarity_f"] = r.stationarity_f;
            d["stationarity_y"] = r.stationarity_y;
            d["complementary_slack"] = r.complementary_slack;
            d["primal_infeasibility"] = r.primal_infeasibility;
            return d;
        },
        py::arg("num_requests"), py::arg("power_p0_w"), py::arg("power_p1"), py::arg("rate_a"),
        py::arg("rate_b"), py::arg("beta"), py::arg("f_min"), py::arg("f_max"),
        py::arg("steps") = 100000, py::arg("k_y") = 1e-2, py::arg("k_f") = 1e-2,
        py::arg("k_gamma") = 1e-2, py::arg("utility") = "log");

    m.def(
        "run_scenario",
        [](const std::string& scenario_path, const std::string& out_dir, py::kwargs kw) {
            const Scenario s = scenario_with_overrides(scenario_path, kw);
            const SimReport rep = run_scenario_to_disk(s, out_dir);
            return json_loads(rep.to_json());
        },
        py::arg("scenario_path"), py::arg("out_dir") = "out",
        "Run a scenario; returns the report as a dict. Keyword overrides: objective, seed, "
        "qps_multiplier, classifier_accuracy, best_effort, disable, policy.");

    m.def(
        "solve_pool_allocation",
        [](const std::string& scenario_path, int epoch, py::kwargs kw) {
            const Scenario s = scenario_with_overrides(scenario_path, kw);
            const IpInstance inst = build_epoch_instance(s, epoch);
            const AllocationPlan plan = solve(inst);
            py::dict d;
            d["status"] =
                plan.status == AllocationPlan::Status::Optimal ? "optimal" : "infeasible";
            d["partition"] = plan.partition;
            d["objective"] = plan.objective;
            py::list workers;
            for (const auto& w : plan.workers) {
                py::dict e;
                e["location"] = w.location;
                e["rtype"] = std::string(to_string(w.rtype));
                e["mode"] = w.mode;
                e["count"] = w.count;
                workers.append(e);
            }
            d["workers"] = workers;
            if (plan.status != AllocationPlan::Status::Optimal)
                d["infeasible_family"] = plan.infeasible_family;
            return d;
        },
        py::arg("scenario_path"), py::arg("epoch") = 0,
        "Build and exactly solve one epoch's worker-allocation program.");
}
