// Scenario runner and experiment harness.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ecosched/errors.hpp"
#include "ecosched/rng.hpp"
#include "ecosched/runner.hpp"

namespace es = ecosched;

namespace {

// Exit codes: 0 ok, 1 config/other, 2 I/O, 3 infeasible allocation.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitIo = 2;
constexpr int kExitInfeasible = 3;

struct CommonOpts {
    std::string scenario_path;
    std::string out_dir = "out";
    std::vector<std::string> disable;
    std::string objective;
    int64_t seed = -1;
    bool best_effort = false;
    double qps = 0.0;
    double accuracy = -1.0;
};

es::Scenario load_with_overrides(const CommonOpts& o) {
    es::Scenario s = es::load_scenario(o.scenario_path);
    for (const auto& d : o.disable) {
        std::stringstream ss(d);
        std::string knob;
        while (std::getline(ss, knob, ',')) {
            if (!es::known_knobs().count(knob))
                throw es::ConfigError("unknown knob: " + knob);
            s.disabled.insert(knob);
        }
    }
    if (!o.objective.empty()) {
        if (o.objective != "emission" && o.objective != "energy")
            throw es::ConfigError("objective must be emission or energy");
        s.objective = o.objective;
    }
    if (o.seed >= 0) s.seed = static_cast<uint64_t>(o.seed);
    if (o.best_effort) s.best_effort = true;
    if (o.qps > 0) s.qps_multiplier = o.qps;
    if (o.accuracy >= 0) s.classifier_accuracy = o.accuracy;
    return s;
}

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("scenario", o.scenario_path, "scenario JSON file")->required();
    cmd->add_option("--out", o.out_dir, "output root directory");
    cmd->add_option("--disable", o.disable,
                    "knobs to disable (multipartition, tp_change, miad, llf); comma-separable");
    cmd->add_option("--objective", o.objective, "emission | energy");
    cmd->add_option("--seed", o.seed, "override the scenario seed");
    cmd->add_flag("--best-effort", o.best_effort,
                  "keep the previous epoch's plan when an epoch is infeasible");
    cmd->add_option("--qps", o.qps, "override the qps multiplier");
    cmd->add_option("--accuracy", o.accuracy, "override the classifier accuracy");
}

int cmd_run(const CommonOpts& o, const std::string& dump_ip) {
    es::Scenario s = load_with_overrides(o);
    if (!dump_ip.empty()) {
        for (int k = 0; k < s.epochs; ++k) {
            const es::IpInstance inst = es::build_epoch_instance(s, k);
            const std::string path = dump_ip + ".epoch" + std::to_string(k) + ".txt";
            std::ofstream out(path);
            if (!out) throw es::IoError("cannot write " + path);
            out << es::dump_instance(inst);
            std::fprintf(stderr, "wrote %s\n", path.c_str());
        }
    }
    const es::SimReport rep = es::run_scenario_to_disk(s, o.out_dir);
    const es::RunPaths paths = es::artifact_paths(s, o.out_dir);
    std::printf("run %s: energy %.3f Wh, emission %.6f kg, violations %s, jain %s\n",
                s.name.c_str(), rep.energy_wh, rep.emission_kg,
                rep.violation_rate ? std::to_string(*rep.violation_rate).c_str() : "n/a",
                rep.jain_fairness ? std::to_string(*rep.jain_fairness).c_str() : "n/a");
    std::printf("artifacts: %s\n", paths.dir.c_str());
    return kExitOk;
}

int cmd_sweep(const CommonOpts& o, const std::string& axis, int jobs) {
    es::Scenario s = load_with_overrides(o);
    std::vector<es::SweepPoint> points;
    const std::string csv = es::run_sweep_to_disk(s, axis, o.out_dir, jobs, &points);
    int failed = 0;
    for (const auto& p : points) {
        if (p.ok)
            std::printf("point %d (%s=%g): ok\n", p.index, axis.c_str(), p.value);
        else {
            std::printf("point %d (%s=%g): FAILED (%s)\n", p.index, axis.c_str(), p.value,
                        p.error.c_str());
            ++failed;
        }
    }
    std::printf("sweep csv: %s (%d/%zu failed)\n", csv.c_str(), failed, points.size());
    return kExitOk;
}

// Deterministic synthetic trace generator: diurnal rate modulation plus
// short bursts, type mix targeting the bundled partition thresholds.
int cmd_gen_trace(const std::string& out_path, double duration_s, double rate_rps, uint64_t seed,
                  double burstiness) {
    auto rng = es::make_rng(es::child_seed(seed, "trace-gen"));
    std::ofstream out(out_path);
    if (!out) throw es::IoError("cannot write " + out_path);

    // quadrant mix: SS, SL, LS, LL
    const double mix[4] = {0.50, 0.14, 0.22, 0.14};
    auto draw_len = [&](int64_t lo, int64_t hi, double skew) {
        // skewed draw: lo + (hi-lo) * u^skew
        const double u = es::uniform01(rng);
        return lo + static_cast<int64_t>(std::pow(u, skew) * static_cast<double>(hi - lo));
    };

    nlohmann::ordered_json rec;
    double t = 0.0;
    int64_t emitted = 0;
    while (t < duration_s) {
        // diurnal-ish modulation plus a burst harmonic
        const double phase = 2.0 * M_PI * t / duration_s;
        double rate = rate_rps * (1.0 + 0.35 * std::sin(phase) +
                                  burstiness * 0.5 * std::sin(7.0 * phase + 1.3));
        rate = std::max(0.05 * rate_rps, rate);
        const double u = std::max(1e-12, es::uniform01(rng));
        t += -std::log(u) / rate;  // Poisson gap
        if (t >= duration_s) break;

        const double m = es::uniform01(rng);
        int type = 3;
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) {
            acc += mix[k];
            if (m < acc) {
                type = k;
                break;
            }
        }
        const bool in_long = type >= 2;   // LS, LL
        const bool out_long = type % 2 == 1;  // SL, LL
        const int64_t input = in_long ? draw_len(184, 1024, 1.6) : draw_len(8, 183, 1.2);
        const int64_t output = out_long ? draw_len(444, 1000, 1.6) : draw_len(16, 443, 1.4);

        rec.clear();
        rec["arrival"] = std::round(t * 1000.0) / 1000.0;
        rec["input_tokens"] = input;
        rec["output_tokens"] = output;
        out << rec.dump() << "\n";
        ++emitted;
    }
    std::fprintf(stderr, "wrote %lld records to %s\n", static_cast<long long>(emitted),
                 out_path.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"carbon- and energy-aware LLM serving simulator"};
    app.require_subcommand(1);

    CommonOpts run_opts;
    std::string dump_ip;
    auto* run = app.add_subcommand("run", "execute one scenario");
    add_common(run, run_opts);
    run->add_option("--dump-ip", dump_ip, "also dump each epoch's allocation program (text)");

    CommonOpts sweep_opts;
    std::string axis;
    int jobs = 1;
    auto* sweep = app.add_subcommand("sweep", "run a scenario's declared sweep axis");
    add_common(sweep, sweep_opts);
    sweep->add_option("--axis", axis, "qps | accuracy")->required();
    sweep->add_option("--jobs", jobs, "parallel sweep points");

    std::string gen_out = "trace.jsonl";
    double gen_duration = 3600.0, gen_rate = 1.0, gen_burst = 1.0;
    uint64_t gen_seed = 1;
    auto* gen = app.add_subcommand("gen-trace", "write a deterministic synthetic trace");
    gen->add_option("--out", gen_out, "output JSONL path");
    gen->add_option("--duration", gen_duration, "seconds of traffic");
    gen->add_option("--rate", gen_rate, "mean request rate (req/s)");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--burstiness", gen_burst, "burst modulation depth");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(run_opts, dump_ip);
        if (sweep->parsed()) return cmd_sweep(sweep_opts, axis, jobs);
        if (gen->parsed()) return cmd_gen_trace(gen_out, gen_duration, gen_rate, gen_seed, gen_burst);
    } catch (const es::InfeasibleEpochError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInfeasible;
    } catch (const es::IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
    return kExitConfig;
}
