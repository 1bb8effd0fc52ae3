#include "ecosched/runner.hpp"

#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include "ecosched/errors.hpp"
#include "ecosched/rng.hpp"

namespace ecosched {

namespace fs = std::filesystem;

RunPaths artifact_paths(const Scenario& scenario, const std::string& out_root) {
    RunPaths p;
    const fs::path dir =
        fs::path(out_root) / (scenario.name + "-" + scenario_config_hash(scenario));
    p.dir = dir.string();
    p.report_json = (dir / "report.json").string();
    p.report_csv = (dir / "report.csv").string();
    p.events = (dir / "events.jsonl").string();
    p.freq_csv = (dir / "freq_power.csv").string();
    return p;
}

SimReport run_scenario_to_disk(const Scenario& scenario, const std::string& out_root) {
    const RunPaths paths = artifact_paths(scenario, out_root);
    fs::create_directories(paths.dir);

    Simulation sim(scenario);
    RunState state = sim.run(paths.dir);
    SimReport report = build_report(state);

    std::ofstream rj(paths.report_json);
    if (!rj) throw IoError("cannot write " + paths.report_json);
    rj << report.to_json();

    std::ofstream rc(paths.report_csv);
    if (!rc) throw IoError("cannot write " + paths.report_csv);
    rc << SimReport::csv_header() << "\n" << report.to_csv_row() << "\n";
    return report;
}

IpInstance build_epoch_instance(const Scenario& scenario, int epoch_k) {
    if (epoch_k < 0 || epoch_k >= scenario.epochs)
        throw ConfigError("epoch index out of range");
    const ProfileSet profiles = load_profiles(scenario.profile_path);
    const CarbonSeries carbon = load_carbon(scenario.carbon_path);
    // The allocator provisions from the base trace; qps multipliers distort
    // only the arrivals, not the forecast.
    auto trace = ingest_trace(scenario.trace_path);
    const double horizon = static_cast<double>(scenario.epochs) * scenario.epoch_s;
    std::erase_if(trace, [&](const Request& r) { return r.arrival_s >= horizon; });

    const ProfileSet restricted = restrict_profiles(profiles, scenario);
    const double start = static_cast<double>(epoch_k) * scenario.epoch_s;
    const auto traffic = forecast_epoch_traffic(scenario, restricted, trace, start, epoch_k);
    return build_instance(restricted, carbon, traffic, start, scenario.objective,
                          scenario.alpha_risk);
}

std::string run_sweep_to_disk(const Scenario& scenario,
                              const std::string& axis,
                              const std::string& out_root,
                              int jobs,
                              std::vector<SweepPoint>* points_out) {
    auto it = scenario.sweep_axes.find(axis);
    if (it == scenario.sweep_axes.end() || it->second.empty())
        throw ConfigError("scenario declares no sweep axis '" + axis + "'");
    const std::vector<double>& grid = it->second;
    if (jobs < 1) jobs = 1;

    auto run_point = [&](int index) {
        SweepPoint pt;
        pt.index = index;
        pt.value = grid[static_cast<size_t>(index)];
        Scenario s = scenario;
        s.name = scenario.name + "-" + axis + std::to_string(index);
        s.seed = child_seed(scenario.seed, "sweep/" + axis + "/" + std::to_string(index));
        if (axis == "qps")
            s.qps_multiplier = pt.value;
        else if (axis == "accuracy")
            s.classifier_accuracy = pt.value;
        try {
            pt.report = run_scenario_to_disk(s, out_root);
            pt.ok = true;
        } catch (const std::exception& e) {
            pt.ok = false;
            pt.error = e.what();
        }
        return pt;
    };

    std::vector<SweepPoint> points(grid.size());
    size_t next = 0;
    while (next < grid.size()) {
        std::vector<std::future<SweepPoint>> batch;
        for (int j = 0; j < jobs && next < grid.size(); ++j, ++next)
            batch.push_back(std::async(std::launch::async, run_point, static_cast<int>(next)));
        for (auto& f : batch) {
            SweepPoint pt = f.get();
            points[static_cast<size_t>(pt.index)] = std::move(pt);
        }
    }

    fs::create_directories(out_root);
    const std::string csv_path =
        (fs::path(out_root) / ("sweep_" + scenario.name + "_" + axis + ".csv")).string();
    std::ofstream out(csv_path);
    if (!out) throw IoError("cannot write " + csv_path);
    out << "axis,point,value,status," << SimReport::csv_header() << "\n";
    for (const auto& pt : points) {
        std::ostringstream val;
        val.precision(10);
        val << pt.value;
        if (pt.ok) {
            out << axis << "," << pt.index << "," << val.str() << ",ok,"
                << pt.report.to_csv_row() << "\n";
        } else {
            std::string msg = pt.error;
            for (char& c : msg)
                if (c == ',' || c == '\n') c = ';';
            out << axis << "," << pt.index << "," << val.str() << ",failed," << msg << "\n";
        }
    }
    if (points_out) *points_out = std::move(points);
    return csv_path;
}

}  // namespace ecosched
