#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "json.hpp"
#include "sim_fixtures.hpp"

#include "ecosched/errors.hpp"
#include "ecosched/runner.hpp"

using namespace ecosched;
namespace fs = std::filesystem;

namespace {

std::string scenarios_dir() { return std::string(ECOSCHED_SOURCE_DIR) + "/scenarios"; }

std::string cli_path() {
    // The CLI binary sits next to the test executables.
    char buf[4096];
    const ssize_t n = readlink("/proc/self/exe", buf, sizeof buf - 1);
    REQUIRE(n > 0);
    buf[n] = '\0';
    return (fs::path(buf).parent_path() / "ecosched").string();
}

int run_cli(const std::string& args) {
    const int rc = std::system((cli_path() + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("run_scenario_to_disk: artifacts exist and carry the config hash") {
    const Scenario s = load_scenario(scenarios_dir() + "/toy.json");
    const std::string out = (fs::temp_directory_path() / "ecosched_runner_a").string();
    fs::remove_all(out);
    const SimReport rep = run_scenario_to_disk(s, out);
    const RunPaths paths = artifact_paths(s, out);

    CHECK(fs::exists(paths.report_json));
    CHECK(fs::exists(paths.report_csv));
    CHECK(fs::exists(paths.events));
    CHECK(fs::exists(paths.freq_csv));
    CHECK(paths.dir.find(rep.config_hash) != std::string::npos);

    const auto j = nlohmann::json::parse(simfix::slurp(paths.report_json));
    CHECK(j.at("config_hash").get<std::string>() == rep.config_hash);
    CHECK(j.at("scenario").get<std::string>() == "toy");
    // events meta record carries the hash too
    std::ifstream ev(paths.events);
    std::string first;
    std::getline(ev, first);
    CHECK(first.find(rep.config_hash) != std::string::npos);
}

TEST_CASE("config hash: stable for identical config, changed by overrides") {
    const Scenario a = load_scenario(scenarios_dir() + "/toy.json");
    Scenario b = a;
    CHECK(scenario_config_hash(a) == scenario_config_hash(b));
    b.seed += 1;
    CHECK(scenario_config_hash(a) != scenario_config_hash(b));
    Scenario c = a;
    c.disabled.insert("llf");
    CHECK(scenario_config_hash(a) != scenario_config_hash(c));
}

TEST_CASE("scenario loader: validation and io errors") {
    CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), IoError);
    const Scenario s = load_scenario(scenarios_dir() + "/toy.json");
    CHECK(s.policy.kind == Policy::FCFS);
    CHECK(s.epochs == 1);
    CHECK(s.knob_disabled("miad"));
    CHECK_FALSE(s.baseline());

    // missing trace file surfaces as IoError at run time
    Scenario broken = s;
    broken.trace_path = "/nonexistent/trace.jsonl";
    const std::string out = (fs::temp_directory_path() / "ecosched_runner_b").string();
    CHECK_THROWS_AS(run_scenario_to_disk(broken, out), IoError);
}

TEST_CASE("baseline composition: all knobs disabled collapses to one LL pool") {
    Scenario s = load_scenario(scenarios_dir() + "/desk.json");
    for (const auto& k : known_knobs()) s.disabled.insert(k);
    CHECK(s.baseline());
    CHECK(s.effective_policy() == Policy::FCFS);
    const std::string out = (fs::temp_directory_path() / "ecosched_runner_base").string();
    const SimReport rep = run_scenario_to_disk(s, out);
    // every request rides the LL pool
    CHECK(rep.per_type[static_cast<int>(RType::LL)].requests == rep.total_requests);
    CHECK(rep.per_type[static_cast<int>(RType::SS)].requests == 0);
    // single partition, held across epochs
    for (const auto& e : rep.epochs) CHECK(e.partition == 1);
    CHECK(rep.epochs.size() == 2);
    CHECK(rep.epochs[1].status == "held");
}

TEST_CASE("ablation: disabling miad pins the frequency at f_max") {
    Scenario s = load_scenario(scenarios_dir() + "/toy.json");  // miad already disabled
    const std::string out = (fs::temp_directory_path() / "ecosched_runner_miad").string();
    fs::remove_all(out);
    run_scenario_to_disk(s, out);
    const RunPaths paths = artifact_paths(s, out);
    std::ifstream in(paths.freq_csv);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) {
        const auto p1 = line.find(',');
        const auto p2 = line.find(',', p1 + 1);
        const auto p3 = line.find(',', p2 + 1);
        CHECK(line.substr(p2 + 1, p3 - p2 - 1) == "1410");
        ++rows;
    }
    CHECK(rows > 0);
}

TEST_CASE("sweep: grid rows, derived seeds, failed points marked") {
    Scenario s = load_scenario(scenarios_dir() + "/toy.json");
    s.sweep_axes["qps"] = {0.5, 1.0, 2.0};
    const std::string out = (fs::temp_directory_path() / "ecosched_runner_sweep").string();
    fs::remove_all(out);
    std::vector<SweepPoint> points;
    const std::string csv = run_sweep_to_disk(s, "qps", out, 2, &points);
    REQUIRE(points.size() == 3);
    for (const auto& p : points) CHECK(p.ok);
    // derived seeds differ per point and are deterministic
    CHECK(points[0].report.seed != points[1].report.seed);
    std::vector<SweepPoint> again;
    run_sweep_to_disk(s, "qps", out, 1, &again);
    for (size_t i = 0; i < 3; ++i) CHECK(points[i].report.seed == again[i].report.seed);

    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line.find("axis,point,value,status") == 0);
    int rows = 0;
    while (std::getline(in, line)) {
        CHECK(line.find(",ok,") != std::string::npos);
        ++rows;
    }
    CHECK(rows == 3);

    // undeclared axis refuses
    CHECK_THROWS_AS(run_sweep_to_disk(s, "accuracy", out, 1, nullptr), ConfigError);

    // failing points are recorded, the sweep continues
    simfix::MiniOptions opt;
    opt.name = "infeasible_sweep";
    opt.max_throughput = 0.001;  // the allocation cannot cover demand
    const auto ms = simfix::write_mini("infeasible_sweep", opt);
    Scenario bad = load_scenario(ms.scenario_path);
    bad.sweep_axes["qps"] = {0.5, 1.0};
    std::vector<SweepPoint> failed;
    const std::string csv2 = run_sweep_to_disk(bad, "qps", out, 1, &failed);
    REQUIRE(failed.size() == 2);
    for (const auto& p : failed) {
        CHECK_FALSE(p.ok);
        CHECK(p.error.find("infeasible") != std::string::npos);
    }
    const std::string body = simfix::slurp(csv2);
    CHECK(body.find(",failed,") != std::string::npos);
}

TEST_CASE("cli: exit codes distinguish io, config and infeasible") {
    const std::string out = (fs::temp_directory_path() / "ecosched_cli").string();
    CHECK(run_cli("run " + scenarios_dir() + "/toy.json --out " + out) == 0);
    CHECK(run_cli("run /nonexistent.json --out " + out) == 2);

    // broken scenario json -> config error
    const auto bad = fs::temp_directory_path() / "ecosched_bad.json";
    std::ofstream(bad) << "{ not json";
    CHECK(run_cli("run " + bad.string() + " --out " + out) == 1);

    // infeasible allocation exits with its own code
    simfix::MiniOptions opt;
    opt.name = "infeasible_cli";
    opt.max_throughput = 0.001;
    const auto ms = simfix::write_mini("infeasible_cli", opt);
    CHECK(run_cli("run " + ms.scenario_path + " --out " + out) == 3);
    CHECK(run_cli("sweep " + scenarios_dir() + "/desk.json --axis nope --out " + out) == 1);
}

TEST_CASE("accuracy sweep: violations move, energy stays within the 5% band") {
    Scenario s = load_scenario(scenarios_dir() + "/desk.json");
    const std::string out = (fs::temp_directory_path() / "ecosched_runner_acc").string();
    fs::remove_all(out);
    std::vector<SweepPoint> points;
    run_sweep_to_disk(s, "accuracy", out, 4, &points);
    REQUIRE(points.size() == 4);
    double e_min = 1e18, e_max = 0, v_min = 1e18, v_max = 0;
    for (const auto& p : points) {
        REQUIRE(p.ok);
        e_min = std::min(e_min, p.report.energy_wh);
        e_max = std::max(e_max, p.report.energy_wh);
        v_min = std::min(v_min, *p.report.violation_rate);
        v_max = std::max(v_max, *p.report.violation_rate);
    }
    CHECK((e_max - e_min) / e_min <= 0.05);  // energy insensitive to accuracy
    CHECK(v_max > v_min);                    // SLO metrics are not
}

TEST_CASE("cli: dump-ip writes a parseable instance file") {
    const std::string out = (fs::temp_directory_path() / "ecosched_cli_dump").string();
    const std::string prefix = (fs::temp_directory_path() / "ecosched_ipdump").string();
    CHECK(run_cli("run " + scenarios_dir() + "/toy.json --out " + out + " --dump-ip " +
                  prefix) == 0);
    const std::string text = simfix::slurp(prefix + ".epoch0.txt");
    REQUIRE_FALSE(text.empty());
    const IpInstance inst = parse_instance(text);
    CHECK(inst.partition_ids.size() == 1);
    const AllocationPlan plan = solve(inst);
    CHECK(plan.status == AllocationPlan::Status::Optimal);
    CHECK(plan.total_workers() == 1);
}
