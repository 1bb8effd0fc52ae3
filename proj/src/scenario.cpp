#include "ecosched/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "ecosched/errors.hpp"
#include "ecosched/rng.hpp"

namespace ecosched {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario file: " + path);
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }

    Scenario s;
    s.name = root.value("name", fs::path(path).stem().string());

    const fs::path base = fs::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        fs::path fp(p);
        return (fp.is_absolute() ? fp : base / fp).lexically_normal().string();
    };
    s.trace_path = resolve(root.at("trace").get<std::string>());
    s.profile_path = resolve(root.at("profiles").get<std::string>());
    s.carbon_path = resolve(root.at("carbon").get<std::string>());

    s.objective = root.value("objective", std::string("emission"));
    if (s.objective != "emission" && s.objective != "energy")
        throw ConfigError(path + ": objective must be emission or energy");

    if (root.contains("policy")) {
        const auto& p = root["policy"];
        s.policy.kind = policy_from_string(p.value("kind", std::string("LLF")));
        s.policy.alpha_llf = p.value("alpha_llf", 1.4);
        s.policy.beta_llf = p.value("beta_llf", 5.0);
        s.policy.tick_s = p.value("tick_s", 1.0);
        if (s.policy.alpha_llf <= 0) throw ConfigError(path + ": alpha_llf must be positive");
        if (s.policy.beta_llf <= 0) throw ConfigError(path + ": beta_llf must be positive");
    }
    if (root.contains("controller")) {
        const auto& c = root["controller"];
        s.controller.mi = c.value("mi", 2.0);
        s.controller.ad_mhz = c.value("ad_mhz", 100.0);
        s.controller.tick_s = c.value("tick_s", 1.0);
        if (s.controller.mi <= 1.0) throw ConfigError(path + ": MIAD multiplier must be > 1");
        if (s.controller.ad_mhz <= 0) throw ConfigError(path + ": MIAD decrement must be positive");
    }

    s.epoch_s = root.value("epoch_s", 1800.0);
    s.epochs = root.value("epochs", 1);
    s.alpha_risk = root.value("alpha_risk", 1.1);
    s.classifier_accuracy = root.value("classifier_accuracy", 1.0);
    s.forecast_noise = root.value("forecast_noise", 0.0);
    s.seed = root.value("seed", 0ull);
    s.switch_delay_s = root.value("switch_delay_s", 0.0354);
    s.preempt_cost_s = root.value("preempt_cost_s", 0.0);
    s.idle_fraction = root.value("idle_fraction", 1.0);
    s.best_effort = root.value("best_effort", false);
    s.qps_multiplier = root.value("qps_multiplier", 1.0);

    if (s.epochs < 1) throw ConfigError(path + ": epochs must be >= 1");
    if (s.epoch_s <= 0) throw ConfigError(path + ": epoch_s must be positive");
    if (s.classifier_accuracy < 0 || s.classifier_accuracy > 1)
        throw ConfigError(path + ": classifier_accuracy must be in [0, 1]");
    if (s.qps_multiplier <= 0) throw ConfigError(path + ": qps_multiplier must be positive");
    const double epoch_ticks = s.epoch_s / s.policy.tick_s;
    if (std::abs(epoch_ticks - std::round(epoch_ticks)) > 1e-9)
        throw ConfigError(path + ": scheduler tick must divide epoch length");

    if (root.contains("disable"))
        for (const auto& d : root["disable"]) {
            const std::string knob = d.get<std::string>();
            if (!known_knobs().count(knob)) throw ConfigError(path + ": unknown knob " + knob);
            s.disabled.insert(knob);
        }
    if (root.contains("sweeps"))
        for (const auto& [axis, grid] : root["sweeps"].items()) {
            if (axis != "qps" && axis != "accuracy")
                throw ConfigError(path + ": unknown sweep axis " + axis);
            std::vector<double> pts;
            for (const auto& v : grid) pts.push_back(v.get<double>());
            s.sweep_axes[axis] = pts;
        }
    return s;
}

std::string scenario_canonical_json(const Scenario& s) {
    ordered_json j;
    j["name"] = s.name;
    j["trace"] = fs::path(s.trace_path).filename().string();
    j["profiles"] = fs::path(s.profile_path).filename().string();
    j["carbon"] = fs::path(s.carbon_path).filename().string();
    j["objective"] = s.objective;
    j["policy"] = {{"kind", to_string(s.policy.kind)},
                   {"alpha_llf", s.policy.alpha_llf},
                   {"beta_llf", s.policy.beta_llf},
                   {"tick_s", s.policy.tick_s}};
    j["controller"] = {{"mi", s.controller.mi},
                       {"ad_mhz", s.controller.ad_mhz},
                       {"tick_s", s.controller.tick_s}};
    j["epoch_s"] = s.epoch_s;
    j["epochs"] = s.epochs;
    j["alpha_risk"] = s.alpha_risk;
    j["classifier_accuracy"] = s.classifier_accuracy;
    j["forecast_noise"] = s.forecast_noise;
    j["seed"] = s.seed;
    j["switch_delay_s"] = s.switch_delay_s;
    j["preempt_cost_s"] = s.preempt_cost_s;
    j["idle_fraction"] = s.idle_fraction;
    j["best_effort"] = s.best_effort;
    j["qps_multiplier"] = s.qps_multiplier;
    j["disable"] = std::vector<std::string>(s.disabled.begin(), s.disabled.end());
    return j.dump();
}

std::string scenario_config_hash(const Scenario& s) {
    const uint64_t h = fnv1a64(scenario_canonical_json(s));
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

}  // namespace ecosched
