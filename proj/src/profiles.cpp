#include "ecosched/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "ecosched/errors.hpp"

namespace ecosched {

using nlohmann::json;

double power_at(const GpuModel& gpu, double f_mhz) {
    if (f_mhz < gpu.f_min_mhz || f_mhz > gpu.f_max_mhz) {
        std::ostringstream os;
        os << "frequency " << f_mhz << " MHz outside [" << gpu.f_min_mhz << ", "
           << gpu.f_max_mhz << "] for GPU " << gpu.name;
        throw DomainError(os.str());
    }
    if (gpu.power_table.empty()) return gpu.p0_w + gpu.p1_w_per_mhz * f_mhz;

    const auto& tbl = gpu.power_table;
    if (f_mhz <= tbl.front().first) return tbl.front().second;
    if (f_mhz >= tbl.back().first) return tbl.back().second;
    auto hi = std::upper_bound(tbl.begin(), tbl.end(), f_mhz,
                               [](double f, const auto& p) { return f < p.first; });
    auto lo = std::prev(hi);
    const double w = (f_mhz - lo->first) / (hi->first - lo->first);
    return lo->second + w * (hi->second - lo->second);
}

std::pair<double, double> scaled_latency(const ConfigProfile& profile, double f_mhz) {
    if (f_mhz < profile.f_min_mhz || f_mhz > profile.f_max_mhz) {
        std::ostringstream os;
        os << "frequency " << f_mhz << " MHz outside [" << profile.f_min_mhz << ", "
           << profile.f_max_mhz << "] for config " << profile.key.mode;
        throw DomainError(os.str());
    }
    const double scale = profile.f_max_mhz / f_mhz;
    return {profile.base_ttft_s * scale, profile.base_tbt_s * scale};
}

double worker_power_at(const ConfigProfile& profile,
                       const std::vector<GpuModel>& gpus,
                       double f_mhz) {
    double total = 0.0;
    for (const auto& [name, count] : profile.gpu_footprint) {
        const GpuModel* gpu = nullptr;
        for (const auto& g : gpus)
            if (g.name == name) { gpu = &g; break; }
        if (!gpu) throw ConfigError("footprint references unknown GPU model: " + name);
        total += static_cast<double>(count) * power_at(*gpu, f_mhz);
    }
    return total;
}

double CarbonSeries::first_t(const std::string& location) const {
    auto it = samples.find(location);
    if (it == samples.end() || it->second.empty())
        throw ConfigError("no carbon samples for location: " + location);
    return it->second.front().first;
}

double CarbonSeries::last_t(const std::string& location) const {
    auto it = samples.find(location);
    if (it == samples.end() || it->second.empty())
        throw ConfigError("no carbon samples for location: " + location);
    return it->second.back().first;
}

double lme_at(const CarbonSeries& series, const std::string& location, double t_s) {
    auto it = series.samples.find(location);
    if (it == series.samples.end() || it->second.empty())
        throw ConfigError("no carbon samples for location: " + location);
    const auto& s = it->second;
    if (t_s < s.front().first) {
        std::ostringstream os;
        os << "t=" << t_s << " precedes first carbon sample (" << s.front().first
           << ") at " << location;
        throw DomainError(os.str());
    }
    // Latest sample at or before t.
    auto up = std::upper_bound(s.begin(), s.end(), t_s,
                               [](double t, const auto& p) { return t < p.first; });
    return std::prev(up)->second;
}

const GpuModel& ProfileSet::gpu(const std::string& name) const {
    for (const auto& g : gpus)
        if (g.name == name) return g;
    throw ConfigError("unknown GPU model: " + name);
}

const PartitionScheme& ProfileSet::partition(int id) const {
    for (const auto& p : partitions)
        if (p.id == id) return p;
    throw ConfigError("unknown partition scheme id: " + std::to_string(id));
}

const ConfigProfile& ProfileSet::config(const ConfigKey& key) const {
    auto it = configs.find(key);
    if (it == configs.end()) {
        std::ostringstream os;
        os << "no config profile for (partition=" << key.partition << ", rtype="
           << to_string(key.rtype) << ", mode=" << key.mode << ")";
        throw ConfigError(os.str());
    }
    return it->second;
}

std::vector<std::string> ProfileSet::locations() const {
    std::set<std::string> locs;
    for (const auto& g : gpus)
        for (const auto& [loc, n] : g.available)
            if (n > 0) locs.insert(loc);
    return {locs.begin(), locs.end()};
}

namespace {

double require_number(const json& obj, const char* field, const std::string& where) {
    auto it = obj.find(field);
    if (it == obj.end() || !it->is_number())
        throw ConfigError(where + ": missing or non-numeric field '" + field + "'");
    return it->get<double>();
}

void resolve_freq_domain(ConfigProfile& cfg, const std::vector<GpuModel>& gpus) {
    if (cfg.gpu_footprint.empty())
        throw ConfigError("config " + cfg.key.mode + ": empty gpu_footprint");
    double lo = 0.0, hi = 1e300, step = 0.0;
    for (const auto& [name, count] : cfg.gpu_footprint) {
        if (count <= 0)
            throw ConfigError("config " + cfg.key.mode + ": footprint count must be positive");
        const GpuModel* gpu = nullptr;
        for (const auto& g : gpus)
            if (g.name == name) { gpu = &g; break; }
        if (!gpu) throw ConfigError("config " + cfg.key.mode + ": unknown GPU " + name);
        lo = std::max(lo, gpu->f_min_mhz);
        hi = std::min(hi, gpu->f_max_mhz);
        step = std::max(step, gpu->freq_step_mhz);
    }
    if (lo >= hi)
        throw ConfigError("config " + cfg.key.mode + ": footprint GPUs have no common frequency range");
    cfg.f_min_mhz = lo;
    cfg.f_max_mhz = hi;
    cfg.freq_step_mhz = step;
}

}  // namespace

ProfileSet load_profiles(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open profile file: " + path);
    json root;
    try {
        root = json::parse(in, nullptr, true, true);  // allow comments
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }

    ProfileSet ps;
    ps.max_model_len = root.value("max_model_len", 4096);
    if (ps.max_model_len <= 0) throw ConfigError(path + ": max_model_len must be positive");

    for (const auto& g : root.at("gpus")) {
        GpuModel m;
        m.name = g.at("name").get<std::string>();
        m.f_min_mhz = require_number(g, "f_min_mhz", path + " gpu " + m.name);
        m.f_max_mhz = require_number(g, "f_max_mhz", path + " gpu " + m.name);
        m.p0_w = require_number(g, "p0_w", path + " gpu " + m.name);
        m.p1_w_per_mhz = require_number(g, "p1_w_per_mhz", path + " gpu " + m.name);
        m.freq_step_mhz = g.value("freq_step_mhz", 15.0);
        if (g.contains("power_table")) {
            for (const auto& pt : g.at("power_table")) {
                const double f = pt.at(0).get<double>();
                const double w = pt.at(1).get<double>();
                if (!m.power_table.empty()) {
                    if (f <= m.power_table.back().first)
                        throw ConfigError(path + ": gpu " + m.name +
                                          " power_table frequencies must increase");
                    if (w < m.power_table.back().second)
                        throw ConfigError(path + ": gpu " + m.name +
                                          " power_table must be nondecreasing in f");
                }
                m.power_table.emplace_back(f, w);
            }
            if (m.power_table.size() < 2)
                throw ConfigError(path + ": gpu " + m.name + " power_table needs >= 2 samples");
        }
        if (m.f_min_mhz >= m.f_max_mhz)
            throw ConfigError(path + ": gpu " + m.name + " needs f_min < f_max");
        if (m.p1_w_per_mhz < 0)
            throw ConfigError(path + ": gpu " + m.name + " power slope must be >= 0");
        if (g.contains("available"))
            for (const auto& [loc, n] : g.at("available").items()) {
                const int64_t count = n.get<int64_t>();
                if (count < 0) throw ConfigError(path + ": negative GPU count at " + loc);
                m.available[loc] = count;
            }
        ps.gpus.push_back(std::move(m));
    }
    if (ps.gpus.empty()) throw ConfigError(path + ": at least one GPU model required");

    for (const auto& p : root.at("partitions")) {
        PartitionScheme s;
        s.id = p.at("id").get<int>();
        s.input_threshold = p.at("input_threshold").get<int64_t>();
        s.output_threshold = p.at("output_threshold").get<int64_t>();
        s.max_model_len = ps.max_model_len;
        if (s.input_threshold <= 0 || s.input_threshold > ps.max_model_len ||
            s.output_threshold <= 0 || s.output_threshold > ps.max_model_len)
            throw ConfigError(path + ": partition thresholds must be in (0, max_model_len]");
        ps.partitions.push_back(s);
    }
    if (ps.partitions.empty()) throw ConfigError(path + ": at least one partition required");

    if (root.contains("miad_thresholds")) {
        for (const auto& [name, th] : root.at("miad_thresholds").items()) {
            const RType r = rtype_from_string(name);
            SloThresholds t;
            t.tbt_ms = require_number(th, "tbt_ms", path);
            t.ttft_ms = require_number(th, "ttft_ms", path);
            t.e2e_s = require_number(th, "e2e_s", path);
            if (t.tbt_ms <= 0 || t.ttft_ms <= 0 || t.e2e_s <= 0)
                throw ConfigError(path + ": MIAD thresholds must be positive");
            ps.miad_thresholds[static_cast<int>(r)] = t;
        }
    } else {
        // Defaults: TBT 150 ms all types; TTFT 300 ms short-input / 600 ms
        // long-input; E2E 7/27/10/30 s.
        ps.miad_thresholds[static_cast<int>(RType::SS)] = {150.0, 300.0, 7.0};
        ps.miad_thresholds[static_cast<int>(RType::SL)] = {150.0, 300.0, 27.0};
        ps.miad_thresholds[static_cast<int>(RType::LS)] = {150.0, 600.0, 10.0};
        ps.miad_thresholds[static_cast<int>(RType::LL)] = {150.0, 600.0, 30.0};
    }

    for (const auto& [name, v] : root.at("slo_tolerance_s").items()) {
        const double tol = v.get<double>();
        if (tol <= 0) throw ConfigError(path + ": slo_tolerance_s must be positive");
        ps.slo_tolerance_s[static_cast<int>(rtype_from_string(name))] = tol;
    }
    for (double tol : ps.slo_tolerance_s)
        if (tol <= 0) throw ConfigError(path + ": slo_tolerance_s must cover all four request types");

    for (const auto& c : root.at("configs")) {
        ConfigProfile cfg;
        cfg.key.partition = c.at("partition").get<int>();
        cfg.key.rtype = rtype_from_string(c.at("rtype").get<std::string>());
        cfg.key.mode = c.at("mode").get<std::string>();
        const std::string where = path + " config " + cfg.key.mode;
        cfg.power_full_w = require_number(c, "power_full_w", where);
        cfg.max_throughput_rps = require_number(c, "max_throughput_rps", where);
        cfg.measured_latency_s = require_number(c, "measured_latency_s", where);
        cfg.base_ttft_s = require_number(c, "base_ttft_s", where);
        cfg.base_tbt_s = require_number(c, "base_tbt_s", where);
        const auto& dr = c.at("decode_rate");
        cfg.decode_a_tok_per_s_mhz = require_number(dr, "a_tok_per_s_mhz", where);
        cfg.decode_b_tok_per_s = require_number(dr, "b_tok_per_s", where);
        cfg.slots = c.value("slots", 1);
        for (const auto& [gname, n] : c.at("gpu_footprint").items())
            cfg.gpu_footprint[gname] = n.get<int64_t>();

        if (cfg.power_full_w <= 0 || cfg.max_throughput_rps <= 0)
            throw ConfigError(where + ": power_full_w and max_throughput_rps must be positive");
        if (cfg.base_tbt_s <= 0 || cfg.base_ttft_s < 0)
            throw ConfigError(where + ": base_tbt_s must be positive, base_ttft_s nonnegative");
        if (cfg.slots < 1) throw ConfigError(where + ": slots must be >= 1");
        if (cfg.decode_a_tok_per_s_mhz < 0)
            throw ConfigError(where + ": decode rate must be nondecreasing in f");

        resolve_freq_domain(cfg, ps.gpus);
        if (cfg.decode_rate(cfg.f_min_mhz) <= 0)
            throw ConfigError(where + ": decode rate must be positive over the frequency range");

        ps.partition(cfg.key.partition);  // must reference a declared partition
        if (!ps.configs.emplace(cfg.key, cfg).second)
            throw ConfigError(where + ": duplicate config key");
    }
    if (ps.configs.empty()) throw ConfigError(path + ": at least one config profile required");
    return ps;
}

CarbonSeries load_carbon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open carbon file: " + path);

    CarbonSeries series;
    double unit_scale = 0.0;  // must be declared
    std::string line;
    int64_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = path + ":" + std::to_string(line_no);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto pos = line.find("unit:");
            if (pos != std::string::npos) {
                std::string unit = line.substr(pos + 5);
                unit.erase(std::remove_if(unit.begin(), unit.end(), ::isspace), unit.end());
                if (unit == "kg/kWh" || unit == "kg_per_kwh")
                    unit_scale = 1.0;
                else if (unit == "g/kWh" || unit == "g_per_kwh")
                    unit_scale = 1e-3;
                else
                    throw ParseError(where + ": unknown LME unit '" + unit + "'");
            }
            continue;
        }
        if (!header_seen) {
            if (line != "timestamp_s,location,lme")
                throw ParseError(where + ": expected header 'timestamp_s,location,lme'");
            header_seen = true;
            continue;
        }
        std::istringstream ss(line);
        std::string ts, loc, val;
        if (!std::getline(ss, ts, ',') || !std::getline(ss, loc, ',') || !std::getline(ss, val))
            throw ParseError(where + ": expected 3 comma-separated columns");
        double t, lme;
        try {
            t = std::stod(ts);
            lme = std::stod(val);
        } catch (const std::exception&) {
            throw ParseError(where + ": non-numeric timestamp or lme");
        }
        if (unit_scale == 0.0)
            throw ParseError(where + ": LME unit not declared before data (add '# unit: kg/kWh')");
        auto& s = series.samples[loc];
        if (!s.empty() && t <= s.back().first)
            throw ParseError(where + ": timestamps must be strictly increasing per location");
        s.emplace_back(t, lme * unit_scale);
    }
    if (series.samples.empty()) throw ParseError(path + ": no carbon samples");
    return series;
}

}  // namespace ecosched
