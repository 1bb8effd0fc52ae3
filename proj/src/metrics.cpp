#include "ecosched/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "ecosched/errors.hpp"

namespace ecosched {

using nlohmann::ordered_json;

std::optional<double> percentile(std::vector<double> samples, double p) {
    if (samples.empty()) return std::nullopt;
    if (p <= 0 || p > 100) throw DomainError("percentile: p must be in (0, 100]");
    std::sort(samples.begin(), samples.end());
    const auto n = static_cast<double>(samples.size());
    auto rank = static_cast<size_t>(std::ceil(p / 100.0 * n));
    if (rank < 1) rank = 1;
    return samples[rank - 1];
}

std::optional<double> jain_index(std::span<const double> group_totals) {
    if (group_totals.empty()) return std::nullopt;
    double sum = 0.0, sum_sq = 0.0;
    for (double x : group_totals) {
        sum += x;
        sum_sq += x * x;
    }
    if (sum_sq == 0.0) return std::nullopt;
    return sum * sum / (static_cast<double>(group_totals.size()) * sum_sq);
}

std::optional<double> violation_rate(std::span<const RequestOutcome> requests, double beta_llf) {
    if (requests.empty()) return std::nullopt;
    int64_t violations = 0;
    for (const auto& r : requests) {
        if (r.finished_at < 0) {
            ++violations;  // never completed within the run
            continue;
        }
        if (r.finished_at - r.arrival_s > beta_llf * r.lat_est_s) ++violations;
    }
    return static_cast<double>(violations) / static_cast<double>(requests.size());
}

std::optional<double> jain_fairness(std::span<const RequestOutcome> requests, int k_groups) {
    if (requests.empty() || k_groups < 1) return std::nullopt;

    // Quartile grouping on true output length, ties by id.
    std::vector<const RequestOutcome*> sorted;
    sorted.reserve(requests.size());
    for (const auto& r : requests) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](const RequestOutcome* a, const RequestOutcome* b) {
        if (a->output_tokens != b->output_tokens) return a->output_tokens < b->output_tokens;
        return a->id < b->id;
    });

    const size_t n = sorted.size();
    std::vector<double> totals;
    for (int g = 0; g < k_groups; ++g) {
        const size_t lo = n * static_cast<size_t>(g) / static_cast<size_t>(k_groups);
        const size_t hi = n * static_cast<size_t>(g + 1) / static_cast<size_t>(k_groups);
        if (hi <= lo) continue;  // empty quartile: excluded from K
        double x = 0.0;
        for (size_t i = lo; i < hi; ++i) {
            const RequestOutcome* r = sorted[i];
            const double cutoff = r->arrival_s + r->window_s;
            for (double tt : r->token_times)
                if (tt <= cutoff) x += 1.0;
        }
        totals.push_back(x);
    }
    return jain_index(totals);
}

namespace {

MetricBlock block_of(std::vector<double> samples) {
    MetricBlock b;
    b.samples = static_cast<int64_t>(samples.size());
    if (samples.empty()) return b;
    double sum = 0.0;
    for (double v : samples) sum += v;
    b.mean = sum / static_cast<double>(samples.size());
    b.p50 = percentile(samples, 50);
    b.p90 = percentile(samples, 90);
    b.p99 = percentile(samples, 99);
    return b;
}

void fill_latency_blocks(std::span<const RequestOutcome*> rs, MetricBlock& e2e, MetricBlock& ttft,
                         MetricBlock& tbt, std::vector<double>* pooled_gaps) {
    std::vector<double> e2e_s, ttft_s, tbt_s;
    for (const RequestOutcome* r : rs) {
        if (r->finished_at >= 0) e2e_s.push_back(r->finished_at - r->arrival_s);
        if (r->first_token_at >= 0) ttft_s.push_back(r->first_token_at - r->arrival_s);
        if (r->token_times.size() >= 2) {
            double gap_sum = 0.0;
            for (size_t i = 1; i < r->token_times.size(); ++i) {
                const double gap = r->token_times[i] - r->token_times[i - 1];
                gap_sum += gap;
                if (pooled_gaps) pooled_gaps->push_back(gap);
            }
            tbt_s.push_back(gap_sum / static_cast<double>(r->token_times.size() - 1));
        }
    }
    e2e = block_of(std::move(e2e_s));
    ttft = block_of(std::move(ttft_s));
    tbt = block_of(std::move(tbt_s));
}

void put_opt(ordered_json& j, const char* key, const std::optional<double>& v) {
    if (v)
        j[key] = *v;
    else
        j[key] = nullptr;
}

ordered_json block_json(const MetricBlock& b) {
    ordered_json j;
    put_opt(j, "mean", b.mean);
    put_opt(j, "p50", b.p50);
    put_opt(j, "p90", b.p90);
    put_opt(j, "p99", b.p99);
    j["samples"] = b.samples;
    return j;
}

std::string csv_num(const std::optional<double>& v) {
    if (!v) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", *v);
    return buf;
}

std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

SimReport build_report(const RunState& run) {
    SimReport rep;
    rep.scenario_name = run.scenario.name;
    rep.config_hash = run.config_hash;
    rep.seed = run.scenario.seed;
    rep.policy = to_string(run.scenario.effective_policy());
    rep.objective = run.scenario.objective;
    rep.qps_multiplier = run.scenario.qps_multiplier;
    rep.classifier_accuracy = run.scenario.classifier_accuracy;
    rep.horizon_s = run.horizon_s;
    rep.energy_wh = run.total_energy_wh;
    rep.emission_kg = run.total_emission_kg;
    rep.total_requests = static_cast<int64_t>(run.requests.size());
    rep.preemptions = run.preemption_count;
    for (const auto& r : run.requests)
        if (r.finished_at >= 0) ++rep.finished_requests;

    std::vector<const RequestOutcome*> all;
    for (const auto& r : run.requests) all.push_back(&r);
    std::vector<double> pooled;
    fill_latency_blocks(all, rep.e2e, rep.ttft, rep.tbt, &pooled);
    rep.tbt_pooled = block_of(std::move(pooled));
    rep.violation_rate = violation_rate(run.requests, run.scenario.policy.beta_llf);
    rep.jain_fairness = jain_fairness(run.requests);

    for (int t = 0; t < kNumRTypes; ++t) {
        std::vector<const RequestOutcome*> of_type;
        std::vector<RequestOutcome> of_type_v;
        for (const auto& r : run.requests)
            if (static_cast<int>(r.true_label) == t) {
                of_type.push_back(&r);
                of_type_v.push_back(r);
            }
        auto& tb = rep.per_type[static_cast<size_t>(t)];
        tb.requests = static_cast<int64_t>(of_type.size());
        fill_latency_blocks(of_type, tb.e2e, tb.ttft, tb.tbt, nullptr);
        tb.violation_rate = violation_rate(of_type_v, run.scenario.policy.beta_llf);
        tb.jain = jain_fairness(of_type_v);
    }

    for (const auto& es : run.epochs) {
        SimReport::EpochRow row;
        row.k = es.k;
        row.partition = es.plan.partition;
        row.status = es.reused_previous ? "held" : "optimal";
        row.objective = es.plan.objective;
        row.workers = es.plan.total_workers();
        row.plan = es.plan.workers;
        rep.epochs.push_back(row);
    }
    return rep;
}

std::string SimReport::to_json() const {
    ordered_json j;
    j["scenario"] = scenario_name;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["policy"] = policy;
    j["objective"] = objective;
    j["qps_multiplier"] = qps_multiplier;
    j["classifier_accuracy"] = classifier_accuracy;
    j["horizon_s"] = horizon_s;
    j["energy_wh"] = energy_wh;
    j["emission_kg"] = emission_kg;
    put_opt(j, "violation_rate", violation_rate);
    put_opt(j, "jain_fairness", jain_fairness);
    j["e2e"] = block_json(e2e);
    j["ttft"] = block_json(ttft);
    j["tbt"] = block_json(tbt);
    j["tbt_pooled"] = block_json(tbt_pooled);
    j["requests"] = {{"total", total_requests},
                     {"finished", finished_requests},
                     {"preemptions", preemptions}};
    ordered_json types;
    for (int t = 0; t < kNumRTypes; ++t) {
        const auto& tb = per_type[static_cast<size_t>(t)];
        ordered_json tj;
        tj["requests"] = tb.requests;
        put_opt(tj, "violation_rate", tb.violation_rate);
        put_opt(tj, "jain", tb.jain);
        tj["e2e"] = block_json(tb.e2e);
        tj["ttft"] = block_json(tb.ttft);
        tj["tbt"] = block_json(tb.tbt);
        types[to_string(static_cast<RType>(t))] = tj;
    }
    j["per_type"] = types;
    ordered_json eps = ordered_json::array();
    for (const auto& e : epochs) {
        ordered_json plan = ordered_json::array();
        for (const auto& w : e.plan)
            plan.push_back({{"location", w.location},
                            {"rtype", to_string(w.rtype)},
                            {"mode", w.mode},
                            {"count", w.count}});
        eps.push_back({{"k", e.k},
                       {"partition", e.partition},
                       {"status", e.status},
                       {"objective", e.objective},
                       {"workers", e.workers},
                       {"plan", plan}});
    }
    j["epochs"] = eps;
    return j.dump(2) + "\n";
}

std::string SimReport::csv_header() {
    return "scenario,config_hash,seed,policy,objective,qps_multiplier,classifier_accuracy,"
           "energy_wh,emission_kg,violation_rate,jain_fairness,"
           "e2e_mean,e2e_p50,e2e_p90,e2e_p99,"
           "ttft_mean,ttft_p50,ttft_p90,ttft_p99,"
           "tbt_mean,tbt_p50,tbt_p90,tbt_p99,"
           "tbt_pooled_p50,tbt_pooled_p90,tbt_pooled_p99,"
           "requests,finished,preemptions";
}

std::string SimReport::to_csv_row() const {
    std::ostringstream os;
    os << scenario_name << "," << config_hash << "," << seed << "," << policy << "," << objective
       << "," << csv_num(qps_multiplier) << "," << csv_num(classifier_accuracy) << ","
       << csv_num(energy_wh) << "," << csv_num(emission_kg) << "," << csv_num(violation_rate)
       << "," << csv_num(jain_fairness) << "," << csv_num(e2e.mean) << "," << csv_num(e2e.p50)
       << "," << csv_num(e2e.p90) << "," << csv_num(e2e.p99) << "," << csv_num(ttft.mean) << ","
       << csv_num(ttft.p50) << "," << csv_num(ttft.p90) << "," << csv_num(ttft.p99) << ","
       << csv_num(tbt.mean) << "," << csv_num(tbt.p50) << "," << csv_num(tbt.p90) << ","
       << csv_num(tbt.p99) << "," << csv_num(tbt_pooled.p50) << "," << csv_num(tbt_pooled.p90)
       << "," << csv_num(tbt_pooled.p99) << "," << total_requests << "," << finished_requests
       << "," << preemptions;
    return os.str();
}

RecomputedTotals recompute_from_artifacts(const std::string& events_path,
                                          const std::string& freq_csv_path,
                                          const CarbonSeries& carbon,
                                          double tick_s) {
    RecomputedTotals out;

    // Worker locations come from spawn events.
    std::map<int, std::string> worker_location;
    {
        std::ifstream in(events_path);
        if (!in) throw IoError("cannot open event log: " + events_path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line);
            const std::string e = j.at("e").get<std::string>();
            if (e == "spawn")
                worker_location[j.at("w").get<int>()] = j.at("loc").get<std::string>();
            else if (e == "finish")
                ++out.finish_events;
            else if (e == "tok")
                out.token_count += j.at("n").get<int64_t>();
        }
    }

    std::ifstream in(freq_csv_path);
    if (!in) throw IoError("cannot open frequency trajectory: " + freq_csv_path);
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != "t,worker,f_mhz,power_w")
                throw ParseError(freq_csv_path + ": unexpected header");
            header_seen = true;
            continue;
        }
        std::istringstream ss(line);
        std::string t_s, w_s, f_s, p_s;
        if (!std::getline(ss, t_s, ',') || !std::getline(ss, w_s, ',') ||
            !std::getline(ss, f_s, ',') || !std::getline(ss, p_s))
            throw ParseError(freq_csv_path + ": short row");
        const double t = std::stod(t_s);
        const int w = std::stoi(w_s);
        const double p = std::stod(p_s);
        const double inc_wh = p * tick_s / 3600.0;
        out.energy_wh += inc_wh;
        auto loc = worker_location.find(w);
        if (loc == worker_location.end())
            throw ParseError(freq_csv_path + ": power row for unknown worker " + w_s);
        out.emission_kg += inc_wh / 1000.0 * lme_at(carbon, loc->second, t);
    }
    return out;
}

}  // namespace ecosched
