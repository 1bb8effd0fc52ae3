#include "ecosched/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "ecosched/errors.hpp"
#include "ecosched/rng.hpp"

namespace ecosched {

using nlohmann::json;

const char* to_string(RType t) {
    switch (t) {
        case RType::SS: return "SS";
        case RType::SL: return "SL";
        case RType::LS: return "LS";
        case RType::LL: return "LL";
    }
    return "??";
}

RType rtype_from_string(std::string_view s) {
    if (s == "SS") return RType::SS;
    if (s == "SL") return RType::SL;
    if (s == "LS") return RType::LS;
    if (s == "LL") return RType::LL;
    throw ConfigError("unknown request type: " + std::string(s));
}

RType classify(int64_t input_tokens, int64_t output_tokens, const PartitionScheme& scheme) {
    const bool in_long = input_tokens >= scheme.input_threshold;
    const bool out_long = output_tokens >= scheme.output_threshold;
    if (!in_long && !out_long) return RType::SS;
    if (!in_long && out_long) return RType::SL;
    if (in_long && !out_long) return RType::LS;
    return RType::LL;
}

namespace {

int64_t require_count(const json& rec, const char* field, const std::string& where) {
    auto it = rec.find(field);
    if (it == rec.end())
        throw ParseError(where + ": missing field '" + field + "'");
    if (!it->is_number())
        throw ParseError(where + ": field '" + field + "' is not a number");
    const double v = it->get<double>();
    if (v < 0 || v != std::floor(v))
        throw ParseError(where + ": field '" + field + "' must be a nonnegative integer");
    return static_cast<int64_t>(v);
}

}  // namespace

std::vector<Request> parse_trace(std::istream& in, const std::string& source_name) {
    std::vector<Request> out;
    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        // Allow blank lines and # comments between records.
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;

        const std::string where = source_name + ":" + std::to_string(line_no);
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(where + ": " + e.what());
        }
        if (!rec.is_object()) throw ParseError(where + ": record is not an object");

        Request r;
        auto arr = rec.find("arrival");
        if (arr == rec.end() || !arr->is_number())
            throw ParseError(where + ": missing or non-numeric field 'arrival'");
        r.arrival_s = arr->get<double>();
        if (r.arrival_s < 0) throw ParseError(where + ": arrival must be >= 0");

        r.input_tokens = require_count(rec, "input_tokens", where);
        r.output_tokens = require_count(rec, "output_tokens", where);
        if (r.output_tokens < 1)
            throw ParseError(where + ": output_tokens must be >= 1");

        if (rec.contains("predicted_output_tokens")) {
            const int64_t p = require_count(rec, "predicted_output_tokens", where);
            if (p < 1) throw ParseError(where + ": predicted_output_tokens must be >= 1");
            r.predicted_output_tokens = p;
        }
        if (rec.contains("client_id")) {
            if (!rec["client_id"].is_string())
                throw ParseError(where + ": field 'client_id' is not a string");
            r.client_id = rec["client_id"].get<std::string>();
        }
        out.push_back(std::move(r));
    }

    // Non-monotone arrivals are accepted and re-sorted; ids follow sort order.
    std::stable_sort(out.begin(), out.end(),
                     [](const Request& a, const Request& b) { return a.arrival_s < b.arrival_s; });
    for (size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<int64_t>(i);
    return out;
}

std::vector<Request> ingest_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace file: " + path);
    return parse_trace(in, path);
}

LengthOracle::LengthOracle(double accuracy, uint64_t base_seed)
    : accuracy_(accuracy), base_seed_(base_seed) {
    if (accuracy < 0.0 || accuracy > 1.0)
        throw ConfigError("predictor accuracy must be in [0, 1]");
}

int64_t LengthOracle::predict(const Request& req, const PartitionScheme& scheme) const {
    if (req.predicted_output_tokens) return *req.predicted_output_tokens;

    auto rng = make_rng(child_seed(base_seed_, "length-oracle/" + std::to_string(req.id)));
    const bool truth_long = req.output_tokens >= scheme.output_threshold;
    const bool correct = uniform01(rng) < accuracy_;
    const bool predict_long = correct ? truth_long : !truth_long;

    const int64_t short_lo = 1;
    const int64_t short_hi = scheme.output_threshold - 1;
    if (predict_long)
        return uniform_int(rng, scheme.output_threshold, scheme.max_model_len);
    if (short_hi < short_lo)  // threshold 1: no short outputs exist, cannot flip
        return scheme.output_threshold;
    return uniform_int(rng, short_lo, short_hi);
}

TrafficSummary summarize_traffic(const std::vector<Request>& requests,
                                 const std::vector<RType>& types,
                                 double start_s,
                                 double horizon_s) {
    if (requests.size() != types.size())
        throw ConfigError("summarize_traffic: one type per request required");
    const double interval = TrafficSummary::kIntervalS;
    const double window = TrafficSummary::kWindowS;
    if (horizon_s <= 0 || std::fmod(horizon_s, interval) != 0.0)
        throw ConfigError("traffic horizon must be a positive multiple of 5 minutes");

    const int n_intervals = static_cast<int>(horizon_s / interval);
    const int windows_per_interval = static_cast<int>(interval / window);

    // counts[type][window]
    const int n_windows = n_intervals * windows_per_interval;
    std::array<std::vector<int64_t>, kNumRTypes> counts;
    for (auto& c : counts) c.assign(static_cast<size_t>(n_windows), 0);

    for (size_t i = 0; i < requests.size(); ++i) {
        const double rel = requests[i].arrival_s - start_s;
        if (rel < 0 || rel >= horizon_s) continue;
        const int w = static_cast<int>(rel / window);
        if (w < 0 || w >= n_windows) continue;
        ++counts[static_cast<int>(types[i])][static_cast<size_t>(w)];
    }

    TrafficSummary out;
    out.start_s = start_s;
    out.horizon_s = horizon_s;
    for (int t = 0; t < kNumRTypes; ++t) {
        out.peak_qps[t].assign(static_cast<size_t>(n_intervals), 0.0);
        for (int k = 0; k < n_intervals; ++k) {
            int64_t peak = 0;
            for (int w = 0; w < windows_per_interval; ++w)
                peak = std::max(peak, counts[t][static_cast<size_t>(k * windows_per_interval + w)]);
            out.peak_qps[t][static_cast<size_t>(k)] = static_cast<double>(peak) / window;
        }
    }
    return out;
}

}  // namespace ecosched
