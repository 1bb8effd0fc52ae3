#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ecosched {

// Request type by (input length class, output length class).
// First letter classifies the prompt, second the response: SL = short prompt,
// long response.
enum class RType : int { SS = 0, SL = 1, LS = 2, LL = 3 };

constexpr int kNumRTypes = 4;
constexpr std::array<RType, 4> kAllRTypes{RType::SS, RType::SL, RType::LS, RType::LL};

const char* to_string(RType t);
RType rtype_from_string(std::string_view s);

// One inference job from the trace. Token counts only; no text payloads.
struct Request {
    int64_t id = -1;
    double arrival_s = 0.0;
    int64_t input_tokens = 0;
    int64_t output_tokens = 1;  // ground truth
    std::optional<int64_t> predicted_output_tokens;
    std::optional<std::string> client_id;
};

// Length-based request partition. A value equal to the threshold is Long
// (half-open split: [0, T) short, [T, max] long).
struct PartitionScheme {
    int id = 0;
    int64_t input_threshold = 0;
    int64_t output_threshold = 0;
    int64_t max_model_len = 4096;
};

RType classify(int64_t input_tokens, int64_t output_tokens, const PartitionScheme& scheme);

// Reads a line-delimited trace (one JSON record per line; required fields
// arrival, input_tokens, output_tokens; optional predicted_output_tokens,
// client_id). Records are sorted by arrival and ids assigned sequentially
// after the sort. Malformed records raise ParseError with the line number.
std::vector<Request> ingest_trace(const std::string& path);
std::vector<Request> parse_trace(std::istream& in, const std::string& source_name);

// Configurable-accuracy stand-in for the learned length predictor. With
// probability `accuracy` the prediction lands on the same side of the
// scheme's output threshold as the truth, otherwise on the opposite side;
// the numeric value is uniform within the chosen side. Deterministic per
// request id for a fixed base seed, independent of call order.
class LengthOracle {
  public:
    LengthOracle(double accuracy, uint64_t base_seed);

    int64_t predict(const Request& req, const PartitionScheme& scheme) const;

    double accuracy() const { return accuracy_; }

  private:
    double accuracy_;
    uint64_t base_seed_;
};

// Peak-QPS summary: per request type, per 5-minute interval, the busiest
// 5-second window's request count divided by 5.
struct TrafficSummary {
    static constexpr double kWindowS = 5.0;
    static constexpr double kIntervalS = 300.0;

    double start_s = 0.0;
    double horizon_s = 0.0;
    // peak_qps[rtype][interval]
    std::array<std::vector<double>, kNumRTypes> peak_qps;

    int intervals() const { return static_cast<int>(peak_qps[0].size()); }
    double peak(RType t, int interval) const {
        return peak_qps[static_cast<int>(t)][static_cast<size_t>(interval)];
    }
};

// `types[i]` is the classification of `requests[i]`. Arrivals outside
// [start, start+horizon) are ignored. Horizon must be a positive multiple
// of 5 minutes, else ConfigError.
TrafficSummary summarize_traffic(const std::vector<Request>& requests,
                                 const std::vector<RType>& types,
                                 double start_s,
                                 double horizon_s);

}  // namespace ecosched
