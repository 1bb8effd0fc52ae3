#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ecosched/workload.hpp"

namespace ecosched {

enum class Policy { LLF, FCFS, SRTF, EDF };

const char* to_string(Policy p);
Policy policy_from_string(std::string_view s);

// Queue bookkeeping for one request. Progress fields are owned by the token
// engine; remaining_s / laxity_s must be refreshed before every scheduling
// decision.
struct SchedEntry {
    int64_t request_id = -1;
    RType rtype = RType::SS;  // routing label (predicted classification)
    double arrival_s = 0.0;
    int64_t predicted_tokens = 1;
    int64_t true_tokens = 1;
    double lat_est_s = 0.0;   // queueing-free expected duration at profiling reference
    double window_s = 0.0;    // W = alpha_llf * lat_est
    double deadline_s = 0.0;  // arrival + W

    enum class State { Queued, Running, Preempted, Done };
    State state = State::Queued;
    int worker_id = -1;

    // token progress
    double prefill_remaining_frac = 1.0;  // fraction of prefill work left
    int64_t tokens_done = 0;
    double decode_acc = 0.0;  // fractional token carry
    double first_token_at = -1.0;
    double last_token_at = -1.0;
    double finished_at = -1.0;
    int preemptions = 0;

    // refreshed before scheduling
    double remaining_s = 0.0;
    double laxity_s = 0.0;

    bool started() const { return first_token_at >= 0 || prefill_remaining_frac < 1.0 || tokens_done > 0; }
};

// Lat = N_tokens * TBT + TTFT, the queueing-free execution estimate.
double expected_lat(int64_t predicted_tokens, double ttft_s, double tbt_s);

// Predicted time to finish from the current progress: leftover prefill plus
// predicted outstanding tokens at the given pace.
double remaining_time(const SchedEntry& entry, double ttft_s, double tbt_s);

// deadline - now - remaining. Negative means already late.
double laxity(const SchedEntry& entry, double now_s);

// Classic credit-based weighted round-robin over an ordered worker pool.
// Weights 2,1 yield the dispatch pattern w1, w1, w2.
class WrrDispatcher {
  public:
    void configure(std::vector<std::pair<int, double>> worker_weights);

    // Next worker accepted by `ok`, consuming one credit. -1 when none.
    int pick(const std::vector<char>& ok_by_pos);

    int size() const { return static_cast<int>(slots_.size()); }
    int worker_at(int pos) const { return slots_[static_cast<size_t>(pos)].worker; }

  private:
    struct Slot {
        int worker;
        double weight;
        double credit;
    };
    std::vector<Slot> slots_;
    size_t cursor_ = 0;
};

// Scheduler's view of one worker in a pool.
struct WorkerView {
    int id = -1;
    int free_slots = 0;
    bool accepting = true;  // false while draining or before spawn delay expires
    std::vector<SchedEntry*> running;
};

struct ScheduleDecision {
    enum class Kind { Start, Resume, Preempt };
    Kind kind;
    int64_t request_id;
    int worker_id;
};

// One scheduling pass over a pool at time `now`. `active` holds every
// unfinished entry of the pool with remaining_s / laxity_s refreshed;
// `workers` mirrors current slot occupancy. Entries and views are mutated to
// the post-decision state; the returned list is in application order.
//
// LLF/SRTF/EDF are preemptive: a waiting entry with a strictly better key
// than the worst running entry displaces it when no slot is free. FCFS fills
// free slots in arrival order only. Ties: earlier arrival, then lower id.
std::vector<ScheduleDecision> schedule_tick(std::span<SchedEntry* const> active,
                                            std::span<WorkerView> workers,
                                            Policy policy,
                                            double now_s,
                                            WrrDispatcher& wrr);

}  // namespace ecosched
