#include "ecosched/scheduler.hpp"

#include <algorithm>
#include <cmath>

#include "ecosched/errors.hpp"

namespace ecosched {

const char* to_string(Policy p) {
    switch (p) {
        case Policy::LLF: return "LLF";
        case Policy::FCFS: return "FCFS";
        case Policy::SRTF: return "SRTF";
        case Policy::EDF: return "EDF";
    }
    return "??";
}

Policy policy_from_string(std::string_view s) {
    if (s == "LLF") return Policy::LLF;
    if (s == "FCFS") return Policy::FCFS;
    if (s == "SRTF") return Policy::SRTF;
    if (s == "EDF") return Policy::EDF;
    throw ConfigError("unknown scheduling policy: " + std::string(s));
}

double expected_lat(int64_t predicted_tokens, double ttft_s, double tbt_s) {
    if (predicted_tokens < 1) throw DomainError("expected_lat: need at least one token");
    if (tbt_s < 0 || ttft_s < 0) throw DomainError("expected_lat: negative latency input");
    return static_cast<double>(predicted_tokens) * tbt_s + ttft_s;
}

double remaining_time(const SchedEntry& entry, double ttft_s, double tbt_s) {
    const int64_t left = std::max<int64_t>(0, entry.predicted_tokens - entry.tokens_done);
    return entry.prefill_remaining_frac * ttft_s + static_cast<double>(left) * tbt_s;
}

double laxity(const SchedEntry& entry, double now_s) {
    return entry.deadline_s - now_s - entry.remaining_s;
}

void WrrDispatcher::configure(std::vector<std::pair<int, double>> worker_weights) {
    slots_.clear();
    for (const auto& [id, w] : worker_weights)
        slots_.push_back({id, w <= 0 ? 1.0 : w, w <= 0 ? 1.0 : w});
    cursor_ = 0;
}

int WrrDispatcher::pick(const std::vector<char>& ok_by_pos) {
    if (slots_.empty()) return -1;
    if (ok_by_pos.size() != slots_.size())
        throw InternalError("WrrDispatcher::pick: availability size mismatch");
    // Two sweeps: one may be spent refreshing exhausted credits.
    const size_t limit = 2 * slots_.size() + 1;
    for (size_t n = 0; n < limit; ++n) {
        Slot& s = slots_[cursor_];
        if (s.credit >= 1.0 && ok_by_pos[cursor_]) {
            s.credit -= 1.0;
            return s.worker;
        }
        if (s.credit < 1.0) s.credit = s.weight;  // refresh as we move past
        cursor_ = (cursor_ + 1) % slots_.size();
    }
    return -1;
}

namespace {

// Strict weak order for the policy's dispatch priority; ties by arrival then id.
bool entry_before(const SchedEntry* a, const SchedEntry* b, Policy policy) {
    double ka = 0, kb = 0;
    switch (policy) {
        case Policy::LLF:
            ka = a->laxity_s;
            kb = b->laxity_s;
            break;
        case Policy::SRTF:
            ka = a->remaining_s;
            kb = b->remaining_s;
            break;
        case Policy::EDF:
            ka = a->deadline_s;
            kb = b->deadline_s;
            break;
        case Policy::FCFS:
            ka = a->arrival_s;
            kb = b->arrival_s;
            break;
    }
    if (ka != kb) return ka < kb;
    if (a->arrival_s != b->arrival_s) return a->arrival_s < b->arrival_s;
    return a->request_id < b->request_id;
}

double policy_key(const SchedEntry* e, Policy policy) {
    switch (policy) {
        case Policy::LLF: return e->laxity_s;
        case Policy::SRTF: return e->remaining_s;
        case Policy::EDF: return e->deadline_s;
        case Policy::FCFS: return e->arrival_s;
    }
    return 0.0;
}

}  // namespace

std::vector<ScheduleDecision> schedule_tick(std::span<SchedEntry* const> active,
                                            std::span<WorkerView> workers,
                                            Policy policy,
                                            double /*now_s*/,
                                            WrrDispatcher& wrr) {
    std::vector<ScheduleDecision> decisions;
    const bool preemptive = policy != Policy::FCFS;

    std::vector<SchedEntry*> waiting;
    for (SchedEntry* e : active)
        if (e->state == SchedEntry::State::Queued || e->state == SchedEntry::State::Preempted)
            waiting.push_back(e);
    if (waiting.empty()) return decisions;
    std::sort(waiting.begin(), waiting.end(),
              [&](const SchedEntry* a, const SchedEntry* b) { return entry_before(a, b, policy); });

    auto view_of = [&](int worker_id) -> WorkerView* {
        for (auto& w : workers)
            if (w.id == worker_id) return &w;
        return nullptr;
    };

    std::vector<char> has_free(workers.size(), 0);
    auto refresh_free = [&] {
        for (size_t i = 0; i < workers.size(); ++i)
            has_free[i] = workers[i].accepting && workers[i].free_slots > 0;
    };

    for (SchedEntry* cand : waiting) {
        refresh_free();
        int target = wrr.pick(has_free);
        if (target < 0 && preemptive) {
            // No free slot: displace the running entry with the worst key if
            // the candidate's key is strictly better.
            SchedEntry* worst = nullptr;
            WorkerView* worst_view = nullptr;
            for (auto& w : workers) {
                if (!w.accepting) continue;  // draining workers only finish what they hold
                for (SchedEntry* run : w.running) {
                    if (!worst || policy_key(run, policy) > policy_key(worst, policy) ||
                        (policy_key(run, policy) == policy_key(worst, policy) &&
                         (run->arrival_s > worst->arrival_s ||
                          (run->arrival_s == worst->arrival_s &&
                           run->request_id > worst->request_id)))) {
                        worst = run;
                        worst_view = &w;
                    }
                }
            }
            if (worst && policy_key(cand, policy) < policy_key(worst, policy)) {
                worst->state = SchedEntry::State::Preempted;
                worst->worker_id = -1;
                worst->preemptions += 1;
                auto& run = worst_view->running;
                run.erase(std::find(run.begin(), run.end(), worst));
                worst_view->free_slots += 1;
                decisions.push_back(
                    {ScheduleDecision::Kind::Preempt, worst->request_id, worst_view->id});
                target = worst_view->id;
            }
        }
        if (target < 0) {
            if (preemptive) continue;  // later candidates have worse keys but may not preempt either
            break;                     // FCFS: strict arrival order, nothing frees up mid-pass
        }

        WorkerView* view = view_of(target);
        if (!view || view->free_slots <= 0)
            throw InternalError("schedule_tick: dispatcher returned a full worker");
        const bool resume = cand->state == SchedEntry::State::Preempted;
        cand->state = SchedEntry::State::Running;
        cand->worker_id = target;
        view->running.push_back(cand);
        view->free_slots -= 1;
        decisions.push_back({resume ? ScheduleDecision::Kind::Resume : ScheduleDecision::Kind::Start,
                             cand->request_id, target});
    }
    return decisions;
}

}  // namespace ecosched
