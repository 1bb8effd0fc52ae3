#include "ecosched/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "json.hpp"

#include "ecosched/errors.hpp"
#include "ecosched/rng.hpp"

namespace ecosched {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

constexpr double kTimeEps = 1e-9;

std::string fmt_double(double v) {
    // %.17g round-trips doubles exactly; the accounting cross-check re-reads
    // these rows and must reproduce the report's totals bit-for-bit.
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double normal01(std::mt19937_64& rng) {
    // Box-Muller; platform-stable unlike std::normal_distribution.
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace

std::vector<Request> apply_qps_multiplier(const std::vector<Request>& trace,
                                          double multiplier,
                                          uint64_t seed) {
    if (multiplier == 1.0) return trace;
    std::vector<Request> out;
    if (multiplier < 1.0) {
        for (const auto& r : trace) {
            auto rng = make_rng(child_seed(seed, "qps/" + std::to_string(r.id)));
            if (uniform01(rng) < multiplier) out.push_back(r);
        }
    } else {
        const auto whole = static_cast<int>(multiplier);
        const double frac = multiplier - whole;
        for (const auto& r : trace) {
            auto rng = make_rng(child_seed(seed, "qps/" + std::to_string(r.id)));
            int copies = whole;
            if (frac > 0 && uniform01(rng) < frac) ++copies;
            for (int j = 0; j < copies; ++j) {
                Request c = r;
                c.arrival_s = r.arrival_s + 0.013 * j;  // separate co-arrivals slightly
                out.push_back(c);
            }
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Request& a, const Request& b) { return a.arrival_s < b.arrival_s; });
    for (size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<int64_t>(i);
    return out;
}

ProfileSet restrict_profiles(const ProfileSet& profiles, const Scenario& scenario) {
    ProfileSet out = profiles;
    if (scenario.knob_disabled("multipartition") && out.partitions.size() > 1) {
        const int keep = out.partitions.front().id;
        out.partitions.resize(1);
        for (auto it = out.configs.begin(); it != out.configs.end();)
            it = it->first.partition == keep ? std::next(it) : out.configs.erase(it);
    }
    return out;
}

std::map<int, TrafficSummary> forecast_epoch_traffic(const Scenario& scenario,
                                                     const ProfileSet& restricted,
                                                     const std::vector<Request>& trace,
                                                     double start_s,
                                                     int epoch_k) {
    const bool classifier_enabled = !scenario.baseline();
    std::vector<const Request*> upcoming;
    for (const auto& r : trace)
        if (r.arrival_s >= start_s - kTimeEps && r.arrival_s < start_s + scenario.epoch_s - kTimeEps)
            upcoming.push_back(&r);

    std::map<int, TrafficSummary> out;
    for (const auto& scheme : restricted.partitions) {
        std::vector<Request> reqs;
        std::vector<RType> types;
        reqs.reserve(upcoming.size());
        for (const Request* r : upcoming) {
            reqs.push_back(*r);
            types.push_back(classifier_enabled
                                ? classify(r->input_tokens, r->output_tokens, scheme)
                                : RType::LL);
        }
        TrafficSummary ts = summarize_traffic(reqs, types, start_s, scenario.epoch_s);
        if (scenario.forecast_noise > 0) {
            auto rng = make_rng(child_seed(scenario.seed, "forecast/" + std::to_string(epoch_k) +
                                                              "/" + std::to_string(scheme.id)));
            for (auto& per_type : ts.peak_qps)
                for (double& v : per_type)
                    v = std::max(0.0, v * std::exp(scenario.forecast_noise * normal01(rng)));
        }
        out[scheme.id] = std::move(ts);
    }
    return out;
}

namespace {

struct SimWorker {
    int id = -1;
    std::string location;
    ConfigKey cfg;
    const ConfigProfile* prof = nullptr;
    MiadState miad;
    bool miad_enabled = true;
    double f_act = 0.0;  // quantized, actuated frequency
    std::vector<SchedEntry*> running;
    bool draining = false;
    double available_at = 0.0;
    double spawned_at = 0.0;
    double retired_at = -1.0;
    double energy_wh = 0.0;
    double emission_kg = 0.0;
    double dead_time_s = 0.0;  // preemption switching cost backlog
    std::vector<SloObservation> obs;

    bool alive() const { return retired_at < 0; }
    int free_slots() const { return prof->slots - static_cast<int>(running.size()); }
};

struct EntryExt {
    SchedEntry sched;
    RType true_label = RType::SS;
    double ref_ttft_s = 0.0;  // profiling reference for queued-entry estimates
    double ref_tbt_s = 0.0;
    int64_t input_tokens = 0;
    std::vector<double> token_times;
};

class EventWriter {
  public:
    void open(const std::string& path) {
        if (path.empty()) return;
        out_.open(path);
        if (!out_) throw IoError("cannot open for writing: " + path);
        enabled_ = true;
    }
    void write(const ordered_json& j) {
        if (enabled_) out_ << j.dump() << "\n";
    }
    // Per-worker token streams interleave inside a tick; buffering one tick
    // and stable-sorting by timestamp keeps the log globally nondecreasing
    // without disturbing the deterministic order of simultaneous events.
    void buffer(double t, ordered_json j) {
        if (enabled_) pending_.emplace_back(t, std::move(j));
    }
    void flush() {
        if (!enabled_) return;
        std::stable_sort(pending_.begin(), pending_.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [t, j] : pending_) out_ << j.dump() << "\n";
        pending_.clear();
    }

  private:
    std::ofstream out_;
    bool enabled_ = false;
    std::vector<std::pair<double, ordered_json>> pending_;
};

class CsvWriter {
  public:
    void open(const std::string& path, const std::string& comment, const std::string& header) {
        if (path.empty()) return;
        out_.open(path);
        if (!out_) throw IoError("cannot open for writing: " + path);
        if (!comment.empty()) out_ << "# " << comment << "\n";
        out_ << header << "\n";
        enabled_ = true;
    }
    void row(const std::string& line) {
        if (enabled_) out_ << line << "\n";
    }

  private:
    std::ofstream out_;
    bool enabled_ = false;
};

}  // namespace

struct Simulation::Impl {
    Scenario sc;
    const ProfileSet& ps;
    const CarbonSeries& carbon;
    std::vector<Request>& trace;       // what actually arrives
    std::vector<Request>& base_trace;  // what the forecaster sees

    ProfileSet restricted;  // partitions trimmed when multipartition is disabled
    bool classifier_enabled = true;

    std::vector<std::unique_ptr<SimWorker>> workers;
    std::vector<std::unique_ptr<EntryExt>> entries;
    std::array<std::vector<SimWorker*>, kNumRTypes> pools;
    std::array<WrrDispatcher, kNumRTypes> wrr;
    std::array<std::vector<EntryExt*>, kNumRTypes> pool_active;

    LengthOracle oracle;
    EventWriter events;
    CsvWriter freq_csv;
    RunState state;
    int next_worker_id = 0;
    size_t trace_idx = 0;
    std::optional<AllocationPlan> current_plan;
    int active_partition = -1;

    Impl(const Scenario& scenario, const ProfileSet& profiles, const CarbonSeries& series,
         std::vector<Request>& tr, std::vector<Request>& base_tr)
        : sc(scenario),
          ps(profiles),
          carbon(series),
          trace(tr),
          base_trace(base_tr),
          oracle(scenario.classifier_accuracy, child_seed(scenario.seed, "length-oracle")) {
        classifier_enabled = !sc.baseline();
        restricted = restrict_profiles(ps, sc);
    }

    const PartitionScheme& active_scheme() const { return ps.partition(active_partition); }

    RType label_for(int64_t input_tokens, int64_t output_tokens) const {
        if (!classifier_enabled) return RType::LL;
        return classify(input_tokens, output_tokens, active_scheme());
    }

    // --- worker lifecycle --------------------------------------------------

    void spawn_worker(const PlanEntry& pe, double now, double available_at) {
        auto w = std::make_unique<SimWorker>();
        w->id = next_worker_id++;
        w->location = pe.location;
        w->cfg = ConfigKey{pe.partition, pe.rtype, pe.mode};
        w->prof = &ps.config(w->cfg);
        w->miad = MiadState{w->prof->f_max_mhz, sc.controller.mi, sc.controller.ad_mhz,
                            w->prof->f_min_mhz, w->prof->f_max_mhz};
        w->miad_enabled = !sc.knob_disabled("miad");
        w->f_act = w->prof->f_max_mhz;
        w->available_at = available_at;
        w->spawned_at = now;
        events.buffer(now, {{"t", now},
                      {"e", "spawn"},
                      {"w", w->id},
                      {"loc", w->location},
                      {"rtype", to_string(w->cfg.rtype)},
                      {"mode", w->cfg.mode},
                      {"slots", w->prof->slots},
                      {"avail", available_at}});
        workers.push_back(std::move(w));
    }

    void reconcile_workers(const AllocationPlan& plan, double now, bool with_delay) {
        std::map<std::tuple<std::string, int, RType, std::string>, int64_t> want;
        for (const auto& pe : plan.workers)
            want[{pe.location, pe.partition, pe.rtype, pe.mode}] += pe.count;

        // Keep matching workers, drain the excess (newest first).
        std::map<std::tuple<std::string, int, RType, std::string>, std::vector<SimWorker*>> have;
        for (auto& w : workers)
            if (w->alive() && !w->draining)
                have[{w->location, w->cfg.partition, w->cfg.rtype, w->cfg.mode}].push_back(w.get());

        for (auto& [key, ws] : have) {
            const int64_t target = want.count(key) ? want.at(key) : 0;
            if (static_cast<int64_t>(ws.size()) > target) {
                std::sort(ws.begin(), ws.end(),
                          [](const SimWorker* a, const SimWorker* b) { return a->id < b->id; });
                for (size_t i = static_cast<size_t>(target); i < ws.size(); ++i) {
                    ws[i]->draining = true;
                    events.buffer(now, {{"t", now}, {"e", "drain"}, {"w", ws[i]->id}});
                }
            }
        }
        for (const auto& pe : plan.workers) {
            const auto key = std::make_tuple(pe.location, pe.partition, pe.rtype, pe.mode);
            const int64_t existing =
                have.count(key) ? std::min<int64_t>(static_cast<int64_t>(have[key].size()), pe.count)
                                : 0;
            for (int64_t i = existing; i < pe.count; ++i)
                spawn_worker(pe, now, with_delay ? now + sc.switch_delay_s : now);
        }
        rebuild_pools();
    }

    void rebuild_pools() {
        for (auto& p : pools) p.clear();
        for (auto& w : workers)
            if (w->alive() && !w->draining)
                pools[static_cast<int>(w->cfg.rtype)].push_back(w.get());
        for (int r = 0; r < kNumRTypes; ++r) {
            std::sort(pools[r].begin(), pools[r].end(),
                      [](const SimWorker* a, const SimWorker* b) { return a->id < b->id; });
            std::vector<std::pair<int, double>> weights;
            for (SimWorker* w : pools[r]) weights.emplace_back(w->id, 1.0);
            wrr[r].configure(std::move(weights));
        }
    }

    void retire_drained(double now) {
        for (auto& w : workers) {
            if (w->alive() && w->draining && w->running.empty()) {
                w->retired_at = now;
                events.buffer(now, {{"t", now}, {"e", "retire"}, {"w", w->id}});
            }
        }
    }

    // --- request intake ----------------------------------------------------

    const ConfigProfile& reference_profile(RType label) const {
        const auto& pool = pools[static_cast<int>(label)];
        if (!pool.empty()) return *pool.front()->prof;
        for (const auto& [key, cfg] : ps.configs)  // lexicographic fallback
            if (key.partition == active_partition && key.rtype == label) return cfg;
        std::ostringstream os;
        os << "no config profile for (partition=" << active_partition << ", rtype="
           << to_string(label) << ")";
        throw ConfigError(os.str());
    }

    void admit_arrivals(double now) {
        while (trace_idx < trace.size() && trace[trace_idx].arrival_s <= now + kTimeEps) {
            const Request& r = trace[trace_idx++];
            auto ext = std::make_unique<EntryExt>();
            ext->true_label = label_for(r.input_tokens, r.output_tokens);
            ext->input_tokens = r.input_tokens;

            int64_t predicted = classifier_enabled
                                    ? oracle.predict(r, active_scheme())
                                    : (r.predicted_output_tokens ? *r.predicted_output_tokens
                                                                 : r.output_tokens);
            SchedEntry& e = ext->sched;
            e.request_id = r.id;
            e.rtype = classifier_enabled ? classify(r.input_tokens, predicted, active_scheme())
                                         : RType::LL;
            e.arrival_s = r.arrival_s;
            e.predicted_tokens = predicted;
            e.true_tokens = r.output_tokens;

            const ConfigProfile& prof = reference_profile(e.rtype);
            ext->ref_ttft_s = prof.base_ttft_s;
            ext->ref_tbt_s = prof.base_tbt_s;
            e.lat_est_s = expected_lat(predicted, prof.base_ttft_s, prof.base_tbt_s);
            e.window_s = sc.policy.alpha_llf * e.lat_est_s;
            e.deadline_s = e.arrival_s + e.window_s;

            events.buffer(now, {{"t", now},
                          {"e", "arrive"},
                          {"r", e.request_id},
                          {"rtype", to_string(e.rtype)},
                          {"true", to_string(ext->true_label)},
                          {"pred", predicted},
                          {"lat", e.lat_est_s},
                          {"win", e.window_s}});

            pool_active[static_cast<int>(e.rtype)].push_back(ext.get());

            RequestOutcome oc;
            oc.id = r.id;
            oc.arrival_s = r.arrival_s;
            oc.input_tokens = r.input_tokens;
            oc.output_tokens = r.output_tokens;
            oc.predicted_tokens = predicted;
            oc.true_label = ext->true_label;
            oc.pred_label = e.rtype;
            oc.lat_est_s = e.lat_est_s;
            oc.window_s = e.window_s;
            state.requests.push_back(oc);
            entries.push_back(std::move(ext));
        }
    }

    // --- per-tick phases ---------------------------------------------------

    void scheduler_tick(double now) {
        for (int r = 0; r < kNumRTypes; ++r) {
            auto& active = pool_active[r];
            // Drop finished entries from the pool list.
            active.erase(std::remove_if(active.begin(), active.end(),
                                        [](EntryExt* e) {
                                            return e->sched.state == SchedEntry::State::Done;
                                        }),
                         active.end());
            if (active.empty()) continue;

            for (EntryExt* e : active) {
                double ttft = e->ref_ttft_s, tbt = e->ref_tbt_s;
                if (e->sched.state == SchedEntry::State::Running) {
                    const SimWorker* w = worker_by_id(e->sched.worker_id);
                    const auto [st, sb] = scaled_latency(*w->prof, w->f_act);
                    ttft = st;
                    tbt = sb;
                }
                e->sched.remaining_s = remaining_time(e->sched, ttft, tbt);
                e->sched.laxity_s = laxity(e->sched, now);
            }

            std::vector<SchedEntry*> view_entries;
            for (EntryExt* e : active) view_entries.push_back(&e->sched);

            // Views must mirror the dispatcher's pool order position by
            // position; workers still inside their spawn delay stay listed
            // but not accepting.
            std::vector<WorkerView> views;
            for (SimWorker* w : pools[r]) {
                WorkerView v;
                v.id = w->id;
                v.free_slots = w->free_slots();
                v.accepting = w->available_at <= now + kTimeEps;
                v.running = w->running;
                views.push_back(std::move(v));
            }
            auto decisions = schedule_tick(view_entries, views, sc.effective_policy(), now,
                                           wrr[static_cast<size_t>(r)]);
            for (const auto& d : decisions) {
                SimWorker* w = worker_by_id(d.worker_id);
                EntryExt* e = entry_by_id(d.request_id);
                switch (d.kind) {
                    case ScheduleDecision::Kind::Preempt: {
                        auto& run = w->running;
                        run.erase(std::find(run.begin(), run.end(), &e->sched));
                        w->dead_time_s += sc.preempt_cost_s;
                        state.preemption_count += 1;
                        events.buffer(now, {{"t", now}, {"e", "preempt"}, {"r", d.request_id}, {"w", w->id}});
                        break;
                    }
                    case ScheduleDecision::Kind::Start:
                    case ScheduleDecision::Kind::Resume: {
                        w->running.push_back(&e->sched);
                        events.buffer(now, {{"t", now},
                                      {"e", d.kind == ScheduleDecision::Kind::Start ? "start" : "resume"},
                                      {"r", d.request_id},
                                      {"w", w->id}});
                        break;
                    }
                }
            }
        }
    }

    void controller_tick(double now) {
        for (auto& wp : workers) {
            SimWorker* w = wp.get();
            if (!w->alive() || w->spawned_at > now + kTimeEps) continue;

            // Projected end-to-end latency of what is running right now.
            for (SchedEntry* e : w->running) {
                const auto [st, sb] = scaled_latency(*w->prof, w->f_act);
                SloObservation o;
                o.projected_e2e_s = (now - e->arrival_s) + remaining_time(*e, st, sb);
                w->obs.push_back(o);
            }

            double f_target;
            if (w->miad_enabled) {
                const bool congested =
                    detect_congestion(std::span<const SloObservation>(w->obs),
                                      ps.miad_thresholds, w->cfg.rtype);
                f_target = miad_step(w->miad, congested);
            } else {
                f_target = w->prof->f_max_mhz;
            }
            w->obs.clear();
            const double quantized = quantize_frequency(f_target, w->prof->f_min_mhz,
                                                        w->prof->f_max_mhz, w->prof->freq_step_mhz);
            if (quantized != w->f_act) {
                w->f_act = quantized;
                events.buffer(now, {{"t", now}, {"e", "freq"}, {"w", w->id}, {"f", w->f_act}});
            }
        }
    }

    void advance_and_account(double now, double dt) {
        for (auto& wp : workers) {
            SimWorker* w = wp.get();
            if (!w->alive() || w->spawned_at > now + kTimeEps) continue;

            const bool active = !w->running.empty();
            const double power_w =
                active ? worker_power_at(*w->prof, ps.gpus, w->f_act)
                       : worker_power_at(*w->prof, ps.gpus, w->prof->f_min_mhz) * sc.idle_fraction;
            freq_csv.row(fmt_double(now) + "," + std::to_string(w->id) + "," +
                         fmt_double(w->f_act) + "," + fmt_double(power_w));

            const double inc_wh = power_w * dt / 3600.0;
            const double lam = lme_at(carbon, w->location, now);
            const double inc_kg = inc_wh / 1000.0 * lam;
            w->energy_wh += inc_wh;
            w->emission_kg += inc_kg;
            state.total_energy_wh += inc_wh;
            state.total_emission_kg += inc_kg;

            advance_tokens(w, now, dt);
        }
        retire_drained(now + dt);
    }

    // Event-stepped token generation: rates change only when a prefill
    // completes or an entry finishes, so the split is exact within each
    // segment.
    void advance_tokens(SimWorker* w, double t0, double dt) {
        double cur = t0;
        const double t_end = t0 + dt;
        if (w->dead_time_s > 0) {
            const double d = std::min(w->dead_time_s, t_end - cur);
            w->dead_time_s -= d;
            cur += d;
        }
        int guard = 0;
        while (cur < t_end - kTimeEps && !w->running.empty()) {
            if (++guard > 100000) throw InternalError("advance_tokens: segment limit exceeded");

            const auto [ttft_f, tbt_f] = scaled_latency(*w->prof, w->f_act);
            (void)tbt_f;
            std::vector<SchedEntry*> prefillers, decoders;
            for (SchedEntry* e : w->running) {
                if (e->prefill_remaining_frac > 0 && ttft_f > kTimeEps)
                    prefillers.push_back(e);
                else {
                    e->prefill_remaining_frac = 0.0;
                    decoders.push_back(e);
                }
            }
            const double rate = w->prof->decode_rate(w->f_act);
            const double rho = decoders.empty() ? 0.0 : rate / static_cast<double>(decoders.size());

            double step = t_end - cur;
            for (SchedEntry* p : prefillers)
                step = std::min(step, p->prefill_remaining_frac * ttft_f);
            if (rho > 0)
                for (SchedEntry* d : decoders) {
                    const double need =
                        static_cast<double>(d->true_tokens - d->tokens_done) - d->decode_acc;
                    step = std::min(step, need / rho);
                }
            if (step < 0) step = 0;

            bool prefill_completed = false;
            for (SchedEntry* p : prefillers) {
                p->prefill_remaining_frac -= step / ttft_f;
                if (p->prefill_remaining_frac < kTimeEps) {
                    p->prefill_remaining_frac = 0.0;
                    prefill_completed = true;
                }
            }

            std::vector<SchedEntry*> finished;
            for (SchedEntry* d : decoders) {
                const double total = d->decode_acc + rho * step;
                int64_t emitted = static_cast<int64_t>(std::floor(total + 1e-9));
                emitted = std::min(emitted, d->true_tokens - d->tokens_done);
                if (emitted > 0) {
                    EntryExt* ext = entry_by_id(d->request_id);
                    const double gap = 1.0 / rho;
                    const double t_first = std::min(cur + (1.0 - d->decode_acc) * gap, t_end);
                    for (int64_t i = 0; i < emitted; ++i)
                        ext->token_times.push_back(
                            std::min(t_first + static_cast<double>(i) * gap, t_end));
                    const double t_last = ext->token_times.back();
                    if (d->tokens_done == 0) {
                        d->first_token_at = t_first;
                        events.buffer(t_first, {{"t", t_first}, {"e", "ftok"}, {"r", d->request_id}});
                        SloObservation o;
                        o.ttft_s = t_first - d->arrival_s;
                        w->obs.push_back(o);
                    }
                    d->tokens_done += emitted;
                    d->decode_acc = std::max(0.0, total - static_cast<double>(emitted));
                    d->last_token_at = t_last;
                    events.buffer(t_last, {{"t", t_last},
                                  {"e", "tok"},
                                  {"r", d->request_id},
                                  {"n", emitted},
                                  {"t0", t_first},
                                  {"gap", gap}});
                    SloObservation o;
                    o.tbt_s = gap;
                    w->obs.push_back(o);
                    if (d->tokens_done == d->true_tokens) {
                        d->finished_at = t_last;
                        d->state = SchedEntry::State::Done;
                        d->worker_id = -1;
                        finished.push_back(d);
                        events.buffer(t_last, {{"t", t_last}, {"e", "finish"}, {"r", d->request_id}, {"w", w->id}});
                    }
                } else {
                    d->decode_acc = total;
                }
            }
            for (SchedEntry* d : finished)
                w->running.erase(std::find(w->running.begin(), w->running.end(), d));
            cur += step;
            if (step <= kTimeEps && finished.empty() && !prefill_completed)
                break;  // nothing can progress (rate 0)
        }
    }

    // --- lookups -----------------------------------------------------------

    SimWorker* worker_by_id(int id) const {
        // Worker ids are dense spawn-order indices.
        if (id < 0 || static_cast<size_t>(id) >= workers.size() || workers[static_cast<size_t>(id)]->id != id)
            throw InternalError("unknown worker id " + std::to_string(id));
        return workers[static_cast<size_t>(id)].get();
    }

    EntryExt* entry_by_id(int64_t request_id) const {
        // The trace is sorted and ids are dense, so admission order == id order.
        if (request_id < 0 || static_cast<size_t>(request_id) >= entries.size() ||
            entries[static_cast<size_t>(request_id)]->sched.request_id != request_id)
            throw InternalError("unknown request id " + std::to_string(request_id));
        return entries[static_cast<size_t>(request_id)].get();
    }

    // --- main loop ---------------------------------------------------------

    void run() {
        const double tick = sc.policy.tick_s;
        for (int k = 0; k < sc.epochs; ++k) {
            const double start = static_cast<double>(k) * sc.epoch_s;
            const bool replan = k == 0 || !sc.knob_disabled("tp_change");
            if (replan) {
                // The forecaster sees the base trace; a qps multiplier models an
                // unforeseen load shift against an unchanged provision, matching
                // the busy/idle testbed methodology.
                auto traffic = forecast_epoch_traffic(sc, restricted, base_trace, start, k);
                IpInstance inst =
                    build_instance(restricted, carbon, traffic, start, sc.objective, sc.alpha_risk);
                AllocationPlan plan = solve(inst);
                if (plan.status != AllocationPlan::Status::Optimal) {
                    if (sc.best_effort && current_plan) {
                        EpochSummary es;
                        es.k = k;
                        es.start_s = start;
                        es.plan = *current_plan;
                        es.reused_previous = true;
                        state.epochs.push_back(es);
                        events.buffer(start, {{"t", start},
                                              {"e", "epoch"},
                                              {"k", k},
                                              {"status", "reused"},
                                              {"partition", current_plan->partition}});
                    } else {
                        throw InfeasibleEpochError(k, plan.infeasible_family);
                    }
                } else {
                    current_plan = plan;
                    active_partition = plan.partition;
                    EpochSummary es;
                    es.k = k;
                    es.start_s = start;
                    es.plan = plan;
                    state.epochs.push_back(es);
                    ordered_json jworkers = ordered_json::array();
                    for (const auto& pe : plan.workers)
                        jworkers.push_back({{"loc", pe.location},
                                            {"rtype", to_string(pe.rtype)},
                                            {"mode", pe.mode},
                                            {"count", pe.count}});
                    events.buffer(start, {{"t", start},
                                          {"e", "epoch"},
                                          {"k", k},
                                          {"status", "optimal"},
                                          {"partition", plan.partition},
                                          {"objective", plan.objective},
                                          {"workers", jworkers}});
                    reconcile_workers(plan, start, k > 0);
                }
            } else {
                EpochSummary es;
                es.k = k;
                es.start_s = start;
                es.plan = *current_plan;
                es.reused_previous = true;
                state.epochs.push_back(es);
                events.buffer(start, {{"t", start},
                                      {"e", "epoch"},
                                      {"k", k},
                                      {"status", "held"},
                                      {"partition", current_plan->partition}});
            }

            events.flush();  // epoch header, drains and spawns precede tick events

            const auto ticks = static_cast<int64_t>(std::llround(sc.epoch_s / tick));
            const auto ctrl_every =
                std::max<int64_t>(1, static_cast<int64_t>(std::llround(sc.controller.tick_s / tick)));
            for (int64_t i = 0; i < ticks; ++i) {
                const double now = start + static_cast<double>(i) * tick;
                admit_arrivals(now);
                scheduler_tick(now);
                if (i % ctrl_every == 0) controller_tick(now);
                advance_and_account(now, tick);
                events.flush();
            }
        }
        finalize();
    }

    void finalize() {
        events.flush();
        state.horizon_s = static_cast<double>(sc.epochs) * sc.epoch_s;
        for (auto& oc : state.requests) {
            const EntryExt* e = entry_by_id(oc.id);
            oc.first_token_at = e->sched.first_token_at;
            oc.finished_at = e->sched.finished_at;
            oc.tokens_done = e->sched.tokens_done;
            oc.preemptions = e->sched.preemptions;
            oc.token_times = e->token_times;
        }
        for (const auto& w : workers) {
            WorkerSummary ws;
            ws.id = w->id;
            ws.location = w->location;
            ws.cfg = w->cfg;
            ws.energy_wh = w->energy_wh;
            ws.emission_kg = w->emission_kg;
            ws.spawned_at = w->spawned_at;
            ws.retired_at = w->retired_at;
            state.workers.push_back(ws);
        }
    }
};

Simulation::Simulation(Scenario scenario) : scenario_(std::move(scenario)) {
    profiles_ = std::make_shared<ProfileSet>(load_profiles(scenario_.profile_path));
    carbon_ = std::make_shared<CarbonSeries>(load_carbon(scenario_.carbon_path));
    base_trace_ = ingest_trace(scenario_.trace_path);
    // Requests arriving at or after the horizon never enter the system.
    const double horizon = static_cast<double>(scenario_.epochs) * scenario_.epoch_s;
    std::erase_if(base_trace_, [&](const Request& r) { return r.arrival_s >= horizon; });
    trace_ = apply_qps_multiplier(base_trace_, scenario_.qps_multiplier,
                                  child_seed(scenario_.seed, "qps-multiplier"));
}

RunState Simulation::run(const std::string& out_dir) {
    Impl impl(scenario_, *profiles_, *carbon_, trace_, base_trace_);
    impl.state.scenario = scenario_;
    impl.state.config_hash = scenario_config_hash(scenario_);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        impl.events.open((fs::path(out_dir) / "events.jsonl").string());
        impl.events.write({{"e", "meta"},
                           {"scenario", scenario_.name},
                           {"config_hash", impl.state.config_hash},
                           {"seed", scenario_.seed},
                           {"tick_s", scenario_.policy.tick_s}});
        impl.freq_csv.open((fs::path(out_dir) / "freq_power.csv").string(),
                           "config_hash=" + impl.state.config_hash, "t,worker,f_mhz,power_w");
    }
    impl.run();
    return std::move(impl.state);
}

}  // namespace ecosched
