#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <ostream>
#include <queue>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "roving/distributions.hpp"
#include "roving/error.hpp"
#include "roving/model.hpp"
#include "roving/parallel.hpp"
#include "roving/random.hpp"

/// Event-driven simulation of the pre-limit network.
namespace roving::sim {

using Path = std::vector<int>;

struct SimConfig {
    double rho = 0.9;
    double horizon = 1e6;
    double warmup = -1.0;  ///< negative: max(1e4, 100 mean cycles)
    int replications = 10;
    std::uint64_t seed = 1;
    std::vector<Path> paths;
    unsigned workers = 1;
    std::size_t max_path_length = 32;  ///< longer realized routes are counted but not stored
    std::size_t raw_cap = 0;           ///< per-target raw samples kept for histograms
    std::size_t watchdog = 5'000'000;  ///< customers in system beyond which the run is declared unstable
};

/// Streaming mean and variance.
struct Summary {
    std::uint64_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++count;
        const double d = x - mean;
        mean += d / static_cast<double>(count);
        m2 += d * (x - mean);
    }
    [[nodiscard]] double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
    [[nodiscard]] double stddev() const { return std::sqrt(variance()); }
};

struct QueueStats {
    Summary wait;     ///< arrival at the queue to start of service
    Summary sojourn;  ///< arrival at the queue to departure from it
    double mean_queue_length = 0.0;  ///< time-average number waiting (excluding the one in service)
    std::vector<double> raw_wait;
};

struct ReplicationResult {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    double warmup = 0.0;
    double horizon = 0.0;
    std::vector<QueueStats> queues;
    std::vector<Summary> tracked;  ///< one per configured path
    std::vector<std::vector<double>> raw_tracked;
    std::map<Path, Summary> realized;
    Summary cycle;  ///< time between successive visit starts at the first queue
    std::uint64_t external_arrivals = 0;
    std::uint64_t departures = 0;
    std::uint64_t in_system = 0;
    std::uint64_t long_routes = 0;
    std::uint64_t gate_violations = 0;
    std::uint64_t events = 0;
};

namespace detail {

enum class EventKind : int { ServiceDone = 0, Arrival = 1, SwitchDone = 2 };

struct Event {
    double time;
    EventKind kind;
    std::uint64_t seq;
    int queue;

    bool operator>(const Event &o) const {
        if (time != o.time) return time > o.time;
        if (kind != o.kind) return static_cast<int>(kind) > static_cast<int>(o.kind);
        return seq > o.seq;
    }
};

struct Customer {
    double born = 0.0;          ///< external arrival time
    double entered = 0.0;       ///< arrival at current queue
    std::uint64_t stamp = 0;    ///< event counter at arrival to current queue
    Path route;
    bool long_route = false;
};

class Simulator {
public:
    Simulator(const ValidatedSpec &vs, const SimConfig &cfg, std::uint64_t stream)
        : cfg_(cfg), n_(vs.size()), rng_(make_stream(cfg.seed, stream)) {
        const auto t = derive_traffic(vs, cfg.rho);
        routing_ = t.routing;
        exhaustive_.resize(static_cast<std::size_t>(n_));
        for (int i = 0; i < n_; ++i) {
            const auto &q = vs.queue(i);
            if (q.arrival) {
                interarrival_.push_back(dist::scaled(*q.arrival, 1.0 / t.scale));
            } else {
                interarrival_.emplace_back(std::nullopt);
            }
            service_.push_back(q.service);
            switchover_.push_back(q.switchover);
            exhaustive_[static_cast<std::size_t>(i)] = q.discipline == Discipline::Exhaustive;
        }
        const double mean_cycle = t.r / (1.0 - cfg.rho);
        warmup_ = cfg.warmup >= 0.0 ? cfg.warmup : std::max(1e4, 100.0 * mean_cycle);
        if (!(cfg.horizon > warmup_)) throw Error(Errc::InvalidSpec, "horizon must exceed warm-up");
        res_.seed = cfg.seed;
        res_.stream = stream;
        res_.warmup = warmup_;
        res_.horizon = cfg.horizon;
        res_.queues.resize(static_cast<std::size_t>(n_));
        res_.tracked.resize(cfg.paths.size());
        res_.raw_tracked.resize(cfg.paths.size());
        queues_.resize(static_cast<std::size_t>(n_));
        area_.assign(static_cast<std::size_t>(n_), 0.0);
        last_change_.assign(static_cast<std::size_t>(n_), warmup_);
    }

    ReplicationResult run() {
        for (int i = 0; i < n_; ++i) {
            if (interarrival_[static_cast<std::size_t>(i)]) schedule(next_interarrival(i), EventKind::Arrival, i);
        }
        visit_start(0);
        while (!events_.empty()) {
            const Event e = events_.top();
            if (e.time > cfg_.horizon) break;
            events_.pop();
            now_ = e.time;
            ++res_.events;
            switch (e.kind) {
                case EventKind::ServiceDone: service_done(e.queue); break;
                case EventKind::Arrival: external_arrival(e.queue); break;
                case EventKind::SwitchDone: visit_start(wrap(e.queue + 1, n_)); break;
            }
        }
        now_ = cfg_.horizon;
        for (int i = 0; i < n_; ++i) {
            touch(i);
            res_.queues[static_cast<std::size_t>(i)].mean_queue_length =
                area_[static_cast<std::size_t>(i)] / (cfg_.horizon - warmup_);
        }
        res_.in_system = live_;
        return std::move(res_);
    }

private:
    void schedule(double dt, EventKind kind, int q) { events_.push({now_ + dt, kind, seq_++, q}); }

    double next_interarrival(int i) { return dist::sample(*interarrival_[static_cast<std::size_t>(i)], rng_); }

    /// Accumulates the queue-length integral of queue i up to now.
    void touch(int i) {
        auto &last = last_change_[static_cast<std::size_t>(i)];
        if (now_ > last) {
            area_[static_cast<std::size_t>(i)] +=
                static_cast<double>(queues_[static_cast<std::size_t>(i)].size()) * (now_ - last);
            last = now_;
        }
    }

    std::size_t new_customer() {
        if (!free_.empty()) {
            const auto id = free_.back();
            free_.pop_back();
            pool_[id] = Customer{};
            return id;
        }
        pool_.emplace_back();
        return pool_.size() - 1;
    }

    void enqueue(std::size_t id, int q) {
        auto &c = pool_[id];
        c.entered = now_;
        c.stamp = res_.events;
        if (!c.long_route) {
            if (c.route.size() < cfg_.max_path_length) {
                c.route.push_back(q);
            } else {
                c.long_route = true;
                c.route.clear();
            }
        }
        touch(q);
        queues_[static_cast<std::size_t>(q)].push_back(id);
    }

    void external_arrival(int q) {
        ++res_.external_arrivals;
        ++live_;
        if (live_ > cfg_.watchdog) {
            throw Error(Errc::UnstableDetected, "number in system exceeded " + std::to_string(cfg_.watchdog));
        }
        const auto id = new_customer();
        pool_[id].born = now_;
        enqueue(id, q);
        schedule(next_interarrival(q), EventKind::Arrival, q);
    }

    void visit_start(int q) {
        at_ = q;
        visit_stamp_ = res_.events;
        if (q == 0) {
            if (last_cycle_start_ >= warmup_) res_.cycle.add(now_ - last_cycle_start_);
            last_cycle_start_ = now_;
        }
        gate_ = queues_[static_cast<std::size_t>(q)].size();
        serve_or_leave();
    }

    void serve_or_leave() {
        const int q = at_;
        auto &dq = queues_[static_cast<std::size_t>(q)];
        const bool more = exhaustive_[static_cast<std::size_t>(q)] ? !dq.empty() : gate_ > 0;
        if (!more) {
            schedule(dist::sample(switchover_[static_cast<std::size_t>(q)], rng_), EventKind::SwitchDone, q);
            return;
        }
        touch(q);
        const auto id = dq.front();
        dq.pop_front();
        if (gate_ > 0) --gate_;
        auto &c = pool_[id];
        if (!exhaustive_[static_cast<std::size_t>(q)] && c.stamp > visit_stamp_) ++res_.gate_violations;
        if (c.entered >= warmup_) {
            const double w = now_ - c.entered;
            auto &qs = res_.queues[static_cast<std::size_t>(q)];
            qs.wait.add(w);
            if (qs.raw_wait.size() < cfg_.raw_cap) qs.raw_wait.push_back(w);
        }
        in_service_ = id;
        schedule(dist::sample(service_[static_cast<std::size_t>(q)], rng_), EventKind::ServiceDone, q);
    }

    void service_done(int q) {
        const auto id = in_service_;
        auto &c = pool_[id];
        if (c.entered >= warmup_) res_.queues[static_cast<std::size_t>(q)].sojourn.add(now_ - c.entered);
        const int next = route(q);
        if (next >= 0) {
            enqueue(id, next);
        } else {
            depart(id);
        }
        serve_or_leave();
    }

    int route(int q) {
        const double u = uniform01(rng_);
        double acc = 0.0;
        for (int j = 0; j < n_; ++j) {
            const double p = routing_(q, j);
            if (p <= 0.0) continue;
            acc += p;
            if (u < acc) return j;
        }
        return -1;
    }

    void depart(std::size_t id) {
        ++res_.departures;
        --live_;
        const auto &c = pool_[id];
        if (c.born >= warmup_) {
            const double total = now_ - c.born;
            if (c.long_route) {
                ++res_.long_routes;
            } else {
                res_.realized[c.route].add(total);
                for (std::size_t p = 0; p < cfg_.paths.size(); ++p) {
                    if (cfg_.paths[p] == c.route) {
                        res_.tracked[p].add(total);
                        if (res_.raw_tracked[p].size() < cfg_.raw_cap) res_.raw_tracked[p].push_back(total);
                    }
                }
            }
        }
        pool_[id].route.clear();
        free_.push_back(id);
    }

    const SimConfig &cfg_;
    int n_;
    Rng rng_;
    Mat routing_;
    std::vector<std::optional<dist::Distribution>> interarrival_;
    std::vector<dist::Distribution> service_, switchover_;
    std::vector<bool> exhaustive_;
    double warmup_ = 0.0;

    std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
    std::uint64_t seq_ = 0;
    double now_ = 0.0;
    std::vector<std::deque<std::size_t>> queues_;
    std::vector<Customer> pool_;
    std::vector<std::size_t> free_;
    std::uint64_t live_ = 0;
    std::vector<double> area_, last_change_;

    int at_ = 0;
    std::size_t gate_ = 0;
    std::uint64_t visit_stamp_ = 0;
    std::size_t in_service_ = 0;
    double last_cycle_start_ = -1.0;

    ReplicationResult res_;
};

}  // namespace detail

inline void check_config(const SimConfig &cfg) {
    if (!(cfg.rho > 0.0) || !(cfg.rho < 1.0)) throw Error(Errc::UnstableLoad, "simulation needs 0 < rho < 1");
    if (cfg.replications < 1) throw Error(Errc::InvalidSpec, "need at least one replication");
    if (!(cfg.horizon > 0.0)) throw Error(Errc::InvalidSpec, "horizon must be positive");
}

/// One independent run; `stream` selects the random stream derived from the master seed.
inline ReplicationResult run_replication(const ValidatedSpec &vs, const SimConfig &cfg, std::uint64_t stream) {
    check_config(cfg);
    for (const auto &p : cfg.paths) {
        if (p.empty()) throw Error(Errc::EmptyPath, "tracked path has no queues");
        for (int q : p) {
            if (q < 0 || q >= vs.size()) throw Error(Errc::IndexOutOfRange, "tracked path queue out of range");
        }
    }
    return detail::Simulator(vs, cfg, stream).run();
}

/// Replication mean of a per-run value with a Student-t confidence interval.
struct Pooled {
    std::vector<double> values;
    double mean = 0.0;
    double stddev = 0.0;
    double halfwidth = 0.0;  ///< 95% CI half width; 0 with fewer than two replications
    double scaled_mean = 0.0;
    double scaled_halfwidth = 0.0;
};

inline Pooled pool(std::vector<double> values, double rho, double level = 0.95) {
    Pooled p;
    p.values = std::move(values);
    const auto r = p.values.size();
    if (r == 0) return p;
    Summary s;
    for (double v : p.values) s.add(v);
    p.mean = s.mean;
    p.stddev = s.stddev();
    if (r >= 2) {
        const boost::math::students_t t(static_cast<double>(r - 1));
        const double q = boost::math::quantile(boost::math::complement(t, (1.0 - level) / 2.0));
        p.halfwidth = q * p.stddev / std::sqrt(static_cast<double>(r));
    }
    p.scaled_mean = (1.0 - rho) * p.mean;
    p.scaled_halfwidth = (1.0 - rho) * p.halfwidth;
    return p;
}

struct SimReport {
    SimConfig config;
    std::vector<ReplicationResult> runs;
    std::vector<Pooled> wait;          ///< per queue
    std::vector<Pooled> sojourn;       ///< per queue
    std::vector<Pooled> queue_length;  ///< per queue
    std::vector<Pooled> path;          ///< per tracked path
    Pooled cycle;
};

inline SimReport replicate(const ValidatedSpec &vs, const SimConfig &cfg) {
    check_config(cfg);
    SimReport rep;
    rep.config = cfg;
    rep.runs.resize(static_cast<std::size_t>(cfg.replications));
    parallel_for(rep.runs.size(), cfg.workers,
                 [&](std::size_t r) { rep.runs[r] = run_replication(vs, cfg, static_cast<std::uint64_t>(r)); });
    const int n = vs.size();
    auto collect = [&](auto &&get) {
        std::vector<double> v;
        for (const auto &run : rep.runs) v.push_back(get(run));
        return pool(std::move(v), cfg.rho);
    };
    for (int i = 0; i < n; ++i) {
        const auto q = static_cast<std::size_t>(i);
        rep.wait.push_back(collect([q](const ReplicationResult &r) { return r.queues[q].wait.mean; }));
        rep.sojourn.push_back(collect([q](const ReplicationResult &r) { return r.queues[q].sojourn.mean; }));
        rep.queue_length.push_back(
            collect([q](const ReplicationResult &r) { return r.queues[q].mean_queue_length; }));
    }
    for (std::size_t p = 0; p < cfg.paths.size(); ++p) {
        rep.path.push_back(collect([p](const ReplicationResult &r) { return r.tracked[p].mean; }));
    }
    rep.cycle = collect([](const ReplicationResult &r) { return r.cycle.mean; });
    return rep;
}

inline std::string path_label(const Path &p) {
    std::string s;
    for (std::size_t m = 0; m < p.size(); ++m) {
        if (m) s += '>';
        s += std::to_string(p[m] + 1);
    }
    return s;
}

inline void write_replications_csv(std::ostream &os, const SimReport &rep) {
    os << "replication,seed,target,statistic,value,count\n";
    for (std::size_t r = 0; r < rep.runs.size(); ++r) {
        const auto &run = rep.runs[r];
        auto row = [&](const std::string &target, const char *stat, double v, std::uint64_t count) {
            os << r << ',' << run.seed << ',' << target << ',' << stat << ',' << v << ',' << count << '\n';
        };
        for (std::size_t q = 0; q < run.queues.size(); ++q) {
            const auto &qs = run.queues[q];
            const std::string target = "queue:" + std::to_string(q + 1);
            row(target, "mean_wait", qs.wait.mean, qs.wait.count);
            row(target, "mean_sojourn", qs.sojourn.mean, qs.sojourn.count);
            row(target, "mean_queue_length", qs.mean_queue_length, 0);
        }
        for (std::size_t p = 0; p < run.tracked.size(); ++p) {
            row("path:" + path_label(rep.config.paths[p]), "mean", run.tracked[p].mean, run.tracked[p].count);
        }
        row("cycle", "mean", run.cycle.mean, run.cycle.count);
    }
}

inline nlohmann::json pooled_json(const Pooled &p) {
    return {{"mean", p.mean},
            {"stddev", p.stddev},
            {"ci95_halfwidth", p.halfwidth},
            {"scaled_mean", p.scaled_mean},
            {"scaled_ci95_halfwidth", p.scaled_halfwidth},
            {"replications", p.values}};
}

inline nlohmann::json report_json(const SimReport &rep) {
    nlohmann::json j;
    j["rho"] = rep.config.rho;
    j["horizon"] = rep.config.horizon;
    j["replications"] = rep.config.replications;
    j["seed"] = rep.config.seed;
    if (!rep.runs.empty()) j["warmup"] = rep.runs.front().warmup;
    j["cycle"] = pooled_json(rep.cycle);
    for (std::size_t q = 0; q < rep.wait.size(); ++q) {
        j["queues"].push_back({{"queue", q + 1},
                               {"wait", pooled_json(rep.wait[q])},
                               {"sojourn", pooled_json(rep.sojourn[q])},
                               {"queue_length", pooled_json(rep.queue_length[q])}});
    }
    for (std::size_t p = 0; p < rep.path.size(); ++p) {
        j["paths"].push_back({{"path", path_label(rep.config.paths[p])}, {"time", pooled_json(rep.path[p])}});
    }
    std::uint64_t in = 0, out = 0, left = 0, violations = 0;
    for (const auto &r : rep.runs) {
        in += r.external_arrivals;
        out += r.departures;
        left += r.in_system;
        violations += r.gate_violations;
    }
    j["conservation"] = {{"external_arrivals", in}, {"departures", out}, {"in_system", left}};
    j["gate_violations"] = violations;
    return j;
}

}  // namespace roving::sim
