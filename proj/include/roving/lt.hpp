#pragma once

#include <string>
#include <vector>

#include "roving/error.hpp"
#include "roving/fluid.hpp"
#include "roving/model.hpp"

/// Light-traffic limits of waiting and path times.
namespace roving::lt {

/// How a customer routed from an exhaustive queue straight back to itself is charged.
/// SameVisit: served in the ongoing visit, no switch-over window. FullCycle: waits a full cycle r.
enum class SelfFeedbackWindow { SameVisit, FullCycle };

struct LtOptions {
    SelfFeedbackWindow self_feedback = SelfFeedbackWindow::SameVisit;
};

/// Mean switch-over time between leaving queue `from` and arriving at queue `to`, cyclic.
inline double switchover_window(const DerivedTraffic &t, int from, int to, const LtOptions &opt = {}) {
    if (from == to) {
        if (t.exhaustive(to) && opt.self_feedback == SelfFeedbackWindow::SameVisit) return 0.0;
        return t.r;
    }
    double s = 0.0;
    for (int k = from; k != to; k = wrap(k + 1, t.n)) s += t.r_i(k);
    return s;
}

inline double residual_switchover(const DerivedTraffic &t) { return t.r2 / (2.0 * t.r); }

struct LtWaitLaw {
    struct Component {
        double weight = 0.0;
        int source = -1;      ///< feeding queue, or -1 for an external arrival
        double window = 0.0;  ///< mean wait given this component
    };
    std::vector<Component> parts;
    double mean = 0.0;
};

inline LtWaitLaw lt_wait_law(const DerivedTraffic &t, int i, const LtOptions &opt = {}) {
    if (i < 0 || i >= t.n) throw Error(Errc::IndexOutOfRange, "queue index out of range");
    if (!(t.gamma_hat(i) > 0.0)) throw Error(Errc::DeadQueue, "queue " + std::to_string(i + 1) + " receives no traffic");
    LtWaitLaw law;
    const double g = t.gamma_hat(i);
    if (t.lambda_hat(i) > 0.0) law.parts.push_back({t.lambda_hat(i) / g, -1, residual_switchover(t)});
    for (int j = 0; j < t.n; ++j) {
        const double w = t.gamma_hat(j) * t.routing(j, i) / g;
        if (w > 0.0) law.parts.push_back({w, j, switchover_window(t, j, i, opt)});
    }
    for (const auto &c : law.parts) law.mean += c.weight * c.window;
    return law;
}

inline double lt_mean_wait(const DerivedTraffic &t, int i, const LtOptions &opt = {}) {
    return lt_wait_law(t, i, opt).mean;
}

inline double lt_mean_path_time(const DerivedTraffic &t, const fluid::Path &path, const LtOptions &opt = {}) {
    if (path.empty()) throw Error(Errc::EmptyPath, "path has no queues");
    for (int q : path) {
        if (q < 0 || q >= t.n) throw Error(Errc::IndexOutOfRange, "path queue index out of range");
    }
    double m = residual_switchover(t) + t.b(path.front());
    for (std::size_t j = 1; j < path.size(); ++j) m += switchover_window(t, path[j - 1], path[j], opt) + t.b(path[j]);
    return m;
}

/// Hops that revisit a gated queue are charged a whole cycle; flag them for the caller.
inline Warnings path_warnings(const DerivedTraffic &t, const fluid::Path &path) {
    Warnings w;
    for (std::size_t j = 1; j < path.size(); ++j) {
        if (path[j] == path[j - 1] && !t.exhaustive(path[j])) {
            w.push_back({Errc::FullCycleHop, "hop " + std::to_string(path[j] + 1) + ">" + std::to_string(path[j] + 1) +
                                                " at a gated queue is charged a full switch-over cycle"});
        }
    }
    return w;
}

}  // namespace roving::lt
