#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "roving/error.hpp"
#include "roving/model.hpp"
#include "roving/random.hpp"

/// Deterministic fluid model of one unit cycle at full load.
namespace roving::fluid {

using Path = std::vector<int>;

struct FluidProfile {
    int n = 0;
    Mat psi;  ///< psi(i, k): customers entering queue i while the server visits queue k
    Mat pi;   ///< pi(i, k) = psi(i, k) / gamma_hat(i)
    Vec gamma_hat, rho_hat, lambda_hat;
    Vec b, btilde;
    Vec delta_i;
    double delta = 0.0;
    Mat routing;
    std::vector<Discipline> discipline;
    Warnings warnings;

    [[nodiscard]] bool exhaustive(int i) const {
        return discipline[static_cast<std::size_t>(i)] == Discipline::Exhaustive;
    }

    /// sum_{j=from}^{to-1} psi(i, j) over the cyclic window; empty when from == to.
    [[nodiscard]] double window(int i, int from, int to) const {
        double s = 0.0;
        for (int j = wrap(from, n); j != wrap(to, n); j = wrap(j + 1, n)) s += psi(i, j);
        return s;
    }
};

inline FluidProfile build_profile(const DerivedTraffic &t) {
    const int n = t.n;
    FluidProfile f;
    f.n = n;
    f.gamma_hat = t.gamma_hat;
    f.rho_hat = t.rho_hat;
    f.lambda_hat = t.lambda_hat;
    f.b = t.b;
    f.btilde = t.btilde;
    f.routing = t.routing;
    f.discipline = t.discipline;
    f.psi.resize(n, n);
    f.pi = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) f.psi(i, k) = t.rho_hat(k) * t.lambda_hat(i) + t.gamma_hat(k) * t.routing(k, i);
        if (t.gamma_hat(i) > 0.0) f.pi.row(i) = f.psi.row(i) / t.gamma_hat(i);
    }

    f.delta_i = Vec::Zero(n);
    for (int i = 0; i < n; ++i) {
        const double bt = t.btilde(i);
        double d = 0.5 * t.rho_hat(i) * bt * (t.gamma_hat(i) + f.psi(i, i));
        double acc = f.psi(i, i);
        for (int m = 1; m < n; ++m) {
            const int j = wrap(i + m, n);
            d += t.rho_hat(j) * bt * (0.5 * f.psi(i, j) + acc);
            acc += f.psi(i, j);
        }
        if (t.exhaustive(i)) d -= f.psi(i, i) * bt;
        f.delta_i(i) = std::max(d, 0.0);
    }
    f.delta = f.delta_i.sum();
    if (f.delta < 1e-12) {
        f.warnings.push_back({Errc::DegenerateDelta, "fluid work per unit cycle is zero; heavy-traffic limits degenerate"});
    }
    return f;
}

/// Work in queue i when the server arrives at queue j; j == i means a full cycle after the last visit.
inline double work_at_visit_start(const FluidProfile &f, int i, int j) {
    if (i < 0 || i >= f.n || j < 0 || j >= f.n) throw Error(Errc::IndexOutOfRange, "queue index out of range");
    const int from = f.exhaustive(i) ? i + 1 : i;
    double mass = 0.0;
    if (j == i) {
        mass = f.exhaustive(i) ? f.gamma_hat(i) - f.psi(i, i) : f.gamma_hat(i);
    } else {
        mass = f.window(i, from, j);
    }
    return mass * f.btilde(i);
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Queue i's fluid content sweeps this interval uniformly while the server is at queue k.
inline Interval fluid_queue_length_interval(const FluidProfile &f, int i, int k) {
    if (i < 0 || i >= f.n || k < 0 || k >= f.n) throw Error(Errc::IndexOutOfRange, "queue index out of range");
    if (f.exhaustive(i)) {
        if (k == i) return {0.0, std::max(0.0, f.gamma_hat(i) - f.psi(i, i))};
        const double lo = f.window(i, i + 1, k);
        return {lo, lo + f.psi(i, k)};
    }
    if (k == i) return {f.psi(i, i), f.gamma_hat(i)};
    const double lo = f.window(i, i, k);
    return {lo, lo + f.psi(i, k)};
}

struct FluidWaitSample {
    int queue = 0;
    int phase = 0;
    double u = 0.0;
    double past = 0.0;       ///< work ahead of the particle in its own queue
    double residual = 0.0;   ///< time until the server returns to the queue
    double total = 0.0;
    double past_mass = 0.0;  ///< customers ahead of the particle
};

/// Standardized wait of a particle arriving at queue i when a fraction u of visit k has elapsed.
inline FluidWaitSample conditional_wait(const FluidProfile &f, int i, int k, double u) {
    if (i < 0 || i >= f.n || k < 0 || k >= f.n) throw Error(Errc::IndexOutOfRange, "queue index out of range");
    if (!(u >= 0.0 && u <= 1.0)) throw Error(Errc::UOutOfRange, "elapsed fraction must lie in [0,1]");
    FluidWaitSample s;
    s.queue = i;
    s.phase = k;
    s.u = u;
    if (f.exhaustive(i) && k == i) {
        s.past_mass = (1.0 - u) * std::max(0.0, f.gamma_hat(i) - f.psi(i, i));
        s.past = s.past_mass * f.b(i);
        s.residual = 0.0;
        s.total = s.past;
        return s;
    }
    const int from = f.exhaustive(i) ? i + 1 : i;
    s.past_mass = f.window(i, from, k) + u * f.psi(i, k);
    s.past = s.past_mass * f.b(i);
    double rem = (1.0 - u) * f.rho_hat(k);
    for (int j = wrap(k + 1, f.n); j != i; j = wrap(j + 1, f.n)) rem += f.rho_hat(j);
    s.residual = rem;
    s.total = s.past + s.residual;
    return s;
}

namespace detail {

inline int draw_index(const Vec &weights, double total, Rng &rng) {
    double x = uniform01(rng) * total;
    const int n = static_cast<int>(weights.size());
    int last = -1;
    for (int k = 0; k < n; ++k) {
        if (weights(k) <= 0.0) continue;
        last = k;
        if (x < weights(k)) return k;
        x -= weights(k);
    }
    return last;
}

inline void check_path(const FluidProfile &f, const Path &path) {
    if (path.empty()) throw Error(Errc::EmptyPath, "path has no queues");
    for (int q : path) {
        if (q < 0 || q >= f.n) throw Error(Errc::IndexOutOfRange, "path queue index out of range");
    }
}

}  // namespace detail

inline double sample_fluid_wait(const FluidProfile &f, int i, Rng &rng) {
    const int k = detail::draw_index(f.pi.row(i).transpose(), f.pi.row(i).sum(), rng);
    return conditional_wait(f, i, k, uniform01(rng)).total;
}

/// Elapsed fraction of the origin queue's visit at which the particle is taken into service.
inline double next_fraction(const FluidProfile &f, const FluidWaitSample &w) {
    const int q = w.queue;
    double next = 0.0;
    if (f.exhaustive(q) && w.phase == q) {
        next = w.u + w.past_mass / f.gamma_hat(q);
    } else {
        next = w.past_mass / f.gamma_hat(q);
    }
    if (next > 1.0 + 1e-9) {
        throw Error(Errc::ElapsedFractionOverflow,
                    "path recursion produced elapsed fraction " + std::to_string(next));
    }
    return std::clamp(next, 0.0, 1.0);
}

/// Path time for a particle entering the first queue during visit k at elapsed fraction u.
inline double fluid_path_time(const FluidProfile &f, const Path &path, int k, double u) {
    detail::check_path(f, path);
    double total = 0.0;
    for (int q : path) {
        if (!(f.gamma_hat(q) > 0.0)) throw Error(Errc::DeadQueue, "path visits a queue with no traffic");
        const auto w = conditional_wait(f, q, k, u);
        total += w.total;
        u = next_fraction(f, w);
        k = q;
    }
    return total;
}

inline double sample_fluid_path_time(const FluidProfile &f, const Path &path, Rng &rng) {
    detail::check_path(f, path);
    const int k = detail::draw_index(f.rho_hat, f.rho_hat.sum(), rng);
    return fluid_path_time(f, path, k, uniform01(rng));
}

/// Mixture of uniform laws; the fluid wait, queue-length and path laws all have this form.
struct UniformMixture {
    struct Component {
        double weight = 0.0;
        double lo = 0.0;
        double hi = 0.0;
    };
    std::vector<Component> parts;

    [[nodiscard]] double mean() const {
        double m = 0.0;
        for (const auto &c : parts) m += c.weight * 0.5 * (c.lo + c.hi);
        return m;
    }
    [[nodiscard]] double second_moment() const {
        double m = 0.0;
        for (const auto &c : parts) m += c.weight * (c.lo * c.lo + c.lo * c.hi + c.hi * c.hi) / 3.0;
        return m;
    }
    [[nodiscard]] double variance() const {
        const double m = mean();
        return std::max(0.0, second_moment() - m * m);
    }
    [[nodiscard]] double cdf(double x) const {
        double p = 0.0;
        for (const auto &c : parts) {
            const double a = std::min(c.lo, c.hi);
            const double b = std::max(c.lo, c.hi);
            if (x >= b) {
                p += c.weight;
            } else if (x > a) {
                p += c.weight * (x - a) / (b - a);
            }
        }
        return p;
    }
    [[nodiscard]] double total_weight() const {
        double w = 0.0;
        for (const auto &c : parts) w += c.weight;
        return w;
    }
    double sample(Rng &rng) const {
        double x = uniform01(rng) * total_weight();
        const Component *pick = nullptr;
        for (const auto &c : parts) {
            if (c.weight <= 0.0) continue;
            pick = &c;
            if (x < c.weight) break;
            x -= c.weight;
        }
        if (pick == nullptr) return 0.0;
        return pick->lo + (pick->hi - pick->lo) * uniform01(rng);
    }
};

/// For a fixed arrival phase the wait is affine in u, so each phase contributes one uniform piece.
inline UniformMixture fluid_wait_law(const FluidProfile &f, int i) {
    UniformMixture m;
    for (int k = 0; k < f.n; ++k) {
        m.parts.push_back({f.pi(i, k), conditional_wait(f, i, k, 0.0).total, conditional_wait(f, i, k, 1.0).total});
    }
    return m;
}

inline UniformMixture fluid_queue_length_law(const FluidProfile &f, int i) {
    UniformMixture m;
    for (int k = 0; k < f.n; ++k) {
        const auto iv = fluid_queue_length_interval(f, i, k);
        m.parts.push_back({f.rho_hat(k), iv.lo, iv.hi});
    }
    return m;
}

/// Every hop of the path recursion maps u affinely, so the path law is exact as well.
inline UniformMixture fluid_path_law(const FluidProfile &f, const Path &path) {
    detail::check_path(f, path);
    UniformMixture m;
    for (int k = 0; k < f.n; ++k) {
        if (f.rho_hat(k) <= 0.0) continue;
        m.parts.push_back({f.rho_hat(k), fluid_path_time(f, path, k, 0.0), fluid_path_time(f, path, k, 1.0)});
    }
    return m;
}

inline double fluid_mean_wait(const FluidProfile &f, int i) {
    if (!(f.gamma_hat(i) * f.btilde(i) > 0.0)) return 0.0;
    return f.delta_i(i) / (f.gamma_hat(i) * f.btilde(i));
}

inline Warnings validate_path(const FluidProfile &f, const Path &path) {
    detail::check_path(f, path);
    Warnings w;
    for (std::size_t m = 1; m < path.size(); ++m) {
        const int from = path[m - 1];
        const int to = path[m];
        if (!(f.routing(from, to) > 0.0)) {
            w.push_back({Errc::UnroutedHop, "path hop " + std::to_string(from + 1) + ">" + std::to_string(to + 1) +
                                                " has zero routing probability"});
        }
    }
    if (!(f.lambda_hat(path.front()) > 0.0)) {
        w.push_back({Errc::UnroutedHop, "path starts at queue " + std::to_string(path.front() + 1) +
                                            " which has no external arrivals"});
    }
    return w;
}

/// Per phase k: sum_i psi(i, k) btilde(i) - gamma_hat(k) btilde(k). Zero when work is conserved.
inline Vec conservation_residuals(const FluidProfile &f) {
    Vec res(f.n);
    for (int k = 0; k < f.n; ++k) res(k) = f.psi.col(k).dot(f.btilde) - f.gamma_hat(k) * f.btilde(k);
    return res;
}

}  // namespace roving::fluid
