#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "roving/distributions.hpp"
#include "roving/error.hpp"

namespace roving {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Discipline { Gated, Exhaustive };

inline std::string to_string(Discipline d) {
    return d == Discipline::Gated ? "gated" : "exhaustive";
}

/// `arrival` is the interarrival law at normalized load; absent means no external arrivals.
/// `switchover` is the travel time from this queue to the next one in the cycle.
struct QueueSpec {
    std::optional<dist::Distribution> arrival;
    dist::Distribution service = dist::Deterministic{0.0};
    dist::Distribution switchover = dist::Deterministic{0.0};
    Discipline discipline = Discipline::Gated;
    std::string label;
};

struct NetworkSpec {
    std::vector<QueueSpec> queues;
    Mat routing;  ///< routing(i, j) = probability that a customer finishing at i moves to j

    [[nodiscard]] int size() const { return static_cast<int>(queues.size()); }
};

/// Cyclic index arithmetic: queues are visited 0, 1, ..., n-1, 0, ...
constexpr int wrap(int i, int n) { return ((i % n) + n) % n; }

class ValidatedSpec;
ValidatedSpec validate_spec(NetworkSpec spec);

/// A `NetworkSpec` whose invariants were checked; only `validate_spec` creates one.
class ValidatedSpec {
public:
    [[nodiscard]] const NetworkSpec &spec() const noexcept { return spec_; }
    [[nodiscard]] int size() const noexcept { return spec_.size(); }
    [[nodiscard]] const QueueSpec &queue(int i) const { return spec_.queues.at(static_cast<std::size_t>(i)); }
    [[nodiscard]] const Mat &routing() const noexcept { return spec_.routing; }

private:
    explicit ValidatedSpec(NetworkSpec s) : spec_(std::move(s)) {}
    friend ValidatedSpec validate_spec(NetworkSpec spec);

    NetworkSpec spec_;
};

namespace detail {

inline double spectral_radius(const Mat &m) {
    if (m.size() == 0) return 0.0;
    Eigen::EigenSolver<Mat> es(m, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline void check_residual(const Mat &a, const Vec &x, const Vec &rhs, const char *what) {
    const double scale = std::max({1.0, rhs.lpNorm<Eigen::Infinity>(), x.lpNorm<Eigen::Infinity>()});
    if (!x.allFinite() || (a * x - rhs).lpNorm<Eigen::Infinity>() > 1e-10 * scale) {
        throw Error(Errc::SingularSystem, std::string(what) + ": linear system is singular or ill-conditioned");
    }
}

inline Vec solve_checked(const Mat &a, const Vec &rhs, const char *what) {
    Eigen::FullPivLU<Mat> lu(a);
    if (!lu.isInvertible()) throw Error(Errc::SingularSystem, std::string(what) + ": matrix is singular");
    Vec x = lu.solve(rhs);
    check_residual(a, x, rhs, what);
    return x;
}

}  // namespace detail

inline ValidatedSpec validate_spec(NetworkSpec spec) {
    const int n = spec.size();
    if (n < 1) throw Error(Errc::InvalidSpec, "network needs at least one queue");
    if (spec.routing.size() == 0) spec.routing = Mat::Zero(n, n);
    if (spec.routing.rows() != n || spec.routing.cols() != n) {
        throw Error(Errc::InvalidSpec, "routing matrix must be " + std::to_string(n) + "x" + std::to_string(n));
    }
    bool any_arrivals = false;
    double r = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto &q = spec.queues[static_cast<std::size_t>(i)];
        const std::string where = " (queue " + std::to_string(i + 1) + ")";
        try {
            if (q.arrival) dist::validate(*q.arrival);
            dist::validate(q.service);
            dist::validate(q.switchover);
        } catch (const Error &e) {
            throw Error(e.code(), e.what() + where);
        }
        if (q.arrival) any_arrivals = true;
        r += dist::mean(q.switchover);
        double row = 0.0;
        for (int j = 0; j < n; ++j) {
            const double p = spec.routing(i, j);
            if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
                throw Error(Errc::NegativeParameter, "routing probabilities must lie in [0,1]" + where);
            }
            row += p;
        }
        if (row > 1.0 + 1e-12) {
            throw Error(Errc::RowSumExceedsOne, "routing row sums to " + std::to_string(row) + where);
        }
    }
    if (!any_arrivals) throw Error(Errc::NoExternalArrivals, "no queue has external arrivals");
    if (!(r > 0.0)) throw Error(Errc::InvalidSpec, "total mean switch-over time must be positive");
    const double sr = detail::spectral_radius(spec.routing);
    if (sr >= 1.0 - 1e-12) {
        throw Error(Errc::AbsorbingRouting,
                    "routing matrix has spectral radius " + std::to_string(sr) + "; some customers never leave");
    }
    return ValidatedSpec(std::move(spec));
}

/// Per-queue means and second moments pulled out of the distribution specs.
struct QueueMoments {
    Vec lambda;      ///< external rate as given (1/mean interarrival, 0 if absent)
    Vec arrival_scv;
    Vec b, b2;
    Vec r_i, r_var;
};

inline QueueMoments queue_moments(const ValidatedSpec &vs) {
    const int n = vs.size();
    QueueMoments m{Vec::Zero(n), Vec::Zero(n), Vec::Zero(n), Vec::Zero(n), Vec::Zero(n), Vec::Zero(n)};
    for (int i = 0; i < n; ++i) {
        const auto &q = vs.queue(i);
        if (q.arrival) {
            const auto a = dist::moments(*q.arrival);
            if (!(a.mean > 0.0)) throw Error(Errc::InvalidSpec, "interarrival mean must be > 0");
            m.lambda(i) = 1.0 / a.mean;
            m.arrival_scv(i) = a.scv;
        }
        const auto s = dist::moments(q.service);
        m.b(i) = s.mean;
        m.b2(i) = s.second_moment;
        const auto r = dist::moments(q.switchover);
        m.r_i(i) = r.mean;
        m.r_var(i) = r.variance;
    }
    return m;
}

/// gamma = lambda + P^T gamma.
inline Vec solve_total_arrival_rates(const Vec &lambda, const Mat &routing) {
    const auto n = lambda.size();
    const Mat a = Mat::Identity(n, n) - routing.transpose();
    return detail::solve_checked(a, lambda, "total arrival rates");
}

inline Vec solve_total_arrival_rates(const ValidatedSpec &vs) {
    return solve_total_arrival_rates(queue_moments(vs).lambda, vs.routing());
}

struct ExtendedService {
    Vec btilde;
    Vec btilde2;
};

inline ExtendedService solve_extended_service_moments(const Vec &b, const Vec &b2, const Mat &routing) {
    const auto n = b.size();
    const Mat a = Mat::Identity(n, n) - routing;
    ExtendedService e;
    e.btilde = detail::solve_checked(a, b, "extended service means");
    const Vec rhs = b2 + 2.0 * b.cwiseProduct(routing * e.btilde);
    e.btilde2 = detail::solve_checked(a, rhs, "extended service second moments");
    return e;
}

inline ExtendedService solve_extended_service_moments(const ValidatedSpec &vs) {
    const auto m = queue_moments(vs);
    return solve_extended_service_moments(m.b, m.b2, vs.routing());
}

/// Load of the spec exactly as written: sum_i lambda_i btilde_i.
inline double nominal_load(const ValidatedSpec &vs) {
    const auto m = queue_moments(vs);
    return m.lambda.dot(solve_extended_service_moments(m.b, m.b2, vs.routing()).btilde);
}

/// Traffic quantities at a target load. Hatted vectors are the load-1 normalization,
/// so rho_hat = gamma_hat .* b sums to one.
struct DerivedTraffic {
    int n = 0;
    double rho = 0.0;
    double nominal_rho = 0.0;  ///< load of the spec as written
    double scale = 1.0;        ///< lambda = scale * lambda_spec

    Vec lambda, gamma, rho_i;
    Vec lambda_hat, gamma_hat, rho_hat;
    Vec arrival_scv;
    Vec b, b2, btilde, btilde2;
    Vec r_i;
    double r = 0.0;
    double r2 = 0.0;  ///< second moment of the total switch-over time
    Mat routing;
    std::vector<Discipline> discipline;

    [[nodiscard]] bool exhaustive(int i) const {
        return discipline[static_cast<std::size_t>(i)] == Discipline::Exhaustive;
    }
};

inline DerivedTraffic derive_traffic(const ValidatedSpec &vs, double rho_target = 1.0) {
    if (!std::isfinite(rho_target) || rho_target <= 0.0) {
        throw Error(Errc::LoadOutOfRange, "target load must be positive");
    }
    if (rho_target > 1.0 + 1e-12) {
        throw Error(Errc::UnstableLoad, "target load " + std::to_string(rho_target) + " exceeds 1");
    }
    const int n = vs.size();
    const auto m = queue_moments(vs);
    const Mat &p = vs.routing();
    const Vec gamma_spec = solve_total_arrival_rates(m.lambda, p);
    const auto ext = solve_extended_service_moments(m.b, m.b2, p);

    DerivedTraffic t;
    t.n = n;
    t.nominal_rho = m.lambda.dot(ext.btilde);
    if (!(t.nominal_rho > 0.0)) {
        throw Error(Errc::InvalidSpec, "total load is zero; at least one fed queue needs positive service");
    }
    t.scale = rho_target / t.nominal_rho;
    t.lambda_hat = m.lambda / t.nominal_rho;
    t.gamma_hat = gamma_spec / t.nominal_rho;
    t.rho_hat = t.gamma_hat.cwiseProduct(m.b);
    t.lambda = rho_target * t.lambda_hat;
    t.gamma = rho_target * t.gamma_hat;
    t.rho_i = t.gamma.cwiseProduct(m.b);
    t.rho = t.lambda.dot(ext.btilde);
    t.arrival_scv = m.arrival_scv;
    t.b = m.b;
    t.b2 = m.b2;
    t.btilde = ext.btilde;
    t.btilde2 = ext.btilde2;
    t.r_i = m.r_i;
    t.r = m.r_i.sum();
    t.r2 = m.r_var.sum() + t.r * t.r;
    t.routing = p;
    t.discipline.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) t.discipline.push_back(vs.queue(i).discipline);
    return t;
}

}  // namespace roving
