#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "roving/error.hpp"
#include "roving/fluid.hpp"
#include "roving/model.hpp"

/// Branching-process view of the gated, Poisson-fed network at polling instants of the first queue.
namespace roving::mtbp {

struct PerronRoot {
    double value = 0.0;
    int iterations = 0;
    bool fallback = false;  ///< power iteration did not converge; a full eigen-decomposition was used
};

/// Largest eigenvalue of a nonnegative matrix.
inline PerronRoot perron_root(const Mat &m, double tol = 1e-12, int max_iter = 100000) {
    const auto n = m.rows();
    Vec x = Vec::Ones(n) / static_cast<double>(n);
    double prev = -1.0;
    for (int it = 1; it <= max_iter; ++it) {
        Vec y = m * x;
        const double norm = y.lpNorm<1>();
        if (!(norm > 0.0)) return {0.0, it, false};
        y /= norm;
        const double change = (y - x).lpNorm<Eigen::Infinity>();
        x = std::move(y);
        if (std::abs(norm - prev) <= tol * std::max(1.0, norm) && change <= tol) return {norm, it, false};
        prev = norm;
    }
    Eigen::EigenSolver<Mat> es(m, false);
    double best = 0.0;
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) best = std::max(best, std::abs(es.eigenvalues()(k)));
    return {best, max_iter, true};
}

struct BranchingStructure {
    int n = 0;
    double rho = 0.0;
    std::vector<Mat> factors;  ///< per-visit offspring matrices at load rho
    Mat M;                     ///< product of the factors, load rho
    Vec g;                     ///< mean immigration per cycle, load rho
    PerronRoot xi;

    Mat M_hat;  ///< load-1 counterparts
    Vec g_hat;
    Vec u_hat, w_hat, v_hat;
    Vec btilde, gamma_hat, rho_hat;
    Mat psi;
    double delta_eq45 = 0.0;
    double delta_fluid = 0.0;
    double btilde_res = 0.0;
    double A = 0.0;
    double r = 0.0;

    [[nodiscard]] double alpha() const { return r * delta_eq45 / btilde_res; }
    [[nodiscard]] double gamma_rate() const { return delta_eq45 / btilde_res; }
};

namespace detail {

inline std::vector<Mat> offspring_factors(const Vec &lambda, const Vec &b, const Mat &p) {
    const auto n = b.size();
    std::vector<Mat> f;
    f.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) {
        Mat mk = Mat::Identity(n, n);
        mk.row(k) = (b(k) * lambda + p.row(k).transpose()).transpose();
        f.push_back(std::move(mk));
    }
    return f;
}

inline Mat product(const std::vector<Mat> &f) {
    Mat m = f.front();
    for (std::size_t k = 1; k < f.size(); ++k) m = m * f[k];
    return m;
}

inline Vec immigration(const Vec &lambda, const Vec &r_i, const Mat &m) {
    const auto n = lambda.size();
    Vec g = Vec::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double s = j <= i ? lambda(j) : 0.0;
            for (Eigen::Index k = i + 1; k < n; ++k) s += lambda(k) * m(k, j);
            g(j) += r_i(i) * s;
        }
    }
    return g;
}

}  // namespace detail

struct ResidualService {
    double btilde_res = 0.0;
    double A = 0.0;
};

/// Mean residual extended service time of an arbitrary customer and the scaling constant A.
inline ResidualService residual_extended_service(const DerivedTraffic &t, double delta) {
    ResidualService rs;
    const double m1 = t.lambda_hat.dot(t.btilde);
    const double m2 = t.lambda_hat.dot(t.btilde2);
    rs.btilde_res = m2 / (2.0 * m1);
    rs.A = rs.btilde_res / (t.btilde.norm() * delta);
    return rs;
}

inline BranchingStructure build_branching(const ValidatedSpec &vs, double rho = 1.0) {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw Error(Errc::LoadOutOfRange, "load must be positive");
    for (int i = 0; i < vs.size(); ++i) {
        const auto &q = vs.queue(i);
        if (q.discipline != Discipline::Gated) {
            throw Error(Errc::NonGatedDiscipline, "branching analysis requires gated service at every queue");
        }
        if (q.arrival && !dist::is_exponential(*q.arrival)) {
            throw Error(Errc::NonPoissonArrivals, "branching analysis requires Poisson arrivals");
        }
    }
    const auto t = derive_traffic(vs, 1.0);
    const auto f = fluid::build_profile(t);
    const int n = t.n;

    BranchingStructure s;
    s.n = n;
    s.rho = rho;
    s.r = t.r;
    s.btilde = t.btilde;
    s.gamma_hat = t.gamma_hat;
    s.rho_hat = t.rho_hat;
    s.psi = f.psi;
    s.delta_fluid = f.delta;

    const Vec lambda = rho * t.lambda_hat;
    s.factors = detail::offspring_factors(lambda, t.b, t.routing);
    s.M = detail::product(s.factors);
    s.g = detail::immigration(lambda, t.r_i, s.M);
    s.xi = perron_root(s.M);

    s.M_hat = detail::product(detail::offspring_factors(t.lambda_hat, t.b, t.routing));
    s.g_hat = detail::immigration(t.lambda_hat, t.r_i, s.M_hat);

    s.u_hat = Vec::Zero(n);
    for (int i = 0; i < n; ++i) {
        double u = 0.0;
        for (int j = i; j < n; ++j) u += t.lambda_hat(i) * t.rho_hat(j) + t.gamma_hat(j) * t.routing(j, i);
        s.u_hat(i) = u;
    }
    s.delta_eq45 = s.u_hat.dot(t.btilde);
    if (!(s.delta_eq45 > 1e-12)) throw Error(Errc::DegenerateDelta, "branching delta is zero");
    const double bnorm = t.btilde.norm();
    s.w_hat = t.btilde / bnorm;
    s.v_hat = bnorm / s.delta_eq45 * s.u_hat;

    const auto rs = residual_extended_service(t, s.delta_eq45);
    s.btilde_res = rs.btilde_res;
    s.A = rs.A;
    return s;
}

struct Residuals {
    double right_eigen = 0.0;    ///< |M_hat w_hat - w_hat|
    double left_eigen = 0.0;     ///< |M_hat^T v_hat - v_hat|
    double normalization = 0.0;  ///< v_hat^T w_hat - 1
    double immigration = 0.0;    ///< g_hat^T w_hat - r/|btilde|
    double delta_gap = 0.0;      ///< branching delta minus fluid delta
};

inline Residuals residuals(const BranchingStructure &s) {
    Residuals r;
    r.right_eigen = (s.M_hat * s.w_hat - s.w_hat).lpNorm<Eigen::Infinity>();
    r.left_eigen = (s.M_hat.transpose() * s.v_hat - s.v_hat).lpNorm<Eigen::Infinity>();
    r.normalization = s.v_hat.dot(s.w_hat) - 1.0;
    r.immigration = s.g_hat.dot(s.w_hat) - s.r / s.btilde.norm();
    r.delta_gap = s.delta_eq45 - s.delta_fluid;
    return r;
}

/// E[exp(-omega U G)] with U ~ Uniform[a, b] and G ~ Gamma(alpha_star, beta) independent.
inline double gamma_uniform_product_lst(double alpha_star, double beta, double a, double b, double omega) {
    if (!(alpha_star > 1.0)) throw Error(Errc::DegenerateShape, "Gamma shape must exceed 1");
    if (!(beta > 0.0) || a < 0.0 || b < a) throw Error(Errc::NegativeInput, "need beta > 0 and 0 <= a <= b");
    if (omega == 0.0) return 1.0;
    const double la = std::log1p(omega * a / beta);
    if (b - a <= 1e-12 * std::max(1.0, b)) return std::exp(-alpha_star * la);
    const double lb = std::log1p(omega * b / beta);
    const double e = alpha_star - 1.0;
    // f(a) - f(b) with f(x) = (beta / (beta + omega x))^e, computed without cancellation
    const double diff = -std::exp(-e * la) * std::expm1(-e * (lb - la));
    return diff * beta / (e * omega * (b - a));
}

/// LST of the scaled number of customers in queue i at the start of a visit to queue k.
inline double scaled_visit_begin_lst(const BranchingStructure &s, int i, int k, double omega) {
    if (i < 0 || i >= s.n || k < 0 || k >= s.n) throw Error(Errc::IndexOutOfRange, "queue index out of range");
    double coef = 0.0;
    if (k == i) {
        coef = s.gamma_hat(i);
    } else {
        for (int j = i; j != k; j = wrap(j + 1, s.n)) coef += s.psi(i, j);
    }
    const double beta = s.gamma_rate();
    return std::pow(beta / (beta + omega * coef), s.alpha());
}

/// LST of the scaled queue length of queue i at an arbitrary epoch.
inline double scaled_queue_length_lst(const BranchingStructure &s, int i, double omega) {
    if (i < 0 || i >= s.n) throw Error(Errc::IndexOutOfRange, "queue index out of range");
    if (omega == 0.0) return 1.0;
    const double beta = s.gamma_rate();
    const double alpha = s.alpha();
    auto x = [&](double coef) { return std::pow(beta / (beta + omega * coef), alpha); };
    auto piece = [&](double lo, double hi) {
        if (hi - lo <= 1e-12 * std::max(1.0, hi)) return std::pow(beta / (beta + omega * lo), alpha + 1.0);
        return (x(lo) - x(hi)) / ((hi - lo) * s.r * omega);
    };
    double total = 0.0;
    for (int k = 0; k < s.n; ++k) {
        if (!(s.rho_hat(k) > 0.0)) continue;
        double lo = 0.0;
        double hi = 0.0;
        if (k == i) {
            lo = s.psi(i, i);
            hi = s.gamma_hat(i);
        } else {
            for (int j = i; j != k; j = wrap(j + 1, s.n)) lo += s.psi(i, j);
            hi = lo + s.psi(i, k);
        }
        total += s.rho_hat(k) * piece(lo, hi);
    }
    return total;
}

inline nlohmann::json report(const BranchingStructure &s) {
    auto vec = [](const Vec &v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    auto mat = [](const Mat &m) {
        std::vector<std::vector<double>> rows;
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            std::vector<double> row;
            for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
            rows.push_back(std::move(row));
        }
        return rows;
    };
    const auto r = residuals(s);
    return {
        {"rho", s.rho},
        {"xi", s.xi.value},
        {"xi_iterations", s.xi.iterations},
        {"xi_fallback", s.xi.fallback},
        {"offspring_matrix", mat(s.M)},
        {"immigration", vec(s.g)},
        {"w_hat", vec(s.w_hat)},
        {"v_hat", vec(s.v_hat)},
        {"u_hat", vec(s.u_hat)},
        {"delta_branching", s.delta_eq45},
        {"delta_fluid", s.delta_fluid},
        {"btilde_res", s.btilde_res},
        {"A", s.A},
        {"alpha", s.alpha()},
        {"residuals",
         {{"right_eigenvector", r.right_eigen},
          {"left_eigenvector", r.left_eigen},
          {"normalization", r.normalization},
          {"immigration", r.immigration},
          {"delta_gap", r.delta_gap}}},
    };
}

}  // namespace roving::mtbp
