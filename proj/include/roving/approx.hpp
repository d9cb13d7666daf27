#pragma once

#include <cmath>
#include <ostream>
#include <string>

#include "roving/error.hpp"
#include "roving/fluid.hpp"
#include "roving/ht.hpp"
#include "roving/lt.hpp"
#include "roving/model.hpp"

/// Interpolation between the light- and heavy-traffic limits of mean waits and path times.
namespace roving::approx {

struct ApproxOptions {
    lt::LtOptions lt;
    /// 0 uses the closed-form heavy-traffic path mean; otherwise a Monte Carlo estimate with this many samples.
    std::size_t mc_samples = 0;
    std::uint64_t seed = 20240601;
    unsigned workers = 1;
};

struct ApproxResult {
    std::string target;
    double rho = 0.0;
    double lt = 0.0;
    double ht = 0.0;
    double scaled = 0.0;    ///< (1 - rho) times the approximation
    double unscaled = 0.0;
    double endpoint_se = 0.0;
};

/// (1 - rho) E[X] ~ w_lt + (w_ht - w_lt) rho.
inline double interpolate(double w_lt, double w_ht, double rho) { return w_lt + (w_ht - w_lt) * rho; }

inline void check_load(double rho) {
    if (!(rho >= 0.0) || !(rho < 1.0)) throw Error(Errc::LoadOutOfRange, "approximation needs 0 <= rho < 1");
}

inline ApproxResult finish(std::string target, double rho, double w_lt, double w_ht, double se) {
    ApproxResult a;
    a.target = std::move(target);
    a.rho = rho;
    a.lt = w_lt;
    a.ht = w_ht;
    a.scaled = interpolate(w_lt, w_ht, rho);
    a.unscaled = a.scaled / (1.0 - rho);
    a.endpoint_se = se;
    return a;
}

inline ApproxResult approx_mean_wait(const DerivedTraffic &t, const fluid::FluidProfile &f, int i, double rho,
                                     const ApproxOptions &opt = {}) {
    check_load(rho);
    const double w_lt = lt::lt_mean_wait(t, i, opt.lt);
    const double w_ht = ht::ht_mean_wait(t, f, i);
    return finish("wait:" + std::to_string(i + 1), rho, w_lt, w_ht, 0.0);
}

inline ApproxResult approx_mean_path_time(const DerivedTraffic &t, const fluid::FluidProfile &f,
                                          const fluid::Path &path, double rho, const ApproxOptions &opt = {}) {
    check_load(rho);
    const double w_lt = lt::lt_mean_path_time(t, path, opt.lt);
    double w_ht = 0.0;
    double se = 0.0;
    if (opt.mc_samples == 0) {
        w_ht = ht::ht_mean_path_time(t, f, path);
    } else {
        const auto law = ht::ht_law_path(t, f, path, {opt.mc_samples, opt.seed, opt.workers});
        w_ht = law.mean().value;
        se = law.mean().se;
    }
    return finish("path:" + ht::path_label(path), rho, w_lt, w_ht, se);
}

inline void write_csv_header(std::ostream &os) { os << "rho,target,scaled,unscaled,endpoint_se\n"; }

inline void write_csv(std::ostream &os, const ApproxResult &a) {
    os << a.rho << ',' << a.target << ',' << a.scaled << ',' << a.unscaled << ',' << a.endpoint_se << '\n';
}

}  // namespace roving::approx
