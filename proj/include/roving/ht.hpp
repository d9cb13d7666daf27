#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "roving/error.hpp"
#include "roving/fluid.hpp"
#include "roving/model.hpp"
#include "roving/parallel.hpp"
#include "roving/random.hpp"

/// Heavy-traffic limit laws: Gamma(length-biased cycle) x fluid component.
namespace roving::ht {

inline double variance_parameter(const DerivedTraffic &t) {
    double s = 0.0;
    for (int i = 0; i < t.n; ++i) {
        const double var_bt = std::max(0.0, t.btilde2(i) - t.btilde(i) * t.btilde(i));
        s += t.lambda_hat(i) * (var_bt + t.btilde(i) * t.btilde(i) * t.arrival_scv(i));
    }
    return s;
}

struct HtParameters {
    double sigma2 = 0.0;
    double alpha = 0.0;
    double mu = 0.0;
    double delta = 0.0;
    double r = 0.0;

    [[nodiscard]] double cycle_shape() const { return alpha; }
    [[nodiscard]] double cycle_rate() const { return delta * mu; }
    [[nodiscard]] double biased_shape() const { return alpha + 1.0; }
    [[nodiscard]] double mean_cycle() const { return alpha / (delta * mu); }
    [[nodiscard]] double mean_biased_cycle() const { return (alpha + 1.0) / (delta * mu); }
    [[nodiscard]] double second_moment_biased_cycle() const {
        const double rate = delta * mu;
        return (alpha + 1.0) * (alpha + 2.0) / (rate * rate);
    }
};

inline HtParameters ht_parameters(const DerivedTraffic &t, const fluid::FluidProfile &f) {
    HtParameters p;
    p.sigma2 = variance_parameter(t);
    p.delta = f.delta;
    p.r = t.r;
    if (!(p.sigma2 > 1e-300)) throw Error(Errc::DegenerateSigma, "variance parameter is zero; Gamma law undefined");
    if (!(p.delta > 1e-12)) throw Error(Errc::DegenerateDelta, "fluid work per cycle is zero; Gamma law undefined");
    p.alpha = 2.0 * t.r * p.delta / p.sigma2;
    p.mu = 2.0 / p.sigma2;
    return p;
}

/// Scaled mean wait (1-rho)E[W_i] in the heavy-traffic limit.
inline double ht_mean_wait(const DerivedTraffic &t, const fluid::FluidProfile &f, int i, Warnings *warnings = nullptr) {
    if (i < 0 || i >= t.n) throw Error(Errc::IndexOutOfRange, "queue index out of range");
    if (!(f.delta_i(i) > 0.0)) {
        if (warnings) {
            warnings->push_back({Errc::DegenerateDelta, "queue " + std::to_string(i + 1) + " holds no fluid work"});
        }
        return 0.0;
    }
    const auto p = ht_parameters(t, f);
    return (t.r + p.sigma2 / (2.0 * p.delta)) * f.delta_i(i) / (t.gamma_hat(i) * t.btilde(i));
}

/// Closed-form scaled mean path time: E[biased cycle] x mean of the fluid path law.
inline double ht_mean_path_time(const DerivedTraffic &t, const fluid::FluidProfile &f, const fluid::Path &path) {
    return ht_parameters(t, f).mean_biased_cycle() * fluid::fluid_path_law(f, path).mean();
}

struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

struct HistogramBin {
    double lo = 0.0;
    double hi = 0.0;
    double density = 0.0;

    [[nodiscard]] double center() const { return 0.5 * (lo + hi); }
};

struct McOptions {
    std::size_t samples = 1'000'000;
    std::uint64_t seed = 20240601;
    unsigned workers = 1;
};

inline constexpr std::size_t kChunks = 16;

/// Product law shape/rate Gamma times a fluid component, materialized by Monte Carlo.
/// The fluid component's exact mixture is kept for closed-form moments.
class HtLaw {
public:
    using FluidSampler = std::function<double(Rng &)>;

    HtLaw(std::string target, double shape, double rate, fluid::UniformMixture exact, const FluidSampler &draw,
          const McOptions &opt)
        : target_(std::move(target)), shape_(shape), rate_(rate), exact_(std::move(exact)), seed_(opt.seed) {
        if (opt.samples < 2) throw Error(Errc::InvalidSpec, "Monte Carlo needs at least 2 samples");
        samples_.resize(opt.samples);
        parallel_for(kChunks, opt.workers, [&](std::size_t c) {
            Rng rng = make_stream(seed_, c);
            const std::size_t lo = opt.samples * c / kChunks;
            const std::size_t hi = opt.samples * (c + 1) / kChunks;
            for (std::size_t s = lo; s < hi; ++s) {
                const double g = sample_gamma(shape_, rate_, rng);
                samples_[s] = g * draw(rng);
            }
        });
        double sum = 0.0;
        for (double x : samples_) sum += x;
        const double n = static_cast<double>(samples_.size());
        mean_ = sum / n;
        double m2 = 0.0;
        double m4 = 0.0;
        for (double x : samples_) {
            const double d = (x - mean_) * (x - mean_);
            m2 += d;
            m4 += d * d;
        }
        var_ = m2 / (n - 1.0);
        m4_ = m4 / n;
        std::sort(samples_.begin(), samples_.end());
    }

    [[nodiscard]] const std::string &target() const noexcept { return target_; }
    [[nodiscard]] double gamma_shape() const noexcept { return shape_; }
    [[nodiscard]] double gamma_rate() const noexcept { return rate_; }
    [[nodiscard]] std::size_t size() const noexcept { return samples_.size(); }
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] const std::vector<double> &sorted_samples() const noexcept { return samples_; }
    [[nodiscard]] const fluid::UniformMixture &fluid_law() const noexcept { return exact_; }

    [[nodiscard]] Estimate mean() const { return {mean_, std::sqrt(var_ / static_cast<double>(size()))}; }

    [[nodiscard]] Estimate stddev() const {
        const double s = std::sqrt(var_);
        const double v4 = std::max(0.0, m4_ - var_ * var_);
        return {s, s > 0.0 ? std::sqrt(v4 / static_cast<double>(size())) / (2.0 * s) : 0.0};
    }

    [[nodiscard]] double exact_mean() const { return shape_ / rate_ * exact_.mean(); }
    [[nodiscard]] double exact_second_moment() const {
        return shape_ * (shape_ + 1.0) / (rate_ * rate_) * exact_.second_moment();
    }
    [[nodiscard]] double exact_stddev() const {
        const double m = exact_mean();
        return std::sqrt(std::max(0.0, exact_second_moment() - m * m));
    }

    /// P(X <= x).
    [[nodiscard]] Estimate cdf(double x) const {
        const auto k = std::upper_bound(samples_.begin(), samples_.end(), x) - samples_.begin();
        return binomial(static_cast<double>(k));
    }

    /// P(X > x).
    [[nodiscard]] Estimate tail(double x) const {
        const auto k = samples_.end() - std::upper_bound(samples_.begin(), samples_.end(), x);
        return binomial(static_cast<double>(k));
    }

    [[nodiscard]] double quantile(double p) const {
        p = std::clamp(p, 0.0, 1.0);
        const auto idx = static_cast<std::size_t>(std::min<double>(
            static_cast<double>(size() - 1), std::floor(p * static_cast<double>(size() - 1))));
        return samples_[idx];
    }

    /// E[exp(-omega X)].
    [[nodiscard]] Estimate lst(double omega) const {
        double s = 0.0;
        double s2 = 0.0;
        for (double x : samples_) {
            const double e = std::exp(-omega * x);
            s += e;
            s2 += e * e;
        }
        const double n = static_cast<double>(size());
        const double m = s / n;
        return {m, std::sqrt(std::max(0.0, s2 / n - m * m) / n)};
    }

    /// Equal-width bins over [0, 99.9th percentile], density normalized over that range.
    [[nodiscard]] std::vector<HistogramBin> histogram(std::size_t bins = 200) const {
        std::vector<HistogramBin> h;
        const double top = quantile(0.999);
        if (bins == 0 || !(top > 0.0)) return h;
        const double width = top / static_cast<double>(bins);
        std::vector<std::size_t> count(bins, 0);
        std::size_t inside = 0;
        for (double x : samples_) {
            if (x > top) break;
            auto b = static_cast<std::size_t>(x / width);
            count[std::min(b, bins - 1)]++;
            ++inside;
        }
        for (std::size_t b = 0; b < bins; ++b) {
            h.push_back({width * static_cast<double>(b), width * static_cast<double>(b + 1),
                         static_cast<double>(count[b]) / (static_cast<double>(inside) * width)});
        }
        return h;
    }

private:
    [[nodiscard]] Estimate binomial(double hits) const {
        const double n = static_cast<double>(size());
        const double p = hits / n;
        return {p, std::sqrt(p * (1.0 - p) / n)};
    }

    std::string target_;
    double shape_;
    double rate_;
    fluid::UniformMixture exact_;
    std::uint64_t seed_;
    std::vector<double> samples_;
    double mean_ = 0.0;
    double var_ = 0.0;
    double m4_ = 0.0;
};

inline HtLaw ht_law_wait(const DerivedTraffic &t, const fluid::FluidProfile &f, int i, const McOptions &opt = {}) {
    if (i < 0 || i >= t.n) throw Error(Errc::IndexOutOfRange, "queue index out of range");
    const auto p = ht_parameters(t, f);
    return HtLaw("wait:" + std::to_string(i + 1), p.biased_shape(), p.cycle_rate(), fluid::fluid_wait_law(f, i),
                 [&f, i](Rng &rng) { return fluid::sample_fluid_wait(f, i, rng); }, opt);
}

inline HtLaw ht_law_queue_length(const DerivedTraffic &t, const fluid::FluidProfile &f, int i,
                                 const McOptions &opt = {}) {
    if (i < 0 || i >= t.n) throw Error(Errc::IndexOutOfRange, "queue index out of range");
    const auto p = ht_parameters(t, f);
    auto law = fluid::fluid_queue_length_law(f, i);
    return HtLaw("queue_length:" + std::to_string(i + 1), p.biased_shape(), p.cycle_rate(), law,
                 [&f, i](Rng &rng) {
                     const int k = fluid::detail::draw_index(f.rho_hat, f.rho_hat.sum(), rng);
                     const auto iv = fluid::fluid_queue_length_interval(f, i, k);
                     return iv.lo + (iv.hi - iv.lo) * uniform01(rng);
                 },
                 opt);
}

inline std::string path_label(const fluid::Path &path) {
    std::string s;
    for (std::size_t m = 0; m < path.size(); ++m) {
        if (m) s += '>';
        s += std::to_string(path[m] + 1);
    }
    return s;
}

inline HtLaw ht_law_path(const DerivedTraffic &t, const fluid::FluidProfile &f, const fluid::Path &path,
                         const McOptions &opt = {}) {
    const auto p = ht_parameters(t, f);
    return HtLaw("path:" + path_label(path), p.biased_shape(), p.cycle_rate(), fluid::fluid_path_law(f, path),
                 [&f, &path](Rng &rng) { return fluid::sample_fluid_path_time(f, path, rng); }, opt);
}

inline Estimate tail_probability(const HtLaw &law, double x) { return law.tail(x); }

inline void write_csv_header(std::ostream &os) { os << "target,statistic,value,stderr,samples,seed\n"; }

inline void write_csv(std::ostream &os, const HtLaw &law, const std::vector<double> &tail_points = {}) {
    auto row = [&](const std::string &stat, double v, double se) {
        os << law.target() << ',' << stat << ',' << v << ',' << se << ',' << law.size() << ',' << law.seed() << '\n';
    };
    const auto m = law.mean();
    const auto s = law.stddev();
    row("mean", m.value, m.se);
    row("std", s.value, s.se);
    row("exact_mean", law.exact_mean(), 0.0);
    row("exact_std", law.exact_stddev(), 0.0);
    for (double x : tail_points) {
        const auto p = law.tail(x);
        std::ostringstream label;
        label << "P(>" << x << ')';
        row(label.str(), p.value, p.se);
    }
}

}  // namespace roving::ht
