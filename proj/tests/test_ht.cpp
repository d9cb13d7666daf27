#include <gtest/gtest.h>

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <sstream>

#include "roving/ht.hpp"
#include "roving/scenario.hpp"

using namespace roving;

namespace {

ValidatedSpec cyclic(Discipline d) {
    NetworkSpec s;
    const double lam[3] = {0.2, 0.1, 0.15};
    const double b[3] = {1.0, 2.0, 1.5};
    for (int i = 0; i < 3; ++i) {
        QueueSpec q;
        q.arrival = dist::Exponential{1.0 / lam[i]};
        q.service = i == 1 ? dist::Distribution{dist::Deterministic{b[i]}} : dist::Distribution{dist::Exponential{b[i]}};
        q.switchover = dist::Exponential{1.0 + i};
        q.discipline = d;
        s.queues.push_back(q);
    }
    return validate_spec(std::move(s));
}

/// P(G * F > x) for G ~ Gamma(shape, rate) and F the uniform mixture, by midpoint quadrature over F.
double tail_by_quadrature(double shape, double rate, const fluid::UniformMixture &m, double x, int nodes = 20000) {
    double p = 0.0;
    for (const auto &c : m.parts) {
        if (c.weight <= 0.0) continue;
        double s = 0.0;
        for (int k = 0; k < nodes; ++k) {
            const double f = c.lo + (c.hi - c.lo) * (k + 0.5) / nodes;
            if (f > 0.0) s += boost::math::gamma_q(shape, rate * x / f);
        }
        p += c.weight * s / nodes;
    }
    return p;
}

double lst_by_quadrature(double shape, double rate, const fluid::UniformMixture &m, double omega, int nodes = 20000) {
    double p = 0.0;
    for (const auto &c : m.parts) {
        double s = 0.0;
        for (int k = 0; k < nodes; ++k) {
            const double f = c.lo + (c.hi - c.lo) * (k + 0.5) / nodes;
            s += std::pow(rate / (rate + omega * f), shape);
        }
        p += c.weight * s / nodes;
    }
    return p;
}

}  // namespace

TEST(Variance, PoissonIsSecondMomentOfExtendedService) {
    const auto t = derive_traffic(example2().spec);
    EXPECT_NEAR(ht::variance_parameter(t), t.lambda_hat.dot(t.btilde2), 1e-12);
    EXPECT_NEAR(ht::variance_parameter(t), 6.0, 1e-12);
}

TEST(Variance, RenewalArrivalsAddScvTerm) {
    const auto t = derive_traffic(example3({{"server_scv", 0.0}}).spec);
    EXPECT_NEAR(ht::variance_parameter(t), 4.4, 1e-12);
}

TEST(MeanWait, ClassicalCyclicFormula) {
    for (auto d : {Discipline::Gated, Discipline::Exhaustive}) {
        const auto t = derive_traffic(cyclic(d));
        const auto f = fluid::build_profile(t);
        const double sign = d == Discipline::Gated ? 1.0 : -1.0;
        double sum_sq = 0.0, sigma2 = 0.0;
        for (int j = 0; j < 3; ++j) {
            sum_sq += t.rho_hat(j) * t.rho_hat(j);
            const double second = j == 1 ? t.b(j) * t.b(j) : 2.0 * t.b(j) * t.b(j);
            sigma2 += t.lambda_hat(j) * second;
        }
        for (int i = 0; i < 3; ++i) {
            const double expected = 0.5 * (1.0 + sign * t.rho_hat(i)) * (t.r + sigma2 / (1.0 + sign * sum_sq));
            EXPECT_NEAR(ht::ht_mean_wait(t, f, i), expected, 1e-10);
        }
    }
}

TEST(MeanWait, EqualsBiasedCycleTimesFluidMean) {
    const auto t = derive_traffic(example2().spec);
    const auto f = fluid::build_profile(t);
    const auto p = ht::ht_parameters(t, f);
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(ht::ht_mean_wait(t, f, i), p.mean_biased_cycle() * fluid::fluid_wait_law(f, i).mean(), 1e-10);
    }
    EXPECT_NEAR(p.mean_cycle(), t.r, 1e-12);
}

TEST(MeanWait, ZeroWorkQueueWarns) {
    const auto t = derive_traffic(example2().spec);
    auto f = fluid::build_profile(t);
    f.delta_i(1) = 0.0;
    Warnings w;
    EXPECT_EQ(ht::ht_mean_wait(t, f, 1, &w), 0.0);
    ASSERT_EQ(w.size(), 1u);
    EXPECT_EQ(w.front().code, Errc::DegenerateDelta);
}

TEST(Law, MonteCarloMatchesExactMoments) {
    const auto t = derive_traffic(example2().spec);
    const auto f = fluid::build_profile(t);
    const auto law = ht::ht_law_path(t, f, {0, 2}, {400000, 7, 2});
    EXPECT_NEAR(law.mean().value, law.exact_mean(), 4.0 * law.mean().se);
    EXPECT_NEAR(law.stddev().value, law.exact_stddev(), 4.0 * law.stddev().se);
    EXPECT_NEAR(law.exact_mean(), 5.199, 1e-3);
}

TEST(Law, TailMatchesQuadrature) {
    const auto t = derive_traffic(example2().spec);
    const auto f = fluid::build_profile(t);
    const auto law = ht::ht_law_path(t, f, {1, 2}, {400000, 8, 2});
    for (double x : {2.0, 7.0, 15.0, 20.0}) {
        const double exact = tail_by_quadrature(law.gamma_shape(), law.gamma_rate(), law.fluid_law(), x);
        const auto mc = law.tail(x);
        EXPECT_NEAR(mc.value, exact, 4.0 * mc.se + 1e-6) << "x=" << x;
        EXPECT_NEAR(law.cdf(x).value + mc.value, 1.0, 1e-12);
    }
}

TEST(Law, LstMatchesQuadrature) {
    const auto t = derive_traffic(example1().spec);
    const auto f = fluid::build_profile(t);
    const auto law = ht::ht_law_queue_length(t, f, 0, {400000, 9, 2});
    for (double w : {0.5, 2.0}) {
        const auto mc = law.lst(w);
        EXPECT_NEAR(mc.value, lst_by_quadrature(law.gamma_shape(), law.gamma_rate(), law.fluid_law(), w), 4.0 * mc.se);
    }
}

TEST(Law, WaitLawMatchesClosedMean) {
    const auto t = derive_traffic(example3({{"server_scv", 0.0}}).spec);
    const auto f = fluid::build_profile(t);
    const auto law = ht::ht_law_wait(t, f, 10, {200000, 10, 2});
    EXPECT_NEAR(law.exact_mean(), ht::ht_mean_wait(t, f, 10), 1e-10);
    EXPECT_NEAR(law.mean().value, law.exact_mean(), 4.0 * law.mean().se);
}

TEST(Law, ReproducibleAcrossWorkerCounts) {
    const auto t = derive_traffic(example2().spec);
    const auto f = fluid::build_profile(t);
    const auto a = ht::ht_law_path(t, f, {0, 2}, {50000, 3, 1});
    const auto b = ht::ht_law_path(t, f, {0, 2}, {50000, 3, 4});
    EXPECT_EQ(a.sorted_samples(), b.sorted_samples());
}

TEST(Law, HistogramIsADensity) {
    const auto t = derive_traffic(example2().spec);
    const auto f = fluid::build_profile(t);
    const auto law = ht::ht_law_path(t, f, {0, 2}, {100000, 4, 2});
    const auto h = law.histogram(50);
    ASSERT_EQ(h.size(), 50u);
    double mass = 0.0;
    for (const auto &bin : h) mass += bin.density * (bin.hi - bin.lo);
    EXPECT_NEAR(mass, 1.0, 1e-9);
    EXPECT_NEAR(h.back().hi, law.quantile(0.999), 1e-12);
}

TEST(Law, CsvRows) {
    const auto t = derive_traffic(example2().spec);
    const auto f = fluid::build_profile(t);
    const auto law = ht::ht_law_path(t, f, {0, 2}, {1000, 4, 1});
    std::ostringstream os;
    ht::write_csv_header(os);
    ht::write_csv(os, law, {20.0});
    EXPECT_NE(os.str().find("path:1>3,P(>20),"), std::string::npos);
    EXPECT_NE(os.str().find("path:1>3,exact_mean,"), std::string::npos);
}

TEST(Parameters, DegenerateInputsThrow) {
    auto t = derive_traffic(example2().spec);
    const auto f = fluid::build_profile(t);
    t.btilde2 = t.btilde.cwiseProduct(t.btilde);
    t.arrival_scv.setZero();
    try {
        ht::ht_parameters(t, f);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), Errc::DegenerateSigma);
        EXPECT_TRUE(e.numerical());
    }
}
