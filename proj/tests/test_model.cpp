#include <gtest/gtest.h>

#include <cmath>

#include "roving/model.hpp"
#include "roving/scenario.hpp"

using namespace roving;

namespace {

QueueSpec queue(std::optional<double> lambda, double b, double r, Discipline d = Discipline::Gated) {
    QueueSpec q;
    if (lambda) q.arrival = dist::Exponential{1.0 / *lambda};
    q.service = b > 0.0 ? dist::Distribution{dist::Exponential{b}} : dist::Distribution{dist::Deterministic{0.0}};
    q.switchover = dist::Deterministic{r};
    q.discipline = d;
    return q;
}

NetworkSpec tandem(double l1, double l2) {
    NetworkSpec s;
    s.queues = {queue(l1, 1.0, 1.0), queue(l2, 2.0, 1.0), queue(std::nullopt, 0.5, 1.0)};
    s.routing = Mat::Zero(3, 3);
    s.routing(0, 2) = 1.0;
    s.routing(1, 2) = 1.0;
    return s;
}

/// Random network whose routing matrix has spectral radius <= 0.9 (row sums <= 0.9).
NetworkSpec random_network(Rng &rng, int n) {
    NetworkSpec s;
    s.routing = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        s.queues.push_back(queue(0.05 + uniform01(rng), 0.1 + uniform01(rng), 0.5 + uniform01(rng)));
        double row = 0.0;
        Vec w(n);
        for (int j = 0; j < n; ++j) {
            w(j) = uniform01(rng);
            row += w(j);
        }
        s.routing.row(i) = (0.9 * uniform01(rng) / row) * w.transpose();
    }
    return s;
}

}  // namespace

TEST(Validate, TandemIsValid) { EXPECT_NO_THROW(validate_spec(tandem(0.1, 0.2))); }

TEST(Validate, Errors) {
    auto s = tandem(0.1, 0.2);
    s.routing(0, 0) = 1.0;
    s.routing(0, 2) = 0.0;
    try {
        validate_spec(s);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), Errc::AbsorbingRouting);
    }
    s = tandem(0.1, 0.2);
    s.routing(0, 1) = 0.2;
    try {
        validate_spec(s);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), Errc::RowSumExceedsOne);
    }
    s = tandem(0.1, 0.2);
    s.queues[0].arrival.reset();
    s.queues[1].arrival.reset();
    try {
        validate_spec(s);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), Errc::NoExternalArrivals);
    }
    s = tandem(0.1, 0.2);
    s.queues[1].service = dist::Deterministic{-1.0};
    try {
        validate_spec(s);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), Errc::NegativeParameter);
    }
    s = tandem(0.1, 0.2);
    for (auto &q : s.queues) q.switchover = dist::Deterministic{0.0};
    EXPECT_THROW(validate_spec(s), Error);
}

TEST(ArrivalRates, Tandem) {
    const auto g = solve_total_arrival_rates(validate_spec(tandem(0.1, 0.2)));
    EXPECT_NEAR(g(0), 0.1, 1e-15);
    EXPECT_NEAR(g(1), 0.2, 1e-15);
    EXPECT_NEAR(g(2), 0.3, 1e-15);
}

TEST(ArrivalRates, NoRoutingGivesLambda) {
    auto s = tandem(0.1, 0.2);
    s.routing.setZero();
    s.queues[2].arrival = dist::Exponential{2.0};
    const auto g = solve_total_arrival_rates(validate_spec(s));
    EXPECT_NEAR(g(2), 0.5, 1e-15);
    EXPECT_NEAR(g(0), 0.1, 1e-15);
}

TEST(ArrivalRates, Example4MatchesNeumannSeries) {
    const auto vs = validate_spec(example4_network(0.01));
    const auto m = queue_moments(vs);
    const Vec g = solve_total_arrival_rates(vs);
    Vec term = m.lambda;
    Vec series = term;
    for (int k = 1; k <= 50; ++k) {
        term = vs.routing().transpose() * term;
        series += term;
    }
    EXPECT_LT((g - series).lpNorm<Eigen::Infinity>(), 1e-9);
    const double p = 0.01;
    EXPECT_NEAR(g(0), m.lambda(0) + p * (g(0) + g(2) + g(4)), 1e-12);
}

TEST(ArrivalRates, RandomSpecsMatchNeumannSeries) {
    Rng rng = make_stream(5, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const auto vs = validate_spec(random_network(rng, 5));
        const auto m = queue_moments(vs);
        const Vec g = solve_total_arrival_rates(vs);
        Vec term = m.lambda;
        Vec series = term;
        for (int k = 1; k <= 400; ++k) {
            term = vs.routing().transpose() * term;
            series += term;
        }
        EXPECT_LT((g - series).lpNorm<Eigen::Infinity>(), 1e-9);
    }
}

TEST(ExtendedService, TandemAndNoRouting) {
    const auto e = solve_extended_service_moments(validate_spec(tandem(0.1, 0.2)));
    EXPECT_NEAR(e.btilde(2), 0.5, 1e-15);
    EXPECT_NEAR(e.btilde(0), 1.5, 1e-15);
    EXPECT_NEAR(e.btilde(1), 2.5, 1e-15);
    // Exp(1) then Exp(0.5): E[(B1+B3)^2] = 2 + 2*0.5 + 0.5
    EXPECT_NEAR(e.btilde2(0), 2.0 + 2.0 * 1.0 * 0.5 + 0.5, 1e-14);

    auto s = tandem(0.1, 0.2);
    s.routing.setZero();
    const auto f = solve_extended_service_moments(validate_spec(s));
    EXPECT_NEAR(f.btilde(1), 2.0, 1e-15);
    EXPECT_NEAR(f.btilde2(1), 8.0, 1e-14);
}

TEST(ExtendedService, GeometricFeedback) {
    auto s = tandem(0.1, 0.2);
    s.routing.setZero();
    const double q = 0.3;
    s.routing(0, 0) = q;
    const auto e = solve_extended_service_moments(validate_spec(s));
    EXPECT_NEAR(e.btilde(0), 1.0 / (1.0 - q), 1e-14);
    // N ~ Geometric number of Exp(1) services: E[S^2] = E[N](2) + E[N(N-1)] with E[N]=1/(1-q)
    const double en = 1.0 / (1.0 - q);
    const double enn1 = 2.0 * q / ((1.0 - q) * (1.0 - q));
    EXPECT_NEAR(e.btilde2(0), 2.0 * en + enn1, 1e-13);
}

TEST(Derive, NormalizationAndScaling) {
    Rng rng = make_stream(6, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto vs = validate_spec(random_network(rng, 5));
        const auto t1 = derive_traffic(vs, 1.0);
        EXPECT_NEAR(t1.lambda_hat.dot(t1.btilde), 1.0, 1e-10);
        EXPECT_NEAR(t1.rho_hat.sum(), 1.0, 1e-10);
        EXPECT_NEAR(t1.rho, 1.0, 1e-10);
        for (int i = 0; i < t1.n; ++i) {
            EXPECT_GE(t1.gamma(i), t1.lambda(i) - 1e-15);
            EXPECT_GE(t1.btilde(i), t1.b(i) - 1e-15);
        }
        const auto th = derive_traffic(vs, 0.5);
        EXPECT_NEAR(th.rho, 0.5, 1e-10);
        EXPECT_LT((th.lambda - 0.5 * t1.lambda).lpNorm<Eigen::Infinity>(), 1e-14);
        EXPECT_LT((th.gamma - 0.5 * t1.gamma).lpNorm<Eigen::Infinity>(), 1e-14);
        EXPECT_LT((th.btilde - t1.btilde).lpNorm<Eigen::Infinity>(), 1e-15);
    }
}

TEST(Derive, Example2Normalization) {
    const auto t = derive_traffic(example2().spec, 1.0);
    EXPECT_NEAR(t.lambda(1), 1.0 / 6.6, 1e-12);
    EXPECT_NEAR(t.lambda(0), 0.1 / 6.6, 1e-12);
    EXPECT_NEAR(t.r, 4.0, 1e-15);
    EXPECT_NEAR(t.r2, 16.0, 1e-12);
}

TEST(Derive, RejectsOverload) {
    const auto vs = validate_spec(tandem(0.1, 0.2));
    try {
        derive_traffic(vs, 1.2);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), Errc::UnstableLoad);
    }
}
