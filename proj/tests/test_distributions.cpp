#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "roving/distributions.hpp"

using namespace roving;
using namespace roving::dist;

namespace {

struct Empirical {
    double mean = 0.0;
    double var = 0.0;
    double m4c = 0.0;
    std::size_t n = 0;
};

Empirical draw(const Distribution &d, std::size_t n, std::uint64_t seed) {
    Rng rng = make_stream(seed, 0);
    std::vector<double> xs(n);
    double s = 0.0;
    for (auto &x : xs) {
        x = sample(d, rng);
        s += x;
    }
    Empirical e;
    e.n = n;
    e.mean = s / static_cast<double>(n);
    double v = 0.0, v4 = 0.0;
    for (double x : xs) {
        const double c = (x - e.mean) * (x - e.mean);
        v += c;
        v4 += c * c;
    }
    e.var = v / static_cast<double>(n - 1);
    e.m4c = v4 / static_cast<double>(n);
    return e;
}

void expect_moments_match(const Distribution &d, std::uint64_t seed) {
    const auto m = moments(d);
    const auto e = draw(d, 1'000'000, seed);
    const double se_mean = std::sqrt(m.variance / static_cast<double>(e.n));
    EXPECT_NEAR(e.mean, m.mean, 4.0 * se_mean + 1e-12) << describe(d);
    const double se_var = std::sqrt(std::max(0.0, e.m4c - e.var * e.var) / static_cast<double>(e.n));
    EXPECT_NEAR(e.var, m.variance, 4.0 * se_var + 1e-12) << describe(d);
}

}  // namespace

TEST(Moments, ClosedForms) {
    const auto det = moments(Deterministic{5.0});
    EXPECT_DOUBLE_EQ(det.mean, 5.0);
    EXPECT_DOUBLE_EQ(det.variance, 0.0);
    EXPECT_DOUBLE_EQ(det.second_moment, 25.0);
    EXPECT_DOUBLE_EQ(det.scv, 0.0);

    const auto ex = moments(Exponential{1.0});
    EXPECT_DOUBLE_EQ(ex.mean, 1.0);
    EXPECT_DOUBLE_EQ(ex.variance, 1.0);
    EXPECT_DOUBLE_EQ(ex.second_moment, 2.0);
    EXPECT_DOUBLE_EQ(ex.scv, 1.0);

    const auto er = moments(Erlang{4, 2.0});
    EXPECT_DOUBLE_EQ(er.scv, 0.25);

    const auto h2 = moments(HyperExpBalanced{1.0, 4.0});
    EXPECT_DOUBLE_EQ(h2.mean, 1.0);
    EXPECT_DOUBLE_EQ(h2.scv, 4.0);

    const auto u = moments(Uniform{1.0, 3.0});
    EXPECT_DOUBLE_EQ(u.mean, 2.0);
    EXPECT_NEAR(u.variance, 1.0 / 3.0, 1e-15);
}

TEST(Moments, BalancedHyperexponentialFromPhases) {
    // recompute from the two phases: p_j / mu_j = mean / 2
    const double mean = 1.0, scv = 4.0;
    const double p1 = 0.5 * (1.0 + std::sqrt(3.0 / 5.0));
    const double p2 = 1.0 - p1;
    const double mu1 = 2.0 * p1 / mean, mu2 = 2.0 * p2 / mean;
    const double m1 = p1 / mu1 + p2 / mu2;
    const double m2 = 2.0 * p1 / (mu1 * mu1) + 2.0 * p2 / (mu2 * mu2);
    EXPECT_NEAR(m1, mean, 1e-12);
    EXPECT_NEAR((m2 - m1 * m1) / (m1 * m1), scv, 1e-12);
}

TEST(Fit, SpecialCases) {
    EXPECT_TRUE(std::holds_alternative<Deterministic>(fit_by_mean_scv(1.0, 0.0)));
    EXPECT_TRUE(std::holds_alternative<Exponential>(fit_by_mean_scv(1.0, 1.0)));
    const auto h = fit_by_mean_scv(1.0, 4.0);
    ASSERT_TRUE(std::holds_alternative<HyperExpBalanced>(h));
    const auto m = moments(h);
    EXPECT_NEAR(m.mean, 1.0, 1e-12);
    EXPECT_NEAR(m.scv, 4.0, 1e-12);
    EXPECT_THROW(fit_by_mean_scv(-1.0, 1.0), Error);
    EXPECT_THROW(fit_by_mean_scv(1.0, -0.5), Error);
}

TEST(Fit, MixedErlangMatchesTwoMoments) {
    for (double scv : {0.05, 0.1, 0.2, 0.25, 0.3, 0.5, 0.7, 0.9, 0.99}) {
        for (double mean : {0.1, 1.0, 7.5}) {
            const auto d = fit_by_mean_scv(mean, scv);
            ASSERT_TRUE(std::holds_alternative<MixedErlang>(d));
            EXPECT_EQ(std::get<MixedErlang>(d).k, static_cast<int>(std::ceil(1.0 / scv - 1e-12)) < 2
                                                      ? 2
                                                      : static_cast<int>(std::ceil(1.0 / scv - 1e-12)));
            const auto m = moments(d);
            EXPECT_NEAR(m.mean, mean, 1e-12 * mean);
            EXPECT_NEAR(m.scv, scv, 1e-12);
        }
    }
}

TEST(Fit, FixedPointOnMeanAndScv) {
    const std::vector<Distribution> ds = {Deterministic{2.0}, Exponential{3.0}, Erlang{3, 1.5}, HyperExpBalanced{2.0, 6.0},
                                          Gamma{2.5, 4.0}, Uniform{0.5, 2.5}, MixedErlang{3, 0.3, 2.0}};
    for (const auto &d : ds) {
        const auto m = moments(d);
        const auto back = moments(fit_by_mean_scv(m.mean, m.scv));
        EXPECT_NEAR(back.mean, m.mean, 1e-12 * std::max(1.0, m.mean));
        EXPECT_NEAR(back.scv, m.scv, 1e-12);
    }
}

TEST(Sample, DeterministicIsConstant) {
    Rng rng = make_stream(1, 0);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(sample(Deterministic{5.0}, rng), 5.0);
}

TEST(Sample, ExponentialMeanBand) {
    const auto e = draw(Exponential{1.0}, 1'000'000, 11);
    EXPECT_NEAR(e.mean, 1.0, 3e-3);
}

TEST(Sample, GammaVarianceBand) {
    expect_moments_match(Gamma{2.0, 3.0}, 12);
    const auto e = draw(Gamma{2.0, 3.0}, 1'000'000, 13);
    EXPECT_NEAR(e.var, 2.0 / 9.0, 4.0 * std::sqrt((e.m4c - e.var * e.var) / 1e6));
}

TEST(Sample, EveryVariantMatchesMoments) {
    std::uint64_t seed = 100;
    for (const Distribution &d : std::vector<Distribution>{
             Exponential{2.0}, Erlang{4, 1.0}, HyperExpBalanced{1.0, 4.0}, MixedErlang{3, 0.4, 2.0}, Gamma{0.3, 1.0},
             Gamma{7.0, 0.5}, Uniform{1.0, 4.0}, fit_by_mean_scv(2.0, 0.35)}) {
        expect_moments_match(d, seed++);
    }
}

TEST(Sample, ReproducibleStreams) {
    Rng a = make_stream(42, 3);
    Rng b = make_stream(42, 3);
    Rng c = make_stream(42, 4);
    bool differs = false;
    for (int i = 0; i < 1000; ++i) {
        const double x = sample(Gamma{1.5, 1.0}, a);
        EXPECT_EQ(x, sample(Gamma{1.5, 1.0}, b));
        differs |= x != sample(Gamma{1.5, 1.0}, c);
    }
    EXPECT_TRUE(differs);
}

TEST(Scaled, MultipliesTime) {
    for (const Distribution &d : std::vector<Distribution>{Deterministic{2.0}, Exponential{2.0}, Erlang{3, 1.0},
                                                          HyperExpBalanced{1.0, 3.0}, MixedErlang{3, 0.2, 1.0},
                                                          Gamma{2.0, 2.0}, Uniform{1.0, 2.0}}) {
        const auto a = moments(d);
        const auto b = moments(scaled(d, 2.5));
        EXPECT_NEAR(b.mean, 2.5 * a.mean, 1e-12);
        EXPECT_NEAR(b.scv, a.scv, 1e-12);
    }
}

TEST(Validate, RejectsBadParameters) {
    EXPECT_THROW(validate(Deterministic{-1.0}), Error);
    EXPECT_THROW(validate(HyperExpBalanced{1.0, 0.5}), Error);
    EXPECT_THROW(validate(Gamma{0.0, 1.0}), Error);
    EXPECT_THROW(validate(Uniform{2.0, 1.0}), Error);
    EXPECT_NO_THROW(validate(Deterministic{0.0}));
}

TEST(Json, RoundTripAndFit) {
    for (const Distribution &d : std::vector<Distribution>{Deterministic{2.0}, Exponential{2.0}, Erlang{3, 1.0},
                                                          HyperExpBalanced{1.0, 3.0}, MixedErlang{3, 0.2, 1.0},
                                                          Gamma{2.0, 2.0}, Uniform{1.0, 2.0}}) {
        EXPECT_EQ(to_json(from_json(to_json(d))), to_json(d));
    }
    const auto j = nlohmann::json::parse(R"({"type":"fit","mean":1.0,"scv":4.0})");
    EXPECT_TRUE(std::holds_alternative<HyperExpBalanced>(from_json(j)));
    const auto e = nlohmann::json::parse(R"({"type":"erlang","k":2,"mean":1.0})");
    EXPECT_NEAR(moments(from_json(e)).scv, 0.5, 1e-15);
    EXPECT_THROW(from_json(nlohmann::json::parse(R"({"type":"weibull"})")), Error);
    EXPECT_THROW(from_json(nlohmann::json::parse(R"({"type":"exponential"})")), Error);
}
