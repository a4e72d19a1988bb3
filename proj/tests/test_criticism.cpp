#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "deepbf/criticism.hpp"
#include "deepbf/error.hpp"
#include "deepbf/models.hpp"

using namespace deepbf;

namespace {

std::vector<double> normals(std::size_t n, double mean, double sd, std::uint64_t seed) {
    RngStream r = new_stream(seed, 0);
    std::vector<double> v(n);
    for (double& x : v) x = r.normal(mean, sd);
    return v;
}

// Posterior predictive that replays the observed data.
ModelSpec replay_model() {
    ModelSpec m;
    m.id = "replay";
    m.prior_sampler = [](RngStream&) { return std::vector<double>{0.0}; };
    m.conditional_sampler = [](std::span<const double>, std::size_t n, RngStream&) { return Data(n, 0.0); };
    m.posterior_predictive = [](std::span<const double> y, std::size_t, RngStream&) { return Data(y.begin(), y.end()); };
    return m;
}

} // namespace

TEST(QuadLogit, IdenticalSetsGiveHalf) {
    const auto y = normals(50, 1, 2, 1);
    const QuadLogit d = fit_quadratic_logit(y, y);
    for (double v : y) EXPECT_NEAR(d(v), 0.5, 0.05);
}

TEST(QuadLogit, SeparatesConstants) {
    const std::vector<double> real(20, 10.0), fake(20, 0.0);
    const QuadLogit d = fit_quadratic_logit(real, fake);
    EXPECT_GT(d(10.0), 0.99);
    EXPECT_LT(d(0.0), 0.01);
}

TEST(QuadLogit, ObjectiveNeverBelowChance) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto real = normals(20, 0, 1, 100 + s), fake = normals(20, 0.5, 1.5, 200 + s);
        QuadFitInfo info;
        const QuadLogit d = fit_quadratic_logit(real, fake, &info);
        EXPECT_GE(info.objective, -std::log(4.0));
        EXPECT_NEAR(quad_logit_objective(d, real, fake), info.objective, 1e-9);
        EXPECT_GE(info.objective, quad_logit_objective(QuadLogit{}, real, fake));
    }
}

TEST(QuadLogit, ConvergesToStationaryPoint) {
    const auto real = normals(40, 0, 1, 3), fake = normals(60, 0, 3, 4);
    QuadFitInfo info;
    const QuadLogit d = fit_quadratic_logit(real, fake, &info);
    EXPECT_LT(info.gradient_norm, 1e-6);
    // Wider fakes push the quadratic coefficient negative.
    EXPECT_LT(d.c, 0.0);
    // No small move improves the objective.
    const double h = 1e-4;
    for (const QuadLogit& p : {QuadLogit{d.a + h, d.b, d.c}, QuadLogit{d.a, d.b + h, d.c}, QuadLogit{d.a, d.b, d.c + h},
                               QuadLogit{d.a - h, d.b, d.c}, QuadLogit{d.a, d.b - h, d.c}, QuadLogit{d.a, d.b, d.c - h}})
        EXPECT_LE(quad_logit_objective(p, real, fake), info.objective + 1e-10);
}

TEST(QuadLogit, LabelSwapMirrors) {
    const auto real = normals(30, 0, 1, 5), fake = normals(30, 0.8, 1.2, 6);
    const QuadLogit d = fit_quadratic_logit(real, fake), e = fit_quadratic_logit(fake, real);
    for (double y = -3; y <= 3; y += 0.25) EXPECT_NEAR(d(y), 1 - e(y), 1e-3) << y;
}

TEST(QuadLogit, Deterministic) {
    const auto real = normals(30, 0, 1, 7), fake = normals(30, 1, 1, 8);
    const QuadLogit d = fit_quadratic_logit(real, fake), e = fit_quadratic_logit(real, fake);
    EXPECT_EQ(d.a, e.a);
    EXPECT_EQ(d.b, e.b);
    EXPECT_EQ(d.c, e.c);
}

TEST(QuadLogit, RejectsBadInput) {
    const std::vector<double> ok{1, 2}, bad{1, std::nan("")};
    EXPECT_THROW(fit_quadratic_logit(ok, bad), InvalidParameter);
    EXPECT_THROW(fit_quadratic_logit(std::vector<double>{}, ok), InvalidParameter);
}

TEST(ZStatistic, Examples) {
    const std::vector<double> fake{-1, 0, 4};
    EXPECT_EQ(z_statistic(QuadLogit{}, fake), 0.5);
    EXPECT_EQ(z_statistic(QuadLogit{800, 0, 0}, fake), 1.0);
    // d values 0.2, 0.4 and 0.9.
    const std::vector<double> at{std::log(0.25), std::log(0.4 / 0.6), std::log(9.0)};
    EXPECT_NEAR(z_statistic(QuadLogit{0, 1, 0}, at), 0.5, 1e-15);
    EXPECT_THROW(z_statistic(QuadLogit{}, std::vector<double>{}), InvalidParameter);
}

TEST(NearestRankQuantile, Examples) {
    const std::vector<double> v{10, 9, 8, 7, 6, 5, 4, 3, 2, 1};
    EXPECT_EQ(nearest_rank_quantile(v, 0.25), 3.0);
    EXPECT_EQ(nearest_rank_quantile(v, 0.1), 1.0);
    EXPECT_EQ(nearest_rank_quantile(v, 0.01), 1.0);
    EXPECT_EQ(nearest_rank_quantile(v, 1.0), 10.0);
    EXPECT_THROW(nearest_rank_quantile(v, 0.0), InvalidParameter);
    EXPECT_THROW(nearest_rank_quantile(std::vector<double>{}, 0.5), InvalidParameter);
}

TEST(NearestRankQuantile, Monotone) {
    const auto v = normals(1000, 0, 1, 9);
    double prev = nearest_rank_quantile(v, 0.001);
    for (double p = 0.002; p <= 1.0; p += 0.001) {
        const double q = nearest_rank_quantile(v, p);
        EXPECT_GE(q, prev);
        prev = q;
    }
}

TEST(Criticize, ReplayedDataGivesHalf) {
    const auto y = normals(40, 0, 1, 10);
    RngStream r = new_stream(10, 16);
    const ZReport rep = criticize(replay_model(), y, 100, r);
    for (double z : rep.z) EXPECT_NEAR(z, 0.5, 0.05);
    EXPECT_TRUE(rep.contains_half);
}

TEST(Criticize, ConsonantDataContainsHalf) {
    const ModelPair p = make_builtin_pair("data3");
    RngStream sim = new_stream(11, 0);
    const Data y = simulate_dataset(p.m1, 50, sim);
    RngStream r = new_stream(11, 16);
    const ZReport rep = criticize(p.m1, y, 200, r);
    ASSERT_EQ(rep.z.size(), 200u);
    for (double z : rep.z) {
        EXPECT_GE(z, 0.0);
        EXPECT_LE(z, 1.0);
    }
    EXPECT_LE(rep.lo, rep.hi);
    EXPECT_TRUE(rep.contains_half) << rep.lo << " " << rep.hi;
}

TEST(Criticize, MisfitDataExcludesHalf) {
    // Exponential data with mean 10 against a fixed rate of 3.
    const ModelPair p = make_builtin_pair("data3");
    RngStream sim = new_stream(12, 0);
    Data y(50);
    for (double& v : y) v = sim.exponential(0.1);
    RngStream r = new_stream(12, 16);
    const ZReport rep = criticize(p.m2, y, 200, r);
    EXPECT_FALSE(rep.contains_half) << rep.lo << " " << rep.hi;
    EXPECT_LT(rep.hi, 0.5);
}

TEST(Criticize, Deterministic) {
    const ModelPair p = make_builtin_pair("data1");
    const Data y{0, 1, 3, 0, 2, 1, 0, 5};
    RngStream a = new_stream(13, 16), b = new_stream(13, 16);
    EXPECT_EQ(criticize(p.m1, y, 100, a).z, criticize(p.m1, y, 100, b).z);
}

TEST(Criticize, Errors) {
    const ModelPair p = make_builtin_pair("data2");
    RngStream r = new_stream(14, 16);
    const Data y{0.1, 0.2};
    const ModelSpec mixture = p.m1.posterior_predictive ? p.m2 : p.m1;
    ASSERT_FALSE(mixture.posterior_predictive);
    EXPECT_THROW(criticize(mixture, y, 100, r), Unsupported);
    EXPECT_THROW(criticize(make_builtin_pair("data3").m1, y, 99, r), InvalidParameter);
}
