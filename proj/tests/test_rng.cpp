#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "deepbf/error.hpp"
#include "deepbf/rng.hpp"

using namespace deepbf;

namespace {

struct Moments {
    double mean = 0, var = 0, m4 = 0;
    std::size_t n = 0;
};

Moments moments(const std::vector<double>& x) {
    Moments m;
    m.n = x.size();
    for (double v : x) m.mean += v;
    m.mean /= static_cast<double>(m.n);
    for (double v : x) {
        const double d = v - m.mean;
        m.var += d * d;
        m.m4 += d * d * d * d;
    }
    m.var /= static_cast<double>(m.n - 1);
    m.m4 /= static_cast<double>(m.n);
    return m;
}

struct MomentCase {
    std::string name;
    DistSpec spec;
    double mean;
    double var;
};

class DistributionMoments : public ::testing::TestWithParam<MomentCase> {};

} // namespace

TEST(RngStream, SameSeedAndStreamRepeat) {
    RngStream a = new_stream(7, 0), b = new_stream(7, 0);
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.uniform01(), b.uniform01());
}

TEST(RngStream, StreamIdsSeparate) {
    RngStream a = new_stream(7, 0), b = new_stream(7, 1);
    bool differ = false;
    for (int i = 0; i < 16; ++i) differ |= a.next_u64() != b.next_u64();
    EXPECT_TRUE(differ);
}

TEST(RngStream, SeedsSeparate) {
    RngStream a = new_stream(7, 0), b = new_stream(8, 0);
    bool differ = false;
    for (int i = 0; i < 16; ++i) differ |= a.next_u64() != b.next_u64();
    EXPECT_TRUE(differ);
}

TEST(RngStream, SubstreamDependsOnlyOnIdentity) {
    RngStream a = new_stream(3, 9);
    RngStream b = new_stream(3, 9);
    for (int i = 0; i < 50; ++i) a.next_u64(); // advancing the parent must not matter
    RngStream sa = a.substream(4), sb = b.substream(4), sc = b.substream(5);
    bool differ = false;
    for (int i = 0; i < 16; ++i) {
        const auto x = sa.next_u64();
        ASSERT_EQ(x, sb.next_u64());
        differ |= x != sc.next_u64();
    }
    EXPECT_TRUE(differ);
}

TEST(RngStream, UniformRanges) {
    RngStream r = new_stream(1, 0);
    for (int i = 0; i < 100000; ++i) {
        const double u = r.uniform01();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        const double v = r.uniform_open();
        ASSERT_GT(v, 0.0);
        ASSERT_LT(v, 1.0);
    }
}

TEST(Sample, DegenerateCases) {
    RngStream r = new_stream(2, 0);
    for (int i = 0; i < 100; ++i) {
        EXPECT_EQ(sample(dist::Binomial{10, 0.0}, r), 0.0);
        EXPECT_EQ(sample(dist::Binomial{10, 1.0}, r), 10.0);
        EXPECT_EQ(sample(dist::Categorical{{1.0}}, r), 0.0);
        EXPECT_EQ(sample(dist::NegBinomial{1.0, 1.0}, r), 0.0);
        EXPECT_EQ(sample(dist::Categorical{{0.0, 2.0, 0.0}}, r), 1.0);
    }
}

TEST(Sample, GammaMeanExample) {
    RngStream r = new_stream(11, 0);
    double sum = 0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) sum += sample(dist::Gamma{2.0, 2.0}, r);
    EXPECT_NEAR(sum / n, 1.0, 0.01);
}

TEST(Sample, RejectsInvalidParameters) {
    RngStream r = new_stream(0, 0);
    EXPECT_THROW(sample(dist::Normal{0, 0}, r), InvalidParameter);
    EXPECT_THROW(sample(dist::Normal{0, -1}, r), InvalidParameter);
    EXPECT_THROW(sample(dist::Gamma{0, 1}, r), InvalidParameter);
    EXPECT_THROW(sample(dist::Gamma{1, -1}, r), InvalidParameter);
    EXPECT_THROW(sample(dist::Beta{1, 0}, r), InvalidParameter);
    EXPECT_THROW(sample(dist::Exponential{0}, r), InvalidParameter);
    EXPECT_THROW(sample(dist::Poisson{-1}, r), InvalidParameter);
    EXPECT_THROW(sample(dist::NegBinomial{0, 0.5}, r), InvalidParameter);
    EXPECT_THROW(sample(dist::NegBinomial{1, 1.5}, r), InvalidParameter);
    EXPECT_THROW(sample(dist::Binomial{3, -0.1}, r), InvalidParameter);
    EXPECT_THROW(sample(dist::Categorical{{}}, r), InvalidParameter);
    EXPECT_THROW(sample(dist::Categorical{{0.0, 0.0}}, r), InvalidParameter);
    EXPECT_THROW(sample(dist::Categorical{{1.0, -1.0}}, r), InvalidParameter);
    EXPECT_THROW(sample(dist::Normal{0, std::nan("")}, r), InvalidParameter);
}

TEST_P(DistributionMoments, WithinFourStandardErrors) {
    const MomentCase& c = GetParam();
    RngStream r = new_stream(20240601, 3);
    std::vector<double> x(1000000);
    for (double& v : x) v = sample(c.spec, r);
    const Moments m = moments(x);
    const double n = static_cast<double>(m.n);
    const double se_mean = std::sqrt(c.var / n);
    const double se_var = std::sqrt(std::max(m.m4 - m.var * m.var, 0.0) / n);
    EXPECT_NEAR(m.mean, c.mean, 4 * se_mean) << c.name;
    EXPECT_NEAR(m.var, c.var, 4 * se_var) << c.name;
}

INSTANTIATE_TEST_SUITE_P(
    AllFamilies, DistributionMoments,
    ::testing::Values(MomentCase{"uniform", dist::Uniform01{}, 0.5, 1.0 / 12},
                      MomentCase{"normal", dist::Normal{1.5, 2.0}, 1.5, 4.0},
                      MomentCase{"gamma_2_2", dist::Gamma{2.0, 2.0}, 1.0, 0.5},
                      MomentCase{"gamma_small_shape", dist::Gamma{0.3, 1.5}, 0.2, 0.3 / 2.25},
                      MomentCase{"beta", dist::Beta{2.0, 5.0}, 2.0 / 7, 10.0 / (49 * 8)},
                      MomentCase{"beta_small", dist::Beta{0.5, 0.5}, 0.5, 0.125},
                      MomentCase{"exponential", dist::Exponential{3.0}, 1.0 / 3, 1.0 / 9},
                      MomentCase{"poisson_small", dist::Poisson{2.5}, 2.5, 2.5},
                      MomentCase{"poisson_large", dist::Poisson{75.0}, 75.0, 75.0},
                      MomentCase{"negbin_geometric", dist::NegBinomial{1.0, 0.3}, 0.7 / 0.3, 0.7 / 0.09},
                      MomentCase{"negbin_general", dist::NegBinomial{2.5, 0.4}, 2.5 * 0.6 / 0.4, 2.5 * 0.6 / 0.16},
                      MomentCase{"binomial_small", dist::Binomial{36, 0.3}, 10.8, 7.56},
                      MomentCase{"binomial_large", dist::Binomial{1512, 0.62}, 937.44, 1512 * 0.62 * 0.38},
                      MomentCase{"categorical", dist::Categorical{{1.0, 2.0, 1.0}}, 1.0, 0.5}),
    [](const ::testing::TestParamInfo<MomentCase>& info) { return info.param.name; });

TEST(Sample, GeometricPmfAtZero) {
    RngStream r = new_stream(5, 1);
    const double p = 0.37;
    const int n = 100000;
    int zeros = 0;
    for (int i = 0; i < n; ++i) zeros += r.neg_binomial(1.0, p) == 0;
    const double se = std::sqrt(p * (1 - p) / n);
    EXPECT_NEAR(static_cast<double>(zeros) / n, p, 3 * se);
}

TEST(Sample, UniformKolmogorovSmirnov) {
    RngStream r = new_stream(42, 0);
    std::vector<double> u(10000);
    for (double& v : u) v = r.uniform01();
    std::sort(u.begin(), u.end());
    double d = 0;
    const double n = static_cast<double>(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        d = std::max(d, (static_cast<double>(i) + 1) / n - u[i]);
        d = std::max(d, u[i] - static_cast<double>(i) / n);
    }
    EXPECT_LT(d, 0.02);
}

TEST(Sample, SupportOfIntegerFamilies) {
    RngStream r = new_stream(9, 9);
    for (int i = 0; i < 10000; ++i) {
        const double k = sample(dist::Binomial{7, 0.6}, r);
        ASSERT_EQ(k, std::floor(k));
        ASSERT_GE(k, 0);
        ASSERT_LE(k, 7);
        const double y = sample(dist::Poisson{40.0}, r);
        ASSERT_EQ(y, std::floor(y));
        ASSERT_GE(y, 0);
    }
}
