#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

#include "deepbf/kernels.hpp"
#include "deepbf/rng.hpp"

using namespace deepbf;
using kernels::KernelTable;

namespace {

std::vector<double> random_vector(std::size_t n, RngStream& r) {
    std::vector<double> v(n);
    for (double& x : v) x = r.normal(0.0, 1.0);
    return v;
}

void expect_close(const std::vector<double>& a, const std::vector<double>& b, const std::string& what) {
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        ASSERT_NEAR(a[i], b[i], 1e-12 * (1.0 + std::abs(b[i]))) << what << " at " << i;
}

class KernelEquivalence : public ::testing::TestWithParam<const KernelTable*> {};

// Shapes chosen to hit every vector block and every tail path.
const std::size_t kShapes[][3] = {{1, 1, 1},  {2, 2, 64},  {3, 5, 7},    {7, 64, 64},
                                  {400, 64, 1}, {9, 17, 33}, {200, 1, 64}, {5, 128, 64}};

} // namespace

TEST(KernelDispatch, ScalarAlwaysAvailable) {
    const auto all = kernels::available();
    ASSERT_FALSE(all.empty());
    EXPECT_EQ(std::string(all.front()->name), "scalar");
    EXPECT_EQ(kernels::find("scalar"), &kernels::scalar_kernels());
    EXPECT_EQ(kernels::find("nonexistent"), nullptr);
    bool listed = false;
    for (const KernelTable* k : all) listed |= k == &kernels::active();
    EXPECT_TRUE(listed);
}

TEST_P(KernelEquivalence, DenseForward) {
    const KernelTable& ref = kernels::scalar_kernels();
    const KernelTable& k = *GetParam();
    RngStream r = new_stream(1, 0);
    for (const auto& s : kShapes) {
        const std::size_t rows = s[0], in = s[1], out = s[2];
        const auto x = random_vector(rows * in, r), w = random_vector(in * out, r), b = random_vector(out, r);
        std::vector<double> y0(rows * out), y1(rows * out);
        ref.dense_forward(x.data(), rows, in, w.data(), b.data(), out, y0.data());
        k.dense_forward(x.data(), rows, in, w.data(), b.data(), out, y1.data());
        expect_close(y1, y0, "forward");
    }
}

TEST_P(KernelEquivalence, DenseBackward) {
    const KernelTable& ref = kernels::scalar_kernels();
    const KernelTable& k = *GetParam();
    RngStream r = new_stream(2, 0);
    for (const auto& s : kShapes) {
        const std::size_t rows = s[0], in = s[1], out = s[2];
        const auto x = random_vector(rows * in, r), dy = random_vector(rows * out, r), w = random_vector(in * out, r);
        std::vector<double> dx0(rows * in), dw0(in * out, 7.0), db0(out, 7.0);
        std::vector<double> dx1(rows * in), dw1(in * out, -3.0), db1(out, -3.0);
        ref.dense_backward(x.data(), dy.data(), rows, in, out, w.data(), dx0.data(), dw0.data(), db0.data());
        k.dense_backward(x.data(), dy.data(), rows, in, out, w.data(), dx1.data(), dw1.data(), db1.data());
        expect_close(dx1, dx0, "dx");
        expect_close(dw1, dw0, "dw");
        expect_close(db1, db0, "db");
        std::vector<double> dw2(in * out), db2(out);
        k.dense_backward(x.data(), dy.data(), rows, in, out, w.data(), nullptr, dw2.data(), db2.data());
        expect_close(dw2, dw0, "dw without dx");
    }
}

TEST_P(KernelEquivalence, DenseBackwardMatchesDefinition) {
    const KernelTable& k = *GetParam();
    RngStream r = new_stream(3, 0);
    const std::size_t rows = 6, in = 5, out = 9;
    const auto x = random_vector(rows * in, r), dy = random_vector(rows * out, r), w = random_vector(in * out, r);
    std::vector<double> dx(rows * in), dw(in * out), db(out);
    k.dense_backward(x.data(), dy.data(), rows, in, out, w.data(), dx.data(), dw.data(), db.data());
    for (std::size_t i = 0; i < in; ++i)
        for (std::size_t o = 0; o < out; ++o) {
            double e = 0;
            for (std::size_t q = 0; q < rows; ++q) e += x[q * in + i] * dy[q * out + o];
            EXPECT_NEAR(dw[i * out + o], e, 1e-12);
        }
    for (std::size_t q = 0; q < rows; ++q)
        for (std::size_t i = 0; i < in; ++i) {
            double e = 0;
            for (std::size_t o = 0; o < out; ++o) e += dy[q * out + o] * w[i * out + o];
            EXPECT_NEAR(dx[q * in + i], e, 1e-12);
        }
}

TEST_P(KernelEquivalence, AdamIsBitwiseEqual) {
    const KernelTable& ref = kernels::scalar_kernels();
    const KernelTable& k = *GetParam();
    RngStream r = new_stream(4, 0);
    for (std::size_t n : {1, 3, 4, 9, 4161}) {
        auto p0 = random_vector(n, r), m0 = random_vector(n, r), v0 = random_vector(n, r);
        for (double& v : v0) v = v * v;
        const auto g = random_vector(n, r);
        auto p1 = p0, m1 = m0, v1 = v0;
        const kernels::AdamCoefficients c{0.0099, 0.9, 0.999, 1 - std::pow(0.9, 5), 1 - std::pow(0.999, 5), 1e-8};
        ref.adam_update(n, p0.data(), g.data(), m0.data(), v0.data(), c);
        k.adam_update(n, p1.data(), g.data(), m1.data(), v1.data(), c);
        EXPECT_EQ(p0, p1);
        EXPECT_EQ(m0, m1);
        EXPECT_EQ(v0, v1);
    }
}

TEST_P(KernelEquivalence, SquaredDistances) {
    const KernelTable& ref = kernels::scalar_kernels();
    const KernelTable& k = *GetParam();
    RngStream r = new_stream(5, 0);
    for (std::size_t dim : {1, 2, 3, 4, 5, 8, 13, 252}) {
        const std::size_t count = 37;
        const auto q = random_vector(dim, r), refs = random_vector(count * dim, r);
        std::vector<double> d0(count), d1(count);
        ref.sq_distances(q.data(), refs.data(), count, dim, d0.data());
        k.sq_distances(q.data(), refs.data(), count, dim, d1.data());
        expect_close(d1, d0, "distance");
        for (std::size_t j = 0; j < count; ++j) {
            double e = 0;
            for (std::size_t d = 0; d < dim; ++d) e += (q[d] - refs[j * dim + d]) * (q[d] - refs[j * dim + d]);
            EXPECT_NEAR(d0[j], e, 1e-12 * (1 + e));
        }
    }
}

INSTANTIATE_TEST_SUITE_P(Available, KernelEquivalence, ::testing::ValuesIn(kernels::available()),
                         [](const ::testing::TestParamInfo<const KernelTable*>& info) {
                             return std::string(info.param->name);
                         });
