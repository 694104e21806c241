#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "dklvae/tensor.hpp"

using namespace dklvae;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& r : rows) {
        Eigen::Index j = 0;
        for (double v : r) m(i, j++) = v;
        ++i;
    }
    return m;
}

}  // namespace

TEST(Matmul, HandComputedProduct) {
    EXPECT_EQ(matmul(mat({{1, 2}, {3, 4}}), mat({{5, 6}, {7, 8}})), mat({{19, 22}, {43, 50}}));
}

TEST(Matmul, IdentityAndZero) {
    const Matrix a = mat({{1, -2, 3}, {0.5, 4, 9}, {7, 1, 1}});
    EXPECT_EQ(matmul(Matrix::Identity(3, 3), a), a);
    EXPECT_EQ(matmul(a, Matrix::Zero(3, 2)), Matrix::Zero(3, 2));
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
    try {
        matmul(Matrix::Zero(2, 3), Matrix::Zero(2, 3));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::shape);
        EXPECT_NE(std::string(e.what()).find("2x3"), std::string::npos);
    }
}

TEST(Cholesky, TwoByTwo) {
    const Matrix l = cholesky(mat({{4, 2}, {2, 3}}));
    EXPECT_DOUBLE_EQ(l(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(l(1, 0), 1.0);
    EXPECT_DOUBLE_EQ(l(1, 1), std::sqrt(2.0));
    EXPECT_EQ(l(0, 1), 0.0);
}

TEST(Cholesky, ThreeByThreeIntegerFactor) {
    const Matrix l = cholesky(mat({{4, 12, -16}, {12, 37, -43}, {-16, -43, 98}}));
    const Matrix expected = mat({{2, 0, 0}, {6, 1, 0}, {-8, 5, 3}});
    EXPECT_LT((l - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Cholesky, IdentityMapsToIdentity) {
    EXPECT_EQ(cholesky(Matrix::Identity(4, 4)), Matrix::Identity(4, 4));
}

TEST(Cholesky, IndefiniteNamesPivot) {
    try {
        cholesky(mat({{1, 2}, {2, 1}}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::numeric);
        EXPECT_NE(std::string(e.what()).find("pivot 1"), std::string::npos) << e.what();
    }
}

TEST(Cholesky, RejectsAsymmetricAndNonSquare) {
    EXPECT_THROW(cholesky(mat({{2, 1}, {0, 2}})), Error);
    EXPECT_THROW(cholesky(Matrix::Zero(2, 3)), Error);
}

TEST(CholeskySolve, HandSolved) {
    const Matrix l = cholesky(mat({{4, 2}, {2, 3}}));
    const Matrix x = cholesky_solve(l, mat({{1}, {0}}));
    EXPECT_NEAR(x(0, 0), 3.0 / 8.0, 1e-15);
    EXPECT_NEAR(x(1, 0), -1.0 / 4.0, 1e-15);
}

TEST(CholeskySolve, RoundTrip) {
    Rng rng(3);
    const Matrix g = sample_standard_normal(rng, 6, 6);
    const Matrix a = g * g.transpose() + Matrix::Identity(6, 6);
    const Matrix b = sample_standard_normal(rng, 6, 2);
    const Matrix x = cholesky_solve(cholesky(a), b);
    EXPECT_LT((a * x - b).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_EQ(cholesky_solve(Matrix::Identity(6, 6), b), b);
}

TEST(RequireFinite, FlagsNan) {
    Matrix m = Matrix::Zero(2, 2);
    EXPECT_NO_THROW(require_finite(m, "m"));
    m(1, 0) = std::nan("");
    EXPECT_THROW(require_finite(m, "m"), Error);
}

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const auto va = a.next_u64();
        EXPECT_EQ(va, b.next_u64());
        EXPECT_NE(va, c.next_u64());
    }
}

TEST(Rng, UniformRangeAndIndex) {
    Rng r(1);
    for (int i = 0; i < 10000; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        ASSERT_LT(r.uniform_index(7), 7u);
    }
    EXPECT_THROW(r.uniform_index(0), Error);
}

TEST(Rng, SplitStreamsAreIndependentOfParentState) {
    Rng parent(9);
    const Rng child_before = parent.split(5);
    parent.next_u64();
    Rng c1 = child_before;
    Rng c2 = parent.split(5);
    EXPECT_EQ(c1.next_u64(), c2.next_u64());
    EXPECT_NE(parent.split(5).next_u64(), parent.split(6).next_u64());
}

TEST(StandardNormal, MomentsOverAMillionDraws) {
    Rng r(2024);
    const auto v = sample_standard_normal(r, 1'000'000);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    EXPECT_NEAR(mean, 0.0, 0.01);
    EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(StandardNormal, DeterministicAndEmpty) {
    Rng a(5), b(5);
    EXPECT_EQ(sample_standard_normal(a, 17), sample_standard_normal(b, 17));
    EXPECT_TRUE(sample_standard_normal(a, 0).empty());
}

TEST(RandomPermutation, IsAPermutation) {
    Rng r(8);
    const auto p = random_permutation(r, 1000);
    std::set<std::size_t> s(p.begin(), p.end());
    EXPECT_EQ(s.size(), 1000u);
    EXPECT_EQ(*s.rbegin(), 999u);
}
