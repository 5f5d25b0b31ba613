#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "colnn/numkit.hpp"

using namespace colnn;

TEST(Xavier, SingleEntryBound) {
    RngStream rng = RngStream::from_seed(123);
    for (int i = 0; i < 50; ++i) {
        Matrix m = xavier_init(1, 1, rng);
        EXPECT_GT(m.at(0, 0), -std::sqrt(3.0));
        EXPECT_LT(m.at(0, 0), std::sqrt(3.0));
    }
}

TEST(Xavier, FiftyByFiftyBound) {
    RngStream rng = RngStream::from_seed(7);
    Matrix m = xavier_init(50, 50, rng);
    const double bound = std::sqrt(6.0 / 100.0);
    EXPECT_NEAR(bound, 0.2449, 5e-4);
    for (double v : m.v) {
        EXPECT_GT(v, -bound);
        EXPECT_LT(v, bound);
    }
}

TEST(Xavier, MeanMatchesUniformOracle) {
    // mean of N uniform(-b, b) draws is 0 with stderr b/sqrt(3N)
    RngStream rng = RngStream::from_seed(99);
    const int n = 100000;
    Matrix m = xavier_init(100, 1000, rng);
    double mean = 0.0;
    for (double v : m.v) mean += v;
    mean /= n;
    const double bound = std::sqrt(6.0 / 1100.0);
    const double stderr_mean = bound / std::sqrt(3.0 * n);
    EXPECT_LT(std::abs(mean), 3.0 * stderr_mean);
}

TEST(Xavier, ZeroDimensionRejected) {
    RngStream rng = RngStream::from_seed(1);
    EXPECT_THROW(xavier_init(0, 3, rng), std::invalid_argument);
    EXPECT_THROW(xavier_init(3, 0, rng), std::invalid_argument);
}

TEST(UniformSqrtK, Bounds) {
    RngStream rng = RngStream::from_seed(5);
    Matrix a = uniform_sqrtk_init(4, 4, 1, rng);
    for (double v : a.v) {
        EXPECT_GT(v, -1.0);
        EXPECT_LT(v, 1.0);
    }
    Matrix b = uniform_sqrtk_init(4, 4, 50, rng);
    for (double v : b.v) {
        EXPECT_GT(v, -0.1414214);
        EXPECT_LT(v, 0.1414214);
    }
    Matrix c = uniform_sqrtk_init(4, 4, 4, rng);
    for (double v : c.v) {
        EXPECT_GT(v, -0.5);
        EXPECT_LT(v, 0.5);
    }
    EXPECT_THROW(uniform_sqrtk_init(4, 4, 0, rng), std::invalid_argument);
}

TEST(InitializerBounds, PropertyOverRandomShapes) {
    RngStream shape_rng = RngStream::from_seed(41);
    for (int i = 0; i < 100; ++i) {
        const int r = 1 + static_cast<int>(shape_rng.below(12));
        const int c = 1 + static_cast<int>(shape_rng.below(12));
        RngStream rng = shape_rng.fork(i);
        Matrix m = xavier_init(r, c, rng);
        const double bound = std::sqrt(6.0 / (r + c));
        for (double v : m.v) {
            ASSERT_GT(v, -bound);
            ASSERT_LT(v, bound);
        }
        const int hidden = 1 + static_cast<int>(shape_rng.below(64));
        Matrix u = uniform_sqrtk_init(r, c, hidden, rng);
        const double ub = std::sqrt(1.0 / hidden);
        for (double v : u.v) {
            ASSERT_GT(v, -ub);
            ASSERT_LT(v, ub);
        }
    }
}

TEST(RngStream, ForkIsDeterministic) {
    RngStream s = RngStream::from_seed(2020);
    RngStream a = s.fork(3);
    RngStream b = s.fork(3);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(RngStream, DistinctChildrenDiffer) {
    RngStream s = RngStream::from_seed(2020);
    RngStream a = s.fork(3);
    RngStream b = s.fork(4);
    EXPECT_NE(a.next_u64(), b.next_u64());
}

TEST(RngStream, ChildCollisionCheck) {
    // first draws of 10^4 sibling forks are pairwise distinct
    RngStream s = RngStream::from_seed(17);
    std::set<uint64_t> seen;
    for (int i = 0; i < 10000; ++i) {
        RngStream child = s.fork(i);
        EXPECT_TRUE(seen.insert(child.next_u64()).second) << "collision at child " << i;
    }
}

TEST(RngStream, ForkIndependentOfSiblingDraws) {
    RngStream s1 = RngStream::from_seed(55);
    RngStream s2 = RngStream::from_seed(55);
    RngStream a1 = s1.fork(1);
    // drain a sibling before forking child 1 on the second stream
    RngStream noise = s2.fork(2);
    for (int i = 0; i < 37; ++i) noise.next_u64();
    RngStream a2 = s2.fork(1);
    for (int i = 0; i < 50; ++i) EXPECT_EQ(a1.next_u64(), a2.next_u64());
}

TEST(RngStream, OpenUnitInterval) {
    RngStream s = RngStream::from_seed(9);
    for (int i = 0; i < 100000; ++i) {
        const double u = s.u01();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST(MatVec, MatchesNaiveTripleLoopExactly) {
    RngStream rng = RngStream::from_seed(31);
    for (int inst = 0; inst < 20; ++inst) {
        Matrix a(5, 7);
        for (double& v : a.v) v = rng.uniform(-2.0, 2.0);
        Vector x(7);
        for (double& v : x) v = rng.uniform(-2.0, 2.0);
        Vector out = matvec(a, x);
        for (int r = 0; r < 5; ++r) {
            double s = 0.0;
            for (int c = 0; c < 7; ++c) s += a.at(r, c) * x[c];
            ASSERT_EQ(out[r], s);
        }
    }
}

TEST(MatVec, ShapeMismatchRejected) {
    Matrix a(3, 4);
    Vector x(5, 0.0);
    EXPECT_THROW(matvec(a, x), std::invalid_argument);
}

TEST(CentralDiff, ExactForQuadratics) {
    // f(x) = 2 x0^2 - 3 x0 x1 + 0.5 x1^2 + 7 x0
    auto fn = [](const Vector& x) {
        return 2.0 * x[0] * x[0] - 3.0 * x[0] * x[1] + 0.5 * x[1] * x[1] + 7.0 * x[0];
    };
    Vector x = {1.25, -0.75};
    Vector g = central_diff(fn, x, 1e-3);
    EXPECT_NEAR(g[0], 4.0 * x[0] - 3.0 * x[1] + 7.0, 1e-9);
    EXPECT_NEAR(g[1], -3.0 * x[0] + x[1], 1e-9);
}

TEST(OpCount, KernelsAreCounted) {
    opcount::reset();
    Matrix a(4, 6, 1.0);
    Vector x(6, 2.0);
    matvec(a, x);
    EXPECT_EQ(opcount::get(), 2u * 4u * 6u);
}
