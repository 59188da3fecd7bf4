#include <gtest/gtest.h>

#include <random>

#include "cpfactor/covariance.hpp"
#include "cpfactor/init.hpp"
#include "oracles.hpp"

using namespace cpfactor;

namespace {

struct Planted {
    std::vector<Eigen::MatrixXd> A;
    TensorSeries series;
};

// Noiseless CP series with orthonormal loadings and factors whose sample
// second-moment matrix is exactly the identity.
Planted planted_series(std::mt19937_64& rng, const Shape& shape, const Eigen::VectorXd& w, int T) {
    const int r = static_cast<int>(w.size());
    Planted p;
    for (auto d : shape) p.A.push_back(oracle::random_orthonormal(rng, static_cast<int>(d), r));
    Eigen::MatrixXd F = oracle::random_orthonormal(rng, T, r) * std::sqrt(static_cast<double>(T));
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(numel(shape)), T);
    for (int i = 0; i < r; ++i) {
        std::vector<Eigen::VectorXd> cols;
        for (const auto& a : p.A) cols.push_back(a.col(i));
        y += w(i) * outer_vec(cols) * F.col(i).transpose();
    }
    p.series = TensorSeries(shape, y);
    return p;
}

double max_tuple_error(const LoadingTuple& got, const std::vector<Eigen::MatrixXd>& A, int i) {
    double e = 0;
    for (std::size_t k = 0; k < A.size(); ++k) e = std::max(e, sin_angle(got[k], A[k].col(i)));
    return e;
}

// Best match of a tuple to any planted factor.
double best_tuple_error(const LoadingTuple& got, const std::vector<Eigen::MatrixXd>& A) {
    double e = 1.0;
    for (Eigen::Index i = 0; i < A[0].cols(); ++i) e = std::min(e, max_tuple_error(got, A, static_cast<int>(i)));
    return e;
}

DenseTensor xi_tensor(const std::vector<Eigen::MatrixXd>& A, const Eigen::VectorXd& lambda) {
    DenseTensor out;
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        std::vector<Eigen::VectorXd> cols;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& a : A) cols.push_back(a.col(i));
        DenseTensor term = lambda(i) * outer(cols);
        out = i == 0 ? term : out + term;
    }
    return out;
}

}  // namespace

TEST(EigengapRegime, WorkedValues) {
    Eigen::Vector3d v(9, 4, 1);
    EXPECT_TRUE(eigengap_regime(v, 1, 3, 0.1));
    Eigen::Vector3d tie(5, 5, 1);
    EXPECT_FALSE(eigengap_regime(tie, 0, 3, 0.1));
    EXPECT_FALSE(eigengap_regime(tie, 1, 3, 0.1));
    EXPECT_TRUE(eigengap_regime(tie, 2, 3, 0.1));
}

TEST(EigengapRegime, SingleFactorUsesZeroBelow) {
    Eigen::VectorXd v(1);
    v << 3;
    EXPECT_TRUE(eigengap_regime(v, 0, 1, 0.1));
    Eigen::Vector2d close(3, 2.99);
    EXPECT_TRUE(eigengap_regime(close, 0, 1, 0.1));  // the second value is ignored for r = 1
}

TEST(EigengapRegime, LastIndexComparesWithZero) {
    Eigen::Vector3d v(10, 1, 0.05);
    // i = r: gaps are |0.05 - 1| and |0.05 - 0| = 0.05 > 0.1 * 0.05
    EXPECT_TRUE(eigengap_regime(v, 2, 3, 0.1));
    Eigen::Vector3d close(10, 1, 0.95);
    // min(0.05, 0.95) = 0.05 < 0.1 * 0.95
    EXPECT_FALSE(eigengap_regime(close, 2, 3, 0.1));
}

TEST(EigengapRegime, OutOfRange) {
    Eigen::Vector2d v(2, 1);
    EXPECT_THROW(eigengap_regime(v, 2, 2, 0.1), InputError);
    EXPECT_THROW(eigengap_regime(v, 0, 3, 0.1), InputError);
}

TEST(CompositePca, ExactRankOneMatrix) {
    std::mt19937_64 rng(1);
    Eigen::VectorXd a1 = oracle::random_unit(rng, 4), a2 = oracle::random_unit(rng, 5);
    LoadingTuple t = composite_pca_one(outer_vec(std::vector<Eigen::VectorXd>{a1, a2}), {4, 5});
    ASSERT_EQ(t.size(), 2u);
    EXPECT_LE(sin_angle(t[0], a1), 1e-12);
    EXPECT_LE(sin_angle(t[1], a2), 1e-12);
}

TEST(CompositePca, PerturbedRankOne) {
    std::mt19937_64 rng(2);
    Eigen::VectorXd a1 = oracle::random_unit(rng, 6), a2 = oracle::random_unit(rng, 5);
    Eigen::VectorXd u = outer_vec(std::vector<Eigen::VectorXd>{a1, a2}) + 0.01 * oracle::random_matrix(rng, 30, 1).col(0);
    u /= u.norm();
    LoadingTuple t = composite_pca_one(u, {6, 5});
    EXPECT_LT(sin_angle(t[0], a1), 0.05);
    EXPECT_LT(sin_angle(t[1], a2), 0.05);
}

TEST(CompositePca, ThreeWay) {
    std::mt19937_64 rng(3);
    std::vector<Eigen::VectorXd> a{oracle::random_unit(rng, 3), oracle::random_unit(rng, 4), oracle::random_unit(rng, 2)};
    LoadingTuple t = composite_pca_one(outer_vec(a), {3, 4, 2});
    for (int k = 0; k < 3; ++k) EXPECT_LE(sin_angle(t[k], a[k]), 1e-12);
}

TEST(CompositePca, Errors) {
    EXPECT_THROW(composite_pca_one(Eigen::VectorXd::Zero(4), {2, 2}), InputError);
    EXPECT_THROW(composite_pca_one(Eigen::VectorXd::Ones(5), {2, 2}), InputError);
}

TEST(XiRepresentations, DenseAndSpectralAgree) {
    std::mt19937_64 rng(4);
    const Shape shape{3, 4, 2};
    const int d = 24;
    Eigen::MatrixXd u = oracle::random_orthonormal(rng, d, 3);
    Eigen::Vector3d lam(5, 3, 1);
    Eigen::MatrixXd m = u * lam.asDiagonal() * u.transpose();
    Shape full = shape;
    full.insert(full.end(), shape.begin(), shape.end());
    DenseXi dense(DenseTensor(full, Eigen::Map<const Eigen::VectorXd>(m.data(), m.size())));
    SpectralXi spec(shape, lam, u);
    LoadingTuple a{oracle::random_unit(rng, 3), oracle::random_unit(rng, 4), oracle::random_unit(rng, 2)};
    EXPECT_NEAR(dense.score(a), spec.score(a), 1e-12);
    for (std::size_t h = 0; h < 3; ++h) {
        const auto dh = static_cast<int>(shape[h]);
        Eigen::MatrixXd theta = oracle::random_matrix(rng, dh, dh);
        EXPECT_LT((dense.theta_contract(theta, h) - spec.theta_contract(theta, h)).norm(), 1e-11);
        EXPECT_LT((dense.mode_matrix(a, h) - spec.mode_matrix(a, h)).norm(), 1e-12);
    }
}

TEST(XiRepresentations, ScoreIsQuadraticForm) {
    std::mt19937_64 rng(5);
    Eigen::MatrixXd g = oracle::random_matrix(rng, 6, 6);
    Eigen::MatrixXd m = g + g.transpose();
    DenseXi xi(DenseTensor(Shape{2, 3, 2, 3}, Eigen::Map<const Eigen::VectorXd>(m.data(), 36)));
    LoadingTuple a{oracle::random_unit(rng, 2), oracle::random_unit(rng, 3)};
    Eigen::VectorXd v(6);
    for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 2; ++i) v(i + 2 * j) = a[0](i) * a[1](j);
    EXPECT_NEAR(xi.score(a), std::abs(v.dot(m * v)), 1e-12);
}

TEST(RandomizedProjection, TwoEqualFactorsNoiseless) {
    std::mt19937_64 rng(6);
    std::vector<Eigen::MatrixXd> A{oracle::random_orthonormal(rng, 5, 2), oracle::random_orthonormal(rng, 4, 2)};
    Eigen::Vector2d lam(5, 5);
    DenseXi xi(xi_tensor(A, lam));
    const auto tuples = randomized_projection(xi, 2, 50, std::nullopt, 0.8, 42);
    ASSERT_EQ(tuples.size(), 2u);
    const double e0 = std::min(max_tuple_error(tuples[0], A, 0), max_tuple_error(tuples[0], A, 1));
    const double e1 = std::min(max_tuple_error(tuples[1], A, 0), max_tuple_error(tuples[1], A, 1));
    EXPECT_LE(e0, 1e-6);
    EXPECT_LE(e1, 1e-6);
    // the two picks are different factors
    EXPECT_LT(std::abs(tuples[0][0].dot(tuples[1][0])), 0.5);
}

TEST(RandomizedProjection, SpectralFormGivesSameAnswer) {
    std::mt19937_64 rng(7);
    std::vector<Eigen::MatrixXd> A{oracle::random_orthonormal(rng, 5, 2), oracle::random_orthonormal(rng, 4, 2)};
    Eigen::MatrixXd u = Eigen::MatrixXd(20, 2);
    for (int i = 0; i < 2; ++i) u.col(i) = outer_vec(std::vector<Eigen::VectorXd>{A[0].col(i), A[1].col(i)});
    SpectralXi spec({5, 4}, Eigen::Vector2d(5, 5), u);
    DenseXi dense(xi_tensor(A, Eigen::Vector2d(5, 5)));
    const auto ts = randomized_projection(spec, 2, 20, std::nullopt, 0.8, 9);
    const auto td = randomized_projection(dense, 2, 20, std::nullopt, 0.8, 9);
    for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 2; ++k) EXPECT_LE(sin_angle(ts[i][k], td[i][k]), 1e-8);
}

TEST(RandomizedProjection, RankOneAnyL) {
    std::mt19937_64 rng(8);
    std::vector<Eigen::MatrixXd> A{oracle::random_orthonormal(rng, 3, 1), oracle::random_orthonormal(rng, 4, 1),
                                   oracle::random_orthonormal(rng, 2, 1)};
    DenseXi xi(xi_tensor(A, Eigen::VectorXd::Constant(1, 2.0)));
    for (std::size_t L : {1u, 3u}) {
        const auto t = randomized_projection(xi, 1, L, std::nullopt, 0.8, 1);
        EXPECT_LE(max_tuple_error(t[0], A, 0), 1e-10);
    }
}

TEST(RandomizedProjection, DuplicateCandidatesExhaustFilter) {
    std::mt19937_64 rng(9);
    std::vector<Eigen::MatrixXd> A{oracle::random_orthonormal(rng, 3, 2), oracle::random_orthonormal(rng, 3, 2)};
    DenseXi xi(xi_tensor(A, Eigen::Vector2d(2, 1)));
    std::vector<LoadingTuple> cands(6, LoadingTuple{A[0].col(0), A[1].col(0)});
    try {
        select_tuples(xi, cands, 2, 0.8);
        FAIL() << "expected InsufficientSurvivors";
    } catch (const InsufficientSurvivors& e) {
        EXPECT_EQ(e.requested(), 2u);
        EXPECT_EQ(e.survivors(), 1u);
        EXPECT_EQ(e.code(), "cp-init/insufficient-survivors");
    }
}

TEST(RandomizedProjection, GreedyPicksHighestScoreFirst) {
    std::mt19937_64 rng(10);
    std::vector<Eigen::MatrixXd> A{oracle::random_orthonormal(rng, 3, 2), oracle::random_orthonormal(rng, 3, 2)};
    DenseXi xi(xi_tensor(A, Eigen::Vector2d(1, 4)));
    std::vector<LoadingTuple> cands{{A[0].col(0), A[1].col(0)}, {A[0].col(1), A[1].col(1)}};
    const auto picked = select_tuples(xi, cands, 2, 0.8);
    EXPECT_LE(sin_angle(picked[0][0], A[0].col(1)), 1e-14);
    EXPECT_LE(sin_angle(picked[1][0], A[0].col(0)), 1e-14);
}

TEST(RandomizedProjection, CountValidation) {
    DenseXi xi(DenseTensor(Shape{2, 2, 2, 2}));
    EXPECT_THROW(randomized_projection(xi, 3, 2, std::nullopt, 0.8, 1), InputError);
    EXPECT_THROW(randomized_projection(xi, 0, 2, std::nullopt, 0.8, 1), InputError);
}

TEST(DefaultProjectionMode, LargestDimensionLowestOnTies) {
    EXPECT_EQ(default_projection_mode({3, 7, 5}), 1u);
    EXPECT_EQ(default_projection_mode({6, 4, 6}), 0u);
}

TEST(RcPca, NoiselessDistinctWeightsAreExact) {
    std::mt19937_64 rng(11);
    Planted p = planted_series(rng, {6, 5}, Eigen::Vector3d(3, 2, 1), 40);
    InitConfig cfg;
    cfg.r = 3;
    LoadingSet ls = rc_pca(contemporary_cov(p.series), cfg);
    ASSERT_EQ(ls.rank(), 3u);
    for (int i = 0; i < 3; ++i) {
        EXPECT_FALSE(ls.projected[i]);
        EXPECT_LE(max_tuple_error(ls.tuple(i), p.A, i), 1e-6);
    }
}

TEST(RcPca, EqualWeightsTakeProjectionBranch) {
    std::mt19937_64 rng(12);
    Planted p = planted_series(rng, {6, 5}, Eigen::Vector2d(2, 2), 40);
    InitConfig cfg;
    cfg.r = 2;
    cfg.seed = 3;
    LoadingSet ls = rc_pca(contemporary_cov(p.series), cfg);
    EXPECT_TRUE(ls.projected[0]);
    EXPECT_TRUE(ls.projected[1]);
    for (int i = 0; i < 2; ++i) EXPECT_LE(best_tuple_error(ls.tuple(i), p.A), 1e-6);
}

TEST(RcPca, SingleFactorUsesCompositeBranch) {
    std::mt19937_64 rng(13);
    Planted p = planted_series(rng, {4, 4}, Eigen::VectorXd::Constant(1, 2.0), 30);
    p.series.data() += 0.3 * oracle::random_matrix(rng, 16, 30);
    InitConfig cfg;
    cfg.r = 1;
    LoadingSet ls = rc_pca(p.series, cfg);
    EXPECT_FALSE(ls.projected[0]);
    EXPECT_LT(max_tuple_error(ls.tuple(0), p.A, 0), 0.3);
}

TEST(RcPca, UnitColumnsAndDeterminism) {
    std::mt19937_64 rng(14);
    Planted p = planted_series(rng, {5, 4, 3}, Eigen::Vector3d(2, 2, 1.9), 60);
    p.series.data() += 0.2 * oracle::random_matrix(rng, 60, 60);
    InitConfig cfg;
    cfg.r = 3;
    cfg.seed = 77;
    LoadingSet a = rc_pca(p.series, cfg);
    LoadingSet b = rc_pca(p.series, cfg);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(a.A[k], b.A[k]);
        for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(a.A[k].col(i).norm(), 1.0, 1e-10);
    }
}

TEST(RcPca, SeriesAndBundleEntryPointsAgree) {
    std::mt19937_64 rng(15);
    Planted p = planted_series(rng, {5, 4}, Eigen::Vector2d(3, 1.5), 50);
    p.series.data() += 0.1 * oracle::random_matrix(rng, 20, 50);
    InitConfig cfg;
    cfg.r = 2;
    LoadingSet a = rc_pca(p.series, cfg);
    LoadingSet b = rc_pca(contemporary_cov(p.series), cfg);
    for (std::size_t k = 0; k < 2; ++k)
        for (Eigen::Index i = 0; i < 2; ++i) EXPECT_LE(sin_angle(a.A[k].col(i), b.A[k].col(i)), 1e-8);
}

TEST(RcPca, LagBundleIsSymmetrized) {
    std::mt19937_64 rng(16);
    Planted p = planted_series(rng, {4, 4}, Eigen::Vector2d(3, 1), 40);
    InitConfig cfg;
    cfg.r = 2;
    cfg.branch = InitBranch::composite_only;
    // smooth factors so that the lag-1 covariance carries the signal
    Eigen::MatrixXd y = p.series.data();
    for (Eigen::Index t = 1; t < y.cols(); ++t) y.col(t) = 0.9 * y.col(t - 1) + 0.1 * y.col(t);
    TensorSeries smooth(p.series.shape(), y);
    LoadingSet from_bundle = rc_pca(lag_cov(smooth, 1), cfg);
    LoadingSet from_series = rc_pca(smooth, cfg, CovKind::lag, 1);
    for (std::size_t k = 0; k < 2; ++k)
        for (Eigen::Index i = 0; i < 2; ++i)
            EXPECT_LE(sin_angle(from_bundle.A[k].col(i), from_series.A[k].col(i)), 1e-8);
}

TEST(RcPca, ConfigValidation) {
    std::mt19937_64 rng(17);
    TensorSeries s(Shape{2, 2}, oracle::random_matrix(rng, 4, 10));
    InitConfig cfg;
    cfg.r = 5;
    EXPECT_THROW(rc_pca(s, cfg), InputError);
    cfg.r = 1;
    cfg.c0 = 1.5;
    EXPECT_THROW(rc_pca(s, cfg), InputError);
    cfg.c0 = 0.1;
    cfg.nu = 0.0;
    EXPECT_THROW(rc_pca(s, cfg), InputError);
}

TEST(InitConfig, DefaultProjectionCount) {
    InitConfig cfg;
    cfg.r = 3;
    EXPECT_EQ(cfg.projections(), 18u);
    cfg.L = 5;
    EXPECT_EQ(cfg.projections(), 5u);
}
