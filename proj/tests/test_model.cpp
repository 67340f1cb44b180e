#include "drss/channel.hpp"
#include "drss/model.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <random>

using drss::Matrix;
using drss::Vector;

namespace {

drss::DrssSampleSet exact_drss(const drss::Scenario& s, double gamma) {
    drss::ChannelParams p;
    p.gamma = gamma;
    p.p0_nominal = -30.0;
    return drss::drss_from_rss(drss::mean_rss(s, p));
}

}  // namespace

TEST(GammaMatrix, SmallCases) {
    Matrix expected3(2, 3);
    expected3 << -1, 1, 0,
                 -1, 0, 1;
    EXPECT_TRUE(drss::gamma_matrix(3) == expected3);

    Matrix expected2(1, 2);
    expected2 << -1, 1;
    EXPECT_TRUE(drss::gamma_matrix(2) == expected2);
    EXPECT_THROW(drss::gamma_matrix(1), drss::Error);
}

TEST(GammaMatrix, AnnihilatesOnes) {
    for (int n = 2; n <= 20; ++n) EXPECT_TRUE((drss::gamma_matrix(n) * Vector::Ones(n)).isZero(0.0));
}

TEST(Whitener, DefiningPropertyForManySizes) {
    for (int n = 2; n <= 50; ++n) {
        const Matrix g = drss::gamma_matrix(n);
        const Matrix w = drss::whitener(n);
        const double err = (w * g * g.transpose() * w - Matrix::Identity(n - 1, n - 1)).norm();
        EXPECT_LE(err, 1e-12) << "N = " << n;
    }
}

TEST(Whitener, TwoAnchors) {
    const Matrix w = drss::whitener(2);
    ASSERT_EQ(w.rows(), 1);
    EXPECT_NEAR(w(0, 0), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(Whitener, MatchesEigendecompositionInverseSqrt) {
    const Matrix g = drss::gamma_matrix(5);
    const Eigen::SelfAdjointEigenSolver<Matrix> es(g * g.transpose());
    EXPECT_LE((drss::whitener(5) - es.operatorInverseSqrt()).norm(), 1e-12);
}

TEST(Whitener, ApplyMatchesMatrixProduct) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    Matrix a(9, 4);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
    const Matrix w = drss::whitener(10);
    EXPECT_LE((drss::apply_whitener(a) - w * a).norm(), 1e-13);
    const Vector v = a.col(2);
    EXPECT_LE((drss::apply_whitener(v) - w * v).norm(), 1e-13);
}

TEST(BuildUnwhitened, ZeroNoiseSatisfiesLinearModel) {
    const auto s = drss::fig1_scenario();
    const auto u = drss::build_unwhitened(exact_drss(s, 4.0), s.anchors, 4.0);
    const Vector theta = drss::augmented_theta(s.target);
    EXPECT_LE((u.psi * theta - u.p).norm(), 1e-9 * (1.0 + u.p.norm()));
    EXPECT_TRUE((u.pprime.array() > 0.0).all());
}

TEST(BuildUnwhitened, RowStructure) {
    const auto s = drss::random_scenario(7, 50.0, 2, 3);
    const auto drss_set = exact_drss(s, 3.0);
    const auto u = drss::build_unwhitened(drss_set, s.anchors, 3.0);
    const Vector s1 = s.anchor(drss_set.rn_index);
    EXPECT_EQ(u.rn_index, drss_set.rn_index);
    for (std::size_t j = 0; j < drss_set.other_ids.size(); ++j) {
        const auto i = static_cast<Eigen::Index>(j);
        const Vector si = s.anchor(drss_set.other_ids[j]);
        const double pp = std::pow(10.0, drss_set.drss_db(i) / 15.0);
        EXPECT_NEAR(u.pprime(i), pp, 1e-14 * pp);
        EXPECT_LE((u.psi.row(i).head(2).transpose() - (2.0 * s1 - 2.0 * pp * si)).norm(), 1e-12);
        EXPECT_NEAR(u.psi(i, 2), pp - 1.0, 1e-14);
        EXPECT_NEAR(u.p(i), s1.squaredNorm() - pp * si.squaredNorm(), 1e-10);
    }
}

TEST(BuildUnwhitened, ZeroDrssGivesPlainDifferences) {
    const auto s = drss::fig1_scenario();
    drss::DrssSampleSet d;
    d.rn_index = 0;
    d.drss_db = Vector::Zero(9);
    for (int i = 1; i < 10; ++i) d.other_ids.push_back(i);
    const auto u = drss::build_unwhitened(d, s.anchors, 4.0);
    for (int i = 0; i < 9; ++i) {
        EXPECT_LE((u.psi.row(i).head(2).transpose() - 2.0 * (s.anchor(0) - s.anchor(i + 1))).norm(), 1e-12);
        EXPECT_EQ(u.psi(i, 2), 0.0);
        EXPECT_NEAR(u.p(i), s.anchor(0).squaredNorm() - s.anchor(i + 1).squaredNorm(), 1e-10);
    }
}

TEST(BuildUnwhitened, RejectsBadInputs) {
    const auto s = drss::fig1_scenario();
    const auto d = exact_drss(s, 4.0);
    EXPECT_THROW(drss::build_unwhitened(d, s.anchors, 0.0), drss::Error);
    EXPECT_THROW(drss::build_unwhitened(d, s.anchors.topRows(9), 4.0), drss::Error);
}

TEST(BuildWhitened, ZeroNoiseConsistencyAcrossExponents) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto s = drss::random_scenario(10, 50.0, 2, seed);
        for (double gamma : {2.0, 3.0, 4.0, 5.0, 6.0}) {
            const auto m = drss::build_model(exact_drss(s, gamma), s.anchors, gamma);
            const Vector theta = drss::augmented_theta(s.target);
            EXPECT_LE((m.phi * theta - m.rho).norm(), 1e-9 * (1.0 + m.rho.norm()))
                << "seed " << seed << " gamma " << gamma;
        }
    }
}

TEST(BuildWhitened, EqualsWhitenerTimesUnwhitened) {
    const auto s = drss::fig1_scenario();
    const auto u = drss::build_unwhitened(exact_drss(s, 4.0), s.anchors, 4.0);
    const auto w = drss::build_whitened(u);
    const Matrix wm = drss::whitener(10);
    EXPECT_LE((w.phi - wm * u.psi).norm(), 1e-12 * (1.0 + u.psi.norm()));
    EXPECT_LE((w.rho - wm * u.p).norm(), 1e-12 * (1.0 + u.p.norm()));
}

TEST(BuildWhitened, IsDeterministic) {
    const auto s = drss::random_scenario(10, 50.0, 2, 4);
    const auto d = exact_drss(s, 3.5);
    const auto a = drss::build_model(d, s.anchors, 3.5);
    const auto b = drss::build_model(d, s.anchors, 3.5);
    EXPECT_TRUE(a.phi == b.phi);
    EXPECT_TRUE(a.rho == b.rho);
}

// Under small shadowing the raw model error is correlated through the shared
// reference anchor (off-diagonal / diagonal about 1/2); whitening removes that.
TEST(BuildWhitened, ModelErrorCovarianceIsScalar) {
    const auto s = drss::fig1_scenario();
    drss::ChannelParams p;
    p.gamma = 4.0;
    p.sigma_chi = 0.1;
    const Vector theta = drss::augmented_theta(s.target);

    std::mt19937_64 rng(12345);
    const int draws = 10000;
    Matrix samples(draws, 9), raw(draws, 9);
    for (int k = 0; k < draws; ++k) {
        const auto d = drss::drss_from_rss(drss::sample_rss(s, p, rng));
        ASSERT_EQ(d.rn_index, 0);
        const auto u = drss::build_unwhitened(d, s.anchors, p.gamma);
        const auto w = drss::build_whitened(u);
        samples.row(k) = (w.rho - w.phi * theta).transpose();
        raw.row(k) = (u.p - u.psi * theta).transpose();
    }
    auto ratio = [&](const Matrix& x) {
        const Matrix centred = x.rowwise() - x.colwise().mean();
        const Matrix cov = centred.transpose() * centred / (draws - 1);
        const double diag = cov.diagonal().mean();
        Matrix off = cov;
        off.diagonal().setZero();
        return std::make_pair(off.cwiseAbs().maxCoeff() / diag,
                              cov.diagonal().maxCoeff() / cov.diagonal().minCoeff());
    };
    const auto [white_off, white_spread] = ratio(samples);
    EXPECT_LT(white_off, 0.10);
    EXPECT_LT(white_spread, 1.10);
    EXPECT_GT(ratio(raw).first, 0.4);
}

TEST(PleModel, ZeroNoiseRecoversExponent) {
    const auto s = drss::fig1_scenario();
    const auto ple = drss::build_ple_model(s.target, s.anchors, exact_drss(s, 4.0));
    EXPECT_NEAR(ple.least_squares_gamma(), 4.0, 1e-9);

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto r = drss::random_scenario(10, 50.0, 2, seed);
        for (double gamma : {2.0, 5.5}) {
            const auto m = drss::build_ple_model(r.target, r.anchors, exact_drss(r, gamma));
            EXPECT_NEAR(m.least_squares_gamma(), gamma, 1e-9);
        }
    }
}

TEST(PleModel, EquidistantAnchorGivesZeroLogRatio) {
    drss::Scenario s;
    s.anchors.resize(5, 2);
    s.anchors << 0, 0,
                 10, 0,
                 0, 10,
                 20, 20,
                 -7, 3;
    s.target = Eigen::Vector2d(5, 5);  // as far from anchor 1 as from anchor 0
    drss::DrssSampleSet d;
    d.rn_index = 0;
    d.drss_db = Vector::Zero(4);
    d.other_ids = {1, 2, 3, 4};
    const auto ple = drss::build_ple_model(s.target, s.anchors, d);
    // dvec = W lambda, so recover lambda with the inverse whitener.
    const Matrix g = drss::gamma_matrix(5);
    const Vector lambda = (g * g.transpose()) * drss::whitener(5) * ple.dvec;
    EXPECT_NEAR(lambda(0), 0.0, 1e-12);
    EXPECT_NEAR(lambda(1), 0.0, 1e-12);
    EXPECT_GT(std::abs(lambda(2)), 1.0);
}

TEST(PleModel, RejectsLocationOnAnchor) {
    const auto s = drss::fig1_scenario();
    EXPECT_THROW(drss::build_ple_model(s.anchor(4), s.anchors, exact_drss(s, 4.0)), drss::Error);
}

TEST(RssEquivalence, Fig1Holds) {
    drss::ChannelParams p;
    p.gamma = 4.0;
    p.p0_nominal = -20.0;
    const auto check = drss::verify_rss_equivalence(drss::fig1_scenario(), p, 1e-10);
    EXPECT_TRUE(check.ok) << check.diagnostic;
    EXPECT_TRUE(check.diagnostic.empty());
}

TEST(RssEquivalence, TwoAnchorCase) {
    Matrix anchors(2, 2);
    anchors << 0, 0,
               10, 4;
    drss::ChannelParams p;
    p.gamma = 3.0;
    const auto check = drss::check_rss_equivalence(anchors, Eigen::Vector2d(3, 1), p, 1e-10);
    EXPECT_TRUE(check.ok) << check.diagnostic;
}

TEST(RssEquivalence, WrongScalingBreaksIdentity) {
    const auto s = drss::fig1_scenario();
    drss::ChannelParams p;
    p.gamma = 4.0;
    Vector dp(10);
    for (int i = 0; i < 10; ++i)
        dp(i) = std::pow(10.0, drss::mean_rss_db(s.target, s.anchor(i), p) / (5.0 * p.gamma));
    dp(3) *= 1.2;
    const auto check = drss::check_rss_equivalence(s.anchors, s.target, p, 1e-10, dp);
    EXPECT_FALSE(check.ok);
    EXPECT_FALSE(check.diagnostic.empty());
}
