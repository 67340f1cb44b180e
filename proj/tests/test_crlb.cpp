#include "drss/crlb.hpp"
#include "drss/model.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <Eigen/Eigenvalues>

#include <fstream>

using drss::CrlbKind;
using drss::Matrix;
using drss::Parameterization;
using drss::Vector;

namespace {

Matrix central_difference_jacobian(const Matrix& anchors, const Vector& x, double gamma, double h) {
    Matrix jac(anchors.rows() - 1, x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        Vector up = x, down = x;
        up(k) += h;
        down(k) -= h;
        jac.col(k) = (drss::mean_drss(anchors, up, gamma) - drss::mean_drss(anchors, down, gamma)) / (2.0 * h);
    }
    return jac;
}

}  // namespace

TEST(Fim, LocationGradientMatchesFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto s = drss::random_scenario(10, 50.0, 2, seed);
        for (double gamma : {2.0, 4.0}) {
            const Matrix analytic = drss::drss_location_jacobian(s.anchors, s.target, gamma);
            const Matrix numeric = central_difference_jacobian(s.anchors, s.target, gamma, 1e-5);
            EXPECT_LE((analytic - numeric).norm(), 1e-5 * analytic.norm()) << "seed " << seed;
        }
    }
}

TEST(Fim, ExponentGradientMatchesFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto s = drss::random_scenario(10, 50.0, 2, seed);
        const double h = 1e-5;
        const Vector numeric = (drss::mean_drss(s.anchors, s.target, 4.0 + h) -
                                drss::mean_drss(s.anchors, s.target, 4.0 - h)) / (2.0 * h);
        const Vector analytic = drss::drss_ple_gradient(s.anchors, s.target);
        EXPECT_LE((analytic - numeric).norm(), 1e-5 * analytic.norm()) << "seed " << seed;
    }
}

TEST(Fim, ExponentGradientVanishesForEquidistantAnchor) {
    Matrix anchors(5, 2);
    anchors << 0, 0,
               10, 0,
               3, 9,
               30, 1,
               -4, 20;
    const Vector g = drss::drss_ple_gradient(anchors, Eigen::Vector2d(5, 5));
    EXPECT_NEAR(g(0), 0.0, 1e-14);
    EXPECT_GT(std::abs(g(2)), 1.0);
}

TEST(Fim, InverselyProportionalToNoiseVariance) {
    const auto s = drss::fig1_scenario();
    for (auto param : {Parameterization::location, Parameterization::location_and_ple, Parameterization::ple}) {
        const Matrix j1 = drss::fim(s, 4.0, 1.5, param);
        const Matrix j2 = drss::fim(s, 4.0, 3.0, param);
        EXPECT_LE((j1 - 2.0 * j2).norm(), 1e-12 * j1.norm());
    }
}

TEST(Fim, SymmetricPositiveSemidefinite) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto s = drss::random_scenario(10, 50.0, 2, seed);
        const Matrix j = drss::fim(s, 3.0, 1.0, Parameterization::location_and_ple);
        EXPECT_TRUE(j.isApprox(j.transpose(), 0.0));
        EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(j).eigenvalues().minCoeff(), -1e-10 * j.norm());
    }
}

// The FIM from the DRSS vector must equal the one from an explicit inverse
// covariance (Gamma Gamma')^{-1} / sigma^2.
TEST(Fim, MatchesExplicitCovarianceInverse) {
    const auto s = drss::random_scenario(8, 50.0, 2, 21);
    const Matrix g = drss::drss_location_jacobian(s.anchors, s.target, 3.0);
    const Matrix gam = drss::gamma_matrix(8);
    const Matrix cov = 2.0 * gam * gam.transpose();
    const Matrix explicit_j = g.transpose() * cov.inverse() * g;
    EXPECT_LE((drss::fim(s, 3.0, 2.0, Parameterization::location) - explicit_j).norm(), 1e-10 * explicit_j.norm());
}

TEST(Crlb, JointBoundNeverBelowKnownExponentBound) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto s = drss::random_scenario(10, 50.0, 2, seed);
        const double c1 = drss::crlb(s, 4.0, 1.0, CrlbKind::joint_location);
        const double c3 = drss::crlb(s, 4.0, 1.0, CrlbKind::location_known_ple);
        EXPECT_GE(c1, c3 * (1.0 - 1e-12)) << "seed " << seed;
        const double c2 = drss::crlb(s, 4.0, 1.0, CrlbKind::joint_ple);
        const double c4 = drss::crlb(s, 4.0, 1.0, CrlbKind::ple_known_location);
        EXPECT_GE(c2, c4 * (1.0 - 1e-12)) << "seed " << seed;
    }
}

TEST(Crlb, ScalesWithNoiseStandardDeviation) {
    const auto s = drss::random_scenario(10, 50.0, 2, 3);
    for (auto kind : {CrlbKind::joint_location, CrlbKind::joint_ple, CrlbKind::location_known_ple,
                      CrlbKind::ple_known_location}) {
        EXPECT_NEAR(drss::crlb(s, 4.0, 4.0, kind), 2.0 * drss::crlb(s, 4.0, 1.0, kind),
                    1e-12 * drss::crlb(s, 4.0, 1.0, kind));
    }
}

TEST(Crlb, Fig1MatchesHighPrecisionFixture) {
    std::ifstream in(std::string(DRSS_FIXTURE_DIR) + "/precision.json");
    ASSERT_TRUE(in.good());
    const auto j = nlohmann::json::parse(in).at("fig1_crlb_gamma4_sigma1");
    const auto s = drss::fig1_scenario();
    for (const auto& [name, value] : j.items()) {
        const double expected = value.get<double>();
        EXPECT_NEAR(drss::crlb(s, 4.0, 1.0, drss::parse_crlb_kind(name)), expected, 1e-9 * expected) << name;
    }
}

TEST(Crlb, RejectsInvalidRequests) {
    auto s = drss::fig1_scenario();
    EXPECT_THROW(drss::crlb(s, 4.0, 0.0, CrlbKind::location_known_ple), drss::Error);
    EXPECT_THROW(drss::crlb(s, -1.0, 1.0, CrlbKind::location_known_ple), drss::Error);
    EXPECT_THROW(drss::parse_crlb_kind("crlb5"), drss::Error);
    s.target = s.anchor(2);
    EXPECT_THROW(drss::crlb(s, 4.0, 1.0, CrlbKind::location_known_ple), drss::Error);
}

TEST(Crlb, CollinearGeometryIsSingular) {
    // All anchors and the target on a line: the cross-line coordinate is
    // unobservable, so the location FIM is singular.
    drss::Scenario s;
    s.anchors.resize(6, 2);
    s.anchors << 0, 0,
                 5, 0,
                 11, 0,
                 18, 0,
                 26, 0,
                 40, 0;
    s.target = Eigen::Vector2d(13, 0);
    try {
        drss::crlb(s, 4.0, 1.0, CrlbKind::location_known_ple);
        FAIL() << "expected singular_model";
    } catch (const drss::Error& e) {
        EXPECT_EQ(e.code(), drss::ErrorCode::singular_model);
    }
}
