#include "drss/channel.hpp"
#include "drss/model.hpp"
#include "drss/scenario.hpp"
#include "drss/scenario_io.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

namespace {

using drss::Scenario;

double normal_matrix_condition(const Scenario& s, double gamma) {
    drss::ChannelParams params;
    params.gamma = gamma;
    const auto drss_set = drss::drss_from_rss(drss::mean_rss(s, params));
    const auto model = drss::build_model(drss_set, s.anchors, gamma);
    const drss::Matrix normal = model.phi.transpose() * model.phi;
    const drss::Vector ev = Eigen::SelfAdjointEigenSolver<drss::Matrix>(normal).eigenvalues();
    return ev.maxCoeff() / ev.minCoeff();
}

}  // namespace

TEST(Fig1Scenario, MatchesCaption) {
    const Scenario s = drss::fig1_scenario();
    EXPECT_EQ(s.n_anchors(), 10);
    EXPECT_EQ(s.dimension(), 2);
    EXPECT_EQ(s.anchors(0, 0), 22.5);
    EXPECT_EQ(s.anchors(0, 1), 10.2);
    EXPECT_EQ(s.target(0), 28.7);
    EXPECT_EQ(s.target(1), 16.3);
    EXPECT_NO_THROW(drss::validate(s));
}

TEST(RandomScenario, CoordinatesInsideField) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Scenario s = drss::random_scenario(10, 50.0, 2, seed);
        EXPECT_EQ(s.n_anchors(), 10);
        EXPECT_GE(s.anchors.minCoeff(), 0.0);
        EXPECT_LE(s.anchors.maxCoeff(), 50.0);
        EXPECT_GE(s.target.minCoeff(), 0.0);
        EXPECT_LE(s.target.maxCoeff(), 50.0);
        for (int i = 0; i < s.n_anchors(); ++i)
            EXPECT_GE((s.anchor(i) - s.target).norm(), drss::kMinTargetSeparation);
    }
}

TEST(RandomScenario, SameSeedIsBitIdentical) {
    const Scenario a = drss::random_scenario(5, 50.0, 2, 42);
    const Scenario b = drss::random_scenario(5, 50.0, 2, 42);
    EXPECT_TRUE(a.anchors == b.anchors);
    EXPECT_TRUE(a.target == b.target);

    const Scenario c = drss::random_scenario(5, 50.0, 2, 43);
    EXPECT_FALSE(a.anchors == c.anchors);
}

TEST(RandomScenario, RejectsTooFewAnchors) {
    EXPECT_THROW(drss::random_scenario(4, 50.0, 2, 1), drss::Error);
    EXPECT_NO_THROW(drss::random_scenario(6, 50.0, 3, 1));
    EXPECT_THROW(drss::random_scenario(5, 50.0, 3, 1), drss::Error);
}

TEST(ValidateScenario, RejectsCoincidentTarget) {
    Scenario s = drss::fig1_scenario();
    s.target = s.anchor(3);
    try {
        drss::validate(s);
        FAIL() << "expected an error";
    } catch (const drss::Error& e) {
        EXPECT_EQ(e.code(), drss::ErrorCode::coincident_points);
    }
}

TEST(ValidateScenario, RejectsNonFinite) {
    Scenario s = drss::fig1_scenario();
    s.anchors(2, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(drss::validate(s), drss::Error);
}

TEST(ClusteredScenario, BadLayoutIsMuchWorseConditioned) {
    const Scenario good = drss::clustered_scenario(drss::Placement::good);
    const Scenario bad = drss::clustered_scenario(drss::Placement::bad);
    EXPECT_EQ(good.n_anchors(), 10);
    EXPECT_EQ(bad.n_anchors(), 10);

    for (double gamma : {2.0, 4.0, 6.0}) {
        const double cg = normal_matrix_condition(good, gamma);
        const double cb = normal_matrix_condition(bad, gamma);
        EXPECT_TRUE(std::isfinite(cg));
        EXPECT_LT(cg, 1e8) << "gamma " << gamma;
        EXPECT_GE(cb, 10.0 * cg) << "gamma " << gamma;
    }
}

TEST(ClusteredScenario, ParsePlacement) {
    EXPECT_EQ(drss::parse_placement("good"), drss::Placement::good);
    EXPECT_EQ(drss::parse_placement("bad"), drss::Placement::bad);
    EXPECT_THROW(drss::parse_placement("ugly"), drss::Error);
}

TEST(ScenarioIo, JsonRoundTrip) {
    const Scenario s = drss::random_scenario(8, 30.0, 3, 9);
    const Scenario back = drss::scenario_from_json(drss::scenario_to_json(s));
    EXPECT_TRUE(back.anchors == s.anchors);
    EXPECT_TRUE(back.target == s.target);
    EXPECT_EQ(back.field_side, s.field_side);
}
