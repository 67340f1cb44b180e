#pragma once

#include "drss/common.hpp"

#include <cstdint>
#include <random>
#include <string>

namespace drss {

/// Anchor layout, target position and field geometry.
///
/// Anchors are stored one per row (N x d). Coordinates are in meters.
struct Scenario {
    Matrix anchors;
    Vector target;
    double field_side = 50.0;

    int dimension() const { return static_cast<int>(anchors.cols()); }
    int n_anchors() const { return static_cast<int>(anchors.rows()); }
    Vector anchor(int i) const { return anchors.row(i).transpose(); }
};

inline constexpr double kMinTargetSeparation = 0.1;

/// Throws unless the scenario satisfies N >= d + 3, finite coordinates and a
/// target that does not sit on an anchor.
inline void validate(const Scenario& s) {
    const int d = s.dimension();
    detail::require(d >= 1, ErrorCode::invalid_argument, "dimension must be positive");
    detail::require(s.target.size() == d, ErrorCode::invalid_argument,
                    "target dimension does not match anchors");
    detail::require(s.n_anchors() >= d + 3, ErrorCode::invalid_argument,
                    "need at least d + 3 anchors");
    detail::require(s.anchors.allFinite() && s.target.allFinite(), ErrorCode::invalid_argument,
                    "non-finite coordinate");
    detail::require(std::isfinite(s.field_side) && s.field_side > 0.0,
                    ErrorCode::invalid_argument, "field_side must be positive");
    for (int i = 0; i < s.n_anchors(); ++i) {
        detail::require((s.anchor(i) - s.target).norm() > 1e-9, ErrorCode::coincident_points,
                        "target coincides with anchor " + std::to_string(i));
    }
}

/// Ten-anchor 2-D layout with the reference anchor (22.5, 10.2) listed first.
inline Scenario fig1_scenario() {
    Scenario s;
    s.anchors.resize(10, 2);
    s.anchors << 22.5, 10.2,
                 44.9, 38.1,
                 44.1, 14.2,
                 33.6, 33.2,
                  6.1, 20.3,
                 13.7, 35.8,
                 14.1, 44.8,
                 41.3, 19.5,
                 24.9, 34.7,
                 41.7, 30.5;
    s.target = Eigen::Vector2d(28.7, 16.3);
    s.field_side = 50.0;
    return s;
}

/// Anchors and target uniform over [0, field_side]^d. The target is redrawn
/// until it is at least kMinTargetSeparation from every anchor.
inline Scenario random_scenario(int n_anchors, double field_side, int dimension,
                                std::uint64_t seed) {
    detail::require(dimension >= 1, ErrorCode::invalid_argument, "dimension must be positive");
    detail::require(n_anchors >= dimension + 3, ErrorCode::invalid_argument,
                    "need at least d + 3 anchors");
    detail::require(field_side > 0.0, ErrorCode::invalid_argument, "field_side must be positive");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coord(0.0, field_side);

    Scenario s;
    s.field_side = field_side;
    s.anchors.resize(n_anchors, dimension);
    for (int i = 0; i < n_anchors; ++i)
        for (int k = 0; k < dimension; ++k) s.anchors(i, k) = coord(rng);

    s.target.resize(dimension);
    for (;;) {
        for (int k = 0; k < dimension; ++k) s.target(k) = coord(rng);
        bool separated = true;
        for (int i = 0; i < n_anchors && separated; ++i)
            separated = (s.anchor(i) - s.target).norm() >= kMinTargetSeparation;
        if (separated) break;
    }
    return s;
}

enum class Placement { good, bad };

inline Placement parse_placement(const std::string& name) {
    if (name == "good") return Placement::good;
    if (name == "bad") return Placement::bad;
    throw Error(ErrorCode::invalid_argument, "unknown placement '" + name + "'");
}

/// Fixed ten-anchor layouts on a 50 m field. `good` puts anchors on the corners and
/// edge midpoints plus two interior points, so every target in the field lies
/// inside their hull; `bad` packs them into a 6 m corner square,
/// which makes the whitened regressor badly conditioned.
inline Scenario clustered_scenario(Placement kind) {
    Scenario s;
    s.field_side = 50.0;
    s.anchors.resize(10, 2);
    if (kind == Placement::good) {
        s.anchors <<  0.0,  0.0,
                     25.0,  0.0,
                     50.0,  0.0,
                     50.0, 25.0,
                     50.0, 50.0,
                     25.0, 50.0,
                      0.0, 50.0,
                      0.0, 25.0,
                     17.0, 17.0,
                     33.0, 33.0;
    } else {
        s.anchors << 2.0, 2.0,
                     4.4, 2.6,
                     7.4, 2.3,
                     2.6, 5.0,
                     5.6, 5.6,
                     8.0, 4.4,
                     2.3, 8.0,
                     5.0, 7.4,
                     7.7, 7.7,
                     3.8, 4.1;
    }
    s.target = Eigen::Vector2d(26.4, 23.1);
    return s;
}

}  // namespace drss
