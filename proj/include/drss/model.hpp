#pragma once

#include "drss/channel.hpp"

#include <string>
#include <vector>

namespace drss {

/// Linearised DRSS model p = Psi * theta + eps with theta = [x; |x|^2].
///
/// Rows follow `other_ids`; the reference anchor is the first row of
/// `anchors_used`, the remaining rows follow `other_ids`.
struct UnwhitenedModel {
    Matrix psi;
    Vector p;
    Vector pprime;  ///< 10^(P_{i,1} / (5 gamma)) per row
    double gamma_used = 0.0;
    Matrix anchors_used;
    int rn_index = 0;
    std::vector<int> other_ids;
};

/// Whitened model rho = Phi * theta + v with v having scaled-identity covariance.
struct WhitenedModel {
    Matrix phi;
    Vector rho;
    double gamma_used = 0.0;
    Matrix anchors_used;
    int rn_index = 0;
    std::vector<int> other_ids;

    int dimension() const { return static_cast<int>(phi.cols()) - 1; }
};

/// Whitened linear model of the DRSS in the path-loss exponent for a fixed
/// location: c = dvec * gamma + e.
struct PleModel {
    Vector c;
    Vector dvec;
    Vector location;

    /// Least-squares exponent (dvec' c) / (dvec' dvec).
    double least_squares_gamma() const { return dvec.dot(c) / dvec.squaredNorm(); }
};

/// (N-1) x N differencing matrix [-1 | I].
inline Matrix gamma_matrix(int n_anchors) {
    detail::require(n_anchors >= 2, ErrorCode::invalid_argument, "need at least two anchors");
    Matrix g = Matrix::Zero(n_anchors - 1, n_anchors);
    g.col(0).setConstant(-1.0);
    g.rightCols(n_anchors - 1).setIdentity();
    return g;
}

namespace detail {

// Gamma Gamma' = I + 1 1' has eigenvalue N on the ones direction and 1
// elsewhere, so its inverse square root is I + c 1 1' with this c.
inline double whitener_rank_one_coefficient(int n_anchors) {
    const double n = n_anchors;
    return (1.0 / std::sqrt(n) - 1.0) / (n - 1.0);
}

}  // namespace detail

/// (Gamma Gamma')^{-1/2} in closed form.
inline Matrix whitener(int n_anchors) {
    detail::require(n_anchors >= 2, ErrorCode::invalid_argument, "need at least two anchors");
    const int m = n_anchors - 1;
    return Matrix::Identity(m, m) +
           Matrix::Constant(m, m, detail::whitener_rank_one_coefficient(n_anchors));
}

/// Applies the whitener to each column of `a` without forming it.
inline Matrix apply_whitener(const Matrix& a) {
    const int n_anchors = static_cast<int>(a.rows()) + 1;
    const double c = detail::whitener_rank_one_coefficient(n_anchors);
    Matrix out = a;
    out.rowwise() += c * a.colwise().sum();
    return out;
}

inline Vector apply_whitener(const Vector& v) {
    const int n_anchors = static_cast<int>(v.size()) + 1;
    return v.array() + detail::whitener_rank_one_coefficient(n_anchors) * v.sum();
}

namespace detail {

inline Matrix reorder_anchors(const Matrix& anchors, int rn_index, const std::vector<int>& other_ids) {
    Matrix out(static_cast<Eigen::Index>(other_ids.size()) + 1, anchors.cols());
    out.row(0) = anchors.row(rn_index);
    for (std::size_t j = 0; j < other_ids.size(); ++j)
        out.row(static_cast<Eigen::Index>(j) + 1) = anchors.row(other_ids[j]);
    return out;
}

inline void check_drss_against_anchors(const DrssSampleSet& drss, const Matrix& anchors) {
    const auto n = anchors.rows();
    require(drss.n_anchors() == n, ErrorCode::invalid_argument,
            "DRSS sample count does not match anchor count");
    require(static_cast<Eigen::Index>(drss.other_ids.size()) == n - 1, ErrorCode::invalid_argument,
            "other_ids length mismatch");
    require(drss.rn_index >= 0 && drss.rn_index < n, ErrorCode::invalid_argument,
            "reference index out of range");
    for (int id : drss.other_ids)
        require(id >= 0 && id < n && id != drss.rn_index, ErrorCode::invalid_argument,
                "invalid anchor id in DRSS sample set");
    require(drss.drss_db.allFinite(), ErrorCode::invalid_argument, "non-finite DRSS value");
}

}  // namespace detail

/// Builds Psi and p from DRSS measurements. `anchors` is indexed by the
/// original anchor ids used in `drss`.
inline UnwhitenedModel build_unwhitened(const DrssSampleSet& drss, const Matrix& anchors, double gamma) {
    detail::require(std::isfinite(gamma) && gamma > 0.0, ErrorCode::invalid_argument,
                    "path-loss exponent must be positive");
    detail::check_drss_against_anchors(drss, anchors);

    UnwhitenedModel model;
    model.gamma_used = gamma;
    model.rn_index = drss.rn_index;
    model.other_ids = drss.other_ids;
    model.anchors_used = detail::reorder_anchors(anchors, drss.rn_index, drss.other_ids);

    const auto rows = drss.drss_db.size();
    const auto d = anchors.cols();
    const Vector s1 = model.anchors_used.row(0).transpose();
    model.psi.resize(rows, d + 1);
    model.p.resize(rows);
    model.pprime = (drss.drss_db.array() / (5.0 * gamma) * std::log(10.0)).exp();
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Vector si = model.anchors_used.row(i + 1).transpose();
        const double pp = model.pprime(i);
        model.psi.row(i).head(d) = (2.0 * s1 - 2.0 * pp * si).transpose();
        model.psi(i, d) = pp - 1.0;
        model.p(i) = s1.squaredNorm() - pp * si.squaredNorm();
    }
    return model;
}

inline WhitenedModel build_whitened(const UnwhitenedModel& u) {
    WhitenedModel w;
    w.phi = apply_whitener(u.psi);
    w.rho = apply_whitener(u.p);
    w.gamma_used = u.gamma_used;
    w.anchors_used = u.anchors_used;
    w.rn_index = u.rn_index;
    w.other_ids = u.other_ids;
    return w;
}

inline WhitenedModel build_model(const DrssSampleSet& drss, const Matrix& anchors, double gamma) {
    return build_whitened(build_unwhitened(drss, anchors, gamma));
}

/// theta = [x; |x|^2].
inline Vector augmented_theta(const Vector& x) {
    Vector theta(x.size() + 1);
    theta << x, x.squaredNorm();
    return theta;
}

/// Builds the whitened PLE model for a candidate `location`.
inline PleModel build_ple_model(const Vector& location, const Matrix& anchors, const DrssSampleSet& drss) {
    detail::check_drss_against_anchors(drss, anchors);
    detail::require(location.size() == anchors.cols(), ErrorCode::invalid_argument,
                    "location dimension mismatch");
    for (Eigen::Index i = 0; i < anchors.rows(); ++i)
        detail::require((location - anchors.row(i).transpose()).norm() > 1e-9,
                        ErrorCode::coincident_points, "location coincides with an anchor");

    const double d1 = (location - anchors.row(drss.rn_index).transpose()).norm();
    Vector lambda(drss.drss_db.size());
    for (std::size_t j = 0; j < drss.other_ids.size(); ++j) {
        const double di = (location - anchors.row(drss.other_ids[j]).transpose()).norm();
        lambda(static_cast<Eigen::Index>(j)) = -10.0 * std::log10(di / d1);
    }
    PleModel out;
    out.c = apply_whitener(Vector(drss.drss_db));
    out.dvec = apply_whitener(lambda);
    out.location = location;
    return out;
}

/// Outcome of the RSS/DRSS whitened-model equivalence check.
struct EquivalenceCheck {
    bool ok = false;
    double unitarity_error = 0.0;  ///< max |P1'^2 P' P'^T - I|
    double model_error = 0.0;      ///< |Phi theta - P' B' phi| / (1 + |Phi theta|)
    std::string diagnostic;
};

/// Checks on a noise-free instance that the whitened DRSS model equals the
/// whitened RSS model after projecting out the common power, i.e. that
/// P' = -(1/P1') W Gamma is a scaled unitary operator and
/// Phi theta = P' B' phi. `d_prime`, if non-empty, overrides the diagonal
/// 10^(P_i / (5 gamma)) (indexed by original anchor id).
inline EquivalenceCheck check_rss_equivalence(const Matrix& anchors, const Vector& target,
                                              const ChannelParams& params, double tolerance,
                                              const Vector& d_prime_override = Vector()) {
    const auto n = anchors.rows();
    const auto d = anchors.cols();
    detail::require(n >= 2, ErrorCode::invalid_argument, "need at least two anchors");

    RssSampleSet rss;
    rss.rss_db.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        rss.rss_db(i) = mean_rss_db(target, anchors.row(i).transpose(), params);
        rss.anchor_ids.push_back(static_cast<int>(i));
    }
    const DrssSampleSet drss = drss_from_rss(rss);
    const WhitenedModel model = build_model(drss, anchors, params.gamma);
    const Vector theta = augmented_theta(target);

    Vector d_prime(n);
    if (d_prime_override.size() == n) {
        d_prime = d_prime_override;
    } else {
        for (Eigen::Index i = 0; i < n; ++i)
            d_prime(i) = std::pow(10.0, rss.rss_db(i) / (5.0 * params.gamma));
    }

    // Internal order: reference anchor first.
    std::vector<int> order{drss.rn_index};
    order.insert(order.end(), drss.other_ids.begin(), drss.other_ids.end());
    Vector dp(n);
    Matrix b(n, d + 2);
    for (Eigen::Index k = 0; k < n; ++k) {
        const int id = order[static_cast<std::size_t>(k)];
        dp(k) = d_prime(id);
        b.row(k).head(d) = 2.0 * anchors.row(id);
        b(k, d) = -1.0;
        b(k, d + 1) = 1.0 / dp(k);
    }
    const Matrix b_prime = dp.asDiagonal() * b;
    Vector phi_rss(d + 2);
    phi_rss << target, target.squaredNorm(), std::pow(10.0, params.p0_nominal / (5.0 * params.gamma));

    const Matrix projector = -(1.0 / dp(0)) * (whitener(static_cast<int>(n)) * gamma_matrix(static_cast<int>(n)));
    const Matrix gram = dp(0) * dp(0) * projector * projector.transpose();

    EquivalenceCheck out;
    out.unitarity_error = (gram - Matrix::Identity(n - 1, n - 1)).cwiseAbs().maxCoeff();
    const Vector lhs = model.phi * theta;
    const Vector rhs = projector * b_prime * phi_rss;
    out.model_error = (lhs - rhs).norm() / (1.0 + lhs.norm());
    out.ok = out.unitarity_error <= tolerance && out.model_error <= tolerance;
    if (!out.ok) {
        out.diagnostic = "unitarity error " + std::to_string(out.unitarity_error) + ", model error " +
                         std::to_string(out.model_error) + " exceed tolerance " +
                         std::to_string(tolerance);
    }
    return out;
}

inline EquivalenceCheck verify_rss_equivalence(const Scenario& scenario, const ChannelParams& params,
                                               double tolerance) {
    return check_rss_equivalence(scenario.anchors, scenario.target, params, tolerance);
}

}  // namespace drss
