#pragma once

#include "drss/scenario.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <string>

namespace drss {

enum class Parameterization {
    location,          ///< theta = x
    location_and_ple,  ///< theta = [x; gamma]
    ple,               ///< theta = gamma
};

enum class CrlbKind {
    joint_location,      ///< location bound when the PLE is also unknown
    joint_ple,           ///< PLE bound when the location is also unknown
    location_known_ple,  ///< location bound with a known PLE
    ple_known_location,  ///< PLE bound with a known location
};

inline CrlbKind parse_crlb_kind(const std::string& s) {
    if (s == "joint_location") return CrlbKind::joint_location;
    if (s == "joint_ple") return CrlbKind::joint_ple;
    if (s == "location_known_ple") return CrlbKind::location_known_ple;
    if (s == "ple_known_location") return CrlbKind::ple_known_location;
    throw Error(ErrorCode::config, "unknown CRLB kind '" + s + "'");
}

struct CrlbRequest {
    Scenario scenario;
    double gamma = 4.0;
    double sigma_n2 = 1.0;
    CrlbKind which = CrlbKind::location_known_ple;
};

namespace detail {

// The bound does not depend on which anchor is used as reference: changing
// it is an invertible linear map of the DRSS vector. Anchor 0 is used.
inline constexpr int kCrlbReference = 0;

inline void check_crlb_inputs(const Scenario& s, double gamma, double sigma_n2) {
    validate(s);
    require(std::isfinite(gamma) && gamma > 0.0, ErrorCode::invalid_argument, "gamma must be positive");
    require(std::isfinite(sigma_n2) && sigma_n2 > 0.0, ErrorCode::invalid_argument, "sigma_n2 must be positive");
}

}  // namespace detail

/// Mean DRSS vector: mu_i = -10 gamma log10(|x - s_i| / |x - s_ref|) over the
/// non-reference anchors in ascending id order.
inline Vector mean_drss(const Matrix& anchors, const Vector& x, double gamma) {
    const int ref = detail::kCrlbReference;
    const double d_ref = (x - anchors.row(ref).transpose()).norm();
    detail::require(d_ref > 1e-9, ErrorCode::coincident_points, "target coincides with an anchor");
    Vector mu(anchors.rows() - 1);
    for (Eigen::Index i = 1; i < anchors.rows(); ++i) {
        const double di = (x - anchors.row(i).transpose()).norm();
        detail::require(di > 1e-9, ErrorCode::coincident_points, "target coincides with an anchor");
        mu(i - 1) = -10.0 * gamma * std::log10(di / d_ref);
    }
    return mu;
}

/// d mu / d x, one column per coordinate.
inline Matrix drss_location_jacobian(const Matrix& anchors, const Vector& x, double gamma) {
    const int ref = detail::kCrlbReference;
    const Vector r_ref = x - anchors.row(ref).transpose();
    const double d_ref2 = r_ref.squaredNorm();
    detail::require(d_ref2 > 1e-18, ErrorCode::coincident_points, "target coincides with an anchor");
    const double scale = -10.0 * gamma / std::log(10.0);
    Matrix jac(anchors.rows() - 1, x.size());
    for (Eigen::Index i = 1; i < anchors.rows(); ++i) {
        const Vector ri = x - anchors.row(i).transpose();
        const double di2 = ri.squaredNorm();
        detail::require(di2 > 1e-18, ErrorCode::coincident_points, "target coincides with an anchor");
        jac.row(i - 1) = scale * (ri / di2 - r_ref / d_ref2).transpose();
    }
    return jac;
}

/// d mu / d gamma.
inline Vector drss_ple_gradient(const Matrix& anchors, const Vector& x) {
    return mean_drss(anchors, x, 1.0);
}

/// Fisher information of the DRSS vector, whose covariance is
/// sigma_n2 * Gamma Gamma' with inverse (I - 1 1' / N) / sigma_n2.
inline Matrix fim(const Scenario& s, double gamma, double sigma_n2, Parameterization param) {
    detail::check_crlb_inputs(s, gamma, sigma_n2);
    const int d = s.dimension();
    const auto rows = s.n_anchors() - 1;

    Matrix g;
    switch (param) {
        case Parameterization::location:
            g = drss_location_jacobian(s.anchors, s.target, gamma);
            break;
        case Parameterization::location_and_ple:
            g.resize(rows, d + 1);
            g.leftCols(d) = drss_location_jacobian(s.anchors, s.target, gamma);
            g.col(d) = drss_ple_gradient(s.anchors, s.target);
            break;
        case Parameterization::ple:
            g = drss_ple_gradient(s.anchors, s.target);
            break;
    }
    const double n = static_cast<double>(s.n_anchors());
    // G' (I - 1 1'/N) G without forming the projector.
    const Eigen::RowVectorXd col_sum = g.colwise().sum();
    Matrix j = g.transpose() * g - (col_sum.transpose() * col_sum) / n;
    j /= sigma_n2;
    return 0.5 * (j + j.transpose());
}

inline double crlb(const CrlbRequest& req) {
    const int d = req.scenario.dimension();
    const auto param = [&] {
        switch (req.which) {
            case CrlbKind::joint_location:
            case CrlbKind::joint_ple: return Parameterization::location_and_ple;
            case CrlbKind::location_known_ple: return Parameterization::location;
            case CrlbKind::ple_known_location: return Parameterization::ple;
        }
        return Parameterization::location;
    }();
    const Matrix j = fim(req.scenario, req.gamma, req.sigma_n2, param);

    if (req.which == CrlbKind::ple_known_location) {
        detail::require(j(0, 0) > 0.0, ErrorCode::singular_model, "PLE is not identifiable at this location");
        return std::sqrt(1.0 / j(0, 0));
    }
    Eigen::LDLT<Matrix> ldlt(j);
    const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(j, Eigen::EigenvaluesOnly).eigenvalues();
    detail::require(ldlt.info() == Eigen::Success && ev(0) > 1e-12 * std::max(1.0, ev(ev.size() - 1)),
                    ErrorCode::singular_model, "Fisher information is singular for this geometry");
    const Matrix inv = ldlt.solve(Matrix::Identity(j.rows(), j.cols()));
    if (req.which == CrlbKind::joint_ple) return std::sqrt(inv(d, d));
    return std::sqrt(inv.diagonal().head(d).sum());
}

inline double crlb(const Scenario& s, double gamma, double sigma_n2, CrlbKind which) {
    return crlb(CrlbRequest{s, gamma, sigma_n2, which});
}

}  // namespace drss
