#pragma once

#include "drss/model.hpp"
#include "drss/sdp.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <optional>
#include <string>
#include <vector>

namespace drss {

struct EstimateDiagnostics {
    int iterations = 0;
    double residual = 0.0;              ///< |Phi theta - rho|
    std::optional<double> lambda;       ///< Lagrange multiplier (LE)
    std::optional<double> zeta;         ///< uncertainty bound used (robust estimators)
    std::optional<double> slack_t;      ///< worst-case squared residual bound (robust estimators)
    std::optional<double> slack_alpha;  ///< S-procedure multiplier (robust estimators)
    std::string status = "ok";
    bool ill_conditioned = false;       ///< pseudo-inverse path was taken
    std::vector<Vector> x_history;      ///< location per BCD iteration
    std::vector<double> gamma_history;  ///< PLE per BCD iteration
};

struct LocationEstimate {
    Vector x_hat;
    Vector theta_hat;
    std::optional<double> gamma_hat;
    std::string method;
    EstimateDiagnostics diagnostics;
};

inline constexpr double kConditionGuard = 1e12;

namespace detail {

inline LocationEstimate make_estimate(const WhitenedModel& model, Vector theta, std::string method) {
    LocationEstimate e;
    const int d = model.dimension();
    e.diagnostics.residual = (model.phi * theta - model.rho).norm();
    e.x_hat = theta.head(d);
    e.theta_hat = std::move(theta);
    e.method = std::move(method);
    return e;
}

inline void check_model(const WhitenedModel& model) {
    require(model.phi.cols() >= 2 && model.phi.rows() == model.rho.size(), ErrorCode::invalid_argument,
            "malformed whitened model");
    require(model.phi.allFinite() && model.rho.allFinite(), ErrorCode::invalid_argument,
            "non-finite whitened model");
}

}  // namespace detail

/// Unconstrained least squares over theta = [x; |x|^2].
inline LocationEstimate u_blue(const WhitenedModel& model) {
    detail::check_model(model);
    Eigen::JacobiSVD<Matrix> svd(model.phi, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector sv = svd.singularValues();
    const double smax = sv(0);
    const double smin = sv(sv.size() - 1);
    detail::require(smax > 0.0 && smin > smax * 1e-13, ErrorCode::singular_model,
                    "whitened regressor is rank deficient");
    const double cond_normal = (smax / smin) * (smax / smin);

    Vector theta;
    bool ill = false;
    if (cond_normal > kConditionGuard) {
        theta = svd.solve(model.rho);
        ill = true;
    } else {
        theta = model.phi.colPivHouseholderQr().solve(model.rho);
    }
    auto e = detail::make_estimate(model, std::move(theta), "u_blue");
    e.diagnostics.ill_conditioned = ill;
    if (ill) e.diagnostics.status = "ill_conditioned";
    return e;
}

/// One Gauss-Newton refinement of the unconstrained estimate toward the
/// manifold theta_{d+1} = |theta_{1:d}|^2.
inline LocationEstimate a_blue(const WhitenedModel& model) {
    const LocationEstimate u = u_blue(model);
    const int d = model.dimension();
    const Vector& xu = u.x_hat;

    Vector tau = Vector::Zero(d + 1);
    tau(d) = xu.squaredNorm() - u.theta_hat(d);
    Matrix g(d + 1, d);
    g.topRows(d).setIdentity();
    g.row(d) = 2.0 * xu.transpose();

    const Matrix normal = model.phi.transpose() * model.phi;
    const Matrix reduced = g.transpose() * normal * g;
    Eigen::LDLT<Matrix> ldlt(reduced);
    const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(reduced, Eigen::EigenvaluesOnly).eigenvalues();
    detail::require(ldlt.info() == Eigen::Success && ev(0) > ev(ev.size() - 1) / kConditionGuard,
                    ErrorCode::singular_model, "reduced normal matrix G'Phi'PhiG is singular");

    const Vector x = xu - ldlt.solve(g.transpose() * normal * tau);
    auto e = detail::make_estimate(model, augmented_theta(x), "a_blue");
    e.diagnostics.ill_conditioned = u.diagnostics.ill_conditioned;
    e.diagnostics.status = u.diagnostics.status;
    return e;
}

/// Secular function of the equality-constrained least-squares problem.
///
/// For multiplier lambda, theta(lambda) = (Phi'Phi + lambda A)^{-1}(Phi'rho - lambda b)
/// with A = diag(I_d, 0) and b = [0; -1/2], and
/// f(lambda) = theta'A theta + 2 b'theta = |theta_{1:d}|^2 - theta_{d+1}.
class LagrangianSecular {
public:
    explicit LagrangianSecular(const WhitenedModel& model)
        : d_(model.dimension()), normal_(model.phi.transpose() * model.phi),
          rhs_(model.phi.transpose() * model.rho) {
        Eigen::LLT<Matrix> llt(normal_);
        detail::require(llt.info() == Eigen::Success, ErrorCode::singular_model,
                        "Phi'Phi is not positive definite");
        a_ = Matrix::Zero(d_ + 1, d_ + 1);
        a_.topLeftCorner(d_, d_).setIdentity();
        b_ = Vector::Zero(d_ + 1);
        b_(d_) = -0.5;
        // Largest eigenvalue of (Phi'Phi)^{-1/2} A (Phi'Phi)^{-1/2}.
        Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(a_, normal_, Eigen::EigenvaluesOnly);
        detail::require(ges.info() == Eigen::Success, ErrorCode::singular_model,
                        "generalized eigenvalue problem failed");
        lambda_max_ = ges.eigenvalues().maxCoeff();
        detail::require(lambda_max_ > 0.0, ErrorCode::singular_model, "lambda_max is not positive");
    }

    double lambda_max() const { return lambda_max_; }
    double lower_bound() const { return -1.0 / lambda_max_; }
    const Matrix& a() const { return a_; }
    const Matrix& normal() const { return normal_; }

    Vector theta(double lambda) const {
        // Stationarity of |Phi theta - rho|^2 + lambda (theta'A theta + 2 b'theta).
        return (normal_ + lambda * a_).ldlt().solve(rhs_ - lambda * b_);
    }

    double f(const Vector& theta) const { return theta.dot(a_ * theta) + 2.0 * b_.dot(theta); }
    double f(double lambda) const { return f(theta(lambda)); }

private:
    int d_;
    Matrix normal_;
    Vector rhs_;
    Matrix a_;
    Vector b_;
    double lambda_max_ = 0.0;
};

/// Stopping threshold on |f|: f = |x|^2 - r is a difference of two terms of
/// size |x|^2, so `tol` is taken relative to 1 + |x|^2.
inline double secular_tolerance(const Vector& theta, int d, double tol) {
    return tol * (1.0 + theta.head(d).squaredNorm());
}

/// Lagrangian estimator: the global minimiser of |Phi theta - rho|^2 subject
/// to theta_{d+1} = |theta_{1:d}|^2, found by bisection on the multiplier
/// over (-1/lambda_max, inf) where the secular function is strictly
/// decreasing. See secular_tolerance for the meaning of `tol`.
inline LocationEstimate le(const WhitenedModel& model, double tol = 1e-10) {
    detail::check_model(model);
    detail::require(tol > 0.0, ErrorCode::invalid_argument, "tolerance must be positive");
    const LagrangianSecular sec(model);

    const double lmax = sec.lambda_max();
    const double delta = 1e-9 * (1.0 + 1.0 / lmax);
    double lo = sec.lower_bound() + delta;
    const double f_lo = sec.f(lo);
    if (f_lo < 0.0)
        throw Error(ErrorCode::hard_case, "secular root lies at the boundary of the multiplier interval");

    double hi = 1.0;
    int doublings = 0;
    double f_hi = sec.f(hi);
    while (f_hi > 0.0) {
        detail::require(++doublings <= 200, ErrorCode::bracket_not_found,
                        "no sign change of the secular function after 200 doublings");
        lo = std::max(lo, hi);
        hi *= 2.0;
        f_hi = sec.f(hi);
    }

    double lambda = lo;
    Vector theta = sec.theta(lambda);
    double f_val = sec.f(theta);
    int iterations = 0;
    auto converged = [&](double fv, const Vector& th) {
        return std::abs(fv) <= secular_tolerance(th, model.dimension(), tol);
    };
    if (!converged(f_val, theta)) {
        for (iterations = 1; iterations <= 200; ++iterations) {
            lambda = 0.5 * (lo + hi);
            theta = sec.theta(lambda);
            f_val = sec.f(theta);
            if (converged(f_val, theta)) break;
            if (f_val > 0.0)
                lo = lambda;
            else
                hi = lambda;
            if (hi - lo <= tol * (1.0 + std::abs(lambda))) break;
        }
    }

    auto e = detail::make_estimate(model, std::move(theta), "le");
    e.diagnostics.lambda = lambda;
    e.diagnostics.iterations = iterations;
    return e;
}

/// Uncertainty bound from a total-least-squares correction of [A b]: the
/// smallest singular value of the augmented matrix is zeroed and the bound is
/// the Frobenius distance between A and the corrected columns.
inline double zeta_tls(const Matrix& a, const Vector& b) {
    const auto k = a.cols();
    detail::require(a.rows() == b.size(), ErrorCode::invalid_argument, "row count mismatch");
    detail::require(a.rows() >= k + 1, ErrorCode::invalid_argument,
                    "total least squares needs at least cols + 1 rows");
    Matrix aug(a.rows(), k + 1);
    aug << a, b;
    Eigen::JacobiSVD<Matrix> svd(aug, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vector sv = svd.singularValues();
    sv(k) = 0.0;
    const Matrix corrected = svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
    return (a - corrected.leftCols(k)).norm();
}

struct RobustOpts {
    std::optional<double> zeta;  ///< defaults to the total-least-squares bound
    sdp::SdpOptions solver{1e-9, 1e-9, 200};
};

namespace detail {

// Variable and residual scaling applied by congruence: the solver works on
// theta' = theta ./ col and t' = t / res^2. The feasible set is unchanged.
struct RobustScaling {
    Vector col;
    double res = 1.0;
};

inline RobustScaling unit_scaling(Eigen::Index k) { return {Vector::Ones(k), 1.0}; }

// Robust least-squares LMI over y = [theta; t; alpha]:
//   [(1-alpha) I      A theta - b     0        ]
//   [(A theta - b)'   t               -zeta theta']  >= 0
//   [0                -zeta theta     alpha I  ]
inline sdp::LmiBlock robust_residual_block(const Matrix& a, const Vector& b, double zeta,
                                           const RobustScaling& sc) {
    const auto rows = a.rows();
    const auto k = a.cols();
    const auto n = rows + 1 + k;
    const auto n_vars = k + 2;
    sdp::LmiBlock blk;
    blk.f0 = Matrix::Zero(n, n);
    blk.f0.topLeftCorner(rows, rows).setIdentity();
    blk.f0.block(0, rows, rows, 1) = -b / sc.res;
    blk.f0.block(rows, 0, 1, rows) = -b.transpose() / sc.res;
    blk.coeffs.assign(static_cast<std::size_t>(n_vars), Matrix::Zero(n, n));
    for (Eigen::Index j = 0; j < k; ++j) {
        Matrix& f = blk.coeffs[static_cast<std::size_t>(j)];
        const double w = sc.col(j) / sc.res;
        f.block(0, rows, rows, 1) = w * a.col(j);
        f.block(rows, 0, 1, rows) = w * a.col(j).transpose();
        f(rows, rows + 1 + j) = -zeta * w;
        f(rows + 1 + j, rows) = -zeta * w;
    }
    Matrix& ft = blk.coeffs[static_cast<std::size_t>(k)];
    ft(rows, rows) = 1.0;
    Matrix& fa = blk.coeffs[static_cast<std::size_t>(k + 1)];
    fa.topLeftCorner(rows, rows) = -Matrix::Identity(rows, rows);
    fa.bottomRightCorner(k, k).setIdentity();
    return blk;
}

inline sdp::SdpProblem robust_ls_problem(const Matrix& a, const Vector& b, double zeta,
                                         const RobustScaling& sc) {
    sdp::SdpProblem p;
    const auto k = a.cols();
    p.objective = Vector::Zero(k + 2);
    p.objective(k) = 1.0;
    p.blocks.push_back(robust_residual_block(a, b, zeta, sc));
    return p;
}

// Relaxed manifold constraint [I_d x; x' r] >= 0 over y = [x; r; t; alpha].
// Invariant under x -> x / L, r -> r / L^2.
inline sdp::LmiBlock relaxed_manifold_block(int d, int n_vars) {
    sdp::LmiBlock blk;
    blk.f0 = Matrix::Zero(d + 1, d + 1);
    blk.f0.topLeftCorner(d, d).setIdentity();
    blk.coeffs.assign(static_cast<std::size_t>(n_vars), Matrix::Zero(d + 1, d + 1));
    for (int j = 0; j < d; ++j) {
        blk.coeffs[static_cast<std::size_t>(j)](j, d) = 1.0;
        blk.coeffs[static_cast<std::size_t>(j)](d, j) = 1.0;
    }
    blk.coeffs[static_cast<std::size_t>(d)](d, d) = 1.0;
    return blk;
}

// Length scale L of a location model: x-columns of Phi grow like L and rho
// like L^2, so theta is scaled by [L, ..., L, L^2]. The residual is left in
// its own units; scaling it down would loosen the absolute accuracy of t.
inline RobustScaling location_scaling(const Matrix& phi, const Vector& rho) {
    const auto d = phi.cols() - 1;
    const double len = std::max({1.0, 0.5 * phi.leftCols(d).cwiseAbs().maxCoeff(),
                                 std::sqrt(rho.cwiseAbs().maxCoeff())});
    RobustScaling sc;
    sc.col = Vector::Constant(d + 1, len);
    sc.col(d) = len * len;
    sc.res = 1.0;
    return sc;
}

inline sdp::SdpProblem location_problem(const Matrix& phi, const Vector& rho, double zeta,
                                        const RobustScaling& sc) {
    auto p = robust_ls_problem(phi, rho, zeta, sc);
    p.blocks.push_back(relaxed_manifold_block(static_cast<int>(phi.cols()) - 1, p.n_vars()));
    return p;
}

// Strictly feasible point of the (scaled) robust problem at theta' with
// alpha = 1/2: the residual block is then positive definite once
// t > 2 (|A theta - b|^2 + zeta^2 |theta|^2).
inline Vector robust_start(const Matrix& a, const Vector& b, double zeta, const RobustScaling& sc,
                           const Vector& theta_scaled) {
    const auto k = a.cols();
    const Vector v = (a * theta_scaled.cwiseProduct(sc.col) - b) / sc.res;
    const double w = zeta * (theta_scaled.cwiseProduct(sc.col) / sc.res).norm();
    Vector y(k + 2);
    y << theta_scaled, 4.0 * (v.squaredNorm() + w * w) + 1.0, 0.5;
    return y;
}

// Maps a solution of the scaled problem back to y = [theta; t; alpha].
inline Vector unscale(const Vector& y, const RobustScaling& sc) {
    const auto k = sc.col.size();
    Vector out = y;
    out.head(k) = y.head(k).cwiseProduct(sc.col);
    out(k) = y(k) * sc.res * sc.res;
    return out;
}

inline void require_solved(const sdp::SdpSolution& sol, const std::string& what) {
    if (sol.status == sdp::SdpStatus::infeasible || sol.status == sdp::SdpStatus::numerical_failure)
        throw Error(ErrorCode::solver_failure,
                    what + " SDP returned " + sdp::to_string(sol.status) + " after " +
                        std::to_string(sol.iterations) + " iterations");
}

}  // namespace detail

/// The robust location SDP in its original units over y = [theta; t; alpha],
/// for inspection and certificate checks.
inline sdp::SdpProblem rsdpe_problem(const Matrix& phi, const Vector& rho, double zeta) {
    return detail::location_problem(phi, rho, zeta, detail::unit_scaling(phi.cols()));
}

/// Robust SDP estimator: minimises the worst-case residual over model
/// perturbations with spectral norm at most zeta, with the manifold
/// constraint relaxed to a 2x2 block LMI.
inline LocationEstimate rsdpe(const Matrix& phi, const Vector& rho, const RobustOpts& opts = {}) {
    detail::require(phi.rows() == rho.size() && phi.cols() >= 2, ErrorCode::invalid_argument,
                    "model dimensions are inconsistent");
    detail::require(phi.allFinite() && rho.allFinite(), ErrorCode::invalid_argument, "non-finite model");
    const double zeta = opts.zeta ? *opts.zeta : zeta_tls(phi, rho);
    detail::require(zeta >= 0.0 && std::isfinite(zeta), ErrorCode::invalid_argument, "zeta must be >= 0");

    const auto sc = detail::location_scaling(phi, rho);
    Vector theta0 = Vector::Zero(phi.cols());
    theta0(phi.cols() - 1) = 1.0;  // x = 0, r = 1 is interior to the manifold block
    const auto sol = sdp::solve(detail::location_problem(phi, rho, zeta, sc), opts.solver,
                                detail::robust_start(phi, rho, zeta, sc, theta0));
    detail::require_solved(sol, "robust location");
    const Vector y = detail::unscale(sol.y, sc);

    const int d = static_cast<int>(phi.cols()) - 1;
    LocationEstimate e;
    e.theta_hat = y.head(d + 1);
    e.x_hat = e.theta_hat.head(d);
    e.method = "rsdpe";
    e.diagnostics.iterations = sol.iterations;
    e.diagnostics.residual = (phi * e.theta_hat - rho).norm();
    e.diagnostics.zeta = zeta;
    e.diagnostics.slack_t = y(d + 1);
    e.diagnostics.slack_alpha = y(d + 2);
    e.diagnostics.status = sdp::to_string(sol.status);
    return e;
}

inline LocationEstimate rsdpe(const WhitenedModel& model, const RobustOpts& opts = {}) {
    return rsdpe(model.phi, model.rho, opts);
}

/// Robust scalar PLE update: minimises the worst-case residual of
/// c = dvec * gamma over perturbations of dvec bounded by zeta. The
/// multiplier block is 1x1, matching the scalar unknown.
inline sdp::SdpProblem ple_problem(const PleModel& ple, double zeta) {
    Matrix a(ple.dvec.size(), 1);
    a.col(0) = ple.dvec;
    return detail::robust_ls_problem(a, ple.c, zeta, detail::unit_scaling(1));
}

inline double robust_ple_step(const PleModel& ple, double zeta, const sdp::SdpOptions& solver) {
    Matrix a(ple.dvec.size(), 1);
    a.col(0) = ple.dvec;
    detail::RobustScaling sc = detail::unit_scaling(1);
    sc.res = std::max(1.0, ple.c.cwiseAbs().maxCoeff());
    const auto sol = sdp::solve(detail::robust_ls_problem(a, ple.c, zeta, sc), solver,
                                detail::robust_start(a, ple.c, zeta, sc, Vector::Zero(1)));
    detail::require_solved(sol, "robust PLE");
    return detail::unscale(sol.y, sc)(0);
}

struct BcdOpts {
    double gamma_init = 4.0;
    double xi = 1e-3;                    ///< stop when the location moves less than this (m)
    int max_iter = 50;
    std::optional<Vector> x_init;        ///< optional initial location for the first stopping test
    sdp::SdpOptions solver{1e-9, 1e-9, 200};
};

inline constexpr double kMinPle = 1e-3;

/// Joint location / PLE estimation by alternating the robust location SDP
/// (at the current PLE) and the robust scalar PLE SDP (at the current
/// location). Both uncertainty bounds are recomputed from the total
/// least-squares recipe at every iteration.
inline LocationEstimate rsdp_bcde(const DrssSampleSet& drss, const Matrix& anchors, const BcdOpts& opts = {}) {
    detail::require(opts.gamma_init > 0.0, ErrorCode::invalid_argument, "gamma_init must be positive");
    detail::require(opts.xi > 0.0 || opts.max_iter >= 1, ErrorCode::invalid_argument, "invalid stopping rule");
    detail::require(opts.max_iter >= 1, ErrorCode::invalid_argument, "max_iter must be >= 1");
    const int d = static_cast<int>(anchors.cols());
    detail::require(anchors.rows() >= d + 3, ErrorCode::invalid_argument, "need at least d + 3 anchors");

    LocationEstimate e;
    e.method = "rsdp_bcde";
    double gamma = opts.gamma_init;
    std::optional<Vector> x_prev = opts.x_init;
    e.diagnostics.status = "max_iter";

    for (int k = 1; k <= opts.max_iter; ++k) {
        Vector theta;
        try {
            const WhitenedModel model = build_model(drss, anchors, gamma);
            RobustOpts ro;
            ro.solver = opts.solver;
            const auto loc = rsdpe(model, ro);
            theta = loc.theta_hat;
            e.diagnostics.residual = loc.diagnostics.residual;
            e.diagnostics.zeta = loc.diagnostics.zeta;
        } catch (const Error& err) {
            if (k == 1) throw;
            e.diagnostics.status = std::string("location_step_failed: ") + err.what();
            break;
        }
        const Vector x = theta.head(d);

        double gamma_next = gamma;
        try {
            const PleModel ple = build_ple_model(x, anchors, drss);
            Matrix dmat(ple.dvec.size(), 1);
            dmat.col(0) = ple.dvec;
            gamma_next = robust_ple_step(ple, zeta_tls(dmat, ple.c), opts.solver);
        } catch (const Error& err) {
            e.theta_hat = theta;
            e.x_hat = x;
            e.gamma_hat = gamma;
            e.diagnostics.iterations = k;
            e.diagnostics.x_history.push_back(x);
            e.diagnostics.gamma_history.push_back(gamma);
            e.diagnostics.status = std::string("ple_step_failed: ") + err.what();
            break;
        }

        e.theta_hat = theta;
        e.x_hat = x;
        e.diagnostics.iterations = k;
        e.diagnostics.x_history.push_back(x);
        e.diagnostics.gamma_history.push_back(gamma_next);

        if (!(gamma_next > kMinPle)) {
            e.gamma_hat = gamma;
            e.diagnostics.status = "degenerate_ple";
            break;
        }
        gamma = gamma_next;
        e.gamma_hat = gamma;

        if (x_prev && (x - *x_prev).norm() <= opts.xi) {
            e.diagnostics.status = "converged";
            break;
        }
        x_prev = x;
    }
    return e;
}

}  // namespace drss
