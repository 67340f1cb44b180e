#pragma once

#include "drss/common.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace drss::sdp {

/// One linear matrix inequality F0 + sum_k y_k F_k >= 0.
struct LmiBlock {
    Matrix f0;
    std::vector<Matrix> coeffs;  ///< one symmetric matrix per decision variable

    Eigen::Index size() const { return f0.rows(); }
};

/// minimize objective' y  subject to every block being positive semidefinite.
struct SdpProblem {
    Vector objective;
    std::vector<LmiBlock> blocks;

    int n_vars() const { return static_cast<int>(objective.size()); }
};

struct SdpOptions {
    double feas_tol = 1e-8;   ///< required min eigenvalue of every block is >= -feas_tol
    double gap_tol = 1e-7;    ///< relative duality gap
    int max_iter = 200;       ///< Newton steps over both phases
    std::ostream* trace = nullptr;  ///< per-iteration log, if set
};

enum class SdpStatus { optimal, infeasible, max_iter, numerical_failure };

inline const char* to_string(SdpStatus s) {
    switch (s) {
        case SdpStatus::optimal: return "optimal";
        case SdpStatus::infeasible: return "infeasible";
        case SdpStatus::max_iter: return "max_iter";
        case SdpStatus::numerical_failure: return "numerical_failure";
    }
    return "unknown";
}

struct SdpSolution {
    Vector y;
    SdpStatus status = SdpStatus::numerical_failure;
    int iterations = 0;
    double duality_gap = std::numeric_limits<double>::infinity();  ///< relative gap at y
    double objective = 0.0;
    std::vector<Matrix> dual;           ///< dual matrix per block
    std::vector<double> gap_history;    ///< certified absolute gap at each centred point
};

/// Smallest eigenvalue of a symmetric matrix (lower triangle is used).
inline double min_eig(const Matrix& a) {
    detail::require(a.rows() == a.cols() && a.rows() > 0, ErrorCode::invalid_argument,
                    "min_eig needs a non-empty square matrix");
    Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
    detail::require(es.info() == Eigen::Success, ErrorCode::solver_failure,
                    "eigenvalue decomposition failed");
    return es.eigenvalues()(0);
}

inline Matrix evaluate_block(const LmiBlock& block, const Vector& y) {
    Matrix f = block.f0;
    for (std::size_t k = 0; k < block.coeffs.size(); ++k) f += y(static_cast<Eigen::Index>(k)) * block.coeffs[k];
    return f;
}

inline void validate(const SdpProblem& problem) {
    const int m = problem.n_vars();
    detail::require(m >= 1, ErrorCode::invalid_argument, "SDP needs at least one variable");
    detail::require(problem.objective.allFinite(), ErrorCode::invalid_argument, "non-finite objective");
    detail::require(!problem.blocks.empty(), ErrorCode::invalid_argument, "SDP needs at least one block");
    auto check_symmetric = [](const Matrix& f, Eigen::Index n) {
        detail::require(f.rows() == n && f.cols() == n, ErrorCode::invalid_argument,
                        "LMI coefficient has wrong shape");
        detail::require(f.allFinite(), ErrorCode::invalid_argument, "non-finite LMI coefficient");
        detail::require((f - f.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + f.cwiseAbs().maxCoeff()),
                        ErrorCode::invalid_argument, "LMI coefficient is not symmetric");
    };
    for (const auto& block : problem.blocks) {
        detail::require(block.size() >= 1, ErrorCode::invalid_argument, "empty LMI block");
        detail::require(static_cast<int>(block.coeffs.size()) == m, ErrorCode::invalid_argument,
                        "LMI block needs one coefficient per variable");
        check_symmetric(block.f0, block.size());
        for (const auto& f : block.coeffs) check_symmetric(f, block.size());
    }
}

namespace detail {

using drss::detail::require;

inline double trace_product(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b).sum(); }

// Barrier state at one point y: Cholesky factors L_b of every block and the
// congruence-scaled coefficients G_bk = L_b^{-1} F_bk L_b^{-T}. With these the
// barrier gradient is tr(G_bk) and its Hessian is sum_b <G_bj, G_bk>.
struct BarrierPoint {
    std::vector<Matrix> l;
    std::vector<std::vector<Matrix>> g;
    Matrix a;       // column k stacks vec(G_bk) over the blocks
    Vector grad;    // sum_b tr(G_bk)
};

inline bool factor_blocks(const SdpProblem& problem, const Vector& y, std::vector<Matrix>& l) {
    l.resize(problem.blocks.size());
    for (std::size_t b = 0; b < problem.blocks.size(); ++b) {
        Eigen::LLT<Matrix> llt(evaluate_block(problem.blocks[b], y));
        if (llt.info() != Eigen::Success) return false;
        l[b] = llt.matrixL();
        if (!l[b].allFinite() || l[b].diagonal().minCoeff() <= 0.0) return false;
    }
    return true;
}

inline bool barrier_point(const SdpProblem& problem, const Vector& y, Eigen::Index n_sq, BarrierPoint& pt) {
    if (!factor_blocks(problem, y, pt.l)) return false;
    const int m = problem.n_vars();
    pt.g.assign(problem.blocks.size(), {});
    pt.a.resize(n_sq, m);
    pt.grad.setZero(m);
    Eigen::Index offset = 0;
    for (std::size_t b = 0; b < problem.blocks.size(); ++b) {
        const auto& blk = problem.blocks[b];
        const auto n = blk.size();
        const auto lower = pt.l[b].triangularView<Eigen::Lower>();
        pt.g[b].resize(static_cast<std::size_t>(m));
        for (int k = 0; k < m; ++k) {
            Matrix t = lower.solve(blk.coeffs[static_cast<std::size_t>(k)]);
            t = lower.solve(t.transpose()).eval();
            Matrix gk = 0.5 * (t + t.transpose());
            pt.grad(k) += gk.trace();
            pt.a.col(k).segment(offset, n * n) = Eigen::Map<const Vector>(gk.data(), n * n);
            pt.g[b][static_cast<std::size_t>(k)] = std::move(gk);
        }
        offset += n * n;
    }
    return pt.a.allFinite();
}

// Largest step alpha in (0, cap] keeping I + alpha * dG_b positive definite in
// every block, with a safety fraction.
inline double feasible_step(const std::vector<Matrix>& dg, double cap) {
    double alpha = cap;
    for (const auto& m : dg) {
        const double lo = Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly).eigenvalues()(0);
        if (lo < 0.0) alpha = std::min(alpha, -0.95 / lo);
    }
    return alpha;
}

struct PathResult {
    Vector y;
    SdpStatus status = SdpStatus::numerical_failure;
    double relgap = std::numeric_limits<double>::infinity();
    double lower_bound = -std::numeric_limits<double>::infinity();
    std::vector<Matrix> dual;
    std::vector<double> gap_history;
    bool stopped_early = false;
};

// Follows the central path of  min c'y - mu * sum log det F_b(y)  from a
// strictly feasible y0, shrinking mu after each centred point. At a centred
// point the Newton step dy yields the dual matrices
//   X_b = mu L_b^{-T} (I - sum_k dy_k G_bk) L_b^{-1},
// which satisfy <F_bk, X> = c_k exactly and are PSD whenever the Newton
// decrement is below one, so every reported gap is certified.
template <class Stop>
PathResult follow_path(const SdpProblem& problem, Vector y, const SdpOptions& opts, int& iterations,
                       Stop&& stop, const char* label) {
    const int m = problem.n_vars();
    const Vector& c = problem.objective;
    Eigen::Index n_total = 0, n_sq = 0;
    for (const auto& b : problem.blocks) {
        n_total += b.size();
        n_sq += b.size() * b.size();
    }
    Vector e(n_sq);  // stacked vec(I)
    {
        Eigen::Index off = 0;
        for (const auto& b : problem.blocks) {
            const Matrix id = Matrix::Identity(b.size(), b.size());
            e.segment(off, b.size() * b.size()) = Eigen::Map<const Vector>(id.data(), b.size() * b.size());
            off += b.size() * b.size();
        }
    }

    PathResult out;
    out.y = y;
    BarrierPoint pt;
    if (!barrier_point(problem, y, n_sq, pt)) return out;

    Eigen::HouseholderQR<Matrix> qr;
    Matrix r;
    auto factor = [&] {
        qr.compute(pt.a);
        r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
        const Vector diag = r.diagonal().cwiseAbs();
        return diag.minCoeff() > 1e-14 * std::max(1.0, diag.maxCoeff());
    };
    if (!factor()) return out;
    auto r_upper = [&] { return r.triangularView<Eigen::Upper>(); };

    // Initial mu: the value for which y0 is closest to the central path in the
    // local norm, i.e. minimising |c/mu - grad|_{H^{-1}}.
    double mu;
    {
        const Vector rc = r_upper().transpose().solve(c);
        const Vector rg = r_upper().transpose().solve(pt.grad);
        const double inv_mu = rc.dot(rg) / std::max(rc.squaredNorm(), 1e-300);
        mu = (std::isfinite(inv_mu) && inv_mu > 0.0) ? 1.0 / inv_mu
                                                     : (1.0 + std::abs(c.dot(y))) / static_cast<double>(n_total);
    }
    const double y_limit = 1e12 * (1.0 + y.norm());

    while (iterations < opts.max_iter) {
        // Newton step for the barrier problem at this mu.
        const Vector qte = (qr.householderQ().transpose() * e).head(m);
        const Vector z = qte - r_upper().transpose().solve(c / mu);
        const Vector dy = r_upper().solve(z);
        const double decrement = z.norm();
        if (!dy.allFinite()) return out;

        std::vector<Matrix> dg(problem.blocks.size());
        for (std::size_t b = 0; b < problem.blocks.size(); ++b) {
            dg[b] = Matrix::Zero(problem.blocks[b].size(), problem.blocks[b].size());
            for (int k = 0; k < m; ++k) dg[b] += dy(k) * pt.g[b][static_cast<std::size_t>(k)];
        }

        if (decrement <= 0.25) {
            const double gap = mu * (static_cast<double>(n_total) - pt.grad.dot(dy));
            const double pobj = c.dot(y);
            const double dobj = pobj - gap;
            const double relgap = gap / (1.0 + std::abs(pobj) + std::abs(dobj));
            out.y = y;
            out.relgap = relgap;
            out.lower_bound = dobj;
            out.dual.resize(problem.blocks.size());
            for (std::size_t b = 0; b < problem.blocks.size(); ++b) {
                const auto n = problem.blocks[b].size();
                const Matrix inner = mu * (Matrix::Identity(n, n) - dg[b]);
                const Matrix lt = pt.l[b].transpose();
                const auto upper = lt.triangularView<Eigen::Upper>();
                Matrix t = upper.solve(inner);
                t = upper.solve(t.transpose()).eval();
                out.dual[b] = 0.5 * (t + t.transpose());
            }
            out.gap_history.push_back(gap);
            if (opts.trace)
                *opts.trace << label << " iter " << iterations << " mu " << mu << " obj " << pobj << " relgap "
                            << relgap << '\n';
            if (stop(out)) {
                out.stopped_early = true;
                out.status = SdpStatus::optimal;
                return out;
            }
            if (relgap <= opts.gap_tol) {
                out.status = SdpStatus::optimal;
                return out;
            }
            mu *= decrement < 0.1 ? 0.1 : 0.2;
            continue;
        }

        ++iterations;
        double alpha = feasible_step(dg, decrement < 1.0 ? 1.0 : 1.0 / (1.0 + decrement));
        bool moved = false;
        for (int tries = 0; tries < 30 && !moved; ++tries, alpha *= 0.5) {
            const Vector trial = y + alpha * dy;
            if (barrier_point(problem, trial, n_sq, pt)) {
                y = trial;
                moved = true;
            }
        }
        if (!moved || !factor()) {
            out.status = SdpStatus::numerical_failure;
            return out;
        }
        if (opts.trace)
            *opts.trace << label << " newton " << iterations << " mu " << mu << " decrement " << decrement
                        << " step " << alpha << '\n';
        PathResult probe;
        probe.y = y;
        if (stop(probe)) {
            out.y = y;
            out.stopped_early = true;
            out.status = SdpStatus::optimal;
            return out;
        }
        if (y.norm() > y_limit) {
            out.y = y;
            out.status = SdpStatus::infeasible;  // objective unbounded below
            return out;
        }
    }
    out.status = SdpStatus::max_iter;
    return out;
}

inline double min_block_eig(const SdpProblem& problem, const Vector& y) {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& b : problem.blocks) lo = std::min(lo, min_eig(evaluate_block(b, y)));
    return lo;
}

}  // namespace detail

/// Log-barrier path-following method with a phase-1 problem for a strictly
/// feasible start. Deterministic; intended for small dense blocks and a
/// handful of variables.
///
/// If `start` is given and strictly feasible it is used directly. Otherwise
/// phase 1 minimises s subject to F_b(y) + s I >= 0 and |y_k| <= kPhase1Box
/// from y = 0 until s < 0; a certified positive lower bound on s means the
/// problem is infeasible. Phase 2 follows the central path of the problem,
/// whose feasible sublevel sets must be bounded.
inline constexpr double kPhase1Box = 1e6;

inline SdpSolution solve(const SdpProblem& problem, const SdpOptions& opts = {},
                         const std::optional<Vector>& start = std::nullopt) {
    validate(problem);
    const int m = problem.n_vars();
    SdpSolution sol;
    sol.y = Vector::Zero(m);

    double scale = 1.0;
    for (const auto& b : problem.blocks) scale = std::max(scale, b.f0.cwiseAbs().maxCoeff());

    Vector y = Vector::Zero(m);
    bool have_start = false;
    if (start) {
        detail::require(start->size() == m, ErrorCode::invalid_argument, "start point has wrong size");
        std::vector<Matrix> l;
        if (start->allFinite() && detail::factor_blocks(problem, *start, l)) {
            y = *start;
            have_start = true;
        }
    }
    const double start_eig = have_start ? 1.0 : detail::min_block_eig(problem, y);
    if (!have_start && start_eig <= 1e-6 * scale) {
        SdpProblem phase1;
        phase1.objective = Vector::Zero(m + 1);
        phase1.objective(m) = 1.0;
        for (const auto& b : problem.blocks) {
            LmiBlock blk{b.f0, b.coeffs};
            blk.coeffs.push_back(Matrix::Identity(b.size(), b.size()));
            phase1.blocks.push_back(std::move(blk));
        }
        // Box |y_k| <= R keeps the phase-1 barrier problem bounded.
        LmiBlock box;
        box.f0 = kPhase1Box * Matrix::Identity(2 * m, 2 * m);
        for (int k = 0; k <= m; ++k) {
            Matrix f = Matrix::Zero(2 * m, 2 * m);
            if (k < m) {
                f(2 * k, 2 * k) = 1.0;
                f(2 * k + 1, 2 * k + 1) = -1.0;
            }
            box.coeffs.push_back(std::move(f));
        }
        phase1.blocks.push_back(std::move(box));

        Vector z(m + 1);
        z << Vector::Zero(m), -start_eig + std::max(1.0, 0.1 * std::abs(start_eig));
        SdpOptions p1 = opts;
        p1.gap_tol = std::min(opts.gap_tol, 1e-12);
        const auto res = detail::follow_path(
            phase1, z, p1, sol.iterations,
            [&](const detail::PathResult& r) {
                // Certified positive lower bound on s: no strictly feasible point.
                if (std::isfinite(r.lower_bound) && r.lower_bound > 0.0) return true;
                return r.y(m) < 0.0;
            },
            "phase1");
        if (res.status == SdpStatus::max_iter || res.status == SdpStatus::numerical_failure) {
            sol.status = res.status;
            return sol;
        }
        if (res.y(m) >= 0.0) {
            sol.status = SdpStatus::infeasible;
            return sol;
        }
        y = res.y.head(m);
    }

    const auto res = detail::follow_path(problem, y, opts, sol.iterations,
                                         [](const detail::PathResult&) { return false; }, "phase2");
    sol.y = res.y;
    sol.status = res.status;
    sol.objective = problem.objective.dot(res.y);
    sol.duality_gap = res.relgap;
    sol.dual = res.dual;
    sol.gap_history = res.gap_history;
    if (sol.status == SdpStatus::optimal && detail::min_block_eig(problem, sol.y) < -opts.feas_tol)
        sol.status = SdpStatus::numerical_failure;
    return sol;
}

// Plain-text problem format, used for offline cross-checking:
//
//   problem <name>
//   n_vars <m>
//   objective <c_1> ... <c_m>
//   blocks <count>
//   block <n>            (followed by m + 1 matrices of n rows: F0, F1, ..., Fm)
//   [optimum <value>]    (optional, reference optimum)
//   end

struct NamedProblem {
    std::string name;
    SdpProblem problem;
    double optimum = std::numeric_limits<double>::quiet_NaN();
};

inline void write_problem(std::ostream& out, const SdpProblem& problem, const std::string& name = "p") {
    out << std::setprecision(17);
    out << "problem " << name << '\n';
    out << "n_vars " << problem.n_vars() << '\n';
    out << "objective";
    for (Eigen::Index k = 0; k < problem.objective.size(); ++k) out << ' ' << problem.objective(k);
    out << '\n' << "blocks " << problem.blocks.size() << '\n';
    auto write_matrix = [&](const Matrix& f) {
        for (Eigen::Index i = 0; i < f.rows(); ++i) {
            for (Eigen::Index j = 0; j < f.cols(); ++j) out << (j ? " " : "") << f(i, j);
            out << '\n';
        }
    };
    for (const auto& block : problem.blocks) {
        out << "block " << block.size() << '\n';
        write_matrix(block.f0);
        for (const auto& f : block.coeffs) write_matrix(f);
    }
    out << "end\n";
}

/// Reads every problem record in the stream.
inline std::vector<NamedProblem> read_problems(std::istream& in) {
    std::vector<NamedProblem> out;
    std::string token;
    auto expect = [&](const std::string& want) {
        in >> token;
        drss::detail::require(static_cast<bool>(in) && token == want, ErrorCode::config,
                              "SDP dump: expected '" + want + "', got '" + token + "'");
    };
    while (in >> token) {
        if (!token.empty() && token[0] == '#') {
            std::getline(in, token);
            continue;
        }
        drss::detail::require(token == "problem", ErrorCode::config, "SDP dump: expected 'problem'");
        NamedProblem rec;
        in >> rec.name;
        int m = 0;
        expect("n_vars");
        in >> m;
        drss::detail::require(static_cast<bool>(in) && m >= 1, ErrorCode::config, "SDP dump: bad n_vars");
        expect("objective");
        rec.problem.objective.resize(m);
        for (int k = 0; k < m; ++k) in >> rec.problem.objective(k);
        std::size_t nblocks = 0;
        expect("blocks");
        in >> nblocks;
        for (std::size_t b = 0; b < nblocks; ++b) {
            expect("block");
            Eigen::Index n = 0;
            in >> n;
            drss::detail::require(static_cast<bool>(in) && n >= 1, ErrorCode::config, "SDP dump: bad block size");
            auto read_matrix = [&]() {
                Matrix f(n, n);
                for (Eigen::Index i = 0; i < n; ++i)
                    for (Eigen::Index j = 0; j < n; ++j) in >> f(i, j);
                return f;
            };
            LmiBlock block;
            block.f0 = read_matrix();
            for (int k = 0; k < m; ++k) block.coeffs.push_back(read_matrix());
            rec.problem.blocks.push_back(std::move(block));
        }
        in >> token;
        if (token == "optimum") {
            in >> rec.optimum;
            in >> token;
        }
        drss::detail::require(static_cast<bool>(in) && token == "end", ErrorCode::config,
                              "SDP dump: missing 'end'");
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace drss::sdp
