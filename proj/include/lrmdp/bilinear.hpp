// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

/**
 * Solvers for the bilinear program over two Euclidean balls
 *
 *     min  <a + x, b + y>   s.t.  ||x|| <= R_x,  ||y|| <= R_y.
 *
 * The problem is nonconvex, but written in z = [x; y] it is a quadratic
 * program with two quadratic constraints whose SDP relaxation is tight. Three
 * independent routes are provided:
 *
 *  - solve_sdp_route: lift to the SDP, solve it with a log-barrier interior
 *    point method on its three-variable dual, and read z off the optimal X.
 *  - solve_alternating: multi-start block coordinate descent using the
 *    closed-form minimizer of each block.
 *  - oracle_grid: brute-force search over the plane spanned by a and b, with
 *    the orthogonal complement handled in closed form.
 */

#include "lrmdp/core.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <optional>
#include <string>

namespace lrmdp {

struct BilinearBallProblem {
    Vec a;
    Vec b;
    double r_x = 0.0;
    double r_y = 0.0;

    Eigen::Index dim() const { return a.size(); }
};

inline void validate_problem(const BilinearBallProblem& p) {
    if (p.a.size() != p.b.size()) throw StructuralError("bilinear problem: a and b differ in length");
    if (p.a.size() == 0) throw StructuralError("bilinear problem: empty vectors");
    if (!(p.r_x >= 0.0) || !(p.r_y >= 0.0))
        throw ValidationError("bilinear problem: radii must be nonnegative");
    if (!p.a.allFinite() || !p.b.allFinite() || !std::isfinite(p.r_x) || !std::isfinite(p.r_y))
        throw ValidationError("bilinear problem: non-finite data");
}

inline double bilinear_objective(const BilinearBallProblem& p, const Vec& x, const Vec& y) {
    return (p.a + x).dot(p.b + y);
}

enum class InnerMethod { sdp, alternating, oracle, closed_form };

inline std::string to_string(InnerMethod m) {
    switch (m) {
    case InnerMethod::sdp: return "sdp";
    case InnerMethod::alternating: return "alternating";
    case InnerMethod::oracle: return "oracle";
    case InnerMethod::closed_form: return "closed_form";
    }
    return "unknown";
}

struct SolveReport {
    Vec x_star;
    Vec y_star;
    double value = 0.0;
    /// Valid lower bound on the optimum; -inf when nothing was certified.
    double certified_lower_bound = -std::numeric_limits<double>::infinity();
    InnerMethod method = InnerMethod::closed_form;
    int iterations = 0;
};

// ----------------------------------------------------------------------------
// QC2QP and SDP forms
// ----------------------------------------------------------------------------

struct Qc2qpInstance {
    Mat A;    ///< [[0, I/2], [I/2, 0]]
    Vec beta; ///< [b/2; a/2]
    double c = 0.0;
    Mat A_x; ///< diag(I, 0)
    Mat A_y; ///< diag(0, I)
    double r_x_sq = 0.0;
    double r_y_sq = 0.0;

    Eigen::Index dim() const { return A.rows() / 2; }
};

inline Qc2qpInstance to_qc2qp(const BilinearBallProblem& p) {
    validate_problem(p);
    const Eigen::Index d = p.dim();
    Qc2qpInstance q;
    q.A = Mat::Zero(2 * d, 2 * d);
    q.A.topRightCorner(d, d) = 0.5 * Mat::Identity(d, d);
    q.A.bottomLeftCorner(d, d) = 0.5 * Mat::Identity(d, d);
    q.beta.resize(2 * d);
    q.beta << 0.5 * p.b, 0.5 * p.a;
    q.c = p.a.dot(p.b);
    q.A_x = Mat::Zero(2 * d, 2 * d);
    q.A_x.topLeftCorner(d, d).setIdentity();
    q.A_y = Mat::Zero(2 * d, 2 * d);
    q.A_y.bottomRightCorner(d, d).setIdentity();
    q.r_x_sq = p.r_x * p.r_x;
    q.r_y_sq = p.r_y * p.r_y;
    return q;
}

/// z^T A z + 2 beta^T z + c.
inline double qc2qp_objective(const Qc2qpInstance& q, const Vec& z) {
    return z.dot(q.A * z) + 2.0 * q.beta.dot(z) + q.c;
}

struct SdpInstance {
    Mat C;  ///< [[A, beta], [beta^T, c]]
    Mat C0; ///< picks the bottom-right entry
    Mat Cx; ///< diag(A_x, -R_x^2)
    Mat Cy; ///< diag(A_y, -R_y^2)

    Eigen::Index size() const { return C.rows(); }
};

inline SdpInstance to_sdp(const Qc2qpInstance& q) {
    const Eigen::Index n = q.A.rows() + 1;
    SdpInstance s;
    s.C = Mat::Zero(n, n);
    s.C.topLeftCorner(n - 1, n - 1) = q.A;
    s.C.topRightCorner(n - 1, 1) = q.beta;
    s.C.bottomLeftCorner(1, n - 1) = q.beta.transpose();
    s.C(n - 1, n - 1) = q.c;
    s.C0 = Mat::Zero(n, n);
    s.C0(n - 1, n - 1) = 1.0;
    s.Cx = Mat::Zero(n, n);
    s.Cx.topLeftCorner(n - 1, n - 1) = q.A_x;
    s.Cx(n - 1, n - 1) = -q.r_x_sq;
    s.Cy = Mat::Zero(n, n);
    s.Cy.topLeftCorner(n - 1, n - 1) = q.A_y;
    s.Cy(n - 1, n - 1) = -q.r_y_sq;
    return s;
}

/// [z; 1][z; 1]^T.
inline Mat lift(const Vec& z) {
    Vec w(z.size() + 1);
    w << z, 1.0;
    return w * w.transpose();
}

// ----------------------------------------------------------------------------
// Interior point solver
// ----------------------------------------------------------------------------

struct SdpOptions {
    /// Stop once the duality gap (n+2)/t falls below gap_tol * (1 + |dual value|).
    /// Smaller values buy little: X = S^{-1}/t loses accuracy as S approaches singularity.
    double gap_tol = 1e-7;
    /// Centering stops when half the squared Newton decrement is below this.
    double newton_tol = 1e-18;
    double barrier_factor = 10.0;
    int max_newton_per_center = 500;
    int max_centers = 40;
};

struct SdpResult {
    Mat X;                 ///< primal solution, X = S(y)^{-1} / t on the central path
    double value = 0.0;    ///< tr(C X)
    double dual_bound = 0; ///< dual objective; a certified lower bound
    double mult_x = 0.0;   ///< multiplier of tr(Cx X) <= 0
    double mult_y = 0.0;   ///< multiplier of tr(Cy X) <= 0
    double gap = 0.0;      ///< (n + 2) / t at termination
    int iterations = 0;    ///< total Newton steps
};

namespace detail {

/// S(y) = C - lambda C0 + alpha Cx + beta Cy.
inline Mat dual_slack(const SdpInstance& s, const Eigen::Vector3d& y) {
    return s.C - y(0) * s.C0 + y(1) * s.Cx + y(2) * s.Cy;
}

/// Barrier objective t*lambda + logdet S + log alpha + log beta, or -inf if infeasible.
inline double dual_barrier(const SdpInstance& s, const Eigen::Vector3d& y, double t,
                           Eigen::LLT<Mat>* keep = nullptr) {
    if (!(y(1) > 0.0) || !(y(2) > 0.0)) return -std::numeric_limits<double>::infinity();
    Eigen::LLT<Mat> llt(dual_slack(s, y));
    if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    const auto diag = llt.matrixLLT().diagonal();
    if ((diag.array() <= 0.0).any()) return -std::numeric_limits<double>::infinity();
    const double logdet = 2.0 * diag.array().log().sum();
    if (keep) *keep = std::move(llt);
    return t * y(0) + logdet + std::log(y(1)) + std::log(y(2));
}

/// Barrier iterations on an instance assumed to be reasonably scaled.
inline SdpResult solve_sdp_scaled(const SdpInstance& s, const SdpOptions& opt) {
    const Eigen::Index n = s.size();
    if (s.C0.rows() != n || s.Cx.rows() != n || s.Cy.rows() != n)
        throw StructuralError("solve_sdp: matrix sizes differ");
    if (!(s.Cx(n - 1, n - 1) < 0.0) || !(s.Cy(n - 1, n - 1) < 0.0))
        throw ValidationError("solve_sdp: needs positive radii (strict feasibility)");

    // Strictly dual feasible start: alpha = beta = 1, lambda below the Schur bound.
    Eigen::Vector3d y(0.0, 1.0, 1.0);
    {
        Mat S0 = detail::dual_slack(s, y);
        const Mat M = S0.topLeftCorner(n - 1, n - 1);
        Eigen::LLT<Mat> llt(M);
        double boost = 1.0;
        while (llt.info() != Eigen::Success || (llt.matrixLLT().diagonal().array() <= 0).any()) {
            boost *= 2.0;
            y(1) = y(2) = boost;
            llt.compute(detail::dual_slack(s, y).topLeftCorner(n - 1, n - 1));
            if (boost > 1e12) throw SolverError("solve_sdp: could not find a dual feasible start");
        }
        S0 = detail::dual_slack(s, y);
        const Vec w = S0.topRightCorner(n - 1, 1);
        const double schur = S0(n - 1, n - 1) - w.dot(llt.solve(w));
        y(0) = schur - std::max(1.0, std::abs(schur));
    }

    const std::array<const Mat*, 3> dirs = {&s.C0, &s.Cx, &s.Cy};
    const std::array<double, 3> sign = {-1.0, 1.0, 1.0};

    double t = 1.0;
    int iterations = 0;
    Eigen::LLT<Mat> llt;
    Mat W;
    for (int center = 0; center < opt.max_centers; ++center) {
        detail::dual_barrier(s, y, t, &llt);
        bool centered = false;
        double prev_decrement = std::numeric_limits<double>::infinity();
        for (int it = 0; it < opt.max_newton_per_center; ++it) {
            ++iterations;
            W = llt.solve(Mat::Identity(n, n));
            std::array<Mat, 3> WA;
            for (int i = 0; i < 3; ++i) WA[i] = sign[i] * (W * (*dirs[i]));
            Eigen::Vector3d g;
            g(0) = t + WA[0].trace();
            g(1) = WA[1].trace() + 1.0 / y(1);
            g(2) = WA[2].trace() + 1.0 / y(2);
            Eigen::Matrix3d Hs; // negative Hessian, positive definite
            for (int i = 0; i < 3; ++i)
                for (int j = i; j < 3; ++j)
                    Hs(i, j) = Hs(j, i) = WA[i].cwiseProduct(WA[j].transpose()).sum();
            Hs(1, 1) += 1.0 / (y(1) * y(1));
            Hs(2, 2) += 1.0 / (y(2) * y(2));

            const Eigen::Vector3d step = Hs.ldlt().solve(g);
            const double decrement = g.dot(step);
            if (!std::isfinite(decrement)) break;
            // Stop at tolerance, or once rounding keeps the decrement from shrinking.
            if (decrement / 2.0 <= opt.newton_tol || (decrement < 1e-12 && decrement >= prev_decrement)) {
                centered = true;
                break;
            }
            prev_decrement = decrement;
            // Damped Newton step; the dual barrier is self-concordant, so
            // 1 / (1 + decrement) keeps the iterate strictly feasible.
            const double lam = std::sqrt(decrement);
            double alpha = lam > 0.25 ? 1.0 / (1.0 + lam) : 1.0;
            Eigen::LLT<Mat> trial;
            double ftrial = detail::dual_barrier(s, y + alpha * step, t, &trial);
            while (!std::isfinite(ftrial) && alpha > 1e-12) {
                alpha *= 0.5;
                ftrial = detail::dual_barrier(s, y + alpha * step, t, &trial);
            }
            if (!std::isfinite(ftrial)) {
                centered = true;
                break;
            }
            y += alpha * step;
            llt = std::move(trial);
        }
        (void)centered;
        const double gap = static_cast<double>(n + 2) / t;
        if (gap <= opt.gap_tol * (1.0 + std::abs(y(0)))) {
            W = llt.solve(Mat::Identity(n, n));
            SdpResult r;
            r.X = W / t;
            r.X = 0.5 * (r.X + r.X.transpose()).eval();
            // Rescaling restores tr(C0 X) = 1 exactly; both inequality constraints keep their sign.
            r.X /= r.X(n - 1, n - 1);
            r.value = (s.C * r.X).trace();
            r.dual_bound = y(0);
            r.mult_x = y(1);
            r.mult_y = y(2);
            r.gap = gap;
            r.iterations = iterations;
            return r;
        }
        t *= opt.barrier_factor;
    }
    Vec best(3);
    best << y(0), y(1), y(2);
    throw SolverError("solve_sdp: barrier iteration cap reached", best,
                      static_cast<double>(n + 2) / t);
}

} // namespace detail

/**
 * Solves   min tr(C X)  s.t.  tr(Cx X) <= 0, tr(Cy X) <= 0, tr(C0 X) = 1, X >= 0
 * through its dual   max lambda  s.t.  C - lambda C0 + alpha Cx + beta Cy >= 0,
 * alpha, beta >= 0, with a log-barrier on the dual cone. Centering uses damped
 * Newton steps; the barrier weight t grows geometrically. On the central path
 * X = S^{-1}/t is strictly primal feasible and the duality gap is (n+2)/t.
 *
 * The instance is first rescaled: X = D X' D with D carrying the ball radii,
 * each ball constraint divided by its radius squared, and C divided by its
 * largest entry. Multipliers and bounds are mapped back to the original.
 *
 * Requires a strictly feasible primal, i.e. both ball radii positive.
 */
inline SdpResult solve_sdp(const SdpInstance& s, const SdpOptions& opt = {}) {
    const Eigen::Index n = s.size();
    if (s.C0.rows() != n || s.Cx.rows() != n || s.Cy.rows() != n)
        throw StructuralError("solve_sdp: matrix sizes differ");
    const double rx2 = -s.Cx(n - 1, n - 1), ry2 = -s.Cy(n - 1, n - 1);
    if (!(rx2 > 0.0) || !(ry2 > 0.0))
        throw ValidationError("solve_sdp: needs positive radii (strict feasibility)");

    Vec D = Vec::Ones(n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        if (s.Cx(i, i) > 0.0 && s.Cy(i, i) == 0.0) D(i) = std::sqrt(rx2);
        if (s.Cy(i, i) > 0.0 && s.Cx(i, i) == 0.0) D(i) = std::sqrt(ry2);
    }
    SdpInstance t;
    t.C = D.asDiagonal() * s.C * D.asDiagonal();
    const double c_scale = std::max(1.0, t.C.cwiseAbs().maxCoeff());
    t.C /= c_scale;
    t.C0 = s.C0;
    t.Cx = D.asDiagonal() * s.Cx * D.asDiagonal() / rx2;
    t.Cy = D.asDiagonal() * s.Cy * D.asDiagonal() / ry2;

    SdpResult r;
    try {
        r = detail::solve_sdp_scaled(t, opt);
    } catch (const SolverError& e) {
        Vec best = e.best_iterate();
        if (best.size() == 3) best = Vec((Eigen::Vector3d() << c_scale * best(0), c_scale * best(1) / rx2,
                                           c_scale * best(2) / ry2).finished());
        throw SolverError(e.what(), best, c_scale * e.residual());
    }
    r.X = D.asDiagonal() * r.X * D.asDiagonal();
    r.value = (s.C * r.X).trace();
    r.dual_bound *= c_scale;
    r.mult_x *= c_scale / rx2;
    r.mult_y *= c_scale / ry2;
    r.gap *= c_scale;
    return r;
}

/**
 * Reads z from the last column of X. Throws SolverError when z leaves the
 * balls by more than 1e-6, which means X was not rank one up to tolerance.
 */
inline Vec recover_solution(const Mat& X, Eigen::Index d, double r_x, double r_y) {
    if (X.rows() != 2 * d + 1 || X.cols() != 2 * d + 1)
        throw StructuralError("recover_solution: X must be (2d+1) x (2d+1)");
    Vec z = X.col(2 * d).head(2 * d);
    const double ex = z.head(d).norm() - r_x;
    const double ey = z.tail(d).norm() - r_y;
    if (ex > 1e-6 || ey > 1e-6)
        throw SolverError("recover_solution: recovered point violates the balls", z, std::max(ex, ey));
    return z;
}

// ----------------------------------------------------------------------------
// Closed forms
// ----------------------------------------------------------------------------

namespace detail {

inline SolveReport make_report(const BilinearBallProblem& p, Vec x, Vec y, InnerMethod m,
                               int iterations, double lower_bound) {
    SolveReport r;
    r.x_star = std::move(x);
    r.y_star = std::move(y);
    r.value = bilinear_objective(p, r.x_star, r.y_star);
    r.certified_lower_bound = lower_bound;
    r.method = m;
    r.iterations = iterations;
    return r;
}

/**
 * Exact solution when a radius is zero or the dimension is one; nullopt
 * otherwise. In one dimension the balls are intervals and a bilinear
 * objective attains its minimum at one of the four corners.
 */
inline std::optional<SolveReport> degenerate_solution(const BilinearBallProblem& p) {
    const Eigen::Index d = p.dim();
    if (d == 1 && p.r_x > 0.0 && p.r_y > 0.0) {
        SolveReport best;
        best.value = std::numeric_limits<double>::infinity();
        for (double sx : {-1.0, 1.0})
            for (double sy : {-1.0, 1.0}) {
                auto r = make_report(p, Vec::Constant(1, sx * p.r_x), Vec::Constant(1, sy * p.r_y),
                                     InnerMethod::closed_form, 0, 0.0);
                if (r.value < best.value) best = std::move(r);
            }
        best.certified_lower_bound = best.value;
        return best;
    }
    if (p.r_x > 0.0 && p.r_y > 0.0) return std::nullopt;
    Vec x = Vec::Zero(d);
    Vec y = Vec::Zero(d);
    if (p.r_x > 0.0) x = -p.r_x * unit(p.b);
    if (p.r_y > 0.0) y = -p.r_y * unit(p.a);
    auto r = make_report(p, std::move(x), std::move(y), InnerMethod::closed_form, 0, 0.0);
    r.certified_lower_bound = r.value;
    return r;
}

/// Points on the intersection of spheres |w - c1| = r1 and |w - c2| = r2.
inline Vec sphere_intersection(const Vec& c1, double r1, const Vec& c2, double r2) {
    const Eigen::Index d = c1.size();
    const Vec diff = c2 - c1;
    const double dist = diff.norm();
    // Some unit vector orthogonal to diff (or any unit vector if diff == 0).
    auto orthogonal_unit = [&](const Vec& u) {
        for (Eigen::Index i = 0; i < d; ++i) {
            Vec e = Vec::Unit(d, i);
            if (u.size() > 0) e -= e.dot(u) * u;
            if (e.norm() > 1e-6) return Vec(e.normalized());
        }
        return Vec(Vec::Zero(d));
    };
    if (dist < 1e-14) return c1 + r1 * orthogonal_unit(Vec());
    const Vec u = diff / dist;
    const double along = (dist * dist + r1 * r1 - r2 * r2) / (2.0 * dist);
    const double h2 = r1 * r1 - along * along;
    const double h = h2 > 0.0 ? std::sqrt(h2) : 0.0;
    return c1 + along * u + h * orthogonal_unit(u);
}

} // namespace detail

/**
 * Candidate minimizers built from the SDP dual multipliers (mx, my):
 * the KKT system (A + mx A_x + my A_y) z = -beta, solved directly when
 * mx*my != 1/4, and completed along its null space (both balls active)
 * when mx*my == 1/4.
 */
inline std::vector<Vec> kkt_candidates(const BilinearBallProblem& p, double mx, double my) {
    const Eigen::Index d = p.dim();
    std::vector<Vec> out;
    const double det = mx * my - 0.25;
    if (std::abs(det) > 1e-14) {
        Vec z(2 * d);
        z.head(d) = (0.25 * p.a - 0.5 * my * p.b) / det;
        z.tail(d) = (0.25 * p.b - 0.5 * mx * p.a) / det;
        out.push_back(std::move(z));
    }
    if (mx > 0.0 && my > 0.0) {
        // Treat the system as singular: per coordinate M = v v^T / mx with v = (mx, 1/2).
        const double m = mx;
        // Least-squares particular solution of (m x + y/2, x/2 + y/(4m)) = -(b, a)/2.
        // Project the right-hand side onto span(v) and solve along v.
        const double vx = m, vy = 0.5;
        const double vv = vx * vx + vy * vy;
        Vec xp(d), yp(d);
        for (Eigen::Index i = 0; i < d; ++i) {
            const double rx = -0.5 * p.b(i), ry = -0.5 * p.a(i);
            const double coef = (vx * rx + vy * ry) / vv; // rhs ~ coef * v
            // M (k v) = k (v.v / m) v  =>  k = coef * m / vv
            const double k = coef * m / vv;
            xp(i) = k * vx;
            yp(i) = k * vy;
        }
        // Null space of M: (w, -2 m w).
        const Vec w = detail::sphere_intersection(-xp, p.r_x, yp / (2.0 * m), p.r_y / (2.0 * m));
        Vec z(2 * d);
        z.head(d) = xp + w;
        z.tail(d) = yp - 2.0 * m * w;
        out.push_back(std::move(z));
    }
    return out;
}

struct SdpRouteOptions {
    SdpOptions sdp;
    /// Accept a recovered point whose objective is within this of the dual bound (scaled by 1 + |bound|).
    double accept_tol = 1e-6;
};

/**
 * Full SDP route: relax, solve, recover. The returned point is the best
 * feasible candidate among the last column of X and the KKT points built
 * from the dual multipliers; its value is certified against the dual bound.
 */
inline SolveReport solve_sdp_route(const BilinearBallProblem& p, const SdpRouteOptions& opt = {}) {
    validate_problem(p);
    if (auto r = detail::degenerate_solution(p)) return *r;
    const Eigen::Index d = p.dim();
    const SdpInstance inst = to_sdp(to_qc2qp(p));
    const SdpResult res = solve_sdp(inst, opt.sdp);

    std::vector<Vec> candidates;
    try {
        candidates.push_back(recover_solution(res.X, d, p.r_x, p.r_y));
    } catch (const SolverError&) {
        // fall through to the KKT candidates
    }
    for (Vec& z : kkt_candidates(p, res.mult_x, res.mult_y)) candidates.push_back(std::move(z));

    double best_val = std::numeric_limits<double>::infinity();
    Vec best_x, best_y;
    for (const Vec& z : candidates) {
        if (!z.allFinite()) continue;
        Vec x = project_ball(z.head(d), p.r_x);
        Vec y = project_ball(z.tail(d), p.r_y);
        const double v = bilinear_objective(p, x, y);
        if (v < best_val) {
            best_val = v;
            best_x = std::move(x);
            best_y = std::move(y);
        }
    }
    // Polish with exact block updates; each one can only lower the objective.
    if (std::isfinite(best_val)) {
        for (int it = 0; it < 1000; ++it) {
            const Vec gx = p.b + best_y;
            Vec x = gx.norm() == 0.0 ? best_x : Vec(-p.r_x * gx.normalized());
            const Vec gy = p.a + x;
            Vec y = gy.norm() == 0.0 ? best_y : Vec(-p.r_y * gy.normalized());
            const double v = bilinear_objective(p, x, y);
            if (!(v < best_val)) break;
            best_val = v;
            best_x = std::move(x);
            best_y = std::move(y);
        }
    }
    const double bound = res.dual_bound;
    if (!std::isfinite(best_val) || best_val - bound > opt.accept_tol * (1.0 + std::abs(bound))) {
        Vec z(2 * d);
        if (best_x.size() == d) z << best_x, best_y;
        else z.setZero();
        throw SolverError("solve_sdp_route: rank-one recovery failed", z, best_val - bound);
    }
    return detail::make_report(p, std::move(best_x), std::move(best_y), InnerMethod::sdp,
                               res.iterations, bound);
}

// ----------------------------------------------------------------------------
// Alternating closed-form descent
// ----------------------------------------------------------------------------

struct AlternatingOptions {
    int starts = 8;
    /// Stop a run when the objective decreases by less than tol * (1 + |value|).
    double tol = 1e-15;
    int max_iterations = 20000;
    std::uint64_t seed = 0;
    /// Also run the SDP route and report its dual bound.
    bool certify = false;
};

/**
 * Block coordinate descent x <- -R_x unit(b + y), y <- -R_y unit(a + x),
 * each block update being the exact minimizer given the other. Starts are
 * (0, 0) updating y first, (0, 0) updating x first, and random points on the
 * spheres; the best stationary point is returned.
 */
inline SolveReport solve_alternating(const BilinearBallProblem& p, const AlternatingOptions& opt = {}) {
    validate_problem(p);
    if (opt.starts < 1) throw ValidationError("solve_alternating: starts must be >= 1");
    if (auto r = detail::degenerate_solution(p)) {
        r->method = InnerMethod::alternating;
        return *r;
    }
    const Eigen::Index d = p.dim();
    CounterRng rng(opt.seed);

    auto update_x = [&](const Vec& x, const Vec& y) {
        const Vec g = p.b + y;
        return g.norm() == 0.0 ? x : Vec(-p.r_x * g.normalized());
    };
    auto update_y = [&](const Vec& x, const Vec& y) {
        const Vec g = p.a + x;
        return g.norm() == 0.0 ? y : Vec(-p.r_y * g.normalized());
    };

    double best_val = std::numeric_limits<double>::infinity();
    Vec best_x = Vec::Zero(d), best_y = Vec::Zero(d);
    int total_iterations = 0;
    for (int start = 0; start < opt.starts; ++start) {
        Vec x = Vec::Zero(d), y = Vec::Zero(d);
        if (start == 0) {
            y = update_y(x, y);
        } else if (start >= 2) {
            x = rng.on_sphere(d, p.r_x);
            y = rng.on_sphere(d, p.r_y);
        }
        double val = bilinear_objective(p, x, y);
        for (int it = 0; it < opt.max_iterations; ++it) {
            ++total_iterations;
            x = update_x(x, y);
            y = update_y(x, y);
            const double next = bilinear_objective(p, x, y);
            const bool done = val - next <= opt.tol * (1.0 + std::abs(next));
            val = next;
            if (done) break;
        }
        if (val < best_val) {
            best_val = val;
            best_x = x;
            best_y = y;
        }
    }
    double bound = -std::numeric_limits<double>::infinity();
    if (opt.certify) bound = solve_sdp_route(p).certified_lower_bound;
    return detail::make_report(p, std::move(best_x), std::move(best_y), InnerMethod::alternating,
                               total_iterations, bound);
}

// ----------------------------------------------------------------------------
// Brute-force oracle
// ----------------------------------------------------------------------------

struct OracleOptions {
    int resolution = 256;
    /// Number of zoom passes around the best cell after the initial grid.
    int refinements = 10;
};

/**
 * Independent brute-force oracle. For fixed x the best y is -R_y unit(a + x),
 * giving <a + x, b> - R_y ||a + x||. Writing x = x_par + x_perp with x_par in
 * a plane P containing a and b, the objective depends on x_perp only through
 * ||x_perp||, which should be as large as the ball allows when dim > 2. So
 * the search is over the disc ||x_par|| <= R_x in P, on a polar grid with
 * `resolution` points per axis, followed by zoomed re-grids of the best cell.
 */
inline SolveReport oracle_grid(const BilinearBallProblem& p, const OracleOptions& opt = {}) {
    validate_problem(p);
    if (opt.resolution < 32) throw ValidationError("oracle_grid: resolution must be >= 32");
    const Eigen::Index d = p.dim();
    if (auto r = detail::degenerate_solution(p)) {
        r->method = InnerMethod::oracle;
        return *r;
    }

    // Orthonormal basis (e1, e2) of a plane containing a and b, and a unit e3 orthogonal to it.
    auto gram = [&](const std::vector<Vec>& basis, Vec v) {
        for (const Vec& e : basis) v -= v.dot(e) * e;
        return v;
    };
    std::vector<Vec> basis;
    for (const Vec* v : {&p.a, &p.b}) {
        Vec r = gram(basis, *v);
        if (r.norm() > 1e-12 * (1.0 + v->norm())) basis.push_back(r.normalized());
    }
    for (Eigen::Index i = 0; i < d && static_cast<Eigen::Index>(basis.size()) < std::min<Eigen::Index>(d, 2); ++i) {
        Vec r = gram(basis, Vec::Unit(d, i));
        if (r.norm() > 1e-6) basis.push_back(r.normalized());
    }
    Vec e3 = Vec::Zero(d);
    if (d > 2) {
        for (Eigen::Index i = 0; i < d; ++i) {
            Vec r = gram(basis, Vec::Unit(d, i));
            if (r.norm() > 1e-6) {
                e3 = r.normalized();
                break;
            }
        }
    }
    const bool planar = basis.size() == 2;
    const double rx2 = p.r_x * p.r_x;

    auto point = [&](double radius, double angle) {
        Vec x = radius * std::cos(angle) * basis[0];
        if (planar) x += radius * std::sin(angle) * basis[1];
        const double perp2 = rx2 - radius * radius;
        if (d > 2 && perp2 > 0.0) x += std::sqrt(perp2) * e3;
        return x;
    };
    auto value_at = [&](double radius, double angle) {
        const Vec x = point(radius, angle);
        const Vec ax = p.a + x;
        return ax.dot(p.b) - p.r_y * ax.norm();
    };

    const int resolution = opt.resolution;
    // Polar grid; for a 1-d plane use angle in {0, pi} and radius in [0, R].
    double r_lo = 0.0, r_hi = p.r_x;
    double t_lo = 0.0, t_hi = 2.0 * std::numbers::pi;
    const bool wrap = planar;
    double best_r = 0.0, best_t = 0.0;
    double best_val = std::numeric_limits<double>::infinity();
    int evaluations = 0;

    auto scan = [&](int n, double rl, double rh, double tl, double th, bool full_circle) {
        for (int i = 0; i < n; ++i) {
            const double r = rl + (rh - rl) * i / (n - 1);
            const int nt = planar ? n : 2;
            for (int j = 0; j < nt; ++j) {
                double t;
                if (!planar) t = j == 0 ? 0.0 : std::numbers::pi;
                else if (full_circle) t = tl + (th - tl) * j / n;
                else t = tl + (th - tl) * j / (n - 1);
                const double v = value_at(r, t);
                ++evaluations;
                if (v < best_val) {
                    best_val = v;
                    best_r = r;
                    best_t = t;
                }
            }
        }
    };
    scan(resolution, r_lo, r_hi, t_lo, t_hi, wrap);
    double dr = (r_hi - r_lo) / (resolution - 1);
    double dt = (t_hi - t_lo) / resolution;
    // Each zoom pass re-grids a window of +-2 cells with 33 points per axis.
    constexpr int zoom = 33;
    for (int pass = 0; pass < opt.refinements; ++pass) {
        const double rl = std::max(0.0, best_r - 2.0 * dr);
        const double rh = std::min(p.r_x, best_r + 2.0 * dr);
        const double tl = best_t - 2.0 * dt;
        const double th = best_t + 2.0 * dt;
        scan(zoom, rl, rh, tl, th, false);
        dr = (rh - rl) / (zoom - 1);
        dt = (th - tl) / (zoom - 1);
    }

    Vec x = point(best_r, best_t);
    Vec y = -p.r_y * unit(p.a + x);
    return detail::make_report(p, std::move(x), std::move(y), InnerMethod::oracle, evaluations,
                               -std::numeric_limits<double>::infinity());
}

// ----------------------------------------------------------------------------
// Solver handles
// ----------------------------------------------------------------------------

using InnerSolver = std::function<SolveReport(const BilinearBallProblem&)>;

inline InnerSolver make_inner_solver(InnerMethod method) {
    switch (method) {
    case InnerMethod::sdp: return [](const BilinearBallProblem& p) { return solve_sdp_route(p); };
    case InnerMethod::alternating:
        return [](const BilinearBallProblem& p) { return solve_alternating(p); };
    case InnerMethod::oracle: return [](const BilinearBallProblem& p) { return oracle_grid(p); };
    case InnerMethod::closed_form: break;
    }
    throw ConfigError("make_inner_solver: closed_form is not a general solver");
}

inline InnerMethod parse_inner_method(const std::string& name) {
    if (name == "sdp") return InnerMethod::sdp;
    if (name == "alt" || name == "alternating") return InnerMethod::alternating;
    if (name == "oracle") return InnerMethod::oracle;
    throw ConfigError("unknown inner method '" + name + "' (expected sdp, alt, or oracle)");
}

} // namespace lrmdp
