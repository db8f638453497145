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
 * Robust policy evaluation under representation perturbations.
 *
 * At step h the nominal update Q_h = <phi_h, omega_h> is replaced by
 * <phi_h + eta_h, omega_h + xi_h>, where (xi_h, eta_h) lies in the product of
 * balls of radii (R_xi_h, R_eta_h) and minimizes the occupancy-averaged value
 *
 *     <abar_h + eta, omega_h + xi>,   abar_h = sum_{s,a} d_h(s,a) phi_h(s,a),
 *
 * with d_h the nominal occupancy of the evaluated policy. The same pair is
 * applied to every (s,a).
 */

#include "lrmdp/bilinear.hpp"
#include "lrmdp/mdp.hpp"

#include <optional>
#include <string>
#include <vector>

namespace lrmdp {

struct AmbiguityRadii {
    std::vector<double> r_xi;  ///< [h] R_xi
    std::vector<double> r_eta; ///< [h] R_eta

    static AmbiguityRadii constant(int H, double r_xi, double r_eta) {
        return {std::vector<double>(H, r_xi), std::vector<double>(H, r_eta)};
    }

    static AmbiguityRadii zero(int H) { return constant(H, 0.0, 0.0); }

    int horizon() const { return static_cast<int>(r_xi.size()); }
};

inline void validate_radii(const AmbiguityRadii& r, int H) {
    if (static_cast<int>(r.r_xi.size()) != H || static_cast<int>(r.r_eta.size()) != H)
        throw StructuralError("ambiguity radii must have one entry per step");
    for (int h = 0; h < H; ++h)
        if (!(r.r_xi[h] >= 0.0) || !(r.r_eta[h] >= 0.0) || !std::isfinite(r.r_xi[h]) ||
            !std::isfinite(r.r_eta[h]))
            throw ValidationError("ambiguity radii must be finite and nonnegative (step " +
                                  std::to_string(h + 1) + ")");
}

/// Radii of the (phi, mu, nu)-rectangular set.
struct StandardRadii {
    std::vector<double> r_phi;
    std::vector<double> r_mu;
    std::vector<double> r_nu;
};

/**
 * Radii of a (xi, eta) set containing the image of the standard set:
 * R_xi_h = R_nu_h + v_bound[h] * R_mu_h and R_eta_h = R_phi_h, where
 * v_bound[h] bounds sum_s' |V_{h+1}(s')|.
 */
inline AmbiguityRadii radii_transform(const StandardRadii& std_radii, const std::vector<double>& v_bound) {
    const size_t H = std_radii.r_phi.size();
    if (std_radii.r_mu.size() != H || std_radii.r_nu.size() != H || v_bound.size() != H)
        throw StructuralError("radii_transform: inputs must have one entry per step");
    AmbiguityRadii out;
    for (size_t h = 0; h < H; ++h) {
        if (std_radii.r_phi[h] < 0.0 || std_radii.r_mu[h] < 0.0 || std_radii.r_nu[h] < 0.0 ||
            v_bound[h] < 0.0)
            throw ValidationError("radii_transform: negative input at step " + std::to_string(h + 1));
        out.r_xi.push_back(std_radii.r_nu[h] + v_bound[h] * std_radii.r_mu[h]);
        out.r_eta.push_back(std_radii.r_phi[h]);
    }
    return out;
}

/// Same, with the trivial bound sum_s' |V_{h+1}(s')| <= S (H - h) (1-based h).
inline AmbiguityRadii radii_transform(const StandardRadii& std_radii, int S) {
    const int H = static_cast<int>(std_radii.r_phi.size());
    std::vector<double> v_bound(H);
    for (int h = 0; h < H; ++h) v_bound[h] = static_cast<double>(S) * (H - (h + 1));
    return radii_transform(std_radii, v_bound);
}

/**
 * sum_{tau >= h} (2 R_eta_tau sqrt(d) + (1 + R_eta_tau) R_xi_tau), with h
 * 1-based in [1, H+1]; zero at h = H+1.
 */
inline double gap_bound(const AmbiguityRadii& r, int d, int h) {
    const int H = r.horizon();
    if (h < 1 || h > H + 1) throw std::out_of_range("gap_bound: step out of range");
    const double sqrt_d = std::sqrt(static_cast<double>(d));
    double total = 0.0;
    for (int tau = h - 1; tau < H; ++tau)
        total += 2.0 * r.r_eta[tau] * sqrt_d + (1.0 + r.r_eta[tau]) * r.r_xi[tau];
    return total;
}

// ----------------------------------------------------------------------------
// One robust Bellman step
// ----------------------------------------------------------------------------

/// nu_h + sum_s' v_next(s') mu_h(s'); h is 0-based.
inline Vec omega_nominal(const LowRankMDP& m, const Vec& v_next, int h) {
    if (v_next.size() != m.S) throw StructuralError("omega_nominal: v_next must have length S");
    return m.nu[h] + m.mu[h].transpose() * v_next;
}

/// sum_{s,a} d_h(s,a) phi_h(s,a) for an S x A occupancy table; h is 0-based.
inline Vec averaged_feature(const LowRankMDP& m, const Mat& occ_sa, int h) {
    return m.phi[h].transpose() * flatten_sa(occ_sa);
}

struct BellmanStep {
    Vec xi;
    Vec eta;
    Vec omega;  ///< nominal omega_h
    Vec abar;   ///< occupancy-averaged feature
    double inner_value = 0.0;
};

namespace detail {

inline BellmanStep solve_step(const Vec& abar, const Vec& omega, double r_xi, double r_eta,
                              const InnerSolver& solver, int h) {
    const Eigen::Index d = abar.size();
    BellmanStep st;
    st.abar = abar;
    st.omega = omega;
    if (r_xi == 0.0 && r_eta == 0.0) {
        st.xi = Vec::Zero(d);
        st.eta = Vec::Zero(d);
    } else if (abar.norm() == 0.0) {
        // Objective reduces to <eta, omega + xi>.
        if (omega.norm() > 0.0) {
            st.eta = -r_eta * omega.normalized();
            st.xi = -r_xi * unit(abar + st.eta);
        } else {
            // Any antiparallel pair of full-radius vectors is optimal.
            st.eta = -r_eta * Vec::Unit(d, 0);
            st.xi = r_xi * Vec::Unit(d, 0);
        }
    } else {
        SolveReport rep;
        try {
            rep = solver(BilinearBallProblem{abar, omega, r_eta, r_xi});
        } catch (const SolverError& e) {
            throw SolverError("robust Bellman step h=" + std::to_string(h + 1) + ": " + e.what(),
                              e.best_iterate(), e.residual());
        }
        st.eta = std::move(rep.x_star);
        st.xi = std::move(rep.y_star);
    }
    st.inner_value = (abar + st.eta).dot(omega + st.xi);
    return st;
}

} // namespace detail

/**
 * Minimizer (xi*, eta*) of <abar_h + eta, omega_h + xi> over the radius-h
 * balls, where abar_h uses the occupancy table `occ` and omega_h is built
 * from v_next. h is 0-based.
 */
inline BellmanStep robust_bellman_step(const LowRankMDP& m, const OccupancyMeasures& occ,
                                       const Vec& v_next, int h, const AmbiguityRadii& radii,
                                       const InnerSolver& solver) {
    if (h < 0 || h >= m.H) throw std::out_of_range("robust_bellman_step: step out of range");
    return detail::solve_step(averaged_feature(m, occ.state_action[h], h), omega_nominal(m, v_next, h),
                              radii.r_xi[h], radii.r_eta[h], solver, h);
}

/// Q-table of the robust operator at step h applied to v_next: <phi + eta*, omega + xi*>.
inline Mat robust_q_table(const LowRankMDP& m, int h, const BellmanStep& st) {
    const Vec flat = (m.phi[h].rowwise() + st.eta.transpose()) * (st.omega + st.xi);
    return unflatten_sa(flat, m.S, m.A);
}

/// The robust Bellman operator at step h applied to v_next, as an S x A table.
inline Mat robust_operator_apply(const LowRankMDP& m, const OccupancyMeasures& occ, const Vec& v_next,
                                 int h, const AmbiguityRadii& radii, const InnerSolver& solver) {
    return robust_q_table(m, h, robust_bellman_step(m, occ, v_next, h, radii, solver));
}

// ----------------------------------------------------------------------------
// Full evaluation
// ----------------------------------------------------------------------------

struct RobustEvalResult {
    std::vector<Vec> v_hat;  ///< [h] S, v_hat[H] == 0
    std::vector<Mat> q_hat;  ///< [h] S x A
    std::vector<Vec> omega_nominal;
    std::vector<Vec> xi_star;
    std::vector<Vec> eta_star;
    std::vector<Vec> abar;
    std::vector<double> inner_values;
    double init_value = 0.0; ///< <rho, v_hat[0]>
};

namespace detail {

inline RobustEvalResult robust_eval_unchecked(const LowRankMDP& m, const Policy& pi,
                                              const OccupancyMeasures& occ,
                                              const AmbiguityRadii& radii, const InnerSolver& solver) {
    RobustEvalResult res;
    res.v_hat.assign(m.H + 1, Vec::Zero(m.S));
    res.q_hat.resize(m.H);
    res.omega_nominal.resize(m.H);
    res.xi_star.resize(m.H);
    res.eta_star.resize(m.H);
    res.abar.resize(m.H);
    res.inner_values.resize(m.H);
    for (int h = m.H - 1; h >= 0; --h) {
        BellmanStep st = robust_bellman_step(m, occ, res.v_hat[h + 1], h, radii, solver);
        res.q_hat[h] = robust_q_table(m, h, st);
        res.v_hat[h] = res.q_hat[h].cwiseProduct(pi.pi[h]).rowwise().sum();
        res.omega_nominal[h] = std::move(st.omega);
        res.xi_star[h] = std::move(st.xi);
        res.eta_star[h] = std::move(st.eta);
        res.abar[h] = std::move(st.abar);
        res.inner_values[h] = st.inner_value;
    }
    res.init_value = m.rho.dot(res.v_hat[0]);
    return res;
}

} // namespace detail

/**
 * Backward recursion from v_hat[H] = 0. Occupancies come from the nominal
 * kernel and are computed once. Solver failures are rethrown with the step.
 */
inline RobustEvalResult robust_policy_eval(const LowRankMDP& m, const Policy& pi,
                                           const AmbiguityRadii& radii,
                                           const InnerSolver& solver = make_inner_solver(InnerMethod::sdp)) {
    require_valid(m);
    validate_policy(pi, m);
    validate_radii(radii, m.H);
    return detail::robust_eval_unchecked(m, pi, detail::occupancy_unchecked(m, pi), radii, solver);
}

inline double robust_value_at_init(const RobustEvalResult& r, const Vec& rho) {
    return rho.dot(r.v_hat.front());
}

} // namespace lrmdp
