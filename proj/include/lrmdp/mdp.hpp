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

#include "lrmdp/core.hpp"

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

namespace lrmdp {

/**
 * Finite-horizon MDP with a low-rank (linear) representation
 *
 *     P_h(s'|s,a) = <phi_h(s,a), mu_h(s')>,   r_h(s,a) = <phi_h(s,a), nu_h>.
 *
 * Steps are stored 0-based: index h in [0, H) is step h+1 of the usual
 * 1-based notation. Row `s*A + a` of `phi[h]` is the feature of (s,a) and row
 * s' of `mu[h]` is the factor of s'.
 */
struct LowRankMDP {
    int H = 0;
    int S = 0;
    int A = 0;
    int d = 0;
    std::vector<Mat> phi; ///< [h] (S*A) x d
    std::vector<Mat> mu;  ///< [h] S x d
    std::vector<Vec> nu;  ///< [h] d
    Vec rho;              ///< S

    Eigen::Index sa(int s, int a) const { return static_cast<Eigen::Index>(s) * A + a; }

    Vec feature(int h, int s, int a) const { return phi[h].row(sa(s, a)).transpose(); }

    /// Nominal kernel at step h as an (S*A) x S matrix.
    Mat kernel(int h) const { return phi[h] * mu[h].transpose(); }

    /// Rewards at step h as an (S*A) vector.
    Vec rewards(int h) const { return phi[h] * nu[h]; }
};

/// Throws StructuralError when any array disagrees with (H, S, A, d).
inline void check_shapes(const LowRankMDP& m) {
    auto fail = [](const std::string& msg) { throw StructuralError("LowRankMDP: " + msg); };
    if (m.H <= 0 || m.S <= 0 || m.A <= 0 || m.d <= 0) fail("H, S, A, d must be positive");
    if (m.phi.size() != static_cast<size_t>(m.H)) fail("phi must have H entries");
    if (m.mu.size() != static_cast<size_t>(m.H)) fail("mu must have H entries");
    if (m.nu.size() != static_cast<size_t>(m.H)) fail("nu must have H entries");
    if (m.rho.size() != m.S) fail("rho must have length S");
    for (int h = 0; h < m.H; ++h) {
        if (m.phi[h].rows() != m.S * m.A || m.phi[h].cols() != m.d)
            fail("phi[" + std::to_string(h + 1) + "] must be (S*A) x d");
        if (m.mu[h].rows() != m.S || m.mu[h].cols() != m.d)
            fail("mu[" + std::to_string(h + 1) + "] must be S x d");
        if (m.nu[h].size() != m.d) fail("nu[" + std::to_string(h + 1) + "] must have length d");
    }
}

// ----------------------------------------------------------------------------
// Validation
// ----------------------------------------------------------------------------

struct Violation {
    std::string kind; ///< rho, kernel-sum, kernel-entry, reward-range, phi-norm, nu-norm, mu-norm
    int h = 0;        ///< 1-based step, 0 when not step-specific
    int s = 0;        ///< 1-based state, 0 when not applicable
    int a = 0;        ///< 1-based action, 0 when not applicable
    double magnitude = 0.0;

    std::string describe() const {
        std::ostringstream os;
        os << kind << " violation";
        if (h > 0) {
            os << " at (h=" << h;
            if (s > 0) os << ",s=" << s;
            if (a > 0) os << ",a=" << a;
            os << ")";
        } else if (s > 0) {
            os << " at s=" << s;
        }
        os << ", magnitude " << magnitude;
        return os.str();
    }
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }

    bool has(const std::string& kind) const {
        return std::any_of(violations.begin(), violations.end(),
                           [&](const Violation& v) { return v.kind == kind; });
    }
};

namespace detail {

/// Largest ||sum_s V(s) mu_h(s)|| over V in a set of value vectors.
inline double max_factor_norm(const Mat& mu, const std::vector<Vec>& values) {
    double worst = 0.0;
    for (const Vec& v : values) worst = std::max(worst, (mu.transpose() * v).norm());
    return worst;
}

} // namespace detail

/**
 * Checks every LowRankMDP invariant and reports each violation with its
 * indices and magnitude. Shape mismatches throw StructuralError instead.
 *
 * The factor-norm condition is checked in horizon-normalized form:
 * ||sum_s V(s) mu_h(s)|| <= H sqrt(d) for V with range [0, H], probed at
 * V == H and at 32 seeded random draws.
 */
inline ValidationReport validate_mdp(const LowRankMDP& m) {
    check_shapes(m);
    ValidationReport report;
    auto add = [&](std::string kind, int h, int s, int a, double mag) {
        report.violations.push_back({std::move(kind), h, s, a, mag});
    };

    for (int s = 0; s < m.S; ++s)
        if (m.rho(s) < -tol::simplex) add("rho", 0, s + 1, 0, -m.rho(s));
    if (std::abs(m.rho.sum() - 1.0) > tol::simplex) add("rho", 0, 0, 0, std::abs(m.rho.sum() - 1.0));

    const double sqrt_d = std::sqrt(static_cast<double>(m.d));

    // Value probes for the factor-norm condition.
    std::vector<Vec> probes;
    probes.push_back(Vec::Constant(m.S, m.H));
    CounterRng rng(0x5eed);
    for (int i = 0; i < 32; ++i) {
        Vec v(m.S);
        for (int s = 0; s < m.S; ++s) v(s) = rng.uniform(0.0, m.H);
        probes.push_back(std::move(v));
    }

    for (int h = 0; h < m.H; ++h) {
        const Mat P = m.kernel(h);
        const Vec r = m.rewards(h);
        for (int s = 0; s < m.S; ++s) {
            for (int a = 0; a < m.A; ++a) {
                const auto row = P.row(m.sa(s, a));
                const double excess = std::abs(row.sum() - 1.0);
                if (excess > tol::kernel) add("kernel-sum", h + 1, s + 1, a + 1, excess);
                const double lo = row.minCoeff();
                const double hi = row.maxCoeff();
                if (lo < -tol::simplex) add("kernel-entry", h + 1, s + 1, a + 1, -lo);
                if (hi > 1.0 + tol::simplex) add("kernel-entry", h + 1, s + 1, a + 1, hi - 1.0);

                const double rew = r(m.sa(s, a));
                if (rew < -tol::simplex) add("reward-range", h + 1, s + 1, a + 1, -rew);
                if (rew > 1.0 + tol::simplex) add("reward-range", h + 1, s + 1, a + 1, rew - 1.0);

                const double fn = m.phi[h].row(m.sa(s, a)).norm();
                if (fn > 1.0 + tol::simplex) add("phi-norm", h + 1, s + 1, a + 1, fn - 1.0);
            }
        }
        const double nn = m.nu[h].norm();
        if (nn > sqrt_d + tol::simplex) add("nu-norm", h + 1, 0, 0, nn - sqrt_d);
        const double mn = detail::max_factor_norm(m.mu[h], probes);
        const double bound = m.H * sqrt_d;
        if (mn > bound * (1.0 + tol::simplex)) add("mu-norm", h + 1, 0, 0, mn - bound);
    }
    return report;
}

/// Throws ValidationError listing the violations, if any.
inline void require_valid(const LowRankMDP& m) {
    const auto report = validate_mdp(m);
    if (report.ok()) return;
    std::string msg = "invalid MDP:";
    for (const auto& v : report.violations) msg += "\n  " + v.describe();
    throw ValidationError(msg);
}

/**
 * Largest ratio ||sum_s V(s) mu_h(s)|| / sqrt(d) over V in [0,H]^S and all h,
 * i.e. the un-normalized factor bound. The maximum of a convex function over
 * a box sits at a vertex; vertices are enumerated for S <= 16.
 */
inline double literal_factor_norm_ratio(const LowRankMDP& m) {
    check_shapes(m);
    if (m.S > 16) throw std::invalid_argument("literal_factor_norm_ratio: S > 16");
    const double sqrt_d = std::sqrt(static_cast<double>(m.d));
    double worst = 0.0;
    for (int h = 0; h < m.H; ++h) {
        for (std::uint32_t mask = 0; mask < (1u << m.S); ++mask) {
            Vec v(m.S);
            for (int s = 0; s < m.S; ++s) v(s) = (mask >> s) & 1u ? m.H : 0.0;
            worst = std::max(worst, (m.mu[h].transpose() * v).norm() / sqrt_d);
        }
    }
    return worst;
}

/// True when the factor bound holds with V ranging over [0,H] un-normalized.
inline bool satisfies_literal_norm_bound(const LowRankMDP& m) {
    return literal_factor_norm_ratio(m) <= 1.0 + 1e-12;
}

// ----------------------------------------------------------------------------
// Policies, occupancies, values
// ----------------------------------------------------------------------------

/// Stochastic Markov policy; pi[h] is S x A with rows on the simplex.
struct Policy {
    std::vector<Mat> pi;

    int horizon() const { return static_cast<int>(pi.size()); }
    Vec at(int h, int s) const { return pi[h].row(s).transpose(); }
};

inline Policy uniform_policy(int H, int S, int A) {
    return Policy{std::vector<Mat>(H, Mat::Constant(S, A, 1.0 / A))};
}

/// Deterministic policy from an action table actions[h][s].
inline Policy deterministic_policy(const std::vector<std::vector<int>>& actions, int A) {
    Policy p;
    for (const auto& row : actions) {
        Mat m = Mat::Zero(static_cast<Eigen::Index>(row.size()), A);
        for (size_t s = 0; s < row.size(); ++s) m(static_cast<Eigen::Index>(s), row[s]) = 1.0;
        p.pi.push_back(std::move(m));
    }
    return p;
}

inline void validate_policy(const Policy& p, const LowRankMDP& m) {
    if (p.horizon() != m.H) throw StructuralError("policy horizon does not match MDP");
    for (int h = 0; h < m.H; ++h) {
        if (p.pi[h].rows() != m.S || p.pi[h].cols() != m.A)
            throw StructuralError("policy step " + std::to_string(h + 1) + " must be S x A");
        for (int s = 0; s < m.S; ++s)
            if (!is_probability_vector(p.pi[h].row(s).transpose()))
                throw ValidationError("policy row (h=" + std::to_string(h + 1) +
                                      ",s=" + std::to_string(s + 1) + ") is not a distribution");
    }
}

struct OccupancyMeasures {
    std::vector<Vec> state;        ///< [h] S, rho^pi_h
    std::vector<Mat> state_action; ///< [h] S x A, d^pi_h
};

namespace detail {

/// Occupancy recursion without input validation, for inner loops.
inline OccupancyMeasures occupancy_unchecked(const LowRankMDP& m, const Policy& p) {
    OccupancyMeasures occ;
    Vec state = m.rho;
    for (int h = 0; h < m.H; ++h) {
        Mat sa_occ = p.pi[h];
        for (int s = 0; s < m.S; ++s) sa_occ.row(s) *= state(s);
        occ.state.push_back(state);
        occ.state_action.push_back(sa_occ);
        if (h + 1 < m.H) {
            // Flatten d_h row-major to match the (s*A + a) kernel rows.
            Vec flat(m.S * m.A);
            for (int s = 0; s < m.S; ++s)
                for (int a = 0; a < m.A; ++a) flat(m.sa(s, a)) = sa_occ(s, a);
            state = m.mu[h] * (m.phi[h].transpose() * flat);
        }
    }
    return occ;
}

} // namespace detail

/// Forward recursion of occupancies under the nominal kernel.
inline OccupancyMeasures occupancy(const LowRankMDP& m, const Policy& p) {
    require_valid(m);
    validate_policy(p, m);
    return detail::occupancy_unchecked(m, p);
}

/// Flattened (s*A + a) copy of an S x A table.
inline Vec flatten_sa(const Mat& table) {
    Vec flat(table.size());
    for (Eigen::Index s = 0; s < table.rows(); ++s)
        for (Eigen::Index a = 0; a < table.cols(); ++a) flat(s * table.cols() + a) = table(s, a);
    return flat;
}

inline Mat unflatten_sa(const Vec& flat, int S, int A) {
    Mat t(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) t(s, a) = flat(static_cast<Eigen::Index>(s) * A + a);
    return t;
}

struct ValueTable {
    std::vector<Vec> v; ///< [h] S, with v[H] == 0
    std::vector<Mat> q; ///< [h] S x A
    double init_value = 0.0;
};

/// Nominal Bellman operator: [B_h V](s,a) = r_h(s,a) + sum_s' P_h(s'|s,a) V(s').
inline Mat bellman_nominal(const LowRankMDP& m, int h, const Vec& v_next) {
    const Vec omega = m.nu[h] + m.mu[h].transpose() * v_next;
    return unflatten_sa(m.phi[h] * omega, m.S, m.A);
}

inline double policy_value_at_init(const ValueTable& vt, const Vec& rho) {
    return rho.dot(vt.v.front());
}

namespace detail {

inline ValueTable nominal_dp_unchecked(const LowRankMDP& m, const Policy& p) {
    ValueTable vt;
    vt.v.assign(m.H + 1, Vec::Zero(m.S));
    vt.q.assign(m.H, Mat::Zero(m.S, m.A));
    for (int h = m.H - 1; h >= 0; --h) {
        vt.q[h] = bellman_nominal(m, h, vt.v[h + 1]);
        vt.v[h] = (vt.q[h].cwiseProduct(p.pi[h])).rowwise().sum();
    }
    vt.init_value = policy_value_at_init(vt, m.rho);
    return vt;
}

} // namespace detail

inline ValueTable nominal_dp(const LowRankMDP& m, const Policy& p) {
    require_valid(m);
    validate_policy(p, m);
    return detail::nominal_dp_unchecked(m, p);
}

struct OptimalSolution {
    ValueTable values;
    Policy policy; ///< deterministic, ties broken toward the lowest action index
};

/// Backward induction for the nominal optimal policy.
inline OptimalSolution optimal_dp(const LowRankMDP& m) {
    require_valid(m);
    OptimalSolution out;
    auto& vt = out.values;
    vt.v.assign(m.H + 1, Vec::Zero(m.S));
    vt.q.assign(m.H, Mat::Zero(m.S, m.A));
    out.policy.pi.assign(m.H, Mat::Zero(m.S, m.A));
    for (int h = m.H - 1; h >= 0; --h) {
        vt.q[h] = bellman_nominal(m, h, vt.v[h + 1]);
        for (int s = 0; s < m.S; ++s) {
            Eigen::Index best = 0;
            vt.v[h](s) = vt.q[h].row(s).maxCoeff(&best);
            out.policy.pi[h](s, best) = 1.0;
        }
    }
    vt.init_value = policy_value_at_init(vt, m.rho);
    return out;
}

/// True when every feature is a standard basis vector and d == S*A with phi(s,a) = e_{s*A+a}.
inline bool has_tabular_features(const LowRankMDP& m) {
    if (m.d != m.S * m.A) return false;
    for (int h = 0; h < m.H; ++h)
        if (!m.phi[h].isIdentity(0.0)) return false;
    return true;
}

/**
 * Re-expresses any MDP with tabular orthonormal features: d = S*A,
 * phi(s,a) = e_(s,a), mu(s')_(s,a) = P(s'|s,a), nu_(s,a) = r(s,a).
 */
inline LowRankMDP to_tabular(const LowRankMDP& m) {
    check_shapes(m);
    LowRankMDP t;
    t.H = m.H;
    t.S = m.S;
    t.A = m.A;
    t.d = m.S * m.A;
    t.rho = m.rho;
    for (int h = 0; h < m.H; ++h) {
        t.phi.push_back(Mat::Identity(t.d, t.d));
        t.mu.push_back(m.kernel(h).transpose());
        t.nu.push_back(m.rewards(h));
    }
    return t;
}

} // namespace lrmdp
