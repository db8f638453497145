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
 * Robust policy gradient: alternate robust evaluation of the current policy
 * with an exponentiated (natural) policy-gradient update at every (h, s).
 * The output is the uniform mixture over the K visited policies.
 */

#include "lrmdp/robust.hpp"

#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

namespace lrmdp {

/// pi(a) * exp(alpha q(a)), normalized; the max of q is subtracted first.
inline Vec npg_step(const Vec& pi, const Vec& q, double alpha) {
    if (pi.size() != q.size()) throw StructuralError("npg_step: size mismatch");
    if (!(alpha > 0.0)) throw ValidationError("npg_step: step size must be positive");
    if ((pi.array() < 0.0).any()) throw ValidationError("npg_step: negative probability");
    if (pi.sum() <= 0.0) throw ValidationError("npg_step: all-zero distribution");
    const double qmax = q.maxCoeff();
    Vec out = pi.array() * (alpha * (q.array() - qmax)).exp();
    const double z = out.sum();
    if (!(z > 0.0)) throw SolverError("npg_step: weights underflowed to zero");
    return out / z;
}

/// sqrt(2 log A / (K H^2)).
inline double default_step_size(int K, int H, int A) {
    if (K < 1 || H < 1) throw ValidationError("default_step_size: K and H must be >= 1");
    if (A < 2) throw ValidationError("default_step_size: needs at least two actions");
    return std::sqrt(2.0 * std::log(static_cast<double>(A)) / (static_cast<double>(K) * H * H));
}

struct NpgConfig {
    /// Step size; 0 selects default_step_size(episodes, H, A).
    double alpha = 0.0;
    int episodes = 1;
    /// Keep every robust Q table (needed by regret_check).
    bool log_q = false;
};

struct R2pgTrace {
    std::vector<Policy> policies;      ///< pi^1 .. pi^K
    std::vector<double> robust_values; ///< robust value of pi^k at rho
    std::vector<double> nominal_values;
    std::vector<std::vector<Vec>> xi_log;  ///< [k][h]
    std::vector<std::vector<Vec>> eta_log; ///< [k][h]
    std::vector<std::vector<Mat>> q_log;   ///< [k][h] S x A, only when logged
    double alpha = 0.0;
    double mixture_value = 0.0; ///< mean of robust_values

    int episodes() const { return static_cast<int>(policies.size()); }
};

/**
 * Runs K episodes: robust evaluation of pi^k under the nominal occupancy,
 * then pi^{k+1}_h(.|s) = npg_step(pi^k_h(.|s), Qhat^k_h(s,.), alpha). The
 * update after the last episode is not applied.
 */
inline R2pgTrace run_r2pg(const LowRankMDP& m, const AmbiguityRadii& radii, const NpgConfig& cfg,
                          const InnerSolver& solver = make_inner_solver(InnerMethod::sdp)) {
    require_valid(m);
    validate_radii(radii, m.H);
    if (cfg.episodes < 1) throw ConfigError("run_r2pg: episodes must be >= 1");
    if (cfg.alpha < 0.0) throw ConfigError("run_r2pg: step size must be nonnegative");
    R2pgTrace trace;
    trace.alpha = cfg.alpha > 0.0 ? cfg.alpha : default_step_size(cfg.episodes, m.H, m.A);

    Policy pi = uniform_policy(m.H, m.S, m.A);
    double total = 0.0;
    for (int k = 0; k < cfg.episodes; ++k) {
        const OccupancyMeasures occ = detail::occupancy_unchecked(m, pi);
        RobustEvalResult res;
        try {
            res = detail::robust_eval_unchecked(m, pi, occ, radii, solver);
        } catch (const SolverError& e) {
            throw SolverError("episode " + std::to_string(k + 1) + ": " + e.what(), e.best_iterate(),
                              e.residual());
        }
        trace.policies.push_back(pi);
        trace.robust_values.push_back(res.init_value);
        trace.nominal_values.push_back(detail::nominal_dp_unchecked(m, pi).init_value);
        trace.xi_log.push_back(res.xi_star);
        trace.eta_log.push_back(res.eta_star);
        if (cfg.log_q) trace.q_log.push_back(res.q_hat);
        total += res.init_value;
        if (k + 1 == cfg.episodes) break;
        for (int h = 0; h < m.H; ++h)
            for (int s = 0; s < m.S; ++s)
                pi.pi[h].row(s) =
                    npg_step(pi.pi[h].row(s).transpose(), res.q_hat[h].row(s).transpose(), trace.alpha)
                        .transpose();
    }
    trace.mixture_value = total / cfg.episodes;
    return trace;
}

/// One row per episode: k, robust_value, nominal_value, then |xi_h| and |eta_h| for each h.
inline void write_trace_csv(std::ostream& os, const R2pgTrace& t) {
    const int H = t.xi_log.empty() ? 0 : static_cast<int>(t.xi_log.front().size());
    os << "k,robust_value,nominal_value";
    for (int h = 1; h <= H; ++h) os << ",xi_norm_" << h;
    for (int h = 1; h <= H; ++h) os << ",eta_norm_" << h;
    os << '\n';
    std::ostringstream line;
    line << std::setprecision(17);
    for (int k = 0; k < t.episodes(); ++k) {
        line.str("");
        line << k + 1 << ',' << t.robust_values[k] << ',' << t.nominal_values[k];
        for (int h = 0; h < H; ++h) line << ',' << t.xi_log[k][h].norm();
        for (int h = 0; h < H; ++h) line << ',' << t.eta_log[k][h].norm();
        os << line.str() << '\n';
    }
}

// ----------------------------------------------------------------------------
// Regret and suboptimality checks
// ----------------------------------------------------------------------------

struct RegretEntry {
    int h = 0; ///< 1-based
    int s = 0; ///< 1-based
    double lhs = 0.0;
    double rhs = 0.0;
    bool pass() const { return lhs <= rhs + 1e-9 * (1.0 + std::abs(rhs)); }
};

struct RegretReport {
    std::vector<RegretEntry> entries;
    bool all_pass() const {
        return std::all_of(entries.begin(), entries.end(), [](const RegretEntry& e) { return e.pass(); });
    }
};

namespace detail {

inline void require_q_log(const R2pgTrace& t) {
    if (t.q_log.size() != t.policies.size() || t.q_log.empty())
        throw ConfigError("regret_check: trace has no Q log (set NpgConfig::log_q)");
}

inline RegretReport regret_against(const R2pgTrace& t, const std::function<Vec(int, int)>& comparator) {
    require_q_log(t);
    const int H = static_cast<int>(t.q_log.front().size());
    const int S = static_cast<int>(t.q_log.front().front().rows());
    const int A = static_cast<int>(t.q_log.front().front().cols());
    const double log_a = std::log(static_cast<double>(A));
    RegretReport rep;
    for (int h = 0; h < H; ++h) {
        for (int s = 0; s < S; ++s) {
            const Vec cmp = comparator(h, s);
            RegretEntry e{h + 1, s + 1, 0.0, log_a / t.alpha};
            double sq = 0.0;
            for (int k = 0; k < t.episodes(); ++k) {
                const Vec q = t.q_log[k][h].row(s).transpose();
                e.lhs += q.dot(cmp - t.policies[k].at(h, s));
                const double qi = q.cwiseAbs().maxCoeff();
                sq += qi * qi;
            }
            e.rhs += 0.5 * t.alpha * sq;
            rep.entries.push_back(e);
        }
    }
    return rep;
}

} // namespace detail

/**
 * Per (h, s): sum_k <Qhat^k_h(s,.), cmp(.|s) - pi^k_h(.|s)> against
 * log A / alpha + alpha/2 sum_k ||Qhat^k_h(s,.)||_inf^2.
 */
inline RegretReport regret_check(const R2pgTrace& t, const Policy& comparator) {
    detail::require_q_log(t);
    if (comparator.horizon() != static_cast<int>(t.q_log.front().size()))
        throw StructuralError("regret_check: comparator horizon mismatch");
    return detail::regret_against(t, [&](int h, int s) { return comparator.at(h, s); });
}

/**
 * Same check against the best fixed action in hindsight at each (h, s),
 * which maximizes the left side over all comparators.
 */
inline RegretReport regret_check(const R2pgTrace& t) {
    detail::require_q_log(t);
    return detail::regret_against(t, [&](int h, int s) {
        Vec total = Vec::Zero(t.q_log.front()[h].cols());
        for (int k = 0; k < t.episodes(); ++k) total += t.q_log[k][h].row(s).transpose();
        Eigen::Index best = 0;
        total.maxCoeff(&best);
        return Vec(Vec::Unit(total.size(), best));
    });
}

struct SuboptimalityReport {
    double surrogate = 0.0;
    double mixture_value = 0.0;
    double lhs = 0.0; ///< surrogate - mixture_value
    double rhs = 0.0;
    double statistical_term = 0.0; ///< sqrt(2 H^4 log A / K)
    double radii_term = 0.0;
    bool pass() const { return lhs <= rhs; }
};

/// sqrt(2 H^4 log A / K) + sum_h (2 R_xi (1 + R_eta) + 6 R_eta sqrt(d)).
inline SuboptimalityReport suboptimality_check(const LowRankMDP& m, const AmbiguityRadii& radii,
                                               const R2pgTrace& t, double surrogate_opt) {
    validate_radii(radii, m.H);
    SuboptimalityReport r;
    r.surrogate = surrogate_opt;
    r.mixture_value = t.mixture_value;
    r.lhs = surrogate_opt - t.mixture_value;
    const double H = m.H;
    r.statistical_term = std::sqrt(2.0 * H * H * H * H * std::log(static_cast<double>(m.A)) / t.episodes());
    const double sqrt_d = std::sqrt(static_cast<double>(m.d));
    for (int h = 0; h < m.H; ++h)
        r.radii_term += 2.0 * radii.r_xi[h] * (1.0 + radii.r_eta[h]) + 6.0 * radii.r_eta[h] * sqrt_d;
    r.rhs = r.statistical_term + r.radii_term;
    return r;
}

// ----------------------------------------------------------------------------
// Deterministic-policy surrogate for the robust optimum
// ----------------------------------------------------------------------------

/// reach[h][s]: some policy visits s at step h with positive nominal probability.
inline std::vector<std::vector<bool>> reachable_states(const LowRankMDP& m) {
    std::vector<std::vector<bool>> reach(m.H, std::vector<bool>(m.S, false));
    for (int s = 0; s < m.S; ++s) reach[0][s] = m.rho(s) > 0.0;
    for (int h = 0; h + 1 < m.H; ++h) {
        const Mat P = m.kernel(h);
        for (int s = 0; s < m.S; ++s) {
            if (!reach[h][s]) continue;
            for (int a = 0; a < m.A; ++a)
                for (int sn = 0; sn < m.S; ++sn)
                    if (P(m.sa(s, a), sn) > tol::simplex) reach[h + 1][sn] = true;
        }
    }
    return reach;
}

struct DeterministicSearchResult {
    double value = -std::numeric_limits<double>::infinity();
    Policy policy;
    std::uint64_t evaluated = 0;
};

/// Number of deterministic policies that differ on reachable (h, s).
inline double count_relevant_policies(const LowRankMDP& m) {
    const auto reach = reachable_states(m);
    double n = 1.0;
    for (const auto& row : reach)
        for (bool r : row)
            if (r) n *= m.A;
    return n;
}

/**
 * Best robust value over deterministic policies, enumerating actions at
 * every reachable (h, s); unreachable states follow the nominal optimal
 * policy. Any evaluated policy's robust value is a lower bound on the robust
 * optimum. Returns nullopt when more than `limit` policies would be needed.
 * The winning policy is re-evaluated with `verify` when given.
 */
inline std::optional<DeterministicSearchResult>
best_deterministic_policy(const LowRankMDP& m, const AmbiguityRadii& radii, const InnerSolver& solver,
                          double limit = 1e6, const InnerSolver* verify = nullptr) {
    require_valid(m);
    validate_radii(radii, m.H);
    if (count_relevant_policies(m) > limit) return std::nullopt;
    const auto reach = reachable_states(m);
    std::vector<std::pair<int, int>> slots;
    for (int h = 0; h < m.H; ++h)
        for (int s = 0; s < m.S; ++s)
            if (reach[h][s]) slots.emplace_back(h, s);

    Policy pi = optimal_dp(m).policy;
    std::vector<int> choice(slots.size(), 0);
    auto set_action = [&](size_t i, int a) {
        const auto [h, s] = slots[i];
        pi.pi[h].row(s).setZero();
        pi.pi[h](s, a) = 1.0;
        choice[i] = a;
    };
    for (size_t i = 0; i < slots.size(); ++i) set_action(i, 0);

    DeterministicSearchResult best;
    for (;;) {
        const auto occ = detail::occupancy_unchecked(m, pi);
        const double v = detail::robust_eval_unchecked(m, pi, occ, radii, solver).init_value;
        ++best.evaluated;
        if (v > best.value) {
            best.value = v;
            best.policy = pi;
        }
        // Odometer over the slot actions.
        size_t i = 0;
        while (i < slots.size() && choice[i] == m.A - 1) {
            set_action(i, 0);
            ++i;
        }
        if (i == slots.size()) break;
        set_action(i, choice[i] + 1);
    }
    if (verify) best.value = robust_policy_eval(m, best.policy, radii, *verify).init_value;
    return best;
}

} // namespace lrmdp
