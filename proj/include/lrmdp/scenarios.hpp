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
 * Worked examples with closed-form values: the bit-string guessing game,
 * the gamble-or-guarantee game, and the four-state ring.
 */

#include "lrmdp/robust.hpp"

#include <optional>
#include <string>
#include <vector>

namespace lrmdp {

// ----------------------------------------------------------------------------
// String guessing
// ----------------------------------------------------------------------------

struct StringGuessingParams {
    int m = 3;
    int H = 10;
    double delta = 0.05;
};

/// State indices of the string guessing MDP.
namespace sg {
inline constexpr int minus = 0; ///< absorbing failure state
inline constexpr int plus = 1;  ///< absorbing success state
inline int bit(int i) { return 1 + i; } ///< s_i, 1-based i
inline constexpr int a0 = 0;
inline constexpr int a1 = 1;
} // namespace sg

inline void validate_params(const StringGuessingParams& p) {
    if (p.m < 1 || p.H <= p.m) throw ValidationError("string guessing: need H > m >= 1");
    if (!(p.delta >= 0.0 && p.delta < 1.0)) throw ValidationError("string guessing: need 0 <= delta < 1");
}

/**
 * States {s-, s+, s_1..s_m}, actions {a0, a1}, d = 4 with
 * phi(s-,.) = e1, phi(s_i,a0) = e2, phi(s_i,a1) = e3, phi(s+,.) = e4, nu = e4.
 * At step h < m, mu(s-) = e1 + e2, mu(s_{h+1}) = e3, mu(s+) = e4; from step m
 * on, mu(s+) = e3 + e4 (a correct guess at the last bit, or any later a1 at a
 * bit state, lands in s+). The initial state is s_1.
 */
inline LowRankMDP build_string_guessing_mdp(const StringGuessingParams& p) {
    validate_params(p);
    LowRankMDP mdp;
    mdp.H = p.H;
    mdp.S = p.m + 2;
    mdp.A = 2;
    mdp.d = 4;
    mdp.rho = Vec::Zero(mdp.S);
    mdp.rho(sg::bit(1)) = 1.0;
    for (int h = 1; h <= p.H; ++h) {
        Mat phi = Mat::Zero(mdp.S * 2, 4);
        for (int a = 0; a < 2; ++a) {
            phi(mdp.sa(sg::minus, a), 0) = 1.0;
            phi(mdp.sa(sg::plus, a), 3) = 1.0;
        }
        for (int i = 1; i <= p.m; ++i) {
            phi(mdp.sa(sg::bit(i), sg::a0), 1) = 1.0;
            phi(mdp.sa(sg::bit(i), sg::a1), 2) = 1.0;
        }
        Mat mu = Mat::Zero(mdp.S, 4);
        mu(sg::minus, 0) = 1.0;
        mu(sg::minus, 1) = 1.0;
        mu(sg::plus, 3) = 1.0;
        if (h < p.m) mu(sg::bit(h + 1), 2) = 1.0;
        else mu(sg::plus, 2) = 1.0;
        Vec nu = Vec::Unit(4, 3);
        mdp.phi.push_back(std::move(phi));
        mdp.mu.push_back(std::move(mu));
        mdp.nu.push_back(std::move(nu));
    }
    return mdp;
}

/**
 * R_xi_h = (H - h) delta while the guess is in progress (h <= m) and 0 once
 * the game is decided; R_eta = 0. Only the guessing transitions are uncertain.
 */
inline AmbiguityRadii string_guessing_radii(const StringGuessingParams& p) {
    validate_params(p);
    AmbiguityRadii r = AmbiguityRadii::zero(p.H);
    for (int h = 1; h <= p.m; ++h) r.r_xi[h - 1] = (p.H - h) * p.delta;
    return r;
}

/// R_xi_h = (H - h) delta at every step, R_eta = 0.
inline AmbiguityRadii string_guessing_full_radii(const StringGuessingParams& p) {
    validate_params(p);
    AmbiguityRadii r = AmbiguityRadii::zero(p.H);
    for (int h = 1; h <= p.H; ++h) r.r_xi[h - 1] = (p.H - h) * p.delta;
    return r;
}

/// Deterministic policy taking a1 everywhere.
inline Policy string_guessing_all_a1(const StringGuessingParams& p) {
    return deterministic_policy(std::vector<std::vector<int>>(p.H, std::vector<int>(p.m + 2, sg::a1)), 2);
}

struct StringGuessingValues {
    double v = 0.0;       ///< nominal
    double v_tilde = 0.0; ///< standard robust
    double v_hat = 0.0;   ///< low-rank robust
};

/// Values of the all-a1 policy at s_h on step h (1-based, h <= m).
inline StringGuessingValues string_guessing_closed_forms(const StringGuessingParams& p, int h = 1) {
    validate_params(p);
    if (h < 1 || h > p.m) throw std::out_of_range("string_guessing_closed_forms: need 1 <= h <= m");
    StringGuessingValues out;
    const double tail = p.H - p.m;
    out.v = tail;
    out.v_tilde = std::pow(1.0 - p.delta, p.m - h + 1) * tail;
    double penalty = 0.0;
    for (int tau = h; tau <= p.m; ++tau) penalty += (p.H - tau) * p.delta;
    out.v_hat = tail - penalty;
    return out;
}

// ----------------------------------------------------------------------------
// Gamble or guarantee
// ----------------------------------------------------------------------------

struct GambleParams {
    double p = 0.2;            ///< chance of falling from s_1 to s_0 per step
    double alpha_reward = 0.5; ///< reward per step in the guarantee branch
    int H = 30;
    double delta = 0.05;
};

namespace gamble {
inline constexpr int s_alpha = 0;
inline constexpr int s_0 = 1;
inline constexpr int s_1 = 2;
inline constexpr int s_plus = 3; ///< initial state
inline constexpr int a0 = 0;     ///< guarantee
inline constexpr int a1 = 1;     ///< gamble
} // namespace gamble

inline void validate_params(const GambleParams& g) {
    if (!(g.p > 0.0 && g.p < 1.0)) throw ValidationError("gamble: need 0 < p < 1");
    if (!(g.alpha_reward > 0.0 && g.alpha_reward <= 1.0)) throw ValidationError("gamble: need 0 < alpha <= 1");
    if (g.H < 2) throw ValidationError("gamble: need H >= 2");
    if (!(g.delta >= 0.0 && g.delta < 1.0)) throw ValidationError("gamble: need 0 <= delta < 1");
}

/**
 * States {s_alpha, s_0, s_1, s_+}, actions {a0, a1}, d = 5 with
 * phi(s+,a0) = e1, phi(s+,a1) = e2, phi(s_alpha,.) = e3, phi(s_1,.) = e4,
 * phi(s_0,.) = e5; mu(s_alpha) = e1 + e3, mu(s_1) = e2 + (1-p) e4,
 * mu(s_0) = p e4 + e5, mu(s+) = 0; nu = alpha e3 + (1-p) e4. The reward at
 * s_1 is the expected reward of the self-loop, so that the values match
 * V*_h(s_1) = ((1-p)/p)(1 - (1-p)^{H-h+1}).
 */
inline LowRankMDP build_gamble_mdp(const GambleParams& g) {
    validate_params(g);
    using namespace gamble;
    LowRankMDP mdp;
    mdp.H = g.H;
    mdp.S = 4;
    mdp.A = 2;
    mdp.d = 5;
    mdp.rho = Vec::Unit(4, s_plus);
    Mat phi = Mat::Zero(8, 5);
    phi(mdp.sa(s_plus, a0), 0) = 1.0;
    phi(mdp.sa(s_plus, a1), 1) = 1.0;
    for (int a = 0; a < 2; ++a) {
        phi(mdp.sa(s_alpha, a), 2) = 1.0;
        phi(mdp.sa(s_1, a), 3) = 1.0;
        phi(mdp.sa(s_0, a), 4) = 1.0;
    }
    Mat mu = Mat::Zero(4, 5);
    mu(s_alpha, 0) = 1.0;
    mu(s_alpha, 2) = 1.0;
    mu(s_1, 1) = 1.0;
    mu(s_1, 3) = 1.0 - g.p;
    mu(s_0, 3) = g.p;
    mu(s_0, 4) = 1.0;
    Vec nu = Vec::Zero(5);
    nu(2) = g.alpha_reward;
    nu(3) = 1.0 - g.p;
    mdp.phi.assign(g.H, phi);
    mdp.mu.assign(g.H, mu);
    mdp.nu.assign(g.H, nu);
    return mdp;
}

inline AmbiguityRadii gamble_radii(const GambleParams& g) {
    validate_params(g);
    return AmbiguityRadii::constant(g.H, g.delta, 0.0);
}

/// Policy committing to `first` at s_+ (all other states have one effective action).
inline Policy gamble_policy(const GambleParams& g, int first) {
    std::vector<std::vector<int>> table(g.H, std::vector<int>(4, gamble::a0));
    table[0][gamble::s_plus] = first;
    return deterministic_policy(table, 2);
}

struct GambleValues {
    double v_guarantee = 0.0;     ///< ((1-delta) alpha / delta)(1 - (1-delta)^{H-h+1}); alpha (H-h+1) at delta = 0
    double v_gamble_upper = 0.0;  ///< upper bound (1-p-delta)/(p+delta)
    double v_nominal_gamble = 0.0;    ///< ((1-p)/p)(1 - (1-p)^{H-h+1})
    double v_nominal_guarantee = 0.0; ///< alpha (H-h+1)
    static constexpr bool gamble_is_upper_bound = true;
};

inline GambleValues gamble_closed_forms(const GambleParams& g, int h) {
    validate_params(g);
    if (h < 1 || h > g.H) throw std::out_of_range("gamble_closed_forms: step out of range");
    const double n = g.H - h + 1;
    GambleValues v;
    v.v_guarantee = g.delta == 0.0
                        ? g.alpha_reward * n
                        : (1.0 - g.delta) * g.alpha_reward / g.delta * (1.0 - std::pow(1.0 - g.delta, n));
    v.v_gamble_upper = (1.0 - g.p - g.delta) / (g.p + g.delta);
    v.v_nominal_gamble = (1.0 - g.p) / g.p * (1.0 - std::pow(1.0 - g.p, n));
    v.v_nominal_guarantee = g.alpha_reward * n;
    return v;
}

struct GambleFlip {
    GambleParams params;
    int nominal_action = 0; ///< best first action for the nominal value
    int robust_action = 0;  ///< best first action for the robust value
    double nominal_values[2] = {0.0, 0.0};
    double robust_values[2] = {0.0, 0.0};
};

/// Nominal and robust values of both first actions.
inline GambleFlip compare_gamble_actions(const GambleParams& g, const InnerSolver& solver) {
    const LowRankMDP mdp = build_gamble_mdp(g);
    const AmbiguityRadii radii = gamble_radii(g);
    GambleFlip f;
    f.params = g;
    for (int a = 0; a < 2; ++a) {
        const Policy pi = gamble_policy(g, a);
        f.nominal_values[a] = nominal_dp(mdp, pi).init_value;
        f.robust_values[a] = robust_value_at_init(robust_policy_eval(mdp, pi, radii, solver), mdp.rho);
    }
    f.nominal_action = f.nominal_values[1] > f.nominal_values[0] ? 1 : 0;
    f.robust_action = f.robust_values[1] > f.robust_values[0] ? 1 : 0;
    return f;
}

/**
 * Scans a parameter grid and returns every setting where the nominal and
 * robust optimal first actions differ, in grid order.
 */
inline std::vector<GambleFlip> search_gamble_flips(const std::vector<double>& ps, const std::vector<double>& alphas,
                                                   const std::vector<int>& horizons,
                                                   const std::vector<double>& deltas,
                                                   const InnerSolver& solver) {
    std::vector<GambleFlip> out;
    for (double p : ps)
        for (double al : alphas)
            for (int H : horizons)
                for (double dl : deltas) {
                    const GambleFlip f = compare_gamble_actions(GambleParams{p, al, H, dl}, solver);
                    if (f.nominal_action != f.robust_action) out.push_back(f);
                }
    return out;
}

// ----------------------------------------------------------------------------
// Ring
// ----------------------------------------------------------------------------

namespace ring {
inline constexpr int ccw = 0;  ///< s_i -> s_{i-1}
inline constexpr int stay = 1; ///< s_i -> s_i
inline constexpr int cw = 2;   ///< s_i -> s_{i+1}
inline constexpr double rewards[4] = {0.0, 0.90, 0.89, 0.91};
} // namespace ring

/**
 * Four states on a ring (s_1..s_4 stored as 0..3), actions {ccw, stay, cw}
 * with deterministic moves, state rewards (0, 0.90, 0.89, 0.91), tabular
 * features phi(s,a) = e_(s,a) in R^12, and the initial state s_1.
 */
inline LowRankMDP build_ring(int H) {
    if (H < 1) throw ValidationError("ring: horizon must be >= 1");
    LowRankMDP mdp;
    mdp.H = H;
    mdp.S = 4;
    mdp.A = 3;
    mdp.d = 12;
    mdp.rho = Vec::Unit(4, 0);
    Mat mu = Mat::Zero(4, 12);
    Vec nu(12);
    for (int s = 0; s < 4; ++s) {
        mu((s + 3) % 4, mdp.sa(s, ring::ccw)) = 1.0;
        mu(s, mdp.sa(s, ring::stay)) = 1.0;
        mu((s + 1) % 4, mdp.sa(s, ring::cw)) = 1.0;
        for (int a = 0; a < 3; ++a) nu(mdp.sa(s, a)) = ring::rewards[s];
    }
    mdp.phi.assign(H, Mat::Identity(12, 12));
    mdp.mu.assign(H, mu);
    mdp.nu.assign(H, nu);
    return mdp;
}

} // namespace lrmdp
