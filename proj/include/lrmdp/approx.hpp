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
 * Sample-based pieces for large state-action spaces: rollouts from the
 * nominal model, ridge estimation of omega_h, Monte-Carlo averaged features,
 * and a stochastic solver for the inner problem.
 */

#include "lrmdp/robust.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

namespace lrmdp {

struct Transition {
    int s = 0;
    int a = 0;
    double r = 0.0;
    int s_next = 0;
};

struct TrajectoryBatch {
    std::vector<std::vector<Transition>> trajectories; ///< [i][h]
    std::uint64_t seed = 0;

    int size() const { return static_cast<int>(trajectories.size()); }
};

namespace detail {

inline Eigen::Index sample_index(CounterRng& rng, const Eigen::Ref<const Vec>& probs) {
    // Rounding can leave tiny negative entries in factored kernels.
    return rng.categorical(probs.cwiseMax(0.0));
}

} // namespace detail

/**
 * N independent rollouts of `pi` in the nominal model. Trajectory i draws
 * from its own stream split off `seed`, so the batch does not depend on the
 * order in which trajectories are generated.
 */
inline TrajectoryBatch sample_trajectories(const LowRankMDP& m, const Policy& pi, int N, std::uint64_t seed) {
    require_valid(m);
    validate_policy(pi, m);
    if (N < 1) throw ValidationError("sample_trajectories: N must be >= 1");
    std::vector<Mat> P(m.H);
    std::vector<Vec> R(m.H);
    for (int h = 0; h < m.H; ++h) {
        P[h] = m.kernel(h);
        R[h] = m.rewards(h);
    }
    const CounterRng root(seed);
    TrajectoryBatch batch;
    batch.seed = seed;
    batch.trajectories.resize(N);
    for (int i = 0; i < N; ++i) {
        CounterRng rng = root.split(static_cast<std::uint64_t>(i));
        auto& traj = batch.trajectories[i];
        traj.reserve(m.H);
        int s = static_cast<int>(detail::sample_index(rng, m.rho));
        for (int h = 0; h < m.H; ++h) {
            Transition t;
            t.s = s;
            t.a = static_cast<int>(detail::sample_index(rng, pi.pi[h].row(s).transpose()));
            t.r = R[h](m.sa(s, t.a));
            t.s_next = static_cast<int>(detail::sample_index(rng, P[h].row(m.sa(s, t.a)).transpose()));
            traj.push_back(t);
            s = t.s_next;
        }
    }
    return batch;
}

/// (1/N) sum_i phi_h(s^i_h, a^i_h); h is 0-based.
inline Vec mc_average_feature(const TrajectoryBatch& batch, const LowRankMDP& m, int h) {
    if (batch.size() == 0) throw ValidationError("mc_average_feature: empty batch");
    Vec total = Vec::Zero(m.d);
    for (const auto& traj : batch.trajectories) {
        const Transition& t = traj.at(h);
        total += m.phi[h].row(m.sa(t.s, t.a)).transpose();
    }
    return total / batch.size();
}

/// argmin_w ||X w - y||^2 + lambda ||w||^2 through the normal equations.
inline Vec ridge_regression(const Mat& X, const Vec& y, double lambda) {
    if (!(lambda > 0.0)) throw ValidationError("ridge_regression: lambda must be positive");
    if (X.rows() != y.size()) throw StructuralError("ridge_regression: size mismatch");
    Mat G = X.transpose() * X;
    G.diagonal().array() += lambda;
    return G.ldlt().solve(X.transpose() * y);
}

/**
 * Ridge estimate of omega_h from step-h samples with targets
 * r + v_next(s_next); h is 0-based, v_next holds state values at step h+1.
 */
inline Vec estimate_omega_lsq(const TrajectoryBatch& batch, const LowRankMDP& m, int h, const Vec& v_next,
                              double lambda = 1e-6) {
    if (v_next.size() != m.S) throw StructuralError("estimate_omega_lsq: v_next must have length S");
    const int N = batch.size();
    Mat X(N, m.d);
    Vec y(N);
    for (int i = 0; i < N; ++i) {
        const Transition& t = batch.trajectories[i].at(h);
        X.row(i) = m.phi[h].row(m.sa(t.s, t.a));
        y(i) = t.r + v_next(t.s_next);
    }
    return ridge_regression(X, y, lambda);
}

/// Columns i, h, s, a, r, s_next; step h is 1-based, states and actions 0-based.
inline void write_batch_csv(std::ostream& os, const TrajectoryBatch& batch) {
    os << "i,h,s,a,r,s_next\n";
    std::ostringstream line;
    line << std::setprecision(17);
    for (int i = 0; i < batch.size(); ++i)
        for (size_t h = 0; h < batch.trajectories[i].size(); ++h) {
            const Transition& t = batch.trajectories[i][h];
            line.str("");
            line << i << ',' << h + 1 << ',' << t.s << ',' << t.a << ',' << t.r << ',' << t.s_next;
            os << line.str() << '\n';
        }
}

// ----------------------------------------------------------------------------
// Stochastic inner solve
// ----------------------------------------------------------------------------

/// Weighted feature sample; the expectation of phi is features^T weights.
struct WeightedFeatureSet {
    Mat features; ///< n x d
    Vec weights;  ///< n, sums to 1

    Vec mean() const { return features.transpose() * weights; }
};

/// Step-h features of the batch with uniform weights.
inline WeightedFeatureSet feature_set_from_batch(const TrajectoryBatch& batch, const LowRankMDP& m, int h) {
    WeightedFeatureSet set;
    set.features.resize(batch.size(), m.d);
    for (int i = 0; i < batch.size(); ++i) {
        const Transition& t = batch.trajectories[i].at(h);
        set.features.row(i) = m.phi[h].row(m.sa(t.s, t.a));
    }
    set.weights = Vec::Constant(batch.size(), 1.0 / batch.size());
    return set;
}

/// Every (s, a) with positive occupancy, weighted by d_h(s, a).
inline WeightedFeatureSet feature_set_from_occupancy(const LowRankMDP& m, const Mat& occ_sa, int h) {
    std::vector<Eigen::Index> rows;
    std::vector<double> w;
    for (int s = 0; s < m.S; ++s)
        for (int a = 0; a < m.A; ++a)
            if (occ_sa(s, a) > 0.0) {
                rows.push_back(m.sa(s, a));
                w.push_back(occ_sa(s, a));
            }
    WeightedFeatureSet set;
    set.features.resize(static_cast<Eigen::Index>(rows.size()), m.d);
    set.weights.resize(static_cast<Eigen::Index>(rows.size()));
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (size_t i = 0; i < rows.size(); ++i) {
        set.features.row(static_cast<Eigen::Index>(i)) = m.phi[h].row(rows[i]);
        set.weights(static_cast<Eigen::Index>(i)) = w[i] / total;
    }
    return set;
}

struct RegularizedInner {
    Vec mean_feature; ///< E[phi]
    Vec omega;
    double r_xi = 0.0;
    double r_eta = 0.0;
    double lambda_xi = 1.0;
    double lambda_eta = 1.0;
};

/// <E phi + eta, omega + xi> + lambda_xi (|xi|^2 - R_xi^2) + lambda_eta (|eta|^2 - R_eta^2).
inline double regularized_objective(const RegularizedInner& p, const Vec& xi, const Vec& eta) {
    return (p.mean_feature + eta).dot(p.omega + xi) + p.lambda_xi * (xi.squaredNorm() - p.r_xi * p.r_xi) +
           p.lambda_eta * (eta.squaredNorm() - p.r_eta * p.r_eta);
}

/// Gradient of regularized_objective as (d/dxi, d/deta).
inline std::pair<Vec, Vec> regularized_gradient(const RegularizedInner& p, const Vec& xi, const Vec& eta) {
    return {p.mean_feature + eta + 2.0 * p.lambda_xi * xi, p.omega + xi + 2.0 * p.lambda_eta * eta};
}

struct SgdOptions {
    double lambda_xi = 1.0;
    double lambda_eta = 1.0;
    /// Step size lr0 / sqrt(t) at iteration t (1-based).
    double lr0 = 0.1;
    int steps = 50000;
    int minibatch = 8;
    std::uint64_t seed = 0;
};

struct SgdResult {
    Vec xi;
    Vec eta;
    double value = 0.0; ///< exact <E phi + eta, omega + xi> at the returned point
    int steps = 0;
};

/**
 * Stochastic primal-dual method on the penalized inner problem. Primal steps
 * use minibatch estimates of E[phi] drawn from `set` and are followed by
 * radial projection onto the balls; the penalty weights start at
 * (lambda_xi, lambda_eta) and follow projected dual ascent on the constraint
 * residuals ||.||^2 - R^2, so they fade once the iterates sit inside the
 * balls and the penalty stops biasing the solution inward.
 */
inline SgdResult sgd_regularized_inner(const WeightedFeatureSet& set, const Vec& omega, double r_xi,
                                       double r_eta, const SgdOptions& opt = {}) {
    const Eigen::Index d = omega.size();
    if (set.features.cols() != d) throw StructuralError("sgd_regularized_inner: feature dimension mismatch");
    if (set.features.rows() == 0) throw ValidationError("sgd_regularized_inner: empty feature set");
    if (!(opt.lambda_xi > 0.0) || !(opt.lambda_eta > 0.0))
        throw ValidationError("sgd_regularized_inner: penalty weights must be positive");
    if (r_xi < 0.0 || r_eta < 0.0) throw ValidationError("sgd_regularized_inner: negative radius");
    if (opt.steps < 1 || opt.minibatch < 1) throw ValidationError("sgd_regularized_inner: bad schedule");

    CounterRng rng(opt.seed);
    std::vector<double> cdf(static_cast<size_t>(set.weights.size()));
    std::partial_sum(set.weights.data(), set.weights.data() + set.weights.size(), cdf.begin());
    auto draw = [&]() {
        const double u = rng.uniform() * cdf.back();
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        return static_cast<Eigen::Index>(std::min<std::ptrdiff_t>(it - cdf.begin(), std::ssize(cdf) - 1));
    };
    Vec xi = Vec::Zero(d), eta = Vec::Zero(d);
    double lam_xi = opt.lambda_xi, lam_eta = opt.lambda_eta;
    const Vec mean = set.mean();
    for (int t = 1; t <= opt.steps; ++t) {
        Vec phi_hat = Vec::Zero(d);
        for (int j = 0; j < opt.minibatch; ++j)
            phi_hat += set.features.row(draw()).transpose();
        phi_hat /= opt.minibatch;
        const double lr = opt.lr0 / std::sqrt(static_cast<double>(t));
        const Vec g_xi = phi_hat + eta + 2.0 * lam_xi * xi;
        const Vec g_eta = omega + xi + 2.0 * lam_eta * eta;
        xi = project_ball(xi - lr * g_xi, r_xi);
        eta = project_ball(eta - lr * g_eta, r_eta);
        lam_xi = std::max(0.0, lam_xi + lr * (xi.squaredNorm() - r_xi * r_xi));
        lam_eta = std::max(0.0, lam_eta + lr * (eta.squaredNorm() - r_eta * r_eta));
        const double obj = (mean + eta).dot(omega + xi);
        if (!std::isfinite(obj) || !xi.allFinite() || !eta.allFinite()) {
            Vec z(2 * d);
            z << xi, eta;
            throw SolverError("sgd_regularized_inner: diverged at step " + std::to_string(t), z, obj);
        }
    }
    SgdResult res;
    res.xi = std::move(xi);
    res.eta = std::move(eta);
    res.value = (mean + res.eta).dot(omega + res.xi);
    res.steps = opt.steps;
    return res;
}

} // namespace lrmdp
