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

// Random model generators and brute-force reference computations shared by
// the test binaries. The references deliberately avoid the library's own
// recursions: they enumerate trajectories or use std::mt19937 streams.

#include "lrmdp/lrmdp.hpp"

#include <functional>
#include <random>

namespace lrmdp::testing {

inline Vec random_simplex(std::mt19937_64& gen, int n) {
    std::exponential_distribution<double> e(1.0);
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = e(gen);
    return v / v.sum();
}

/**
 * Valid low-rank MDP with latent-state structure: each phi(s,a) is a
 * distribution over d latent states, each latent state has a successor
 * distribution over S states (a column of mu) and a reward in [0,1].
 * `sparsity` zeroes each mu entry with that probability (keeping at least
 * one entry per column), which makes some transitions impossible.
 */
inline LowRankMDP random_mdp(std::mt19937_64& gen, int S, int A, int H, int d, double sparsity = 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    LowRankMDP m;
    m.H = H;
    m.S = S;
    m.A = A;
    m.d = d;
    m.rho = random_simplex(gen, S);
    for (int h = 0; h < H; ++h) {
        Mat phi(S * A, d);
        for (int i = 0; i < S * A; ++i) phi.row(i) = random_simplex(gen, d).transpose();
        Mat mu(S, d);
        for (int j = 0; j < d; ++j) {
            Vec col = random_simplex(gen, S);
            if (sparsity > 0.0) {
                const int keep = std::uniform_int_distribution<int>(0, S - 1)(gen);
                for (int s = 0; s < S; ++s)
                    if (s != keep && u(gen) < sparsity) col(s) = 0.0;
                col /= col.sum();
            }
            mu.col(j) = col;
        }
        Vec nu(d);
        for (int j = 0; j < d; ++j) nu(j) = u(gen);
        m.phi.push_back(std::move(phi));
        m.mu.push_back(std::move(mu));
        m.nu.push_back(std::move(nu));
    }
    return m;
}

/**
 * Valid model that also meets the un-normalized factor bound
 * ||sum_s V(s) mu_h(s)|| <= sqrt(d) for V in [0,H]^S. Because every
 * feature satisfies <phi, sum_s mu(s)> = 1 with ||phi|| <= 1, that bound
 * forces H <= sqrt(d); callers must respect it. Latent features are mixed
 * toward uniform until ||phi|| <= 1/H, then phi is scaled up and mu, nu down
 * by the same factor.
 */
inline LowRankMDP random_literal_mdp(std::mt19937_64& gen, int S, int A, int H, int d) {
    if (H * H > d) throw std::invalid_argument("random_literal_mdp: needs H <= sqrt(d)");
    LowRankMDP m = random_mdp(gen, S, A, H, d);
    const Vec uniform = Vec::Constant(d, 1.0 / d);
    for (int h = 0; h < H; ++h) {
        double t = 1.0;
        auto max_norm = [&](double w) {
            double worst = 0.0;
            for (int i = 0; i < S * A; ++i)
                worst = std::max(worst, ((1.0 - w) * uniform + w * m.phi[h].row(i).transpose()).norm());
            return worst;
        };
        while (t > 0.0 && max_norm(t) > 1.0 / H) t *= 0.8;
        if (max_norm(t) > 1.0 / H) t = 0.0;
        for (int i = 0; i < S * A; ++i)
            m.phi[h].row(i) = ((1.0 - t) * uniform + t * m.phi[h].row(i).transpose()).transpose();
        const double k = 1.0 / max_norm(1.0);
        m.phi[h] *= k;
        m.mu[h] /= k;
        m.nu[h] /= k;
    }
    return m;
}

inline Policy random_policy(std::mt19937_64& gen, int H, int S, int A) {
    Policy p;
    for (int h = 0; h < H; ++h) {
        Mat t(S, A);
        for (int s = 0; s < S; ++s) t.row(s) = random_simplex(gen, A).transpose();
        p.pi.push_back(std::move(t));
    }
    return p;
}

inline Vec random_values(std::mt19937_64& gen, int S, double hi) {
    std::uniform_real_distribution<double> u(0.0, hi);
    Vec v(S);
    for (int s = 0; s < S; ++s) v(s) = u(gen);
    return v;
}

/// Explicit kernel P[h](s, a, s') and rewards R[h](s, a) read entry by entry.
struct Tables {
    std::vector<std::vector<std::vector<std::vector<double>>>> P; // [h][s][a][s']
    std::vector<std::vector<std::vector<double>>> R;              // [h][s][a]
};

inline Tables explicit_tables(const LowRankMDP& m) {
    Tables t;
    t.P.resize(m.H);
    t.R.resize(m.H);
    for (int h = 0; h < m.H; ++h) {
        t.P[h].assign(m.S, std::vector<std::vector<double>>(m.A, std::vector<double>(m.S)));
        t.R[h].assign(m.S, std::vector<double>(m.A));
        for (int s = 0; s < m.S; ++s)
            for (int a = 0; a < m.A; ++a) {
                const Vec f = m.feature(h, s, a);
                t.R[h][s][a] = f.dot(m.nu[h]);
                for (int sn = 0; sn < m.S; ++sn) t.P[h][s][a][sn] = f.dot(m.mu[h].row(sn).transpose());
            }
    }
    return t;
}

struct BruteForce {
    std::vector<Mat> occupancy; ///< [h] S x A
    double value = 0.0;
};

/// Enumerates every (s_1, a_1, ..., s_H, a_H) path with its probability.
inline BruteForce enumerate_paths(const LowRankMDP& m, const Policy& pi) {
    const Tables t = explicit_tables(m);
    BruteForce out;
    out.occupancy.assign(m.H, Mat::Zero(m.S, m.A));
    std::function<void(int, int, double, double)> walk = [&](int h, int s, double prob, double ret) {
        for (int a = 0; a < m.A; ++a) {
            const double pa = prob * pi.pi[h](s, a);
            if (pa == 0.0) continue;
            out.occupancy[h](s, a) += pa;
            const double r = ret + t.R[h][s][a];
            if (h + 1 == m.H) {
                out.value += pa * r;
                continue;
            }
            for (int sn = 0; sn < m.S; ++sn)
                if (t.P[h][s][a][sn] != 0.0) walk(h + 1, sn, pa * t.P[h][s][a][sn], r);
        }
    };
    for (int s = 0; s < m.S; ++s)
        if (m.rho(s) > 0.0) walk(0, s, m.rho(s), 0.0);
    return out;
}

/// Q-value backup written with explicit loops over the kernel table.
inline Mat backup_loops(const Tables& t, int h, const Vec& v_next) {
    const int S = static_cast<int>(t.R[h].size());
    const int A = static_cast<int>(t.R[h][0].size());
    Mat q(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            double acc = t.R[h][s][a];
            for (int sn = 0; sn < S; ++sn) acc += t.P[h][s][a][sn] * v_next(sn);
            q(s, a) = acc;
        }
    return q;
}

inline Vec random_vector(std::mt19937_64& gen, int d, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Vec v(d);
    for (int i = 0; i < d; ++i) v(i) = n(gen);
    return v;
}

// Plain softmax policy iteration on the nominal model, written from the tables.
inline std::vector<double> reference_nominal_npg(const LowRankMDP& m, double alpha, int K) {
    const Tables t = explicit_tables(m);
    std::vector<std::vector<std::vector<double>>> pi(
        m.H, std::vector<std::vector<double>>(m.S, std::vector<double>(m.A, 1.0 / m.A)));
    std::vector<double> values;
    for (int k = 0; k < K; ++k) {
        std::vector<Mat> q(m.H);
        Vec v_next = Vec::Zero(m.S);
        for (int h = m.H - 1; h >= 0; --h) {
            q[h] = backup_loops(t, h, v_next);
            Vec v(m.S);
            for (int s = 0; s < m.S; ++s) {
                v(s) = 0.0;
                for (int a = 0; a < m.A; ++a) v(s) += pi[h][s][a] * q[h](s, a);
            }
            v_next = v;
        }
        values.push_back(m.rho.dot(v_next));
        for (int h = 0; h < m.H; ++h)
            for (int s = 0; s < m.S; ++s) {
                double z = 0.0;
                for (int a = 0; a < m.A; ++a) z += pi[h][s][a] * std::exp(alpha * q[h](s, a));
                for (int a = 0; a < m.A; ++a) pi[h][s][a] = pi[h][s][a] * std::exp(alpha * q[h](s, a)) / z;
            }
    }
    return values;
}

} // namespace lrmdp::testing
