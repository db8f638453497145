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

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lrmdp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Tolerances shared by the validation routines.
namespace tol {
inline constexpr double kernel = 1e-8;
inline constexpr double simplex = 1e-10;
inline constexpr double occupancy = 1e-9;
} // namespace tol

// ----------------------------------------------------------------------------
// Errors
// ----------------------------------------------------------------------------

/// Array shapes disagree with the declared dimensions.
class StructuralError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Inputs are well-shaped but violate a model invariant.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed configuration or command line.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * An iterative solver gave up. Carries the best iterate it found and the
 * residual at that point so callers can decide whether it is usable.
 */
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, Vec best_iterate = {}, double residual = NAN)
        : std::runtime_error(what), best_iterate_(std::move(best_iterate)),
          residual_(residual) {}

    const Vec& best_iterate() const noexcept { return best_iterate_; }
    double residual() const noexcept { return residual_; }

private:
    Vec best_iterate_;
    double residual_;
};

// ----------------------------------------------------------------------------
// Small vector helpers
// ----------------------------------------------------------------------------

/// v/‖v‖, with unit(0) = 0.
inline Vec unit(const Vec& v) {
    const double n = v.norm();
    if (n == 0.0) return Vec::Zero(v.size());
    return v / n;
}

/// Radial projection onto the ball of radius r centered at the origin.
inline Vec project_ball(const Vec& v, double r) {
    const double n = v.norm();
    if (n <= r) return v;
    if (n == 0.0) return v;
    return v * (r / n);
}

inline bool is_probability_vector(const Eigen::Ref<const Vec>& p, double eps = tol::simplex) {
    if ((p.array() < -eps).any()) return false;
    return std::abs(p.sum() - 1.0) <= eps;
}

// ----------------------------------------------------------------------------
// Counter-based random numbers
// ----------------------------------------------------------------------------

/**
 * Counter-based generator: output i of stream `key` is a bijective hash of
 * (key, i). Streams are split by hashing the parent key with a stream id, so
 * per-trajectory or per-model generators never share state and results do
 * not depend on scheduling.
 */
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t seed = 0) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

    /// Independent child stream.
    CounterRng split(std::uint64_t stream) const {
        CounterRng child;
        child.key_ = mix(key_ ^ mix(stream + 0xbb67ae8584caa73bULL));
        return child;
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Lemire-style rejection keeps the distribution exact.
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = (*this)();
            if (r >= threshold) return r % n;
        }
    }

    double normal() {
        // Box-Muller; one draw per call keeps the stream position predictable.
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    Vec normal_vector(Eigen::Index n) {
        Vec v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
        return v;
    }

    /// Uniform on the sphere of radius r (zero vector when r == 0).
    Vec on_sphere(Eigen::Index n, double r) {
        if (r == 0.0) return Vec::Zero(n);
        Vec v = normal_vector(n);
        while (v.norm() == 0.0) v = normal_vector(n);
        return v.normalized() * r;
    }

    /// Sample an index from a (not necessarily normalized) nonnegative weight vector.
    Eigen::Index categorical(const Eigen::Ref<const Vec>& w) {
        const double total = w.sum();
        double u = uniform() * total;
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            u -= w(i);
            if (u < 0.0) return i;
        }
        // Rounding: fall back to the last index with positive mass.
        for (Eigen::Index i = w.size() - 1; i >= 0; --i)
            if (w(i) > 0.0) return i;
        return w.size() - 1;
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

} // namespace lrmdp
