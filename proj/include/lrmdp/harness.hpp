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
 * Evaluation against randomly perturbed models and experiment sweeps.
 */

#include "lrmdp/io.hpp"
#include "lrmdp/npg.hpp"
#include "lrmdp/scenarios.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace lrmdp {

// ----------------------------------------------------------------------------
// Perturbed models
// ----------------------------------------------------------------------------

enum class PerturbSupport {
    /// Noise on successors some action reaches from the same state.
    reachable,
    /// Noise on every successor.
    full,
};

struct PerturbedModel {
    LowRankMDP mdp;              ///< tabular-feature model with the perturbed kernel
    std::vector<Mat> raw_kernel; ///< [h] (S*A) x S, nominal plus noise before clipping
};

/**
 * Adds independent uniform noise in [-delta, delta] to the kernel entries
 * on the chosen support, clips negatives to zero and renormalizes each row.
 * The result uses tabular features, so only mu changes for tabular models;
 * other models are first rewritten in tabular form. Rewards are unchanged.
 * Each (h, s, a) row draws from its own stream split off `seed`.
 */
inline PerturbedModel perturb_mdp_detailed(const LowRankMDP& m, double delta, std::uint64_t seed,
                                           PerturbSupport support = PerturbSupport::reachable) {
    require_valid(m);
    if (!(delta >= 0.0 && delta < 1.0)) throw ValidationError("perturb_mdp: need 0 <= delta < 1");
    PerturbedModel out;
    out.mdp = has_tabular_features(m) ? m : to_tabular(m);
    const CounterRng root(seed);
    for (int h = 0; h < m.H; ++h) {
        const Mat P = m.kernel(h);
        Mat raw = P;
        for (int s = 0; s < m.S; ++s) {
            std::vector<bool> allowed(m.S, support == PerturbSupport::full);
            if (support == PerturbSupport::reachable)
                for (int a = 0; a < m.A; ++a)
                    for (int sn = 0; sn < m.S; ++sn)
                        if (P(m.sa(s, a), sn) > tol::simplex) allowed[sn] = true;
            for (int a = 0; a < m.A; ++a) {
                const Eigen::Index row = m.sa(s, a);
                CounterRng rng = root.split(static_cast<std::uint64_t>(h) * m.S * m.A + row);
                Vec p = P.row(row).transpose();
                for (int sn = 0; sn < m.S; ++sn)
                    if (allowed[sn] && delta > 0.0) p(sn) += rng.uniform(-delta, delta);
                raw.row(row) = p.transpose();
                p = p.cwiseMax(0.0);
                const double total = p.sum();
                if (!(total > 0.0))
                    throw ValidationError("perturb_mdp: row (h=" + std::to_string(h + 1) + ",s=" +
                                          std::to_string(s + 1) + ",a=" + std::to_string(a + 1) +
                                          ") vanished after clipping");
                p /= total;
                out.mdp.mu[h].col(row) = p;
            }
        }
        out.raw_kernel.push_back(std::move(raw));
    }
    require_valid(out.mdp);
    return out;
}

inline LowRankMDP perturb_mdp(const LowRankMDP& m, double delta, std::uint64_t seed,
                              PerturbSupport support = PerturbSupport::reachable) {
    return perturb_mdp_detailed(m, delta, seed, support).mdp;
}

/// values(k, j): nominal value at rho of policies[k] in models[j].
inline Mat policy_values_in_models(const std::vector<Policy>& policies, const std::vector<LowRankMDP>& models) {
    Mat values(static_cast<Eigen::Index>(policies.size()), static_cast<Eigen::Index>(models.size()));
    for (size_t j = 0; j < models.size(); ++j) {
        require_valid(models[j]);
        for (size_t k = 0; k < policies.size(); ++k) {
            validate_policy(policies[k], models[j]);
            values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) =
                detail::nominal_dp_unchecked(models[j], policies[k]).init_value;
        }
    }
    return values;
}

/**
 * Lowest value over the models of the uniform mixture of `policies` (for a
 * single policy, the lowest value of that policy).
 */
inline double empirical_robust_value(const std::vector<Policy>& policies, const std::vector<LowRankMDP>& models) {
    if (policies.empty() || models.empty()) throw ValidationError("empirical_robust_value: empty input");
    const Mat v = policy_values_in_models(policies, models);
    return v.colwise().mean().minCoeff();
}

inline double empirical_robust_value(const Policy& policy, const std::vector<LowRankMDP>& models) {
    return empirical_robust_value(std::vector<Policy>{policy}, models);
}

// ----------------------------------------------------------------------------
// Configuration
// ----------------------------------------------------------------------------

struct ExperimentConfig {
    std::string scenario = "ring"; ///< ring, string_guessing, gamble; ignored when mdp_path is set
    std::string mdp_path;
    int horizon = 4; ///< ring horizon
    std::vector<double> r_xi = {0.05};
    std::vector<double> r_eta = {0.01};
    int K = 200;
    double alpha = 0.0; ///< 0 selects the default step size
    double delta = 0.1;
    int num_perturbed = 20;
    std::uint64_t seed = 7;
    std::string out = "out";
    std::string solver = "sdp";
    std::string support = "reachable";
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& v, const std::string& key) {
    size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
    return x;
}

inline long long parse_int(const std::string& v, const std::string& key) {
    size_t used = 0;
    long long x = 0;
    try {
        x = std::stoll(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
    return x;
}

inline std::vector<double> parse_list(const std::string& v, const std::string& key) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item), key));
    if (out.empty()) throw ConfigError("'" + key + "' expects a nonempty list");
    return out;
}

inline std::string unquote(const std::string& v) {
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
    return v;
}

} // namespace detail

/// Applies one key/value setting; throws ConfigError on unknown keys or bad values.
inline void apply_setting(ExperimentConfig& cfg, const std::string& raw_key, const std::string& raw_value) {
    std::string key = detail::trim(raw_key);
    std::replace(key.begin(), key.end(), '-', '_');
    const std::string v = detail::unquote(detail::trim(raw_value));
    if (key == "scenario") cfg.scenario = v;
    else if (key == "mdp") cfg.mdp_path = v;
    else if (key == "horizon" || key == "H") cfg.horizon = static_cast<int>(detail::parse_int(v, key));
    else if (key == "r_xi") cfg.r_xi = detail::parse_list(v, key);
    else if (key == "r_eta") cfg.r_eta = detail::parse_list(v, key);
    else if (key == "K" || key == "episodes") cfg.K = static_cast<int>(detail::parse_int(v, key));
    else if (key == "alpha") cfg.alpha = detail::parse_double(v, key);
    else if (key == "delta") cfg.delta = detail::parse_double(v, key);
    else if (key == "num_perturbed") cfg.num_perturbed = static_cast<int>(detail::parse_int(v, key));
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(detail::parse_int(v, key));
    else if (key == "out") cfg.out = v;
    else if (key == "solver") cfg.solver = v;
    else if (key == "support") cfg.support = v;
    else throw ConfigError("unknown key '" + key + "'");
}

inline void validate_config(const ExperimentConfig& cfg) {
    if (cfg.r_xi.empty() || cfg.r_eta.empty()) throw ConfigError("radius sweeps must be nonempty");
    for (double r : cfg.r_xi)
        if (!(r >= 0.0)) throw ConfigError("r_xi values must be nonnegative");
    for (double r : cfg.r_eta)
        if (!(r >= 0.0)) throw ConfigError("r_eta values must be nonnegative");
    if (cfg.K < 1) throw ConfigError("K must be >= 1");
    if (cfg.alpha < 0.0) throw ConfigError("alpha must be nonnegative");
    if (!(cfg.delta >= 0.0 && cfg.delta < 1.0)) throw ConfigError("delta must lie in [0, 1)");
    if (cfg.num_perturbed < 1) throw ConfigError("num_perturbed must be >= 1");
    if (cfg.horizon < 1) throw ConfigError("horizon must be >= 1");
    if (cfg.support != "reachable" && cfg.support != "full")
        throw ConfigError("support must be 'reachable' or 'full'");
    parse_inner_method(cfg.solver);
    if (cfg.mdp_path.empty() && cfg.scenario != "ring" && cfg.scenario != "string_guessing" &&
        cfg.scenario != "gamble")
        throw ConfigError("unknown scenario '" + cfg.scenario + "'");
}

/**
 * Flat "key = value" text; '#' starts a comment. Errors carry the line
 * number. `overrides` are applied afterwards and win over the file.
 */
inline ExperimentConfig parse_config(std::istream& in, const std::map<std::string, std::string>& overrides = {},
                                     const std::string& name = "config") {
    ExperimentConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        try {
            if (eq == std::string::npos) throw ConfigError("expected 'key = value'");
            apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(name + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    for (const auto& [k, v] : overrides) {
        try {
            apply_setting(cfg, k, v);
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("command line: ") + e.what());
        }
    }
    validate_config(cfg);
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path, const std::map<std::string, std::string>& overrides = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    return parse_config(in, overrides, path);
}

// ----------------------------------------------------------------------------
// Experiments
// ----------------------------------------------------------------------------

/// %.17g formatting, independent of the locale.
inline std::string format_real(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Short form used in file names, e.g. 0.05.
inline std::string format_radius(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", x);
    return buf;
}

inline LowRankMDP experiment_mdp(const ExperimentConfig& cfg) {
    if (!cfg.mdp_path.empty()) return load_mdp(cfg.mdp_path);
    if (cfg.scenario == "ring") return build_ring(cfg.horizon);
    if (cfg.scenario == "string_guessing") return build_string_guessing_mdp(StringGuessingParams{});
    if (cfg.scenario == "gamble") return build_gamble_mdp(GambleParams{});
    throw ConfigError("unknown scenario '" + cfg.scenario + "'");
}

inline std::vector<LowRankMDP> perturbed_models(const LowRankMDP& m, const ExperimentConfig& cfg) {
    const PerturbSupport support = cfg.support == "full" ? PerturbSupport::full : PerturbSupport::reachable;
    const CounterRng root(cfg.seed);
    std::vector<LowRankMDP> models;
    for (int j = 0; j < cfg.num_perturbed; ++j) models.push_back(perturb_mdp(m, cfg.delta, root.split(j)(), support));
    return models;
}

struct SweepResult {
    double r_xi = 0.0;
    double r_eta = 0.0;
    R2pgTrace trace;
    std::vector<double> empirical; ///< [k] empirical robust value of the mixture of pi^1..pi^k
    SuboptimalityReport bound;     ///< against the best robust value in the trace
    double seconds = 0.0;
};

struct ExperimentResult {
    std::vector<SweepResult> sweeps;
    double nominal_optimal_empirical = 0.0; ///< empirical robust value of the nominal DP-optimal policy
    double nominal_optimal_value = 0.0;
};

/// Runs one sweep point against a fixed perturbed set.
inline SweepResult run_sweep_point(const LowRankMDP& m, const std::vector<LowRankMDP>& models, double r_xi,
                                   double r_eta, const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    SweepResult sr;
    sr.r_xi = r_xi;
    sr.r_eta = r_eta;
    const AmbiguityRadii radii = AmbiguityRadii::constant(m.H, r_xi, r_eta);
    NpgConfig npg;
    npg.alpha = cfg.alpha;
    npg.episodes = cfg.K;
    sr.trace = run_r2pg(m, radii, npg, make_inner_solver(parse_inner_method(cfg.solver)));
    const Mat values = policy_values_in_models(sr.trace.policies, models);
    Vec running = Vec::Zero(values.cols());
    for (Eigen::Index k = 0; k < values.rows(); ++k) {
        running += values.row(k).transpose();
        sr.empirical.push_back((running / static_cast<double>(k + 1)).minCoeff());
    }
    const double surrogate = *std::max_element(sr.trace.robust_values.begin(), sr.trace.robust_values.end());
    sr.bound = suboptimality_check(m, radii, sr.trace, surrogate);
    sr.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sr;
}

inline void write_sweep_csv(std::ostream& os, const SweepResult& sr) {
    os << "episode,robust_value_internal,empirical_robust_value,nominal_value\n";
    for (int k = 0; k < sr.trace.episodes(); ++k)
        os << k + 1 << ',' << format_real(sr.trace.robust_values[k]) << ',' << format_real(sr.empirical[k]) << ','
           << format_real(sr.trace.nominal_values[k]) << '\n';
}

inline std::string sweep_file_name(double r_xi, double r_eta) {
    return "results_" + format_radius(r_xi) + "_" + format_radius(r_eta) + ".csv";
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + p.string() + "'");
    return out;
}

} // namespace detail

/**
 * For each (R_xi, R_eta) in the sweep: run the planner, evaluate each
 * episode's running mixture on a shared set of perturbed models, and write
 * results_<Rxi>_<Reta>.csv. summary.csv holds the final values and the
 * convergence-bound report; timing.csv holds wall-clock seconds, kept apart
 * so that reruns reproduce the other files byte for byte.
 */
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    validate_config(cfg);
    const LowRankMDP m = experiment_mdp(cfg);
    require_valid(m);
    const std::filesystem::path dir(cfg.out);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw ConfigError("cannot create output directory '" + cfg.out + "'");

    const std::vector<LowRankMDP> models = perturbed_models(m, cfg);
    ExperimentResult res;
    const OptimalSolution opt = optimal_dp(m);
    res.nominal_optimal_value = opt.values.init_value;
    res.nominal_optimal_empirical = empirical_robust_value(opt.policy, models);

    for (double rx : cfg.r_xi)
        for (double re : cfg.r_eta) {
            SweepResult sr = run_sweep_point(m, models, rx, re, cfg);
            auto out = detail::open_output(dir / sweep_file_name(rx, re));
            write_sweep_csv(out, sr);
            if (!out) throw ConfigError("failed writing results for r_xi=" + format_radius(rx));
            res.sweeps.push_back(std::move(sr));
        }

    auto summary = detail::open_output(dir / "summary.csv");
    summary << "r_xi,r_eta,K,alpha,mixture_robust_value,final_empirical_robust_value,final_nominal_value,"
               "nominal_optimal_empirical_robust_value,bound_surrogate,bound_lhs,bound_rhs,bound_pass\n";
    for (const SweepResult& sr : res.sweeps)
        summary << format_real(sr.r_xi) << ',' << format_real(sr.r_eta) << ',' << sr.trace.episodes() << ','
                << format_real(sr.trace.alpha) << ',' << format_real(sr.trace.mixture_value) << ','
                << format_real(sr.empirical.back()) << ',' << format_real(sr.trace.nominal_values.back()) << ','
                << format_real(res.nominal_optimal_empirical) << ',' << format_real(sr.bound.surrogate) << ','
                << format_real(sr.bound.lhs) << ',' << format_real(sr.bound.rhs) << ','
                << (sr.bound.pass() ? 1 : 0) << '\n';
    if (!summary) throw ConfigError("failed writing summary.csv");

    auto timing = detail::open_output(dir / "timing.csv");
    timing << "r_xi,r_eta,seconds\n";
    for (const SweepResult& sr : res.sweeps)
        timing << format_real(sr.r_xi) << ',' << format_real(sr.r_eta) << ',' << format_real(sr.seconds) << '\n';
    return res;
}

} // namespace lrmdp
