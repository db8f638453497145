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

// lrmdp-cli: validate models, evaluate policies robustly, solve inner
// problems, export scenarios and run perturbation experiments.
//
// Exit status: 0 success, 1 validation or input failure, 2 solver failure.

#include "lrmdp/lrmdp.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace lrmdp;

namespace {

constexpr int kExitInvalid = 1;
constexpr int kExitSolver = 2;

Vec parse_vector(const std::string& text, const std::string& what) {
    std::vector<double> xs;
    try {
        xs = detail::parse_list(text, what);
    } catch (const ConfigError& e) {
        throw ValidationError(e.what());
    }
    return Eigen::Map<const Vec>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

// A single value applies to every step; otherwise one value per step.
std::vector<double> per_step(const std::string& text, int H, const std::string& what) {
    const Vec v = parse_vector(text, what);
    if (v.size() == 1) return std::vector<double>(H, v(0));
    if (v.size() != H) throw ValidationError(what + " needs 1 or H=" + std::to_string(H) + " values");
    return std::vector<double>(v.data(), v.data() + v.size());
}

int cmd_validate(const std::string& path) {
    const LowRankMDP m = load_mdp(path);
    const ValidationReport rep = validate_mdp(m);
    if (rep.ok()) {
        std::cout << "ok: H=" << m.H << " S=" << m.S << " A=" << m.A << " d=" << m.d << "\n";
        return 0;
    }
    for (const Violation& v : rep.violations) std::cout << v.describe() << "\n";
    return kExitInvalid;
}

int cmd_eval(const std::string& mdp_path, const std::string& policy_path, const std::string& rxi,
             const std::string& reta, const std::string& method, const std::string& out) {
    const LowRankMDP m = load_mdp(mdp_path);
    const Policy pi = load_policy(policy_path);
    AmbiguityRadii radii;
    radii.r_xi = per_step(rxi, m.H, "--r-xi");
    radii.r_eta = per_step(reta, m.H, "--r-eta");
    const RobustEvalResult r = robust_policy_eval(m, pi, radii, make_inner_solver(parse_inner_method(method)));
    const json j = to_json(r);
    if (out.empty()) std::cout << j.dump(2) << "\n";
    else write_json_file(out, j);
    std::cerr << "robust value at rho: " << format_real(r.init_value) << "\n";
    return 0;
}

int cmd_solve_inner(const std::string& a, const std::string& b, double rx, double ry, const std::string& method) {
    BilinearBallProblem p{parse_vector(a, "--a"), parse_vector(b, "--b"), rx, ry};
    const SolveReport r = make_inner_solver(parse_inner_method(method))(p);
    std::cout << to_json(r).dump(2) << "\n";
    return 0;
}

int cmd_scenario(const std::string& name, const std::string& path, int horizon) {
    LowRankMDP m;
    if (name == "ring") m = build_ring(horizon);
    else if (name == "string_guessing") m = build_string_guessing_mdp(StringGuessingParams{});
    else if (name == "gamble") m = build_gamble_mdp(GambleParams{});
    else throw ValidationError("unknown scenario '" + name + "' (ring, string_guessing, gamble)");
    if (path.empty() || path == "-") std::cout << to_json(m).dump(2) << "\n";
    else save_mdp(path, m);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust planning for finite-horizon low-rank MDPs"};
    app.require_subcommand(1);

    std::string mdp_path, policy_path, rxi = "0", reta = "0", method = "sdp", out;
    auto* validate = app.add_subcommand("validate", "Check a model file");
    validate->add_option("mdp", mdp_path, "model JSON")->required();

    auto* eval = app.add_subcommand("eval-robust", "Robust evaluation of a policy");
    eval->add_option("mdp", mdp_path, "model JSON")->required();
    eval->add_option("--policy", policy_path, "policy JSON")->required();
    eval->add_option("--r-xi", rxi, "R_xi, one value or one per step");
    eval->add_option("--r-eta", reta, "R_eta, one value or one per step");
    eval->add_option("--method", method, "sdp, alt or oracle");
    eval->add_option("--out", out, "write the result JSON here instead of stdout");

    std::string config_path;
    std::map<std::string, std::string> overrides;
    auto* run = app.add_subcommand("run", "Run a perturbation experiment");
    run->add_option("config", config_path, "key = value config file");
    const std::vector<std::pair<std::string, std::string>> run_flags = {
        {"--scenario", "scenario"}, {"--mdp", "mdp"},         {"--horizon", "horizon"},
        {"--K", "K"},               {"--alpha", "alpha"},     {"--r-xi", "r_xi"},
        {"--r-eta", "r_eta"},       {"--delta", "delta"},     {"--num-perturbed", "num_perturbed"},
        {"--seed", "seed"},         {"--out", "out"},         {"--solver", "solver"},
        {"--support", "support"},
    };
    std::vector<std::string> run_values(run_flags.size());
    std::vector<CLI::Option*> run_opts;
    for (size_t i = 0; i < run_flags.size(); ++i)
        run_opts.push_back(run->add_option(run_flags[i].first, run_values[i], "overrides '" + run_flags[i].second + "'"));

    std::string scen_name, export_path;
    int horizon = 4;
    auto* scen = app.add_subcommand("scenario", "Export a built-in scenario");
    scen->add_option("name", scen_name, "ring, string_guessing or gamble")->required();
    scen->add_option("--export", export_path, "output JSON path ('-' for stdout)");
    scen->add_option("--horizon", horizon, "ring horizon");

    std::string va, vb;
    double rx = 0.0, ry = 0.0;
    auto* inner = app.add_subcommand("solve-inner", "Solve min <a+x, b+y> over two balls");
    inner->add_option("--a", va, "comma-separated vector")->required();
    inner->add_option("--b", vb, "comma-separated vector")->required();
    inner->add_option("--rx", rx, "radius for x")->required();
    inner->add_option("--ry", ry, "radius for y")->required();
    inner->add_option("--method", method, "sdp, alt or oracle");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInvalid;
    }

    try {
        if (*validate) return cmd_validate(mdp_path);
        if (*eval) return cmd_eval(mdp_path, policy_path, rxi, reta, method, out);
        if (*inner) return cmd_solve_inner(va, vb, rx, ry, method);
        if (*scen) return cmd_scenario(scen_name, export_path, horizon);
        if (*run) {
            for (size_t i = 0; i < run_flags.size(); ++i)
                if (run_opts[i]->count() > 0) overrides[run_flags[i].second] = run_values[i];
            std::istringstream empty;
            const ExperimentConfig cfg =
                config_path.empty() ? parse_config(empty, overrides) : load_config(config_path, overrides);
            const ExperimentResult res = run_experiment(cfg);
            for (const SweepResult& sr : res.sweeps)
                std::cout << "r_xi=" << format_radius(sr.r_xi) << " r_eta=" << format_radius(sr.r_eta)
                          << " mixture=" << format_real(sr.trace.mixture_value)
                          << " empirical=" << format_real(sr.empirical.back()) << "\n";
            std::cout << "nominal-optimal empirical=" << format_real(res.nominal_optimal_empirical) << "\n";
            return 0;
        }
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalid;
    }
    return kExitInvalid;
}
