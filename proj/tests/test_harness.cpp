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

#include "support.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace lrmdp;
using namespace lrmdp::testing;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("lrmdp_harness_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

ExperimentConfig config_from(const std::string& text, const std::map<std::string, std::string>& overrides = {}) {
    std::istringstream in(text);
    return parse_config(in, overrides);
}

} // namespace

// ---------------------------------------------------------------------------
// Perturbation
// ---------------------------------------------------------------------------

TEST(Perturb, ZeroDeltaIsIdentity) {
    const LowRankMDP ring = build_ring(4);
    const LowRankMDP p = perturb_mdp(ring, 0.0, 7);
    for (int h = 0; h < ring.H; ++h) {
        EXPECT_EQ(p.mu[h], ring.mu[h]);
        EXPECT_EQ(p.phi[h], ring.phi[h]);
        EXPECT_EQ(p.nu[h], ring.nu[h]);
    }
}

TEST(Perturb, RowsStayOnSimplex) {
    const LowRankMDP ring = build_ring(4);
    for (auto support : {PerturbSupport::reachable, PerturbSupport::full}) {
        const LowRankMDP p = perturb_mdp(ring, 0.1, 11, support);
        EXPECT_TRUE(validate_mdp(p).ok());
        for (int h = 0; h < p.H; ++h) {
            const Mat P = p.kernel(h);
            for (Eigen::Index row = 0; row < P.rows(); ++row) {
                EXPECT_NEAR(P.row(row).sum(), 1.0, 1e-10);
                EXPECT_GE(P.row(row).minCoeff(), 0.0);
            }
        }
    }
}

TEST(Perturb, DeterministicGivenSeed) {
    const LowRankMDP ring = build_ring(4);
    const LowRankMDP a = perturb_mdp(ring, 0.1, 42), b = perturb_mdp(ring, 0.1, 42), c = perturb_mdp(ring, 0.1, 43);
    bool differs = false;
    for (int h = 0; h < ring.H; ++h) {
        EXPECT_EQ(a.mu[h], b.mu[h]);
        differs = differs || a.mu[h] != c.mu[h];
    }
    EXPECT_TRUE(differs);
}

TEST(Perturb, DeviationBounds) {
    std::mt19937_64 gen(5);
    const LowRankMDP m = random_mdp(gen, 4, 3, 3, 5);
    for (double delta : {0.05, 0.1, 0.3}) {
        const PerturbedModel pm = perturb_mdp_detailed(m, delta, 99, PerturbSupport::full);
        for (int h = 0; h < m.H; ++h) {
            const Mat nominal = m.kernel(h);
            // Raw noise stays within delta; clipping and renormalizing at most doubles it.
            EXPECT_LE((pm.raw_kernel[h] - nominal).cwiseAbs().maxCoeff(), delta + 1e-15);
            EXPECT_LE((pm.mdp.kernel(h) - nominal).cwiseAbs().maxCoeff(), 2.0 * delta + 1e-12);
        }
    }
}

TEST(Perturb, ReachableSupportKeepsUnreachableStatesAtZero) {
    const LowRankMDP ring = build_ring(3);
    const LowRankMDP p = perturb_mdp(ring, 0.2, 3, PerturbSupport::reachable);
    for (int h = 0; h < ring.H; ++h) {
        const Mat P = p.kernel(h);
        for (int s = 0; s < 4; ++s)
            for (int a = 0; a < 3; ++a) EXPECT_EQ(P(ring.sa(s, a), (s + 2) % 4), 0.0);
    }
}

TEST(Perturb, GeneralFeaturesBecomeTabularWithSameRewards) {
    std::mt19937_64 gen(8);
    const LowRankMDP m = random_mdp(gen, 3, 2, 3, 4);
    const LowRankMDP p = perturb_mdp(m, 0.1, 1);
    EXPECT_TRUE(has_tabular_features(p));
    EXPECT_TRUE(validate_mdp(p).ok());
    for (int h = 0; h < m.H; ++h) EXPECT_LE((p.rewards(h) - m.rewards(h)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Perturb, DegenerateRowIsReported) {
    // Uniform rows over many states with large noise eventually clip to zero.
    LowRankMDP m = to_tabular(build_ring(1));
    for (int row = 0; row < 12; ++row) m.mu[0].col(row).setConstant(0.25);
    ASSERT_TRUE(validate_mdp(m).ok());
    bool thrown = false;
    for (std::uint64_t seed = 0; seed < 2000 && !thrown; ++seed) {
        try {
            perturb_mdp(m, 0.95, seed, PerturbSupport::full);
        } catch (const ValidationError& e) {
            thrown = std::string(e.what()).find("vanished") != std::string::npos;
        }
    }
    EXPECT_TRUE(thrown);
    EXPECT_THROW(perturb_mdp(m, 1.0, 0), ValidationError);
    EXPECT_THROW(perturb_mdp(m, -0.1, 0), ValidationError);
}

// ---------------------------------------------------------------------------
// Empirical robust value
// ---------------------------------------------------------------------------

TEST(EmpiricalValue, SingleNominalModel) {
    const LowRankMDP ring = build_ring(4);
    const OptimalSolution opt = optimal_dp(ring);
    EXPECT_DOUBLE_EQ(empirical_robust_value(opt.policy, {ring}), opt.values.init_value);
}

TEST(EmpiricalValue, DominatedModelGivesMinimum) {
    LowRankMDP ring = build_ring(3);
    LowRankMDP worse = ring;
    for (auto& nu : worse.nu) nu *= 0.5;
    const Policy pi = optimal_dp(ring).policy;
    const double v = nominal_dp(worse, pi).init_value;
    EXPECT_DOUBLE_EQ(empirical_robust_value(pi, {ring, worse}), v);
    EXPECT_DOUBLE_EQ(empirical_robust_value(pi, {worse, ring}), v);
}

TEST(EmpiricalValue, MixtureIsMeanThenMin) {
    std::mt19937_64 gen(2);
    const LowRankMDP m = random_mdp(gen, 3, 2, 3, 4);
    std::vector<LowRankMDP> models;
    for (int j = 0; j < 5; ++j) models.push_back(perturb_mdp(m, 0.2, j, PerturbSupport::full));
    const std::vector<Policy> pis = {random_policy(gen, 3, 3, 2), random_policy(gen, 3, 3, 2)};
    double expected = std::numeric_limits<double>::infinity();
    for (const LowRankMDP& mm : models)
        expected = std::min(expected, 0.5 * (nominal_dp(mm, pis[0]).init_value + nominal_dp(mm, pis[1]).init_value));
    EXPECT_NEAR(empirical_robust_value(pis, models), expected, 1e-14);
    EXPECT_THROW(empirical_robust_value(pis, {}), ValidationError);
    EXPECT_THROW(empirical_robust_value(std::vector<Policy>{}, models), ValidationError);
}

TEST(EmpiricalValue, SetContainingNominalIsPessimistic) {
    std::mt19937_64 gen(13);
    for (int trial = 0; trial < 20; ++trial) {
        const LowRankMDP m = random_mdp(gen, 4, 3, 4, 5);
        const Policy pi = random_policy(gen, 4, 4, 3);
        std::vector<LowRankMDP> models = {m};
        for (int j = 0; j < 4; ++j) models.push_back(perturb_mdp(m, 0.1, 100 * trial + j, PerturbSupport::full));
        EXPECT_LE(empirical_robust_value(pi, models), nominal_dp(m, pi).init_value + 1e-12);
    }
}

TEST(EmpiricalValue, AddingModelsNeverIncreasesValue) {
    std::mt19937_64 gen(21);
    const LowRankMDP ring = build_ring(4);
    const Policy pi = random_policy(gen, 4, 4, 3);
    std::vector<LowRankMDP> models;
    double prev = std::numeric_limits<double>::infinity();
    for (int j = 0; j < 15; ++j) {
        models.push_back(perturb_mdp(ring, 0.1, j));
        const double v = empirical_robust_value(pi, models);
        EXPECT_LE(v, prev);
        prev = v;
    }
}

TEST(RobustValue, NonIncreasingInXiRadius) {
    std::mt19937_64 gen(31);
    std::vector<LowRankMDP> models = {build_ring(4)};
    for (int i = 0; i < 10; ++i) models.push_back(random_mdp(gen, 4, 3, 4, 6));
    for (const LowRankMDP& m : models) {
        const Policy pi = random_policy(gen, m.H, m.S, m.A);
        double prev = std::numeric_limits<double>::infinity();
        for (double rx : {0.0, 0.05, 0.2, 0.4, 0.8, 1.2}) {
            const double v = robust_policy_eval(m, pi, AmbiguityRadii::constant(m.H, rx, 0.0)).init_value;
            EXPECT_LE(v, prev + 1e-9) << rx;
            prev = v;
        }
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

TEST(Config, Defaults) {
    const ExperimentConfig cfg = config_from("");
    EXPECT_EQ(cfg.scenario, "ring");
    EXPECT_EQ(cfg.num_perturbed, 20);
    EXPECT_EQ(cfg.support, "reachable");
}

TEST(Config, ParsesKeysListsAndComments) {
    const ExperimentConfig cfg = config_from("# ring sweep\n"
                                             "scenario = \"ring\"\n"
                                             "K = 200   # episodes\n"
                                             "r_xi = 0.05, 0.2,0.4\n"
                                             "r-eta = 0.01\n"
                                             "\n"
                                             "delta = 0.1\n"
                                             "num_perturbed = 7\n"
                                             "seed = 9\n"
                                             "out = results\n"
                                             "solver = alt\n");
    EXPECT_EQ(cfg.K, 200);
    EXPECT_EQ(cfg.r_xi, (std::vector<double>{0.05, 0.2, 0.4}));
    EXPECT_EQ(cfg.r_eta, (std::vector<double>{0.01}));
    EXPECT_EQ(cfg.num_perturbed, 7);
    EXPECT_EQ(cfg.seed, 9u);
    EXPECT_EQ(cfg.out, "results");
    EXPECT_EQ(cfg.solver, "alt");
}

TEST(Config, OverridesWin) {
    const ExperimentConfig cfg = config_from("K = 200\nr_xi = 0.05\n", {{"K", "3"}, {"r_xi", "0.2,0.4"}});
    EXPECT_EQ(cfg.K, 3);
    EXPECT_EQ(cfg.r_xi, (std::vector<double>{0.2, 0.4}));
}

TEST(Config, ErrorsCarryLineNumbers) {
    const auto message = [](const std::string& text) {
        try {
            config_from(text);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    EXPECT_NE(message("K = 2\n\nbogus = 1\n").find("config:3:"), std::string::npos);
    EXPECT_NE(message("K = two\n").find("config:1:"), std::string::npos);
    EXPECT_NE(message("# c\nr_xi 0.1\n").find("config:2:"), std::string::npos);
    EXPECT_NE(message("r_xi = 0.1,,0.2\n").find("config:1:"), std::string::npos);
}

TEST(Config, RejectsInvalidValues) {
    EXPECT_THROW(config_from("K = 0\n"), ConfigError);
    EXPECT_THROW(config_from("delta = 1\n"), ConfigError);
    EXPECT_THROW(config_from("num_perturbed = 0\n"), ConfigError);
    EXPECT_THROW(config_from("r_xi = -0.1\n"), ConfigError);
    EXPECT_THROW(config_from("support = some\n"), ConfigError);
    EXPECT_THROW(config_from("scenario = maze\n"), ConfigError);
    EXPECT_THROW(config_from("", {{"nope", "1"}}), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/lrmdp.cfg"), ConfigError);
}

TEST(Config, CsvNumbersUseSeventeenDigits) {
    EXPECT_EQ(format_real(0.1), "0.10000000000000001");
    EXPECT_EQ(format_real(2.0), "2");
    EXPECT_EQ(sweep_file_name(0.05, 0.01), "results_0.05_0.01.csv");
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

TEST(Experiment, SingleEpisodeSingleRadius) {
    const fs::path dir = fresh_dir("k1");
    ExperimentConfig cfg = config_from("K = 1\nr_xi = 0.05\nr_eta = 0.01\nnum_perturbed = 3\n");
    cfg.out = dir.string();
    const ExperimentResult res = run_experiment(cfg);
    ASSERT_EQ(res.sweeps.size(), 1u);
    const auto rows = lines_of(dir / "results_0.05_0.01.csv");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0], "episode,robust_value_internal,empirical_robust_value,nominal_value");
    EXPECT_EQ(rows[1].substr(0, 2), "1,");
    EXPECT_EQ(lines_of(dir / "summary.csv").size(), 2u);
    EXPECT_EQ(lines_of(dir / "timing.csv").size(), 2u);
    fs::remove_all(dir);
}

TEST(Experiment, RingSweepWritesOneFilePerRadius) {
    const fs::path dir = fresh_dir("ring");
    ExperimentConfig cfg = config_from("K = 10\nr_xi = 0.05,0.2,0.4,0.8,1.2\nr_eta = 0.01\nnum_perturbed = 5\n");
    cfg.out = dir.string();
    const ExperimentResult res = run_experiment(cfg);
    ASSERT_EQ(res.sweeps.size(), 5u);
    for (const char* name : {"results_0.05_0.01.csv", "results_0.2_0.01.csv", "results_0.4_0.01.csv",
                             "results_0.8_0.01.csv", "results_1.2_0.01.csv"})
        EXPECT_EQ(lines_of(dir / name).size(), 11u) << name;
    EXPECT_EQ(lines_of(dir / "summary.csv").size(), 6u);
    for (const SweepResult& sr : res.sweeps) {
        ASSERT_EQ(sr.empirical.size(), 10u);
        // The running mixture's empirical value after one episode is pi^1's.
        const auto models = perturbed_models(build_ring(4), cfg);
        EXPECT_NEAR(sr.empirical[0], empirical_robust_value(sr.trace.policies[0], models), 1e-12);
        EXPECT_NEAR(sr.empirical.back(), empirical_robust_value(sr.trace.policies, models), 1e-12);
    }
    fs::remove_all(dir);
}

TEST(Experiment, RerunIsByteIdentical) {
    const fs::path a = fresh_dir("rerun_a"), b = fresh_dir("rerun_b");
    ExperimentConfig cfg = config_from("K = 8\nr_xi = 0.05,0.4\nr_eta = 0.01\nseed = 7\nnum_perturbed = 4\n");
    cfg.out = a.string();
    run_experiment(cfg);
    cfg.out = b.string();
    run_experiment(cfg);
    for (const char* name : {"results_0.05_0.01.csv", "results_0.4_0.01.csv", "summary.csv"})
        EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Experiment, UnwritableOutputIsReported) {
    const fs::path dir = fresh_dir("blocked");
    std::ofstream(dir / "file") << "x";
    ExperimentConfig cfg = config_from("K = 1\n");
    cfg.out = (dir / "file" / "sub").string();
    EXPECT_THROW(run_experiment(cfg), ConfigError);
    fs::remove_all(dir);
}

TEST(Experiment, LoadsModelFromJson) {
    const fs::path dir = fresh_dir("json");
    save_mdp((dir / "sg.json").string(), build_string_guessing_mdp({3, 10, 0.05}));
    ExperimentConfig cfg = config_from("K = 2\nr_xi = 0.1\nr_eta = 0\nnum_perturbed = 2\n");
    cfg.mdp_path = (dir / "sg.json").string();
    cfg.out = (dir / "out").string();
    const ExperimentResult res = run_experiment(cfg);
    EXPECT_NEAR(res.nominal_optimal_value, 7.0, 1e-12);
    fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const char* exe = std::getenv("LRMDP_CLI");
        if (exe == nullptr || !fs::exists(exe)) GTEST_SKIP() << "LRMDP_CLI not set";
        cli_ = exe;
        dir_ = fresh_dir("cli");
    }
    void TearDown() override {
        if (!dir_.empty()) fs::remove_all(dir_);
    }
    int run(const std::string& args) {
        const std::string cmd = "\"" + cli_ + "\" " + args + " > \"" + (dir_ / "stdout.txt").string() + "\" 2> \"" +
                                (dir_ / "stderr.txt").string() + "\"";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }
    std::string out() const { return slurp(dir_ / "stdout.txt"); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::string cli_;
    fs::path dir_;
};

TEST_F(Cli, ScenarioExportAndValidate) {
    ASSERT_EQ(run("scenario ring --horizon 4 --export " + path("ring.json")), 0);
    EXPECT_EQ(load_mdp(path("ring.json")).H, 4);
    EXPECT_EQ(run("validate " + path("ring.json")), 0);
    EXPECT_NE(out().find("ok: H=4 S=4 A=3 d=12"), std::string::npos);
    EXPECT_EQ(run("scenario maze"), 1);
}

TEST_F(Cli, ValidateReportsViolations) {
    LowRankMDP m = build_ring(2);
    m.nu[0](0) = 2.0;
    write_json_file(path("bad.json"), to_json(m));
    EXPECT_EQ(run("validate " + path("bad.json")), 1);
    EXPECT_FALSE(out().empty());
    EXPECT_EQ(run("validate " + path("missing.json")), 1);
}

TEST_F(Cli, EvalRobustMatchesLibrary) {
    const LowRankMDP m = build_string_guessing_mdp({3, 10, 0.05});
    const StringGuessingParams p{3, 10, 0.05};
    save_mdp(path("sg.json"), m);
    write_json_file(path("pi.json"), to_json(string_guessing_all_a1(p)));
    const AmbiguityRadii r = string_guessing_radii(p);
    std::string rxi;
    for (double x : r.r_xi) rxi += (rxi.empty() ? "" : ",") + format_real(x);
    ASSERT_EQ(run("eval-robust " + path("sg.json") + " --policy " + path("pi.json") + " --r-xi " + rxi +
                  " --r-eta 0 --out " + path("r.json")),
              0);
    const json j = read_json_file(path("r.json"));
    EXPECT_NEAR(j.at("init_value").get<double>(), 5.8, 1e-9);
    EXPECT_EQ(run("eval-robust " + path("sg.json") + " --policy " + path("pi.json") + " --r-xi 0.1,0.2"), 1);
}

TEST_F(Cli, SolveInner) {
    ASSERT_EQ(run("solve-inner --a 1,0 --b 1,0 --rx 0.5 --ry 0.5 --method sdp"), 0);
    const json j = json::parse(out());
    EXPECT_NEAR(j.at("value").get<double>(), 0.25, 1e-6);
    EXPECT_EQ(run("solve-inner --a 1,0 --b 1,0,0 --rx 0.5 --ry 0.5"), 1);
    EXPECT_EQ(run("solve-inner --a 1,0 --b 1,0 --rx 0.5 --ry 0.5 --method magic"), 1);
}

TEST_F(Cli, RunWithConfigAndOverrides) {
    std::ofstream(path("exp.cfg")) << "K = 50\nr_xi = 0.05\nr_eta = 0.01\nnum_perturbed = 3\n";
    ASSERT_EQ(run("run " + path("exp.cfg") + " --K 2 --r-xi 0.2 --out " + path("out")), 0);
    EXPECT_EQ(lines_of(dir_ / "out" / "results_0.2_0.01.csv").size(), 3u);
    EXPECT_FALSE(fs::exists(dir_ / "out" / "results_0.05_0.01.csv"));
    std::ofstream(path("bad.cfg")) << "K = 5\nwhat = 1\n";
    EXPECT_EQ(run("run " + path("bad.cfg")), 1);
    EXPECT_NE(slurp(dir_ / "stderr.txt").find(":2:"), std::string::npos);
}

TEST_F(Cli, UsageErrors) {
    EXPECT_EQ(run(""), 1);
    EXPECT_EQ(run("frobnicate"), 1);
    EXPECT_EQ(run("--help"), 0);
}
