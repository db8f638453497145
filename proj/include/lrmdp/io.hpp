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
 * JSON serialization.
 *
 * MDP files hold "H", "S", "A", "d", "rho" [S], "phi" [H][S][A][d],
 * "mu" [H][S][d] and "nu" [H][d]. Policy files hold "H", "S", "A" and
 * "pi" [H][S][A]. Array shapes are checked before any model validation.
 */

#include "lrmdp/bilinear.hpp"
#include "lrmdp/robust.hpp"

#include <json.hpp>

#include <fstream>
#include <string>

namespace lrmdp {

using json = nlohmann::json;

namespace detail {

inline json vec_to_json(const Vec& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

inline const json& field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw StructuralError(std::string("JSON: missing field '") + key + "'");
    return j.at(key);
}

inline int int_field(const json& j, const char* key) {
    const json& v = field(j, key);
    if (!v.is_number_integer()) throw StructuralError(std::string("JSON: field '") + key + "' must be an integer");
    return v.get<int>();
}

inline void expect_array(const json& j, size_t n, const std::string& what) {
    if (!j.is_array() || j.size() != n)
        throw StructuralError("JSON: " + what + " must be an array of length " + std::to_string(n));
}

inline Vec json_to_vec(const json& j, Eigen::Index n, const std::string& what) {
    expect_array(j, static_cast<size_t>(n), what);
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!j[i].is_number()) throw StructuralError("JSON: " + what + " must hold numbers");
        v(i) = j[i].get<double>();
    }
    return v;
}

} // namespace detail

inline json to_json(const LowRankMDP& m) {
    check_shapes(m);
    json j;
    j["H"] = m.H;
    j["S"] = m.S;
    j["A"] = m.A;
    j["d"] = m.d;
    j["rho"] = detail::vec_to_json(m.rho);
    json phi = json::array(), mu = json::array(), nu = json::array();
    for (int h = 0; h < m.H; ++h) {
        json ph = json::array();
        for (int s = 0; s < m.S; ++s) {
            json ps = json::array();
            for (int a = 0; a < m.A; ++a) ps.push_back(detail::vec_to_json(m.feature(h, s, a)));
            ph.push_back(std::move(ps));
        }
        phi.push_back(std::move(ph));
        json mh = json::array();
        for (int s = 0; s < m.S; ++s) mh.push_back(detail::vec_to_json(m.mu[h].row(s).transpose()));
        mu.push_back(std::move(mh));
        nu.push_back(detail::vec_to_json(m.nu[h]));
    }
    j["phi"] = std::move(phi);
    j["mu"] = std::move(mu);
    j["nu"] = std::move(nu);
    return j;
}

/// Throws StructuralError on missing fields or shape mismatches.
inline LowRankMDP mdp_from_json(const json& j) {
    LowRankMDP m;
    m.H = detail::int_field(j, "H");
    m.S = detail::int_field(j, "S");
    m.A = detail::int_field(j, "A");
    m.d = detail::int_field(j, "d");
    if (m.H <= 0 || m.S <= 0 || m.A <= 0 || m.d <= 0) throw StructuralError("JSON: H, S, A, d must be positive");
    m.rho = detail::json_to_vec(detail::field(j, "rho"), m.S, "rho");
    const json& phi = detail::field(j, "phi");
    const json& mu = detail::field(j, "mu");
    const json& nu = detail::field(j, "nu");
    detail::expect_array(phi, m.H, "phi");
    detail::expect_array(mu, m.H, "mu");
    detail::expect_array(nu, m.H, "nu");
    for (int h = 0; h < m.H; ++h) {
        const std::string hs = "[" + std::to_string(h) + "]";
        detail::expect_array(phi[h], m.S, "phi" + hs);
        Mat ph(m.S * m.A, m.d);
        for (int s = 0; s < m.S; ++s) {
            const std::string ss = hs + "[" + std::to_string(s) + "]";
            detail::expect_array(phi[h][s], m.A, "phi" + ss);
            for (int a = 0; a < m.A; ++a)
                ph.row(m.sa(s, a)) =
                    detail::json_to_vec(phi[h][s][a], m.d, "phi" + ss + "[" + std::to_string(a) + "]").transpose();
        }
        detail::expect_array(mu[h], m.S, "mu" + hs);
        Mat mh(m.S, m.d);
        for (int s = 0; s < m.S; ++s)
            mh.row(s) = detail::json_to_vec(mu[h][s], m.d, "mu" + hs + "[" + std::to_string(s) + "]").transpose();
        m.phi.push_back(std::move(ph));
        m.mu.push_back(std::move(mh));
        m.nu.push_back(detail::json_to_vec(nu[h], m.d, "nu" + hs));
    }
    return m;
}

inline json to_json(const Policy& p) {
    json j;
    const int H = p.horizon();
    j["H"] = H;
    j["S"] = H > 0 ? static_cast<int>(p.pi[0].rows()) : 0;
    j["A"] = H > 0 ? static_cast<int>(p.pi[0].cols()) : 0;
    json pi = json::array();
    for (const Mat& t : p.pi) {
        json rows = json::array();
        for (Eigen::Index s = 0; s < t.rows(); ++s) rows.push_back(detail::vec_to_json(t.row(s).transpose()));
        pi.push_back(std::move(rows));
    }
    j["pi"] = std::move(pi);
    return j;
}

inline Policy policy_from_json(const json& j) {
    const int H = detail::int_field(j, "H");
    const int S = detail::int_field(j, "S");
    const int A = detail::int_field(j, "A");
    if (H <= 0 || S <= 0 || A <= 0) throw StructuralError("JSON: policy H, S, A must be positive");
    const json& pi = detail::field(j, "pi");
    detail::expect_array(pi, H, "pi");
    Policy p;
    for (int h = 0; h < H; ++h) {
        detail::expect_array(pi[h], S, "pi[" + std::to_string(h) + "]");
        Mat t(S, A);
        for (int s = 0; s < S; ++s)
            t.row(s) = detail::json_to_vec(pi[h][s], A, "pi[" + std::to_string(h) + "][" + std::to_string(s) + "]")
                           .transpose();
        p.pi.push_back(std::move(t));
    }
    return p;
}

inline json to_json(const RobustEvalResult& r) {
    json j;
    json v = json::array(), q = json::array(), om = json::array(), xi = json::array(), eta = json::array();
    for (const Vec& x : r.v_hat) v.push_back(detail::vec_to_json(x));
    for (const Mat& t : r.q_hat) {
        json rows = json::array();
        for (Eigen::Index s = 0; s < t.rows(); ++s) rows.push_back(detail::vec_to_json(t.row(s).transpose()));
        q.push_back(std::move(rows));
    }
    for (const Vec& x : r.omega_nominal) om.push_back(detail::vec_to_json(x));
    for (const Vec& x : r.xi_star) xi.push_back(detail::vec_to_json(x));
    for (const Vec& x : r.eta_star) eta.push_back(detail::vec_to_json(x));
    j["v_hat"] = std::move(v);
    j["q_hat"] = std::move(q);
    j["omega_nominal"] = std::move(om);
    j["xi_star"] = std::move(xi);
    j["eta_star"] = std::move(eta);
    j["inner_values"] = r.inner_values;
    j["init_value"] = r.init_value;
    return j;
}

inline json to_json(const SolveReport& r) {
    json j;
    j["x_star"] = detail::vec_to_json(r.x_star);
    j["y_star"] = detail::vec_to_json(r.y_star);
    j["value"] = r.value;
    if (std::isfinite(r.certified_lower_bound)) j["certified_lower_bound"] = r.certified_lower_bound;
    else j["certified_lower_bound"] = nullptr;
    j["method"] = to_string(r.method);
    j["iterations"] = r.iterations;
    return j;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw StructuralError("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
    if (!out) throw ConfigError("failed writing '" + path + "'");
}

inline LowRankMDP load_mdp(const std::string& path) { return mdp_from_json(read_json_file(path)); }
inline Policy load_policy(const std::string& path) { return policy_from_json(read_json_file(path)); }
inline void save_mdp(const std::string& path, const LowRankMDP& m) { write_json_file(path, to_json(m)); }

} // namespace lrmdp
