// Scenario files: JSON in, JSON out. Every error names the offending field path.
#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "searchmpc/mission.hpp"

namespace searchmpc {

inline constexpr int kScenarioSchemaVersion = 1;

class ScenarioError : public std::runtime_error {
public:
    ScenarioError(std::string field, const std::string& message)
        : std::runtime_error(field.empty() ? message : field + ": " + message),
          field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

namespace detail {

using nlohmann::json;

inline std::string join_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

inline void require_object(const json& j, const std::string& path,
                           std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ScenarioError(path, "expected an object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* a : allowed) known = known || item.key() == a;
        if (!known) throw ScenarioError(join_path(path, item.key()), "unknown key");
    }
}

inline double read_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ScenarioError(path, "expected a number");
    return j.get<double>();
}

inline long long read_integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) throw ScenarioError(path, "expected an integer");
    return j.get<long long>();
}

inline int read_int(const json& j, const std::string& path) {
    const long long v = read_integer(j, path);
    if (v < -(1LL << 30) || v > (1LL << 30)) throw ScenarioError(path, "integer out of range");
    return static_cast<int>(v);
}

inline Vec2 read_vec2(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2) throw ScenarioError(path, "expected [x, y]");
    return {read_number(j[0], path + "[0]"), read_number(j[1], path + "[1]")};
}

inline Mat2 read_mat2(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2) throw ScenarioError(path, "expected [[a, b], [b, c]]");
    Mat2 m;
    for (int r = 0; r < 2; ++r) {
        const Vec2 row = read_vec2(j[r], path + "[" + std::to_string(r) + "]");
        m.row(r) = row.transpose();
    }
    return m;
}

template <class F>
void if_present(const json& obj, const char* key, F&& f) {
    if (auto it = obj.find(key); it != obj.end()) f(*it);
}

inline UncertaintyMap read_map(const json& j) {
    require_object(j, "map", {"components", "normalized"});
    bool normalized = false;
    if_present(j, "normalized", [&](const json& v) {
        if (!v.is_boolean()) throw ScenarioError("map.normalized", "expected true or false");
        normalized = v.get<bool>();
    });
    auto it = j.find("components");
    if (it == j.end()) throw ScenarioError("map.components", "missing required field");
    if (!it->is_array()) throw ScenarioError("map.components", "expected an array");
    std::vector<GaussianComponent> comps;
    for (std::size_t i = 0; i < it->size(); ++i) {
        const std::string at = "components[" + std::to_string(i) + "]";
        const json& c = (*it)[i];
        require_object(c, at, {"weight", "mean", "cov"});
        for (const char* k : {"weight", "mean", "cov"})
            if (!c.contains(k)) throw ScenarioError(join_path(at, k), "missing required field");
        comps.push_back({read_number(c["weight"], at + ".weight"), read_vec2(c["mean"], at + ".mean"),
                         read_mat2(c["cov"], at + ".cov")});
    }
    if (auto problems = validate(comps, normalized); !problems.empty()) {
        const auto& first = problems.front();
        const auto colon = first.find(": ");
        if (colon == std::string::npos) throw InvalidMap(problems);
        throw ScenarioError(first.substr(0, colon), first.substr(colon + 2));
    }
    return UncertaintyMap(std::move(comps), normalized);
}

inline void read_solver(const json& j, SolverSettings& s) {
    const std::string p = "planner.solver";
    require_object(j, p, {"max_iterations", "kkt_tolerance", "constraint_tolerance", "symmetry_jitter"});
    if_present(j, "max_iterations", [&](const json& v) { s.max_iterations = read_int(v, p + ".max_iterations"); });
    if_present(j, "kkt_tolerance", [&](const json& v) { s.kkt_tolerance = read_number(v, p + ".kkt_tolerance"); });
    if_present(j, "constraint_tolerance",
               [&](const json& v) { s.constraint_tolerance = read_number(v, p + ".constraint_tolerance"); });
    if_present(j, "symmetry_jitter", [&](const json& v) { s.symmetry_jitter = read_number(v, p + ".symmetry_jitter"); });
}

inline PlannerConfig read_planner(const json& j) {
    require_object(j, "planner", {"N", "N_B", "lambda", "alpha", "radius", "Ts", "n_apply", "v_max",
                                  "a_max", "stage_reward_mode", "quadrature_order", "solver"});
    PlannerConfig cfg;
    if_present(j, "N", [&](const json& v) { cfg.horizon = read_int(v, "planner.N"); });
    if_present(j, "N_B", [&](const json& v) {
        if (v.is_null() || (v.is_string() && v.get<std::string>() == "unbounded"))
            cfg.backward_horizon.reset();
        else if (v.is_string())
            throw ScenarioError("planner.N_B", "expected an integer or \"unbounded\"");
        else
            cfg.backward_horizon = read_int(v, "planner.N_B");
    });
    if_present(j, "lambda", [&](const json& v) { cfg.lambda = read_number(v, "planner.lambda"); });
    if_present(j, "alpha", [&](const json& v) { cfg.penalty.alpha = read_number(v, "planner.alpha"); });
    if_present(j, "radius", [&](const json& v) { cfg.penalty.radius = read_number(v, "planner.radius"); });
    if_present(j, "Ts", [&](const json& v) { cfg.Ts = read_number(v, "planner.Ts"); });
    if_present(j, "n_apply", [&](const json& v) { cfg.n_apply = read_int(v, "planner.n_apply"); });
    if_present(j, "v_max", [&](const json& v) { cfg.limits.v_max = read_number(v, "planner.v_max"); });
    if_present(j, "a_max", [&](const json& v) { cfg.limits.a_max = read_number(v, "planner.a_max"); });
    if_present(j, "stage_reward_mode", [&](const json& v) {
        const std::string mode = v.is_string() ? v.get<std::string>() : "";
        if (mode == "approx")
            cfg.stage_reward.kind = StageRewardMode::Kind::approx;
        else if (mode == "quadrature")
            cfg.stage_reward.kind = StageRewardMode::Kind::quadrature;
        else
            throw ScenarioError("planner.stage_reward_mode", "expected \"approx\" or \"quadrature\"");
    });
    if_present(j, "quadrature_order",
               [&](const json& v) { cfg.stage_reward.order = read_int(v, "planner.quadrature_order"); });
    if_present(j, "solver", [&](const json& v) { read_solver(v, cfg.solver); });
    return cfg;
}

// "planner.N: must be >= 2" -> ScenarioError("planner.N", "must be >= 2")
[[noreturn]] inline void throw_violation(const std::string& v) {
    const auto colon = v.find(": ");
    if (colon == std::string::npos) throw ScenarioError("", v);
    throw ScenarioError(v.substr(0, colon), v.substr(colon + 2));
}

}  // namespace detail

/// Builds a validated Scenario from parsed JSON. Only `map` is required.
inline Scenario parse_scenario(const nlohmann::json& j) {
    using detail::if_present;
    detail::require_object(j, "", {"schema_version", "description", "map", "x0", "mission_time",
                                   "planner", "grid", "seed"});
    if_present(j, "schema_version", [](const nlohmann::json& v) {
        if (detail::read_int(v, "schema_version") != kScenarioSchemaVersion)
            throw ScenarioError("schema_version", "unsupported version");
    });
    if_present(j, "description", [](const nlohmann::json& v) {
        if (!v.is_string()) throw ScenarioError("description", "expected a string");
    });
    auto m = j.find("map");
    if (m == j.end()) throw ScenarioError("map", "missing required field");
    Scenario sc{detail::read_map(*m)};
    if_present(j, "x0", [&](const nlohmann::json& v) {
        detail::require_object(v, "x0", {"pos", "vel"});
        if_present(v, "pos", [&](const nlohmann::json& p) { sc.x0.position = detail::read_vec2(p, "x0.pos"); });
        if_present(v, "vel", [&](const nlohmann::json& p) { sc.x0.velocity = detail::read_vec2(p, "x0.vel"); });
    });
    if_present(j, "mission_time",
               [&](const nlohmann::json& v) { sc.mission_time = detail::read_number(v, "mission_time"); });
    if_present(j, "planner", [&](const nlohmann::json& v) { sc.planner = detail::read_planner(v); });
    if_present(j, "grid", [&](const nlohmann::json& v) {
        detail::require_object(v, "grid", {"cell_size"});
        if_present(v, "cell_size",
                   [&](const nlohmann::json& c) { sc.grid_cell_size = detail::read_number(c, "grid.cell_size"); });
    });
    if_present(j, "seed", [&](const nlohmann::json& v) {
        const long long s = detail::read_integer(v, "seed");
        if (s < 0) throw ScenarioError("seed", "must be >= 0");
        sc.seed = static_cast<std::uint64_t>(s);
    });
    if (auto v = sc.violations(); !v.empty()) detail::throw_violation(v.front());
    return sc;
}

inline Scenario parse_scenario_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ScenarioError("", std::string("malformed JSON: ") + e.what());
    }
    return parse_scenario(j);
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("", "cannot open scenario file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario_text(buf.str());
}

/// Full JSON form of a scenario; every default is written out explicitly.
inline nlohmann::json scenario_to_json(const Scenario& sc) {
    using nlohmann::json;
    json comps = json::array();
    for (const auto& c : sc.map.components()) {
        const Mat2& s = c.covariance;
        comps.push_back({{"weight", c.weight},
                         {"mean", {c.mean.x(), c.mean.y()}},
                         {"cov", {{s(0, 0), s(0, 1)}, {s(1, 0), s(1, 1)}}}});
    }
    const auto& p = sc.planner;
    json planner = {
        {"N", p.horizon},
        {"N_B", p.backward_horizon ? json(*p.backward_horizon) : json("unbounded")},
        {"lambda", p.lambda},
        {"alpha", p.penalty.alpha},
        {"radius", p.penalty.radius},
        {"Ts", p.Ts},
        {"n_apply", p.n_apply},
        {"v_max", p.limits.v_max},
        {"a_max", p.limits.a_max},
        {"stage_reward_mode", p.stage_reward.kind == StageRewardMode::Kind::approx ? "approx" : "quadrature"},
        {"quadrature_order", p.stage_reward.order},
        {"solver",
         {{"max_iterations", p.solver.max_iterations},
          {"kkt_tolerance", p.solver.kkt_tolerance},
          {"constraint_tolerance", p.solver.constraint_tolerance},
          {"symmetry_jitter", p.solver.symmetry_jitter}}},
    };
    json out = {{"schema_version", kScenarioSchemaVersion},
                {"map", {{"components", comps}, {"normalized", sc.map.normalized()}}},
                {"x0",
                 {{"pos", {sc.x0.position.x(), sc.x0.position.y()}},
                  {"vel", {sc.x0.velocity.x(), sc.x0.velocity.y()}}}},
                {"mission_time", sc.mission_time},
                {"planner", planner},
                {"seed", sc.seed}};
    if (sc.grid_cell_size) out["grid"] = {{"cell_size", *sc.grid_cell_size}};
    return out;
}

inline void write_scenario(const Scenario& sc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << scenario_to_json(sc).dump(2) << '\n';
}

}  // namespace searchmpc
