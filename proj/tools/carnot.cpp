#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "carnot/acceptance.hpp"
#include "carnot/distance.hpp"
#include "carnot/errors.hpp"
#include "carnot/harnack.hpp"
#include "carnot/kernels.hpp"
#include "carnot/mean_value.hpp"
#include "carnot/parametrix.hpp"

#ifndef CARNOT_VERSION
#define CARNOT_VERSION "0.0.0"
#endif

using json = nlohmann::json;
using namespace carnot;

namespace {

constexpr int kSchemaVersion = 1;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Report {
    json results = json::object();
    json checks = json::array();
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    void check(const std::string& name, bool pass, double value, double error_bar, double limit) {
        checks.push_back({{"name", name}, {"pass", pass}, {"value", value}, {"error_bar", error_bar}, {"limit", limit}});
    }
};

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

// A registry name, an inline object, or a path to a JSON file.
CarnotGroup group_from(const json& j) {
    if (j.is_object()) return CarnotGroup::from_json(j);
    if (!j.is_string()) throw ConfigError("'group' must be a name, a file or an object");
    const auto s = j.get<std::string>();
    if (s.ends_with(".json")) return CarnotGroup::from_json(read_json_file(s));
    return CarnotGroup::from_name(s);
}

json group_source(const json& j) {
    if (j.is_string() && j.get<std::string>().ends_with(".json")) return read_json_file(j.get<std::string>());
    return j;
}

OperatorSpec operator_from(const json& p) {
    json o = p.contains("operator") ? p["operator"] : json{{"group", p.value("group", json("euclidean1"))}, {"A", 1.0}};
    if (o.is_string()) o = read_json_file(o.get<std::string>());
    if (o.contains("group")) o["group"] = group_source(o["group"]);
    if (p.contains("c") && !p.contains("operator")) o["c"] = p["c"];
    return operator_from_json(o);
}

Point point_from(const json& j, int n, const char* what) {
    if (!j.is_array() || static_cast<int>(j.size()) != n)
        throw ConfigError(std::string("'") + what + "' needs " + std::to_string(n) + " coordinates");
    Point x(n);
    for (int i = 0; i < n; ++i) x[i] = j[i].get<double>();
    return x;
}

Point point_or_zero(const json& p, const char* key, int n) {
    return p.contains(key) ? point_from(p[key], n, key) : Point::Zero(n);
}

void require_keys(const json& p, std::initializer_list<const char*> allowed) {
    for (const auto& [k, v] : p.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || k == a;
        if (!ok) throw ConfigError("unknown parameter '" + k + "'");
    }
}

Report cmd_distance(const json& p) {
    require_keys(p, {"group", "x", "y", "p", "restarts", "segments", "seed"});
    auto g = group_from(p.value("group", json("heisenberg1")));
    DistanceConfig cfg;
    cfg.p = cost_norm_from_string(p.value("p", std::string("2")));
    cfg.restarts = p.value("restarts", cfg.restarts);
    cfg.segments = p.value("segments", cfg.segments);
    cfg.seed = p.value("seed", std::uint64_t{0});
    Point x = point_or_zero(p, "x", g.dim()), y = point_or_zero(p, "y", g.dim());
    auto d = cc_distance(g, x, y, cfg);
    Report r;
    r.results = {{"distance", d.value},
                 {"error_bar", std::max(d.gap_estimate, cfg.tol)},
                 {"endpoint_residual", d.endpoint_residual},
                 {"converged", d.converged}};
    r.check("endpoint reached", d.endpoint_residual <= 1e-8, d.endpoint_residual, 0.0, 1e-8);
    r.header = {"node"};
    for (int i = 0; i < g.dim(); ++i) r.header.push_back("x" + std::to_string(i + 1));
    const auto& path = d.trajectory.path;
    for (int k = 0; k < path.rows(); ++k) {
        std::vector<double> row{static_cast<double>(k)};
        for (int i = 0; i < path.cols(); ++i) row.push_back(path(k, i));
        r.rows.push_back(row);
    }
    return r;
}

Report cmd_kernel_bake(const json& p) {
    require_keys(p, {"group", "n_rho", "n_z", "rho_max", "z_max", "T"});
    auto g = group_from(p.value("group", json("heisenberg1")));
    if (g.is_euclidean()) throw ConfigError("refused: analytic path exists for " + g.name());
    if (g.name() != "heisenberg1") throw ConfigError("no oracle table for " + g.name());
    HeisenbergTableConfig cfg;
    cfg.n_rho = p.value("n_rho", cfg.n_rho);
    cfg.n_z = p.value("n_z", cfg.n_z);
    cfg.rho_max = p.value("rho_max", cfg.rho_max);
    cfg.z_max = p.value("z_max", cfg.z_max);
    cfg.T = p.value("T", cfg.T);
    auto t = HeisenbergKernelTable::bake(cfg);
    std::filesystem::create_directories(table_directory());
    const auto path = (std::filesystem::path(table_directory()) / cfg.key()).string();
    t.save(path);
    char sum[32];
    std::snprintf(sum, sizeof sum, "%016llx", static_cast<unsigned long long>(t.checksum()));
    Report r;
    r.results = {{"path", path},
                 {"checksum", sum},
                 {"mass", t.mass()},
                 {"richardson", t.richardson_agreement()},
                 {"scaling_residual", t.scaling_residual()},
                 {"error_bound", t.error_bound()}};
    r.check("mass", std::abs(t.mass() - 1.0) < 1e-3, t.mass(), t.richardson_agreement(), 1e-3);
    r.check("richardson agreement", t.richardson_agreement() < 1e-3, t.richardson_agreement(), 0.0, 1e-3);
    r.check("parabolic scaling", t.scaling_residual() < 1e-3, t.scaling_residual(), 0.0, 1e-3);
    return r;
}

Report cmd_kernel_eval(const json& p) {
    require_keys(p, {"group", "x", "t"});
    auto g = group_from(p.value("group", json("heisenberg1")));
    Point x = point_or_zero(p, "x", g.dim());
    const double t = p.value("t", 1.0);
    if (!g.is_euclidean()) heisenberg_table({}, false);
    auto k = heat_kernel(g, x, t);
    Report r;
    r.results = {{"value", k.value}, {"error_bar", k.quad_error}, {"in_range", k.in_range}};
    r.check("inside the table", k.in_range, k.value, k.quad_error, 0.0);
    r.header = {"t", "value", "error_bar"};
    r.rows.push_back({t, k.value, k.quad_error});
    return r;
}

ParametrixConfig parametrix_cfg(const json& p) {
    ParametrixConfig c;
    c.order = p.value("order", c.order);
    c.time_nodes = p.value("time_nodes", c.time_nodes);
    c.space_nodes = p.value("space_nodes", c.space_nodes);
    return c;
}

Report cmd_parametrix_eval(const json& p) {
    require_keys(p, {"operator", "group", "c", "x", "t", "xi", "tau", "order", "time_nodes", "space_nodes"});
    auto op = operator_from(p);
    const int n = op.group.dim();
    SpaceTimePoint z{point_or_zero(p, "x", n), p.value("t", 1.0)}, zeta{point_or_zero(p, "xi", n), p.value("tau", 0.0)};
    auto e = fundamental_solution(op, z, zeta, parametrix_cfg(p));
    Report r;
    r.results = {{"Z", e.z_value},     {"J", e.j_value},         {"Gamma", e.total},
                 {"error_bar", e.quad_error + e.tail_bound},  {"quad_error", e.quad_error},
                 {"tail_bound", e.tail_bound}, {"J_terms", e.j_terms}};
    r.check("series converging", !e.diverging, e.total, e.quad_error + e.tail_bound, 0.0);
    r.header = {"k", "term"};
    for (std::size_t k = 0; k < e.j_terms.size(); ++k) r.rows.push_back({double(k + 1), e.j_terms[k]});
    return r;
}

Report cmd_parametrix_verify(const json& p) {
    require_keys(p, {"operator", "group", "c", "check", "x", "t", "xi", "tau", "s", "tol", "order", "time_nodes",
                     "space_nodes"});
    auto op = operator_from(p);
    const int n = op.group.dim();
    SpaceTimePoint z{point_or_zero(p, "x", n), p.value("t", 0.5)}, zeta{point_or_zero(p, "xi", n), p.value("tau", -0.5)};
    const auto which = p.value("check", std::string("normalization"));
    const double tol = p.value("tol", 1e-2);
    auto cfg = parametrix_cfg(p);
    VerifyResult v;
    if (which == "normalization")
        v = verify_normalization(op, z, zeta.t, cfg);
    else if (which == "reproduction")
        v = verify_reproduction(op, z, zeta, p.value("s", 0.5 * (z.t + zeta.t)), cfg);
    else if (which == "adjoint")
        v = verify_adjoint_symmetry(op, z, zeta, cfg);
    else
        throw ConfigError("unknown check '" + which + "'");
    const double rel = v.residual / std::max(std::abs(v.lhs), 1e-300);
    Report r;
    r.results = {{"lhs", v.lhs}, {"rhs", v.rhs}, {"residual", v.residual}, {"relative", rel}, {"error_bar", v.error_bar}};
    r.check(which, rel < tol, rel, v.error_bar, tol);
    return r;
}

SolutionFn named_solution(const std::string& name, const CarnotGroup& g, const SpaceTimePoint& zeta, double c) {
    if (name == "const") return [c](const Point&, double t) { return std::exp(c * t); };
    if (name == "caloric-poly") return [c](const Point& x, double t) { return std::exp(c * t) * (1.0 + x[0]); };
    if (name == "heat-kernel") {
        Point shift = zeta.x;
        shift[0] -= 0.5;
        auto u = pole_solution(g, {shift, zeta.t - 1.0});
        return [u, c](const Point& x, double t) { return std::exp(c * t) * u(x, t); };
    }
    throw ConfigError("unknown solution '" + name + "' (const, heat-kernel, caloric-poly)");
}

Report cmd_meanvalue(const json& p) {
    require_keys(p, {"group", "c", "solution", "formula", "m", "r", "samples", "max_samples", "strata", "seed", "xi",
                     "tau"});
    auto op = operator_from(p);
    const int n = op.group.dim();
    SpaceTimePoint zeta{point_or_zero(p, "xi", n), p.value("tau", 0.0)};
    const double c = p.value("c", 0.0);
    auto u = named_solution(p.value("solution", std::string("const")), op.group, zeta, c);
    MeanValueConfig cfg;
    cfg.m = p.value("m", cfg.m);
    cfg.samples = p.value("samples", cfg.samples);
    cfg.max_samples = p.value("max_samples", cfg.max_samples);
    cfg.strata = p.value("strata", cfg.strata);
    cfg.seed = p.value("seed", cfg.seed);
    const double rad = p.value("r", 0.5);
    const auto formula = p.value("formula", std::string("improved"));
    auto K = operator_kernel(op);
    MeanValueReport m;
    if (formula == "improved")
        m = mean_value_evaluate(op, K, u, nullptr, zeta, rad, cfg);
    else if (formula == "unbounded")
        m = unbounded_mean_value_evaluate(op, K, u, nullptr, zeta, rad, cfg);
    else
        throw ConfigError("unknown formula '" + formula + "' (improved, unbounded)");
    Report r;
    r.results = {{"u_zeta", m.u_zeta},       {"rhs", m.rhs},
                 {"error_bar", m.sigma},     {"membership_error", m.membership_error},
                 {"residual", m.residual},   {"solid", m.solid},
                 {"zero_order", m.zero_order}, {"samples", m.samples},
                 {"members", m.members},     {"uncertain", m.uncertain},
                 {"w_negative", m.w_negative}, {"w_reading", m.w_reading}};
    const double budget = 3.0 * m.sigma + m.membership_error;
    r.check("mean value identity", m.residual <= budget, m.residual, m.sigma, budget);
    r.header = {"m", "r", "samples", "u_zeta", "rhs", "sigma", "residual"};
    r.rows.push_back({double(cfg.m), rad, double(m.samples), m.u_zeta, m.rhs, m.sigma, m.residual});
    return r;
}

HarnackConstants constants_from(const json& p) {
    HarnackConstants c;
    c.epsilon1 = p.value("epsilon1", c.epsilon1);
    c.theta1 = p.value("theta1", c.theta1);
    c.C_P = p.value("C_P", c.C_P);
    c.k1 = p.value("k1", c.k1);
    c.gamma = p.value("gamma", c.gamma);
    return c;
}

SpaceTimePoint st_point(const json& p, const char* key, int n, double t_default) {
    if (!p.contains(key)) return {Point::Zero(n), t_default};
    const auto& v = p[key];
    if (!v.is_array() || static_cast<int>(v.size()) != n + 1)
        throw ConfigError(std::string("'") + key + "' needs " + std::to_string(n) + " coordinates and a time");
    Point x(n);
    for (int i = 0; i < n; ++i) x[i] = v[i].get<double>();
    return {x, v[n].get<double>()};
}

Report cmd_harnack_chain(const json& p) {
    require_keys(p, {"group", "zplus", "zminus", "epsilon1", "theta1", "C_P", "k1", "gamma", "seed"});
    auto g = group_from(p.value("group", json("euclidean1")));
    const int n = g.dim();
    ChainConfig cfg;
    cfg.constants = constants_from(p);
    cfg.distance.seed = p.value("seed", std::uint64_t{0});
    auto ch = harnack_chain(g, st_point(p, "zplus", n, -0.3), st_point(p, "zminus", n, -0.7), cfg);
    const int want = std::max({1, int(std::ceil(ch.m_primam)), int(std::ceil(ch.m_time))});
    double worst_gap = 0.0;
    for (double d : ch.gaps) worst_gap = std::max(worst_gap, d);
    Report r;
    r.results = {{"m", ch.m}, {"r", ch.r}, {"d", ch.d}, {"dt", ch.dt}, {"m_primam", ch.m_primam},
                 {"m_time", ch.m_time}, {"bound", ch.bound}, {"largest_gap", worst_gap},
                 {"error_bar", cfg.tol}, {"retried", ch.retried}};
    r.check("m formula", ch.m == want, ch.m, 0.0, want);
    r.check("gaps within theta1 r", worst_gap <= cfg.constants.theta1 * ch.r + cfg.tol, worst_gap, cfg.tol,
            cfg.constants.theta1 * ch.r);
    r.header = {"j"};
    for (int i = 0; i < n; ++i) r.header.push_back("x" + std::to_string(i + 1));
    r.header.push_back("t");
    for (std::size_t j = 0; j < ch.points.size(); ++j) {
        std::vector<double> row{double(j)};
        for (int i = 0; i < n; ++i) row.push_back(ch.points[j].x[i]);
        row.push_back(ch.points[j].t);
        r.rows.push_back(row);
    }
    return r;
}

Report cmd_harnack_parabolic(const json& p) {
    require_keys(p, {"group", "z0", "r", "calibration", "heldout", "seed", "samples", "epsilon1", "theta1", "C_P",
                     "k1", "gamma"});
    auto g = group_from(p.value("group", json("euclidean1")));
    auto z0 = st_point(p, "z0", g.dim(), 0.0);
    const double rad = p.value("r", 1.0);
    const std::uint64_t seed = p.value("seed", std::uint64_t{1});
    std::vector<SolutionFn> cal, held;
    for (const auto& q : pole_family(g, z0, rad, p.value("calibration", 40), seed)) cal.push_back(pole_solution(g, q));
    for (const auto& q : pole_family(g, z0, rad, p.value("heldout", 20), seed + 1)) held.push_back(pole_solution(g, q));
    auto fit = fit_parabolic_constant(g, cal, held, z0, rad, constants_from(p), p.value("samples", 2000));
    Report r;
    r.results = {{"C_P", fit.C_P}, {"heldout_max", fit.heldout_max}, {"heldout_exceed", fit.heldout_exceed},
                 {"error_bar", std::abs(fit.heldout_max - fit.C_P)}};
    r.check("C_P finite and at most twice the held-out maximum",
            std::isfinite(fit.C_P) && fit.C_P <= 2.0 * fit.heldout_max, fit.C_P, 0.0, 2.0 * fit.heldout_max);
    r.header = {"family", "index", "ratio"};
    for (std::size_t i = 0; i < fit.calibration_ratios.size(); ++i) r.rows.push_back({0.0, double(i), fit.calibration_ratios[i]});
    for (std::size_t i = 0; i < fit.heldout_ratios.size(); ++i) r.rows.push_back({1.0, double(i), fit.heldout_ratios[i]});
    return r;
}

Report cmd_harnack_invariant(const json& p) {
    require_keys(p, {"group", "z0", "scales", "nu", "eta", "mu", "theta", "count", "seed", "samples", "C_H", "tol"});
    auto g = group_from(p.value("group", json("euclidean2")));
    auto z0 = st_point(p, "z0", g.dim(), 0.0);
    auto scales = p.value("scales", std::vector<double>{0.25, 0.5});
    if (scales.empty()) throw ConfigError("'scales' is empty");
    const double C_H = p.value("C_H", 1e6), tol = p.value("tol", 0.05);
    Report r;
    r.header = {"r", "index", "ratio"};
    std::vector<double> worst;
    bool all = true;
    for (double s : scales) {
        auto b = build_boxes(g, z0, s, p.value("nu", 0.2), p.value("eta", 0.4), p.value("mu", 0.8), p.value("theta", 0.5));
        double w = 0.0;
        int i = 0;
        for (const auto& q : pole_family(g, z0, s, p.value("count", 20), p.value("seed", std::uint64_t{5}))) {
            auto rep = invariant_harnack_check(g, pole_solution(g, q), b, C_H, p.value("samples", 2000));
            all = all && rep.pass;
            w = std::max(w, rep.ratio);
            r.rows.push_back({s, double(i++), rep.ratio});
        }
        worst.push_back(w);
    }
    const auto [lo, hi] = std::minmax_element(worst.begin(), worst.end());
    const double drift = (*hi - *lo) / *hi;
    r.results = {{"scales", scales}, {"worst_ratio", worst}, {"drift", drift}, {"error_bar", drift}};
    r.check("ratios within C_H", all, *hi, 0.0, C_H);
    r.check("scale stability", drift <= tol, drift, 0.0, tol);
    return r;
}

Report cmd_harnack_maxprinciple(const json& p) {
    require_keys(p, {"operator", "group", "c", "solution", "xi", "tau", "paths", "steps", "duration", "seed"});
    json q = p;
    if (!q.contains("group") && !q.contains("operator")) q["group"] = "heisenberg1";
    auto op = operator_from(q);
    SpaceTimePoint zeta{point_or_zero(p, "xi", op.group.dim()), p.value("tau", 0.0)};
    const auto name = p.value("solution", std::string("const"));
    SolutionFn u, f;
    if (name == "const") {
        u = [](const Point&, double) { return 1.0; };
        f = [op](const Point& x, double t) { return op.c_at(x, t); };
    } else if (name == "caloric-poly") {
        u = [](const Point& x, double) { return x[0]; };
    } else {
        throw ConfigError("unknown solution '" + name + "' (const, caloric-poly)");
    }
    MaxPrincipleConfig cfg;
    cfg.paths = p.value("paths", cfg.paths);
    cfg.steps = p.value("steps", cfg.steps);
    cfg.duration = p.value("duration", cfg.duration);
    cfg.seed = p.value("seed", cfg.seed);
    auto m = max_principle_probe(op, u, f, zeta, nullptr, cfg);
    Report r;
    r.results = {{"max_deviation", m.max_deviation}, {"max_source_mismatch", m.max_source_mismatch},
                 {"c_nonpositive", m.c_nonpositive}, {"divergence_condition", m.divergence_condition},
                 {"reached", m.reached},         {"error_bar", 1e-9}};
    if (name == "const")
        r.check("constant solution stays constant", m.max_deviation <= 1e-9, m.max_deviation, 1e-9, 1e-9);
    else
        r.check("nonconstant solution is detected", m.max_deviation > 0.0, m.max_deviation, 1e-9, 0.0);
    return r;
}

Report cmd_selftest(const json& p) {
    require_keys(p, {"only"});
    Report r;
    r.header = {"id", "pass", "seconds"};
    for (const auto& c : run_acceptance(p.value("only", std::vector<int>{}))) {
        std::printf("[%s] %d %s (%.1f s): %s\n", c.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), c.seconds,
                    c.detail.c_str());
        std::fflush(stdout);
        r.check(std::to_string(c.id) + " " + c.name, c.pass, c.seconds, 0.0, c.budget_seconds);
        r.results[std::to_string(c.id)] = {{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}};
        r.rows.push_back({double(c.id), c.pass ? 1.0 : 0.0, c.seconds});
    }
    return r;
}

using Handler = Report (*)(const json&);

const std::map<std::string, Handler>& handlers() {
    static const std::map<std::string, Handler> h = {
        {"distance", cmd_distance},
        {"kernel bake", cmd_kernel_bake},
        {"kernel eval", cmd_kernel_eval},
        {"parametrix eval", cmd_parametrix_eval},
        {"parametrix verify", cmd_parametrix_verify},
        {"meanvalue", cmd_meanvalue},
        {"harnack chain", cmd_harnack_chain},
        {"harnack parabolic", cmd_harnack_parabolic},
        {"harnack invariant", cmd_harnack_invariant},
        {"harnack maxprinciple", cmd_harnack_maxprinciple},
        {"selftest", cmd_selftest},
    };
    return h;
}

struct Output {
    std::string report;  // JSON report path, stdout when empty
    std::string csv;
    std::string save_config;
    std::string plot;  // matplotlib script for the CSV
    bool quiet = false;
};

json normalized_config(const std::string& command, const json& params, const Output& out) {
    json c = {{"schema_version", kSchemaVersion}, {"command", command}, {"params", params}};
    json o = json::object();
    if (!out.report.empty()) o["report"] = out.report;
    if (!out.csv.empty()) o["csv"] = out.csv;
    if (!out.plot.empty()) o["plot"] = out.plot;
    if (!o.empty()) c["output"] = o;
    return c;
}

std::string csv_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

int execute(const std::string& command, const json& params, const Output& out) {
    auto it = handlers().find(command);
    if (it == handlers().end()) throw ConfigError("unknown command '" + command + "'");
    if (!params.is_object()) throw ConfigError("'params' must be an object");
    if (!out.save_config.empty()) {
        std::ofstream f(out.save_config);
        f << normalized_config(command, params, out).dump(2) << "\n";
    }
    const auto t0 = std::chrono::steady_clock::now();
    Report r = it->second(params);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    bool pass = true;
    std::string failed;
    for (const auto& c : r.checks)
        if (!c["pass"].get<bool>()) {
            pass = false;
            failed += (failed.empty() ? "" : ", ") + c["name"].get<std::string>();
        }
    json rep = {{"schema_version", kSchemaVersion},
                {"toolkit_version", CARNOT_VERSION},
                {"command", command},
                {"inputs", params},
                {"results", r.results},
                {"checks", r.checks},
                {"pass", pass},
                {"wall_clock_seconds", wall}};
    if (out.report.empty()) {
        if (!out.quiet) std::cout << rep.dump(2) << "\n";
    } else {
        std::ofstream(out.report) << rep.dump(2) << "\n";
    }
    if (!out.csv.empty()) {
        std::ofstream f(out.csv);
        for (std::size_t i = 0; i < r.header.size(); ++i) f << (i ? "," : "") << r.header[i];
        f << "\n";
        for (const auto& row : r.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << csv_number(row[i]);
            f << "\n";
        }
    }
    if (!out.plot.empty()) {
        if (out.csv.empty()) throw ConfigError("--plot needs --csv");
        std::ofstream f(out.plot);
        f << "import sys\n"
             "import matplotlib.pyplot as plt\n"
             "import numpy as np\n\n"
             "data = np.genfromtxt(sys.argv[1] if len(sys.argv) > 1 else "
          << json(out.csv).dump()
          << ", delimiter=',', names=True)\n"
             "names = data.dtype.names\n"
             "fig, ax = plt.subplots()\n"
             "for n in names[1:]:\n"
             "    ax.plot(data[names[0]], data[n], 'o-', label=n)\n"
             "ax.set_xlabel(names[0])\n"
             "ax.legend()\n"
             "fig.savefig(sys.argv[2] if len(sys.argv) > 2 else 'plot.png')\n";
    }
    if (!pass) {
        std::cerr << "check failed: " << failed << "\n";
        return 1;
    }
    return 0;
}

json parse_inline(const std::string& what, const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

// Options shared by several subcommands, collected into the params object when given.
struct Common {
    std::string group, op;
    std::vector<double> x, y, xi, zplus, zminus, z0;
    double t = NAN, tau = NAN, c = NAN, r = NAN;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void put_vec(json& p, const char* key, const std::vector<double>& v) {
    if (!v.empty()) p[key] = v;
}

void put_num(json& p, const char* key, double v) {
    if (!std::isnan(v)) p[key] = v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical toolkit for hypoelliptic heat operators on Carnot groups"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", CARNOT_VERSION);
    Output out;
    app.add_option("--report", out.report, "JSON report path (stdout by default)");
    app.add_option("--csv", out.csv, "CSV output path");
    app.add_option("--save-config", out.save_config, "write the normalized config of this run");
    app.add_option("--plot", out.plot, "write a plotting script for the CSV");
    app.add_flag("--quiet", out.quiet, "no report on stdout");

    Common o;
    json extra = json::object();
    std::string command;

    auto add_group = [&](CLI::App* s, const char* def) {
        s->add_option("--group", o.group, std::string("registry name or group JSON file (default ") + def + ")");
    };
    auto add_seed = [&](CLI::App* s) {
        s->add_option("--seed", o.seed)->each([&](const std::string&) { o.seed_set = true; });
    };
    auto vec = [](CLI::App* s, const char* name, std::vector<double>& v, const char* help) {
        s->add_option(name, v, help)->delimiter(',');
    };
    std::map<std::string, std::string> strings;
    std::map<std::string, double> numbers;
    std::map<std::string, int> ints;
    auto str = [&](CLI::App* s, const std::string& name, const char* help) {
        s->add_option("--" + name, strings[name], help);
    };
    auto num = [&](CLI::App* s, const std::string& name, const char* help) {
        numbers[name] = NAN;
        s->add_option("--" + name, numbers[name], help);
    };
    auto integer = [&](CLI::App* s, const std::string& name, const char* help) {
        ints[name] = -1;
        s->add_option("--" + name, ints[name], help);
    };

    auto* dist = app.add_subcommand("distance", "Carnot-Caratheodory distance with its control certificate");
    add_group(dist, "heisenberg1");
    vec(dist, "--x", o.x, "start point");
    vec(dist, "--y", o.y, "end point");
    str(dist, "p", "cost norm: 1, 2 or inf");
    integer(dist, "restarts", "optimizer restarts");
    add_seed(dist);
    dist->callback([&] { command = "distance"; });

    auto* kernel = app.add_subcommand("kernel", "Heat-kernel oracle")->require_subcommand(1);
    auto* bake = kernel->add_subcommand("bake", "bake and cache the Heisenberg oracle table");
    add_group(bake, "heisenberg1");
    integer(bake, "n_rho", "coarse radial intervals");
    integer(bake, "n_z", "coarse vertical intervals");
    bake->callback([&] { command = "kernel bake"; });
    auto* keval = kernel->add_subcommand("eval", "evaluate the heat kernel of the sub-Laplacian");
    add_group(keval, "heisenberg1");
    vec(keval, "--x", o.x, "point");
    keval->add_option("--t", o.t, "time");
    keval->callback([&] { command = "kernel eval"; });

    auto* par = app.add_subcommand("parametrix", "Fundamental solution by the parametrix series")->require_subcommand(1);
    auto par_opts = [&](CLI::App* s) {
        add_group(s, "euclidean1");
        s->add_option("--operator", o.op, "operator JSON file or inline JSON");
        s->add_option("--c", o.c, "constant zero-order coefficient");
        vec(s, "--x", o.x, "evaluation point");
        s->add_option("--t", o.t, "evaluation time");
        vec(s, "--xi", o.xi, "pole");
        s->add_option("--tau", o.tau, "pole time");
        integer(s, "order", "number of series terms");
    };
    auto* peval = par->add_subcommand("eval", "Gamma, Z and J at one pair of points");
    par_opts(peval);
    peval->callback([&] { command = "parametrix eval"; });
    auto* pver = par->add_subcommand("verify", "normalization, reproduction or adjoint check");
    par_opts(pver);
    str(pver, "check", "normalization, reproduction or adjoint");
    num(pver, "s", "intermediate time for reproduction");
    num(pver, "tol", "relative tolerance");
    pver->callback([&] { command = "parametrix verify"; });

    auto* mv = app.add_subcommand("meanvalue", "Mean value formula on super-level sets");
    add_group(mv, "euclidean1");
    str(mv, "solution", "const, heat-kernel or caloric-poly");
    str(mv, "formula", "improved or unbounded");
    integer(mv, "m", "descent dimension");
    mv->add_option("--r", o.r, "level");
    mv->add_option("--c", o.c, "constant zero-order coefficient");
    integer(mv, "samples", "initial Monte Carlo samples");
    vec(mv, "--xi", o.xi, "center");
    mv->add_option("--tau", o.tau, "center time");
    add_seed(mv);
    mv->callback([&] { command = "meanvalue"; });

    auto* har = app.add_subcommand("harnack", "Harnack chains and constants")->require_subcommand(1);
    auto* hc = har->add_subcommand("chain", "chain of points from z+ down to z-");
    add_group(hc, "euclidean1");
    vec(hc, "--zplus", o.zplus, "upper point x..., t");
    vec(hc, "--zminus", o.zminus, "lower point x..., t");
    num(hc, "epsilon1", "time step factor");
    num(hc, "theta1", "ball factor");
    num(hc, "C_P", "parabolic Harnack constant");
    hc->callback([&] { command = "harnack chain"; });
    auto* hp = har->add_subcommand("parabolic", "fit C_P on a pole family and check it on another");
    add_group(hp, "euclidean1");
    vec(hp, "--z0", o.z0, "top point x..., t");
    hp->add_option("--r", o.r, "radius");
    integer(hp, "calibration", "calibration family size");
    integer(hp, "heldout", "held-out family size");
    add_seed(hp);
    hp->callback([&] { command = "harnack parabolic"; });
    auto* hi = har->add_subcommand("invariant", "sup over Q- against inf over Q+ across scales");
    add_group(hi, "euclidean2");
    std::vector<double> scales;
    hi->add_option("--scales", scales, "radii")->delimiter(',');
    integer(hi, "count", "pole family size");
    add_seed(hi);
    hi->callback([&] { command = "harnack invariant"; });
    auto* hm = har->add_subcommand("maxprinciple", "propagation probe along admissible paths");
    add_group(hm, "heisenberg1");
    hm->add_option("--operator", o.op, "operator JSON file or inline JSON");
    hm->add_option("--c", o.c, "constant zero-order coefficient");
    str(hm, "solution", "const or caloric-poly");
    integer(hm, "paths", "number of paths");
    add_seed(hm);
    hm->callback([&] { command = "harnack maxprinciple"; });

    auto* st = app.add_subcommand("selftest", "Run the acceptance suite");
    std::vector<int> only;
    st->add_option("--only", only, "criterion numbers")->delimiter(',');
    st->callback([&] { command = "selftest"; });

    auto* run = app.add_subcommand("run", "Run a saved experiment config");
    std::string config_path;
    run->add_option("--config", config_path, "config JSON")->required();
    run->callback([&] { command = "run"; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        json params = json::object();
        if (command == "run") {
            json cfg = read_json_file(config_path);
            if (!cfg.is_object() || cfg.value("schema_version", -1) != kSchemaVersion)
                throw ConfigError("config needs \"schema_version\": " + std::to_string(kSchemaVersion));
            if (!cfg.contains("command") || !cfg["command"].is_string()) throw ConfigError("config needs 'command'");
            command = cfg["command"].get<std::string>();
            params = cfg.value("params", json::object());
            if (cfg.contains("output")) {
                const auto& oo = cfg["output"];
                if (out.report.empty()) out.report = oo.value("report", std::string());
                if (out.csv.empty()) out.csv = oo.value("csv", std::string());
                if (out.plot.empty()) out.plot = oo.value("plot", std::string());
            }
            return execute(command, params, out);
        }
        if (!o.group.empty()) params["group"] = o.group;
        if (!o.op.empty())
            params["operator"] = o.op.front() == '{' ? parse_inline("--operator", o.op) : read_json_file(o.op);
        put_vec(params, "x", o.x);
        put_vec(params, "y", o.y);
        put_vec(params, "xi", o.xi);
        put_vec(params, "zplus", o.zplus);
        put_vec(params, "zminus", o.zminus);
        put_vec(params, "z0", o.z0);
        put_vec(params, "scales", scales);
        put_num(params, "t", o.t);
        put_num(params, "tau", o.tau);
        put_num(params, "c", o.c);
        put_num(params, "r", o.r);
        if (o.seed_set) params["seed"] = o.seed;
        for (const auto& [k, v] : strings)
            if (!v.empty()) params[k] = v;
        for (const auto& [k, v] : numbers) put_num(params, k.c_str(), v);
        for (const auto& [k, v] : ints)
            if (v >= 0) params[k] = v;
        if (!only.empty()) params["only"] = only;
        return execute(command, params, out);
    } catch (const ConfigError& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "check failed: " << e.what() << "\n";
        return 1;
    }
}
