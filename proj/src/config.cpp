#include "sdde/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "sdde/expr.hpp"
#include "sdde/report.hpp"

namespace sdde {

using nlohmann::json;

const char* run_mode_name(RunMode mode) {
    switch (mode) {
        case RunMode::Simulate: return "simulate";
        case RunMode::Converge: return "converge";
        case RunMode::Moments: return "moments";
        case RunMode::Stability: return "stability";
        case RunMode::Explode: return "explode";
        case RunMode::Check: return "check";
    }
    return "?";
}

RunMode parse_run_mode(const std::string& name) {
    if (name == "simulate") return RunMode::Simulate;
    if (name == "converge") return RunMode::Converge;
    if (name == "moments") return RunMode::Moments;
    if (name == "stability") return RunMode::Stability;
    if (name == "explode") return RunMode::Explode;
    if (name == "check") return RunMode::Check;
    throw ConfigError("unknown mode: " + name);
}

namespace {

ConditionMode parse_check_mode(const std::string& name) {
    if (name == "finite") return ConditionMode::Finite;
    if (name == "infinite") return ConditionMode::Infinite;
    if (name == "stability") return ConditionMode::Stability;
    throw ConfigError("unknown check mode: " + name);
}

bool uses_delayed_variable(const expr::Node& n) {
    if (n.kind == expr::Node::Kind::VarY) return true;
    if (n.a && uses_delayed_variable(*n.a)) return true;
    return n.b && uses_delayed_variable(*n.b);
}

/// Shared, immutable bundle behind the coefficient closures of an
/// expression-defined problem.
struct ExprSystem {
    std::vector<expr::CompiledExpr> drift;     // m entries
    std::vector<expr::CompiledExpr> diffusion; // m*d entries, row-major
    int m = 1;
    int d = 1;
};

Problem problem_from_json(const json& spec) {
    if (spec.is_string())
        return builtin_problem(spec.get<std::string>());
    if (!spec.is_object())
        throw ConfigError("problem must be a builtin name or an object");

    const int m = spec.value("m", 1);
    const int d = spec.value("d", 1);
    const double tau = spec.value("tau", 1.0);
    if (m < 1 || d < 1)
        throw ConfigError("problem dimensions must be positive");

    auto bundle = std::make_shared<ExprSystem>();
    bundle->m = m;
    bundle->d = d;

    if (!spec.contains("drift") || !spec["drift"].is_array() ||
        spec["drift"].size() != static_cast<std::size_t>(m))
        throw ConfigError("problem.drift must list m expressions");
    for (const auto& entry : spec["drift"])
        bundle->drift.push_back(expr::Expr::parse(entry.get<std::string>(), m).compile());

    if (!spec.contains("diffusion") || !spec["diffusion"].is_array() ||
        spec["diffusion"].size() != static_cast<std::size_t>(m))
        throw ConfigError("problem.diffusion must be an m x d matrix of expressions");
    for (const auto& row : spec["diffusion"]) {
        if (!row.is_array() || row.size() != static_cast<std::size_t>(d))
            throw ConfigError("problem.diffusion must be an m x d matrix of expressions");
        for (const auto& entry : row)
            bundle->diffusion.push_back(expr::Expr::parse(entry.get<std::string>(), m).compile());
    }

    DelaySystem sys(
        m, d, tau,
        [bundle](std::span<const double> x, std::span<const double> y, std::span<double> out) {
            for (int k = 0; k < bundle->m; ++k)
                out[static_cast<std::size_t>(k)] =
                    bundle->drift[static_cast<std::size_t>(k)].eval(x, y);
        },
        [bundle](std::span<const double> x, std::span<const double> y, std::span<double> out) {
            const std::size_t cells = bundle->diffusion.size();
            for (std::size_t k = 0; k < cells; ++k)
                out[k] = bundle->diffusion[k].eval(x, y);
        });

    if (!spec.contains("initial"))
        throw ConfigError("problem.initial is required");
    const json& init = spec["initial"];
    json init_exprs = init.is_object() ? init.value("expr", json::array()) : init;
    if (!init_exprs.is_array() || init_exprs.size() != static_cast<std::size_t>(m))
        throw ConfigError("problem.initial must list m expressions of theta (as x1)");
    auto segment_exprs = std::make_shared<std::vector<expr::CompiledExpr>>();
    for (const auto& entry : init_exprs) {
        expr::Expr e = expr::Expr::parse(entry.get<std::string>(), 1);
        if (uses_delayed_variable(e.root()))
            throw ConfigError("initial-segment expressions may only use x1 (= theta)");
        segment_exprs->push_back(e.compile());
    }
    const double holder_c = init.is_object() ? init.value("holder_constant", 0.0) : 0.0;
    const double holder_q = init.is_object() ? init.value("holder_exponent", 1.0) : 1.0;
    InitialSegment xi(
        [segment_exprs](double theta, std::span<double> out) {
            const double arg[1] = {theta};
            const double none[1] = {0.0};
            for (std::size_t k = 0; k < segment_exprs->size(); ++k)
                out[k] = (*segment_exprs)[k].eval(arg, none);
        },
        tau, m, holder_c, holder_q);

    // controller
    std::function<StepController(double, double)> make_controller;
    const json ctrl_spec = spec.value("controller", json{{"type", "constant"}});
    const std::string type = ctrl_spec.value("type", "constant");
    if (type == "constant") {
        make_controller = [](double delta, double horizon) {
            return constant_controller(delta, horizon);
        };
    } else if (type == "scaled") {
        if (!ctrl_spec.contains("expr"))
            throw ConfigError("controller.expr is required for type=scaled");
        expr::Expr shape = expr::Expr::parse(ctrl_spec["expr"].get<std::string>(), m);
        if (uses_delayed_variable(shape.root()))
            throw ConfigError("controller expressions may only use the current state x1..xm");
        auto compiled = std::make_shared<expr::CompiledExpr>(shape.compile());
        const double cap = ctrl_spec.value("h_max_factor", 1.0);
        make_controller = [compiled, cap, m](double delta, double horizon) {
            StepController ctrl;
            ctrl.delta = delta;
            ctrl.h_max = delta * cap;
            ctrl.horizon = horizon;
            ctrl.step_fn = [compiled, delta, m](std::span<const double> x) {
                std::vector<double> none(static_cast<std::size_t>(m), 0.0);
                return delta * compiled->eval(x, none);
            };
            return ctrl;
        };
    } else if (type == "indicator") {
        if (!ctrl_spec.contains("majorant"))
            throw ConfigError("controller.majorant is required for type=indicator");
        expr::Expr maj = expr::Expr::parse(ctrl_spec["majorant"].get<std::string>(), m);
        if (uses_delayed_variable(maj.root()))
            throw ConfigError("the drift majorant may only use the current state x1..xm");
        auto compiled = std::make_shared<expr::CompiledExpr>(maj.compile());
        const double cap = ctrl_spec.value("h_max_factor", 0.04);
        make_controller = [compiled, cap, m](double delta, double horizon) {
            auto majorant = [compiled, m](std::span<const double> x) {
                std::vector<double> none(static_cast<std::size_t>(m), 0.0);
                return compiled->eval(x, none);
            };
            return indicator_controller(delta, majorant, horizon, cap);
        };
    } else {
        throw ConfigError("unknown controller type: " + type);
    }

    GrowthConstants constants;
    if (spec.contains("constants")) {
        const json& c = spec["constants"];
        constants.alpha = c.value("alpha", 0.0);
        constants.beta = c.value("beta", 0.0);
        constants.alpha1 = c.value("alpha1", 0.0);
        constants.alpha2 = c.value("alpha2", 0.0);
        constants.lipschitz = c.value("lipschitz", 0.0);
        constants.poly_gamma = c.value("poly_gamma", 0.0);
        constants.poly_exponent = c.value("poly_exponent", 0.0);
        constants.poly_lambda = c.value("poly_lambda", 0.0);
        constants.decay_rate = c.value("decay_rate", 0.0);
    }

    Problem prob{
        spec.value("name", std::string("inline")),
        std::move(sys),
        std::move(xi),
        std::move(make_controller),
        constants,
        parse_check_mode(spec.value("check_mode", "finite")),
    };
    return prob;
}

constexpr int kPrimesForSweep[] = {2, 3, 5, 7, 11, 13, 17, 19};

double sweep_halton(std::size_t index, int base) {
    double f = 1.0, r = 0.0;
    for (std::size_t i = index; i > 0; i /= static_cast<std::size_t>(base)) {
        f /= base;
        r += f * static_cast<double>(i % static_cast<std::size_t>(base));
    }
    return r;
}

/// Pre-simulation sweep: the step function must produce finite positive
/// values over a state box before any path runs.
void sweep_step_function(const Problem& prob, const StepController& ctrl) {
    const auto m = static_cast<std::size_t>(prob.system.state_dim());
    const double radius = std::max(10.0, 2.0 * prob.xi.sup_norm());
    State x(m);
    for (std::size_t i = 0; i < 128; ++i) {
        for (std::size_t k = 0; k < m; ++k)
            x[k] = radius * (2.0 * sweep_halton(i + 1, kPrimesForSweep[k % 8]) - 1.0);
        double h = 0.0;
        try {
            h = propose_step(ctrl, x);
        } catch (const StepFunctionError& e) {
            throw ConfigError(std::string("step function failed the sample sweep: ") +
                              e.what());
        }
        if (!(h >= ctrl.h_min && h <= ctrl.h_max))
            throw ConfigError("step function violates the clamp bounds on the sample sweep");
    }
}

json canonical_json(const RunConfig& cfg, const json& problem_spec) {
    json doc;
    doc["mode"] = run_mode_name(cfg.mode);
    doc["problem"] = problem_spec;
    doc["T"] = cfg.T;
    doc["delta"] = cfg.deltas;
    doc["p"] = cfg.p;
    doc["paths"] = cfg.paths;
    doc["master_seed"] = cfg.master_seed;
    doc["delta_ref"] = cfg.delta_ref;
    doc["h_min"] = cfg.h_min;
    doc["max_steps"] = cfg.max_steps;
    doc["tail_fraction"] = cfg.tail_fraction;
    doc["fixed_dt"] = cfg.fixed_dt;
    doc["k_steps"] = cfg.k_steps;
    if (cfg.force_x1)
        doc["force_x1"] = *cfg.force_x1;
    doc["sample_times"] = cfg.sample_times;
    doc["check"] = {{"box_radius", cfg.check_box_radius},
                    {"n_samples", cfg.check_samples},
                    {"mode", condition_mode_name(cfg.check_mode)}};
    doc["dump_paths"] = cfg.dump_paths;
    doc["svg"] = cfg.svg;
    return doc;
}

} // namespace

StepController RunConfig::controller(double delta) const {
    StepController ctrl = problem.make_controller(delta, T);
    ctrl.h_min = h_min;
    ctrl.max_steps = max_steps;
    return ctrl;
}

RunConfig load_config(const std::string& json_text, RunMode mode, const CliOverrides& overrides) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    if (!doc.is_object())
        throw ConfigError("config must be a JSON object");

    json problem_spec = doc.value("problem", json("counterexample-sdde"));

    RunConfig cfg(mode, problem_from_json(problem_spec));

    cfg.T = doc.value("T", 1.0);
    if (doc.contains("delta")) {
        if (doc["delta"].is_array())
            cfg.deltas = doc["delta"].get<std::vector<double>>();
        else
            cfg.deltas = {doc["delta"].get<double>()};
    }
    cfg.p = doc.value("p", 2.0);
    cfg.paths = doc.value("paths", std::size_t{100});
    cfg.master_seed = doc.value("master_seed", std::uint64_t{0x5DDE1AB});
    cfg.delta_ref = doc.value("delta_ref", 0.0);
    cfg.h_min = doc.value("h_min", 1e-12);
    cfg.max_steps = doc.value("max_steps", std::size_t{20'000'000});
    cfg.tail_fraction = doc.value("tail_fraction", 0.5);
    cfg.fixed_dt = doc.value("fixed_dt", 2e-3);
    cfg.k_steps = doc.value("k_steps", std::size_t{100});
    if (doc.contains("force_x1") && !doc["force_x1"].is_null())
        cfg.force_x1 = doc["force_x1"].get<State>();
    if (doc.contains("sample_times"))
        cfg.sample_times = doc["sample_times"].get<std::vector<double>>();
    if (doc.contains("check")) {
        const json& c = doc["check"];
        cfg.check_box_radius = c.value("box_radius", 50.0);
        cfg.check_samples = c.value("n_samples", std::size_t{4096});
        cfg.check_mode = c.contains("mode") ? parse_check_mode(c["mode"].get<std::string>())
                                            : cfg.problem.default_check_mode;
    } else {
        cfg.check_mode = cfg.problem.default_check_mode;
    }
    if (doc.contains("dump_paths")) {
        const json& dp = doc["dump_paths"];
        if (dp.is_boolean())
            cfg.dump_paths = dp.get<bool>() ? 16 : 0;
        else
            cfg.dump_paths = dp.get<std::size_t>();
    }
    cfg.svg = doc.value("svg", false);
    cfg.out_dir = doc.value("out", std::string("out"));

    if (overrides.out_dir) cfg.out_dir = *overrides.out_dir;
    if (overrides.seed) cfg.master_seed = *overrides.seed;
    if (overrides.paths) cfg.paths = *overrides.paths;

    // validation before any simulation
    if (!(cfg.T > 0.0)) throw ConfigError("T must be positive");
    if (cfg.deltas.empty()) throw ConfigError("delta list must be nonempty");
    for (double d : cfg.deltas)
        if (!(d > 0.0 && d < 1.0)) throw ConfigError("every delta must lie in (0, 1)");
    if (!(cfg.p > 0.0)) throw ConfigError("p must be positive");
    if (cfg.paths < 1) throw ConfigError("paths must be >= 1");
    if (!(cfg.h_min > 0.0)) throw ConfigError("h_min must be positive");
    if (!(cfg.tail_fraction > 0.0 && cfg.tail_fraction <= 1.0))
        throw ConfigError("tail_fraction must lie in (0, 1]");

    if (cfg.sample_times.empty() && (mode == RunMode::Moments)) {
        const std::size_t count = 20;
        for (std::size_t j = 1; j <= count; ++j)
            cfg.sample_times.push_back(cfg.T * static_cast<double>(j) /
                                       static_cast<double>(count));
    }
    for (double s : cfg.sample_times)
        if (s < 0.0 || s > cfg.T) throw ConfigError("sample times must lie in [0, T]");

    if (mode == RunMode::Converge) {
        if (!(cfg.delta_ref > 0.0))
            throw ConfigError("delta_ref is required for converge mode");
        if (cfg.paths < 2) throw ConfigError("converge mode needs at least 2 paths");
    }
    if (mode == RunMode::Explode) {
        if (!(cfg.fixed_dt > 0.0)) throw ConfigError("fixed_dt must be positive");
        if (cfg.paths < 100) throw ConfigError("explode mode needs at least 100 paths");
        if (cfg.force_x1 &&
            cfg.force_x1->size() != static_cast<std::size_t>(cfg.problem.system.state_dim()))
            throw ConfigError("force_x1 must have m components");
    }
    if (mode == RunMode::Check &&
        cfg.check_mode == ConditionMode::Stability) {
        // stability-mode constants gate
        if (!(cfg.problem.constants.alpha1 > 2.0 * cfg.problem.constants.alpha2 &&
              cfg.problem.constants.alpha2 >= 0.0))
            throw ConfigError("stability check requires constants with alpha1 > 2*alpha2 >= 0");
    }

    for (double delta : cfg.deltas) {
        StepController ctrl = cfg.controller(delta);
        if (mode == RunMode::Converge)
            validate_finite_horizon(ctrl);
        else if (mode == RunMode::Moments || mode == RunMode::Stability)
            validate_stability(ctrl);
        sweep_step_function(cfg.problem, ctrl);
    }

    const json canonical = canonical_json(cfg, problem_spec);
    cfg.canonical = canonical.dump(2);
    cfg.config_hash = hash_hex(fnv1a64(cfg.canonical));
    return cfg;
}

RunConfig load_config_file(const std::string& path, RunMode mode, const CliOverrides& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_config(ss.str(), mode, overrides);
}

} // namespace sdde
