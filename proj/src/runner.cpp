#include "sdde/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>

#include <json.hpp>

#include "sdde/analysis.hpp"
#include "sdde/report.hpp"
#include "sdde/svg.hpp"

namespace sdde {

namespace {

using nlohmann::json;

const char* status_name(TrajectoryStatus s) {
    switch (s) {
        case TrajectoryStatus::ReachedHorizon: return "reached_horizon";
        case TrajectoryStatus::MaxStepsExceeded: return "max_steps_exceeded";
        case TrajectoryStatus::Exploded: return "exploded";
    }
    return "?";
}

std::string path_file_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "path_%04zu.csv", i);
    return buf;
}

class OutputSet {
public:
    OutputSet(const RunConfig& cfg) : cfg_(cfg), dir_(cfg.out_dir) {
        std::filesystem::create_directories(dir_);
        std::ofstream resolved(dir_ / "config.resolved.json", std::ios::binary | std::ios::trunc);
        resolved << cfg_.canonical << '\n';
        add("config.resolved.json");
    }

    const std::filesystem::path& dir() const { return dir_; }

    void add(const std::string& name) {
        std::lock_guard<std::mutex> lock(mu_);
        outputs_.push_back(name);
    }

    void write_manifest() {
        std::sort(outputs_.begin(), outputs_.end());
        json manifest;
        manifest["tool"] = "sdde-lab";
        manifest["mode"] = run_mode_name(cfg_.mode);
        manifest["config_hash"] = cfg_.config_hash;
        manifest["master_seed"] = cfg_.master_seed;
        manifest["outputs"] = outputs_;
        manifest["config"] = json::parse(cfg_.canonical);
        std::ofstream out(dir_ / "manifest.json", std::ios::binary | std::ios::trunc);
        out << manifest.dump(2) << '\n';
    }

private:
    const RunConfig& cfg_;
    std::filesystem::path dir_;
    std::mutex mu_;
    std::vector<std::string> outputs_;
};

/// Thinned (t, log10|x|) view of a trajectory for the SVG plots.
SvgSeries log_abs_series(const AdaptiveTrajectory& traj) {
    SvgSeries s;
    const std::size_t n = traj.times.size();
    const std::size_t stride = std::max<std::size_t>(1, n / 2000);
    for (std::size_t i = 0; i < n; i += stride) {
        s.xs.push_back(traj.times[i]);
        s.ys.push_back(std::log10(std::max(norm2(traj.state_at(i)), 1e-300)));
    }
    return s;
}

int run_simulate(const RunConfig& cfg, OutputSet& out) {
    const double delta = cfg.deltas.front();
    const StepController ctrl = cfg.controller(delta);

    struct Row {
        TrajectoryStatus status;
        std::size_t steps;
        double t_end, abs_end, first_h, last_h;
        std::vector<double> first_steps;
        SvgSeries curve;
    };
    std::vector<Row> rows(cfg.paths);
    parallel_for_paths(cfg.paths, 0, [&](std::size_t i) {
        ForwardWiener noise(NoiseStream(cfg.master_seed, i, cfg.problem.system.noise_dim()));
        AdaptiveTrajectory traj =
            integrate_adaptive(cfg.problem.system, ctrl, cfg.problem.xi, noise, cfg.T);
        write_trajectory_csv(out.dir() / path_file_name(i), cfg.config_hash, traj);
        out.add(path_file_name(i));
        Row row;
        row.status = traj.status;
        row.steps = traj.steps_taken;
        row.t_end = traj.final_time;
        row.abs_end = norm2(traj.final_state);
        row.first_h = traj.steps.empty() ? 0.0 : traj.steps.front();
        row.last_h = traj.steps.empty() ? 0.0 : traj.steps.back();
        row.first_steps.assign(traj.steps.begin(),
                               traj.steps.begin() +
                                   static_cast<std::ptrdiff_t>(std::min<std::size_t>(
                                       10, traj.steps.size())));
        if (cfg.svg && i < 10) row.curve = log_abs_series(traj);
        rows[i] = std::move(row);
    });

    {
        CsvWriter csv(out.dir() / "summary.csv", cfg.config_hash,
                      {"path", "status", "steps", "t_end", "abs_end", "first_h", "last_h"});
        for (std::size_t i = 0; i < rows.size(); ++i) {
            csv.cell(i);
            csv.cell(std::string_view(status_name(rows[i].status)));
            csv.cell(rows[i].steps);
            csv.cell(rows[i].t_end);
            csv.cell(rows[i].abs_end);
            csv.cell(rows[i].first_h);
            csv.cell(rows[i].last_h);
            csv.end_row();
        }
        out.add("summary.csv");
    }
    {
        CsvWriter csv(out.dir() / "first_steps.csv", cfg.config_hash, {"path", "n", "h"});
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t n = 0; n < rows[i].first_steps.size(); ++n) {
                csv.cell(i);
                csv.cell(n);
                csv.cell(rows[i].first_steps[n]);
                csv.end_row();
            }
        out.add("first_steps.csv");
    }
    if (cfg.svg) {
        std::vector<SvgSeries> curves;
        for (const auto& row : rows)
            if (!row.curve.xs.empty()) curves.push_back(row.curve);
        write_line_svg(out.dir() / "paths_log10_abs.svg", cfg.config_hash, "simulated paths", "t", "log10 |x|",
                       curves);
        out.add("paths_log10_abs.svg");
        std::vector<SvgSeries> hs;
        for (std::size_t i = 0; i < std::min<std::size_t>(2, rows.size()); ++i) {
            SvgSeries s;
            for (std::size_t n = 0; n < rows[i].first_steps.size(); ++n) {
                s.xs.push_back(static_cast<double>(n));
                s.ys.push_back(rows[i].first_steps[n]);
            }
            hs.push_back(std::move(s));
        }
        write_line_svg(out.dir() / "first_steps.svg", cfg.config_hash, "first adaptive steps", "n", "h", hs);
        out.add("first_steps.svg");
    }
    std::size_t exploded = 0;
    for (const auto& row : rows)
        if (row.status == TrajectoryStatus::Exploded) ++exploded;
    std::cout << "simulate: paths=" << cfg.paths << " exploded=" << exploded << " delta=" << delta
              << "\n";
    return 0;
}

int run_converge(const RunConfig& cfg, OutputSet& out) {
    std::vector<StepController> controllers;
    for (double delta : cfg.deltas) controllers.push_back(cfg.controller(delta));
    StrongErrorResult res = estimate_strong_error(cfg.problem.system, controllers, cfg.problem.xi,
                                                  cfg.p, cfg.paths, cfg.delta_ref, cfg.T,
                                                  cfg.master_seed);
    {
        CsvWriter csv(out.dir() / "errors.csv", cfg.config_hash,
                      {"delta", "mean_err_p", "se_err_p", "rms", "n_ok", "n_failed"});
        for (const auto& pt : res.points) {
            csv.cell(pt.delta);
            csv.cell(pt.mean_err_p);
            csv.cell(pt.se_err_p);
            csv.cell(pt.rms);
            csv.cell(pt.n_ok);
            csv.cell(pt.n_failed);
            csv.end_row();
        }
        out.add("errors.csv");
    }
    std::vector<std::pair<double, double>> pairs;
    for (const auto& pt : res.points)
        if (pt.n_ok > 0) pairs.emplace_back(pt.delta, pt.mean_err_p);
    OrderFit fit = fit_order(pairs, cfg.p);
    {
        CsvWriter csv(out.dir() / "fit.csv", cfg.config_hash,
                      {"slope", "intercept", "r2", "n_points"});
        csv.cell(fit.slope);
        csv.cell(fit.intercept);
        csv.cell(fit.r2);
        csv.cell(pairs.size());
        csv.end_row();
        out.add("fit.csv");
    }
    {
        CsvWriter csv(out.dir() / "validation.csv", cfg.config_hash,
                      {"dt_ref_used", "self_rms", "smallest_rms", "halvings", "ok", "paths",
                       "min_adaptive_step", "dt_ref_precondition_ok"});
        csv.cell(res.validation.dt_ref_used);
        csv.cell(res.validation.self_rms);
        csv.cell(res.validation.smallest_rms);
        csv.cell(static_cast<std::uint64_t>(res.validation.halvings));
        csv.cell(std::string_view(res.validation.ok ? "1" : "0"));
        csv.cell(res.validation.paths);
        csv.cell(res.min_adaptive_step);
        csv.cell(std::string_view(res.dt_ref_precondition_ok ? "1" : "0"));
        csv.end_row();
        out.add("validation.csv");
    }
    if (cfg.svg) {
        SvgSeries s;
        for (const auto& pt : res.points) {
            if (pt.n_ok == 0) continue;
            s.xs.push_back(std::log2(pt.delta));
            s.ys.push_back(std::log2(pt.rms));
        }
        write_line_svg(out.dir() / "order.svg", cfg.config_hash, "strong error vs delta", "log2 delta",
                       "log2 rms error", {s});
        out.add("order.svg");
    }
    std::cout << "converge: slope=" << fit.slope << " r2=" << fit.r2
              << " dt_ref=" << res.validation.dt_ref_used << "\n";
    return 0;
}

int run_moments(const RunConfig& cfg, OutputSet& out) {
    CsvWriter csv(out.dir() / "moments.csv", cfg.config_hash,
                  {"delta", "time", "mean", "se", "n_ok"});
    CsvWriter sup_csv(out.dir() / "sup_moments.csv", cfg.config_hash,
                      {"delta", "sup_mean", "sup_se", "n_ok", "n_failed"});
    double worst = 0.0;
    for (double delta : cfg.deltas) {
        const StepController ctrl = cfg.controller(delta);
        MomentCurve curve =
            estimate_sup_moment(cfg.problem.system, ctrl, cfg.problem.xi, cfg.p, cfg.paths,
                                cfg.T, cfg.sample_times, cfg.master_seed);
        for (const auto& pt : curve.points) {
            csv.cell(delta);
            csv.cell(pt.time);
            csv.cell(pt.mean);
            csv.cell(pt.se);
            csv.cell(pt.n);
            csv.end_row();
            worst = std::max(worst, pt.mean);
        }
        sup_csv.cell(delta);
        sup_csv.cell(curve.sup_moment.mean);
        sup_csv.cell(curve.sup_moment.se);
        sup_csv.cell(curve.n_ok);
        sup_csv.cell(curve.n_failed);
        sup_csv.end_row();
    }
    out.add("moments.csv");
    out.add("sup_moments.csv");
    std::cout << "moments: max over sample times=" << worst << "\n";
    return 0;
}

int run_stability(const RunConfig& cfg, OutputSet& out) {
    const double delta = cfg.deltas.front();
    const StepController ctrl = cfg.controller(delta);
    struct Row {
        TrajectoryStatus status;
        std::size_t steps;
        double t_end, abs_end, slope, endpoint, first_h, last_h;
        SvgSeries curve;
    };
    std::vector<Row> rows(cfg.paths);
    parallel_for_paths(cfg.paths, 0, [&](std::size_t i) {
        ForwardWiener noise(NoiseStream(cfg.master_seed, i, cfg.problem.system.noise_dim()));
        AdaptiveTrajectory traj =
            integrate_adaptive(cfg.problem.system, ctrl, cfg.problem.xi, noise, cfg.T);
        Row row;
        row.status = traj.status;
        row.steps = traj.steps_taken;
        row.t_end = traj.final_time;
        row.abs_end = norm2(traj.final_state);
        row.first_h = traj.steps.empty() ? 0.0 : traj.steps.front();
        row.last_h = traj.steps.empty() ? 0.0 : traj.steps.back();
        row.slope = row.endpoint = std::numeric_limits<double>::quiet_NaN();
        if (traj.status != TrajectoryStatus::Exploded) {
            const LyapunovEstimate est = estimate_lyapunov(traj, cfg.tail_fraction);
            row.slope = est.slope;
            row.endpoint = est.endpoint;
        }
        if (i < cfg.dump_paths) {
            write_trajectory_csv(out.dir() / path_file_name(i), cfg.config_hash, traj);
            out.add(path_file_name(i));
        }
        if (cfg.svg && i < 10) row.curve = log_abs_series(traj);
        rows[i] = std::move(row);
    });
    {
        CsvWriter csv(out.dir() / "lyapunov.csv", cfg.config_hash,
                      {"path", "status", "steps", "t_end", "abs_end", "lambda_slope",
                       "lambda_endpoint", "first_h", "last_h"});
        for (std::size_t i = 0; i < rows.size(); ++i) {
            csv.cell(i);
            csv.cell(std::string_view(status_name(rows[i].status)));
            csv.cell(rows[i].steps);
            csv.cell(rows[i].t_end);
            csv.cell(rows[i].abs_end);
            csv.cell(rows[i].slope);
            csv.cell(rows[i].endpoint);
            csv.cell(rows[i].first_h);
            csv.cell(rows[i].last_h);
            csv.end_row();
        }
        out.add("lyapunov.csv");
    }
    if (cfg.svg) {
        std::vector<SvgSeries> curves;
        for (const auto& row : rows)
            if (!row.curve.xs.empty()) curves.push_back(row.curve);
        write_line_svg(out.dir() / "paths_log10_abs.svg", cfg.config_hash, "adaptive paths", "t", "log10 |x|",
                       curves);
        out.add("paths_log10_abs.svg");
    }
    std::size_t negative = 0, exploded = 0;
    for (const auto& row : rows) {
        if (row.status == TrajectoryStatus::Exploded) ++exploded;
        if (std::isfinite(row.slope) && row.slope < 0.0) ++negative;
    }
    std::cout << "stability: paths=" << cfg.paths << " exploded=" << exploded
              << " negative_lambda=" << negative << "\n";
    return 0;
}

int run_explode(const RunConfig& cfg, OutputSet& out) {
    ExplosionStats stats =
        explosion_probability(cfg.problem.system, cfg.fixed_dt, cfg.problem.xi, cfg.paths,
                              cfg.k_steps, cfg.master_seed, 0, cfg.force_x1);
    {
        CsvWriter csv(out.dir() / "explosion.csv", cfg.config_hash,
                      {"paths", "exploded", "fraction", "ci_lo", "ci_hi", "audit_pairs",
                       "audit_violations", "forced"});
        csv.cell(stats.paths);
        csv.cell(stats.exploded);
        csv.cell(stats.fraction);
        csv.cell(stats.ci_lo);
        csv.cell(stats.ci_hi);
        csv.cell(stats.audit.pairs_checked);
        csv.cell(stats.audit.violations);
        csv.cell(std::string_view(cfg.force_x1 ? "1" : "0"));
        csv.end_row();
        out.add("explosion.csv");
    }
    if (cfg.dump_paths) {
        const std::size_t dump = std::min<std::size_t>(cfg.paths, cfg.dump_paths);
        FixedOptions opts;
        opts.n_steps = cfg.k_steps;
        opts.force_first_state = cfg.force_x1;
        for (std::size_t i = 0; i < dump; ++i) {
            ForwardWiener noise(NoiseStream(cfg.master_seed, i, cfg.problem.system.noise_dim()));
            FixedTrajectory traj =
                integrate_fixed_em(cfg.problem.system, cfg.fixed_dt, cfg.problem.xi, noise, 0.0,
                                   opts);
            write_fixed_trajectory_csv(out.dir() / path_file_name(i), cfg.config_hash, traj);
            out.add(path_file_name(i));
        }
    }
    std::cout << "explode: fraction=" << stats.fraction << " ci=[" << stats.ci_lo << ","
              << stats.ci_hi << "] audit_violations=" << stats.audit.violations << "\n";
    return 0;
}

int run_check(const RunConfig& cfg, OutputSet& out) {
    const double delta = cfg.deltas.front();
    const StepController ctrl = cfg.controller(delta);
    const SampleBox box =
        SampleBox::symmetric(cfg.problem.system.state_dim(), cfg.check_box_radius);
    ConditionReport report = check_step_condition(cfg.problem.system, ctrl,
                                                  cfg.problem.constants, cfg.check_mode, box,
                                                  cfg.check_samples);
    std::vector<std::string> cols{"mode",       "pass",    "worst_margin", "n_samples",
                                  "hmax_checked", "hmax_ok", "hmax_lhs",     "hmax_rhs"};
    for (int k = 1; k <= cfg.problem.system.state_dim(); ++k)
        cols.push_back("worst_x_" + std::to_string(k));
    for (int k = 1; k <= cfg.problem.system.state_dim(); ++k)
        cols.push_back("worst_y_" + std::to_string(k));
    CsvWriter csv(out.dir() / "check.csv", cfg.config_hash, cols);
    csv.cell(std::string_view(condition_mode_name(cfg.check_mode)));
    csv.cell(std::string_view(report.pass ? "1" : "0"));
    csv.cell(report.worst_margin);
    csv.cell(report.samples);
    csv.cell(std::string_view(report.hmax_checked ? "1" : "0"));
    csv.cell(std::string_view(report.hmax_ok ? "1" : "0"));
    csv.cell(report.hmax_lhs);
    csv.cell(report.hmax_rhs);
    for (double v : report.worst_x) csv.cell(v);
    for (double v : report.worst_y) csv.cell(v);
    csv.end_row();
    out.add("check.csv");
    std::cout << "check: " << (report.pass ? "pass" : "fail")
              << " worst_margin=" << report.worst_margin << "\n";
    return 0;
}

} // namespace

int run_experiment(const RunConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    OutputSet out(cfg);
    int rc = 0;
    switch (cfg.mode) {
        case RunMode::Simulate: rc = run_simulate(cfg, out); break;
        case RunMode::Converge: rc = run_converge(cfg, out); break;
        case RunMode::Moments: rc = run_moments(cfg, out); break;
        case RunMode::Stability: rc = run_stability(cfg, out); break;
        case RunMode::Explode: rc = run_explode(cfg, out); break;
        case RunMode::Check: rc = run_check(cfg, out); break;
    }
    out.write_manifest();
    // runtime goes to stdout, never into the outputs: replays stay byte-equal
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << run_mode_name(cfg.mode) << ": wrote " << cfg.out_dir << " seed="
              << cfg.master_seed << " hash=" << cfg.config_hash << " elapsed_s="
              << secs << "\n";
    return rc;
}

} // namespace sdde
