#include "ssrlab/cli.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ssrlab/asymptotics.hpp"
#include "ssrlab/estimators.hpp"
#include "ssrlab/math_core.hpp"
#include "ssrlab/model.hpp"
#include "ssrlab/sim_engine.hpp"

namespace ssrlab::cli {

namespace {

std::string format_double(double d) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), d,
                                   std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

constexpr const char* kStatusOk = "ok";

double quiet_nan() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

std::string format_value(const Value& v) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, double>) {
                return format_double(x);
            } else if constexpr (std::is_same_v<T, std::string>) {
                return x;
            } else {
                return std::to_string(x);
            }
        },
        v);
}

std::string to_csv(const std::vector<Record>& records) {
    std::string out;
    if (records.empty()) return out;
    for (std::size_t i = 0; i < records[0].fields.size(); ++i) {
        if (i) out += ',';
        out += records[0].fields[i].first;
    }
    out += '\n';
    for (const auto& r : records) {
        for (std::size_t i = 0; i < r.fields.size(); ++i) {
            if (i) out += ',';
            out += format_value(r.fields[i].second);
        }
        out += '\n';
    }
    return out;
}

std::string to_json(const std::vector<Record>& records) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : records) {
        nlohmann::json obj = nlohmann::json::object();
        for (const auto& [name, v] : r.fields) {
            std::visit([&](const auto& x) { obj[name] = x; }, v);
        }
        arr.push_back(std::move(obj));
    }
    return arr.dump(2) + "\n";
}

void write_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open output file " + tmp);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            std::filesystem::remove(tmp);
            throw Error("failed writing output file " + tmp);
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error("failed to rename output into place: " + path);
    }
}

void validate_manifest(const RunManifest& m) {
    if (m.n_paths < 2) throw ValidationError("manifest: n_paths must be >= 2");
    if (m.antithetic && m.n_paths % 2 != 0) {
        throw ValidationError("manifest: n_paths must be even with --antithetic");
    }
    if (m.n_steps < 8 || m.n_steps > 4096) {
        throw ValidationError("manifest: n_steps must lie in [8, 4096]");
    }
    if (m.format != "csv" && m.format != "json") {
        throw ValidationError("manifest: format must be csv or json");
    }
    if (m.workers && *m.workers < 1) {
        throw ValidationError("manifest: workers must be >= 1");
    }
}

namespace {

Record estimate_record(const SSREstimate& xy, const SkewEstimate& skew,
                       const RunManifest& m, double maturity) {
    Record r;
    r.add("epsilon", xy.epsilon);
    r.add("X", xy.x);
    r.add("X_se", xy.x_se);
    r.add("Y", xy.y);
    r.add("Y_se", xy.y_se);
    r.add("R", xy.r);
    r.add("R_se", xy.r_se);
    r.add("digital_prob", xy.digital_prob);
    r.add("atm_total_var", xy.atm_total_var);
    r.add("atm_vol", std::sqrt(xy.atm_total_var / maturity));
    r.add("skew_fd", skew.skew_fd);
    r.add("skew_eqSk", skew.skew_eqsk);
    r.add("n_paths", static_cast<std::uint64_t>(xy.n_paths));
    r.add("n_steps", static_cast<std::int64_t>(m.n_steps));
    r.add("seed", m.seed);
    r.add("status",
          std::string(xy.degenerate_denominator ? "degenerate_denominator" : kStatusOk));
    return r;
}

Record estimate_error_record(double eps, const RunManifest& m, const std::string& what) {
    Record r;
    r.add("epsilon", eps);
    for (const char* name : {"X", "X_se", "Y", "Y_se", "R", "R_se", "digital_prob",
                             "atm_total_var", "atm_vol", "skew_fd", "skew_eqSk"}) {
        r.add(name, quiet_nan());
    }
    r.add("n_paths", m.n_paths);
    r.add("n_steps", static_cast<std::int64_t>(m.n_steps));
    r.add("seed", m.seed);
    r.add("status", "error: " + what);
    return r;
}

RunSpec to_run_spec(const RunManifest& m) {
    RunSpec spec;
    spec.n_paths = m.n_paths;
    spec.seed = m.seed;
    spec.antithetic = m.antithetic;
    spec.workers = resolve_workers(m.workers);
    spec.fd_step = m.fd_step;
    return spec;
}

}  // namespace

std::vector<Record> run_estimate(const RunManifest& m) {
    const ModelConfig config = load_config(m.config_path);
    const TimeGrid grid{config.maturity, m.n_steps};
    const SimContext ctx = make_sim_context(config, grid);
    if (!m.dump_paths_path.empty()) {
        std::ofstream dump(m.dump_paths_path, std::ios::binary | std::ios::trunc);
        if (!dump) throw Error("cannot open dump file " + m.dump_paths_path);
        dump_paths(dump, ctx, config.epsilon,
                   PathStreamSpec{m.n_paths, m.seed, m.antithetic, 1});
    }
    const double eps[1] = {config.epsilon};
    const auto stats = run_path_stats(ctx, eps, to_run_spec(m));
    const SSREstimate xy = estimate_xy(stats[0], ctx);
    const SkewEstimate skew = estimate_skew_fd(stats[0], ctx);
    return {estimate_record(xy, skew, m, config.maturity)};
}

std::vector<Record> run_limit(const RunManifest& m) {
    const ModelConfig config = load_config(m.config_path);
    const EffectiveKernel keff = effective_kernel(config);

    std::vector<Record> rows;
    {
        Record r;
        r.add("kind", "short_maturity");
        std::string status = kStatusOk;
        double value = quiet_nan(), h = quiet_nan(), g0 = quiet_nan();
        double xs = quiet_nan(), ys = quiet_nan();
        try {
            const LimitReport rep = short_maturity_limit(keff);
            value = rep.value;
            h = rep.gaussian->hurst_H;
            g0 = rep.gaussian->g0;
            xs = rep.scaled_x_limit;
            ys = rep.scaled_y_limit;
        } catch (const HypothesisNotSatisfied&) {
            status = "hypothesis_not_satisfied";
        }
        r.add("status", status);
        r.add("value", value);
        r.add("H", h);
        r.add("g0", g0);
        r.add("A", quiet_nan());
        r.add("B", quiet_nan());
        r.add("C", quiet_nan());
        r.add("D", quiet_nan());
        r.add("x_scaled_limit", xs);
        r.add("y_scaled_limit", ys);
        r.add("quadrature_error_estimate", 0.0);
        rows.push_back(std::move(r));
    }
    {
        Record r;
        r.add("kind", "small_vol");
        std::string status = kStatusOk;
        double value = quiet_nan();
        double a = quiet_nan(), b = quiet_nan(), c = quiet_nan(), d = quiet_nan();
        double xs = quiet_nan(), ys = quiet_nan(), qerr = quiet_nan();
        try {
            const LimitReport rep =
                small_vol_limit(config.curve, keff, config.maturity, m.tol);
            value = rep.value;
            a = rep.moments->A;
            b = rep.moments->B;
            c = rep.moments->C;
            d = rep.moments->D;
            xs = rep.scaled_x_limit;
            ys = rep.scaled_y_limit;
            qerr = rep.quadrature_error_estimate;
        } catch (const HypothesisNotSatisfied&) {
            status = "hypothesis_not_satisfied";
        } catch (const DegenerateDenominator&) {
            status = "degenerate_denominator";
        }
        r.add("status", status);
        r.add("value", value);
        r.add("H", keff.hurst_H ? Value(*keff.hurst_H) : Value(quiet_nan()));
        r.add("g0", keff.g0 ? Value(*keff.g0) : Value(quiet_nan()));
        r.add("A", a);
        r.add("B", b);
        r.add("C", c);
        r.add("D", d);
        r.add("x_scaled_limit", xs);
        r.add("y_scaled_limit", ys);
        r.add("quadrature_error_estimate", qerr);
        rows.push_back(std::move(r));
    }
    return rows;
}

namespace {

Record with_kind_and_sweep(std::string kind, const char* sweep_name, double sweep_value,
                           Record base) {
    Record r;
    r.add("kind", std::move(kind));
    r.add(sweep_name, sweep_value);
    for (auto& f : base.fields) r.fields.push_back(std::move(f));
    return r;
}

}  // namespace

std::vector<Record> run_sweep_eps(const RunManifest& m) {
    const ModelConfig config = load_config(m.config_path);
    const SweepSchedule schedule = epsilon_sweep_schedule(m.sweep_values);
    const TimeGrid grid{config.maturity, m.n_steps};
    const SimContext ctx = make_sim_context(config, grid);

    // one set of Gaussian draws serves the whole sweep (common random numbers)
    const auto stats = run_path_stats(ctx, schedule.values, to_run_spec(m));

    std::vector<Record> rows;
    for (std::size_t i = 0; i < schedule.values.size(); ++i) {
        try {
            const SSREstimate xy = estimate_xy(stats[i], ctx);
            const SkewEstimate skew = estimate_skew_fd(stats[i], ctx);
            rows.push_back(with_kind_and_sweep(
                "estimate", "sweep_epsilon", schedule.values[i],
                estimate_record(xy, skew, m, config.maturity)));
        } catch (const Error& e) {
            rows.push_back(with_kind_and_sweep(
                "estimate", "sweep_epsilon", schedule.values[i],
                estimate_error_record(schedule.values[i], m, e.what())));
        }
    }
    // limit row: eps -> 0 value with the scaled component limits in X, Y
    {
        Record base;
        std::string status = kStatusOk;
        double value = quiet_nan(), xs = quiet_nan(), ys = quiet_nan();
        try {
            const LimitReport rep = small_vol_limit(config.curve, effective_kernel(config),
                                                    config.maturity, m.tol);
            value = rep.value;
            xs = rep.scaled_x_limit;
            ys = rep.scaled_y_limit;
        } catch (const HypothesisNotSatisfied&) {
            status = "hypothesis_not_satisfied";
        } catch (const DegenerateDenominator&) {
            status = "degenerate_denominator";
        }
        base.add("epsilon", 0.0);
        base.add("X", xs);
        base.add("X_se", 0.0);
        base.add("Y", ys);
        base.add("Y_se", 0.0);
        base.add("R", value);
        base.add("R_se", 0.0);
        for (const char* name :
             {"digital_prob", "atm_total_var", "atm_vol", "skew_fd", "skew_eqSk"}) {
            base.add(name, quiet_nan());
        }
        base.add("n_paths", std::uint64_t{0});
        base.add("n_steps", static_cast<std::int64_t>(m.n_steps));
        base.add("seed", m.seed);
        base.add("status", status);
        rows.push_back(with_kind_and_sweep("limit", "sweep_epsilon", 0.0, std::move(base)));
    }
    return rows;
}

std::vector<Record> run_sweep_t(const RunManifest& m) {
    const ModelConfig config = load_config(m.config_path);
    const SweepSchedule schedule = maturity_sweep_schedule(m.sweep_values);

    std::vector<Record> rows;
    for (double t_mat : schedule.values) {
        try {
            ModelConfig c = config;
            c.maturity = t_mat;
            validate_config(c);
            const TimeGrid grid{t_mat, m.n_steps};
            const SimContext ctx = make_sim_context(c, grid);
            const double eps[1] = {c.epsilon};
            const auto stats = run_path_stats(ctx, eps, to_run_spec(m));
            const SSREstimate xy = estimate_xy(stats[0], ctx);
            const SkewEstimate skew = estimate_skew_fd(stats[0], ctx);
            rows.push_back(with_kind_and_sweep("estimate", "maturity", t_mat,
                                               estimate_record(xy, skew, m, t_mat)));
        } catch (const Error& e) {
            rows.push_back(with_kind_and_sweep(
                "estimate", "maturity", t_mat,
                estimate_error_record(config.epsilon, m, e.what())));
        }
    }
    {
        Record base;
        std::string status = kStatusOk;
        double value = quiet_nan(), xs = quiet_nan(), ys = quiet_nan();
        try {
            const LimitReport rep = short_maturity_limit(effective_kernel(config));
            value = rep.value;
            xs = rep.scaled_x_limit;
            ys = rep.scaled_y_limit;
        } catch (const HypothesisNotSatisfied&) {
            status = "hypothesis_not_satisfied";
        }
        base.add("epsilon", config.epsilon);
        base.add("X", xs);
        base.add("X_se", 0.0);
        base.add("Y", ys);
        base.add("Y_se", 0.0);
        base.add("R", value);
        base.add("R_se", 0.0);
        for (const char* name :
             {"digital_prob", "atm_total_var", "atm_vol", "skew_fd", "skew_eqSk"}) {
            base.add(name, quiet_nan());
        }
        base.add("n_paths", std::uint64_t{0});
        base.add("n_steps", static_cast<std::int64_t>(m.n_steps));
        base.add("seed", m.seed);
        base.add("status", status);
        rows.push_back(with_kind_and_sweep("limit", "maturity", 0.0, std::move(base)));
    }
    return rows;
}

int main_entry(int argc, const char* const* argv) {
    CLI::App app{"ssr-lab: skew stickiness ratio under Bergomi-type models"};
    app.require_subcommand(1);

    RunManifest manifest;
    std::string workers_str = "auto";
    std::string values_str;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        if (needs_config) {
            cmd->add_option("--config", manifest.config_path, "model config (JSON)")
                ->required();
        }
        cmd->add_option("--out", manifest.output_path, "output file path");
        cmd->add_option("--format", manifest.format, "csv | json");
        cmd->add_option("--workers", workers_str, "worker count or 'auto'");
    };
    auto add_mc = [&](CLI::App* cmd) {
        cmd->add_option("--seed", manifest.seed, "master RNG seed");
        cmd->add_option("--paths", manifest.n_paths, "number of Monte Carlo paths");
        cmd->add_option("--steps", manifest.n_steps, "time steps in [8, 4096]");
        cmd->add_flag("--antithetic", manifest.antithetic, "antithetic pairing");
        cmd->add_option("--fd-step", manifest.fd_step, "log-strike step for the FD skew");
    };

    CLI::App* est = app.add_subcommand("estimate", "Monte Carlo SSR estimate (X, Y, R)");
    add_common(est, true);
    add_mc(est);
    est->add_option("--dump-paths", manifest.dump_paths_path,
                    "debug binary dump of simulated paths");

    CLI::App* lim = app.add_subcommand("limit", "closed-form/quadrature asymptotic limits");
    add_common(lim, true);
    lim->add_option("--tol", manifest.tol, "quadrature tolerance");

    CLI::App* sweep_eps = app.add_subcommand("sweep-eps", "epsilon sweep with common seed");
    add_common(sweep_eps, true);
    add_mc(sweep_eps);
    sweep_eps->add_option("--values", values_str, "comma-separated epsilon values")
        ->required();
    sweep_eps->add_option("--tol", manifest.tol, "quadrature tolerance for the limit row");

    CLI::App* sweep_t = app.add_subcommand("sweep-T", "maturity sweep with common seed");
    add_common(sweep_t, true);
    add_mc(sweep_t);
    sweep_t->add_option("--values", values_str, "comma-separated maturities")->required();

    CLI::App* selftest = app.add_subcommand("selftest", "reduced-scale invariant suites");
    selftest->add_option("--workers", workers_str, "worker count or 'auto'");
    selftest->add_option("--inject-failure", manifest.inject_failure,
                         "debug: force the named suite to fail");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const auto t0 = std::chrono::steady_clock::now();
    try {
        if (workers_str != "auto") {
            try {
                manifest.workers = std::stoi(workers_str);
            } catch (...) {
                throw ValidationError("manifest: --workers must be an integer or 'auto'");
            }
        }
        std::vector<Record> rows;
        if (est->parsed()) {
            manifest.command = Command::Estimate;
            validate_manifest(manifest);
            rows = run_estimate(manifest);
        } else if (lim->parsed()) {
            manifest.command = Command::Limit;
            rows = run_limit(manifest);
        } else if (sweep_eps->parsed() || sweep_t->parsed()) {
            manifest.command = sweep_eps->parsed() ? Command::SweepEps : Command::SweepT;
            std::stringstream ss(values_str);
            std::string item;
            while (std::getline(ss, item, ',')) {
                if (item.empty()) continue;
                manifest.sweep_values.push_back(std::stod(item));
            }
            validate_manifest(manifest);
            rows = sweep_eps->parsed() ? run_sweep_eps(manifest) : run_sweep_t(manifest);
        } else if (selftest->parsed()) {
            manifest.command = Command::Selftest;
            std::string report;
            const bool good = run_selftest(manifest, report);
            std::fputs(report.c_str(), stdout);
            return good ? 0 : 1;
        }

        const std::string body = manifest.format == "json" ? to_json(rows) : to_csv(rows);
        if (manifest.output_path.empty()) {
            std::fputs(body.c_str(), stdout);
        } else {
            write_atomic(manifest.output_path, body);
        }
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::fprintf(stderr, "ssr-lab: %zu record(s)%s%s (wall %.3f s)\n", rows.size(),
                     manifest.output_path.empty() ? "" : " -> ",
                     manifest.output_path.c_str(), wall);
        return 0;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const NumericalDegeneracy& e) {
        std::fprintf(stderr, "numerical degeneracy: %s\n", e.what());
        return 3;
    } catch (const NoArbitrageViolation& e) {
        std::fprintf(stderr, "numerical degeneracy: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 1;
    }
}

}  // namespace ssrlab::cli
