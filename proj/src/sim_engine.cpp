#include "ssrlab/sim_engine.hpp"

#include <cmath>
#include <ostream>

namespace ssrlab {

namespace {

void check_grid(const TimeGrid& grid) {
    if (!(grid.maturity > 0.0) || grid.n_steps < 2) {
        throw ValidationError("TimeGrid: needs maturity > 0 and n_steps >= 2");
    }
}

}  // namespace

Matrix assemble_joint_covariance(const ModelConfig& config, const TimeGrid& grid) {
    check_grid(grid);
    const EffectiveKernel keff = effective_kernel(config);
    const int n = grid.n_steps;
    const double dt = grid.dt();
    Matrix c(2 * n);

    // scale for the quadrature tolerance of the power-kernel product integrals
    double var_scale = 0.0;
    for (const auto& [rho, k] : keff.components) {
        (void)rho;
        var_scale += kernel_sq_integral(k, 0.0, grid.maturity);
    }
    const double prod_tol = std::max(1e-300, 1e-13 * var_scale);

    for (int j = 0; j < n; ++j) c.at(j, j) = dt;

    // cross block: Cov(X_m, dB_j) = ∫_{cell j} k(t_m - u) du, cells before t_m
    std::vector<double> cell_by_lag(n);  // ∫_{l dt}^{(l+1) dt} k(v) dv
    for (int l = 0; l < n; ++l) {
        cell_by_lag[l] = keff.cell_integral(grid.t(l), grid.t(l + 1));
    }
    for (int m = 1; m <= n; ++m) {
        for (int j = 0; j < m; ++j) {
            const double v = cell_by_lag[m - 1 - j];
            c.at(n + m - 1, j) = v;
            c.at(j, n + m - 1) = v;
        }
    }

    // X block: Cov(X_m, X_l) = sum_i ∫_0^{t_min} k_i(v) k_i(v + |m-l| dt) dv
    for (int m = 1; m <= n; ++m) {
        for (int l = 1; l <= m; ++l) {
            double v = 0.0;
            for (const auto& [rho, k] : keff.components) {
                (void)rho;
                v += kernel_prod_integral(k, 0.0, grid.t(l), (m - l) * dt, prod_tol);
            }
            c.at(n + m - 1, n + l - 1) = v;
            c.at(n + l - 1, n + m - 1) = v;
        }
    }
    return c;
}

JointGaussianLaw build_joint_covariance(const ModelConfig& config, const TimeGrid& grid) {
    Matrix c = assemble_joint_covariance(config, grid);
    const int n = grid.n_steps;

    JointGaussianLaw law;
    law.grid = grid;
    law.var_x.resize(n);
    for (int m = 1; m <= n; ++m) law.var_x[m - 1] = c.at(n + m - 1, n + m - 1);

    double trace = 0.0;
    for (int i = 0; i < 2 * n; ++i) trace += c.at(i, i);
    double ridge = 1e-12 * trace / (2 * n);
    double added = 0.0;

    for (int attempt = 0; attempt <= 3; ++attempt) {
        if (auto l = cholesky_lower(c)) {
            law.chol = std::move(*l);
            law.ridge_retries = attempt;
            law.ridge_added = added;
            return law;
        }
        if (attempt == 3) break;
        for (int i = 0; i < 2 * n; ++i) c.at(i, i) += ridge;
        added += ridge;
        ridge *= 10.0;
    }
    throw NumericalDegeneracy(
        "build_joint_covariance: Cholesky failed after ridge escalation");
}

std::vector<double> kernel_cell_weights(const EffectiveKernel& kernel,
                                        const TimeGrid& grid) {
    check_grid(grid);
    const int n = grid.n_steps;
    const double dt = grid.dt();
    std::vector<double> w(n);
    for (int j = 0; j < n; ++j) {
        w[j] = kernel.cell_integral(grid.t(j), grid.t(j + 1)) / dt;
    }
    return w;
}

SimContext make_sim_context(const ModelConfig& config, const TimeGrid& grid) {
    SimContext ctx;
    ctx.config = config;
    ctx.grid = grid;
    ctx.kernel = effective_kernel(config);
    ctx.law = build_joint_covariance(config, grid);
    ctx.weights = kernel_cell_weights(ctx.kernel, grid);
    ctx.v0_grid.resize(grid.n_steps + 1);
    for (int m = 0; m <= grid.n_steps; ++m) {
        ctx.v0_grid[m] = curve_eval(config.curve, grid.t(m));
    }
    ctx.v00 = ctx.v0_grid[0];
    return ctx;
}

void map_normals(const SimContext& ctx, std::span<const double> z,
                 std::span<double> gauss) {
    lower_matvec(ctx.law.chol, z, gauss);
}

PathOutputs advance_path(const SimContext& ctx, std::span<const double> gauss,
                         double eps) {
    const int n = ctx.grid.n_steps;
    const double dt = ctx.grid.dt();
    const double half_eps_sq = 0.5 * eps * eps;

    double log_s = std::log(ctx.config.spot0);
    double i_t = 0.0;
    double v_left = ctx.v00;  // X_0 = 0: the t = 0 variance is deterministic
    for (int j = 0; j < n; ++j) {
        const double sqrt_v = std::sqrt(v_left);
        const double db = gauss[j];
        log_s += sqrt_v * db - 0.5 * v_left * dt;
        i_t += sqrt_v * ctx.weights[j] * (db - sqrt_v * dt);
        if (j + 1 < n) {
            v_left = ctx.v0_grid[j + 1] *
                     std::exp(eps * gauss[n + j] - half_eps_sq * ctx.law.var_x[j]);
        }
    }
    PathOutputs out;
    out.log_s_T = log_s;
    out.s_T = std::exp(log_s);
    out.i_T = i_t;
    return out;
}

PathBundle advance_path_full(const SimContext& ctx, std::span<const double> gauss,
                             double eps) {
    const int n = ctx.grid.n_steps;
    const double dt = ctx.grid.dt();
    const double half_eps_sq = 0.5 * eps * eps;

    PathBundle b;
    b.d_b.assign(gauss.begin(), gauss.begin() + n);
    b.x_vol.assign(gauss.begin() + n, gauss.begin() + 2 * n);
    b.v.resize(n);
    b.log_s.resize(n + 1);
    for (int m = 1; m <= n; ++m) {
        b.v[m - 1] = ctx.v0_grid[m] *
                     std::exp(eps * b.x_vol[m - 1] - half_eps_sq * ctx.law.var_x[m - 1]);
    }
    b.log_s[0] = std::log(ctx.config.spot0);
    double i_t = 0.0;
    for (int j = 0; j < n; ++j) {
        const double v_left = (j == 0) ? ctx.v00 : b.v[j - 1];
        const double sqrt_v = std::sqrt(v_left);
        b.log_s[j + 1] = b.log_s[j] + sqrt_v * b.d_b[j] - 0.5 * v_left * dt;
        i_t += sqrt_v * ctx.weights[j] * (b.d_b[j] - sqrt_v * dt);
    }
    b.i_T = i_t;
    return b;
}

std::vector<PathBundle> capture_paths(const SimContext& ctx, double eps,
                                      const PathStreamSpec& stream) {
    const int two_n = ctx.law.chol.n;
    std::vector<PathBundle> out;
    out.reserve(stream.n_paths);
    std::vector<double> z(two_n), gauss(two_n);
    const std::uint64_t n_units = stream.antithetic ? stream.n_paths / 2 : stream.n_paths;
    for (std::uint64_t u = 0; u < n_units; ++u) {
        PhiloxStream rng(stream.seed, u);
        rng.fill_normals(z);
        map_normals(ctx, z, gauss);
        out.push_back(advance_path_full(ctx, gauss, eps));
        if (stream.antithetic) {
            for (double& g : gauss) g = -g;
            out.push_back(advance_path_full(ctx, gauss, eps));
        }
    }
    return out;
}

void dump_paths(std::ostream& out, const SimContext& ctx, double eps,
                const PathStreamSpec& stream) {
    auto put_u64 = [&out](std::uint64_t v) {
        unsigned char buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
        out.write(reinterpret_cast<const char*>(buf), 8);
    };
    auto put_f64 = [&put_u64](double d) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(d));
        __builtin_memcpy(&bits, &d, 8);
        put_u64(bits);
    };
    put_u64(static_cast<std::uint64_t>(ctx.grid.n_steps));
    put_u64(stream.n_paths);
    put_u64(stream.seed);
    const auto bundles = capture_paths(ctx, eps, stream);
    for (const auto& b : bundles) {
        for (double v : b.d_b) put_f64(v);
        for (double v : b.x_vol) put_f64(v);
        for (double v : b.v) put_f64(v);
        for (double v : b.log_s) put_f64(v);
        put_f64(b.i_T);
    }
}

}  // namespace ssrlab
