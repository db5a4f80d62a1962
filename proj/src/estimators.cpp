#include "ssrlab/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ssrlab/math_core.hpp"

namespace ssrlab {

namespace {

constexpr std::uint64_t kOuterStreamTag = 1ull << 56;
constexpr std::uint64_t kInnerStreamTag = 2ull << 56;

struct MomentAcc {
    // layout: count, then per eps: kNumStats sums + upper-triangle products
    std::vector<double> data;

    void init(std::size_t n_eps) {
        constexpr int k = PathStats::kNumStats;
        data.assign(1 + n_eps * (k + k * (k + 1) / 2), 0.0);
    }
    void merge(const MomentAcc& o) {
        if (data.empty()) {
            data = o.data;
            return;
        }
        if (o.data.empty()) return;
        for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    }
};

}  // namespace

double PathStats::cov_mean(int i, int j) const {
    const double n = static_cast<double>(n_units);
    if (n_units < 2) return 0.0;
    const double c = (prods[i][j] - n * mean(i) * mean(j)) / (n - 1.0);
    return c / n;
}

std::vector<PathStats> run_path_stats(const SimContext& ctx,
                                      std::span<const double> eps_list,
                                      const RunSpec& spec) {
    if (spec.n_paths < 1000) {
        throw ValidationError("run_path_stats: at least 1e3 paths required");
    }
    if (spec.antithetic && spec.n_paths % 2 != 0) {
        throw ValidationError("run_path_stats: antithetic needs an even path count");
    }
    if (!(spec.fd_step > 0.0)) {
        throw ValidationError("run_path_stats: fd_step must be positive");
    }
    const double s0 = ctx.config.spot0;
    const double strikes[5] = {s0, s0 * std::exp(spec.fd_step),
                               s0 * std::exp(-spec.fd_step),
                               s0 * std::exp(0.5 * spec.fd_step),
                               s0 * std::exp(-0.5 * spec.fd_step)};
    const std::size_t n_eps = eps_list.size();
    constexpr int k = PathStats::kNumStats;
    constexpr int n_prods = k * (k + 1) / 2;

    auto path_values = [&](const PathOutputs& p, double out[k]) {
        const double st = p.s_T;
        const bool itm = s0 > st;
        out[PathStats::kInd] = itm ? 1.0 : 0.0;
        out[PathStats::kPay0] = std::max(strikes[0] - st, 0.0);
        out[PathStats::kPayP] = std::max(strikes[1] - st, 0.0);
        out[PathStats::kPayM] = std::max(strikes[2] - st, 0.0);
        out[PathStats::kPayP2] = std::max(strikes[3] - st, 0.0);
        out[PathStats::kPayM2] = std::max(strikes[4] - st, 0.0);
        out[PathStats::kXi] = itm ? st * p.i_T : 0.0;
        out[PathStats::kSpotT] = st;
    };

    PathStreamSpec stream{spec.n_paths, spec.seed, spec.antithetic, spec.workers};
    MomentAcc acc = fold_paths<MomentAcc>(
        ctx, eps_list, stream,
        [&](std::uint64_t, std::span<const PathOutputs> a,
            std::span<const PathOutputs> b, MomentAcc& m) {
            if (m.data.empty()) m.init(n_eps);
            m.data[0] += 1.0;
            double va[k], vb[k];
            for (std::size_t e = 0; e < n_eps; ++e) {
                double* base = m.data.data() + 1 + e * (k + n_prods);
                path_values(a[e], va);
                if (!b.empty()) {
                    path_values(b[e], vb);
                    for (int i = 0; i < k; ++i) va[i] = 0.5 * (va[i] + vb[i]);
                }
                for (int i = 0; i < k; ++i) base[i] += va[i];
                double* pr = base + k;
                for (int i = 0; i < k; ++i) {
                    for (int j = i; j < k; ++j) *pr++ += va[i] * va[j];
                }
            }
        });

    std::vector<PathStats> out(n_eps);
    if (acc.data.empty()) acc.init(n_eps);
    for (std::size_t e = 0; e < n_eps; ++e) {
        PathStats& s = out[e];
        s.epsilon = eps_list[e];
        s.fd_step = spec.fd_step;
        s.n_paths = spec.n_paths;
        s.n_units = static_cast<std::uint64_t>(acc.data[0]);
        const double* base = acc.data.data() + 1 + e * (k + n_prods);
        for (int i = 0; i < k; ++i) s.sums[i] = base[i];
        const double* pr = base + k;
        for (int i = 0; i < k; ++i) {
            for (int j = i; j < k; ++j) {
                s.prods[i][j] = *pr;
                s.prods[j][i] = *pr;
                ++pr;
            }
        }
    }
    return out;
}

SSREstimate estimate_xy(const PathStats& stats, const SimContext& ctx) {
    const double s0 = ctx.config.spot0;
    const double eps = stats.epsilon;

    SSREstimate est;
    est.epsilon = eps;
    est.n_paths = stats.n_paths;
    est.digital_prob = stats.mean(PathStats::kInd);
    est.put_price = stats.mean(PathStats::kPay0);
    est.atm_total_var = implied_total_variance(s0, s0, est.put_price);

    const double rt = std::sqrt(est.atm_total_var);
    est.y = est.digital_prob - norm_cdf(0.5 * rt);

    // delta-method chain for the Φ(sqrt(Σ)/2) term: dΦ/dΣ = φ(rt/2)/(4 rt),
    // dΣ/dprice = 1/(∂p/∂Σ)
    const double chain = norm_pdf(0.5 * rt) / (4.0 * rt) /
                         bs_put_dtotalvar(s0, s0, est.atm_total_var);
    const double var_y = stats.cov_mean(PathStats::kInd, PathStats::kInd) -
                         2.0 * chain * stats.cov_mean(PathStats::kInd, PathStats::kPay0) +
                         chain * chain * stats.cov_mean(PathStats::kPay0, PathStats::kPay0);
    est.y_se = std::sqrt(std::max(var_y, 0.0));

    const double coef = eps == 0.0 ? 0.0 : -eps / (2.0 * s0 * std::sqrt(ctx.v00));
    est.x = coef == 0.0 ? 0.0 : coef * stats.mean(PathStats::kXi);
    const double var_x = coef * coef * stats.cov_mean(PathStats::kXi, PathStats::kXi);
    est.x_se = std::sqrt(std::max(var_x, 0.0));

    const double cov_xy =
        coef * (stats.cov_mean(PathStats::kXi, PathStats::kInd) -
                chain * stats.cov_mean(PathStats::kXi, PathStats::kPay0));

    est.degenerate_denominator = std::abs(est.y) <= 2.0 * est.y_se;
    if (est.y != 0.0) {
        est.r = est.x / est.y;
        const double var_r =
            (var_x - 2.0 * est.r * cov_xy + est.r * est.r * var_y) / (est.y * est.y);
        est.r_se = est.degenerate_denominator
                       ? std::numeric_limits<double>::infinity()
                       : std::sqrt(std::max(var_r, 0.0));
    } else {
        est.r = std::numeric_limits<double>::quiet_NaN();
        est.r_se = std::numeric_limits<double>::infinity();
        est.degenerate_denominator = true;
    }
    return est;
}

namespace {

// d(annualized vol)/d(price) at a given strike: dσ/dp = (dΣ/dp) / (2 sqrt(Σ T))
double dvol_dprice(double s0, double strike, double total_var, double maturity) {
    return 1.0 / bs_put_dtotalvar(s0, strike, total_var) /
           (2.0 * std::sqrt(total_var * maturity));
}

}  // namespace

SkewEstimate estimate_skew_fd(const PathStats& stats, const SimContext& ctx) {
    const double s0 = ctx.config.spot0;
    const double t_mat = ctx.grid.maturity;
    const double step = stats.fd_step;

    SkewEstimate est;
    est.fd_step = step;

    const double kp = s0 * std::exp(step);
    const double km = s0 * std::exp(-step);
    const double tvp = implied_total_variance(s0, kp, stats.mean(PathStats::kPayP));
    const double tvm = implied_total_variance(s0, km, stats.mean(PathStats::kPayM));
    const double sig_p = std::sqrt(tvp / t_mat);
    const double sig_m = std::sqrt(tvm / t_mat);
    est.skew_fd = (sig_p - sig_m) / (2.0 * step);
    est.tv_skew_fd = (tvp - tvm) / (2.0 * step);

    const double gp = dvol_dprice(s0, kp, tvp, t_mat) / (2.0 * step);
    const double gm = -dvol_dprice(s0, km, tvm, t_mat) / (2.0 * step);
    const double var_fd =
        gp * gp * stats.cov_mean(PathStats::kPayP, PathStats::kPayP) +
        gm * gm * stats.cov_mean(PathStats::kPayM, PathStats::kPayM) +
        2.0 * gp * gm * stats.cov_mean(PathStats::kPayP, PathStats::kPayM);
    est.skew_fd_se = std::sqrt(std::max(var_fd, 0.0));

    // Richardson: fd(δ) - true ≈ c δ², so (4/3)|fd(δ) - fd(δ/2)| bounds it
    {
        const double kp2 = s0 * std::exp(0.5 * step);
        const double km2 = s0 * std::exp(-0.5 * step);
        const double tvp2 = implied_total_variance(s0, kp2, stats.mean(PathStats::kPayP2));
        const double tvm2 = implied_total_variance(s0, km2, stats.mean(PathStats::kPayM2));
        const double fd_half =
            (std::sqrt(tvp2 / t_mat) - std::sqrt(tvm2 / t_mat)) / step;
        est.fd_bias_estimate = 4.0 / 3.0 * std::abs(est.skew_fd - fd_half);
    }

    // digital route (eqSk identity)
    const double dig = stats.mean(PathStats::kInd);
    const double tv0 = implied_total_variance(s0, s0, stats.mean(PathStats::kPay0));
    est.tv_skew_eqsk = s0 * atm_skew_from_digital(s0, tv0, dig);
    est.skew_eqsk = est.tv_skew_eqsk / (2.0 * std::sqrt(tv0 * t_mat));

    const double d_dig = 1.0 / (norm_pdf(0.5 * std::sqrt(tv0)) * std::sqrt(t_mat));
    // sensitivity to the ATM put through Σ0, by central difference in Σ
    double d_pay0;
    {
        auto g = [&](double tv) {
            return s0 * atm_skew_from_digital(s0, tv, dig) /
                   (2.0 * std::sqrt(tv * t_mat));
        };
        const double dh = 1e-6 * tv0;
        d_pay0 = (g(tv0 + dh) - g(tv0 - dh)) / (2.0 * dh) /
                 bs_put_dtotalvar(s0, s0, tv0);
    }
    const double var_eqsk =
        d_dig * d_dig * stats.cov_mean(PathStats::kInd, PathStats::kInd) +
        2.0 * d_dig * d_pay0 * stats.cov_mean(PathStats::kInd, PathStats::kPay0) +
        d_pay0 * d_pay0 * stats.cov_mean(PathStats::kPay0, PathStats::kPay0);
    est.skew_eqsk_se = std::sqrt(std::max(var_eqsk, 0.0));

    // se of the difference: gradient over (ind, pay0, payp, paym)
    const int idx[4] = {PathStats::kInd, PathStats::kPay0, PathStats::kPayP,
                        PathStats::kPayM};
    const double grad[4] = {-d_dig, -d_pay0, gp, gm};
    double var_diff = 0.0;
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            var_diff += grad[i] * grad[j] * stats.cov_mean(idx[i], idx[j]);
        }
    }
    est.diff_se = std::sqrt(std::max(var_diff, 0.0));
    return est;
}

namespace {

// Joint Gaussian of the outer segment [0, h] extended with the conditional
// forward-variance state: (dB_0..dB_{no-1}, X_1..X_no, G(s_1)..G(s_{ni-1}))
// where s_r = h + r dt are the inner grid left edges beyond h and
// G(s) = sum_i ∫_0^h k_i(s-u) dW^i_u.
Matrix assemble_outer_covariance(const EffectiveKernel& keff, int n_out, int n_in,
                                 double dt) {
    const double h = n_out * dt;
    const int dim = 2 * n_out + (n_in - 1);
    Matrix c(dim);

    double var_scale = 0.0;
    for (const auto& [rho, k] : keff.components) {
        (void)rho;
        var_scale += kernel_sq_integral(k, 0.0, h + n_in * dt);
    }
    const double prod_tol = std::max(1e-300, 1e-13 * var_scale);

    for (int j = 0; j < n_out; ++j) c.at(j, j) = dt;

    auto cell_k = [&](double lo, double hi) { return keff.cell_integral(lo, hi); };
    // X block and X-dB cross (same law as the standard builder on [0, h])
    for (int m = 1; m <= n_out; ++m) {
        for (int j = 0; j < m; ++j) {
            const double v = cell_k((m - 1 - j) * dt, (m - j) * dt);
            c.at(n_out + m - 1, j) = v;
            c.at(j, n_out + m - 1) = v;
        }
        for (int l = 1; l <= m; ++l) {
            double v = 0.0;
            for (const auto& [rho, k] : keff.components) {
                (void)rho;
                v += kernel_prod_integral(k, 0.0, l * dt, (m - l) * dt, prod_tol);
            }
            c.at(n_out + m - 1, n_out + l - 1) = v;
            c.at(n_out + l - 1, n_out + m - 1) = v;
        }
    }
    // G rows
    for (int r = 1; r < n_in; ++r) {
        const int gr = 2 * n_out + r - 1;
        const double s_r = h + r * dt;
        for (int j = 0; j < n_out; ++j) {
            const double v = cell_k(s_r - (j + 1) * dt, s_r - j * dt);
            c.at(gr, j) = v;
            c.at(j, gr) = v;
        }
        for (int m = 1; m <= n_out; ++m) {
            double v = 0.0;
            for (const auto& [rho, k] : keff.components) {
                (void)rho;
                v += kernel_prod_integral(k, 0.0, m * dt, s_r - m * dt, prod_tol);
            }
            c.at(gr, n_out + m - 1) = v;
            c.at(n_out + m - 1, gr) = v;
        }
        for (int q = 1; q <= r; ++q) {
            const int gq = 2 * n_out + q - 1;
            const double s_q = h + q * dt;
            double v = 0.0;
            for (const auto& [rho, k] : keff.components) {
                (void)rho;
                v += kernel_prod_integral(k, s_q - h, s_q, s_r - s_q, prod_tol);
            }
            c.at(gr, gq) = v;
            c.at(gq, gr) = v;
        }
    }
    return c;
}

Matrix cholesky_with_ridge(Matrix c, const char* where) {
    double trace = 0.0;
    for (int i = 0; i < c.n; ++i) trace += c.at(i, i);
    double ridge = 1e-12 * trace / c.n;
    for (int attempt = 0; attempt <= 3; ++attempt) {
        if (auto l = cholesky_lower(c)) return std::move(*l);
        if (attempt == 3) break;
        for (int i = 0; i < c.n; ++i) c.at(i, i) += ridge;
        ridge *= 10.0;
    }
    throw NumericalDegeneracy(std::string(where) + ": Cholesky failed after ridge");
}

}  // namespace

RegressionEstimate estimate_ssr_regression(const ModelConfig& config,
                                           const TimeGrid& grid, double h, int n_outer,
                                           int n_inner, std::uint64_t seed,
                                           double sigma_prime_0, int workers) {
    validate_config(config);
    if (!(h > 0.0) || !(h < grid.maturity)) {
        throw ValidationError("estimate_ssr_regression: h must lie in (0, T)");
    }
    if (n_outer < 8 || n_inner < 100) {
        throw ValidationError("estimate_ssr_regression: budget too small");
    }
    if (n_outer % 2 != 0 || n_inner % 2 != 0) {
        throw ValidationError("estimate_ssr_regression: antithetic needs even counts");
    }
    if (sigma_prime_0 == 0.0) {
        throw ValidationError("estimate_ssr_regression: zero skew, SSR undefined");
    }

    const double dt = grid.dt();
    const int n_out = std::max(2, static_cast<int>(std::llround(h / dt)));
    const int n_in = grid.n_steps - n_out;
    if (n_in < 2) throw ValidationError("estimate_ssr_regression: h too close to T");
    const double h_used = n_out * dt;
    const double t_rem = grid.maturity - h_used;
    const double eps = config.epsilon;

    const EffectiveKernel keff = effective_kernel(config);
    const TimeGrid inner_grid{t_rem, n_in};
    const JointGaussianLaw inner_law = build_joint_covariance(config, inner_grid);

    // inner draws and variance factors are shared by every outer path
    // (common random numbers): inner-noise differences cancel from the
    // regression increments
    const int inner_dim = 2 * n_in;
    const int n_inner_pairs = n_inner / 2;
    std::vector<double> inner_db(static_cast<std::size_t>(n_inner_pairs) * n_in);
    // exp(±eps X_m - eps²/2 Var X_m) at the inner left edges m = 1..n_in-1
    std::vector<double> inner_e_pos(static_cast<std::size_t>(n_inner_pairs) * (n_in - 1));
    std::vector<double> inner_e_neg(inner_e_pos.size());
    {
        std::vector<double> z(inner_dim), gauss(inner_dim);
        for (int q = 0; q < n_inner_pairs; ++q) {
            PhiloxStream rng(seed, kInnerStreamTag | static_cast<std::uint64_t>(q));
            rng.fill_normals(z);
            lower_matvec(inner_law.chol, z, gauss);
            for (int m = 0; m < n_in; ++m) inner_db[q * n_in + m] = gauss[m];
            for (int m = 1; m < n_in; ++m) {
                const double xm = gauss[n_in + m - 1];
                const double comp = 0.5 * eps * eps * inner_law.var_x[m - 1];
                inner_e_pos[q * (n_in - 1) + m - 1] = std::exp(eps * xm - comp);
                inner_e_neg[q * (n_in - 1) + m - 1] = std::exp(-eps * xm - comp);
            }
        }
    }

    // conditional curve at the null outer state (G ≡ 0):
    // V_h(s) = V0(s) exp(-eps²/2 ∫_0^h k(s-u)² du) at s = h + m dt
    std::vector<double> c_left_null(n_in);
    for (int m = 0; m < n_in; ++m) {
        const double s = h_used + m * dt;
        double qvar = 0.0;
        for (const auto& [rho, k] : keff.components) {
            (void)rho;
            qvar += kernel_sq_integral(k, s - h_used, s);
        }
        c_left_null[m] =
            curve_eval(config.curve, s) * std::exp(-0.5 * eps * eps * qvar);
    }

    // normalized inner put price (strike = spot), averaged over inner paths
    auto inner_price = [&](const std::vector<double>& c_left) {
        double acc = 0.0;
        for (int q = 0; q < n_inner_pairs; ++q) {
            const double* db = &inner_db[static_cast<std::size_t>(q) * n_in];
            const double* ep = &inner_e_pos[static_cast<std::size_t>(q) * (n_in - 1)];
            const double* en = &inner_e_neg[static_cast<std::size_t>(q) * (n_in - 1)];
            double ls_a = 0.0, ls_b = 0.0;
            double v_a = c_left[0], v_b = c_left[0];
            for (int m = 0; m < n_in; ++m) {
                if (m > 0) {
                    v_a = c_left[m] * ep[m - 1];
                    v_b = c_left[m] * en[m - 1];
                }
                const double sa = std::sqrt(v_a);
                const double sb = std::sqrt(v_b);
                ls_a += sa * db[m] - 0.5 * v_a * dt;
                ls_b += -sb * db[m] - 0.5 * v_b * dt;
            }
            acc += std::max(1.0 - std::exp(ls_a), 0.0) +
                   std::max(1.0 - std::exp(ls_b), 0.0);
        }
        return acc / (2.0 * n_inner_pairs);
    };

    double sigma_base;
    {
        const double p0 = inner_price(c_left_null);
        sigma_base = std::sqrt(implied_total_variance(1.0, 1.0, p0) / t_rem);
    }

    // outer joint law, extended with the conditional-curve state rows
    const Matrix outer_chol = cholesky_with_ridge(
        assemble_outer_covariance(keff, n_out, n_in, dt), "outer covariance");
    std::vector<double> outer_var_x(n_out);
    {
        // Var X_m on the outer grid from the kernel catalog (analytic diagonal)
        for (int m = 1; m <= n_out; ++m) {
            double v = 0.0;
            for (const auto& [rho, k] : keff.components) {
                (void)rho;
                v += kernel_sq_integral(k, 0.0, m * dt);
            }
            outer_var_x[m - 1] = v;
        }
    }
    std::vector<double> v0_outer(n_out + 1);
    for (int m = 0; m <= n_out; ++m) v0_outer[m] = curve_eval(config.curve, m * dt);

    const int n_outer_pairs = n_outer / 2;
    const int outer_dim = outer_chol.n;
    std::vector<double> xs(n_outer, 0.0);
    std::vector<double> sig_h(n_outer, 0.0);
    std::vector<int> ok(n_outer, 0);

    struct Empty {
        void merge(const Empty&) {}
    };
    parallel_fold<Empty>(
        static_cast<std::uint64_t>(n_outer_pairs), workers,
        [&](std::uint64_t u, Empty&) {
            thread_local std::vector<double> z, gauss, c_left;
            z.resize(outer_dim);
            gauss.resize(outer_dim);
            c_left.resize(n_in);
            PhiloxStream rng(seed, kOuterStreamTag | u);
            rng.fill_normals(z);
            lower_matvec(outer_chol, z, gauss);
            for (int sign = 0; sign < 2; ++sign) {
                if (sign == 1) {
                    for (double& g : gauss) g = -g;
                }
                // outer spot advance on [0, h]
                double log_s = 0.0;
                double v_left = v0_outer[0];
                for (int j = 0; j < n_out; ++j) {
                    log_s += std::sqrt(v_left) * gauss[j] - 0.5 * v_left * dt;
                    if (j + 1 < n_out) {
                        v_left = v0_outer[j + 1] *
                                 std::exp(eps * gauss[n_out + j] -
                                          0.5 * eps * eps * outer_var_x[j]);
                    }
                }
                // conditional curve on the inner left edges
                c_left[0] = c_left_null[0] * std::exp(eps * gauss[2 * n_out - 1]);
                for (int m = 1; m < n_in; ++m) {
                    c_left[m] =
                        c_left_null[m] * std::exp(eps * gauss[2 * n_out + m - 1]);
                }
                const std::size_t p = 2 * u + sign;
                xs[p] = log_s;
                const double price = inner_price(c_left);
                try {
                    sig_h[p] =
                        std::sqrt(implied_total_variance(1.0, 1.0, price) / t_rem);
                    ok[p] = 1;
                } catch (const NoArbitrageViolation&) {
                    ok[p] = 0;
                }
            }
        });

    RegressionEstimate est;
    est.h = h_used;
    est.n_outer = n_outer;
    est.n_inner = n_inner;
    est.sigma0 = sigma_base;
    est.skew = sigma_prime_0;

    double sxy = 0.0, sxx = 0.0;
    int n_ok = 0;
    for (int p = 0; p < n_outer; ++p) {
        if (!ok[p]) continue;
        ++n_ok;
        const double y = sig_h[p] - sigma_base;
        sxy += xs[p] * y;
        sxx += xs[p] * xs[p];
    }
    est.n_discarded = n_outer - n_ok;
    if (est.n_discarded > 0.05 * n_outer) {
        throw NumericalDegeneracy(
            "estimate_ssr_regression: more than 5% of outer samples discarded");
    }
    if (!(sxx > 0.0)) {
        throw NumericalDegeneracy("estimate_ssr_regression: no spot variation");
    }
    est.slope = sxy / sxx;
    double s_resid = 0.0;
    for (int p = 0; p < n_outer; ++p) {
        if (!ok[p]) continue;
        const double r = (sig_h[p] - sigma_base) - est.slope * xs[p];
        s_resid += r * r * xs[p] * xs[p];
    }
    est.slope_se = std::sqrt(s_resid) / sxx;
    est.r_reg = est.slope / sigma_prime_0;
    return est;
}

}  // namespace ssrlab
