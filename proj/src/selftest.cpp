#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <tuple>

#include "ssrlab/asymptotics.hpp"
#include "ssrlab/cli.hpp"
#include "ssrlab/estimators.hpp"
#include "ssrlab/math_core.hpp"
#include "ssrlab/model.hpp"
#include "ssrlab/quadrature.hpp"
#include "ssrlab/sim_engine.hpp"

namespace ssrlab::cli {

namespace {

ModelConfig flat_exp_config(double eps) {
    ModelConfig c;
    c.spot0 = 1.0;
    c.maturity = 1.0;
    c.curve = FlatCurve{0.04};
    c.rho = {0.6};
    c.kernels = {ExponentialKernel{1.0, 1.0}};
    c.epsilon = eps;
    return c;
}

ModelConfig two_factor_config(double eps) {
    ModelConfig c;
    c.spot0 = 1.0;
    c.maturity = 1.0;
    c.curve = FlatCurve{0.04};
    c.rho = {0.6, -0.3};
    c.kernels = {ExponentialKernel{1.0, 8.0}, ExponentialKernel{0.5, 0.35}};
    c.epsilon = eps;
    return c;
}

struct Suite {
    std::string name;
    std::function<bool(std::string&)> run;
};

double ks_statistic_vs_normal(std::vector<double> xs, double mu, double sd) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = norm_cdf((xs[i] - mu) / sd);
        d = std::max(d, std::abs(f - (i + 1) / n));
        d = std::max(d, std::abs(f - i / n));
    }
    return d;
}

}  // namespace

bool run_selftest(const RunManifest& manifest, std::string& out) {
    const int workers = resolve_workers(manifest.workers);
    std::ostringstream os;
    std::vector<Suite> suites;

    suites.push_back({"math_roundtrip", [](std::string& detail) {
        double worst = 0.0;
        for (double tv : {1e-6, 1e-4, 0.01, 0.04, 0.25, 1.0, 4.0}) {
            for (double x = -0.6; x <= 0.6; x += 0.06) {
                const double spot = 1.0, strike = std::exp(x);
                const double d = x / std::sqrt(tv);
                if (std::abs(d) > 5.0) continue;
                const double price = bs_put(spot, strike, tv);
                if (!(price > std::max(strike - spot, 0.0) && price < strike)) continue;
                worst = std::max(worst,
                                 std::abs(implied_total_variance(spot, strike, price) - tv));
            }
        }
        detail = "max |round trip error| = " + std::to_string(worst);
        return worst < 1e-8;
    }});

    suites.push_back({"normal_inverse", [](std::string& detail) {
        double worst = 0.0;
        for (double p = 1e-12; p < 1.0; p = p < 0.5 ? p * 3.7 : 1.0 - (1.0 - p) / 3.7) {
            const double z = inverse_normal_cdf(p);
            worst = std::max(worst, std::abs(norm_cdf(z) - p) / p);
            if (p > 1.0 - 1e-12) break;
        }
        detail = "max rel error = " + std::to_string(worst);
        return worst < 1e-12;
    }});

    suites.push_back({"mixing_matrix", [](std::string& detail) {
        std::mt19937_64 gen(7);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        double worst = 0.0;
        for (int rep = 0; rep < 200; ++rep) {
            const int d = 1 + static_cast<int>(gen() % 5);
            CorrelationVector cv;
            cv.rho.resize(d);
            for (auto& r : cv.rho) r = unif(gen);
            const double norm = cv.norm();
            const double target = 0.05 + 0.9 * std::abs(unif(gen));
            for (auto& r : cv.rho) r *= target / norm;
            const Matrix l = mixing_matrix(cv);
            for (int i = 0; i < d; ++i) {
                for (int j = 0; j < d; ++j) {
                    double s = 0.0;
                    for (int k = 0; k < d; ++k) s += l.at(i, k) * l.at(j, k);
                    const double want = (i == j ? 1.0 : 0.0) - cv.rho[i] * cv.rho[j];
                    worst = std::max(worst, std::abs(s - want));
                }
            }
        }
        detail = "max |LL^T - (I - rho rho^T)| = " + std::to_string(worst);
        return worst <= 1e-12;
    }});

    suites.push_back({"kernel_cells", [](std::string& detail) {
        double worst = 0.0;
        const KernelSpec pkern = PowerKernel{1.0, 0.1};
        const KernelSpec ekern = ExponentialKernel{1.3, 5.0};
        for (const auto& k : {pkern, ekern}) {
            for (double t0 : {0.0, 0.01, 0.37}) {
                const double t1 = t0 + 0.02;
                const double closed = kernel_cell_integral(k, t0, t1);
                const double lo = t0 == 0.0 ? 1e-13 : t0;  // avoid the pole itself
                const double quad =
                    integrate_adaptive([&](double u) { return kernel_eval(k, u); }, lo,
                                       t1, 1e-13)
                        .value +
                    (t0 == 0.0 ? kernel_cell_integral(k, 0.0, 1e-13) : 0.0);
                worst = std::max(worst, std::abs(closed - quad) / closed);
            }
        }
        detail = "max rel |closed - quadrature| = " + std::to_string(worst);
        return worst < 1e-9;
    }});

    suites.push_back({"lognormal_ks", [workers](std::string& detail) {
        const ModelConfig config = flat_exp_config(0.0);
        const TimeGrid grid{1.0, 32};
        const SimContext ctx = make_sim_context(config, grid);
        const std::uint64_t n = 20000;
        std::vector<double> logs(n);
        PathStreamSpec stream{n, 11, false, workers};
        struct Acc {
            void merge(const Acc&) {}
        };
        const double eps[1] = {0.0};
        fold_paths<Acc>(ctx, eps, stream,
                        [&](std::uint64_t u, std::span<const PathOutputs> a,
                            std::span<const PathOutputs>, Acc&) {
                            logs[u] = a[0].log_s_T;
                        });
        const double q = 0.04;  // flat curve: sum_j V0(t_j) dt = v0 T exactly
        const double d = ks_statistic_vs_normal(std::move(logs), -0.5 * q, std::sqrt(q));
        const double crit = 1.6276236307187293 / std::sqrt(static_cast<double>(n));
        detail = "KS = " + std::to_string(d) + ", 1% critical = " + std::to_string(crit);
        return d < crit;
    }});

    suites.push_back({"martingale_forward_variance", [](std::string& detail) {
        const ModelConfig config = two_factor_config(0.2);
        const TimeGrid grid{1.0, 16};
        const SimContext ctx = make_sim_context(config, grid);
        const std::uint64_t n = 40000;
        const int steps = grid.n_steps;
        struct Acc {
            std::vector<double> s1, s2;
            double count = 0.0;
            void merge(const Acc& o) {
                if (s1.empty()) {
                    *this = o;
                    return;
                }
                if (o.s1.empty()) return;
                for (std::size_t i = 0; i < s1.size(); ++i) {
                    s1[i] += o.s1[i];
                    s2[i] += o.s2[i];
                }
                count += o.count;
            }
        };
        // unit values: pair means of (S_T, V_1..V_n); V_m needs full bundles
        const int dim = 1 + steps;
        Acc acc;
        acc.s1.assign(dim, 0.0);
        acc.s2.assign(dim, 0.0);
        acc.count = 0.0;
        std::vector<double> z(2 * steps), gauss(2 * steps), vals(dim);
        for (std::uint64_t u = 0; u < n / 2; ++u) {
            PhiloxStream rng(12, u);
            rng.fill_normals(z);
            map_normals(ctx, z, gauss);
            const PathBundle pa = advance_path_full(ctx, gauss, config.epsilon);
            for (auto& g : gauss) g = -g;
            const PathBundle pb = advance_path_full(ctx, gauss, config.epsilon);
            vals[0] = 0.5 * (std::exp(pa.log_s.back()) + std::exp(pb.log_s.back()));
            for (int mm = 0; mm < steps; ++mm) {
                vals[1 + mm] = 0.5 * (pa.v[mm] + pb.v[mm]);
            }
            for (int i = 0; i < dim; ++i) {
                acc.s1[i] += vals[i];
                acc.s2[i] += vals[i] * vals[i];
            }
            acc.count += 1.0;
        }
        double worst_sigma = 0.0;
        for (int i = 0; i < dim; ++i) {
            const double mean = acc.s1[i] / acc.count;
            const double var =
                (acc.s2[i] / acc.count - mean * mean) * acc.count / (acc.count - 1.0);
            const double se = std::sqrt(var / acc.count);
            const double target = i == 0 ? ctx.config.spot0 : ctx.v0_grid[i];
            worst_sigma = std::max(worst_sigma, std::abs(mean - target) / se);
        }
        detail = "worst deviation = " + std::to_string(worst_sigma) + " se";
        return worst_sigma < 4.0;
    }});

    suites.push_back({"volterra_covariance_mc", [](std::string& detail) {
        const ModelConfig config = two_factor_config(0.2);
        const TimeGrid grid{1.0, 8};
        const SimContext ctx = make_sim_context(config, grid);
        const Matrix cov = assemble_joint_covariance(config, grid);
        const int dim = cov.n;
        const std::uint64_t n = 40000;
        std::vector<double> z(dim), gauss(dim);
        std::vector<double> m2(static_cast<std::size_t>(dim) * dim, 0.0);
        for (std::uint64_t u = 0; u < n; ++u) {
            PhiloxStream rng(13, u);
            rng.fill_normals(z);
            map_normals(ctx, z, gauss);
            for (int i = 0; i < dim; ++i) {
                for (int j = i; j < dim; ++j) m2[i * dim + j] += gauss[i] * gauss[j];
            }
        }
        double worst_sigma = 0.0;
        for (int i = 0; i < dim; ++i) {
            for (int j = i; j < dim; ++j) {
                const double mean = m2[i * dim + j] / n;
                // var of x_i x_j for a Gaussian: c_ii c_jj + c_ij^2
                const double se = std::sqrt(
                    (cov.at(i, i) * cov.at(j, j) + cov.at(i, j) * cov.at(i, j)) /
                    static_cast<double>(n));
                worst_sigma = std::max(worst_sigma, std::abs(mean - cov.at(i, j)) / se);
            }
        }
        detail = "worst sample-covariance deviation = " + std::to_string(worst_sigma) +
                 " se";
        return worst_sigma < 5.0;
    }});

    suites.push_back({"remark2_identity", [](std::string& detail) {
        double worst = 0.0;
        for (double h : {0.1, 0.3, 0.5}) {
            ModelConfig c = flat_exp_config(0.0);
            c.kernels = {PowerKernel{1.0, h}};
            const auto rep =
                small_vol_limit(c.curve, effective_kernel(c), c.maturity, 1e-8);
            worst = std::max(worst, std::abs(rep.value - (h + 1.5)));
        }
        detail = "max |limit - (H + 3/2)| = " + std::to_string(worst);
        return worst <= 1e-8;
    }});

    suites.push_back({"component_oracle", [](std::string& detail) {
        double worst = 0.0;
        for (const auto& [a, b, c] :
             {std::tuple{0.04, 0.015, 0.0063}, std::tuple{0.3, -0.05, 0.02}}) {
            const double got = bivariate_indicator_expectation(a, b, c);
            const double want = -b * norm_pdf(0.5 * std::sqrt(a)) / std::sqrt(a);
            worst = std::max(worst, std::abs(got - want));
        }
        detail = "max |quadrature - closed form| = " + std::to_string(worst);
        return worst < 1e-10;
    }});

    suites.push_back({"pathwise_identity", [workers](std::string& detail) {
        ModelConfig config = flat_exp_config(0.2);
        config.maturity = 0.25;
        const TimeGrid grid{config.maturity, 16};
        const SimContext ctx = make_sim_context(config, grid);
        struct Acc {
            std::uint64_t bad = 0;
            void merge(const Acc& o) { bad += o.bad; }
        };
        const double k = config.spot0;
        const auto acc = fold_paths<Acc>(
            ctx, std::span<const double>(&config.epsilon, 1),
            PathStreamSpec{20000, 14, true, workers},
            [&](std::uint64_t, std::span<const PathOutputs> a,
                std::span<const PathOutputs> b, Acc& acc) {
                for (const auto* outs : {&a, &b}) {
                    const double st = (*outs)[0].s_T;
                    const double ind = k > st ? 1.0 : 0.0;
                    const double lhs = ind * st;
                    const double rhs = k * ind - std::max(k - st, 0.0);
                    if (lhs != rhs) ++acc.bad;
                }
            });
        detail = std::to_string(acc.bad) + " bit mismatches";
        return acc.bad == 0;
    }});

    suites.push_back({"determinism", [](std::string& detail) {
        const ModelConfig config = flat_exp_config(0.2);
        const TimeGrid grid{1.0, 16};
        const SimContext ctx = make_sim_context(config, grid);
        RunSpec spec;
        spec.n_paths = 4000;
        spec.seed = 15;
        spec.antithetic = true;
        const double eps[1] = {config.epsilon};
        spec.workers = 1;
        const auto a = run_path_stats(ctx, eps, spec);
        spec.workers = 3;
        const auto b = run_path_stats(ctx, eps, spec);
        bool same = true;
        for (int i = 0; i < PathStats::kNumStats; ++i) {
            same = same && a[0].sums[i] == b[0].sums[i];
            for (int j = 0; j < PathStats::kNumStats; ++j) {
                same = same && a[0].prods[i][j] == b[0].prods[i][j];
            }
        }
        detail = same ? "worker counts 1 and 3 bit-identical" : "mismatch";
        return same;
    }});

    bool all_good = true;
    for (auto& suite : suites) {
        const auto t0 = std::chrono::steady_clock::now();
        std::string detail;
        bool good = false;
        try {
            good = suite.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        if (!manifest.inject_failure.empty() && manifest.inject_failure == suite.name) {
            good = false;
            detail += " [injected failure]";
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        char line[256];
        std::snprintf(line, sizeof(line), "%-28s %s  (%.2f s)  %s\n", suite.name.c_str(),
                      good ? "PASS" : "FAIL", secs, detail.c_str());
        os << line;
        all_good = all_good && good;
    }
    os << (all_good ? "selftest: all suites passed\n" : "selftest: FAILURES present\n");
    out = os.str();
    return all_good;
}

}  // namespace ssrlab::cli
