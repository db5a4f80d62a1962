#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ssrlab/quadrature.hpp"
#include "ssrlab/sim_engine.hpp"

using namespace ssrlab;

namespace {

ModelConfig single_exp(double a, double b, double rho, double eps = 0.2) {
    ModelConfig c;
    c.spot0 = 1.0;
    c.maturity = 1.0;
    c.curve = FlatCurve{0.04};
    c.rho = {rho};
    c.kernels = {ExponentialKernel{a, b}};
    c.epsilon = eps;
    return c;
}

ModelConfig single_power(double a, double h, double rho, double eps = 0.2) {
    ModelConfig c = single_exp(1.0, 1.0, rho, eps);
    c.kernels = {PowerKernel{a, h}};
    return c;
}

}  // namespace

TEST_CASE("joint covariance blocks: closed forms") {
    const TimeGrid grid{1.0, 8};
    const double dt = grid.dt();

    SUBCASE("single exponential kernel X block") {
        const double a = 1.3, b = 2.0;
        const Matrix c = assemble_joint_covariance(single_exp(a, b, 0.6), grid);
        const int n = grid.n_steps;
        for (int m = 1; m <= n; ++m) {
            for (int l = 1; l <= m; ++l) {
                const double tm = grid.t(m), tl = grid.t(l);
                const double want =
                    a * a * std::exp(-b * (tm + tl)) * (std::exp(2.0 * b * tl) - 1.0) /
                    (2.0 * b);
                CHECK(c.at(n + m - 1, n + l - 1) ==
                      doctest::Approx(want).epsilon(1e-10));
            }
        }
        // dB block and cross block
        for (int j = 0; j < n; ++j) CHECK(c.at(j, j) == doctest::Approx(dt));
        for (int m = 1; m <= n; ++m) {
            for (int j = 0; j < n; ++j) {
                const double got = c.at(n + m - 1, j);
                if (j >= m) {
                    CHECK(got == 0.0);
                } else {
                    const double rho_a = 0.6 * a;
                    const double want = rho_a *
                                        (std::exp(-b * (grid.t(m) - grid.t(j + 1))) -
                                         std::exp(-b * (grid.t(m) - grid.t(j)))) /
                                        b;
                    CHECK(got == doctest::Approx(want).epsilon(1e-12));
                }
            }
        }
    }

    SUBCASE("power kernel diagonal and quadrature cross-check") {
        const double a = 0.9, h = 0.1;
        const Matrix c = assemble_joint_covariance(single_power(a, h, 0.6), grid);
        const int n = grid.n_steps;
        for (int m = 1; m <= n; ++m) {
            const double want = a * a * std::pow(grid.t(m), 2.0 * h) / (2.0 * h);
            CHECK(c.at(n + m - 1, n + m - 1) == doctest::Approx(want).epsilon(1e-12));
        }
        // one off-diagonal entry against direct (regularized) quadrature
        const double tl = grid.t(2), lag = grid.t(5) - grid.t(2);
        const double got = c.at(n + 5 - 1, n + 2 - 1);
        const double p = h + 0.5;
        const double want =
            a * a / p *
            integrate_adaptive(
                [&](double w) { return std::pow(std::pow(w, 1.0 / p) + lag, h - 0.5); },
                0.0, std::pow(tl, p), 1e-14)
                .value;
        CHECK(got == doctest::Approx(want).epsilon(1e-10));
    }

    SUBCASE("pointwise-cancelling weights zero the cross block") {
        ModelConfig c = single_exp(1.0, 1.0, 0.5);
        c.rho = {0.5, -0.5};
        c.kernels = {ExponentialKernel{1.0, 1.0}, ExponentialKernel{1.0, 1.0}};
        const Matrix cov = assemble_joint_covariance(c, grid);
        const int n = grid.n_steps;
        for (int m = 1; m <= n; ++m) {
            for (int j = 0; j < n; ++j) CHECK(cov.at(n + m - 1, j) == 0.0);
        }
    }
}

TEST_CASE("covariance is symmetric positive semidefinite before ridge") {
    for (const auto& config :
         {single_exp(1.0, 1.0, 0.6), single_power(0.3, 0.1, 0.6)}) {
        const TimeGrid grid{0.5, 12};
        const Matrix c = assemble_joint_covariance(config, grid);
        for (int i = 0; i < c.n; ++i) {
            for (int j = 0; j < c.n; ++j) CHECK(c.at(i, j) == c.at(j, i));
        }
        const auto eig = jacobi_eigenvalues(c);
        CHECK(eig.front() >= -1e-10);
        // and the factorization succeeds without any ridge
        const auto law = build_joint_covariance(config, grid);
        CHECK(law.ridge_retries == 0);
    }
}

TEST_CASE("kernel cell weights") {
    const TimeGrid grid{1.0, 100};
    SUBCASE("constant kernel gives constant weights") {
        ModelConfig c = single_power(2.0, 0.5, 1.0 / 3.0);
        const auto w = kernel_cell_weights(effective_kernel(c), grid);
        for (double v : w) CHECK(v == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
    }
    SUBCASE("rough first cell, closed form vs quadrature") {
        ModelConfig c = single_power(1.0, 0.1, 0.5);
        const auto w = kernel_cell_weights(effective_kernel(c), grid);
        // rho * dt^{H+1/2} / ((H+1/2) dt) at dt = 0.01
        CHECK(w[0] == doctest::Approx(0.5 * 10.515955741336555).epsilon(1e-9));
        // cross-check: analytic near zero plus adaptive quadrature away from it
        const double cut = 1e-8;
        const double quad =
            integrate_adaptive([&](double u) { return std::pow(u, -0.4); }, cut, 0.01,
                               1e-13)
                .value;
        const double head = std::pow(cut, 0.6) / 0.6;
        CHECK(w[0] == doctest::Approx(0.5 * (quad + head) / 0.01).epsilon(1e-9));
        // sum w_j dt telescopes to the full integral of k
        double acc = 0.0;
        for (double v : w) acc += v * grid.dt();
        CHECK(acc == doctest::Approx(0.5 / 0.6).epsilon(1e-12));
    }
}

TEST_CASE("path advance mechanics") {
    const ModelConfig config = single_exp(1.0, 1.0, 0.6, 0.0);
    const TimeGrid grid{1.0, 16};
    const SimContext ctx = make_sim_context(config, grid);

    SUBCASE("epsilon = 0: variance follows the curve exactly") {
        const auto bundles = capture_paths(ctx, 0.0, PathStreamSpec{4, 99, false, 1});
        for (const auto& b : bundles) {
            for (int m = 1; m <= grid.n_steps; ++m) {
                CHECK(b.v[m - 1] == ctx.v0_grid[m]);
            }
            CHECK(b.log_s[0] == std::log(config.spot0));
        }
    }

    SUBCASE("antithetic partner has exactly negated Gaussians") {
        const auto bundles = capture_paths(ctx, 0.2, PathStreamSpec{8, 5, true, 1});
        for (std::size_t p = 0; p + 1 < bundles.size(); p += 2) {
            for (int j = 0; j < grid.n_steps; ++j) {
                CHECK(bundles[p].d_b[j] == -bundles[p + 1].d_b[j]);
                CHECK(bundles[p].x_vol[j] == -bundles[p + 1].x_vol[j]);
            }
        }
    }

    SUBCASE("V stays positive and bundles are internally consistent") {
        const auto bundles = capture_paths(ctx, 1.0, PathStreamSpec{16, 7, true, 1});
        for (const auto& b : bundles) {
            for (double v : b.v) CHECK(v > 0.0);
            CHECK(std::isfinite(b.i_T));
            CHECK(b.log_s.size() == static_cast<std::size_t>(grid.n_steps) + 1);
        }
    }
}

TEST_CASE("martingale and forward-variance consistency across configs and eps") {
    ModelConfig two_factor;
    two_factor.spot0 = 1.0;
    two_factor.maturity = 1.0;
    two_factor.curve = FlatCurve{0.04};
    two_factor.rho = {0.6, -0.3};
    two_factor.kernels = {ExponentialKernel{1.0, 8.0}, ExponentialKernel{0.5, 0.35}};
    ModelConfig rough = single_power(1.0, 0.1, 0.6);

    const TimeGrid grid{1.0, 16};
    for (const ModelConfig& base : {two_factor, rough}) {
        const SimContext ctx = make_sim_context(base, grid);
        for (double eps : {0.0, 0.2, 1.0}) {
            const int steps = grid.n_steps;
            const int dim = 1 + steps;
            std::vector<double> s1(dim, 0.0), s2(dim, 0.0);
            const std::uint64_t n_pairs = 10000;
            std::vector<double> z(2 * steps), gauss(2 * steps), vals(dim);
            for (std::uint64_t u = 0; u < n_pairs; ++u) {
                PhiloxStream rng(31, u);
                rng.fill_normals(z);
                map_normals(ctx, z, gauss);
                const PathBundle pa = advance_path_full(ctx, gauss, eps);
                for (auto& g : gauss) g = -g;
                const PathBundle pb = advance_path_full(ctx, gauss, eps);
                vals[0] = 0.5 * (std::exp(pa.log_s.back()) + std::exp(pb.log_s.back()));
                for (int m = 0; m < steps; ++m) vals[1 + m] = 0.5 * (pa.v[m] + pb.v[m]);
                for (int i = 0; i < dim; ++i) {
                    s1[i] += vals[i];
                    s2[i] += vals[i] * vals[i];
                }
            }
            for (int i = 0; i < dim; ++i) {
                const double mean = s1[i] / double(n_pairs);
                const double var =
                    std::max((s2[i] / double(n_pairs) - mean * mean) *
                                 double(n_pairs) / double(n_pairs - 1),
                             0.0);
                const double se = std::sqrt(var / double(n_pairs));
                const double target = i == 0 ? base.spot0 : ctx.v0_grid[i];
                // eps = 0 gives V == curve per path; only summation rounding left
                CHECK(std::abs(mean - target) <= 4.0 * se + 1e-12 * target);
            }
        }
    }
}

TEST_CASE("fold_paths is worker-count independent (bit-stable)") {
    const ModelConfig config = single_exp(1.0, 1.0, 0.6, 0.3);
    const TimeGrid grid{1.0, 16};
    const SimContext ctx = make_sim_context(config, grid);
    struct Acc {
        double s1 = 0.0, s2 = 0.0;
        void merge(const Acc& o) {
            s1 += o.s1;
            s2 += o.s2;
        }
    };
    const double eps[1] = {0.3};
    auto run = [&](int workers) {
        return fold_paths<Acc>(ctx, eps, PathStreamSpec{6000, 17, true, workers},
                               [](std::uint64_t, std::span<const PathOutputs> a,
                                  std::span<const PathOutputs> b, Acc& acc) {
                                   acc.s1 += 0.5 * (a[0].s_T + b[0].s_T);
                                   acc.s2 += 0.5 * (a[0].i_T * a[0].i_T +
                                                    b[0].i_T * b[0].i_T);
                               });
    };
    const Acc w1 = run(1);
    const Acc w2 = run(2);
    const Acc w5 = run(5);
    CHECK(w1.s1 == w2.s1);
    CHECK(w1.s2 == w2.s2);
    CHECK(w1.s1 == w5.s1);
    CHECK(w1.s2 == w5.s2);
}

TEST_CASE("binary path dump layout") {
    const ModelConfig config = single_exp(1.0, 1.0, 0.6, 0.2);
    const TimeGrid grid{1.0, 8};
    const SimContext ctx = make_sim_context(config, grid);
    std::ostringstream os(std::ios::binary);
    dump_paths(os, ctx, 0.2, PathStreamSpec{4, 3, false, 1});
    const std::string blob = os.str();
    const int n = grid.n_steps;
    const std::size_t per_path = (n + n + n + (n + 1) + 1) * 8;
    CHECK(blob.size() == 3 * 8 + 4 * per_path);
    // header: n_steps, n_paths, seed as little-endian u64
    auto u64_at = [&](std::size_t off) {
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) {
            v = (v << 8) | static_cast<unsigned char>(blob[off + i]);
        }
        return v;
    };
    CHECK(u64_at(0) == 8);
    CHECK(u64_at(8) == 4);
    CHECK(u64_at(16) == 3);
    // first record's dB matches capture_paths
    const auto bundles = capture_paths(ctx, 0.2, PathStreamSpec{4, 3, false, 1});
    double first_db;
    __builtin_memcpy(&first_db, blob.data() + 24, 8);
    CHECK(first_db == bundles[0].d_b[0]);
}
