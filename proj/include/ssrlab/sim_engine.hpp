#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "ssrlab/linalg.hpp"
#include "ssrlab/model.hpp"
#include "ssrlab/parallel.hpp"
#include "ssrlab/rng.hpp"

namespace ssrlab {

/// Uniform grid 0 = t_0 < ... < t_n = T with cells [t_j, t_{j+1}].
struct TimeGrid {
    double maturity;
    int n_steps;

    [[nodiscard]] double dt() const { return maturity / n_steps; }
    [[nodiscard]] double t(int j) const { return maturity * j / n_steps; }
};

/// Exact joint law of (dB_0..dB_{n-1}, X_1..X_n): the n Brownian cell
/// increments of the spot driver and the aggregated Volterra factor
/// X_m = sum_i ∫_0^{t_m} k_i(t_m-u) dW^i_u at the grid points.
struct JointGaussianLaw {
    TimeGrid grid;
    Matrix chol;                 // 2n x 2n lower Cholesky factor
    std::vector<double> var_x;   // Var(X_m), m = 1..n (analytic diagonal)
    int ridge_retries = 0;
    double ridge_added = 0.0;
};

/// Raw covariance matrix before factorization (exposed for law checks).
/// Blocks: Cov(dB_j, dB_l) = dt δ_jl; Cov(X_m, dB_j) = ∫_{cell j} k(t_m-u) du
/// for cells before t_m, else 0 (k the effective kernel, exact cell
/// integrals); Cov(X_m, X_l) = sum_i ∫_0^{min} k_i(t_m-u) k_i(t_l-u) du.
[[nodiscard]] Matrix assemble_joint_covariance(const ModelConfig& config,
                                               const TimeGrid& grid);

/// Factorize with the ridge policy: on failure add 1e-12 tr/2n to the
/// diagonal and retry up to 3 times with 10x escalation; then throw
/// NumericalDegeneracy.
[[nodiscard]] JointGaussianLaw build_joint_covariance(const ModelConfig& config,
                                                      const TimeGrid& grid);

/// Cell averages w_j = (1/dt) ∫_{t_j}^{t_{j+1}} k(u) du of the effective
/// kernel, closed form per component; sum_j w_j dt = ∫_0^T k exactly.
[[nodiscard]] std::vector<double> kernel_cell_weights(const EffectiveKernel& kernel,
                                                      const TimeGrid& grid);

/// Everything needed to advance paths for one (config, grid).
/// The Gaussian layer (chol, var_x) is epsilon-free; epsilon enters only in
/// the variance exponential, so one context serves a whole epsilon sweep.
struct SimContext {
    ModelConfig config;
    TimeGrid grid;
    EffectiveKernel kernel;
    JointGaussianLaw law;
    std::vector<double> weights;  // w_j, j = 0..n-1
    std::vector<double> v0_grid;  // V0(t_m), m = 0..n
    double v00 = 0.0;             // V0(0)
};

[[nodiscard]] SimContext make_sim_context(const ModelConfig& config, const TimeGrid& grid);

/// gauss = chol ยท z: (dB_0..dB_{n-1}, X_1..X_n).
void map_normals(const SimContext& ctx, std::span<const double> z, std::span<double> gauss);

/// Per-path values needed by the estimators.
struct PathOutputs {
    double s_T = 0.0;
    double log_s_T = 0.0;
    double i_T = 0.0;  // ∫_0^T sqrt(V) k (dB - sqrt(V) ds), cell-weight discretization
};

/// Advance one path at the given epsilon from a mapped Gaussian vector.
/// V_m = V0(t_m) exp(eps X_m - eps^2/2 Var X_m); log-Euler on log S with
/// left-edge V (V at t_0 is V0(0)); I_T accumulates sqrt(V_j) w_j (dB_j -
/// sqrt(V_j) dt).
[[nodiscard]] PathOutputs advance_path(const SimContext& ctx,
                                       std::span<const double> gauss, double eps);

/// One simulated path with all intermediate vectors (diagnostics, tests,
/// binary dumps).
struct PathBundle {
    std::vector<double> d_b;     // n spot-Brownian increments
    std::vector<double> x_vol;   // X_1..X_n
    std::vector<double> v;       // V_1..V_n
    std::vector<double> log_s;   // log S at t_0..t_n
    double i_T = 0.0;
};

[[nodiscard]] PathBundle advance_path_full(const SimContext& ctx,
                                           std::span<const double> gauss, double eps);

struct PathStreamSpec {
    std::uint64_t n_paths = 0;
    std::uint64_t seed = 0;
    bool antithetic = true;
    int workers = 1;
};

/// Deterministic parallel fold over the path stream, evaluated at every
/// epsilon in eps_list from one set of Gaussian draws per path. The
/// antithetic partner of path 2u is path 2u+1 with the mapped Gaussian
/// vector exactly negated. PerUnit is called once per stream unit with the
/// outputs of the unit's path (and its partner when antithetic):
///   f(unit_index, span<PathOutputs> main, span<PathOutputs> partner, Acc&)
/// where the spans are indexed by eps_list position (partner empty when
/// antithetic is off).
template <typename Acc, typename PerUnit>
Acc fold_paths(const SimContext& ctx, std::span<const double> eps_list,
               const PathStreamSpec& stream, PerUnit&& f) {
    const int two_n = ctx.law.chol.n;
    const std::uint64_t n_units =
        stream.antithetic ? stream.n_paths / 2 : stream.n_paths;
    const std::size_t n_eps = eps_list.size();

    struct Scratch {
        std::vector<double> z, gauss;
        std::vector<PathOutputs> a, b;
    };

    return parallel_fold<Acc>(
        n_units, stream.workers,
        [&, two_n, n_eps](std::uint64_t u, Acc& acc) {
            thread_local Scratch s;
            s.z.resize(two_n);
            s.gauss.resize(two_n);
            s.a.resize(n_eps);
            s.b.resize(n_eps);
            PhiloxStream rng(stream.seed, u);
            rng.fill_normals(s.z);
            map_normals(ctx, s.z, s.gauss);
            for (std::size_t e = 0; e < n_eps; ++e) {
                s.a[e] = advance_path(ctx, s.gauss, eps_list[e]);
            }
            if (stream.antithetic) {
                for (double& g : s.gauss) g = -g;
                for (std::size_t e = 0; e < n_eps; ++e) {
                    s.b[e] = advance_path(ctx, s.gauss, eps_list[e]);
                }
                f(u, std::span<const PathOutputs>(s.a), std::span<const PathOutputs>(s.b),
                  acc);
            } else {
                f(u, std::span<const PathOutputs>(s.a), std::span<const PathOutputs>(),
                  acc);
            }
        });
}

/// Materialize full bundles (small runs: tests, dumps).
[[nodiscard]] std::vector<PathBundle> capture_paths(const SimContext& ctx, double eps,
                                                    const PathStreamSpec& stream);

/// Debug dump: header (n_steps, n_paths, seed as uint64 little-endian), then
/// per path dB[n], X[n], V[n], logS[n+1], I_T as little-endian doubles.
/// Documented layout, not a stability promise.
void dump_paths(std::ostream& out, const SimContext& ctx, double eps,
                const PathStreamSpec& stream);

}  // namespace ssrlab
