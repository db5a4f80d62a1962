#pragma once

#include <cstdint>
#include <vector>

#include "ssrlab/sim_engine.hpp"

namespace ssrlab {

/// Monte Carlo estimate of the SSR representation R = X/Y at t = 0:
///   X = -eps/(2 S0 sqrt(V0(0))) E[1_{S0>S_T} S_T I_T]
///   Y = P[S0 > S_T] - Φ(sqrt(Σ)/2),  Σ inverted from the same-paths put.
/// Standard errors from unit-level (antithetic-pair) variances via the delta
/// method; X, Y share paths so R_se uses their empirical covariance.
struct SSREstimate {
    double epsilon = 0.0;
    double x = 0.0, x_se = 0.0;
    double y = 0.0, y_se = 0.0;
    double r = 0.0, r_se = 0.0;
    std::uint64_t n_paths = 0;
    double atm_total_var = 0.0;
    double digital_prob = 0.0;
    double put_price = 0.0;
    bool degenerate_denominator = false;  // |Y| <= 2 Y_se: R_se reported as +inf
};

/// ATM skew two ways from one path stream: central finite difference of the
/// implied annualized vol in log-strike, and the digital-probability route
/// (atm_skew_from_digital), with the delta-method se of their difference.
struct SkewEstimate {
    double fd_step = 0.0;
    double skew_fd = 0.0, skew_fd_se = 0.0;
    double skew_eqsk = 0.0, skew_eqsk_se = 0.0;
    double diff_se = 0.0;           // se of skew_fd - skew_eqsk (same paths)
    double fd_bias_estimate = 0.0;  // Richardson estimate of the O(δ²) term
    double tv_skew_fd = 0.0;        // total-variance log-strike slopes
    double tv_skew_eqsk = 0.0;
};

/// Definition-level regression estimator: OLS slope through the origin of
/// (σ^S_h - σ^S_0) on log(S_h/S0) over outer paths, nested inner pricing of
/// the conditional model, normalized by the ATM skew.
struct RegressionEstimate {
    double slope = 0.0, slope_se = 0.0;
    double skew = 0.0;   // σ'_0 used for normalization
    double r_reg = 0.0;  // slope / skew
    double h = 0.0;
    int n_outer = 0, n_inner = 0, n_discarded = 0;
    double sigma0 = 0.0;  // baseline ATM vol subtracted from σ^S_h
};

/// One reduced pass over the path stream at a single epsilon: unit-level
/// first and second moments of the statistics every estimator needs.
struct PathStats {
    // statistic indices
    static constexpr int kInd = 0;    // 1_{S0 > S_T}
    static constexpr int kPay0 = 1;   // (S0 - S_T)+
    static constexpr int kPayP = 2;   // (S0 e^{δ} - S_T)+
    static constexpr int kPayM = 3;   // (S0 e^{-δ} - S_T)+
    static constexpr int kPayP2 = 4;  // δ/2 strikes for the Richardson check
    static constexpr int kPayM2 = 5;
    static constexpr int kXi = 6;     // 1_{S0 > S_T} S_T I_T
    static constexpr int kSpotT = 7;  // S_T
    static constexpr int kNumStats = 8;

    double epsilon = 0.0;
    double fd_step = 0.0;
    std::uint64_t n_paths = 0;
    std::uint64_t n_units = 0;  // antithetic pairs, or paths
    double sums[kNumStats] = {};
    double prods[kNumStats][kNumStats] = {};

    [[nodiscard]] double mean(int i) const { return sums[i] / double(n_units); }
    /// covariance of the two means (sample covariance of units / n_units)
    [[nodiscard]] double cov_mean(int i, int j) const;
};

struct RunSpec {
    std::uint64_t n_paths = 0;
    std::uint64_t seed = 0;
    bool antithetic = true;
    int workers = 1;
    double fd_step = 0.01;
};

/// Simulate once, evaluate at every epsilon in eps_list (identical Gaussian
/// draws across the sweep: common random numbers by construction).
[[nodiscard]] std::vector<PathStats> run_path_stats(const SimContext& ctx,
                                                    std::span<const double> eps_list,
                                                    const RunSpec& spec);

[[nodiscard]] SSREstimate estimate_xy(const PathStats& stats, const SimContext& ctx);
[[nodiscard]] SkewEstimate estimate_skew_fd(const PathStats& stats, const SimContext& ctx);

/// Nested Monte Carlo regression estimator. `sigma_prime_0` is the ATM skew
/// (annualized vol per log-strike) from estimate_skew_fd on a baseline run.
/// h is snapped to the grid cell boundary. Inner paths reuse one common set
/// of draws across outer paths, and the σ^S_0 baseline is priced from those
/// same draws at the null outer state, so inner noise cancels from the
/// regression increments to first order.
[[nodiscard]] RegressionEstimate estimate_ssr_regression(
    const ModelConfig& config, const TimeGrid& grid, double h, int n_outer, int n_inner,
    std::uint64_t seed, double sigma_prime_0, int workers);

}  // namespace ssrlab
