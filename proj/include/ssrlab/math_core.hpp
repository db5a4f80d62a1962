#pragma once

#include <cmath>

#include "ssrlab/errors.hpp"

namespace ssrlab {

inline constexpr double kInvSqrt2Pi = 0.3989422804014327;  // 1/sqrt(2π)

/// Standard normal density φ(x).
[[nodiscard]] inline double norm_pdf(double x) noexcept {
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

/// Standard normal CDF Φ(x) via the complementary error function.
/// Relative accuracy of erfc carries over; saturates to 0/1 in the far tails.
[[nodiscard]] inline double norm_cdf(double x) noexcept {
    return 0.5 * std::erfc(-x * M_SQRT1_2);
}

/// Inverse of Φ on (0,1). Rational initial guess polished by Halley
/// iterations on Φ(z) - p = 0; accurate to a few ulp over the full range.
[[nodiscard]] double inverse_normal_cdf(double p);

/// A European put quote. Invariant: (strike - spot)_+ <= price < strike,
/// with the lower bound strict whenever total variance is positive.
struct PutQuote {
    double spot;
    double strike;
    double price;
};

/// Black-Scholes put price in total-variance parameterization:
///   p = K Φ(-d_-) - s Φ(-d_+),  d_± = (log(s/K) ± Σ/2) / sqrt(Σ).
/// At Σ = 0 returns the intrinsic value (K - s)_+.
[[nodiscard]] double bs_put(double spot, double strike, double total_var);

/// ∂p/∂Σ = s φ(d_+) / (2 sqrt(Σ)) = K φ(d_-) / (2 sqrt(Σ)). Requires Σ > 0.
[[nodiscard]] double bs_put_dtotalvar(double spot, double strike, double total_var);

/// Invert bs_put in total variance for a quote strictly inside the
/// no-arbitrage bounds. Bracketed Newton with bisection fallback; the
/// result reproduces the price to 1e-12 absolute (normally to rounding).
[[nodiscard]] double implied_total_variance(double spot, double strike, double price);
[[nodiscard]] double implied_total_variance(const PutQuote& quote);

/// ATM strike-derivative of implied total variance from the digital price:
///   Σ'(S) = 2 sqrt(Σ) / (S φ(sqrt(Σ)/2)) · (P[S > S_T] - Φ(sqrt(Σ)/2)).
[[nodiscard]] double atm_skew_from_digital(double spot, double total_var_atm,
                                           double digital_prob);

}  // namespace ssrlab
