#include "ssrlab/math_core.hpp"

#include <algorithm>
#include <limits>

namespace ssrlab {

double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw ValidationError("inverse_normal_cdf: p must lie in (0,1)");
    }
    // Abramowitz & Stegun 26.2.23 guess (|error| < 4.5e-4), then Halley.
    const bool lower = p < 0.5;
    const double pp = lower ? p : 1.0 - p;
    const double r = std::sqrt(-2.0 * std::log(pp));
    double z = r - (2.30753 + 0.27061 * r) / (1.0 + r * (0.99229 + 0.04481 * r));
    if (lower) z = -z;
    for (int it = 0; it < 3; ++it) {
        const double e = norm_cdf(z) - p;
        const double u = e / norm_pdf(z);
        z -= u / (1.0 + 0.5 * z * u);
    }
    return z;
}

double bs_put(double spot, double strike, double total_var) {
    if (!(spot > 0.0) || !(strike > 0.0)) {
        throw ValidationError("bs_put: spot and strike must be positive");
    }
    if (!(total_var >= 0.0) || !std::isfinite(total_var)) {
        throw ValidationError("bs_put: total variance must be finite and nonnegative");
    }
    if (total_var == 0.0) {
        return std::max(strike - spot, 0.0);
    }
    const double rt = std::sqrt(total_var);
    const double d_plus = std::log(spot / strike) / rt + 0.5 * rt;
    const double d_minus = d_plus - rt;
    return strike * norm_cdf(-d_minus) - spot * norm_cdf(-d_plus);
}

double bs_put_dtotalvar(double spot, double strike, double total_var) {
    if (!(spot > 0.0) || !(strike > 0.0)) {
        throw ValidationError("bs_put_dtotalvar: spot and strike must be positive");
    }
    if (!(total_var > 0.0)) {
        throw ValidationError("bs_put_dtotalvar: total variance must be positive");
    }
    const double rt = std::sqrt(total_var);
    const double d_plus = std::log(spot / strike) / rt + 0.5 * rt;
    return spot * norm_pdf(d_plus) / (2.0 * rt);
}

double implied_total_variance(double spot, double strike, double price) {
    if (!(spot > 0.0) || !(strike > 0.0) || !std::isfinite(price)) {
        throw ValidationError("implied_total_variance: invalid quote");
    }
    const double intrinsic = std::max(strike - spot, 0.0);
    if (!(price > intrinsic) || !(price < strike)) {
        throw NoArbitrageViolation(
            "implied_total_variance: price outside ((strike-spot)_+, strike)");
    }

    double lo = 1e-12;
    double hi = 16.0;
    while (bs_put(spot, strike, hi) < price) {
        hi *= 2.0;
        if (hi > 1e12) {
            throw NoArbitrageViolation(
                "implied_total_variance: no finite total variance matches the price");
        }
    }

    // Bracketed Newton: quadratic near the root, bisection whenever a step
    // leaves the bracket. Iterate to rounding; 1e-12 absolute is the
    // guaranteed price tolerance.
    const double tol_hard = 1e-16 * strike;
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double f = bs_put(spot, strike, x) - price;
        if (f < 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        if (std::abs(f) <= tol_hard) break;
        const double v = bs_put_dtotalvar(spot, strike, x);
        double xn = x - f / v;
        if (!(xn > lo) || !(xn < hi) || !std::isfinite(xn)) {
            xn = 0.5 * (lo + hi);
        }
        if (std::abs(xn - x) <= 1e-16 * x) {
            x = xn;
            break;
        }
        x = xn;
    }
    if (std::abs(bs_put(spot, strike, x) - price) > 1e-12) {
        throw NumericalDegeneracy("implied_total_variance: did not converge to 1e-12");
    }
    return x;
}

double implied_total_variance(const PutQuote& quote) {
    return implied_total_variance(quote.spot, quote.strike, quote.price);
}

double atm_skew_from_digital(double spot, double total_var_atm, double digital_prob) {
    if (!(spot > 0.0)) {
        throw ValidationError("atm_skew_from_digital: spot must be positive");
    }
    if (!(total_var_atm > 0.0)) {
        throw ValidationError("atm_skew_from_digital: total variance must be positive");
    }
    if (!(digital_prob >= 0.0 && digital_prob <= 1.0)) {
        throw ValidationError("atm_skew_from_digital: digital probability outside [0,1]");
    }
    const double rt = std::sqrt(total_var_atm);
    return 2.0 * rt / (spot * norm_pdf(0.5 * rt)) * (digital_prob - norm_cdf(0.5 * rt));
}

}  // namespace ssrlab
