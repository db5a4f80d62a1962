#include <doctest.h>

#include <cmath>

#include "ssrlab/math_core.hpp"

using namespace ssrlab;

TEST_CASE("normal cdf and pdf basics") {
    CHECK(norm_cdf(0.0) == 0.5);
    CHECK(norm_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-15));
    // 97.5% quantile, frozen from an independent erf evaluation
    CHECK(std::abs(norm_cdf(1.959963985) - 0.975) <= 1e-9);
    for (double x = -8.0; x <= 8.0; x += 0.37) {
        CHECK(std::abs(norm_cdf(x) + norm_cdf(-x) - 1.0) <= 1e-15);
    }
    // monotone, saturating tails
    double prev = -1.0;
    for (double x = -40.0; x <= 40.0; x += 0.5) {
        const double c = norm_cdf(x);
        CHECK(c >= prev);
        prev = c;
    }
    CHECK(norm_cdf(-40.0) == 0.0);
    CHECK(norm_cdf(40.0) == 1.0);
}

TEST_CASE("inverse normal cdf round trips") {
    for (double p = 1e-14; p < 1.0; p = p < 0.5 ? p * 2.3 : 1.0 - (1.0 - p) / 2.3) {
        const double z = inverse_normal_cdf(p);
        CHECK(std::abs(norm_cdf(z) - p) <= 1e-13 * p + 1e-17);
        if (p > 1.0 - 1e-14) break;
    }
    CHECK(inverse_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK_THROWS_AS((void)inverse_normal_cdf(0.0), ValidationError);
    CHECK_THROWS_AS((void)inverse_normal_cdf(1.0), ValidationError);
}

TEST_CASE("bs_put values and bounds") {
    CHECK(bs_put(1.0, 1.0, 0.0) == 0.0);
    CHECK(bs_put(1.0, 2.0, 0.0) == 1.0);
    // ATM closed form 2 Φ(sqrt(Σ)/2) - 1, frozen independently
    CHECK(bs_put(1.0, 1.0, 0.04) ==
          doctest::Approx(0.079655674554057976).epsilon(1e-13));

    // monotonicity in total variance, spot, strike
    double prev = 0.0;
    for (double tv = 0.01; tv <= 2.0; tv += 0.01) {
        const double p = bs_put(1.0, 1.0, tv);
        CHECK(p > prev);
        prev = p;
    }
    for (double tv : {1e-6, 0.04, 1.0}) {
        for (double strike : {0.5, 0.9, 1.0, 1.3, 2.0}) {
            const double p = bs_put(1.0, strike, tv);
            CHECK(p >= std::max(strike - 1.0, 0.0));
            CHECK(p < strike);
            CHECK(bs_put(1.01, strike, tv) <= p);
            CHECK(bs_put(1.0, strike + 0.01, tv) >= p);
        }
    }
    CHECK_THROWS_AS((void)bs_put(0.0, 1.0, 0.1), ValidationError);
    CHECK_THROWS_AS((void)bs_put(1.0, 1.0, -0.1), ValidationError);
}

TEST_CASE("bs_put_dtotalvar closed form, symmetry and finite difference") {
    // s φ(d+)/(2 sqrt(Σ)) at (1, 1, 0.04), frozen independently
    CHECK(bs_put_dtotalvar(1.0, 1.0, 0.04) ==
          doctest::Approx(0.99238136869252946).epsilon(1e-13));

    // s-form equals K-form: s φ(d+) = K φ(d-)
    for (double s : {0.7, 1.0, 1.6}) {
        for (double k : {0.8, 1.0, 1.9}) {
            for (double tv : {0.01, 0.25, 2.0}) {
                const double rt = std::sqrt(tv);
                const double dp = std::log(s / k) / rt + 0.5 * rt;
                const double dm = dp - rt;
                const double s_form = s * norm_pdf(dp) / (2.0 * rt);
                const double k_form = k * norm_pdf(dm) / (2.0 * rt);
                CHECK(s_form == doctest::Approx(k_form).epsilon(1e-12));
                CHECK(bs_put_dtotalvar(s, k, tv) ==
                      doctest::Approx(s_form).epsilon(1e-15));
            }
        }
    }

    // central finite difference of bs_put in total variance
    for (double tv : {0.01, 0.04, 0.5, 3.0}) {
        for (double k : {0.9, 1.0, 1.2}) {
            const double step = 1e-6 * tv;
            const double fd =
                (bs_put(1.0, k, tv + step) - bs_put(1.0, k, tv - step)) / (2.0 * step);
            CHECK(bs_put_dtotalvar(1.0, k, tv) ==
                  doctest::Approx(fd).epsilon(1e-6));
        }
    }

    CHECK(bs_put_dtotalvar(1.0, 1.0, 1e-10) > 1e3);  // 1/sqrt(Σ) divergence
    CHECK_THROWS_AS((void)bs_put_dtotalvar(1.0, 1.0, 0.0), ValidationError);
}

TEST_CASE("implied_total_variance round trip and errors") {
    const double price = bs_put(1.0, 1.0, 0.04);
    CHECK(implied_total_variance(1.0, 1.0, price) ==
          doctest::Approx(0.04).epsilon(1e-10));

    // round trip over the numerically invertible domain |d±| <= 5
    double worst = 0.0;
    for (double tv : {1e-6, 1e-4, 0.01, 0.04, 0.25, 1.0, 4.0}) {
        for (double x = -0.69; x <= 0.69; x += 0.03) {
            const double rt = std::sqrt(tv);
            if (std::abs(x / rt) + 0.5 * rt > 5.0) continue;
            const double strike = std::exp(x);
            const double p = bs_put(1.0, strike, tv);
            if (!(p > std::max(strike - 1.0, 0.0)) || !(p < strike)) continue;
            worst = std::max(worst, std::abs(implied_total_variance(1.0, strike, p) - tv));
        }
    }
    CHECK(worst < 1e-8);

    CHECK_THROWS_AS((void)implied_total_variance(1.0, 1.0, 0.0), NoArbitrageViolation);
    CHECK_THROWS_AS((void)implied_total_variance(1.0, 2.0, 2.0), NoArbitrageViolation);
    CHECK_THROWS_AS((void)implied_total_variance(1.0, 2.0, 0.9), NoArbitrageViolation);
    // intrinsic 1, strike 2: 1.5 is a valid quote
    CHECK(implied_total_variance(PutQuote{1.0, 2.0, 1.5}) > 0.0);
}

TEST_CASE("atm_skew_from_digital") {
    // Black-Scholes case: digital equals Φ(sqrt(Σ)/2), zero skew
    for (double tv : {0.01, 0.04, 1.0}) {
        CHECK(atm_skew_from_digital(1.0, tv, norm_cdf(0.5 * std::sqrt(tv))) == 0.0);
    }
    // frozen direct evaluation of (2 sqrt(Σ)/φ(0.1)) (0.55 - Φ(0.1))
    CHECK(atm_skew_from_digital(1.0, 0.04, 0.55) ==
          doctest::Approx(0.010250255641511049).epsilon(1e-12));
    // doubling spot halves the result
    CHECK(atm_skew_from_digital(2.0, 0.04, 0.55) ==
          doctest::Approx(0.5 * 0.010250255641511049).epsilon(1e-12));
    // sign equals sign of digital - Φ
    CHECK(atm_skew_from_digital(1.0, 0.04, 0.2) < 0.0);
    CHECK_THROWS_AS((void)atm_skew_from_digital(1.0, 0.0, 0.5), ValidationError);
    CHECK_THROWS_AS((void)atm_skew_from_digital(1.0, 0.04, 1.5), ValidationError);
}
