#include <doctest.h>

#include <cmath>

#include "ssrlab/quadrature.hpp"

using namespace ssrlab;

TEST_CASE("gk15 panel is exact for low-degree polynomials") {
    auto cubic = [](double x) { return 3.0 * x * x * x - x + 2.0; };
    const auto r = gk15_panel(cubic, -1.0, 3.0);
    // ∫ = (3/4 x^4 - x^2/2 + 2x) on [-1,3]
    const double want = (0.75 * 81 - 4.5 + 6.0) - (0.75 - 0.5 - 2.0);
    CHECK(r.value == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("adaptive integration reaches requested tolerance") {
    // smooth but sharply peaked
    auto peaked = [](double x) { return std::exp(-400.0 * (x - 0.3) * (x - 0.3)); };
    const double want = std::sqrt(M_PI / 400.0);  // full Gaussian mass (tails negligible)
    const auto r = integrate_adaptive(peaked, -6.0, 6.0, 1e-12);
    CHECK(std::abs(r.value - want) < 1e-11);
    CHECK(r.error_estimate < 1e-11);

    // integrable endpoint singularity after substitution is the caller's
    // job; raw x^{-0.4} still converges slowly but within estimate
    auto singular = [](double x) { return std::pow(x, -0.4); };
    const auto s = integrate_adaptive(singular, 0.0, 1.0, 1e-9);
    CHECK(std::abs(s.value - 1.0 / 0.6) < 1e-6);
}

TEST_CASE("gauss-hermite nodes reproduce moments of exp(-x^2)") {
    for (int n : {8, 20, 24, 31}) {
        const auto nodes = gauss_hermite_nodes(n);
        REQUIRE(nodes.size() == static_cast<std::size_t>(n));
        double m0 = 0.0, m1 = 0.0, m2 = 0.0, m4 = 0.0;
        for (const auto& [x, w] : nodes) {
            m0 += w;
            m1 += w * x;
            m2 += w * x * x;
            m4 += w * x * x * x * x;
        }
        const double sqrt_pi = std::sqrt(M_PI);
        CHECK(m0 == doctest::Approx(sqrt_pi).epsilon(1e-13));
        CHECK(std::abs(m1) < 1e-13);
        CHECK(m2 == doctest::Approx(0.5 * sqrt_pi).epsilon(1e-13));
        CHECK(m4 == doctest::Approx(0.75 * sqrt_pi).epsilon(1e-13));
    }
}
