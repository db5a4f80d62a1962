#include "ssrlab/quadrature.hpp"

#include <utility>

namespace ssrlab {

namespace {

// Orthonormal Hermite h_k w.r.t. e^{-x^2}: h_{k+1} = x sqrt(2/(k+1)) h_k
// - sqrt(k/(k+1)) h_{k-1}, h_0 = pi^{-1/4}. Returns (h_n(x), h_{n-1}(x)).
std::pair<double, double> hermite_orthonormal(int n, double x) {
    double hm = 0.0;
    double h = 0.7511255444649425;  // pi^{-1/4}
    for (int k = 0; k < n; ++k) {
        const double hn = x * std::sqrt(2.0 / (k + 1)) * h -
                          std::sqrt(static_cast<double>(k) / (k + 1)) * hm;
        hm = h;
        h = hn;
    }
    return {h, hm};
}

}  // namespace

std::vector<std::pair<double, double>> gauss_hermite_nodes(int n) {
    if (n < 1) throw ValidationError("gauss_hermite_nodes: n must be >= 1");
    std::vector<std::pair<double, double>> out(n);
    // Initial guesses from Numerical Recipes' gauher, refined by Newton on
    // the orthonormal recurrence (derivative h_n'(x) = sqrt(2n) h_{n-1}(x)).
    double z = 0.0;
    for (int i = 0; i < (n + 1) / 2; ++i) {
        if (i == 0) {
            z = std::sqrt(2.0 * n + 1.0) -
                1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
        } else if (i == 1) {
            z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
        } else if (i == 2) {
            z = 1.86 * z - 0.86 * out[0].first;
        } else if (i == 3) {
            z = 1.91 * z - 0.91 * out[1].first;
        } else {
            z = 2.0 * z - out[i - 2].first;
        }
        for (int it = 0; it < 128; ++it) {
            const auto [h, hm] = hermite_orthonormal(n, z);
            const double dh = std::sqrt(2.0 * n) * hm;
            const double dz = h / dh;
            z -= dz;
            if (std::abs(dz) <= 1e-15 * (1.0 + std::abs(z))) break;
        }
        const auto [h, hm] = hermite_orthonormal(n, z);
        (void)h;
        const double w = 1.0 / (n * hm * hm);
        out[i] = {z, w};
        out[n - 1 - i] = {-z, w};
    }
    if (n % 2 == 1) {
        // middle node is exactly zero
        auto& mid = out[n / 2];
        const auto [h, hm] = hermite_orthonormal(n, 0.0);
        (void)h;
        mid = {0.0, 1.0 / (n * hm * hm)};
    }
    return out;
}

}  // namespace ssrlab
