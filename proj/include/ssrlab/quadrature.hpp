#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ssrlab/errors.hpp"

namespace ssrlab {

struct QuadResult {
    double value = 0.0;
    double error_estimate = 0.0;
    std::int64_t n_evals = 0;
};

namespace detail {

// 15-point Gauss-Kronrod pair (QUADPACK dqk15 tables).
inline constexpr double kGk15Nodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr double kGk15WeightsK[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kGk15WeightsG[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

}  // namespace detail

/// One 15-point Gauss-Kronrod panel on [a,b]. error_estimate follows the
/// QUADPACK (200 |K-G|)^{3/2}-free simple form |K - G| scaled by the half
/// length; adequate for the adaptive driver below.
template <typename F>
QuadResult gk15_panel(F&& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double res_g = detail::kGk15WeightsG[3] * fc;
    double res_k = detail::kGk15WeightsK[7] * fc;
    for (int i = 0; i < 7; ++i) {
        const double x = h * detail::kGk15Nodes[i];
        const double f1 = f(c - x);
        const double f2 = f(c + x);
        res_k += detail::kGk15WeightsK[i] * (f1 + f2);
        if (i % 2 == 1) {
            res_g += detail::kGk15WeightsG[i / 2] * (f1 + f2);
        }
    }
    QuadResult r;
    r.value = res_k * h;
    r.error_estimate = std::abs((res_k - res_g) * h);
    r.n_evals = 15;
    return r;
}

/// Adaptive bisection on top of gk15_panel. The absolute tolerance is
/// distributed over subintervals proportionally to their length, so the
/// accumulated error estimate stays below abs_tol when the recursion
/// terminates normally. Panels are always split down to min_depth first:
/// a near-zero |K - G| on a wide panel is not yet evidence of convergence.
/// Depth-capped at max_depth per branch.
template <typename F>
QuadResult integrate_adaptive(F&& f, double a, double b, double abs_tol,
                              int max_depth = 52, int min_depth = 3) {
    if (!(b >= a) || !std::isfinite(a) || !std::isfinite(b)) {
        throw ValidationError("integrate_adaptive: bad interval");
    }
    QuadResult total;
    if (a == b) return total;

    struct Frame {
        double a, b, tol;
        int depth;
    };
    std::vector<Frame> stack;
    stack.push_back({a, b, abs_tol, 0});
    while (!stack.empty()) {
        const Frame fr = stack.back();
        stack.pop_back();
        QuadResult panel = gk15_panel(f, fr.a, fr.b);
        total.n_evals += panel.n_evals;
        const double width = fr.b - fr.a;
        if ((fr.depth >= min_depth && panel.error_estimate <= fr.tol) ||
            fr.depth >= max_depth || width <= 1e-300 ||
            width <= std::abs(fr.a) * 1e-15 + std::abs(fr.b) * 1e-15) {
            total.value += panel.value;
            total.error_estimate += panel.error_estimate;
        } else {
            const double m = 0.5 * (fr.a + fr.b);
            stack.push_back({fr.a, m, 0.5 * fr.tol, fr.depth + 1});
            stack.push_back({m, fr.b, 0.5 * fr.tol, fr.depth + 1});
        }
    }
    return total;
}

/// Nodes and weights of the n-point Gauss-Hermite rule for weight e^{-x^2}
/// on (-inf, inf), computed by Newton iteration on the (orthonormal)
/// Hermite recurrence. Exact for polynomials of degree <= 2n-1.
std::vector<std::pair<double, double>> gauss_hermite_nodes(int n);

}  // namespace ssrlab
