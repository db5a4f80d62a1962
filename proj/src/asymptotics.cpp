#include "ssrlab/asymptotics.hpp"

#include <algorithm>
#include <cmath>

#include "ssrlab/math_core.hpp"
#include "ssrlab/quadrature.hpp"

namespace ssrlab {

namespace {

struct Integral {
    double value = 0.0;
    double error = 0.0;
};

// ∫_0^T V0(u) k_i(u) du for one component, singularity-exact.
Integral comp_b_integral(const ForwardVarianceCurve& curve, const KernelSpec& k,
                         double maturity, double abs_tol) {
    return std::visit(
        [&](const auto& kk) -> Integral {
            using T = std::decay_t<decltype(kk)>;
            QuadResult q;
            if constexpr (std::is_same_v<T, ExponentialKernel>) {
                q = integrate_adaptive(
                    [&](double u) {
                        return curve_eval(curve, u) * kk.a * std::exp(-kk.b * u);
                    },
                    0.0, maturity, abs_tol);
            } else {
                // w = u^{H+1/2}: ∫ V0(u) a u^{H-1/2} du = (a/p) ∫ V0(w^{1/p}) dw
                const double p = kk.H + 0.5;
                q = integrate_adaptive(
                    [&](double w) { return curve_eval(curve, std::pow(w, 1.0 / p)); },
                    0.0, std::pow(maturity, p), abs_tol * p / kk.a);
                q.value *= kk.a / p;
                q.error_estimate *= kk.a / p;
            }
            return {q.value, q.error_estimate};
        },
        k);
}

// ∫_0^T V0(u) k_i(u) k_j(u) du, all singular-part combinations substituted.
Integral comp_c_integral(const ForwardVarianceCurve& curve, const KernelSpec& ki,
                         const KernelSpec& kj, double maturity, double abs_tol) {
    // represent k_i k_j as coef * u^{alpha-1} * exp(-beta u)
    double coef = 1.0;
    double alpha = 1.0;
    double beta = 0.0;
    for (const KernelSpec* k : {&ki, &kj}) {
        if (const auto* e = std::get_if<ExponentialKernel>(k)) {
            coef *= e->a;
            beta += e->b;
        } else {
            const auto& pk = std::get<PowerKernel>(*k);
            coef *= pk.a;
            alpha += pk.H - 0.5;
        }
    }
    QuadResult q;
    if (alpha >= 1.0) {
        q = integrate_adaptive(
            [&](double u) {
                return curve_eval(curve, u) * std::pow(u, alpha - 1.0) *
                       std::exp(-beta * u);
            },
            0.0, maturity, abs_tol / std::abs(coef));
    } else {
        // w = u^alpha absorbs the u^{alpha-1} singularity
        q = integrate_adaptive(
            [&](double w) {
                const double u = std::pow(w, 1.0 / alpha);
                return curve_eval(curve, u) * std::exp(-beta * u);
            },
            0.0, std::pow(maturity, alpha), abs_tol * alpha / std::abs(coef));
        q.value /= alpha;
        q.error_estimate /= alpha;
    }
    return {coef * q.value, std::abs(coef) * q.error_estimate};
}

// Inner integral of D: J_i(s) = ∫_0^{T-s} V0(s+v) k_i(v) dv.
double comp_d_inner(const ForwardVarianceCurve& curve, const KernelSpec& k, double s,
                    double maturity, double abs_tol) {
    return std::visit(
        [&](const auto& kk) -> double {
            using T = std::decay_t<decltype(kk)>;
            if constexpr (std::is_same_v<T, ExponentialKernel>) {
                return integrate_adaptive(
                           [&](double v) {
                               return curve_eval(curve, s + v) * kk.a *
                                      std::exp(-kk.b * v);
                           },
                           0.0, maturity - s, abs_tol)
                    .value;
            } else {
                const double p = kk.H + 0.5;
                const double q =
                    integrate_adaptive(
                        [&](double w) {
                            return curve_eval(curve, s + std::pow(w, 1.0 / p));
                        },
                        0.0, std::pow(maturity - s, p), abs_tol * p / kk.a)
                        .value;
                return q * kk.a / p;
            }
        },
        k);
}

struct SmallVolComputation {
    SmallVolMoments m;
    double err_b, err_c, err_d;
    double c_ref;  // magnitude reference for the k-identically-zero test
};

SmallVolComputation compute_small_vol_moments(const ForwardVarianceCurve& curve,
                                              const EffectiveKernel& kernel,
                                              double maturity, double tol) {
    if (!(maturity > 0.0)) throw ValidationError("small_vol: maturity must be positive");
    SmallVolComputation out{};
    out.m.A = curve_integral(curve, 0.0, maturity);
    const double vmax_scale = out.m.A / maturity;  // mean curve level

    // per-integral absolute tolerances tied to closed-form magnitude bounds
    const double rel = 0.01 * tol;

    double b = 0.0, err_b = 0.0;
    for (const auto& [rho, k] : kernel.components) {
        const double ref =
            std::abs(rho) * vmax_scale * kernel_cell_integral(k, 0.0, maturity);
        const auto r = comp_b_integral(curve, k, maturity, std::max(rel * ref, 1e-300));
        b += rho * r.value;
        err_b += std::abs(rho) * r.error;
    }
    out.m.B = b;
    out.err_b = err_b;

    double c = 0.0, err_c = 0.0, c_ref = 0.0;
    for (const auto& [rho_i, ki] : kernel.components) {
        for (const auto& [rho_j, kj] : kernel.components) {
            const double ref = std::abs(rho_i * rho_j) * vmax_scale *
                               std::sqrt(kernel_sq_integral(ki, 0.0, maturity) *
                                         kernel_sq_integral(kj, 0.0, maturity));
            const auto r =
                comp_c_integral(curve, ki, kj, maturity, std::max(rel * ref, 1e-300));
            c += rho_i * rho_j * r.value;
            err_c += std::abs(rho_i * rho_j) * r.error;
            c_ref += ref;
        }
    }
    out.m.C = c;
    out.err_c = err_c;
    out.c_ref = c_ref;

    // D: adaptive in s of sqrt(V0(s)) * sum_i rho_i J_i(s); inner adaptive in v
    double d_ref = 0.0;
    for (const auto& [rho, k] : kernel.components) {
        d_ref += std::abs(rho) * vmax_scale * std::sqrt(vmax_scale) * maturity *
                 kernel_cell_integral(k, 0.0, maturity);
    }
    const double inner_tol = std::max(rel * d_ref / (2.0 * maturity), 1e-300);
    auto outer_f = [&](double s) {
        double j = 0.0;
        for (const auto& [rho, k] : kernel.components) {
            j += rho * comp_d_inner(curve, k, s, maturity, inner_tol);
        }
        return std::sqrt(curve_eval(curve, s)) * j;
    };
    const auto qd =
        integrate_adaptive(outer_f, 0.0, maturity, std::max(0.5 * rel * d_ref, 1e-300));
    out.m.D = qd.value;
    out.err_d = qd.error_estimate + inner_tol * maturity * std::sqrt(vmax_scale);
    return out;
}

}  // namespace

LimitReport short_maturity_limit(const EffectiveKernel& kernel) {
    if (!kernel.hurst_H || !kernel.g0) {
        throw HypothesisNotSatisfied(
            "short_maturity_limit: u^{1/2-H} k(u) has no finite positive limit at 0");
    }
    const double h = *kernel.hurst_H;
    const double g0 = *kernel.g0;
    LimitReport rep;
    rep.kind = LimitKind::ShortMaturity;
    rep.value = h + 1.5;
    rep.gaussian = GaussianLimitMoments{2.0 * g0 / (2.0 * h + 1.0), g0 * g0 / (2.0 * h),
                                        g0, h};
    rep.scaled_x_limit = g0 * norm_pdf(0.0) / (2.0 * h + 1.0);
    rep.scaled_y_limit = g0 * norm_pdf(0.0) / (2.0 * (h + 0.5) * (h + 1.5));
    rep.quadrature_error_estimate = 0.0;
    return rep;
}

LimitReport small_vol_limit(const ForwardVarianceCurve& curve,
                            const EffectiveKernel& kernel, double maturity, double tol) {
    if (!(tol > 0.0)) throw ValidationError("small_vol_limit: tol must be positive");
    const auto comp = compute_small_vol_moments(curve, kernel, maturity, tol);
    const auto& m = comp.m;

    if (comp.c_ref > 0.0 && std::abs(m.C) <= 1e-12 * comp.c_ref) {
        throw HypothesisNotSatisfied("small_vol_limit: k is identically zero");
    }
    const double v00 = curve_eval(curve, 0.0);
    const double denom = std::sqrt(v00) * m.D;
    const double d_floor = 10.0 * comp.err_d + 1e-14 * std::abs(m.A) * std::abs(m.B);
    if (std::abs(m.D) <= d_floor) {
        if (std::abs(m.B) <= 10.0 * comp.err_b) {
            throw HypothesisNotSatisfied("small_vol_limit: B and D both vanish (0/0)");
        }
        throw DegenerateDenominator("small_vol_limit: D = 0 with B != 0");
    }

    LimitReport rep;
    rep.kind = LimitKind::SmallVol;
    rep.moments = m;
    rep.value = m.A * m.B / denom;
    const double phi = norm_pdf(0.5 * std::sqrt(m.A));
    rep.scaled_x_limit = m.B * phi / (2.0 * std::sqrt(v00 * m.A));
    rep.scaled_y_limit = m.D * phi / (2.0 * std::pow(m.A, 1.5));
    rep.quadrature_error_estimate =
        std::abs(rep.value) *
        (comp.err_b / std::max(std::abs(m.B), 1e-300) +
         comp.err_d / std::max(std::abs(m.D), 1e-300));
    return rep;
}

std::pair<double, double> small_vol_component_limits(const ForwardVarianceCurve& curve,
                                                     const EffectiveKernel& kernel,
                                                     double maturity, double tol) {
    const auto rep = small_vol_limit(curve, kernel, maturity, tol);
    return {rep.scaled_x_limit, rep.scaled_y_limit};
}

double bivariate_indicator_expectation(double a, double b, double c) {
    if (!(a > 0.0) || !(c >= 0.0) || !(b * b <= a * c)) {
        throw ValidationError("bivariate_indicator_expectation: invalid moments");
    }
    const double mu1 = -0.5 * a;
    const double mu2 = -b;
    const double s1 = std::sqrt(a);
    const double cond_slope = b / a;
    const double cond_var = std::max(c - b * b / a, 0.0);
    const double cond_sd = std::sqrt(cond_var);

    static const auto gh = gauss_hermite_nodes(24);
    constexpr double kInvSqrtPi = 0.5641895835477563;

    // inner: E[Z2 | Z1 = z1] via Gauss-Hermite (exact for the linear
    // conditional mean; kept as an expectation so the oracle stays a genuine
    // 2-D quadrature rather than an analytic shortcut)
    auto inner = [&](double z1) {
        const double mean = mu2 + cond_slope * (z1 - mu1);
        double acc = 0.0;
        for (const auto& [t, w] : gh) acc += w * (mean + M_SQRT2 * cond_sd * t);
        return acc * kInvSqrtPi;
    };
    auto f = [&](double z1) {
        const double u = (z1 - mu1) / s1;
        return std::exp(z1) * inner(z1) * norm_pdf(u) / s1;
    };
    const double lo = mu1 - 40.0 * s1;
    const auto q = integrate_adaptive(f, std::min(lo, -40.0 * s1), 0.0,
                                      1e-13 * std::abs(b) / std::sqrt(a) + 1e-300);
    return q.value;
}

namespace {

SweepSchedule make_schedule(std::vector<double> values, const char* what) {
    if (values.empty()) throw ValidationError(std::string(what) + ": empty value list");
    for (double v : values) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ValidationError(std::string(what) + ": values must be positive");
        }
    }
    const bool ascending = values.size() < 2 || values[1] > values[0];
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] == values[i - 1]) {
            throw ValidationError(std::string(what) + ": duplicate values");
        }
        if ((values[i] > values[i - 1]) != ascending) {
            throw ValidationError(std::string(what) + ": values must be sorted");
        }
    }
    if (!ascending) std::reverse(values.begin(), values.end());
    return SweepSchedule{std::move(values)};
}

}  // namespace

SweepSchedule epsilon_sweep_schedule(std::vector<double> eps_values) {
    return make_schedule(std::move(eps_values), "epsilon_sweep_schedule");
}

SweepSchedule maturity_sweep_schedule(std::vector<double> t_values) {
    return make_schedule(std::move(t_values), "maturity_sweep_schedule");
}

}  // namespace ssrlab
