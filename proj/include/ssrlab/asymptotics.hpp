#pragma once

#include <optional>
#include <vector>

#include "ssrlab/model.hpp"

namespace ssrlab {

/// Second moments of the short-maturity Gaussian limit (Z1, Z2):
/// E[Z1^2] = 1, E[Z1 Z2] = 2 g0 / (2H+1), E[Z2^2] = g0^2 / (2H).
struct GaussianLimitMoments {
    double e_z1z2;
    double e_z2sq;
    double g0;
    double hurst_H;
};

/// A = ∫ V0, B = ∫ V0 k, C = ∫ V0 k^2, D = ∫ sqrt(V0(s)) ∫_s^T V0(u) k(u-s) du ds.
struct SmallVolMoments {
    double A;
    double B;
    double C;
    double D;
};

enum class LimitKind { ShortMaturity, SmallVol };

struct LimitReport {
    LimitKind kind;
    double value;
    std::optional<GaussianLimitMoments> gaussian;
    std::optional<SmallVolMoments> moments;
    double scaled_x_limit;  // (T-t)^{-H} X limit, resp. X(eps)/eps limit
    double scaled_y_limit;  // (T-t)^{-H} Y limit, resp. Y(eps)/eps limit
    double quadrature_error_estimate;
};

/// T -> t limit of the SSR: H + 3/2 whenever u^{1/2-H} k(u) has a finite
/// positive limit g(0+). Throws HypothesisNotSatisfied otherwise.
[[nodiscard]] LimitReport short_maturity_limit(const EffectiveKernel& kernel);

/// eps -> 0 limit of R(eps):
///   A B / (sqrt(V0(0)) D)
/// with singularity-exact quadrature for the rough power kernel (inner
/// integrals substituted with w = (u-s)^{H+1/2} so the integrand is
/// bounded). quadrature_error_estimate is kept below tol.
[[nodiscard]] LimitReport small_vol_limit(const ForwardVarianceCurve& curve,
                                          const EffectiveKernel& kernel, double maturity,
                                          double tol = 1e-8);

/// The scaled component limits (X(eps)/eps, Y(eps)/eps):
///   x = B φ(sqrt(A)/2) / (2 sqrt(V0(0) A)),  y = D φ(sqrt(A)/2) / (2 A^{3/2}).
/// The φ argument sqrt(A)/2 is fixed by the bivariate-normal oracle; the
/// ratio x/y equals small_vol_limit exactly either way.
[[nodiscard]] std::pair<double, double> small_vol_component_limits(
    const ForwardVarianceCurve& curve, const EffectiveKernel& kernel, double maturity,
    double tol = 1e-8);

/// E[1_{Z1<0} e^{Z1} Z2] for (Z1, Z2) jointly normal with mean (-A/2, -B)
/// and covariance [[A, B], [B, C]], by 2-D quadrature: Gauss-Hermite across
/// the conditional Z2 direction, adaptive Gauss-Kronrod along the truncated
/// Z1 direction. Closed form: -B φ(sqrt(A)/2)/sqrt(A).
[[nodiscard]] double bivariate_indicator_expectation(double a, double b, double c);

/// Validated sweep plans (positive, strictly monotone, no duplicates);
/// values normalized to ascending order.
struct SweepSchedule {
    std::vector<double> values;
};

[[nodiscard]] SweepSchedule epsilon_sweep_schedule(std::vector<double> eps_values);
[[nodiscard]] SweepSchedule maturity_sweep_schedule(std::vector<double> t_values);

}  // namespace ssrlab
