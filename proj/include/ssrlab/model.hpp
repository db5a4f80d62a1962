#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ssrlab/errors.hpp"
#include "ssrlab/linalg.hpp"

namespace ssrlab {

/// k(t) = a e^{-b t}, a, b > 0.
struct ExponentialKernel {
    double a;
    double b;
};

/// k(t) = a t^{H - 1/2}, a > 0, H in (0, 1/2]. H = 1/2 degenerates to the
/// constant kernel a; H < 1/2 is the rough (singular at 0) case.
struct PowerKernel {
    double a;
    double H;
};

using KernelSpec = std::variant<ExponentialKernel, PowerKernel>;

/// k(t), t > 0 (the rough power kernel diverges at t = 0).
[[nodiscard]] double kernel_eval(const KernelSpec& k, double t);

/// ∫_{t0}^{t1} k(u) du in closed form, 0 <= t0 <= t1.
[[nodiscard]] double kernel_cell_integral(const KernelSpec& k, double t0, double t1);

/// ∫_{t0}^{t1} k(u)^2 du in closed form.
[[nodiscard]] double kernel_sq_integral(const KernelSpec& k, double t0, double t1);

/// ∫_{v0}^{v1} k(v) k(v + lag) dv, lag >= 0. Closed form for exponential
/// kernels and for the power kernel with lag = 0; for the rough power kernel
/// with lag > 0 the integrand is regularized by the substitution
/// w = v^{H+1/2} and integrated by adaptive Gauss-Kronrod to abs_tol.
[[nodiscard]] double kernel_prod_integral(const KernelSpec& k, double v0, double v1,
                                          double lag, double abs_tol = 1e-14);

/// Spot-vol correlation loadings. Invariant: 0 < |rho| < 1 in l2 norm.
struct CorrelationVector {
    std::vector<double> rho;

    [[nodiscard]] double norm() const;
};

/// Symmetric Cholesky factor L = I - beta rho rho^T with
/// beta = 1/(1 + sqrt(1 - |rho|^2)), so that L L^T = I - rho rho^T.
[[nodiscard]] Matrix mixing_matrix(const CorrelationVector& correlations);

/// Deterministic initial forward-variance curve t -> V0(t) > 0.
struct FlatCurve {
    double v0;
};
struct PiecewiseLinearCurve {
    std::vector<std::pair<double, double>> knots;  // (t, v), strictly increasing t
};
using ForwardVarianceCurve = std::variant<FlatCurve, PiecewiseLinearCurve>;

[[nodiscard]] double curve_eval(const ForwardVarianceCurve& curve, double t);
[[nodiscard]] double curve_integral(const ForwardVarianceCurve& curve, double a, double b);

struct ModelConfig {
    double spot0 = 1.0;
    double maturity = 1.0;
    ForwardVarianceCurve curve = FlatCurve{0.04};
    std::vector<double> rho;
    std::vector<KernelSpec> kernels;
    double epsilon = 0.0;  // vol-of-vol multiplier on every kernel

    [[nodiscard]] CorrelationVector correlations() const { return CorrelationVector{rho}; }
};

/// Check every invariant; throws ValidationError with a named diagnostic.
void validate_config(const ModelConfig& config);

/// The aggregate kernel k = sum_i rho_i k_i of the X-integrand, together
/// with the short-time exponent data: hurst_H and g0 are present iff
/// u -> u^{1/2-H} k(u) has a finite positive limit g(0+). Power components
/// must share one exponent (the paper does not treat mixed exponents);
/// all-exponential mixtures report H = 1/2 with g0 = k(0) when positive.
struct EffectiveKernel {
    std::vector<std::pair<double, KernelSpec>> components;  // (rho_i, k_i)
    std::optional<double> hurst_H;
    std::optional<double> g0;

    [[nodiscard]] double eval(double t) const;
    [[nodiscard]] double cell_integral(double t0, double t1) const;
};

[[nodiscard]] EffectiveKernel effective_kernel(const ModelConfig& config);

/// Parse and fully validate a config document (JSON schema; unknown keys
/// rejected, numbers read as 64-bit floats).
[[nodiscard]] ModelConfig load_config_text(const std::string& text);
[[nodiscard]] ModelConfig load_config(const std::string& path);

/// Inverse of load_config_text up to formatting: load(serialize(c)) == c.
[[nodiscard]] std::string serialize_config(const ModelConfig& config);

}  // namespace ssrlab
