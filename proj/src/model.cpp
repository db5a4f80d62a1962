#include "ssrlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ssrlab/quadrature.hpp"

namespace ssrlab {

using nlohmann::json;

double kernel_eval(const KernelSpec& k, double t) {
    if (!(t > 0.0)) throw ValidationError("kernel_eval: t must be positive");
    return std::visit(
        [t](const auto& kk) -> double {
            using T = std::decay_t<decltype(kk)>;
            if constexpr (std::is_same_v<T, ExponentialKernel>) {
                return kk.a * std::exp(-kk.b * t);
            } else {
                return kk.a * std::pow(t, kk.H - 0.5);
            }
        },
        k);
}

double kernel_cell_integral(const KernelSpec& k, double t0, double t1) {
    if (!(t0 >= 0.0 && t1 >= t0)) throw ValidationError("kernel_cell_integral: bad cell");
    return std::visit(
        [t0, t1](const auto& kk) -> double {
            using T = std::decay_t<decltype(kk)>;
            if constexpr (std::is_same_v<T, ExponentialKernel>) {
                return kk.a * (std::exp(-kk.b * t0) - std::exp(-kk.b * t1)) / kk.b;
            } else {
                const double p = kk.H + 0.5;
                return kk.a * (std::pow(t1, p) - std::pow(t0, p)) / p;
            }
        },
        k);
}

double kernel_sq_integral(const KernelSpec& k, double t0, double t1) {
    if (!(t0 >= 0.0 && t1 >= t0)) throw ValidationError("kernel_sq_integral: bad cell");
    return std::visit(
        [t0, t1](const auto& kk) -> double {
            using T = std::decay_t<decltype(kk)>;
            if constexpr (std::is_same_v<T, ExponentialKernel>) {
                return kk.a * kk.a *
                       (std::exp(-2.0 * kk.b * t0) - std::exp(-2.0 * kk.b * t1)) /
                       (2.0 * kk.b);
            } else {
                const double p = 2.0 * kk.H;
                return kk.a * kk.a * (std::pow(t1, p) - std::pow(t0, p)) / p;
            }
        },
        k);
}

double kernel_prod_integral(const KernelSpec& k, double v0, double v1, double lag,
                            double abs_tol) {
    if (!(v0 >= 0.0 && v1 >= v0 && lag >= 0.0)) {
        throw ValidationError("kernel_prod_integral: bad arguments");
    }
    if (v1 == v0) return 0.0;
    return std::visit(
        [&](const auto& kk) -> double {
            using T = std::decay_t<decltype(kk)>;
            if constexpr (std::is_same_v<T, ExponentialKernel>) {
                // a^2 e^{-b lag} (e^{-2 b v0} - e^{-2 b v1}) / (2b)
                return kk.a * kk.a * std::exp(-kk.b * lag) *
                       (std::exp(-2.0 * kk.b * v0) - std::exp(-2.0 * kk.b * v1)) /
                       (2.0 * kk.b);
            } else {
                const double a = kk.a;
                const double H = kk.H;
                if (lag == 0.0) return kernel_sq_integral(k, v0, v1);
                if (H == 0.5) return a * a * (v1 - v0);
                const double p = H + 0.5;
                if (v0 > 0.0) {
                    // integrand smooth away from zero
                    auto f = [&](double v) {
                        return std::pow(v, H - 0.5) * std::pow(v + lag, H - 0.5);
                    };
                    return a * a * integrate_adaptive(f, v0, v1, abs_tol / (a * a)).value;
                }
                // w = v^{H+1/2} removes the endpoint singularity:
                // ∫_0^{v1} v^{H-1/2}(v+lag)^{H-1/2} dv
                //   = (1/p) ∫_0^{v1^p} (w^{1/p} + lag)^{H-1/2} dw
                auto f = [&](double w) {
                    return std::pow(std::pow(w, 1.0 / p) + lag, H - 0.5);
                };
                return a * a / p *
                       integrate_adaptive(f, 0.0, std::pow(v1, p), abs_tol * p / (a * a))
                           .value;
            }
        },
        k);
}

double CorrelationVector::norm() const {
    double s = 0.0;
    for (double r : rho) s += r * r;
    return std::sqrt(s);
}

Matrix mixing_matrix(const CorrelationVector& correlations) {
    const auto& rho = correlations.rho;
    const int d = static_cast<int>(rho.size());
    if (d < 1) throw ValidationError("mixing_matrix: empty correlation vector");
    const double r = correlations.norm();
    if (!(r > 0.0 && r < 1.0)) {
        throw ValidationError("mixing_matrix: correlation norm must lie in (0,1)");
    }
    // beta = (1 - sqrt(1-rho^2))/rho^2, computed in the cancellation-free form.
    const double beta = 1.0 / (1.0 + std::sqrt(1.0 - r * r));
    Matrix l(d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            // grouped so the result is bitwise symmetric
            l.at(i, j) = (i == j ? 1.0 : 0.0) - beta * (rho[i] * rho[j]);
        }
    }
    return l;
}

double curve_eval(const ForwardVarianceCurve& curve, double t) {
    return std::visit(
        [t](const auto& c) -> double {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, FlatCurve>) {
                if (!(t >= 0.0)) throw ExtrapolationError("curve_eval: t < 0");
                return c.v0;
            } else {
                if (c.knots.empty()) throw ValidationError("curve_eval: no knots");
                if (!(t >= c.knots.front().first) || !(t <= c.knots.back().first)) {
                    throw ExtrapolationError("curve_eval: t outside knot support");
                }
                auto it = std::upper_bound(
                    c.knots.begin(), c.knots.end(), t,
                    [](double x, const auto& kn) { return x < kn.first; });
                if (it == c.knots.begin()) return it->second;
                if (it == c.knots.end()) return c.knots.back().second;
                const auto& [t1, v1] = *it;
                const auto& [t0, v0] = *(it - 1);
                const double w = (t - t0) / (t1 - t0);
                return v0 + w * (v1 - v0);
            }
        },
        curve);
}

double curve_integral(const ForwardVarianceCurve& curve, double a, double b) {
    if (!(b >= a)) throw ValidationError("curve_integral: requires a <= b");
    return std::visit(
        [a, b](const auto& c) -> double {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, FlatCurve>) {
                if (!(a >= 0.0)) throw ExtrapolationError("curve_integral: a < 0");
                return c.v0 * (b - a);
            } else {
                if (!(a >= c.knots.front().first) || !(b <= c.knots.back().first)) {
                    throw ExtrapolationError("curve_integral: range outside knots");
                }
                // exact trapezoid segment by segment
                double total = 0.0;
                for (std::size_t i = 0; i + 1 < c.knots.size(); ++i) {
                    const double t0 = c.knots[i].first;
                    const double t1 = c.knots[i + 1].first;
                    const double lo = std::max(a, t0);
                    const double hi = std::min(b, t1);
                    if (hi <= lo) continue;
                    const double v0 = c.knots[i].second;
                    const double v1 = c.knots[i + 1].second;
                    const double slope = (v1 - v0) / (t1 - t0);
                    const double vlo = v0 + slope * (lo - t0);
                    const double vhi = v0 + slope * (hi - t0);
                    total += 0.5 * (vlo + vhi) * (hi - lo);
                }
                return total;
            }
        },
        curve);
}

namespace {

void validate_curve(const ForwardVarianceCurve& curve, double maturity) {
    std::visit(
        [maturity](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, FlatCurve>) {
                if (!(c.v0 > 0.0) || !std::isfinite(c.v0)) {
                    throw ValidationError("config: flat curve level must be positive");
                }
            } else {
                if (c.knots.size() < 2) {
                    throw ValidationError("config: pwl curve needs at least two knots");
                }
                if (c.knots.front().first != 0.0) {
                    throw ValidationError("config: pwl curve must start at t = 0");
                }
                for (std::size_t i = 0; i < c.knots.size(); ++i) {
                    if (!(c.knots[i].second > 0.0) || !std::isfinite(c.knots[i].second)) {
                        throw ValidationError("config: curve values must be positive");
                    }
                    if (i > 0 && !(c.knots[i].first > c.knots[i - 1].first)) {
                        throw ValidationError(
                            "config: curve knots must be strictly increasing in t");
                    }
                }
                if (c.knots.back().first < maturity) {
                    throw ValidationError("config: curve knots must cover [0, maturity]");
                }
            }
        },
        curve);
}

void validate_kernel(const KernelSpec& k) {
    std::visit(
        [](const auto& kk) {
            using T = std::decay_t<decltype(kk)>;
            if constexpr (std::is_same_v<T, ExponentialKernel>) {
                if (!(kk.a > 0.0) || !(kk.b > 0.0) || !std::isfinite(kk.a) ||
                    !std::isfinite(kk.b)) {
                    throw ValidationError("config: exponential kernel needs a > 0, b > 0");
                }
            } else {
                if (!(kk.a > 0.0) || !std::isfinite(kk.a)) {
                    throw ValidationError("config: power kernel needs a > 0");
                }
                if (!(kk.H > 0.0 && kk.H <= 0.5)) {
                    throw ValidationError("config: H outside (0, 1/2]");
                }
            }
        },
        k);
}

}  // namespace

void validate_config(const ModelConfig& config) {
    if (!(config.spot0 > 0.0) || !std::isfinite(config.spot0)) {
        throw ValidationError("config: spot0 must be positive");
    }
    if (!(config.maturity > 0.0) || !std::isfinite(config.maturity)) {
        throw ValidationError("config: maturity must be positive");
    }
    if (!(config.epsilon >= 0.0) || !std::isfinite(config.epsilon)) {
        throw ValidationError("config: epsilon must be nonnegative");
    }
    validate_curve(config.curve, config.maturity);
    if (config.rho.size() != config.kernels.size() || config.rho.empty()) {
        throw ValidationError("config: factors must pair one rho with one kernel");
    }
    for (double r : config.rho) {
        if (!std::isfinite(r)) throw ValidationError("config: rho must be finite");
    }
    const double norm = config.correlations().norm();
    if (!(norm > 0.0)) throw ValidationError("config: correlation norm must be positive");
    if (!(norm < 1.0)) throw ValidationError("config: correlation norm >= 1");
    for (const auto& k : config.kernels) validate_kernel(k);
}

double EffectiveKernel::eval(double t) const {
    double s = 0.0;
    for (const auto& [rho, k] : components) s += rho * kernel_eval(k, t);
    return s;
}

double EffectiveKernel::cell_integral(double t0, double t1) const {
    double s = 0.0;
    for (const auto& [rho, k] : components) s += rho * kernel_cell_integral(k, t0, t1);
    return s;
}

EffectiveKernel effective_kernel(const ModelConfig& config) {
    validate_config(config);
    EffectiveKernel out;
    out.components.reserve(config.rho.size());
    for (std::size_t i = 0; i < config.rho.size(); ++i) {
        out.components.emplace_back(config.rho[i], config.kernels[i]);
    }

    // Short-time exponent: rough power components dominate g(u) = u^{1/2-H} k(u).
    // Mixed power exponents are rejected rather than guessed.
    std::optional<double> rough_H;
    double rough_coef = 0.0;     // sum of rho_i a_i over power components with H < 1/2
    double constant_coef = 0.0;  // k(0+) contribution of exponential / H = 1/2 parts
    for (const auto& [rho, k] : out.components) {
        if (const auto* pk = std::get_if<PowerKernel>(&k)) {
            if (pk->H < 0.5) {
                if (rough_H && *rough_H != pk->H) {
                    throw UnsupportedKernelMix(
                        "effective_kernel: power components with different exponents");
                }
                rough_H = pk->H;
                rough_coef += rho * pk->a;
            } else {
                constant_coef += rho * pk->a;
            }
        } else {
            constant_coef += rho * std::get<ExponentialKernel>(k).a;
        }
    }
    if (rough_H) {
        if (rough_coef > 0.0) {
            out.hurst_H = *rough_H;
            out.g0 = rough_coef;
        }
    } else if (constant_coef > 0.0) {
        out.hurst_H = 0.5;
        out.g0 = constant_coef;
    }
    return out;
}

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const char* where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
                return key == a;
            }) == allowed.end()) {
            throw ValidationError(std::string("config: unknown key \"") + key +
                                  "\" in " + where);
        }
    }
}

double as_number(const json& j, const char* what) {
    if (!j.is_number()) {
        throw ValidationError(std::string("config: ") + what + " must be a number");
    }
    return j.get<double>();
}

}  // namespace

ModelConfig load_config_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: parse error: ") + e.what());
    }
    if (!doc.is_object()) throw ValidationError("config: document must be an object");
    reject_unknown_keys(doc, {"spot0", "maturity", "curve", "factors", "epsilon"},
                        "document root");
    ModelConfig config;
    if (!doc.contains("curve") || !doc.contains("factors")) {
        throw ValidationError("config: curve and factors are required");
    }
    config.spot0 = doc.contains("spot0") ? as_number(doc["spot0"], "spot0") : 1.0;
    config.maturity =
        doc.contains("maturity") ? as_number(doc["maturity"], "maturity") : 1.0;
    config.epsilon = doc.contains("epsilon") ? as_number(doc["epsilon"], "epsilon") : 0.0;

    const json& curve = doc["curve"];
    if (!curve.is_object() || !curve.contains("type")) {
        throw ValidationError("config: curve must be an object with a type");
    }
    const std::string ctype = curve["type"].get<std::string>();
    if (ctype == "flat") {
        reject_unknown_keys(curve, {"type", "v0"}, "curve");
        if (!curve.contains("v0")) throw ValidationError("config: flat curve needs v0");
        config.curve = FlatCurve{as_number(curve["v0"], "curve.v0")};
    } else if (ctype == "pwl") {
        reject_unknown_keys(curve, {"type", "knots"}, "curve");
        if (!curve.contains("knots") || !curve["knots"].is_array()) {
            throw ValidationError("config: pwl curve needs a knots array");
        }
        PiecewiseLinearCurve pwl;
        for (const auto& kn : curve["knots"]) {
            if (!kn.is_array() || kn.size() != 2) {
                throw ValidationError("config: each knot must be a [t, v] pair");
            }
            pwl.knots.emplace_back(as_number(kn[0], "knot t"), as_number(kn[1], "knot v"));
        }
        config.curve = std::move(pwl);
    } else {
        throw ValidationError("config: curve type must be \"flat\" or \"pwl\"");
    }

    const json& factors = doc["factors"];
    if (!factors.is_array() || factors.empty()) {
        throw ValidationError("config: factors must be a nonempty array");
    }
    for (const auto& f : factors) {
        if (!f.is_object()) throw ValidationError("config: factor must be an object");
        reject_unknown_keys(f, {"rho", "kernel"}, "factor");
        if (!f.contains("rho") || !f.contains("kernel")) {
            throw ValidationError("config: factor needs rho and kernel");
        }
        config.rho.push_back(as_number(f["rho"], "factor rho"));
        const json& k = f["kernel"];
        if (!k.is_object() || !k.contains("type")) {
            throw ValidationError("config: kernel must be an object with a type");
        }
        const std::string ktype = k["type"].get<std::string>();
        if (ktype == "exp") {
            reject_unknown_keys(k, {"type", "a", "b"}, "kernel");
            if (!k.contains("a") || !k.contains("b")) {
                throw ValidationError("config: exp kernel needs a and b");
            }
            config.kernels.push_back(
                ExponentialKernel{as_number(k["a"], "kernel a"), as_number(k["b"], "kernel b")});
        } else if (ktype == "power") {
            reject_unknown_keys(k, {"type", "a", "H"}, "kernel");
            if (!k.contains("a") || !k.contains("H")) {
                throw ValidationError("config: power kernel needs a and H");
            }
            config.kernels.push_back(
                PowerKernel{as_number(k["a"], "kernel a"), as_number(k["H"], "kernel H")});
        } else {
            throw ValidationError("config: kernel type must be \"exp\" or \"power\"");
        }
    }

    validate_config(config);
    return config;
}

ModelConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("config: cannot open file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_config_text(buf.str());
}

std::string serialize_config(const ModelConfig& config) {
    json doc;
    doc["spot0"] = config.spot0;
    doc["maturity"] = config.maturity;
    doc["epsilon"] = config.epsilon;
    std::visit(
        [&doc](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, FlatCurve>) {
                doc["curve"] = {{"type", "flat"}, {"v0", c.v0}};
            } else {
                json knots = json::array();
                for (const auto& [t, v] : c.knots) knots.push_back({t, v});
                doc["curve"] = {{"type", "pwl"}, {"knots", knots}};
            }
        },
        config.curve);
    json factors = json::array();
    for (std::size_t i = 0; i < config.rho.size(); ++i) {
        json f;
        f["rho"] = config.rho[i];
        std::visit(
            [&f](const auto& kk) {
                using T = std::decay_t<decltype(kk)>;
                if constexpr (std::is_same_v<T, ExponentialKernel>) {
                    f["kernel"] = {{"type", "exp"}, {"a", kk.a}, {"b", kk.b}};
                } else {
                    f["kernel"] = {{"type", "power"}, {"a", kk.a}, {"H", kk.H}};
                }
            },
            config.kernels[i]);
        factors.push_back(f);
    }
    doc["factors"] = factors;
    return doc.dump(2);
}

}  // namespace ssrlab
