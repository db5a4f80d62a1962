#pragma once

#include <stdexcept>
#include <string>

namespace ssrlab {

/// Base class for all ssr-lab errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A config document or parameter violates a model invariant.
struct ValidationError : Error {
    using Error::Error;
};

/// A put quote sits at or outside the static no-arbitrage bounds
/// (strike - spot)_+ < price < strike, so no total variance reproduces it.
struct NoArbitrageViolation : Error {
    using Error::Error;
};

/// Covariance factorization failed even after ridge escalation.
struct NumericalDegeneracy : Error {
    using Error::Error;
};

/// Kernel mixture outside the supported catalog (power components with
/// different exponents).
struct UnsupportedKernelMix : Error {
    using Error::Error;
};

/// The hypothesis of an asymptotic limit is not satisfied by the kernel,
/// e.g. g(0+) does not exist or is nonpositive.
struct HypothesisNotSatisfied : Error {
    using Error::Error;
};

/// A limit of the form x/0 with x != 0.
struct DegenerateDenominator : Error {
    using Error::Error;
};

/// Curve evaluated outside its knot support.
struct ExtrapolationError : Error {
    using Error::Error;
};

}  // namespace ssrlab
