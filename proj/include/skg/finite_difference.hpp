#pragma once

// Second-order central-difference stencils over point functions of spacetime.
// Used as the fallback derivative strategy for field evaluation; the closed
// forms in wavefunction.hpp are the default path.

#include <functional>

#include "skg/spacetime.hpp"

namespace skg::fd {

using ScalarFn = std::function<complexd(const FourVector&)>;

inline FourVector shifted(FourVector x, int mu, double h) {
    x[mu] += h;
    return x;
}

/// d f / d x^mu
inline complexd d1(const ScalarFn& f, const FourVector& x, int mu, double h) {
    return (f(shifted(x, mu, h)) - f(shifted(x, mu, -h))) / (2.0 * h);
}

/// d^2 f / d x^mu d x^nu
inline complexd d2(const ScalarFn& f, const FourVector& x, int mu, int nu, double h) {
    if (mu == nu) {
        return (f(shifted(x, mu, h)) - 2.0 * f(x) + f(shifted(x, mu, -h))) / (h * h);
    }
    const complexd fpp = f(shifted(shifted(x, mu, h), nu, h));
    const complexd fpm = f(shifted(shifted(x, mu, h), nu, -h));
    const complexd fmp = f(shifted(shifted(x, mu, -h), nu, h));
    const complexd fmm = f(shifted(shifted(x, mu, -h), nu, -h));
    return (fpp - fpm - fmp + fmm) / (4.0 * h * h);
}

/// d^3 f / d (x^a)^2 d x^mu
inline complexd d2d1(const ScalarFn& f, const FourVector& x, int a, int mu, double h) {
    if (a == mu) {
        // f''' five-point central stencil
        return (f(shifted(x, mu, 2 * h)) - 2.0 * f(shifted(x, mu, h)) +
                2.0 * f(shifted(x, mu, -h)) - f(shifted(x, mu, -2 * h))) /
               (2.0 * h * h * h);
    }
    auto second_in_a = [&](const FourVector& y) {
        return (f(shifted(y, a, h)) - 2.0 * f(y) + f(shifted(y, a, -h))) / (h * h);
    };
    return (second_in_a(shifted(x, mu, h)) - second_in_a(shifted(x, mu, -h))) / (2.0 * h);
}

}  // namespace skg::fd
