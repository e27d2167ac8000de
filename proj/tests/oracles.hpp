#pragma once

// Test-side oracles, independent of the library's derivative machinery.
// Everything here is the dumbest correct implementation we could write.

#include <array>
#include <complex>
#include <functional>

#include "skg/spacetime.hpp"

namespace oracle {

using skg::complexd;
using skg::FourVector;

inline constexpr std::array<double, 4> g_diag{+1.0, -1.0, -1.0, -1.0};

/// Naive double loop over the full metric matrix.
inline double minkowski_dot_loop(const FourVector& a, const FourVector& b) {
    double s = 0.0;
    for (int mu = 0; mu < 4; ++mu)
        for (int nu = 0; nu < 4; ++nu)
            if (mu == nu) s += g_diag[mu] * a[mu] * b[nu];
    return s;
}

/// Direct 8-term expansion of the bilinear complex dot.
inline complexd complex_dot_expansion(const skg::ComplexFourVector& a,
                                      const skg::ComplexFourVector& b) {
    complexd s = 0.0;
    for (int mu = 0; mu < 4; ++mu) {
        const complexd am(a.re[mu], a.im[mu]);
        const complexd bm(b.re[mu], b.im[mu]);
        s += g_diag[mu] * (am.real() * bm.real() - am.imag() * bm.imag()) +
             g_diag[mu] * complexd(0.0, am.real() * bm.imag() + am.imag() * bm.real());
    }
    return s;
}

/// Naive index-lowered contraction for the force term -e v_nu F^{mu nu}.
inline skg::ComplexFourVector lorentz_force_loop(const skg::FieldTensor& F,
                                                 const skg::ComplexFourVector& v, double e) {
    skg::ComplexFourVector out;
    for (int mu = 0; mu < 4; ++mu) {
        complexd s = 0.0;
        for (int nu = 0; nu < 4; ++nu) s += g_diag[nu] * v[nu] * F(mu, nu);
        out.set(mu, -e * s);
    }
    return out;
}

using ScalarFn = std::function<complexd(const FourVector&)>;

inline FourVector bump(FourVector x, int mu, double h) {
    x[mu] += h;
    return x;
}

/// Plain central difference d f / d x^mu.
inline complexd cdiff(const ScalarFn& f, const FourVector& x, int mu, double h) {
    return (f(bump(x, mu, h)) - f(bump(x, mu, -h))) / (2.0 * h);
}

/// d^2 f / d x^mu d x^nu.
inline complexd cdiff2(const ScalarFn& f, const FourVector& x, int mu, int nu, double h) {
    if (mu == nu)
        return (f(bump(x, mu, h)) - 2.0 * f(x) + f(bump(x, mu, -h))) / (h * h);
    return (f(bump(bump(x, mu, h), nu, h)) - f(bump(bump(x, mu, h), nu, -h)) -
            f(bump(bump(x, mu, -h), nu, h)) + f(bump(bump(x, mu, -h), nu, -h))) /
           (4.0 * h * h);
}

/// Contravariant gradient d^mu f via central differences.
inline std::array<complexd, 4> grad_raised(const ScalarFn& f, const FourVector& x, double h) {
    std::array<complexd, 4> g;
    for (int mu = 0; mu < 4; ++mu) g[mu] = g_diag[mu] * cdiff(f, x, mu, h);
    return g;
}

/// Klein-Gordon operator applied by brute force to a phi evaluator:
/// (i hbar d + eA)(i hbar d + eA) phi - m0^2 c^2 phi, all derivatives central.
inline complexd kg_operator_fd(const ScalarFn& phi,
                               const std::function<FourVector(const FourVector&)>& A,
                               const skg::PhysicalConstants& k, const FourVector& x, double h) {
    const double hb = k.hbar;
    complexd box = 0.0;
    for (int mu = 0; mu < 4; ++mu) box += g_diag[mu] * cdiff2(phi, x, mu, mu, h);
    // i hbar d_mu (A^mu phi)
    complexd divAphi = 0.0;
    for (int mu = 0; mu < 4; ++mu) {
        auto f = [&](const FourVector& y) { return A(y)[mu] * phi(y); };
        divAphi += cdiff(f, x, mu, h);
    }
    // A_mu d^mu phi
    complexd AdotD = 0.0;
    const FourVector Ax = A(x);
    for (int mu = 0; mu < 4; ++mu) AdotD += g_diag[mu] * Ax[mu] * g_diag[mu] * cdiff(phi, x, mu, h);
    const complexd i(0.0, 1.0);
    return -hb * hb * box + i * hb * k.e * divAphi + i * hb * k.e * AdotD +
           k.e * k.e * minkowski_dot(Ax, Ax) * phi(x) - k.mass_shell() * phi(x);
}

}  // namespace oracle
