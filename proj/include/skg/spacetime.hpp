#pragma once

// Minkowski vector algebra with the fixed metric g = diag(+1,-1,-1,-1).
// Components are stored contravariant; indices are raised/lowered eagerly.

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace skg {

using complexd = std::complex<double>;

inline constexpr std::array<double, 4> metric_diag{+1.0, -1.0, -1.0, -1.0};

struct FourVector {
    std::array<double, 4> c{0.0, 0.0, 0.0, 0.0};

    FourVector() = default;
    FourVector(double c0, double c1, double c2, double c3) : c{c0, c1, c2, c3} {
        for (double v : c) {
            if (!std::isfinite(v))
                throw std::invalid_argument("FourVector: non-finite component");
        }
    }

    static FourVector zero() { return FourVector{}; }

    double& operator[](int mu) { return c[static_cast<std::size_t>(mu)]; }
    double operator[](int mu) const { return c[static_cast<std::size_t>(mu)]; }

    bool is_finite() const {
        for (double v : c)
            if (!std::isfinite(v)) return false;
        return true;
    }

    FourVector& operator+=(const FourVector& o) {
        for (int mu = 0; mu < 4; ++mu) c[mu] += o.c[mu];
        return *this;
    }
    FourVector& operator-=(const FourVector& o) {
        for (int mu = 0; mu < 4; ++mu) c[mu] -= o.c[mu];
        return *this;
    }
    FourVector& operator*=(double s) {
        for (double& v : c) v *= s;
        return *this;
    }

    friend FourVector operator+(FourVector a, const FourVector& b) { return a += b; }
    friend FourVector operator-(FourVector a, const FourVector& b) { return a -= b; }
    friend FourVector operator*(FourVector a, double s) { return a *= s; }
    friend FourVector operator*(double s, FourVector a) { return a *= s; }
    friend FourVector operator/(FourVector a, double s) { return a *= (1.0 / s); }
    friend FourVector operator-(const FourVector& a) {
        FourVector r;
        for (int mu = 0; mu < 4; ++mu) r.c[mu] = -a.c[mu];
        return r;
    }
    friend bool operator==(const FourVector& a, const FourVector& b) { return a.c == b.c; }
};

/// a_mu b^mu with g = diag(+1,-1,-1,-1).
inline double minkowski_dot(const FourVector& a, const FourVector& b) {
    return a.c[0] * b.c[0] - a.c[1] * b.c[1] - a.c[2] * b.c[2] - a.c[3] * b.c[3];
}

/// Lower the index: v_mu = g_{mu nu} v^nu.
inline FourVector lower(const FourVector& v) {
    FourVector r;
    for (int mu = 0; mu < 4; ++mu) r.c[mu] = metric_diag[mu] * v.c[mu];
    return r;
}

/// Raise is numerically the same operation for a diagonal +/-1 metric.
inline FourVector raise(const FourVector& v) { return lower(v); }

struct ComplexFourVector {
    FourVector re{};
    FourVector im{};

    ComplexFourVector() = default;
    ComplexFourVector(const FourVector& r, const FourVector& i) : re(r), im(i) {}

    static ComplexFourVector from_real(const FourVector& r) { return {r, FourVector::zero()}; }

    complexd operator[](int mu) const { return {re[mu], im[mu]}; }
    void set(int mu, complexd z) {
        re[mu] = z.real();
        im[mu] = z.imag();
    }

    friend ComplexFourVector operator+(const ComplexFourVector& a, const ComplexFourVector& b) {
        return {a.re + b.re, a.im + b.im};
    }
    friend ComplexFourVector operator-(const ComplexFourVector& a, const ComplexFourVector& b) {
        return {a.re - b.re, a.im - b.im};
    }
    friend ComplexFourVector operator*(const ComplexFourVector& a, double s) {
        return {a.re * s, a.im * s};
    }
    friend ComplexFourVector operator*(const ComplexFourVector& a, complexd z) {
        ComplexFourVector r;
        for (int mu = 0; mu < 4; ++mu) r.set(mu, a[mu] * z);
        return r;
    }
};

inline ComplexFourVector conj(const ComplexFourVector& z) { return {z.re, -z.im}; }

inline ComplexFourVector lower(const ComplexFourVector& z) { return {lower(z.re), lower(z.im)}; }
inline ComplexFourVector raise(const ComplexFourVector& z) { return lower(z); }

/// Bilinear extension of minkowski_dot: a_mu b^mu over complex components.
/// No conjugation is applied; callers wanting V*_mu V^mu pass conj(a) themselves.
inline complexd complex_minkowski_dot(const ComplexFourVector& a, const ComplexFourVector& b) {
    complexd s = 0.0;
    for (int mu = 0; mu < 4; ++mu) s += metric_diag[mu] * a[mu] * b[mu];
    return s;
}

/// Antisymmetric rank-2 tensor F^{mu nu}, stored contravariant.
struct FieldTensor {
    std::array<std::array<double, 4>, 4> f{};

    FieldTensor() = default;

    /// Builds F from an explicit component matrix; rejects non-antisymmetric input.
    static FieldTensor from_components(const std::array<std::array<double, 4>, 4>& m) {
        FieldTensor t;
        t.f = m;
        for (int mu = 0; mu < 4; ++mu)
            for (int nu = 0; nu < 4; ++nu)
                if (m[mu][nu] != -m[nu][mu])
                    throw std::invalid_argument("FieldTensor: not antisymmetric");
        return t;
    }

    /// F with the six independent entries above the diagonal; the rest follows
    /// from antisymmetry exactly.
    static FieldTensor from_upper_triangle(double f01, double f02, double f03, double f12,
                                           double f13, double f23) {
        FieldTensor t;
        t.f[0][1] = f01; t.f[1][0] = -f01;
        t.f[0][2] = f02; t.f[2][0] = -f02;
        t.f[0][3] = f03; t.f[3][0] = -f03;
        t.f[1][2] = f12; t.f[2][1] = -f12;
        t.f[1][3] = f13; t.f[3][1] = -f13;
        t.f[2][3] = f23; t.f[3][2] = -f23;
        return t;
    }

    double operator()(int mu, int nu) const { return f[mu][nu]; }

    friend FieldTensor operator*(const FieldTensor& t, double s) {
        FieldTensor r = t;
        for (auto& row : r.f)
            for (double& v : row) v *= s;
        return r;
    }
    friend FieldTensor operator+(const FieldTensor& a, const FieldTensor& b) {
        FieldTensor r;
        for (int mu = 0; mu < 4; ++mu)
            for (int nu = 0; nu < 4; ++nu) r.f[mu][nu] = a.f[mu][nu] + b.f[mu][nu];
        return r;
    }
};

/// Minimal-coupling force contraction: component mu is -e v_nu F^{mu nu}.
inline ComplexFourVector lorentz_force(const FieldTensor& F, const ComplexFourVector& v,
                                       double e) {
    ComplexFourVector vlow = lower(v);
    ComplexFourVector r;
    for (int mu = 0; mu < 4; ++mu) {
        complexd s = 0.0;
        for (int nu = 0; nu < 4; ++nu) s += vlow[nu] * F(mu, nu);
        r.set(mu, -e * s);
    }
    return r;
}

/// Physical constants. lambda is derived, never set: lambda^2 = hbar/m0.
struct PhysicalConstants {
    double hbar = 1.0;
    double m0 = 1.0;
    double e = 1.0;
    double c = 1.0;
    double mu0 = 1.0;
    double lambda = 1.0;

    PhysicalConstants() = default;
    PhysicalConstants(double hbar_, double m0_, double e_, double c_, double mu0_)
        : hbar(hbar_), m0(m0_), e(e_), c(c_), mu0(mu0_), lambda(std::sqrt(hbar_ / m0_)) {
        if (!(hbar > 0.0) || !(m0 > 0.0) || !(c > 0.0) || !(mu0 > 0.0))
            throw std::invalid_argument("PhysicalConstants: hbar, m0, c, mu0 must be positive");
    }

    /// hbar = c = m0 = 1 (so lambda = 1), with configurable charge and mu0.
    static PhysicalConstants natural(double e_ = 1.0, double mu0_ = 1.0) {
        return PhysicalConstants(1.0, 1.0, e_, 1.0, mu0_);
    }

    double lambda_sq() const { return lambda * lambda; }
    double mass_shell() const { return m0 * m0 * c * c; }  // m0^2 c^2
};

}  // namespace skg
