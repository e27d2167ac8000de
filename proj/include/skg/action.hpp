#pragma once

// Discretized action stationarity. The particle part of the action,
//   S = E[ Int dtau (m0/2) V*.V - e A . Re V ],
// is evaluated on a density-weighted grid under the path perturbation
// x -> x + eps eta(x), which shifts the velocity slot by eps D_tau eta and the
// potential argument by eps eta. S(eps) is fitted quadratically; at a
// Klein-Gordon solution the linear coefficient vanishes.

#include <array>
#include <cmath>
#include <vector>

#include "skg/checks.hpp"
#include "skg/density.hpp"
#include "skg/spacetime.hpp"
#include "skg/wavefunction.hpp"

namespace skg {

/// C-infinity bump b(s) = exp(1 - 1/(1-s^2)) on |s|<1, zero outside.
struct BumpProfile {
    static double value(double s) {
        const double s2 = s * s;
        if (s2 >= 1.0) return 0.0;
        return std::exp(1.0 - 1.0 / (1.0 - s2));
    }
    static double d1(double s) {
        const double s2 = s * s;
        if (s2 >= 1.0) return 0.0;
        const double om = 1.0 - s2;
        return value(s) * (-2.0 * s / (om * om));
    }
    static double d2(double s) {
        const double s2 = s * s;
        if (s2 >= 1.0) return 0.0;
        const double om = 1.0 - s2;
        const double up = -2.0 * s / (om * om);
        const double upp = -2.0 / (om * om) - 8.0 * s2 / (om * om * om);
        return value(s) * (up * up + upp);
    }
};

/// eta^mu(x) = u^mu prod_d bump((x_cd - center_d)/radius_d) over the listed
/// coordinates; all derivatives vanish at the support boundary, so quadrature
/// and integration by parts are boundary-clean.
inline AnalyticVectorField bump_perturbation(const FourVector& direction,
                                             const std::vector<int>& coords,
                                             const FourVector& center, const FourVector& radius) {
    AnalyticVectorField f;
    f.description = "bump";
    auto factors = [coords, center, radius](const FourVector& x, int order_coord,
                                            int order) {
        double v = 1.0;
        for (int c : coords) {
            const double s = (x[c] - center[c]) / radius[c];
            if (c == order_coord && order == 1)
                v *= BumpProfile::d1(s) / radius[c];
            else if (c == order_coord && order == 2)
                v *= BumpProfile::d2(s) / (radius[c] * radius[c]);
            else
                v *= BumpProfile::value(s);
        }
        return v;
    };
    f.value = [direction, factors](const FourVector& x) {
        return ComplexFourVector::from_real(direction * factors(x, -1, 0));
    };
    f.jacobian = [direction, coords, factors](const FourVector& x) {
        std::array<std::array<complexd, 4>, 4> j{};
        for (int nu : coords) {
            const double d = factors(x, nu, 1);
            for (int mu = 0; mu < 4; ++mu) j[nu][mu] = direction[mu] * d;
        }
        return j;
    };
    f.hessian = [direction, coords, factors, center, radius](const FourVector& x) {
        std::array<std::array<std::array<complexd, 4>, 4>, 4> h{};
        for (int a : coords)
            for (int b : coords) {
                double d;
                if (a == b) {
                    d = factors(x, a, 2);
                } else {
                    // mixed derivative: both factors differentiated once
                    d = 1.0;
                    for (int c : coords) {
                        const double s = (x[c] - center[c]) / radius[c];
                        if (c == a || c == b)
                            d *= BumpProfile::d1(s) / radius[c];
                        else
                            d *= BumpProfile::value(s);
                    }
                }
                for (int mu = 0; mu < 4; ++mu) h[a][b][mu] = direction[mu] * d;
            }
        return h;
    };
    return f;
}

struct ActionSweep {
    std::vector<double> epsilons;  // symmetric sweep including 0
    std::vector<double> action;    // S(eps)
    double c0 = 0.0, c1 = 0.0, c2 = 0.0;
};

/// Evaluates S(eps) on the grid and fits S = c0 + c1 eps + c2 eps^2.
/// Pass criterion: |c1| <= rel_threshold |c2| eps_max at a Klein-Gordon
/// solution; the off-shell control must exceed the threshold resolvably.
inline CheckReport action_stationarity_check(const WaveFunctionModel& model,
                                             const PotentialModel& A,
                                             const PhysicalConstants& consts,
                                             const AnalyticVectorField& perturbation,
                                             const std::vector<double>& epsilons,
                                             const GridAxes& axes, double tau_span,
                                             double rel_threshold = 1e-3,
                                             ActionSweep* sweep_out = nullptr,
                                             const EvalOptions& opts = {}) {
    CheckReport rep;
    rep.name = "action_stationarity";
    rep.target = 0.0;
    rep.tolerance_basis = "fd-error";
    if (epsilons.size() < 3)
        throw std::invalid_argument("action_stationarity_check: need >= 3 sweep points");

    const std::size_t cells = axes.n_cells();
    const double vol = axes.cell_volume();

    // density weights and per-cell cached quantities
    std::vector<double> p(cells);
    std::vector<ComplexFourVector> v(cells), deta(cells);
    std::vector<FourVector> eta(cells);
    double norm = 0.0;
    const complexd il2_half(0.0, 0.5 * consts.lambda_sq());
    for (std::size_t c = 0; c < cells; ++c) {
        const FourVector x = axes.point(c);
        const auto ld = log_derivatives(model, A, x, consts, opts);
        p[c] = std::norm(ld.phi);
        norm += p[c] * vol;
        const auto vel = complex_velocity(model, A, x, consts, opts);
        v[c] = vel;
        const auto ej = perturbation.jacobian(x);
        const auto eh = perturbation.hessian(x);
        eta[c] = perturbation.value(x).re;
        for (int mu = 0; mu < 4; ++mu) {
            complexd s = 0.0, box = 0.0;
            for (int nu = 0; nu < 4; ++nu) {
                s += vel[nu] * ej[nu][mu];
                box += metric_diag[nu] * eh[nu][nu][mu];
            }
            deta[c].set(mu, s + il2_half * box);
        }
    }
    for (double& q : p) q /= norm;

    ActionSweep sweep;
    sweep.epsilons = epsilons;
    for (double eps : epsilons) {
        double S = 0.0;
        for (std::size_t c = 0; c < cells; ++c) {
            if (p[c] == 0.0) continue;
            const FourVector x = axes.point(c);
            ComplexFourVector veps = v[c];
            for (int mu = 0; mu < 4; ++mu) veps.set(mu, veps[mu] + eps * deta[c][mu]);
            const double kinetic =
                0.5 * consts.m0 * complex_minkowski_dot(conj(veps), veps).real();
            FourVector xs = x;
            for (int mu = 0; mu < 4; ++mu) xs[mu] += eps * eta[c][mu];
            const double inter = consts.e * minkowski_dot(A.value(xs), veps.re);
            S += p[c] * (kinetic - inter) * vol;
        }
        sweep.action.push_back(tau_span * S);
    }

    // quadratic least squares
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, y0 = 0, y1 = 0, y2 = 0;
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        const double e = epsilons[i], y = sweep.action[i];
        s0 += 1;
        s1 += e;
        s2 += e * e;
        s3 += e * e * e;
        s4 += e * e * e * e;
        y0 += y;
        y1 += y * e;
        y2 += y * e * e;
    }
    // solve the 3x3 normal equations by elimination
    double M[3][4] = {{s0, s1, s2, y0}, {s1, s2, s3, y1}, {s2, s3, s4, y2}};
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(M[r][col]) > std::abs(M[piv][col])) piv = r;
        std::swap(M[col], M[piv]);
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            const double f = M[r][col] / M[col][col];
            for (int q = col; q < 4; ++q) M[r][q] -= f * M[col][q];
        }
    }
    sweep.c0 = M[0][3] / M[0][0];
    sweep.c1 = M[1][3] / M[1][1];
    sweep.c2 = M[2][3] / M[2][2];
    if (sweep_out) *sweep_out = sweep;

    const double eps_max = *std::max_element(epsilons.begin(), epsilons.end());
    rep.measured = std::abs(sweep.c1);
    rep.tolerance = rel_threshold * std::abs(sweep.c2) * eps_max;
    rep.details["c0"] = sweep.c0;
    rep.details["c1"] = sweep.c1;
    rep.details["c2"] = sweep.c2;
    rep.details["eps_max"] = eps_max;
    rep.pass = rep.measured <= rep.tolerance;
    return rep;
}

}  // namespace skg
