#pragma once

// Closed-form Klein-Gordon solutions, external potentials and all pointwise
// field quantities derived from them: phi and its log-derivatives, the complex
// velocity V^mu = i lambda^2 d^mu ln(phi) + (e/m0) A^mu, the forward/backward
// drifts, gauge transforms, and the residuals of the pointwise identities
// (Klein-Gordon operator, equation of motion, curl identity).
//
// Catalog: plane wave, equal-mass mode sums, and the Volkov-type pure-phase
// solution for a charge in a null plane-wave potential. Every member has
// analytic derivatives to the order the operators need; a central-difference
// strategy is available for cross-checks and as a fallback.

#include <cmath>
#include <complex>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "skg/finite_difference.hpp"
#include "skg/spacetime.hpp"

namespace skg {

// ---------------------------------------------------------------------------
// Errors

struct IncompatiblePair : std::invalid_argument {
    explicit IncompatiblePair(const std::string& what) : std::invalid_argument(what) {}
};

/// phi vanished (interference node): the drift V diverges there.
struct NodeSingularity : std::runtime_error {
    FourVector where;
    double abs_phi;
    NodeSingularity(const FourVector& x, double a)
        : std::runtime_error("wave-function node: |phi| = " + std::to_string(a)),
          where(x),
          abs_phi(a) {}
};

// ---------------------------------------------------------------------------
// Evaluation options

struct EvalOptions {
    double node_epsilon = 1e-10;      // |phi| below this is treated as a node
    double fd_step = 1e-3;            // central-difference step (natural units)
    bool use_finite_difference = false;  // derivative strategy for residual ops
};

// ---------------------------------------------------------------------------
// Profile of a null plane wave: g(xi) with xi = k.x.
// The cosine family covers the catalog; amplitude 0 gives a free wave.

struct WaveProfile {
    double amplitude = 0.0;
    double phase0 = 0.0;

    double value(double xi) const { return amplitude * std::cos(xi + phase0); }
    double d1(double xi) const { return -amplitude * std::sin(xi + phase0); }
    double d2(double xi) const { return -amplitude * std::cos(xi + phase0); }
    /// int_0^xi g(s) ds
    double antiderivative(double xi) const {
        return amplitude * (std::sin(xi + phase0) - std::sin(phase0));
    }
    /// int_0^xi g(s)^2 ds
    double antiderivative_sq(double xi) const {
        return amplitude * amplitude *
               (0.5 * xi + 0.25 * (std::sin(2.0 * (xi + phase0)) - std::sin(2.0 * phase0)));
    }
};

// ---------------------------------------------------------------------------
// Gauge function: real polynomial of degree <= 2 with exact gradient/hessian.
// Lambda(x) = c0 + lin_mu x^mu + x^mu quad_{mu nu} x^nu  (quad symmetric).

struct GaugeFunction {
    double c0 = 0.0;
    std::array<double, 4> lin{};                  // coefficients on x^mu
    std::array<std::array<double, 4>, 4> quad{};  // symmetric

    static GaugeFunction zero() { return {}; }
    static GaugeFunction linear(const std::array<double, 4>& b, double c = 0.0) {
        GaugeFunction g;
        g.c0 = c;
        g.lin = b;
        return g;
    }
    static GaugeFunction quadratic(const std::array<std::array<double, 4>, 4>& q,
                                   const std::array<double, 4>& b = {}, double c = 0.0) {
        GaugeFunction g;
        g.c0 = c;
        g.lin = b;
        for (int mu = 0; mu < 4; ++mu)
            for (int nu = 0; nu < 4; ++nu) g.quad[mu][nu] = 0.5 * (q[mu][nu] + q[nu][mu]);
        return g;
    }

    double value(const FourVector& x) const {
        double v = c0;
        for (int mu = 0; mu < 4; ++mu) {
            v += lin[mu] * x[mu];
            for (int nu = 0; nu < 4; ++nu) v += quad[mu][nu] * x[mu] * x[nu];
        }
        return v;
    }
    /// dLambda/dx^mu (lower index)
    FourVector gradient_lower(const FourVector& x) const {
        FourVector g;
        for (int mu = 0; mu < 4; ++mu) {
            g[mu] = lin[mu];
            for (int nu = 0; nu < 4; ++nu) g[mu] += 2.0 * quad[mu][nu] * x[nu];
        }
        return g;
    }
    /// d^2 Lambda / dx^mu dx^nu (constant)
    double hessian_lower(int mu, int nu) const { return 2.0 * quad[mu][nu]; }
};

// ---------------------------------------------------------------------------
// Potentials

struct ZeroPotential {};

/// A^mu(x) = -1/2 F^{mu nu} x_nu  (uniform field strength, Lorenz gauge exact)
struct ConstantFieldPotential {
    FieldTensor F;
};

/// A^mu(x) = a^mu g(k.x), k null, k.a = 0 (light-front plane wave)
struct PlaneWavePotential {
    FourVector k;
    FourVector a;
    WaveProfile profile;
};

class PotentialModel {
  public:
    using Base = std::variant<ZeroPotential, ConstantFieldPotential, PlaneWavePotential>;

    PotentialModel() : base_(ZeroPotential{}) {}

    static PotentialModel zero() { return PotentialModel(); }

    static PotentialModel constant_field(const FieldTensor& F) {
        PotentialModel p;
        p.base_ = ConstantFieldPotential{F};
        return p;
    }

    static PotentialModel plane_wave(const FourVector& k, const FourVector& a,
                                     const WaveProfile& profile) {
        const double kk = minkowski_dot(k, k);
        const double ka = minkowski_dot(k, a);
        const double scale = std::abs(k[0]) + std::abs(k[1]) + std::abs(k[2]) + std::abs(k[3]);
        if (std::abs(kk) > 1e-12 * std::max(1.0, scale * scale))
            throw std::invalid_argument("PlaneWavePotential: k must be null");
        if (std::abs(ka) > 1e-12 * std::max(1.0, scale))
            throw std::invalid_argument("PlaneWavePotential: polarization must satisfy k.a = 0");
        PotentialModel p;
        p.base_ = PlaneWavePotential{k, a, profile};
        return p;
    }

    const Base& base() const { return base_; }
    const std::vector<GaugeFunction>& gauge_shifts() const { return gauge_shifts_; }

    bool is_zero_base() const { return std::holds_alternative<ZeroPotential>(base_); }
    const PlaneWavePotential* plane_wave_base() const {
        return std::get_if<PlaneWavePotential>(&base_);
    }

    /// A^mu(x), including accumulated gauge shifts A -> A - d^mu Lambda.
    FourVector value(const FourVector& x) const {
        FourVector A;
        if (const auto* cf = std::get_if<ConstantFieldPotential>(&base_)) {
            const FourVector xl = lower(x);
            for (int mu = 0; mu < 4; ++mu) {
                double s = 0.0;
                for (int nu = 0; nu < 4; ++nu) s += cf->F(mu, nu) * xl[nu];
                A[mu] = -0.5 * s;
            }
        } else if (const auto* pw = std::get_if<PlaneWavePotential>(&base_)) {
            A = pw->a * pw->profile.value(minkowski_dot(pw->k, x));
        }
        for (const auto& gf : gauge_shifts_) A -= raise(gf.gradient_lower(x));
        return A;
    }

    /// jac[nu][mu] = d_nu A^mu  (coordinate derivative, lower nu)
    std::array<std::array<double, 4>, 4> jacobian(const FourVector& x) const {
        std::array<std::array<double, 4>, 4> j{};
        if (const auto* cf = std::get_if<ConstantFieldPotential>(&base_)) {
            for (int nu = 0; nu < 4; ++nu)
                for (int mu = 0; mu < 4; ++mu) j[nu][mu] = -0.5 * metric_diag[nu] * cf->F(mu, nu);
        } else if (const auto* pw = std::get_if<PlaneWavePotential>(&base_)) {
            const double gp = pw->profile.d1(minkowski_dot(pw->k, x));
            const FourVector kl = lower(pw->k);
            for (int nu = 0; nu < 4; ++nu)
                for (int mu = 0; mu < 4; ++mu) j[nu][mu] = pw->a[mu] * kl[nu] * gp;
        }
        for (const auto& gf : gauge_shifts_) {
            for (int nu = 0; nu < 4; ++nu)
                for (int mu = 0; mu < 4; ++mu)
                    j[nu][mu] -= metric_diag[mu] * gf.hessian_lower(mu, nu);
        }
        return j;
    }

    /// d_mu A^mu
    double divergence(const FourVector& x) const {
        const auto j = jacobian(x);
        return j[0][0] + j[1][1] + j[2][2] + j[3][3];
    }

    /// box A^mu = d^nu d_nu A^mu
    FourVector dalembertian(const FourVector& x) const {
        FourVector b;
        if (const auto* pw = std::get_if<PlaneWavePotential>(&base_)) {
            const double kk = minkowski_dot(pw->k, pw->k);
            b = pw->a * (kk * pw->profile.d2(minkowski_dot(pw->k, x)));
        }
        // constant-field and polynomial gauge shifts have vanishing box
        return b;
    }

    /// F^{mu nu}(x) = d^mu A^nu - d^nu A^mu; gauge shifts drop out exactly.
    FieldTensor field_tensor(const FourVector& x) const {
        if (const auto* cf = std::get_if<ConstantFieldPotential>(&base_)) return cf->F;
        FieldTensor F;
        if (const auto* pw = std::get_if<PlaneWavePotential>(&base_)) {
            const double gp = pw->profile.d1(minkowski_dot(pw->k, x));
            for (int mu = 0; mu < 4; ++mu)
                for (int nu = 0; nu < 4; ++nu)
                    F.f[mu][nu] = (pw->k[mu] * pw->a[nu] - pw->k[nu] * pw->a[mu]) * gp;
        }
        return F;
    }

    /// d_nu F^{mu nu}(x)
    FourVector field_tensor_divergence(const FourVector& x) const {
        FourVector d;
        if (const auto* pw = std::get_if<PlaneWavePotential>(&base_)) {
            const double gpp = pw->profile.d2(minkowski_dot(pw->k, x));
            const double kk = minkowski_dot(pw->k, pw->k);
            const double ka = minkowski_dot(pw->k, pw->a);
            for (int mu = 0; mu < 4; ++mu) d[mu] = (pw->k[mu] * ka - kk * pw->a[mu]) * gpp;
        }
        return d;
    }

    std::string describe() const {
        std::ostringstream os;
        if (std::holds_alternative<ZeroPotential>(base_))
            os << "zero";
        else if (std::holds_alternative<ConstantFieldPotential>(base_))
            os << "constant_field";
        else
            os << "plane_wave";
        if (!gauge_shifts_.empty()) os << "+gauge(" << gauge_shifts_.size() << ")";
        return os.str();
    }

    void push_gauge_shift(const GaugeFunction& gf) { gauge_shifts_.push_back(gf); }

  private:
    Base base_;
    std::vector<GaugeFunction> gauge_shifts_;
};

// ---------------------------------------------------------------------------
// Wave-function models

struct PlaneWaveState {
    FourVector p;
};

struct ModeSumState {
    struct Mode {
        complexd weight;
        FourVector p;
    };
    std::vector<Mode> modes;
};

/// Pure-phase solution for a charge inside the paired PlaneWavePotential.
struct VolkovState {
    FourVector p;
};

class WaveFunctionModel {
  public:
    using Base = std::variant<PlaneWaveState, ModeSumState, VolkovState>;

    static constexpr double on_shell_tolerance = 1e-12;

    static WaveFunctionModel plane_wave(const FourVector& p, const PhysicalConstants& consts) {
        require_on_shell(p, consts);
        WaveFunctionModel m;
        m.base_ = PlaneWaveState{p};
        return m;
    }

    static WaveFunctionModel mode_sum(const std::vector<ModeSumState::Mode>& modes,
                                      const PhysicalConstants& consts) {
        if (modes.empty()) throw std::invalid_argument("ModeSum: no modes");
        double wsum = 0.0;
        for (const auto& m : modes) {
            require_on_shell(m.p, consts);
            wsum += std::abs(m.weight);
        }
        if (wsum == 0.0) throw std::invalid_argument("ModeSum: weights are all zero");
        WaveFunctionModel m;
        m.base_ = ModeSumState{modes};
        return m;
    }

    /// For negative controls only: skips the mass-shell validation.
    static WaveFunctionModel mode_sum_unchecked(const std::vector<ModeSumState::Mode>& modes) {
        if (modes.empty()) throw std::invalid_argument("ModeSum: no modes");
        WaveFunctionModel m;
        m.base_ = ModeSumState{modes};
        return m;
    }

    static WaveFunctionModel volkov(const FourVector& p, const PhysicalConstants& consts) {
        require_on_shell(p, consts);
        WaveFunctionModel m;
        m.base_ = VolkovState{p};
        return m;
    }

    const Base& base() const { return base_; }
    const std::vector<GaugeFunction>& gauge_phases() const { return gauge_phases_; }
    void push_gauge_phase(const GaugeFunction& gf) { gauge_phases_.push_back(gf); }

    bool is_pure_phase() const { return !std::holds_alternative<ModeSumState>(base_); }

    std::string describe() const {
        std::ostringstream os;
        if (std::holds_alternative<PlaneWaveState>(base_))
            os << "plane_wave";
        else if (const auto* ms = std::get_if<ModeSumState>(&base_))
            os << "mode_sum(" << ms->modes.size() << ")";
        else
            os << "volkov";
        if (!gauge_phases_.empty()) os << "+gauge(" << gauge_phases_.size() << ")";
        return os.str();
    }

    static void require_on_shell(const FourVector& p, const PhysicalConstants& consts) {
        const double miss = std::abs(minkowski_dot(p, p) - consts.mass_shell());
        if (miss > on_shell_tolerance)
            throw std::invalid_argument("momentum is off the mass shell by " +
                                        std::to_string(miss));
    }

  private:
    Base base_;
    std::vector<GaugeFunction> gauge_phases_;
};

/// Throws IncompatiblePair unless the model/potential bases may be evaluated
/// together: Volkov needs the plane-wave potential, the free solutions need a
/// zero-base potential (gauge shifts are fine either way).
inline void ensure_compatible(const WaveFunctionModel& model, const PotentialModel& A) {
    const bool volkov = std::holds_alternative<VolkovState>(model.base());
    if (volkov) {
        if (!A.plane_wave_base())
            throw IncompatiblePair("Volkov state requires a plane-wave potential");
    } else if (!A.is_zero_base()) {
        throw IncompatiblePair("free-space solutions require a zero-base potential");
    }
}

/// (phi', A') = (exp(-ie Lambda/hbar) phi, A - d Lambda)
inline std::pair<WaveFunctionModel, PotentialModel> gauge_transform(const WaveFunctionModel& model,
                                                                    const PotentialModel& A,
                                                                    const GaugeFunction& lambda) {
    WaveFunctionModel m = model;
    PotentialModel a = A;
    m.push_gauge_phase(lambda);
    a.push_gauge_shift(lambda);
    return {std::move(m), std::move(a)};
}

// ---------------------------------------------------------------------------
// Derivative bundle of ln phi (coordinate derivatives, lower indices)

struct LogDerivatives {
    complexd phi;
    std::array<complexd, 4> dlog{};                      // d_mu ln phi
    std::array<std::array<complexd, 4>, 4> d2log{};      // d_mu d_nu ln phi
    std::array<complexd, 4> box_dlog{};                  // d^a d_a (d_mu ln phi)
};

namespace detail {

inline double volkov_kdotp(const VolkovState& vs, const PlaneWavePotential& pw) {
    const double kp = minkowski_dot(pw.k, vs.p);
    if (std::abs(kp) < 1e-14)
        throw IncompatiblePair("Volkov state requires k.p != 0");
    return kp;
}

/// Light-front action phase: p.x + S(xi), with S'(xi) chosen so that
/// (p + k S' + eA)^2 = p^2 identically.
struct VolkovPhase {
    double kp, ap, aa, e;
    const WaveProfile* g;

    double S(double xi) const {
        return -(e * ap * g->antiderivative(xi) + 0.5 * e * e * aa * g->antiderivative_sq(xi)) /
               kp;
    }
    double S1(double xi) const {
        const double gv = g->value(xi);
        return -(e * ap * gv + 0.5 * e * e * aa * gv * gv) / kp;
    }
    double S2(double xi) const {
        const double gv = g->value(xi);
        const double g1 = g->d1(xi);
        return -(e * ap * g1 + e * e * aa * gv * g1) / kp;
    }
    double S3(double xi) const {
        const double gv = g->value(xi);
        const double g1 = g->d1(xi);
        const double g2 = g->d2(xi);
        return -(e * ap * g2 + e * e * aa * (g1 * g1 + gv * g2)) / kp;
    }
};

inline VolkovPhase volkov_phase(const VolkovState& vs, const PlaneWavePotential& pw,
                                const PhysicalConstants& consts) {
    return VolkovPhase{volkov_kdotp(vs, pw), minkowski_dot(pw.a, vs.p),
                       minkowski_dot(pw.a, pw.a), consts.e, &pw.profile};
}

inline void add_gauge_phases(const WaveFunctionModel& model, const PhysicalConstants& consts,
                             const FourVector& x, LogDerivatives& out) {
    const complexd mie_over_hbar(0.0, -consts.e / consts.hbar);
    for (const auto& gf : model.gauge_phases()) {
        out.phi *= std::exp(mie_over_hbar * gf.value(x));
        const FourVector grad = gf.gradient_lower(x);
        for (int mu = 0; mu < 4; ++mu) {
            out.dlog[mu] += mie_over_hbar * grad[mu];
            for (int nu = 0; nu < 4; ++nu)
                out.d2log[mu][nu] += mie_over_hbar * gf.hessian_lower(mu, nu);
        }
        // polynomial degree <= 2: third derivatives vanish
    }
}

inline LogDerivatives analytic_log_derivatives(const WaveFunctionModel& model,
                                               const PotentialModel& A, const FourVector& x,
                                               const PhysicalConstants& consts) {
    LogDerivatives out;
    const double hbar = consts.hbar;

    if (const auto* pws = std::get_if<PlaneWaveState>(&model.base())) {
        const FourVector pl = lower(pws->p);
        out.phi = std::exp(complexd(0.0, -minkowski_dot(pws->p, x) / hbar));
        for (int mu = 0; mu < 4; ++mu) out.dlog[mu] = complexd(0.0, -pl[mu] / hbar);
    } else if (const auto* vs = std::get_if<VolkovState>(&model.base())) {
        const auto* pw = A.plane_wave_base();
        if (!pw) throw IncompatiblePair("Volkov state requires a plane-wave potential");
        const VolkovPhase ph = volkov_phase(*vs, *pw, consts);
        const double xi = minkowski_dot(pw->k, x);
        const FourVector pl = lower(vs->p);
        const FourVector kl = lower(pw->k);
        out.phi = std::exp(complexd(0.0, -(minkowski_dot(vs->p, x) + ph.S(xi)) / hbar));
        const double s1 = ph.S1(xi), s2 = ph.S2(xi), s3 = ph.S3(xi);
        for (int mu = 0; mu < 4; ++mu) {
            out.dlog[mu] = complexd(0.0, -(pl[mu] + kl[mu] * s1) / hbar);
            for (int nu = 0; nu < 4; ++nu)
                out.d2log[mu][nu] = complexd(0.0, -kl[mu] * kl[nu] * s2 / hbar);
        }
        const double kk = minkowski_dot(pw->k, pw->k);  // 0 for a null k
        for (int mu = 0; mu < 4; ++mu)
            out.box_dlog[mu] = complexd(0.0, -kl[mu] * kk * s3 / hbar);
    } else {
        const auto& ms = std::get<ModeSumState>(model.base());
        complexd phi = 0.0;
        std::array<complexd, 4> d1{};
        std::array<std::array<complexd, 4>, 4> d2{};
        std::array<complexd, 4> t3{};  // g^{ab} d_a d_b d_mu phi
        for (const auto& mode : ms.modes) {
            const FourVector pl = lower(mode.p);
            const complexd em =
                mode.weight * std::exp(complexd(0.0, -minkowski_dot(mode.p, x) / hbar));
            const complexd mi(0.0, -1.0 / hbar);
            phi += em;
            for (int mu = 0; mu < 4; ++mu) {
                const complexd dmu = mi * pl[mu];
                d1[mu] += dmu * em;
                for (int nu = 0; nu < 4; ++nu) d2[mu][nu] += dmu * mi * pl[nu] * em;
                t3[mu] += dmu * mi * mi * minkowski_dot(mode.p, mode.p) * em;
            }
        }
        out.phi = phi;
        // quotient rules for ln phi, with Minkowski contractions where needed
        std::array<complexd, 4> dl{};
        for (int mu = 0; mu < 4; ++mu) dl[mu] = d1[mu] / phi;
        complexd box_phi = 0.0, grad_sq = 0.0;
        std::array<complexd, 4> grad_dot_hess{};
        for (int a = 0; a < 4; ++a) {
            box_phi += metric_diag[a] * d2[a][a];
            grad_sq += metric_diag[a] * d1[a] * d1[a];
            for (int mu = 0; mu < 4; ++mu) grad_dot_hess[mu] += metric_diag[a] * d1[a] * d2[a][mu];
        }
        for (int mu = 0; mu < 4; ++mu) {
            out.dlog[mu] = dl[mu];
            for (int nu = 0; nu < 4; ++nu) out.d2log[mu][nu] = d2[mu][nu] / phi - dl[mu] * dl[nu];
            out.box_dlog[mu] = t3[mu] / phi -
                               (2.0 * grad_dot_hess[mu] + box_phi * d1[mu]) / (phi * phi) +
                               2.0 * grad_sq * d1[mu] / (phi * phi * phi);
        }
    }

    add_gauge_phases(model, consts, x, out);
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// phi and derived quantities

inline complexd evaluate_phi(const WaveFunctionModel& model, const PotentialModel& A,
                             const FourVector& x, const PhysicalConstants& consts) {
    ensure_compatible(model, A);
    complexd phi;
    if (const auto* pws = std::get_if<PlaneWaveState>(&model.base())) {
        phi = std::exp(complexd(0.0, -minkowski_dot(pws->p, x) / consts.hbar));
    } else if (const auto* vs = std::get_if<VolkovState>(&model.base())) {
        const auto* pw = A.plane_wave_base();
        const auto ph = detail::volkov_phase(*vs, *pw, consts);
        const double xi = minkowski_dot(pw->k, x);
        phi = std::exp(complexd(0.0, -(minkowski_dot(vs->p, x) + ph.S(xi)) / consts.hbar));
    } else {
        const auto& ms = std::get<ModeSumState>(model.base());
        phi = 0.0;
        for (const auto& mode : ms.modes)
            phi += mode.weight * std::exp(complexd(0.0, -minkowski_dot(mode.p, x) / consts.hbar));
    }
    const complexd mie(0.0, -consts.e / consts.hbar);
    for (const auto& gf : model.gauge_phases()) phi *= std::exp(mie * gf.value(x));
    return phi;
}

/// Full derivative bundle; honors the finite-difference strategy.
inline LogDerivatives log_derivatives(const WaveFunctionModel& model, const PotentialModel& A,
                                      const FourVector& x, const PhysicalConstants& consts,
                                      const EvalOptions& opts = {}) {
    ensure_compatible(model, A);
    if (!opts.use_finite_difference)
        return detail::analytic_log_derivatives(model, A, x, consts);

    auto phi_at = [&](const FourVector& y) { return evaluate_phi(model, A, y, consts); };
    const double h = opts.fd_step;
    LogDerivatives out;
    out.phi = phi_at(x);
    std::array<complexd, 4> d1{};
    std::array<std::array<complexd, 4>, 4> d2{};
    for (int mu = 0; mu < 4; ++mu) d1[mu] = fd::d1(phi_at, x, mu, h);
    for (int mu = 0; mu < 4; ++mu)
        for (int nu = mu; nu < 4; ++nu) d2[mu][nu] = d2[nu][mu] = fd::d2(phi_at, x, mu, nu, h);
    std::array<complexd, 4> t3{};
    for (int mu = 0; mu < 4; ++mu)
        for (int a = 0; a < 4; ++a) t3[mu] += metric_diag[a] * fd::d2d1(phi_at, x, a, mu, h);

    const complexd phi = out.phi;
    std::array<complexd, 4> dl{};
    for (int mu = 0; mu < 4; ++mu) dl[mu] = d1[mu] / phi;
    complexd box_phi = 0.0, grad_sq = 0.0;
    std::array<complexd, 4> grad_dot_hess{};
    for (int a = 0; a < 4; ++a) {
        box_phi += metric_diag[a] * d2[a][a];
        grad_sq += metric_diag[a] * d1[a] * d1[a];
        for (int mu = 0; mu < 4; ++mu) grad_dot_hess[mu] += metric_diag[a] * d1[a] * d2[a][mu];
    }
    for (int mu = 0; mu < 4; ++mu) {
        out.dlog[mu] = dl[mu];
        for (int nu = 0; nu < 4; ++nu) out.d2log[mu][nu] = d2[mu][nu] / phi - dl[mu] * dl[nu];
        out.box_dlog[mu] = t3[mu] / phi -
                           (2.0 * grad_dot_hess[mu] + box_phi * d1[mu]) / (phi * phi) +
                           2.0 * grad_sq * d1[mu] / (phi * phi * phi);
    }
    return out;
}

namespace detail {

inline void require_not_node(const complexd& phi, const FourVector& x, const EvalOptions& opts) {
    const double a = std::abs(phi);
    if (a < opts.node_epsilon) throw NodeSingularity(x, a);
}

}  // namespace detail

/// d^alpha ln phi (contravariant). Throws NodeSingularity at nodes.
inline ComplexFourVector grad_ln_phi(const WaveFunctionModel& model, const PotentialModel& A,
                                     const FourVector& x, const PhysicalConstants& consts,
                                     const EvalOptions& opts = {}) {
    const auto ld = log_derivatives(model, A, x, consts, opts);
    detail::require_not_node(ld.phi, x, opts);
    ComplexFourVector g;
    for (int mu = 0; mu < 4; ++mu) g.set(mu, metric_diag[mu] * ld.dlog[mu]);
    return g;
}

/// V^alpha(x) = i lambda^2 d^alpha ln phi + (e/m0) A^alpha
inline ComplexFourVector complex_velocity(const WaveFunctionModel& model, const PotentialModel& A,
                                          const FourVector& x, const PhysicalConstants& consts,
                                          const EvalOptions& opts = {}) {
    const ComplexFourVector g = grad_ln_phi(model, A, x, consts, opts);
    const complexd il2(0.0, consts.lambda_sq());
    ComplexFourVector v = g * il2;
    const FourVector Ax = A.value(x) * (consts.e / consts.m0);
    v.re += Ax;
    return v;
}

struct DriftPair {
    FourVector vplus;
    FourVector vminus;
};

/// Invert V = (1-i)/2 V+ + (1+i)/2 V-  =>  V+ = Re V - Im V, V- = Re V + Im V.
inline DriftPair drift_velocities(const ComplexFourVector& v) {
    return {v.re - v.im, v.re + v.im};
}

/// (i hbar d + e A)^2 phi - m0^2 c^2 phi, evaluated at x.
inline complexd kg_residual(const WaveFunctionModel& model, const PotentialModel& A,
                            const FourVector& x, const PhysicalConstants& consts,
                            const EvalOptions& opts = {}) {
    const auto ld = log_derivatives(model, A, x, consts, opts);
    const double hbar = consts.hbar;
    const FourVector Ax = A.value(x);
    complexd box_log = 0.0, grad_log_sq = 0.0, a_dot_grad = 0.0;
    for (int mu = 0; mu < 4; ++mu) {
        box_log += metric_diag[mu] * ld.d2log[mu][mu];
        grad_log_sq += metric_diag[mu] * ld.dlog[mu] * ld.dlog[mu];
        a_dot_grad += Ax[mu] * ld.dlog[mu];
    }
    const complexd ihe(0.0, hbar * consts.e);
    const complexd op = -hbar * hbar * (box_log + grad_log_sq) + ihe * A.divergence(x) +
                        2.0 * ihe * a_dot_grad + consts.e * consts.e * minkowski_dot(Ax, Ax);
    return (op - consts.mass_shell()) * ld.phi;
}

namespace detail {

struct VelocityDerivatives {
    ComplexFourVector V;                                  // V^mu
    std::array<std::array<complexd, 4>, 4> dV{};          // d_nu V^mu -> [nu][mu]
    ComplexFourVector boxV;                               // box V^mu
};

inline VelocityDerivatives velocity_derivatives(const WaveFunctionModel& model,
                                                const PotentialModel& A, const FourVector& x,
                                                const PhysicalConstants& consts,
                                                const EvalOptions& opts) {
    const auto ld = log_derivatives(model, A, x, consts, opts);
    require_not_node(ld.phi, x, opts);
    const complexd il2(0.0, consts.lambda_sq());
    const double e_over_m = consts.e / consts.m0;

    VelocityDerivatives out;
    const FourVector Ax = A.value(x);
    for (int mu = 0; mu < 4; ++mu)
        out.V.set(mu, il2 * metric_diag[mu] * ld.dlog[mu] + e_over_m * Ax[mu]);

    const auto jacA = A.jacobian(x);
    for (int nu = 0; nu < 4; ++nu)
        for (int mu = 0; mu < 4; ++mu)
            out.dV[nu][mu] = il2 * metric_diag[mu] * ld.d2log[nu][mu] + e_over_m * jacA[nu][mu];

    const FourVector boxA = A.dalembertian(x);
    for (int mu = 0; mu < 4; ++mu)
        out.boxV.set(mu, il2 * metric_diag[mu] * ld.box_dlog[mu] + e_over_m * boxA[mu]);
    return out;
}

}  // namespace detail

/// D_tau V^mu = V^nu d_nu V^mu + (i lambda^2 / 2) box V^mu
inline ComplexFourVector material_derivative_V(const WaveFunctionModel& model,
                                               const PotentialModel& A, const FourVector& x,
                                               const PhysicalConstants& consts,
                                               const EvalOptions& opts = {}) {
    const auto vd = detail::velocity_derivatives(model, A, x, consts, opts);
    const complexd il2_half(0.0, 0.5 * consts.lambda_sq());
    ComplexFourVector r;
    for (int mu = 0; mu < 4; ++mu) {
        complexd s = 0.0;
        for (int nu = 0; nu < 4; ++nu) s += vd.V[nu] * vd.dV[nu][mu];
        r.set(mu, s + il2_half * vd.boxV[mu]);
    }
    return r;
}

/// m0 D_tau V^mu + e [V_nu F^{mu nu} + (i lambda^2/2) d_nu F^{mu nu}];
/// vanishes exactly when phi solves the Klein-Gordon equation (f = 0).
inline ComplexFourVector eom_residual(const WaveFunctionModel& model, const PotentialModel& A,
                                      const FourVector& x, const PhysicalConstants& consts,
                                      const EvalOptions& opts = {}) {
    const ComplexFourVector dtv = material_derivative_V(model, A, x, consts, opts);
    const ComplexFourVector v = complex_velocity(model, A, x, consts, opts);
    const FieldTensor F = A.field_tensor(x);
    const FourVector divF = A.field_tensor_divergence(x);
    const ComplexFourVector vlow = lower(v);
    const complexd il2_half(0.0, 0.5 * consts.lambda_sq());
    ComplexFourVector r;
    for (int mu = 0; mu < 4; ++mu) {
        complexd contraction = 0.0;
        for (int nu = 0; nu < 4; ++nu) contraction += vlow[nu] * F(mu, nu);
        r.set(mu, consts.m0 * dtv[mu] + consts.e * (contraction + il2_half * divF[mu]));
    }
    return r;
}

/// d^alpha V^beta - d^beta V^alpha - (e/m0) F^{alpha beta}; zero for every
/// gradient-plus-potential velocity field.
inline std::array<std::array<complexd, 4>, 4> curl_identity_residual(
    const WaveFunctionModel& model, const PotentialModel& A, const FourVector& x,
    const PhysicalConstants& consts, const EvalOptions& opts = {}) {
    const auto vd = detail::velocity_derivatives(model, A, x, consts, opts);
    const FieldTensor F = A.field_tensor(x);
    const double e_over_m = consts.e / consts.m0;
    std::array<std::array<complexd, 4>, 4> r{};
    for (int al = 0; al < 4; ++al)
        for (int be = 0; be < 4; ++be)
            r[al][be] = metric_diag[al] * vd.dV[al][be] - metric_diag[be] * vd.dV[be][al] -
                        e_over_m * F(al, be);
    return r;
}

}  // namespace skg
