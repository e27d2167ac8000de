#pragma once

// Density estimation over reduced (active) coordinates and residual evaluation
// of the density-level identities: Fokker-Planck (with the wave-operator
// signature in the diffusion term), continuity, and the osmotic relation.
//
// Two derivative routes:
//  - analytic grids carry their generating field and are differentiated with
//    mesh-free central stencils of step h (pure FD error, O(h^2)),
//  - histogram grids are differentiated on the stored bins with the bin
//    spacing as the step.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "skg/spacetime.hpp"
#include "skg/stochastic.hpp"
#include "skg/wavefunction.hpp"

namespace skg {

struct InsufficientSlices : std::invalid_argument {
    explicit InsufficientSlices(const std::string& w) : std::invalid_argument(w) {}
};
struct AllBinsMasked : std::runtime_error {
    explicit AllBinsMasked(const std::string& w) : std::runtime_error(w) {}
};
struct AxesMismatch : std::invalid_argument {
    explicit AxesMismatch(const std::string& w) : std::invalid_argument(w) {}
};

struct AxisSpec {
    int coord = 3;        // spacetime index 0..3
    double lo = 0.0;
    double hi = 1.0;
    std::size_t n_bins = 32;

    double width() const { return (hi - lo) / static_cast<double>(n_bins); }
    double center(std::size_t i) const { return lo + (static_cast<double>(i) + 0.5) * width(); }
};

struct GridAxes {
    std::vector<AxisSpec> axes;

    std::size_t n_cells() const {
        std::size_t n = 1;
        for (const auto& a : axes) n *= a.n_bins;
        return n;
    }
    double cell_volume() const {
        double v = 1.0;
        for (const auto& a : axes) v *= a.width();
        return v;
    }
    /// Multi-index of a flat cell id, row-major in axis order.
    std::vector<std::size_t> unravel(std::size_t cell) const {
        std::vector<std::size_t> idx(axes.size());
        for (std::size_t d = axes.size(); d-- > 0;) {
            idx[d] = cell % axes[d].n_bins;
            cell /= axes[d].n_bins;
        }
        return idx;
    }
    std::size_t ravel(const std::vector<std::size_t>& idx) const {
        std::size_t cell = 0;
        for (std::size_t d = 0; d < axes.size(); ++d) cell = cell * axes[d].n_bins + idx[d];
        return cell;
    }
    /// Flat cell id of a spacetime point, or nullopt when outside the window.
    std::optional<std::size_t> locate(const FourVector& x) const {
        std::size_t cell = 0;
        for (const auto& a : axes) {
            const double t = (x[a.coord] - a.lo) / a.width();
            if (t < 0.0 || t >= static_cast<double>(a.n_bins)) return std::nullopt;
            cell = cell * a.n_bins + static_cast<std::size_t>(t);
        }
        return cell;
    }
    /// Spacetime point at the center of a cell; inactive coordinates are taken
    /// from `base`.
    FourVector point(std::size_t cell, const FourVector& base = {}) const {
        FourVector x = base;
        const auto idx = unravel(cell);
        for (std::size_t d = 0; d < axes.size(); ++d) x[axes[d].coord] = axes[d].center(idx[d]);
        return x;
    }
    bool same_shape(const GridAxes& o) const {
        if (axes.size() != o.axes.size()) return false;
        for (std::size_t d = 0; d < axes.size(); ++d) {
            const auto &a = axes[d], &b = o.axes[d];
            if (a.coord != b.coord || a.n_bins != b.n_bins || std::abs(a.lo - b.lo) > 1e-12 ||
                std::abs(a.hi - b.hi) > 1e-12)
                return false;
        }
        return true;
    }
};

/// Scalar density field p(x, tau) with analytic evaluation when available.
using DensityField = std::function<double(const FourVector&, double)>;

class DensityGrid {
  public:
    enum class Source { histogram, analytic };

    static DensityGrid from_histogram(GridAxes axes, std::vector<double> taus,
                                      std::vector<double> counts, std::vector<double> coverage) {
        DensityGrid g;
        g.axes_ = std::move(axes);
        g.taus_ = std::move(taus);
        g.counts_ = std::move(counts);
        g.coverage_ = std::move(coverage);
        g.source_ = Source::histogram;
        const std::size_t cells = g.axes_.n_cells();
        g.p_.assign(g.counts_.size(), 0.0);
        const double vol = g.axes_.cell_volume();
        for (std::size_t k = 0; k < g.taus_.size(); ++k) {
            double total = 0.0;
            for (std::size_t c = 0; c < cells; ++c) total += g.counts_[k * cells + c];
            if (total <= 0.0) throw std::invalid_argument("DensityGrid: empty histogram slice");
            for (std::size_t c = 0; c < cells; ++c)
                g.p_[k * cells + c] = g.counts_[k * cells + c] / (total * vol);
        }
        return g;
    }

    static DensityGrid from_analytic(GridAxes axes, std::vector<double> taus, DensityField field) {
        DensityGrid g;
        g.axes_ = std::move(axes);
        g.taus_ = std::move(taus);
        g.field_ = std::move(field);
        g.source_ = Source::analytic;
        const std::size_t cells = g.axes_.n_cells();
        g.p_.assign(g.taus_.size() * cells, 0.0);
        const double vol = g.axes_.cell_volume();
        for (std::size_t k = 0; k < g.taus_.size(); ++k) {
            double total = 0.0;
            for (std::size_t c = 0; c < cells; ++c) {
                const double v = g.field_(g.axes_.point(c), g.taus_[k]);
                if (!(v >= 0.0)) throw std::invalid_argument("DensityGrid: negative density");
                g.p_[k * cells + c] = v;
                total += v;
            }
            g.norm_.push_back(total * vol);
            for (std::size_t c = 0; c < cells; ++c) g.p_[k * cells + c] /= (total * vol);
        }
        return g;
    }

    /// Raw values, already laid out [tau][cell]; used by property tests.
    static DensityGrid from_values(GridAxes axes, std::vector<double> taus,
                                   std::vector<double> values) {
        DensityGrid g;
        g.axes_ = std::move(axes);
        g.taus_ = std::move(taus);
        g.p_ = std::move(values);
        g.source_ = Source::histogram;
        if (g.p_.size() != g.taus_.size() * g.axes_.n_cells())
            throw std::invalid_argument("DensityGrid: size mismatch");
        return g;
    }

    const GridAxes& axes() const { return axes_; }
    const std::vector<double>& taus() const { return taus_; }
    Source source() const { return source_; }
    bool has_field() const { return static_cast<bool>(field_); }
    const DensityField& field() const { return field_; }
    const std::vector<double>& values() const { return p_; }
    const std::vector<double>& coverage() const { return coverage_; }

    double at(std::size_t tau_index, std::size_t cell) const {
        return p_[tau_index * axes_.n_cells() + cell];
    }
    double count_at(std::size_t tau_index, std::size_t cell) const {
        return counts_.empty() ? 0.0 : counts_[tau_index * axes_.n_cells() + cell];
    }
    bool has_counts() const { return !counts_.empty(); }

    /// Per-slice normalization integral before rescaling (analytic grids).
    const std::vector<double>& raw_norms() const { return norm_; }

  private:
    GridAxes axes_;
    std::vector<double> taus_;
    std::vector<double> p_;
    std::vector<double> counts_;
    std::vector<double> coverage_;
    std::vector<double> norm_;
    DensityField field_;
    Source source_ = Source::histogram;
};

/// Histogram of one recorded slice.
inline DensityGrid estimate_density(const PathEnsemble& ens, const GridAxes& axes,
                                    std::size_t tau_index, double* coverage_out = nullptr) {
    if (ens.n_paths() == 0) throw std::invalid_argument("estimate_density: empty ensemble");
    const std::size_t cells = axes.n_cells();
    std::vector<double> counts(cells, 0.0);
    std::size_t inside = 0;
    for (std::size_t i = 0; i < ens.n_paths(); ++i) {
        if (auto c = axes.locate(ens.at(i, tau_index))) {
            counts[*c] += 1.0;
            ++inside;
        }
    }
    const double cov = static_cast<double>(inside) / static_cast<double>(ens.n_paths());
    if (coverage_out) *coverage_out = cov;
    return DensityGrid::from_histogram(axes, {ens.tau_grid()[tau_index]}, std::move(counts),
                                       {cov});
}

/// Histogram over every recorded slice (shared axes).
inline DensityGrid estimate_density_series(const PathEnsemble& ens, const GridAxes& axes) {
    if (ens.n_paths() == 0) throw std::invalid_argument("estimate_density: empty ensemble");
    const std::size_t cells = axes.n_cells();
    const std::size_t ns = ens.n_slices();
    std::vector<double> counts(cells * ns, 0.0);
    std::vector<double> coverage(ns, 0.0);
    for (std::size_t k = 0; k < ns; ++k) {
        std::size_t inside = 0;
        for (std::size_t i = 0; i < ens.n_paths(); ++i) {
            if (auto c = axes.locate(ens.at(i, k))) {
                counts[k * cells + *c] += 1.0;
                ++inside;
            }
        }
        coverage[k] = static_cast<double>(inside) / static_cast<double>(ens.n_paths());
    }
    return DensityGrid::from_histogram(axes, ens.tau_grid(), std::move(counts),
                                       std::move(coverage));
}

/// phi* phi on the window, normalized over it.
inline DensityGrid analytic_density(const WaveFunctionModel& model, const PotentialModel& A,
                                    const PhysicalConstants& consts, const GridAxes& axes,
                                    std::vector<double> taus = {0.0}) {
    DensityField f = [&model, &A, consts](const FourVector& x, double) {
        return std::norm(evaluate_phi(model, A, x, consts));
    };
    return DensityGrid::from_analytic(axes, std::move(taus), std::move(f));
}

// ---------------------------------------------------------------------------
// Residual operations

struct ResidualOptions {
    double h = 1e-3;            // mesh-free stencil step for analytic grids
    double tolerance = 1e-4;    // pass when rms <= tolerance * scale
    double absolute_floor = 1e-9;  // pass floor for identically-vanishing terms
    std::size_t min_count = 8;  // histogram bins below this are masked in log ops
    double smoothing = 0.5;     // additive smoothing for ln p on histograms
};

struct ResidualReport {
    std::string name;
    double rms_residual = 0.0;
    double max_residual = 0.0;
    double scale = 0.0;  // RMS of the dominant term
    double tolerance = 0.0;
    std::string basis;  // "machine" | "fd-error" | "bootstrap-se"
    bool pass = false;
    std::vector<double> residuals;  // per evaluated (slice, cell [, component])
    std::size_t n_masked = 0;
};

using VectorField = std::function<FourVector(const FourVector&)>;

namespace detail {

struct TermAccumulator {
    double sum_sq_res = 0.0, max_abs = 0.0;
    std::vector<double> dominant_sq;  // per term
    std::size_t n = 0;

    void add(double residual, const std::vector<double>& terms) {
        sum_sq_res += residual * residual;
        max_abs = std::max(max_abs, std::abs(residual));
        if (dominant_sq.size() < terms.size()) dominant_sq.resize(terms.size(), 0.0);
        for (std::size_t i = 0; i < terms.size(); ++i) dominant_sq[i] += terms[i] * terms[i];
        ++n;
    }
    void finish(ResidualReport& r) const {
        if (n == 0) return;
        r.rms_residual = std::sqrt(sum_sq_res / static_cast<double>(n));
        r.max_residual = max_abs;
        double m = 0.0;
        for (double t : dominant_sq) m = std::max(m, t);
        r.scale = std::sqrt(m / static_cast<double>(n));
    }
};

/// Central differences of a scalar field sampled on the grid (histograms).
struct GridStencil {
    const DensityGrid& g;
    std::size_t tau_index;

    double p(const std::vector<std::size_t>& idx) const {
        return g.at(tau_index, g.axes().ravel(idx));
    }
    double d1(const std::vector<std::size_t>& idx, std::size_t d) const {
        auto a = idx, b = idx;
        ++a[d];
        --b[d];
        return (p(a) - p(b)) / (2.0 * g.axes().axes[d].width());
    }
    double d2(const std::vector<std::size_t>& idx, std::size_t d) const {
        auto a = idx, b = idx;
        ++a[d];
        --b[d];
        const double w = g.axes().axes[d].width();
        return (p(a) - 2.0 * p(idx) + p(b)) / (w * w);
    }
    double dtau(const std::vector<std::size_t>& idx) const {
        const std::size_t cells = g.axes().n_cells();
        const std::size_t c = g.axes().ravel(idx);
        const double dt = g.taus()[1] - g.taus()[0];
        return (g.values()[(tau_index + 1) * cells + c] -
                g.values()[(tau_index - 1) * cells + c]) /
               (2.0 * dt);
    }
};

inline bool interior(const GridAxes& axes, const std::vector<std::size_t>& idx) {
    for (std::size_t d = 0; d < axes.axes.size(); ++d)
        if (idx[d] == 0 || idx[d] + 1 >= axes.axes[d].n_bins) return false;
    return true;
}

template <class Fn>
inline void for_each_interior(const GridAxes& axes, const Fn& fn) {
    const std::size_t cells = axes.n_cells();
    for (std::size_t c = 0; c < cells; ++c) {
        const auto idx = axes.unravel(c);
        if (interior(axes, idx)) fn(c, idx);
    }
}

}  // namespace detail

/// d_tau p + d_mu[V^mu p] +- (lambda^2/2) d^mu d_mu p over the active
/// coordinates. The diffusion term carries the wave-operator signature: the
/// time second derivative enters with the opposite sign to the spatial ones.
inline ResidualReport fokker_planck_residual(const DensityGrid& grid, const VectorField& drift,
                                             double lambda, int sign,
                                             const ResidualOptions& opts = {}) {
    if (grid.taus().size() < 3)
        throw InsufficientSlices("fokker_planck_residual: need >= 3 tau slices");
    if (sign != +1 && sign != -1)
        throw std::invalid_argument("fokker_planck_residual: sign must be +1 or -1");

    ResidualReport rep;
    rep.name = sign > 0 ? "fokker_planck_plus" : "fokker_planck_minus";
    rep.tolerance = opts.tolerance;
    detail::TermAccumulator acc;
    const auto& axes = grid.axes();
    const double half_l2 = 0.5 * lambda * lambda * static_cast<double>(sign);

    // The scale includes the product-rule pieces (dV)p and V dp separately:
    // stationary scenarios can have a constant flux, where the divergence
    // term vanishes identically and would not anchor a relative tolerance.
    if (grid.has_field()) {
        rep.basis = "fd-error";
        const auto& f = grid.field();
        const double h = opts.h;
        for (std::size_t k = 1; k + 1 < grid.taus().size(); ++k) {
            const double tau = grid.taus()[k];
            const double dtau_step = grid.taus()[1] - grid.taus()[0];
            detail::for_each_interior(axes, [&](std::size_t c, const std::vector<std::size_t>&) {
                const FourVector x = axes.point(c);
                const double dpdtau =
                    (f(x, tau + dtau_step) - f(x, tau - dtau_step)) / (2.0 * dtau_step);
                double div = 0.0, diff = 0.0, dv_p = 0.0, v_dp = 0.0;
                const double p0 = f(x, tau);
                const FourVector v0 = drift(x);
                for (const auto& ax : axes.axes) {
                    auto xp = x, xm = x;
                    xp[ax.coord] += h;
                    xm[ax.coord] -= h;
                    const double fp = f(xp, tau), fm = f(xm, tau);
                    const double vp = drift(xp)[ax.coord], vm = drift(xm)[ax.coord];
                    div += (vp * fp - vm * fm) / (2.0 * h);
                    dv_p += (vp - vm) / (2.0 * h) * p0;
                    v_dp += v0[ax.coord] * (fp - fm) / (2.0 * h);
                    diff += half_l2 * metric_diag[ax.coord] * (fp - 2.0 * p0 + fm) / (h * h);
                }
                const double r = dpdtau + div + diff;
                acc.add(r, {dpdtau, dv_p, v_dp, diff});
                rep.residuals.push_back(r);
            });
        }
    } else {
        rep.basis = "bootstrap-se";
        for (std::size_t k = 1; k + 1 < grid.taus().size(); ++k) {
            detail::GridStencil st{grid, k};
            detail::for_each_interior(axes, [&](std::size_t c, const std::vector<std::size_t>& idx) {
                const double dpdtau = st.dtau(idx);
                double div = 0.0, diff = 0.0, dv_p = 0.0, v_dp = 0.0;
                const double p0 = st.p(idx);
                const FourVector v0 = drift(axes.point(c));
                for (std::size_t d = 0; d < axes.axes.size(); ++d) {
                    const int coord = axes.axes[d].coord;
                    auto a = idx, b = idx;
                    ++a[d];
                    --b[d];
                    const double w2 = 2.0 * axes.axes[d].width();
                    const double vp = drift(axes.point(axes.ravel(a)))[coord];
                    const double vm = drift(axes.point(axes.ravel(b)))[coord];
                    div += (vp * st.p(a) - vm * st.p(b)) / w2;
                    dv_p += (vp - vm) / w2 * p0;
                    v_dp += v0[coord] * st.d1(idx, d);
                    diff += half_l2 * metric_diag[coord] * st.d2(idx, d);
                }
                const double r = dpdtau + div + diff;
                acc.add(r, {dpdtau, dv_p, v_dp, diff});
                rep.residuals.push_back(r);
            });
        }
    }
    acc.finish(rep);
    rep.pass = rep.rms_residual <= std::max(rep.tolerance * rep.scale, opts.absolute_floor);
    return rep;
}

/// d_tau p + d_mu[Re{V^mu} p] without the diffusion term.
inline ResidualReport continuity_residual(const DensityGrid& grid, const VectorField& re_v,
                                          const ResidualOptions& opts = {}) {
    if (grid.taus().size() < 3)
        throw InsufficientSlices("continuity_residual: need >= 3 tau slices");
    ResidualReport rep;
    rep.name = "continuity";
    rep.tolerance = opts.tolerance;
    detail::TermAccumulator acc;
    const auto& axes = grid.axes();

    if (grid.has_field()) {
        rep.basis = "fd-error";
        const auto& f = grid.field();
        const double h = opts.h;
        for (std::size_t k = 1; k + 1 < grid.taus().size(); ++k) {
            const double tau = grid.taus()[k];
            const double dts = grid.taus()[1] - grid.taus()[0];
            detail::for_each_interior(axes, [&](std::size_t c, const std::vector<std::size_t>&) {
                const FourVector x = axes.point(c);
                const double dpdtau = (f(x, tau + dts) - f(x, tau - dts)) / (2.0 * dts);
                double div = 0.0, dv_p = 0.0, v_dp = 0.0;
                const double p0 = f(x, tau);
                const FourVector v0 = re_v(x);
                for (const auto& ax : axes.axes) {
                    auto xp = x, xm = x;
                    xp[ax.coord] += h;
                    xm[ax.coord] -= h;
                    const double fp = f(xp, tau), fm = f(xm, tau);
                    const double vp = re_v(xp)[ax.coord], vm = re_v(xm)[ax.coord];
                    div += (vp * fp - vm * fm) / (2.0 * h);
                    dv_p += (vp - vm) / (2.0 * h) * p0;
                    v_dp += v0[ax.coord] * (fp - fm) / (2.0 * h);
                }
                const double r = dpdtau + div;
                acc.add(r, {dpdtau, dv_p, v_dp});
                rep.residuals.push_back(r);
            });
        }
    } else {
        rep.basis = "bootstrap-se";
        for (std::size_t k = 1; k + 1 < grid.taus().size(); ++k) {
            detail::GridStencil st{grid, k};
            detail::for_each_interior(axes, [&](std::size_t c, const std::vector<std::size_t>& idx) {
                const double dpdtau = st.dtau(idx);
                double div = 0.0, dv_p = 0.0, v_dp = 0.0;
                const double p0 = st.p(idx);
                const FourVector v0 = re_v(axes.point(c));
                for (std::size_t d = 0; d < axes.axes.size(); ++d) {
                    const int coord = axes.axes[d].coord;
                    auto a = idx, b = idx;
                    ++a[d];
                    --b[d];
                    const double w2 = 2.0 * axes.axes[d].width();
                    const double vp = re_v(axes.point(axes.ravel(a)))[coord];
                    const double vm = re_v(axes.point(axes.ravel(b)))[coord];
                    div += (vp * st.p(a) - vm * st.p(b)) / w2;
                    dv_p += (vp - vm) / w2 * p0;
                    v_dp += v0[coord] * st.d1(idx, d);
                }
                const double r = dpdtau + div;
                acc.add(r, {dpdtau, dv_p, v_dp});
                rep.residuals.push_back(r);
            });
        }
    }
    acc.finish(rep);
    rep.pass = rep.rms_residual <= std::max(rep.tolerance * rep.scale, opts.absolute_floor);
    return rep;
}

/// Im{V^mu} - (lambda^2/2) d^mu ln p, per active component over unmasked bins.
/// mask_from, when given, supplies the count-based masking decisions so two
/// grids can be compared bin-for-bin.
inline ResidualReport osmotic_residual(const DensityGrid& grid, const VectorField& im_v,
                                       double lambda, const ResidualOptions& opts = {},
                                       const DensityGrid* mask_from = nullptr) {
    ResidualReport rep;
    rep.name = "osmotic";
    rep.tolerance = opts.tolerance;
    rep.basis = grid.has_field() ? "fd-error" : "bootstrap-se";
    detail::TermAccumulator acc;
    const auto& axes = grid.axes();
    const double half_l2 = 0.5 * lambda * lambda;
    std::size_t evaluated = 0;
    const DensityGrid& masker = mask_from ? *mask_from : grid;

    for (std::size_t k = 0; k < grid.taus().size(); ++k) {
        const double tau = grid.taus()[k];
        detail::for_each_interior(axes, [&](std::size_t c, const std::vector<std::size_t>& idx) {
            if (masker.has_counts()) {
                // mask bins whose stencil touches under-populated cells
                for (std::size_t d = 0; d < axes.axes.size(); ++d) {
                    auto a = idx, b = idx;
                    ++a[d];
                    --b[d];
                    if (masker.count_at(k, axes.ravel(a)) < opts.min_count ||
                        masker.count_at(k, axes.ravel(b)) < opts.min_count ||
                        masker.count_at(k, c) < opts.min_count) {
                        ++rep.n_masked;
                        return;
                    }
                }
            } else if (grid.at(k, c) <= 0.0) {
                ++rep.n_masked;
                return;
            }
            const FourVector x = axes.point(c);
            const FourVector iv = im_v(x);
            for (std::size_t d = 0; d < axes.axes.size(); ++d) {
                const int coord = axes.axes[d].coord;
                double dlnp;
                if (grid.has_field()) {
                    auto xp = x, xm = x;
                    xp[coord] += opts.h;
                    xm[coord] -= opts.h;
                    dlnp = (std::log(grid.field()(xp, tau)) - std::log(grid.field()(xm, tau))) /
                           (2.0 * opts.h);
                } else {
                    auto a = idx, b = idx;
                    ++a[d];
                    --b[d];
                    const double sm = opts.smoothing;
                    const double pa = grid.has_counts() ? grid.count_at(k, axes.ravel(a)) + sm
                                                        : grid.at(k, axes.ravel(a));
                    const double pb = grid.has_counts() ? grid.count_at(k, axes.ravel(b)) + sm
                                                        : grid.at(k, axes.ravel(b));
                    dlnp = std::log(pa / pb) / (2.0 * axes.axes[d].width());
                }
                const double target = half_l2 * metric_diag[coord] * dlnp;  // d^mu ln p
                const double r = iv[coord] - target;
                acc.add(r, {iv[coord], target});
                rep.residuals.push_back(r);
                ++evaluated;
            }
        });
    }
    if (evaluated == 0) throw AllBinsMasked("osmotic_residual: every bin masked");
    acc.finish(rep);
    // pure-phase models have both sides identically zero; the absolute floor
    // keeps the comparison meaningful there
    rep.pass = rep.rms_residual <= std::max(rep.tolerance * rep.scale, opts.absolute_floor);
    return rep;
}

/// Mean over slices of the L1 distance between two grids on the same axes.
inline double l1_distance(const DensityGrid& a, const DensityGrid& b) {
    if (!a.axes().same_shape(b.axes()) || a.taus().size() != b.taus().size())
        throw AxesMismatch("l1_distance: incompatible grids");
    const std::size_t cells = a.axes().n_cells();
    const double vol = a.axes().cell_volume();
    double total = 0.0;
    for (std::size_t k = 0; k < a.taus().size(); ++k) {
        for (std::size_t c = 0; c < cells; ++c) total += std::abs(a.at(k, c) - b.at(k, c)) * vol;
    }
    return total / static_cast<double>(a.taus().size());
}

}  // namespace skg
