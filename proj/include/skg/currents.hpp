#pragma once

// Four-current fields: the path-ensemble estimate j_stochastic (weighted
// histogram of -e c Re V at the samples) and the analytic Klein-Gordon
// current j_KG = -(i e c lambda^2 / 2) g^{mu nu} [phi* D_nu phi - phi D*_nu phi*],
// plus the proportionality fit between them and charge conservation.

#include <cstdint>
#include <string>
#include <vector>

#include "skg/checks.hpp"
#include "skg/density.hpp"
#include "skg/spacetime.hpp"
#include "skg/stochastic.hpp"
#include "skg/wavefunction.hpp"

namespace skg {

struct CurrentField {
    GridAxes axes;
    std::vector<FourVector> j;        // per cell
    std::vector<double> samples;      // per cell (histogram fields; empty for analytic)
    std::string kind;                 // "stochastic" | "kg"
    double normalization = 1.0;       // recorded weight convention

    // kept when requested: one record per in-window sample, for bootstrapping
    struct SampleRecord {
        std::uint32_t path;
        std::uint32_t cell;
        float w[4];
    };
    std::vector<SampleRecord> records;
    std::size_t n_paths = 0;
};

/// Histogram over all (path, slice) samples weighted by -e c Re V^mu.
/// Normalization: sum over samples of w * dtau / (n_paths * cellvolume),
/// the discretized E[-ec Int dtau Re V delta^4].
inline CurrentField compute_j_stochastic(const PathEnsemble& ens, const WaveFunctionModel& model,
                                         const PotentialModel& A, const PhysicalConstants& consts,
                                         const GridAxes& axes, bool keep_records = false,
                                         const EvalOptions& opts = {}) {
    CurrentField out;
    out.axes = axes;
    out.kind = "stochastic";
    out.n_paths = ens.n_paths();
    const std::size_t cells = axes.n_cells();
    out.j.assign(cells, FourVector{});
    out.samples.assign(cells, 0.0);
    const double w_norm = ens.recorded_dtau() /
                          (static_cast<double>(ens.n_paths()) * axes.cell_volume());
    out.normalization = w_norm;
    const double ec = consts.e * consts.c;
    for (std::size_t i = 0; i < ens.n_paths(); ++i) {
        for (std::size_t k = 0; k < ens.n_slices(); ++k) {
            const FourVector& x = ens.at(i, k);
            const auto cell = axes.locate(x);
            if (!cell) continue;
            const auto v = complex_velocity(model, A, x, consts, opts);
            FourVector w;
            for (int mu = 0; mu < 4; ++mu) w[mu] = -ec * v.re[mu];
            out.j[*cell] += w * w_norm;
            out.samples[*cell] += 1.0;
            if (keep_records) {
                CurrentField::SampleRecord r;
                r.path = static_cast<std::uint32_t>(i);
                r.cell = static_cast<std::uint32_t>(*cell);
                for (int mu = 0; mu < 4; ++mu) r.w[mu] = static_cast<float>(w[mu]);
                out.records.push_back(r);
            }
        }
    }
    return out;
}

/// Analytic grid evaluation of the Klein-Gordon current.
inline CurrentField compute_j_kg(const WaveFunctionModel& model, const PotentialModel& A,
                                 const PhysicalConstants& consts, const GridAxes& axes,
                                 const EvalOptions& opts = {}) {
    CurrentField out;
    out.axes = axes;
    out.kind = "kg";
    const std::size_t cells = axes.n_cells();
    out.j.assign(cells, FourVector{});
    const double pref = consts.e * consts.c * consts.lambda_sq();
    for (std::size_t c = 0; c < cells; ++c) {
        const FourVector x = axes.point(c);
        const auto ld = log_derivatives(model, A, x, consts, opts);
        const double dens = std::norm(ld.phi);
        const FourVector Ax = A.value(x);
        // phi* D_nu phi - phi D*_nu phi* = |phi|^2 [2i Im dlog_nu - 2i e A_nu / hbar]
        for (int mu = 0; mu < 4; ++mu) {
            const double a_low = metric_diag[mu] * Ax[mu];
            out.j[c][mu] = pref * dens * metric_diag[mu] *
                           (ld.dlog[mu].imag() - consts.e * a_low / consts.hbar);
        }
    }
    return out;
}

/// Least-squares proportionality fit of js against jkg over populated interior
/// bins, then the relative L2 deviation of the fit.
inline CheckReport current_equivalence_check(const CurrentField& js, const CurrentField& jkg,
                                             double tolerance = 0.05,
                                             std::size_t min_samples = 32) {
    if (!js.axes.same_shape(jkg.axes))
        throw AxesMismatch("current_equivalence_check: different axes");
    CheckReport rep;
    rep.name = "current_equivalence";
    rep.target = 0.0;
    rep.tolerance = tolerance;
    rep.tolerance_basis = "bootstrap-se";

    const auto& axes = js.axes;
    double num = 0.0, den = 0.0;
    std::size_t used = 0;
    detail::for_each_interior(axes, [&](std::size_t c, const std::vector<std::size_t>&) {
        if (!js.samples.empty() && js.samples[c] < static_cast<double>(min_samples)) return;
        for (int mu = 0; mu < 4; ++mu) {
            num += js.j[c][mu] * jkg.j[c][mu];
            den += jkg.j[c][mu] * jkg.j[c][mu];
        }
        ++used;
    });
    if (used == 0 || den == 0.0)
        throw std::runtime_error("current_equivalence_check: no usable bins");
    const double fit = num / den;

    double dev2 = 0.0, ref2 = 0.0;
    detail::for_each_interior(axes, [&](std::size_t c, const std::vector<std::size_t>&) {
        if (!js.samples.empty() && js.samples[c] < static_cast<double>(min_samples)) return;
        for (int mu = 0; mu < 4; ++mu) {
            const double d = js.j[c][mu] - fit * jkg.j[c][mu];
            dev2 += d * d;
            ref2 += fit * jkg.j[c][mu] * fit * jkg.j[c][mu];
        }
    });
    rep.measured = std::sqrt(dev2 / ref2);
    rep.details["fit_constant"] = fit;
    rep.details["bins_used"] = static_cast<double>(used);
    rep.pass = rep.measured <= tolerance;
    return rep;
}

/// RMS of d_mu j^mu over interior bins, relative to the term scale.
/// Histogram fields get a bootstrap standard-error budget when sample records
/// are available.
inline CheckReport charge_conservation_check(const CurrentField& j, double tolerance = 1e-4,
                                             std::uint64_t bootstrap_seed = 0,
                                             std::size_t n_resamples = kBootstrapResamples) {
    CheckReport rep;
    rep.name = "charge_conservation";
    rep.target = 0.0;
    rep.tolerance = tolerance;
    const auto& axes = j.axes;

    auto divergence_field = [&](const std::vector<FourVector>& field,
                                std::vector<double>& div, std::vector<double>& scale_terms) {
        div.clear();
        scale_terms.clear();
        detail::for_each_interior(axes, [&](std::size_t, const std::vector<std::size_t>& idx) {
            double s = 0.0, terms = 0.0;
            for (std::size_t d = 0; d < axes.axes.size(); ++d) {
                const int coord = axes.axes[d].coord;
                auto a = idx, b = idx;
                ++a[d];
                --b[d];
                const double t = (field[axes.ravel(a)][coord] - field[axes.ravel(b)][coord]) /
                                 (2.0 * axes.axes[d].width());
                s += t;
                terms = std::max(terms, std::abs(t));
                // product-rule anchor: |j| / axis extent, so exactly-constant
                // flux components still yield a usable scale
                const double mag = std::abs(field[axes.ravel(a)][coord]) +
                                   std::abs(field[axes.ravel(b)][coord]);
                terms = std::max(terms, 0.5 * mag / (axes.axes[d].hi - axes.axes[d].lo));
            }
            div.push_back(s);
            scale_terms.push_back(terms);
        });
    };

    std::vector<double> div, scale_terms;
    divergence_field(j.j, div, scale_terms);
    double rms = 0.0, scale = 0.0, maxabs = 0.0;
    for (std::size_t i = 0; i < div.size(); ++i) {
        rms += div[i] * div[i];
        scale += scale_terms[i] * scale_terms[i];
        maxabs = std::max(maxabs, std::abs(div[i]));
    }
    rms = std::sqrt(rms / static_cast<double>(div.size()));
    scale = std::sqrt(scale / static_cast<double>(div.size()));
    rep.measured = scale > 0.0 ? rms / scale : rms;
    rep.details["rms_divergence"] = rms;
    rep.details["max_divergence"] = maxabs;
    rep.details["scale"] = scale;

    if (j.records.empty()) {
        rep.tolerance_basis = "fd-error";
        rep.pass = rms <= tolerance * scale + 1e-12;
        return rep;
    }

    // bootstrap the divergence field over paths and compare bin-wise
    rep.tolerance_basis = "bootstrap-se";
    const std::size_t cells = axes.n_cells();
    const std::size_t nb = div.size();
    std::vector<double> sum(nb, 0.0), sum2(nb, 0.0);
    std::vector<std::uint32_t> weights(j.n_paths);
    std::vector<FourVector> field(cells);
    RngStream rng(bootstrap_seed, StreamPurpose::bootstrap, 1);
    std::vector<double> rdiv, rterms;
    for (std::size_t r = 0; r < n_resamples; ++r) {
        std::fill(weights.begin(), weights.end(), 0);
        for (std::size_t i = 0; i < j.n_paths; ++i)
            ++weights[rng.uniform_below(j.n_paths)];
        std::fill(field.begin(), field.end(), FourVector{});
        for (const auto& rec : j.records) {
            const double w = static_cast<double>(weights[rec.path]) * j.normalization;
            for (int mu = 0; mu < 4; ++mu) field[rec.cell][mu] += w * rec.w[mu];
        }
        divergence_field(field, rdiv, rterms);
        for (std::size_t i = 0; i < nb; ++i) {
            sum[i] += rdiv[i];
            sum2[i] += rdiv[i] * rdiv[i];
        }
    }
    double chi2 = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < nb; ++i) {
        const double mu = sum[i] / static_cast<double>(n_resamples);
        const double var = std::max(0.0, sum2[i] / static_cast<double>(n_resamples) - mu * mu);
        if (var <= 0.0) continue;
        chi2 += div[i] * div[i] / var;
        ++used;
    }
    const double chi2_red = chi2 / static_cast<double>(used);
    const double chi2_limit = 1.0 + 3.0 * std::sqrt(2.0 / static_cast<double>(used));
    rep.details["chi2_reduced"] = chi2_red;
    rep.details["chi2_limit"] = chi2_limit;
    rep.details["bins_used"] = static_cast<double>(used);
    rep.measured = chi2_red;
    rep.tolerance = chi2_limit;
    rep.pass = chi2_red <= chi2_limit;
    return rep;
}

}  // namespace skg
