// Acceptance suite: runs the builtin scenarios at their production sizes and
// prints one pass/fail line per criterion. Exit status is nonzero when any
// criterion fails.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "skg/runner.hpp"

using namespace skg;

namespace {

int g_failures = 0;

void line(int n, bool pass, const std::string& what, const std::string& evidence) {
    std::printf("%s criterion %2d: %s  [%s]\n", pass ? "PASS" : "FAIL", n, what.c_str(),
                evidence.c_str());
    if (!pass) ++g_failures;
}

struct ReportSet {
    std::vector<CheckReport> reports;

    const CheckReport* find(const std::string& name) const {
        for (const auto& r : reports)
            if (r.name == name) return &r;
        return nullptr;
    }
    std::vector<const CheckReport*> find_all(const std::string& prefix) const {
        std::vector<const CheckReport*> out;
        for (const auto& r : reports)
            if (r.name.rfind(prefix, 0) == 0) out.push_back(&r);
        return out;
    }
};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

}  // namespace

int main() {
    namespace fs = std::filesystem;
    const fs::path outbase = fs::temp_directory_path() / "skg_acceptance";
    fs::remove_all(outbase);

    std::map<std::string, ReportSet> sets;
    for (const auto& id : builtin_scenario_ids()) {
        auto cfg = builtin_scenario(id);
        cfg.output_directory = (outbase / id).string();
        std::printf("-- running scenario %s (%zu paths)\n", id.c_str(), cfg.n_paths);
        std::fflush(stdout);
        const auto res = run_scenario(cfg);
        sets[id].reports = res.reports;
    }
    const auto& pw = sets["plane_wave"];
    const auto& ms = sets["mode_sum_stationary"];
    const auto& vk = sets["volkov_plane_wave_field"];
    const auto& off = sets["negative_control_offshell"];
    const auto& scaled = sets["negative_control_scaled_drift"];

    // 1. Wiener increment law
    {
        const auto* r = pw.find("wiener_law");
        const bool ok = r && r->pass && r->details.at("n_increments") >= 1e5;
        line(1, ok, "pooled increment covariance within 5% of identity, means within 5 SE",
             r ? "worst dev " + num(r->measured) + " over " +
                     num(r->details.at("n_increments")) + " increments"
               : "missing");
    }
    // 2. Lorentz invariant
    {
        const auto* a = pw.find("lorentz_invariant");
        const auto* b = vk.find("lorentz_invariant");
        const auto* c = ms.find("lorentz_invariant");
        const bool exact = a && a->pass && b && b->pass &&
                           std::abs(a->measured - 1.0) <= 1e-10 &&
                           std::abs(b->measured - 1.0) <= 1e-10;
        const bool mc = c && c->pass && c->details.at("samples") >= 1e6;
        line(2, exact && mc, "E[V*.V] = c^2: exact for pure phases, 3 SE for the mode sum",
             "pw " + num(a ? a->measured : 0) + ", volkov " + num(b ? b->measured : 0) +
                 ", mode_sum " + num(c ? c->measured : 0) + " +- " +
                 num(c ? c->standard_error : 0));
    }
    // 3. Osmotic relation
    {
        const auto* an = ms.find("osmotic_analytic");
        const auto* hi = ms.find("osmotic_histogram");
        const auto cfg = builtin_scenario("mode_sum_stationary");
        const auto model = cfg.build_model();
        const auto pot = cfg.build_potential();
        const auto consts = cfg.constants();
        GridAxes axes{{AxisSpec{0, cfg.t_min, cfg.t_max, cfg.t_bins},
                       AxisSpec{3, cfg.z_min, cfg.z_max, cfg.z_bins}}};
        const auto grid = analytic_density(model, pot, consts, axes);
        VectorField imv = [&](const FourVector& x) {
            return complex_velocity(model, pot, x, consts).im;
        };
        ResidualOptions o1, o2;
        o1.h = 2e-3;
        o2.h = 1e-3;
        const double ratio = osmotic_residual(grid, imv, consts.lambda, o1).rms_residual /
                             osmotic_residual(grid, imv, consts.lambda, o2).rms_residual;
        const bool ok = an && an->pass && hi && hi->pass && ratio > 3.0 && ratio < 5.0;
        line(3, ok, "osmotic relation: analytic residual at FD error with O(h^2) decay + MC",
             "rms/scale " + num(an ? an->measured / an->details.at("scale") : 0) + ", h-ratio " +
                 num(ratio) + ", chi2 " + num(hi ? hi->measured : 0) + " <= " +
                 num(hi ? hi->tolerance : 0));
    }
    // 4. Fokker-Planck and continuity, with negative controls
    {
        const auto* fa = ms.find("fokker_planck_analytic");
        const auto* ca = ms.find("continuity_analytic");
        const auto* fh = ms.find("fokker_planck_histogram");
        const auto* ch = ms.find("continuity_histogram");
        const auto* nf = scaled.find("fokker_planck_analytic");
        const auto* nc = scaled.find("continuity_analytic");
        const auto* no = scaled.find("osmotic_analytic");
        auto rejected = [](const CheckReport* r) {
            return r && !r->pass &&
                   r->measured >= 10.0 * r->tolerance * std::max(r->details.at("scale"), 0.0);
        };
        const auto cfg = builtin_scenario("mode_sum_stationary");
        const auto model = cfg.build_model();
        const auto pot = cfg.build_potential();
        const auto consts = cfg.constants();
        GridAxes axes{{AxisSpec{0, cfg.t_min, cfg.t_max, cfg.t_bins},
                       AxisSpec{3, cfg.z_min, cfg.z_max, cfg.z_bins}}};
        const double dt = cfg.dtau * cfg.record_every;
        const auto grid = analytic_density(model, pot, consts, axes, {0.0, dt, 2.0 * dt});
        VectorField vp = [&](const FourVector& x) {
            return drift_velocities(complex_velocity(model, pot, x, consts)).vplus;
        };
        ResidualOptions o1, o2;
        o1.h = 2e-3;
        o2.h = 1e-3;
        const double ratio =
            fokker_planck_residual(grid, vp, consts.lambda, +1, o1).rms_residual /
            fokker_planck_residual(grid, vp, consts.lambda, +1, o2).rms_residual;
        const bool ok = fa && fa->pass && ca && ca->pass && fh && fh->pass && ch && ch->pass &&
                        ratio > 3.0 && ratio < 5.0 && rejected(nf) && rejected(nc) &&
                        rejected(no);
        line(4, ok,
             "Fokker-Planck + continuity: analytic <= 1e-4 scale, O(h^2), controls >= 10x",
             "fp rms/scale " + num(fa ? fa->measured / fa->details.at("scale") : 0) +
                 ", h-ratio " + num(ratio) + ", control ratio " +
                 num(nf ? nf->measured / (nf->tolerance * nf->details.at("scale")) : 0));
    }
    // 5. KG <-> EOM equivalence
    {
        const auto* a = pw.find("eom_points");
        const auto* b = ms.find("eom_points");
        const auto* c = vk.find("eom_points");
        const auto* idn = off.find("eom_identity");
        const auto* bad_kg = off.find("kg_points");
        const auto* bad_eom = off.find("eom_points");
        const bool ok = a && a->pass && b && b->pass && c && c->pass && idn && idn->pass &&
                        bad_kg && !bad_kg->pass && bad_eom && !bad_eom->pass;
        line(5, ok, "eom_residual <= 1e-5 on the catalog; off-shell matches the KG gradient",
             "worst " + num(std::max({a ? a->measured : 1.0, b ? b->measured : 1.0,
                                      c ? c->measured : 1.0})) +
                 ", identity rel dev " + num(idn ? idn->measured : 1.0));
    }
    // 6. Curl identity
    {
        const auto* a = pw.find("curl_identity");
        const auto* b = ms.find("curl_identity");
        const auto* c = vk.find("curl_identity");
        const bool ok = a && a->pass && b && b->pass && c && c->pass;
        line(6, ok, "d^a V^b - d^b V^a = (e/m0) F^{ab} within 1e-6 entrywise",
             "worst " + num(std::max({a ? a->measured : 1.0, b ? b->measured : 1.0,
                                      c ? c->measured : 1.0})));
    }
    // 7. Gauge symmetry
    {
        bool ok = true;
        double worst = 0.0;
        for (const auto* set : {&pw, &ms, &vk}) {
            for (const auto* r : set->find_all("gauge_invariance")) {
                ok = ok && r->pass;
                worst = std::max(worst, r->measured);
            }
            ok = ok && !set->find_all("gauge_invariance").empty();
        }
        line(7, ok, "V, |kg_residual|, j_KG invariant under polynomial gauges within 1e-10",
             "worst deviation " + num(worst));
    }
    // 8. Ehrenfest
    {
        const auto* fr = pw.find("ehrenfest");
        const auto* fm = ms.find("ehrenfest");
        const auto* fo = vk.find("ehrenfest");
        const bool ok = fr && fr->pass && fm && fm->pass && fo && fo->pass &&
                        fo->details.at("interior_slices") >= 5 &&
                        fo->details.at("rhs_scale_1") > 0.0;
        line(8, ok, "m0 d2/dtau2 E[x] = E[Re f]: free scenarios at 3 SE, Volkov with force",
             "volkov worst |diff|/tol " + num(fo ? fo->measured : 1.0) + ", force scale " +
                 num(fo ? fo->details.at("rhs_scale_1") : 0.0));
    }
    // 9. Energy constancy
    {
        bool ok = true;
        double worst = 0.0;
        for (const auto* set : {&pw, &ms, &vk}) {
            const auto* r = set->find("energy_constancy");
            ok = ok && r && r->pass;
            if (r) worst = std::max(worst, std::abs(r->measured));
        }
        line(9, ok, "fitted slope of E[V*.V](tau) within 3 SE of zero on all builtins",
             "worst |slope| " + num(worst));
    }
    // 10. Nelson partial integration
    {
        bool ok = true;
        double worst = 0.0;
        for (const auto* set : {&pw, &ms}) {
            const auto reps = set->find_all("partial_integration");
            ok = ok && reps.size() == 3;
            for (const auto* r : reps) {
                ok = ok && r->pass;
                if (r->tolerance > 0.0) worst = std::max(worst, r->measured / r->tolerance);
            }
        }
        line(10, ok,
             "partial integration: constant, coordinate, polynomial fields within 3 SE",
             "worst |residual|/tolerance " + num(worst));
    }
    // 11. Current equivalence and conservation
    {
        const auto* ce_pw = pw.find("current_equivalence");
        const auto* ce_ms = ms.find("current_equivalence");
        const auto* ck_pw = pw.find("charge_conservation(kg)");
        const auto* cs_pw = pw.find("charge_conservation(stochastic)");
        const auto* ck_ms = ms.find("charge_conservation(kg)");
        const auto* cs_ms = ms.find("charge_conservation(stochastic)");
        const bool ok = ce_pw && ce_pw->pass && ce_pw->measured <= 0.02 && ce_ms &&
                        ce_ms->pass && ce_ms->measured <= 0.05 && ck_pw && ck_pw->pass &&
                        cs_pw && cs_pw->pass && ck_ms && ck_ms->pass && cs_ms && cs_ms->pass;
        line(11, ok, "j_stochastic ~ j_KG (2% / 5%) and charge conservation",
             "pw dev " + num(ce_pw ? ce_pw->measured : 1.0) + ", ms dev " +
                 num(ce_ms ? ce_ms->measured : 1.0));
    }
    // 12. Action stationarity
    {
        const auto* a = pw.find("action_stationarity");
        const auto* b = ms.find("action_stationarity");
        const auto* c = vk.find("action_stationarity");
        const auto* bad = off.find("action_stationarity");
        const bool ok = a && a->pass && b && b->pass && c && c->pass && bad && !bad->pass &&
                        bad->measured > 10.0 * bad->tolerance;
        line(12, ok, "S(eps) linear coefficient <= 1e-3 of quadratic scale; control nonzero",
             "worst |c1|/tol " +
                 num(std::max({a ? a->measured / a->tolerance : 1e9,
                               b ? b->measured / b->tolerance : 1e9,
                               c ? c->measured / c->tolerance : 1e9})) +
                 ", control " + num(bad ? bad->measured / bad->tolerance : 0.0) + "x");
    }
    // 13. Reproducibility
    {
        auto cfg = builtin_scenario("plane_wave");
        cfg.id = "repro";
        cfg.n_paths = 20000;
        cfg.checks = {"wiener_law", "lorentz_invariant", "energy_constancy",
                      "partial_integration", "current_equivalence", "charge_conservation"};
        auto run_to = [&](const std::string& tag, std::size_t workers) {
            auto c = cfg;
            c.workers = workers;
            c.output_directory = (outbase / ("repro_" + tag)).string();
            run_scenario(c);
            std::ifstream in(fs::path(c.output_directory) / "reports.jsonl");
            std::ostringstream s;
            s << in.rdbuf();
            return s.str();
        };
        const std::string r1 = run_to("a", 0);
        const std::string r2 = run_to("b", 0);
        const std::string r3 = run_to("w1", 1);
        const std::string r4 = run_to("w4", 4);
        const bool ok = !r1.empty() && r1 == r2 && r3 == r4 && r1 == r3;
        line(13, ok, "byte-identical reports for identical (config, seed), any worker count",
             ok ? "4 runs identical" : "mismatch");
    }

    // negative-control scenarios must match their expectations end to end
    {
        bool ok = true;
        for (const auto& id : {"negative_control_offshell", "negative_control_scaled_drift"}) {
            for (const auto& r : sets[id].reports) ok = ok && r.outcome_matches_expectation();
        }
        std::printf("%s negative-control scenarios matched expectations\n",
                    ok ? "PASS" : "FAIL");
        if (!ok) ++g_failures;
    }

    std::printf("acceptance: %s (%d failing)\n", g_failures == 0 ? "ALL PASS" : "FAILURES",
                g_failures);
    return g_failures == 0 ? 0 : 1;
}
