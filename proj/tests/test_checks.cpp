#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "skg/action.hpp"
#include "skg/checks.hpp"
#include "skg/currents.hpp"
#include "skg/grid_checks.hpp"

using namespace skg;

namespace {

const PhysicalConstants kNat = PhysicalConstants::natural(0.3);
const double kKz = 0.5;
const double kPeriod = M_PI * kNat.hbar / kKz;

FourVector on_shell(double px, double py, double pz) {
    return {std::sqrt(kNat.mass_shell() + px * px + py * py + pz * pz), px, py, pz};
}

WaveFunctionModel ms_model(double w2 = 0.5) {
    const double e0 = std::sqrt(kNat.mass_shell() + kKz * kKz);
    return WaveFunctionModel::mode_sum({{complexd(1.0, 0.0), FourVector{e0, 0, 0, kKz}},
                                        {complexd(w2, 0.0), FourVector{e0, 0, 0, -kKz}}},
                                       kNat);
}

WaveFunctionModel offshell_model(double delta = 0.16) {
    const double e0 = std::sqrt(kNat.mass_shell() + kKz * kKz);
    const double k2 = std::sqrt(e0 * e0 - kNat.mass_shell() - delta);
    return WaveFunctionModel::mode_sum_unchecked(
        {{complexd(1.0, 0.0), FourVector{e0, 0, 0, kKz}},
         {complexd(0.6, 0.0), FourVector{e0, 0, 0, -k2}}});
}

struct VolkovSetup {
    WaveFunctionModel model;
    PotentialModel A;
};
VolkovSetup volkov_setup(double amplitude = 1.2, double omega = 0.05, double pz = -1.0) {
    const FourVector k{omega, 0, 0, omega};
    const FourVector a{0, 0.8, 0, 0};
    return {WaveFunctionModel::volkov(on_shell(0, 0, pz), kNat),
            PotentialModel::plane_wave(k, a, WaveProfile{amplitude, 0.4})};
}

PathEnsemble mode_sum_ensemble(std::size_t n_paths = 100000, std::uint64_t seed = 424242) {
    const auto model = ms_model();
    const auto zero = PotentialModel::zero();
    TauGrid grid{0.0, 0.005, 200, 50};  // slices at 0, 0.25, 0.5, 0.75, 1.0
    const auto init = InitialDistribution::density_weighted({-2.0, 0, 0, -2.0 * kPeriod},
                                                            {10.0, 0, 0, 6.0 * kPeriod});
    EnsembleProvenance prov;
    prov.scenario_id = "test_mode_sum";
    return simulate_forward(model, zero, kNat, init, n_paths, grid, seed, prov);
}

}  // namespace

TEST_CASE("bootstrap_mean_se tracks the analytic standard error", "[checks]") {
    RngStream rng(1, 0);
    const std::size_t n = 20000;
    std::vector<double> vals(n);
    for (auto& v : vals) v = 2.0 + 0.7 * rng.normal();
    const double se = bootstrap_mean_se(9, 100, n, {&vals})[0];
    CHECK(se == Catch::Approx(0.7 / std::sqrt(double(n))).epsilon(0.15));
}

TEST_CASE("lorentz_invariant_estimate", "[checks]") {
    const auto zero = PotentialModel::zero();

    SECTION("plane wave is exact with zero standard error") {
        const auto model = WaveFunctionModel::plane_wave(on_shell(0.2, 0, 0.5), kNat);
        TauGrid grid{0.0, 0.01, 40, 10};
        const auto ens = simulate_forward(
            model, zero, kNat, InitialDistribution::point_mass({0, 0, 0, 0}), 200, grid, 5);
        const auto rep = lorentz_invariant_estimate(ens, model, zero, kNat);
        CHECK(rep.pass);
        CHECK(rep.tolerance_basis == "machine");
        CHECK(std::abs(rep.measured - kNat.c * kNat.c) < 1e-10);
    }
    SECTION("Volkov is exact pointwise") {
        auto vk = volkov_setup();
        TauGrid grid{0.0, 0.01, 40, 10};
        const auto ens = simulate_forward(
            vk.model, vk.A, kNat, InitialDistribution::point_mass({0, 0, 0, 0}), 100, grid, 6);
        const auto rep = lorentz_invariant_estimate(ens, vk.model, vk.A, kNat);
        CHECK(rep.pass);
        CHECK(std::abs(rep.measured - kNat.c * kNat.c) < 1e-10);
    }
    SECTION("mode sum within 3 bootstrap SE; off-shell control fails") {
        const auto ens = mode_sum_ensemble();
        const auto rep = lorentz_invariant_estimate(ens, ms_model(), zero, kNat);
        CHECK(rep.tolerance_basis == "bootstrap-se");
        CHECK(rep.pass);
        CHECK(rep.standard_error > 0.0);

        const auto bad = offshell_model();
        TauGrid grid{0.0, 0.005, 100, 50};
        const auto init = InitialDistribution::density_weighted({-2.0, 0, 0, -2.0 * kPeriod},
                                                                {10.0, 0, 0, 6.0 * kPeriod});
        SimulateOptions so;
        so.max_abort_fraction = 0.01;
        const auto bad_ens = simulate_forward(bad, zero, kNat, init, 50000, grid, 31, {}, so);
        const auto bad_rep = lorentz_invariant_estimate(bad_ens, bad, zero, kNat);
        CHECK_FALSE(bad_rep.pass);
    }
}

TEST_CASE("ehrenfest_check", "[checks]") {
    const auto zero = PotentialModel::zero();

    SECTION("free plane wave: both sides vanish") {
        const auto model = WaveFunctionModel::plane_wave(on_shell(0.1, 0, 0.4), kNat);
        TauGrid grid{0.0, 0.02, 300, 50};
        const auto ens = simulate_forward(
            model, zero, kNat, InitialDistribution::point_mass({0, 0, 0, 0}), 20000, grid, 44);
        const auto rep = ehrenfest_check(ens, model, zero, kNat);
        CHECK(rep.pass);
        for (int mu = 0; mu < 4; ++mu)
            CHECK(rep.details.at("rhs_scale_" + std::to_string(mu)) == 0.0);
    }
    SECTION("Volkov: mean acceleration equals the averaged force") {
        auto vk = volkov_setup();
        TauGrid grid{0.0, 0.05, 600, 30};  // tau span 30, 21 slices
        const auto ens = simulate_forward(
            vk.model, vk.A, kNat, InitialDistribution::point_mass({0, 0, 0, 0}), 100000, grid,
            77);
        const auto rep = ehrenfest_check(ens, vk.model, vk.A, kNat);
        INFO("diff_1 " << rep.details.at("difference_1") << " se_1 " << rep.details.at("se_1")
                       << " scale_1 " << rep.details.at("rhs_scale_1"));
        CHECK(rep.pass);
        CHECK(rep.details.at("rhs_scale_1") > 0.005);

        // negative control: doubled field amplitude in the evaluation
        auto bad = volkov_setup(2.4);
        const auto bad_rep = ehrenfest_check(ens, bad.model, bad.A, kNat);
        CHECK_FALSE(bad_rep.pass);
    }
}

TEST_CASE("energy_constancy_check", "[checks]") {
    const auto zero = PotentialModel::zero();
    SECTION("pure phase: slope is exactly zero") {
        const auto model = WaveFunctionModel::plane_wave(on_shell(0.2, 0, 0.5), kNat);
        TauGrid grid{0.0, 0.01, 40, 10};
        const auto ens = simulate_forward(
            model, zero, kNat, InitialDistribution::point_mass({0, 0, 0, 0}), 500, grid, 51);
        const auto rep = energy_constancy_check(ens, model, zero, kNat);
        CHECK(rep.pass);
        CHECK(rep.measured == Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("mode sum: slope within 3 SE of zero") {
        const auto ens = mode_sum_ensemble();
        const auto rep = energy_constancy_check(ens, ms_model(), zero, kNat);
        CHECK(rep.tolerance_basis == "bootstrap-se");
        CHECK(rep.pass);
    }
}

TEST_CASE("partial_integration_check", "[checks]") {
    const auto zero = PotentialModel::zero();
    const auto model = WaveFunctionModel::plane_wave(on_shell(0.2, 0, 0.5), kNat);
    const FourVector p = std::get<PlaneWaveState>(model.base()).p;
    TauGrid grid{0.0, 0.02, 200, 40};  // slices every 0.8
    const FourVector x0{0.5, 0.2, -0.3, 1.0};
    const auto ens = simulate_forward(model, zero, kNat, InitialDistribution::point_mass(x0),
                                      40000, grid, 61);

    SECTION("constant fields: both sides vanish, correction is zero") {
        const auto cf = AnalyticVectorField::constant({1.0, 0.5, -0.2, 0.8});
        const auto rep = partial_integration_check(ens, cf, cf, model, zero, kNat);
        CHECK(rep.pass);
        CHECK(rep.details.at("sampler_correction") == Catch::Approx(0.0).margin(1e-14));
        CHECK(rep.details.at("lhs") == Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("coordinate fields on the plane wave: Euler-Maruyama moment oracle") {
        const auto xf = AnalyticVectorField::coordinate();
        const auto rep = partial_integration_check(ens, xf, xf, model, zero, kNat);
        CHECK(rep.pass);
        const double l2 = kNat.lambda_sq();
        // oracle: for x(tau) = x0 + V tau + lambda W the Gaussian moments give
        // d/dtau E[x.x] = 2 V.E[x](tau) - 2 lambda^2, while the operator rhs
        // is 2 V.E[x](tau): the sampler correction is exactly -2 lambda^2
        CHECK(rep.details.at("sampler_correction") == Catch::Approx(-2.0 * l2).margin(1e-10));
        const auto& taus = ens.tau_grid();
        double oracle_lhs = 0.0;
        const FourVector v = p / kNat.m0;
        for (std::size_t k = 1; k + 1 < taus.size(); ++k) {
            const FourVector mean_x = x0 + v * taus[k];
            oracle_lhs += 2.0 * minkowski_dot(v, mean_x) - 2.0 * l2;
        }
        oracle_lhs /= static_cast<double>(taus.size() - 2);
        CHECK(rep.details.at("lhs") ==
              Catch::Approx(oracle_lhs).margin(12.0 * rep.standard_error + 1e-6));
        CHECK(rep.details.at("uncorrected_gap") ==
              Catch::Approx(-2.0 * l2).margin(12.0 * rep.standard_error + 1e-6));
    }
    SECTION("random polynomials on the stationary mode sum") {
        const auto ms_ens = mode_sum_ensemble(60000, 515151);
        const auto a = AnalyticVectorField::random_polynomial(11);
        const auto b = AnalyticVectorField::random_polynomial(12);
        const auto rep = partial_integration_check(ms_ens, a, b, ms_model(), zero, kNat);
        CHECK(rep.pass);
    }
}

TEST_CASE("gauge_invariance_check", "[checks]") {
    RngStream rng(71, StreamPurpose::test_field, 20);
    std::vector<FourVector> pts;
    for (int i = 0; i < 20; ++i)
        pts.push_back({4.0 * (rng.uniform01() - 0.5), 4.0 * (rng.uniform01() - 0.5),
                       4.0 * (rng.uniform01() - 0.5), 4.0 * (rng.uniform01() - 0.5)});
    std::array<std::array<double, 4>, 4> q{};
    q[0][0] = 0.04;
    q[0][3] = q[3][0] = -0.06;
    q[1][1] = 0.08;
    const auto lam = GaugeFunction::quadratic(q, {0.3, -0.1, 0.2, 0.05}, 0.4);

    auto vk = volkov_setup();
    const auto rep = gauge_invariance_check(vk.model, vk.A, kNat, lam, pts);
    CHECK(rep.pass);
    CHECK(rep.measured <= 1e-10);

    const auto rep2 = gauge_invariance_check(ms_model(), PotentialModel::zero(), kNat, lam, pts);
    CHECK(rep2.pass);
}

TEST_CASE("currents", "[checks]") {
    const auto zero = PotentialModel::zero();
    GridAxes axes{{AxisSpec{0, 0.0, 8.0, 6}, AxisSpec{3, 0.0, 4.0 * kPeriod, 30}}};

    SECTION("plane-wave j_kg is the uniform -ec p/m0 field") {
        const auto model = WaveFunctionModel::plane_wave(on_shell(0.2, 0, 0.5), kNat);
        const FourVector p = std::get<PlaneWaveState>(model.base()).p;
        const auto jkg = compute_j_kg(model, zero, kNat, axes);
        for (std::size_t c = 0; c < axes.n_cells(); ++c)
            for (int mu = 0; mu < 4; ++mu)
                CHECK(jkg.j[c][mu] ==
                      Catch::Approx(-kNat.e * kNat.c * p[mu] / kNat.m0).margin(1e-12));
    }
    SECTION("j_kg equals -ec Re V phi*phi for the mode sum") {
        const auto model = ms_model();
        const auto jkg = compute_j_kg(model, zero, kNat, axes);
        for (std::size_t c = 0; c < axes.n_cells(); c += 7) {
            const FourVector x = axes.point(c);
            const auto v = complex_velocity(model, zero, x, kNat);
            const double dens = std::norm(evaluate_phi(model, zero, x, kNat));
            for (int mu = 0; mu < 4; ++mu)
                CHECK(jkg.j[c][mu] ==
                      Catch::Approx(-kNat.e * kNat.c * v.re[mu] * dens).margin(1e-12));
        }
    }
    SECTION("e = 0 gives the zero current, analytic and sampled") {
        const auto k0 = PhysicalConstants::natural(0.0);
        const auto model = WaveFunctionModel::plane_wave(on_shell(0.2, 0, 0.5), k0);
        const auto jkg = compute_j_kg(model, zero, k0, axes);
        for (std::size_t c = 0; c < axes.n_cells(); ++c)
            for (int mu = 0; mu < 4; ++mu) CHECK(jkg.j[c][mu] == 0.0);
        TauGrid grid{0.0, 0.05, 20, 10};
        const auto ens = simulate_forward(
            model, zero, k0,
            InitialDistribution::uniform_box({0, 0, 0, 0}, {8.0, 0, 0, 4.0 * kPeriod}), 2000,
            grid, 7);
        const auto js = compute_j_stochastic(ens, model, zero, k0, axes);
        for (std::size_t c = 0; c < axes.n_cells(); ++c)
            for (int mu = 0; mu < 4; ++mu) CHECK(js.j[c][mu] == 0.0);
    }
    SECTION("j_kg is gauge invariant") {
        std::array<std::array<double, 4>, 4> q{};
        q[0][3] = q[3][0] = 0.05;
        const auto lam = GaugeFunction::quadratic(q, {0.2, 0, 0, -0.1});
        const auto model = ms_model();
        auto [m2, a2] = gauge_transform(model, zero, lam);
        const auto j1 = compute_j_kg(model, zero, kNat, axes);
        const auto j2 = compute_j_kg(m2, a2, kNat, axes);
        for (std::size_t c = 0; c < axes.n_cells(); ++c)
            for (int mu = 0; mu < 4; ++mu) CHECK(std::abs(j1.j[c][mu] - j2.j[c][mu]) < 1e-10);
    }
    SECTION("stochastic current matches the KG current") {
        const auto ens = mode_sum_ensemble();
        const auto js = compute_j_stochastic(ens, ms_model(), zero, kNat, axes, true);
        const auto jkg = compute_j_kg(ms_model(), zero, kNat, axes);
        const auto rep = current_equivalence_check(js, jkg, 0.05);
        INFO("relative L2 deviation " << rep.measured);
        CHECK(rep.pass);
        CHECK(rep.details.at("fit_constant") > 0.0);

        const auto cons_kg = charge_conservation_check(jkg);
        CHECK(cons_kg.pass);
        const auto cons_js = charge_conservation_check(js, 1e-4, ens.provenance().master_seed);
        INFO("chi2 " << cons_js.details.at("chi2_reduced") << " limit "
                     << cons_js.details.at("chi2_limit"));
        CHECK(cons_js.pass);

        // negative control: perturbed interference weights change the shape
        const auto bad = compute_j_kg(ms_model(0.25), zero, kNat, axes);
        const auto bad_rep = current_equivalence_check(js, bad, 0.05);
        CHECK_FALSE(bad_rep.pass);
    }
    SECTION("identical fields have zero deviation and unit constant") {
        const auto jkg = compute_j_kg(ms_model(), zero, kNat, axes);
        const auto rep = current_equivalence_check(jkg, jkg);
        CHECK(rep.measured == Catch::Approx(0.0).margin(1e-14));
        CHECK(rep.details.at("fit_constant") == Catch::Approx(1.0).epsilon(1e-12));
    }
    SECTION("axes mismatch is an error") {
        GridAxes other{{AxisSpec{0, 0.0, 8.0, 5}, AxisSpec{3, 0.0, 4.0 * kPeriod, 30}}};
        const auto a = compute_j_kg(ms_model(), zero, kNat, axes);
        const auto b = compute_j_kg(ms_model(), zero, kNat, other);
        CHECK_THROWS_AS(current_equivalence_check(a, b), AxesMismatch);
    }
}

TEST_CASE("action_stationarity_check", "[checks]") {
    const auto zero = PotentialModel::zero();
    GridAxes axes{{AxisSpec{0, 0.0, 8.0, 24}, AxisSpec{3, 0.0, 4.0 * kPeriod, 64}}};
    const auto eta = bump_perturbation({0.3, 0.1, 0.0, 1.0}, {0, 3}, {4.0, 0, 0, 2.0 * kPeriod},
                                       {3.0, 1, 1, 1.5 * kPeriod});
    const std::vector<double> eps{-0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3};

    SECTION("plane wave is stationary") {
        const auto model = WaveFunctionModel::plane_wave(on_shell(0.2, 0, 0.5), kNat);
        ActionSweep sweep;
        const auto rep =
            action_stationarity_check(model, zero, kNat, eta, eps, axes, 1.0, 1e-3, &sweep);
        INFO("c0 " << sweep.c0 << " c1 " << sweep.c1 << " c2 " << sweep.c2);
        CHECK(rep.pass);
        CHECK(std::abs(sweep.c2) > 0.0);
        CHECK(sweep.action[3] == Catch::Approx(sweep.c0).margin(1e-9 * std::abs(sweep.c0)));
    }
    SECTION("mode sum is stationary") {
        const auto rep = action_stationarity_check(ms_model(), zero, kNat, eta, eps, axes, 1.0);
        CHECK(rep.pass);
    }
    SECTION("Volkov is stationary") {
        auto vk = volkov_setup();
        GridAxes vax{{AxisSpec{0, 0.0, 20.0, 32}, AxisSpec{3, -10.0, 10.0, 32}}};
        const auto veta =
            bump_perturbation({0.3, 0.1, 0.0, 1.0}, {0, 3}, {10.0, 0, 0, 0.0}, {8.0, 1, 1, 8.0});
        const auto rep = action_stationarity_check(vk.model, vk.A, kNat, veta, eps, vax, 1.0);
        CHECK(rep.pass);
    }
    SECTION("off-shell control is resolvably non-stationary") {
        const auto rep =
            action_stationarity_check(offshell_model(), zero, kNat, eta, eps, axes, 1.0);
        CHECK_FALSE(rep.pass);
        CHECK(rep.measured > 10.0 * rep.tolerance);
    }
}

TEST_CASE("grid_residual_check statistical track", "[checks]") {
    const auto ens = mode_sum_ensemble();
    const auto zero = PotentialModel::zero();
    GridAxes axes{{AxisSpec{0, 0.0, 8.0, 6}, AxisSpec{3, 0.0, 4.0 * kPeriod, 24}}};

    const auto fp =
        grid_residual_check(GridIdentity::fokker_planck, ens, ms_model(), zero, kNat, axes);
    INFO("fp chi2 " << fp.details.at("chi2_reduced") << " limit " << fp.details.at("chi2_limit"));
    CHECK(fp.pass);

    const auto cont =
        grid_residual_check(GridIdentity::continuity, ens, ms_model(), zero, kNat, axes);
    CHECK(cont.pass);

    const auto osm =
        grid_residual_check(GridIdentity::osmotic, ens, ms_model(), zero, kNat, axes);
    INFO("osmotic chi2 " << osm.details.at("chi2_reduced") << " limit "
                         << osm.details.at("chi2_limit"));
    CHECK(osm.pass);

    // wrong lambda in the drift reconstruction must blow the budget
    const auto bad_consts = PhysicalConstants(1.5625, 1.0, 0.3, 1.0, 1.0);  // lambda = 1.25
    const auto bad =
        grid_residual_check(GridIdentity::osmotic, ens, ms_model(), zero, bad_consts, axes);
    CHECK_FALSE(bad.pass);
}
