#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "skg/density.hpp"
#include "skg/stochastic.hpp"

using namespace skg;

namespace {

const PhysicalConstants kNat = PhysicalConstants::natural(0.3);

FourVector on_shell(double px, double py, double pz) {
    return {std::sqrt(kNat.mass_shell() + px * px + py * py + pz * pz), px, py, pz};
}

WaveFunctionModel pw_model() { return WaveFunctionModel::plane_wave(on_shell(0.2, 0, 0.5), kNat); }

WaveFunctionModel ms_model(double w2 = 0.5) {
    const double kz = 0.5;
    const double e0 = std::sqrt(kNat.mass_shell() + kz * kz);
    return WaveFunctionModel::mode_sum({{complexd(1.0, 0.0), FourVector{e0, 0, 0, kz}},
                                        {complexd(w2, 0.0), FourVector{e0, 0, 0, -kz}}},
                                       kNat);
}

}  // namespace

TEST_CASE("sample_increment law", "[stochastic]") {
    const double dtau = 0.05;
    RngStream rng(2024, 0);
    const std::size_t n = 100000;
    std::array<double, 4> mean{};
    std::array<std::array<double, 4>, 4> cov{};
    for (std::size_t i = 0; i < n; ++i) {
        const auto w = sample_increment(rng, dtau);
        for (int mu = 0; mu < 4; ++mu) {
            mean[mu] += w.dW[mu];
            for (int nu = 0; nu < 4; ++nu) cov[mu][nu] += w.dW[mu] * w.dW[nu];
        }
    }
    const double se = std::sqrt(dtau / static_cast<double>(n));
    for (int mu = 0; mu < 4; ++mu) {
        mean[mu] /= static_cast<double>(n);
        CHECK(std::abs(mean[mu]) < 5.0 * se);
        for (int nu = 0; nu < 4; ++nu) {
            const double c = cov[mu][nu] / static_cast<double>(n) / dtau;
            CHECK(std::abs(c - (mu == nu ? 1.0 : 0.0)) < 0.05);
        }
    }

    RngStream a(7, 3), b(7, 3);
    for (int i = 0; i < 100; ++i) {
        const auto wa = sample_increment(a, dtau), wb = sample_increment(b, dtau);
        for (int mu = 0; mu < 4; ++mu) REQUIRE(wa.dW[mu] == wb.dW[mu]);
    }
    CHECK_THROWS_AS(sample_increment(a, 0.0), std::invalid_argument);
}

TEST_CASE("step", "[stochastic]") {
    const FourVector x{1, 2, 3, 4};
    SECTION("no drift, no noise") {
        CHECK(step(x, FourVector::zero(), 0.1, WienerIncrement{}, 1.0) == x);
    }
    SECTION("deterministic limit is the straight line") {
        const FourVector v{1.0, 0.2, -0.3, 0.4};
        FourVector y = x;
        const double dtau = 0.05;
        for (int s = 0; s < 40; ++s) y = step(y, v, dtau, WienerIncrement{}, 0.0);
        for (int mu = 0; mu < 4; ++mu)
            CHECK(y[mu] == Catch::Approx(x[mu] + 2.0 * v[mu]).margin(1e-12));
    }
    SECTION("pure noise variance grows like n dtau") {
        const double dtau = 0.02;
        const int n_steps = 10;
        const std::size_t n_paths = 100000;
        std::array<double, 4> sum{}, sum2{};
        for (std::size_t i = 0; i < n_paths; ++i) {
            RngStream rng(55, i);
            FourVector y;
            for (int s = 0; s < n_steps; ++s)
                y = step(y, FourVector::zero(), dtau, sample_increment(rng, dtau), 1.0);
            for (int mu = 0; mu < 4; ++mu) {
                sum[mu] += y[mu];
                sum2[mu] += y[mu] * y[mu];
            }
        }
        for (int mu = 0; mu < 4; ++mu) {
            const double m = sum[mu] / n_paths;
            const double var = sum2[mu] / n_paths - m * m;
            CHECK(var == Catch::Approx(n_steps * dtau).epsilon(0.05));
        }
    }
}

TEST_CASE("simulate_forward plane wave", "[stochastic]") {
    const auto model = pw_model();
    const auto zero = PotentialModel::zero();
    const FourVector p = std::get<PlaneWaveState>(model.base()).p;

    TauGrid grid{0.0, 0.01, 200, 20};
    const std::size_t n_paths = 20000;
    const auto init = InitialDistribution::uniform_box({-1, -1, -1, -1}, {1, 1, 1, 1});
    const auto ens = simulate_forward(model, zero, kNat, init, n_paths, grid, 31415);

    SECTION("ensemble mean velocity is p/m0 within 3 standard errors") {
        const double span = grid.tau_end() - grid.tau_start;
        for (int mu = 0; mu < 4; ++mu) {
            double m1 = 0, s2 = 0;
            for (std::size_t i = 0; i < ens.n_paths(); ++i) {
                const double d = ens.at(i, ens.n_slices() - 1)[mu] - ens.at(i, 0)[mu];
                m1 += d;
                s2 += d * d;
            }
            const double m = m1 / static_cast<double>(ens.n_paths());
            const double var = s2 / static_cast<double>(ens.n_paths()) - m * m;
            const double se = std::sqrt(var / static_cast<double>(ens.n_paths())) / span;
            CHECK(std::abs(m / span - p[mu] / kNat.m0) < 3.0 * se + 1e-12);
        }
    }
    SECTION("bit-identical rerun and worker independence") {
        const auto again = simulate_forward(model, zero, kNat, init, n_paths, grid, 31415);
        REQUIRE(again.points().size() == ens.points().size());
        for (std::size_t i = 0; i < ens.points().size(); ++i)
            REQUIRE(again.points()[i] == ens.points()[i]);
        SimulateOptions one_worker;
        one_worker.n_workers = 1;
        SimulateOptions four_workers;
        four_workers.n_workers = 4;
        const auto e1 = simulate_forward(model, zero, kNat, init, 2000, grid, 99, {}, one_worker);
        const auto e4 = simulate_forward(model, zero, kNat, init, 2000, grid, 99, {}, four_workers);
        for (std::size_t i = 0; i < e1.points().size(); ++i)
            REQUIRE(e1.points()[i] == e4.points()[i]);
    }
    SECTION("noise_scale 0 gives the deterministic integral curve") {
        SimulateOptions det;
        det.noise_scale = 0.0;
        const auto point = InitialDistribution::point_mass({0, 0, 0, 0});
        const auto e = simulate_forward(model, zero, kNat, point, 3, grid, 7, {}, det);
        for (std::size_t i = 0; i < e.n_paths(); ++i)
            for (std::size_t k = 0; k < e.n_slices(); ++k)
                for (int mu = 0; mu < 4; ++mu)
                    CHECK(e.at(i, k)[mu] ==
                          Catch::Approx(p[mu] / kNat.m0 * e.tau_grid()[k]).margin(1e-12));
    }
}

TEST_CASE("simulate_backward mirrors the forward run", "[stochastic]") {
    const auto model = pw_model();
    const auto zero = PotentialModel::zero();
    const FourVector p = std::get<PlaneWaveState>(model.base()).p;
    TauGrid grid{0.0, 0.01, 100, 10};
    const auto term = InitialDistribution::uniform_box({-1, -1, -1, -1}, {1, 1, 1, 1});

    const auto ens = simulate_backward(model, zero, kNat, term, 20000, grid, 2718);
    const double span = grid.tau_end() - grid.tau_start;
    for (int mu = 0; mu < 4; ++mu) {
        double m1 = 0, s2 = 0;
        for (std::size_t i = 0; i < ens.n_paths(); ++i) {
            const double d = ens.at(i, ens.n_slices() - 1)[mu] - ens.at(i, 0)[mu];
            m1 += d;
            s2 += d * d;
        }
        const double m = m1 / static_cast<double>(ens.n_paths());
        const double var = s2 / static_cast<double>(ens.n_paths()) - m * m;
        const double se = std::sqrt(var / static_cast<double>(ens.n_paths())) / span;
        // V- = V+ = p/m0 for a pure phase
        CHECK(std::abs(m / span - p[mu] / kNat.m0) < 3.0 * se + 1e-12);
    }

    SimulateOptions det;
    det.noise_scale = 0.0;
    const auto e = simulate_backward(model, zero, kNat,
                                     InitialDistribution::point_mass({0, 0, 0, 0}), 2, grid, 4,
                                     {}, det);
    // terminal condition sits at the last slice; earlier slices extend backward
    for (std::size_t k = 0; k < e.n_slices(); ++k)
        for (int mu = 0; mu < 4; ++mu)
            CHECK(e.at(0, k)[mu] ==
                  Catch::Approx(p[mu] / kNat.m0 * (e.tau_grid()[k] - grid.tau_end()))
                      .margin(1e-12));

    const auto e2 = simulate_backward(model, zero, kNat, term, 500, grid, 2718);
    const auto e3 = simulate_backward(model, zero, kNat, term, 500, grid, 2718);
    for (std::size_t i = 0; i < e2.points().size(); ++i)
        REQUIRE(e2.points()[i] == e3.points()[i]);
}

TEST_CASE("increment_statistics", "[stochastic]") {
    const auto model = pw_model();
    const auto zero = PotentialModel::zero();
    const auto drift = make_drift(model, zero, kNat, Direction::forward);
    const auto init = InitialDistribution::point_mass({0, 0, 0, 0});

    SECTION("plane-wave ensemble: pooled covariance near identity, mean near zero") {
        TauGrid grid{0.0, 0.05, 10, 1};
        const auto ens = simulate_forward(model, zero, kNat, init, 10000, grid, 123);
        const auto st = increment_statistics(ens, drift);
        REQUIRE(st.n_increments == 100000);
        for (int mu = 0; mu < 4; ++mu) {
            CHECK(std::abs(st.mean[mu]) < 5.0 * st.standard_error);
            for (int nu = 0; nu < 4; ++nu)
                CHECK(std::abs(st.covariance[mu][nu] - (mu == nu ? 1.0 : 0.0)) < 0.05);
        }
    }
    SECTION("small lambda still gives unit covariance after division") {
        TauGrid grid{0.0, 0.05, 10, 1};
        SimulateOptions small;
        small.noise_scale = 1e-2;
        const auto ens = simulate_forward(model, zero, kNat, init, 5000, grid, 321, {}, small);
        const auto st = increment_statistics(ens, drift);
        for (int mu = 0; mu < 4; ++mu) CHECK(std::abs(st.covariance[mu][mu] - 1.0) < 0.05);
    }
    SECTION("backward ensembles evaluate the drift at the later endpoint") {
        TauGrid grid{0.0, 0.05, 10, 1};
        const auto bdrift = make_drift(model, zero, kNat, Direction::backward);
        const auto ens = simulate_backward(model, zero, kNat, init, 5000, grid, 456);
        const auto st = increment_statistics(ens, bdrift);
        for (int mu = 0; mu < 4; ++mu) {
            CHECK(std::abs(st.mean[mu]) < 5.0 * st.standard_error);
            CHECK(std::abs(st.covariance[mu][mu] - 1.0) < 0.05);
        }
    }
}

TEST_CASE("Brownian quadratic variation of drift-free components", "[stochastic]") {
    // p = (m0 c, 0, 0, 0): spatial drift vanishes, so raw spatial increments
    // are pure noise.
    const auto model = WaveFunctionModel::plane_wave({1.0, 0, 0, 0}, kNat);
    const auto zero = PotentialModel::zero();
    TauGrid grid{0.0, 0.02, 50, 1};
    const auto ens = simulate_forward(
        model, zero, kNat, InitialDistribution::point_mass({0, 0, 0, 0}), 4000, grid, 777);
    const double span = grid.tau_end();
    double qv[4] = {0, 0, 0, 0};
    double cross = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < ens.n_paths(); ++i)
        for (std::size_t k = 0; k + 1 < ens.n_slices(); ++k) {
            FourVector d;
            for (int mu = 0; mu < 4; ++mu) d[mu] = ens.at(i, k + 1)[mu] - ens.at(i, k)[mu];
            for (int mu = 1; mu < 4; ++mu) qv[mu] += d[mu] * d[mu];
            cross += d[1] * d[2];
            ++n;
        }
    const double l2 = kNat.lambda_sq();
    // pooled chi^2 estimate: SE = l2 sqrt(2/n)
    const double se = l2 * std::sqrt(2.0 / static_cast<double>(n));
    for (int mu = 1; mu < 4; ++mu) {
        const double est = qv[mu] / (static_cast<double>(ens.n_paths()) * span);
        CHECK(std::abs(est - l2) < 3.0 * se);
    }
    // cross covariation: mean of products of independent normals
    const double cross_se = l2 * grid.dtau / std::sqrt(static_cast<double>(n)) / grid.dtau;
    CHECK(std::abs(cross / static_cast<double>(n) / grid.dtau) < 3.0 * cross_se);
}

TEST_CASE("node handling aborts offending paths", "[stochastic]") {
    // equal weights put hard nodes inside the window
    const auto model = ms_model(1.0);
    const auto zero = PotentialModel::zero();
    TauGrid grid{0.0, 0.01, 50, 10};
    // a path started exactly on the node aborts immediately; the default
    // policy rejects the run once aborts exceed 0.1%
    const double znode = M_PI * kNat.hbar / (2.0 * 0.5);
    const auto on_node = InitialDistribution::point_mass({0, 0, 0, znode});
    CHECK_THROWS_AS(simulate_forward(model, zero, kNat, on_node, 100, grid, 11),
                    SimulationError);
    const auto init = InitialDistribution::uniform_box({0, 0, 0, -6}, {0.5, 0, 0, 6});

    SimulateOptions tolerant;
    tolerant.max_abort_fraction = 1.0;
    tolerant.eval.node_epsilon = 1e-3;  // widen the node wall so aborts trigger
    const auto ens = simulate_forward(model, zero, kNat, init, 2000, grid, 11, {}, tolerant);
    CHECK(ens.aborted_paths() > 0);
    CHECK(ens.n_paths() + ens.aborted_paths() == 2000);
    for (const auto& x : ens.points()) CHECK(x.is_finite());
}

TEST_CASE("density-weighted initial law matches phi*phi", "[stochastic]") {
    const auto model = ms_model(0.5);
    const auto zero = PotentialModel::zero();
    const double kz = 0.5;
    const double period = M_PI * kNat.hbar / kz;  // of |phi|^2 in z
    const double zlo = 0.0, zhi = 4.0 * period;
    TauGrid grid{0.0, 0.01, 0, 1};  // init-only ensemble
    const auto init = InitialDistribution::density_weighted({0, 0, 0, zlo}, {0, 0, 0, zhi});
    const auto ens = simulate_forward(model, zero, kNat, init, 200000, grid, 5150);

    GridAxes axes{{AxisSpec{3, zlo, zhi, 40}}};
    const auto hist = estimate_density_series(ens, axes);
    const auto exact = analytic_density(model, zero, kNat, axes, hist.taus());
    // multinomial noise budget for the L1 distance
    double budget = 0.0;
    const double vol = axes.cell_volume();
    for (std::size_t c = 0; c < axes.n_cells(); ++c) {
        const double pc = exact.at(0, c) * vol;
        budget += std::sqrt(pc * (1.0 - pc) / static_cast<double>(ens.n_paths()));
    }
    CHECK(l1_distance(hist, exact) < 3.0 * budget);
}

TEST_CASE("weak convergence of the Euler-Maruyama mean is first order", "[stochastic]") {
    // Volkov drift is genuinely state-dependent; couple three refinement
    // levels through shared increments and watch the mean bias halve.
    const PhysicalConstants k = kNat;
    const FourVector kvec{0.7, 0, 0, 0.7};
    const FourVector avec{0, 0.8, 0, 0};
    const auto A = PotentialModel::plane_wave(kvec, avec, WaveProfile{1.4, 0.3});
    const auto model =
        WaveFunctionModel::volkov(FourVector{std::sqrt(k.mass_shell() + 0.09), 0, 0, -0.3}, k);

    const double tau_end = 2.0;
    const int n_fine = 64;
    const double dt_fine = tau_end / n_fine;
    const std::size_t n_paths = 20000;

    auto drift = make_drift(model, A, k, Direction::forward);
    double mean[3] = {0, 0, 0};  // dtau, dtau/2, dtau/4 with dtau = 4 dt_fine
    for (std::size_t ip = 0; ip < n_paths; ++ip) {
        RngStream rng(8888, ip);
        std::vector<FourVector> fine(n_fine);
        for (int s = 0; s < n_fine; ++s) fine[s] = sample_increment(rng, dt_fine).dW;
        for (int level = 0; level < 3; ++level) {
            const int stride = 4 >> level;
            const double dt = dt_fine * stride;
            FourVector x{0, 0, 0, 0};
            for (int s = 0; s < n_fine; s += stride) {
                WienerIncrement w{};
                for (int j = 0; j < stride; ++j) w.dW += fine[s + j];
                x = step(x, drift(x), dt, w, k.lambda);
            }
            mean[level] += x[1];
        }
    }
    for (double& m : mean) m /= static_cast<double>(n_paths);
    const double ratio = std::abs(mean[0] - mean[1]) / std::abs(mean[1] - mean[2]);
    CHECK(ratio > 1.5);
    CHECK(ratio < 3.0);
}
