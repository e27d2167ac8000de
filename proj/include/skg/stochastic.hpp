#pragma once

// Sampling of the dual-progressive process: (-g)-Wiener increments,
// Euler-Maruyama integration with the forward drift V+ (or backward with V-),
// and reproducible ensembles. Paths are independent given their substreams,
// so the ensemble is identical for any worker count.

#include <atomic>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "skg/rng.hpp"
#include "skg/spacetime.hpp"
#include "skg/wavefunction.hpp"

namespace skg {

struct WienerIncrement {
    FourVector dW;
};

/// Four independent N(0, dtau) draws.
inline WienerIncrement sample_increment(RngStream& rng, double dtau) {
    if (!(dtau > 0.0)) throw std::invalid_argument("sample_increment: dtau must be positive");
    const double s = std::sqrt(dtau);
    WienerIncrement w;
    for (int mu = 0; mu < 4; ++mu) w.dW[mu] = s * rng.normal();
    return w;
}

/// One Euler-Maruyama update: x + drift dtau + lambda dW.
inline FourVector step(const FourVector& x, const FourVector& drift, double dtau,
                       const WienerIncrement& dW, double lambda) {
    FourVector r = x;
    for (int mu = 0; mu < 4; ++mu) r[mu] += drift[mu] * dtau + lambda * dW.dW[mu];
    return r;
}

enum class Direction { forward, backward };

struct TauGrid {
    double tau_start = 0.0;
    double dtau = 1e-2;
    std::size_t n_steps = 100;
    std::size_t record_every = 1;

    std::size_t n_slices() const { return n_steps / record_every + 1; }
    double recorded_dtau() const { return dtau * static_cast<double>(record_every); }
    double tau_end() const { return tau_start + dtau * static_cast<double>(n_steps); }

    void validate() const {
        if (!(dtau > 0.0)) throw std::invalid_argument("TauGrid: dtau must be positive");
        if (record_every == 0 || n_steps % record_every != 0)
            throw std::invalid_argument("TauGrid: record_every must divide n_steps");
    }
};

struct InitialDistribution {
    enum class Kind { point, uniform_box, density };
    Kind kind = Kind::point;
    FourVector point{};
    FourVector lo{}, hi{};  // box for uniform_box and window for density sampling

    static InitialDistribution point_mass(const FourVector& x) {
        InitialDistribution d;
        d.kind = Kind::point;
        d.point = x;
        return d;
    }
    static InitialDistribution uniform_box(const FourVector& lo, const FourVector& hi) {
        InitialDistribution d;
        d.kind = Kind::uniform_box;
        d.lo = lo;
        d.hi = hi;
        return d;
    }
    /// Rejection sampling proportional to phi* phi on the window.
    static InitialDistribution density_weighted(const FourVector& lo, const FourVector& hi) {
        InitialDistribution d;
        d.kind = Kind::density;
        d.lo = lo;
        d.hi = hi;
        return d;
    }
};

struct EnsembleProvenance {
    std::uint64_t master_seed = 0;
    std::string scenario_id;
    std::string model_desc;
    std::string potential_desc;
};

struct SimulationError : std::runtime_error {
    explicit SimulationError(const std::string& what) : std::runtime_error(what) {}
};

/// Recorded trajectories on a uniform tau grid. Write-once, then immutable.
class PathEnsemble {
  public:
    PathEnsemble(std::vector<double> tau_grid, std::size_t n_paths,
                 std::vector<FourVector> points, Direction dir, PhysicalConstants consts,
                 EnsembleProvenance prov, std::size_t aborted, double noise_lambda)
        : tau_grid_(std::move(tau_grid)),
          n_paths_(n_paths),
          points_(std::move(points)),
          direction_(dir),
          consts_(consts),
          provenance_(std::move(prov)),
          aborted_paths_(aborted),
          noise_lambda_(noise_lambda) {
        if (tau_grid_.size() < 1) throw std::invalid_argument("PathEnsemble: empty tau grid");
        if (points_.size() != n_paths_ * tau_grid_.size())
            throw std::invalid_argument("PathEnsemble: size mismatch");
        const double dt0 = tau_grid_.size() > 1 ? tau_grid_[1] - tau_grid_[0] : 1.0;
        for (std::size_t k = 1; k < tau_grid_.size(); ++k) {
            const double dt = tau_grid_[k] - tau_grid_[k - 1];
            if (!(dt > 0.0) || std::abs(dt - dt0) > 1e-12 * std::abs(dt0))
                throw std::invalid_argument("PathEnsemble: tau grid not uniformly increasing");
        }
        for (const auto& x : points_)
            if (!x.is_finite()) throw std::invalid_argument("PathEnsemble: non-finite point");
    }

    const std::vector<double>& tau_grid() const { return tau_grid_; }
    std::size_t n_paths() const { return n_paths_; }
    std::size_t n_slices() const { return tau_grid_.size(); }
    double recorded_dtau() const {
        return tau_grid_.size() > 1 ? tau_grid_[1] - tau_grid_[0] : 0.0;
    }
    Direction direction() const { return direction_; }
    const PhysicalConstants& consts() const { return consts_; }
    const EnsembleProvenance& provenance() const { return provenance_; }
    std::size_t aborted_paths() const { return aborted_paths_; }
    /// The lambda actually applied to the noise (consts.lambda * noise_scale).
    double noise_lambda() const { return noise_lambda_; }

    const FourVector& at(std::size_t path, std::size_t slice) const {
        return points_[path * tau_grid_.size() + slice];
    }
    const std::vector<FourVector>& points() const { return points_; }

  private:
    std::vector<double> tau_grid_;
    std::size_t n_paths_;
    std::vector<FourVector> points_;
    Direction direction_;
    PhysicalConstants consts_;
    EnsembleProvenance provenance_;
    std::size_t aborted_paths_;
    double noise_lambda_;
};

using DriftFn = std::function<FourVector(const FourVector&)>;

struct SimulateOptions {
    std::size_t n_workers = 0;            // 0: hardware concurrency
    double max_abort_fraction = 1e-3;     // > 0.1% aborted paths fails the run
    double noise_scale = 1.0;             // 0 gives the deterministic integral curve
    EvalOptions eval{};
};

namespace detail {

inline FourVector draw_initial(const InitialDistribution& init, RngStream& rng,
                               const WaveFunctionModel& model, const PotentialModel& A,
                               const PhysicalConstants& consts) {
    switch (init.kind) {
        case InitialDistribution::Kind::point:
            return init.point;
        case InitialDistribution::Kind::uniform_box: {
            FourVector x;
            for (int mu = 0; mu < 4; ++mu)
                x[mu] = init.lo[mu] + (init.hi[mu] - init.lo[mu]) * rng.uniform01();
            return x;
        }
        case InitialDistribution::Kind::density: {
            // |phi|^2 is bounded by (sum |w|)^2 for mode sums and equals 1 for
            // the pure-phase members.
            double bound = 1.0;
            if (const auto* ms = std::get_if<ModeSumState>(&model.base())) {
                double s = 0.0;
                for (const auto& m : ms->modes) s += std::abs(m.weight);
                bound = s * s;
            }
            for (int attempt = 0; attempt < 100000; ++attempt) {
                FourVector x;
                for (int mu = 0; mu < 4; ++mu)
                    x[mu] = init.lo[mu] + (init.hi[mu] - init.lo[mu]) * rng.uniform01();
                const double dens = std::norm(evaluate_phi(model, A, x, consts));
                if (bound * rng.uniform01() <= dens) return x;
            }
            throw SimulationError("density-weighted initial sampling failed to accept");
        }
    }
    throw std::logic_error("unreachable");
}

struct SimWorkspace {
    std::vector<FourVector> points;   // n_paths * n_slices
    std::vector<char> aborted;        // per path
};

template <class PathFn>
inline void run_paths(std::size_t n_paths, std::size_t n_workers, const PathFn& body) {
    std::size_t workers = n_workers ? n_workers : std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    if (workers == 1) {
        for (std::size_t i = 0; i < n_paths; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        constexpr std::size_t chunk = 64;
        for (;;) {
            const std::size_t begin = next.fetch_add(chunk);
            if (begin >= n_paths) return;
            const std::size_t end = std::min(begin + chunk, n_paths);
            for (std::size_t i = begin; i < end; ++i) body(i);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

inline PathEnsemble simulate(const WaveFunctionModel& model, const PotentialModel& A,
                             const PhysicalConstants& consts, const InitialDistribution& init,
                             std::size_t n_paths, const TauGrid& grid, std::uint64_t master_seed,
                             Direction dir, const EnsembleProvenance& prov,
                             const SimulateOptions& opts) {
    grid.validate();
    if (n_paths == 0) throw std::invalid_argument("simulate: n_paths must be >= 1");
    ensure_compatible(model, A);

    const std::size_t n_slices = grid.n_slices();
    SimWorkspace ws;
    ws.points.assign(n_paths * n_slices, FourVector{});
    ws.aborted.assign(n_paths, 0);

    const bool forward = dir == Direction::forward;
    const double lambda = consts.lambda * opts.noise_scale;

    run_paths(n_paths, opts.n_workers, [&](std::size_t ipath) {
        RngStream noise(master_seed, StreamPurpose::path, ipath);
        RngStream draw(master_seed, StreamPurpose::initial_draw, ipath);
        FourVector* slices = ws.points.data() + ipath * n_slices;
        try {
            FourVector x = draw_initial(init, draw, model, A, consts);
            // forward records slice 0 first; backward records the last slice
            // first and fills toward tau_start.
            if (forward)
                slices[0] = x;
            else
                slices[n_slices - 1] = x;
            for (std::size_t s = 1; s <= grid.n_steps; ++s) {
                const auto v = complex_velocity(model, A, x, consts, opts.eval);
                const auto d = drift_velocities(v);
                const WienerIncrement dw = sample_increment(noise, grid.dtau);
                if (forward) {
                    x = step(x, d.vplus, grid.dtau, dw, lambda);
                } else {
                    // x(tau - dtau) = x(tau) - V- dtau - lambda dW
                    x = step(x, d.vminus, -grid.dtau, dw, -lambda);
                }
                if (!x.is_finite()) throw SimulationError("non-finite path point");
                if (s % grid.record_every == 0) {
                    const std::size_t k = s / grid.record_every;
                    slices[forward ? k : n_slices - 1 - k] = x;
                }
            }
        } catch (const NodeSingularity&) {
            ws.aborted[ipath] = 1;
        } catch (const SimulationError&) {
            ws.aborted[ipath] = 1;
        }
    });

    std::size_t n_aborted = 0;
    for (char a : ws.aborted) n_aborted += static_cast<std::size_t>(a);
    if (static_cast<double>(n_aborted) >
        opts.max_abort_fraction * static_cast<double>(n_paths))
        throw SimulationError("aborted path fraction " + std::to_string(n_aborted) + "/" +
                              std::to_string(n_paths) + " exceeds the limit");

    std::vector<FourVector> kept;
    kept.reserve((n_paths - n_aborted) * n_slices);
    for (std::size_t i = 0; i < n_paths; ++i) {
        if (ws.aborted[i]) continue;
        const FourVector* src = ws.points.data() + i * n_slices;
        kept.insert(kept.end(), src, src + n_slices);
    }

    std::vector<double> taus(n_slices);
    for (std::size_t k = 0; k < n_slices; ++k)
        taus[k] = grid.tau_start + grid.recorded_dtau() * static_cast<double>(k);

    return PathEnsemble(std::move(taus), n_paths - n_aborted, std::move(kept), dir, consts, prov,
                        n_aborted, lambda);
}

}  // namespace detail

/// Forward Euler-Maruyama with drift V+ evaluated at the current point.
inline PathEnsemble simulate_forward(const WaveFunctionModel& model, const PotentialModel& A,
                                     const PhysicalConstants& consts,
                                     const InitialDistribution& init, std::size_t n_paths,
                                     const TauGrid& grid, std::uint64_t master_seed,
                                     const EnsembleProvenance& prov = {},
                                     const SimulateOptions& opts = {}) {
    EnsembleProvenance p = prov;
    p.master_seed = master_seed;
    if (p.model_desc.empty()) p.model_desc = model.describe();
    if (p.potential_desc.empty()) p.potential_desc = A.describe();
    return detail::simulate(model, A, consts, init, n_paths, grid, master_seed,
                            Direction::forward, p, opts);
}

/// Mirror of simulate_forward: integrates in decreasing tau with drift V-,
/// starting from the terminal distribution.
inline PathEnsemble simulate_backward(const WaveFunctionModel& model, const PotentialModel& A,
                                      const PhysicalConstants& consts,
                                      const InitialDistribution& terminal, std::size_t n_paths,
                                      const TauGrid& grid, std::uint64_t master_seed,
                                      const EnsembleProvenance& prov = {},
                                      const SimulateOptions& opts = {}) {
    EnsembleProvenance p = prov;
    p.master_seed = master_seed;
    if (p.model_desc.empty()) p.model_desc = model.describe();
    if (p.potential_desc.empty()) p.potential_desc = A.describe();
    return detail::simulate(model, A, consts, terminal, n_paths, grid, master_seed,
                            Direction::backward, p, opts);
}

struct IncrementStatistics {
    FourVector mean;                          // of (dx - drift dtau) / lambda
    std::array<std::array<double, 4>, 4> covariance{};  // divided by dtau
    std::size_t n_increments = 0;
    double standard_error = 0.0;              // per mean component, same units as mean
};

/// Pooled statistics of the noise residuals (dx - drift dtau)/lambda over all
/// paths and recorded steps. For backward ensembles the drift is evaluated at
/// the later endpoint, matching the backward increment definition.
inline IncrementStatistics increment_statistics(const PathEnsemble& ens, const DriftFn& drift) {
    if (ens.n_slices() < 2)
        throw std::invalid_argument("increment_statistics: need at least 2 time steps");
    const double dt = ens.recorded_dtau();
    const double lambda = ens.noise_lambda();
    if (!(lambda > 0.0))
        throw std::invalid_argument("increment_statistics: ensemble has no noise");
    IncrementStatistics out;
    std::array<double, 4> sum{};
    std::array<std::array<double, 4>, 4> sum2{};
    const bool forward = ens.direction() == Direction::forward;
    for (std::size_t ipath = 0; ipath < ens.n_paths(); ++ipath) {
        for (std::size_t k = 0; k + 1 < ens.n_slices(); ++k) {
            const FourVector& a = ens.at(ipath, k);
            const FourVector& b = ens.at(ipath, k + 1);
            const FourVector v = drift(forward ? a : b);
            FourVector r;
            for (int mu = 0; mu < 4; ++mu) r[mu] = (b[mu] - a[mu] - v[mu] * dt) / lambda;
            for (int mu = 0; mu < 4; ++mu) {
                sum[mu] += r[mu];
                for (int nu = 0; nu < 4; ++nu) sum2[mu][nu] += r[mu] * r[nu];
            }
            ++out.n_increments;
        }
    }
    const double n = static_cast<double>(out.n_increments);
    for (int mu = 0; mu < 4; ++mu) out.mean[mu] = sum[mu] / n;
    for (int mu = 0; mu < 4; ++mu)
        for (int nu = 0; nu < 4; ++nu)
            out.covariance[mu][nu] = (sum2[mu][nu] / n - out.mean[mu] * out.mean[nu]) / dt;
    out.standard_error = std::sqrt(dt / n);
    return out;
}

/// Convenience drift field bound to a model/potential pair.
inline DriftFn make_drift(const WaveFunctionModel& model, const PotentialModel& A,
                          const PhysicalConstants& consts, Direction dir,
                          const EvalOptions& opts = {}) {
    const bool forward = dir == Direction::forward;
    return [&model, &A, consts, forward, opts](const FourVector& x) {
        const auto d = drift_velocities(complex_velocity(model, A, x, consts, opts));
        return forward ? d.vplus : d.vminus;
    };
}

}  // namespace skg
