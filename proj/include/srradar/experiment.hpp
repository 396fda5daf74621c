#ifndef SRRADAR_EXPERIMENT_HPP
#define SRRADAR_EXPERIMENT_HPP

///
/// \file experiment.hpp
///
/// Random scenes, noise at a prescribed SNR, and resolution-error sweeps over
/// super-resolution factors. Trial t of a sweep with master seed s uses trial
/// seed s + t, from which the probe, scene and noise streams are derived.
///

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <srradar/analysis.hpp>
#include <srradar/core.hpp>
#include <srradar/extract.hpp>
#include <srradar/grid.hpp>
#include <srradar/mimo.hpp>
#include <srradar/solver.hpp>

namespace srradar
{

enum class SeparationPolicy
{
    enforce,
    free,
};

enum class GainModel
{
    unit_disc,    ///< uniform on the complex unit disc
    unit_circle,  ///< uniform phase, unit modulus
};

/// Thrown when rejection sampling cannot find a separated scene.
class SceneGenerationError : public std::runtime_error
{
public:
    SceneGenerationError(const std::string& what, Index attempts, Index capacity)
        : std::runtime_error(what), m_attempts(attempts), m_capacity(capacity)
    {
    }
    Index attempts() const { return m_attempts; }
    Index capacity() const { return m_capacity; }

private:
    Index m_attempts;
    Index m_capacity;
};

struct SceneSpec
{
    Index L{201};
    Index S{10};
    Real tau_max{-1.0};  ///< sampling box [0, tau_max) x [0, nu_max); negative selects 2/sqrt(L)
    Real nu_max{-1.0};
    SeparationPolicy separation{SeparationPolicy::enforce};
    GainModel gains{GainModel::unit_disc};
    Index max_attempts{10000};
    /// MIMO only
    Index n_tx{1};
    Index n_rx{1};
    /// Nonzero values snap draws to the lattice n / K on that axis (on-grid scenes).
    Index lattice_beta{0};
    Index lattice_delay{0};
    Index lattice_doppler{0};

    Real box_tau() const { return tau_max < 0.0 ? std::min(1.0, 2.0 / std::sqrt(static_cast<Real>(L))) : tau_max; }
    Real box_nu() const { return nu_max < 0.0 ? std::min(1.0, 2.0 / std::sqrt(static_cast<Real>(L))) : nu_max; }
};

namespace detail
{

/// Uniform on [0, hi), or uniform over the lattice points n / K inside it.
inline Real draw_coordinate(Rng& rng, Real hi, Index K)
{
    if (K <= 0) return std::uniform_real_distribution<Real>(0.0, hi)(rng);
    const auto count = std::max<Index>(1, static_cast<Index>(std::ceil(hi * static_cast<Real>(K) - 1e-9)));
    const Index n = std::uniform_int_distribution<Index>(0, std::min(count, K) - 1)(rng);
    return static_cast<Real>(n) / static_cast<Real>(K);
}

/// Same verdict as check_separation_siso, stopping at the first violation.
inline bool separated_siso(const std::vector<Node>& nodes, Real thr)
{
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < nodes.size(); ++j) {
            if (std::max(wrap_distance(nodes[i].tau, nodes[j].tau), wrap_distance(nodes[i].nu, nodes[j].nu)) < thr) {
                return false;
            }
        }
    }
    return true;
}

} // namespace detail

inline Complex draw_gain(Rng& rng, GainModel model)
{
    std::uniform_real_distribution<Real> u(0.0, 1.0);
    const Real phase = u(rng);
    const Real radius = model == GainModel::unit_disc ? std::sqrt(u(rng)) : 1.0;
    return radius * cis2pi(phase);
}

/// Upper bound on the number of max-rule separated points in a box: cells of
/// side t hold at most one point each.
inline Index separation_capacity(Real w, Real h, Real t)
{
    const auto cw = static_cast<Index>(std::ceil(std::min(w, 1.0) / t - 1e-12));
    const auto ch = static_cast<Index>(std::ceil(std::min(h, 1.0) / t - 1e-12));
    return std::max<Index>(cw, 1) * std::max<Index>(ch, 1);
}

///
/// SISO scene per the sampling protocol: points uniform in the box, gains per
/// the gain model. Under enforce the whole scene is redrawn until it passes
/// check_separation_siso, up to max_attempts times.
///
inline Scene generate_scene(const SceneSpec& spec, std::uint64_t seed)
{
    half_length(spec.L);
    if (spec.S < 0) throw std::invalid_argument("S must be nonnegative");
    Rng rng(derive_seed(seed, 0, Stream::scene));
    const Real thr = siso_separation_threshold(spec.L);
    const Index cap = separation_capacity(spec.box_tau(), spec.box_nu(), thr);

    for (Index attempt = 0; attempt < std::max<Index>(spec.max_attempts, 1); ++attempt) {
        Scene sc;
        sc.L = spec.L;
        std::vector<Node> nodes;
        for (Index k = 0; k < spec.S; ++k) {
            Scatterer s;
            s.tau = detail::draw_coordinate(rng, spec.box_tau(), spec.lattice_delay);
            s.nu = detail::draw_coordinate(rng, spec.box_nu(), spec.lattice_doppler);
            s.b = draw_gain(rng, spec.gains);
            sc.scatterers.push_back(s);
            nodes.push_back({0.0, s.tau, s.nu});
        }
        if (spec.separation == SeparationPolicy::free || detail::separated_siso(nodes, thr)) {
            return sc;
        }
    }
    throw SceneGenerationError("no separated scene with S = " + std::to_string(spec.S) + " after " +
                                   std::to_string(spec.max_attempts) +
                                   " attempts; at most " + std::to_string(cap) +
                                   " separated points fit in the sampling box",
                               spec.max_attempts, cap);
}

/// MIMO scene: beta uniform on [0, 1), (tau, nu) uniform in the box.
inline MimoScene generate_mimo_scene(const SceneSpec& spec, std::uint64_t seed)
{
    half_length(spec.L);
    Rng rng(derive_seed(seed, 0, Stream::scene));
    const Real t_delay = 5.0 / static_cast<Real>(half_length(spec.L));
    const Index aperture = spec.n_tx * spec.n_rx;
    // Pairs separated in beta alone need 10/(aperture - 1) <= 1/2.
    const bool beta_usable = aperture > 1 && 10.0 / static_cast<Real>(aperture - 1) <= 0.5;
    const Index cap = beta_usable ? std::numeric_limits<Index>::max()
                                  : separation_capacity(spec.box_tau(), spec.box_nu(), t_delay);

    for (Index attempt = 0; attempt < std::max<Index>(spec.max_attempts, 1); ++attempt) {
        MimoScene sc;
        sc.L = spec.L;
        sc.n_tx = spec.n_tx;
        sc.n_rx = spec.n_rx;
        std::vector<Node> nodes;
        for (Index k = 0; k < spec.S; ++k) {
            MimoScatterer s;
            s.beta = detail::draw_coordinate(rng, 1.0, spec.lattice_beta);
            s.tau = detail::draw_coordinate(rng, spec.box_tau(), spec.lattice_delay);
            s.nu = detail::draw_coordinate(rng, spec.box_nu(), spec.lattice_doppler);
            s.b = draw_gain(rng, spec.gains);
            sc.scatterers.push_back(s);
            nodes.push_back({s.beta, s.tau, s.nu});
        }
        if (spec.separation == SeparationPolicy::free ||
            check_separation_mimo(nodes, spec.n_tx, spec.n_rx, spec.L).satisfied) {
            return sc;
        }
    }
    throw SceneGenerationError("no separated MIMO scene with S = " + std::to_string(spec.S) + " after " +
                                   std::to_string(spec.max_attempts) + " attempts" +
                                   (beta_usable ? std::string()
                                                : "; at most " + std::to_string(cap) +
                                                      " delay-Doppler separated points fit in the sampling box"),
                               spec.max_attempts, cap);
}

///
/// Complex white Gaussian noise scaled so that ||y||^2 / ||n||^2 equals
/// 10^(snr_db / 10) exactly.
///
inline CVector noise_at_snr(const CVector& y, Real snr_db, std::uint64_t seed)
{
    Rng rng(seed);
    std::normal_distribution<Real> g;
    CVector n(y.size());
    for (Index i = 0; i < n.size(); ++i) {
        const Real re = g(rng);
        const Real im = g(rng);
        n(i) = Complex(re, im);
    }
    const Real target = y.norm() / std::sqrt(std::pow(10.0, snr_db / 10.0));
    const Real nn = n.norm();
    return nn > 0.0 ? CVector(n * (target / nn)) : n;
}

///
/// Squared gridding error of a known scene: the residual of y after least
/// squares on the grid columns nearest to the true locations (clamped into a
/// restricted grid). Used as the noise ball of noiseless runs.
///
inline Real gridding_delta(const GridOperator& op, const CVector& y, const std::vector<Node>& truth)
{
    if (truth.empty()) return 0.0;
    const FineGrid& g = op.grid();
    auto nearest = [](Real t, Index K, Index count) {
        const Index n = mod_index(static_cast<Index>(std::llround(wrap_unit(t) * static_cast<Real>(K))), K);
        return std::min(n, count - 1);
    };
    CMatrix C(op.rows(), static_cast<Index>(truth.size()));
    for (std::size_t k = 0; k < truth.size(); ++k) {
        const GridIndex gi{nearest(truth[k].beta, g.K_beta, g.K_beta),
                           nearest(truth[k].tau, g.K_delay, g.delay_count()),
                           nearest(truth[k].nu, g.K_doppler, g.doppler_count())};
        C.col(static_cast<Index>(k)) = op.column(op.flat_index(gi));
    }
    const CVector b = C.colPivHouseholderQr().solve(y);
    return (y - C * b).squaredNorm();
}

struct SweepSpec
{
    bool mimo{false};
    Index L{201};
    Index n_tx{3};
    Index n_rx{3};
    Index S{10};
    std::vector<Index> srf_list{1, 2, 4, 8};
    std::vector<std::optional<Real>> snr_db_list{std::nullopt};  ///< nullopt: noiseless
    Index trials{20};
    std::uint64_t seed{1};
    SeparationPolicy separation{SeparationPolicy::enforce};
    GainModel gains{GainModel::unit_disc};
    Real tau_max{-1.0};
    Real nu_max{-1.0};
    bool restrict_region{true};   ///< grid restricted to the sampling box
    SolverConfig solver{};
    std::optional<Real> delta;    ///< fixed noise ball for every run, overriding the defaults below
    /// Noiseless runs: true solves the equality program, false uses the
    /// gridding error of the known scene as the noise ball.
    bool noiseless_equality{false};
    Real gridding_scale{0.25};    ///< multiplies the gridding noise ball
    ExtractConfig extract{Location::peak};  ///< estimates on the grid
    unsigned threads{1};

    void validate() const
    {
        if (trials < 1) throw std::invalid_argument("trials must be at least 1");
        if (srf_list.empty()) throw std::invalid_argument("srf list must be nonempty");
        for (Index s : srf_list) {
            if (s < 1) throw std::invalid_argument("srf values must be positive integers");
        }
        if (snr_db_list.empty()) throw std::invalid_argument("snr list must be nonempty");
        half_length(L);
        solver.validate();
    }

    SceneSpec scene_spec() const
    {
        SceneSpec s;
        s.L = L;
        s.S = S;
        s.tau_max = tau_max;
        s.nu_max = nu_max;
        s.separation = separation;
        s.gains = gains;
        s.n_tx = mimo ? n_tx : 1;
        s.n_rx = mimo ? n_rx : 1;
        return s;
    }
};

struct SweepRow
{
    std::uint64_t seed{0};
    Index srf{1};
    std::optional<Real> snr_db;
    Real resolution_error{0.0};
    Real beta_error{0.0};
    Index unmatched{0};
    int iters{0};
    SolveStatus status{SolveStatus::converged};
    Index n_tx{1};
    Index n_rx{1};
};

inline std::uint64_t trial_seed(std::uint64_t master, Index trial)
{
    return master + static_cast<std::uint64_t>(trial);
}

namespace detail
{

inline Real snr_key(const std::optional<Real>& s)
{
    return s ? *s : std::numeric_limits<Real>::infinity();
}

inline std::optional<Region> sweep_region(const SweepSpec& spec, const SceneSpec& sc)
{
    if (!spec.restrict_region) return std::nullopt;
    if (sc.box_tau() >= 1.0 && sc.box_nu() >= 1.0) return std::nullopt;
    return Region{sc.box_tau(), sc.box_nu()};
}

inline SolverConfig solver_for(const SweepSpec& spec, const CVector& noise, bool noisy, Real gridding)
{
    SolverConfig cfg = spec.solver;
    if (spec.delta) {
        cfg.delta = *spec.delta;
    } else if (noisy) {
        cfg.delta = noise.squaredNorm();
    } else {
        cfg.delta = spec.noiseless_equality ? 0.0 : spec.gridding_scale * gridding;
    }
    return cfg;
}

inline std::vector<SweepRow> run_trial(const SweepSpec& spec, Index trial)
{
    std::vector<SweepRow> rows;
    const std::uint64_t ts = trial_seed(spec.seed, trial);
    const SceneSpec sc = spec.scene_spec();
    const auto region = sweep_region(spec, sc);

    if (!spec.mimo) {
        const Scene scene = generate_scene(sc, ts);
        const ProbingSignal x = random_probing(spec.L, derive_seed(ts, 0, Stream::probe));
        const CVector clean = synthesize(x, scene).y;
        for (std::size_t si = 0; si < spec.snr_db_list.size(); ++si) {
            const auto& snr = spec.snr_db_list[si];
            const CVector noise = snr ? noise_at_snr(clean, *snr, derive_seed(ts, si, Stream::noise))
                                      : CVector::Zero(clean.size());
            const CVector y = clean + noise;
            for (Index srf : spec.srf_list) {
                const GridOperator op(x, FineGrid::from_srf(spec.L, srf, region));
                std::vector<Node> nodes;
                for (const auto& t : scene.scatterers) nodes.push_back({0.0, t.tau, t.nu});
                const Real grid_delta = snr ? 0.0 : gridding_delta(op, y, nodes);
                const Recovery rec = recover(op, y, solver_for(spec, noise, snr.has_value(), grid_delta), spec.extract);
                const ResolutionError err = resolution_error(rec.solution.estimates, scene.scatterers, spec.L);
                SweepRow row;
                row.seed = ts;
                row.srf = srf;
                row.snr_db = snr;
                row.resolution_error = err.mean;
                row.unmatched = err.unmatched_truth + err.unmatched_estimates;
                row.iters = rec.solve.iters;
                row.status = rec.solve.status;
                rows.push_back(row);
            }
        }
        return rows;
    }

    MimoConfig mc{spec.n_tx, spec.n_rx, spec.L};
    const MimoScene scene = generate_mimo_scene(sc, ts);
    const auto probes = random_mimo_probing(mc, derive_seed(ts, 0, Stream::probe));
    const CVector clean = synthesize_mimo(probes, scene.scatterers, mc);
    for (std::size_t si = 0; si < spec.snr_db_list.size(); ++si) {
        const auto& snr = spec.snr_db_list[si];
        const CVector noise = snr ? noise_at_snr(clean, *snr, derive_seed(ts, si, Stream::noise))
                                  : CVector::Zero(clean.size());
        const CVector y = clean + noise;
        for (Index srf : spec.srf_list) {
            const GridOperator op(probes, mc.shape(), mimo_grid(mc, srf, region));
            std::vector<Node> nodes;
            for (const auto& t : scene.scatterers) nodes.push_back({t.beta, t.tau, t.nu});
            const Real grid_delta = snr ? 0.0 : gridding_delta(op, y, nodes);
            const Recovery rec = recover(op, y, solver_for(spec, noise, snr.has_value(), grid_delta), spec.extract);
            const ResolutionError err = mimo_resolution_error(rec.solution.estimates, scene.scatterers, mc);
            SweepRow row;
            row.seed = ts;
            row.srf = srf;
            row.snr_db = snr;
            row.resolution_error = err.mean;
            row.unmatched = err.unmatched_truth + err.unmatched_estimates;
            row.iters = rec.solve.iters;
            row.status = rec.solve.status;
            row.n_tx = mc.n_tx;
            row.n_rx = mc.n_rx;
            // Mean N_T N_R |dbeta| over matched pairs.
            Real acc = 0.0;
            Index cnt = 0;
            for (std::size_t j = 0; j < scene.scatterers.size(); ++j) {
                if (err.match[j] < 0) continue;
                const auto& e = rec.solution.estimates[static_cast<std::size_t>(err.match[j])];
                acc += static_cast<Real>(mc.aperture()) * std::abs(wrap_diff(e.beta, scene.scatterers[j].beta));
                ++cnt;
            }
            row.beta_error = cnt > 0 ? acc / static_cast<Real>(cnt) : 0.0;
            rows.push_back(row);
        }
    }
    return rows;
}

} // namespace detail

///
/// Runs every (trial, srf, snr) combination. Trials are distributed over
/// spec.threads workers; rows come back sorted by (trial seed, srf, snr), so
/// the output does not depend on scheduling.
///
inline std::vector<SweepRow> run_sweep(const SweepSpec& spec)
{
    spec.validate();
    std::vector<std::vector<SweepRow>> per_trial(static_cast<std::size_t>(spec.trials));
    std::atomic<Index> next{0};
    std::mutex err_mutex;
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            const Index t = next.fetch_add(1);
            if (t >= spec.trials) return;
            try {
                per_trial[static_cast<std::size_t>(t)] = detail::run_trial(spec, t);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!failure) failure = std::current_exception();
                next.store(spec.trials);
                return;
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(spec.threads, static_cast<unsigned>(spec.trials)));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<SweepRow> rows;
    for (auto& v : per_trial) rows.insert(rows.end(), v.begin(), v.end());
    std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        return std::make_tuple(a.seed, a.srf, detail::snr_key(a.snr_db)) <
               std::make_tuple(b.seed, b.srf, detail::snr_key(b.snr_db));
    });
    return rows;
}

} // namespace srradar

#endif
