#ifndef SRRADAR_EXTRACT_HPP
#define SRRADAR_EXTRACT_HPP

///
/// \file extract.hpp
///
/// Turning a fine-grid coefficient vector into a short list of continuous
/// estimates: threshold, cluster neighbouring cells, take magnitude-weighted
/// centroids and refit the gains by least squares. Also the resolution error
/// used to score estimates against a known scene.
///

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/QR>

#include <srradar/grid.hpp>
#include <srradar/solver.hpp>

namespace srradar
{

struct Estimate
{
    Complex b{0.0, 0.0};
    Real beta{0.0};
    Real tau{0.0};
    Real nu{0.0};
    bool rank_deficient{false};
};

enum class Location
{
    centroid,  ///< magnitude-weighted centroid of the cluster
    peak,      ///< grid point of the largest coefficient in the cluster
};

struct ExtractConfig
{
    Location location{Location::centroid};
    Real threshold{1e-3};       ///< relative to the largest coefficient magnitude
    Index cluster_radius{1};    ///< per-axis radius in fine-grid cells
    bool debias{true};
};

struct SparseSolution
{
    std::vector<std::pair<GridIndex, Complex>> coeffs;
    std::vector<Estimate> estimates;
    Real residual_norm{0.0};
    bool rank_deficient{false};
};

namespace detail
{

/// Signed cell offset a - b on a circular axis of length K.
inline Index cell_offset(Index a, Index b, Index K)
{
    Index d = mod_index(a - b, K);
    return 2 * d > K ? d - K : d;
}

} // namespace detail

///
/// Nonzero coefficients above the threshold, grouped around peaks: the
/// largest unassigned coefficient opens a cluster that takes every unassigned
/// cell within cluster_radius of it along each axis (with wrap-around).
///
inline std::vector<std::vector<std::pair<GridIndex, Complex>>>
cluster_coefficients(const GridOperator& op, const CVector& coeffs, const ExtractConfig& cfg = {})
{
    if (coeffs.size() != op.cols()) throw DimensionError("coefficient size does not match grid");
    std::vector<std::vector<std::pair<GridIndex, Complex>>> clusters;
    if (coeffs.size() == 0) return clusters;
    const Real peak = coeffs.cwiseAbs().maxCoeff();
    if (peak == 0.0) return clusters;

    std::vector<Index> kept;
    for (Index i = 0; i < coeffs.size(); ++i) {
        if (std::abs(coeffs(i)) >= cfg.threshold * peak) kept.push_back(i);
    }
    std::stable_sort(kept.begin(), kept.end(),
                     [&](Index a, Index b) { return std::abs(coeffs(a)) > std::abs(coeffs(b)); });

    const FineGrid& g = op.grid();
    const Index rad = cfg.cluster_radius;
    auto near = [&](const GridIndex& a, const GridIndex& b) {
        return std::abs(detail::cell_offset(a.beta, b.beta, g.K_beta)) <= rad &&
               std::abs(detail::cell_offset(a.delay, b.delay, g.K_delay)) <= rad &&
               std::abs(detail::cell_offset(a.doppler, b.doppler, g.K_doppler)) <= rad;
    };

    std::vector<bool> taken(kept.size(), false);
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (taken[i]) continue;
        const GridIndex centre = op.grid_index(kept[i]);
        auto& cl = clusters.emplace_back();
        for (std::size_t j = i; j < kept.size(); ++j) {
            if (taken[j]) continue;
            const GridIndex gj = op.grid_index(kept[j]);
            if (near(centre, gj)) {
                taken[j] = true;
                cl.emplace_back(gj, coeffs(kept[j]));
            }
        }
    }
    return clusters;
}

///
/// Magnitude-weighted centroid of a cluster in continuous coordinates. Offsets
/// are measured from the strongest cell so clusters straddling the wrap point
/// average correctly. With peak_only the strongest cell itself is returned.
///
inline Estimate cluster_centroid(const GridOperator& op,
                                 const std::vector<std::pair<GridIndex, Complex>>& cluster,
                                 bool peak_only = false)
{
    const FineGrid& g = op.grid();
    const auto anchor = std::max_element(cluster.begin(), cluster.end(), [](const auto& a, const auto& b) {
        return std::abs(a.second) < std::abs(b.second);
    });
    const GridIndex a = anchor->first;
    Real w = 0.0, ob = 0.0, od = 0.0, of = 0.0;
    Complex sum{0.0, 0.0};
    for (const auto& [idx, c] : cluster) {
        const Real m = std::abs(c);
        w += m;
        ob += m * static_cast<Real>(detail::cell_offset(idx.beta, a.beta, g.K_beta));
        od += m * static_cast<Real>(detail::cell_offset(idx.delay, a.delay, g.K_delay));
        of += m * static_cast<Real>(detail::cell_offset(idx.doppler, a.doppler, g.K_doppler));
        sum += c;
    }
    Estimate e;
    e.b = sum;
    if (peak_only) {
        ob = od = of = 0.0;
    }
    e.beta = wrap_unit((static_cast<Real>(a.beta) + ob / w) / static_cast<Real>(g.K_beta));
    e.tau = wrap_unit((static_cast<Real>(a.delay) + od / w) / static_cast<Real>(g.K_delay));
    e.nu = wrap_unit((static_cast<Real>(a.doppler) + of / w) / static_cast<Real>(g.K_doppler));
    return e;
}

///
/// Least-squares gains y ~ sum_k b_k c(r_k) for fixed locations r_k, with
/// c(r) the off-grid array response. Estimates are admitted strongest first;
/// one whose column is numerically dependent on those already admitted
/// (relative residual below 1e-8 after Gram-Schmidt) is flagged and gets
/// gain zero.
///
inline Real debias(const GridOperator& op, const CVector& y, std::vector<Estimate>& est)
{
    if (y.size() != op.rows()) throw DimensionError("measurement size does not match operator");
    if (est.empty()) return y.norm();
    const auto n = static_cast<Index>(est.size());
    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) order[static_cast<std::size_t>(k)] = k;
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return std::abs(est[a].b) > std::abs(est[b].b); });

    CMatrix Qb(op.rows(), std::min(n, op.rows()));
    std::vector<Index> kept;
    for (Index k : order) {
        est[k].rank_deficient = true;
        if (static_cast<Index>(kept.size()) == Qb.cols()) continue;
        CVector c = op.column_at(est[k].beta, est[k].tau, est[k].nu);
        const Real cn = c.norm();
        if (!(cn > 0.0)) continue;
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t j = 0; j < kept.size(); ++j) {
                const auto col = Qb.col(static_cast<Index>(j));
                c -= col.dot(c) * col;
            }
        }
        const Real rn = c.norm();
        if (rn < 1e-8 * cn) continue;
        Qb.col(static_cast<Index>(kept.size())) = c / rn;
        kept.push_back(k);
        est[k].rank_deficient = false;
    }

    CMatrix C(op.rows(), static_cast<Index>(kept.size()));
    for (std::size_t j = 0; j < kept.size(); ++j) {
        const auto& e = est[kept[j]];
        C.col(static_cast<Index>(j)) = op.column_at(e.beta, e.tau, e.nu);
    }
    const CVector b = C.colPivHouseholderQr().solve(y);
    for (auto& e : est) {
        if (e.rank_deficient) e.b = Complex(0.0, 0.0);
    }
    for (std::size_t j = 0; j < kept.size(); ++j) est[kept[j]].b = b(static_cast<Index>(j));
    return (y - C * b).norm();
}

inline SparseSolution extract_and_debias(const GridOperator& op, const CVector& y,
                                         const CVector& coeffs, const ExtractConfig& cfg = {})
{
    SparseSolution sol;
    for (Index i = 0; i < coeffs.size(); ++i) {
        if (coeffs(i) != Complex(0.0, 0.0)) sol.coeffs.emplace_back(op.grid_index(i), coeffs(i));
    }
    for (const auto& c : cluster_coefficients(op, coeffs, cfg)) {
        sol.estimates.push_back(cluster_centroid(op, c, cfg.location == Location::peak));
    }
    if (cfg.debias) {
        sol.residual_norm = debias(op, y, sol.estimates);
    } else {
        sol.residual_norm = (y - op.apply(coeffs)).norm();
    }
    sol.rank_deficient = std::any_of(sol.estimates.begin(), sol.estimates.end(),
                                     [](const Estimate& e) { return e.rank_deficient; });
    return sol;
}

struct Recovery
{
    L1Result solve;
    SparseSolution solution;
};

///
/// Solve on the grid operator, then extract and debias. delta = 0 selects the
/// equality program.
///
inline Recovery recover(const GridOperator& op, const CVector& y, SolverConfig cfg,
                        const ExtractConfig& ex = {})
{
    Recovery out;
    out.solve = cfg.delta > 0.0 ? solve_l1_err(op, y, cfg) : solve_l1(op, y, cfg);
    out.solution = extract_and_debias(op, y, out.solve.coeffs, ex);
    return out;
}

struct SupportCheck
{
    bool exact{false};
    Real coeff_error{std::numeric_limits<Real>::infinity()};  ///< max gain error after the refit
    Index detected{0};
};

///
/// Compare the cells carrying coefficients above threshold * max against a
/// known on-grid support; on a match, refit the gains on the detected columns
/// by least squares and report the largest gain error.
///
inline SupportCheck check_support(const GridOperator& op, const CVector& y, const CVector& coeffs,
                                  const std::vector<std::pair<Index, Complex>>& truth,
                                  Real threshold = 1e-3)
{
    SupportCheck out;
    const Real peak = coeffs.size() > 0 ? coeffs.cwiseAbs().maxCoeff() : 0.0;
    std::vector<Index> found;
    for (Index i = 0; i < coeffs.size(); ++i) {
        if (peak > 0.0 && std::abs(coeffs(i)) >= threshold * peak) found.push_back(i);
    }
    out.detected = static_cast<Index>(found.size());
    std::vector<Index> want;
    for (const auto& t : truth) want.push_back(t.first);
    std::sort(want.begin(), want.end());
    if (found != want) return out;
    out.exact = true;
    if (found.empty()) {
        out.coeff_error = 0.0;
        return out;
    }
    CMatrix C(op.rows(), static_cast<Index>(found.size()));
    for (std::size_t k = 0; k < found.size(); ++k) C.col(static_cast<Index>(k)) = op.column(found[k]);
    const CVector b = C.colPivHouseholderQr().solve(y);
    out.coeff_error = 0.0;
    for (const auto& [idx, val] : truth) {
        const auto pos = std::lower_bound(found.begin(), found.end(), idx) - found.begin();
        out.coeff_error = std::max(out.coeff_error, std::abs(b(pos) - val));
    }
    return out;
}

/// Per-axis weights of the resolution error.
struct ErrorScale
{
    Real beta{0.0};
    Real tau{1.0};
    Real nu{1.0};

    static ErrorScale siso(Index L)
    {
        const auto l = static_cast<Real>(L);
        return {0.0, l, l};
    }

    static ErrorScale mimo(Index L, Index n_tx, Index n_rx)
    {
        const auto l = static_cast<Real>(L);
        return {static_cast<Real>(n_tx * n_rx), l, l};
    }
};

struct ResolutionError
{
    Real mean{0.0};
    Index matched{0};
    Index unmatched_truth{0};
    Index unmatched_estimates{0};
    std::vector<Real> per_pair;          ///< per truth entry, NaN when unmatched
    std::vector<std::ptrdiff_t> match;   ///< estimate index per truth entry, -1 when unmatched
};

///
/// Greedy nearest-pair matching in the scaled wrap-around metric, then the
/// average over matched pairs of
///
///   sqrt(s_b^2 db^2 + s_t^2 dt^2 + s_n^2 dn^2).
///
inline ResolutionError resolution_error(const std::vector<Estimate>& est,
                                        const std::vector<Estimate>& truth, ErrorScale scale)
{
    struct Pair
    {
        Real d;
        std::size_t e, t;
    };
    std::vector<Pair> pairs;
    pairs.reserve(est.size() * truth.size());
    for (std::size_t i = 0; i < est.size(); ++i) {
        for (std::size_t j = 0; j < truth.size(); ++j) {
            const Real db = scale.beta * wrap_diff(est[i].beta, truth[j].beta);
            const Real dt = scale.tau * wrap_diff(est[i].tau, truth[j].tau);
            const Real dn = scale.nu * wrap_diff(est[i].nu, truth[j].nu);
            pairs.push_back({std::sqrt(db * db + dt * dt + dn * dn), i, j});
        }
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.d < b.d; });

    std::vector<bool> used_e(est.size(), false), used_t(truth.size(), false);
    ResolutionError out;
    out.per_pair.assign(truth.size(), std::numeric_limits<Real>::quiet_NaN());
    out.match.assign(truth.size(), -1);
    Real total = 0.0;
    for (const auto& p : pairs) {
        if (used_e[p.e] || used_t[p.t]) continue;
        used_e[p.e] = used_t[p.t] = true;
        out.per_pair[p.t] = p.d;
        out.match[p.t] = static_cast<std::ptrdiff_t>(p.e);
        total += p.d;
        ++out.matched;
    }
    out.mean = out.matched > 0 ? total / static_cast<Real>(out.matched) : 0.0;
    out.unmatched_truth = static_cast<Index>(truth.size()) - out.matched;
    out.unmatched_estimates = static_cast<Index>(est.size()) - out.matched;
    return out;
}

/// SISO form: average of L sqrt(dtau^2 + dnu^2).
inline ResolutionError resolution_error(const std::vector<Estimate>& est,
                                        const std::vector<Scatterer>& truth, Index L)
{
    std::vector<Estimate> t;
    t.reserve(truth.size());
    for (const auto& s : truth) t.push_back({s.b, 0.0, s.tau, s.nu, false});
    return resolution_error(est, t, ErrorScale::siso(L));
}

} // namespace srradar

#endif
