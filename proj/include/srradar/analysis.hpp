#ifndef SRRADAR_ANALYSIS_HPP
#define SRRADAR_ANALYSIS_HPP

///
/// \file analysis.hpp
///
/// Minimum-separation predicates on the torus and the conditioning of
/// Vandermonde matrices with closely spaced nodes. Condition numbers beyond
/// what double precision resolves are finished in MPFR arithmetic.
///

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/SVD>
#include <boost/multiprecision/mpfr.hpp>

#include <srradar/types.hpp>

namespace srradar
{

/// Distance between a and b on the unit circle R/Z.
inline Real wrap_distance(Real a, Real b)
{
    const Real d = wrap_unit(a - b);
    return std::min(d, 1.0 - d);
}

/// Location (beta, tau, nu); SISO nodes keep beta = 0.
struct Node
{
    Real beta{0.0};
    Real tau{0.0};
    Real nu{0.0};
};

struct SeparationReport
{
    Real min_pairwise{std::numeric_limits<Real>::infinity()};
    bool satisfied{true};
    Real threshold{0.0};
    std::vector<std::pair<std::size_t, std::size_t>> violating_pairs;
};

inline Real siso_separation_threshold(Index L)
{
    return 2.38 / static_cast<Real>(half_length(L));
}

///
/// Pairs must satisfy max(|tau - tau'|, |nu - nu'|) >= 2.38 / N in the wrap
/// metric. min_pairwise is the smallest such max-coordinate distance.
///
inline SeparationReport check_separation_siso(const std::vector<Node>& nodes, Index L)
{
    SeparationReport rep;
    rep.threshold = siso_separation_threshold(L);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < nodes.size(); ++j) {
            const Real d = std::max(wrap_distance(nodes[i].tau, nodes[j].tau),
                                    wrap_distance(nodes[i].nu, nodes[j].nu));
            rep.min_pairwise = std::min(rep.min_pairwise, d);
            if (d < rep.threshold) rep.violating_pairs.emplace_back(i, j);
        }
    }
    rep.satisfied = rep.violating_pairs.empty();
    return rep;
}

///
/// Pairs must satisfy |beta - beta'| >= 10/(N_T N_R - 1) or
/// |tau - tau'| >= 5/N or |nu - nu'| >= 5/N. The reported threshold is the
/// angle threshold; min_pairwise is the smallest pairwise value of
/// max(dbeta / t_beta, dtau / t_delay, dnu / t_delay), so the rule holds
/// exactly when min_pairwise >= 1.
///
inline SeparationReport check_separation_mimo(const std::vector<Node>& nodes, Index n_tx,
                                              Index n_rx, Index L)
{
    if (n_tx < 1 || n_rx < 1) throw std::invalid_argument("array sizes must be positive");
    const Index aperture = n_tx * n_rx;
    const Real t_beta = aperture > 1 ? 10.0 / static_cast<Real>(aperture - 1)
                                     : std::numeric_limits<Real>::infinity();
    const Real t_delay = 5.0 / static_cast<Real>(half_length(L));
    SeparationReport rep;
    rep.threshold = t_beta;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < nodes.size(); ++j) {
            const Real db = wrap_distance(nodes[i].beta, nodes[j].beta);
            const Real dt = wrap_distance(nodes[i].tau, nodes[j].tau);
            const Real dn = wrap_distance(nodes[i].nu, nodes[j].nu);
            const bool ok = db >= t_beta || dt >= t_delay || dn >= t_delay;
            const Real score = std::max({db / t_beta, dt / t_delay, dn / t_delay});
            rep.min_pairwise = std::min(rep.min_pairwise, score);
            if (!ok) rep.violating_pairs.emplace_back(i, j);
        }
    }
    rep.satisfied = rep.violating_pairs.empty();
    return rep;
}

namespace detail
{

///
/// Smallest eigenvalue of V^H V in `digits` decimal digits. V^H V is unitarily
/// similar to the real Toeplitz matrix T(k) = sin(pi k a) / sin(pi k a / L),
/// T(0) = L, a = 1 - eps. Cholesky followed by inverse iteration; nullopt
/// when T is not numerically positive definite at this precision.
///
inline std::optional<boost::multiprecision::mpfr_float> gram_lambda_min(Index S, Real eps, Index L, unsigned digits)
{
    using mp = boost::multiprecision::mpfr_float;
    const unsigned saved = mp::default_precision();
    mp::default_precision(digits);
    struct Restore
    {
        unsigned d;
        ~Restore() { mp::default_precision(d); }
    } restore{saved};

    const auto n = static_cast<std::size_t>(2 * S);
    const mp pi = boost::multiprecision::acos(mp(-1));
    const mp a = mp(1) - mp(eps);
    std::vector<mp> t(n);
    t[0] = mp(L);
    for (std::size_t k = 1; k < n; ++k) {
        const mp x = pi * static_cast<long>(k) * a;
        t[k] = sin(x) / sin(x / L);
    }

    // Lower Cholesky factor, row-major packed in a dense n x n buffer.
    std::vector<mp> R(n * n, mp(0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            mp acc = t[i - j];
            for (std::size_t k = 0; k < j; ++k) acc -= R[i * n + k] * R[j * n + k];
            if (i == j) {
                if (acc <= 0) return std::nullopt;
                R[i * n + i] = sqrt(acc);
            } else {
                R[i * n + j] = acc / R[j * n + j];
            }
        }
    }

    // Asymmetric start so both persymmetric eigenvector families are present.
    std::vector<mp> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = mp(1 + static_cast<long>(i));
    auto normalize = [&](std::vector<mp>& v) {
        mp s2 = 0;
        for (const auto& e : v) s2 += e * e;
        const mp nrm = sqrt(s2);
        for (auto& e : v) e /= nrm;
    };
    normalize(x);
    mp rq = 0, prev = 0;
    for (int it = 0; it < 2000; ++it) {
        for (std::size_t i = 0; i < n; ++i) {  // R z = x
            mp acc = x[i];
            for (std::size_t k = 0; k < i; ++k) acc -= R[i * n + k] * y[k];
            y[i] = acc / R[i * n + i];
        }
        for (std::size_t i = n; i-- > 0;) {  // R^T y = z
            mp acc = y[i];
            for (std::size_t k = i + 1; k < n; ++k) acc -= R[k * n + i] * y[k];
            y[i] = acc / R[i * n + i];
        }
        rq = 0;
        for (std::size_t i = 0; i < n; ++i) rq += x[i] * y[i];  // -> 1 / lambda_min
        x = y;
        normalize(x);
        if (it > 2 && abs(rq - prev) < rq * mp(1e-15)) break;
        prev = rq;
    }
    return mp(1) / rq;
}

} // namespace detail

///
/// Condition number sigma_max / sigma_min of the L x 2S matrix with entries
/// e^{i2pi p q (1 - eps) / L}, p = 0..L-1, q = 0..2S-1, from its SVD. When
/// the double-precision result exceeds 1e8, sigma_min is recomputed as the
/// square root of the smallest Gram eigenvalue in MPFR arithmetic, raising
/// the precision until it resolves the eigenvalue ratio.
///
inline Real vandermonde_condition(Index S, Real eps, Index L)
{
    if (S < 1 || L < 1) throw std::invalid_argument("S and L must be positive");
    if (2 * S > L) throw std::invalid_argument("need 2S <= L");
    if (!(eps >= 0.0 && eps < 1.0)) throw std::invalid_argument("eps must lie in [0, 1)");
    CMatrix V(L, 2 * S);
    for (Index p = 0; p < L; ++p) {
        for (Index q = 0; q < 2 * S; ++q) {
            const Real t = static_cast<Real>(p * q) * (1.0 - eps) / static_cast<Real>(L);
            V(p, q) = cis2pi(t - std::floor(t));
        }
    }
    Eigen::JacobiSVD<CMatrix> svd(V);
    const RVector& s = svd.singularValues();
    const Real smax = s(0), smin = s(s.size() - 1);
    if (smin > 0.0 && smax / smin < 1e8) return smax / smin;

    using mp = boost::multiprecision::mpfr_float;
    for (unsigned digits = 60; digits <= 3840; digits *= 2) {
        const auto lmin = detail::gram_lambda_min(S, eps, L, digits);
        if (!lmin) continue;
        const unsigned saved = mp::default_precision();
        mp::default_precision(digits);
        const mp ratio = mp(smax) * mp(smax) / *lmin;
        const bool resolved = *lmin > 0 && ratio < pow(mp(10), static_cast<int>(digits) - 30);
        const mp kappa = sqrt(ratio);
        mp::default_precision(saved);
        if (resolved) return kappa > mp(std::numeric_limits<Real>::max()) ? std::numeric_limits<Real>::infinity()
                                                                         : static_cast<Real>(kappa);
    }
    return std::numeric_limits<Real>::infinity();
}

struct ConditionRow
{
    Index S{0};
    Real eps{0.0};
    Real inv_kappa{0.0};
};

/// eps_count points spread evenly over [0, eps_max].
inline std::vector<Real> eps_grid(Index eps_count, Real eps_max = 0.98)
{
    std::vector<Real> g;
    if (eps_count <= 0) return g;
    if (eps_count == 1) return {0.0};
    for (Index i = 0; i < eps_count; ++i) {
        g.push_back(eps_max * static_cast<Real>(i) / static_cast<Real>(eps_count - 1));
    }
    return g;
}

/// Rows ordered by S, then eps.
inline std::vector<ConditionRow> condition_sweep(Index L, const std::vector<Index>& S_list,
                                                 const std::vector<Real>& eps)
{
    std::vector<ConditionRow> rows;
    for (Index S : S_list) {
        for (Real e : eps) rows.push_back({S, e, 1.0 / vandermonde_condition(S, e, L)});
    }
    return rows;
}

} // namespace srradar

#endif
