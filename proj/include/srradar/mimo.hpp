#ifndef SRRADAR_MIMO_HPP
#define SRRADAR_MIMO_HPP

///
/// \file mimo.hpp
///
/// MIMO radar with N_T transmit and N_R receive antennas on a line. With
/// transmit spacing c/(2 f_c) and receive spacing N_T c/(2 f_c) the phases
/// e^{i2pi(j + r N_T) beta} cover a uniform virtual array of N_T N_R elements,
/// and receiver r sees
///
///   [y_r]_p = sum_k b_k e^{i2pi r N_T beta_k} sum_j e^{i2pi j beta_k} [F_nu_k T_tau_k x_j]_p.
///

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <srradar/core.hpp>
#include <srradar/extract.hpp>
#include <srradar/grid.hpp>
#include <srradar/solver.hpp>

namespace srradar
{

inline constexpr Real speed_of_light = 299792458.0;

struct MimoConfig
{
    Index n_tx{3};
    Index n_rx{3};
    Index L{41};
    Real f_c{1e9};

    ArrayShape shape() const { return {n_tx, n_rx}; }
    Index aperture() const { return n_tx * n_rx; }
    Real tx_spacing() const { return speed_of_light / (2.0 * f_c); }
    Real rx_spacing() const { return speed_of_light * static_cast<Real>(n_tx) / (2.0 * f_c); }

    void validate() const
    {
        if (n_tx < 1 || n_rx < 1) throw std::invalid_argument("antenna counts must be positive");
        half_length(L);
        if (!(f_c > 0.0)) throw std::invalid_argument("carrier frequency must be positive");
    }
};

struct MimoScatterer
{
    Complex b{1.0, 0.0};
    Real beta{0.0};
    Real tau{0.0};
    Real nu{0.0};
};

struct MimoScene
{
    Index L{0};
    Index n_tx{1};
    Index n_rx{1};
    std::vector<MimoScatterer> scatterers;
};

/// beta = -sin(theta) / 2, reduced to [0, 1).
inline Real angle_to_beta(Real theta) { return wrap_unit(-std::sin(theta) / 2.0); }

/// N_T probing signals with i.i.d. entries of variance 1 / (N_T L).
inline std::vector<ProbingSignal> random_mimo_probing(const MimoConfig& cfg, std::uint64_t seed,
                                                      ProbeKind kind = ProbeKind::gaussian)
{
    cfg.validate();
    const Real var = 1.0 / static_cast<Real>(cfg.n_tx * cfg.L);
    std::vector<ProbingSignal> probes;
    for (Index j = 0; j < cfg.n_tx; ++j) {
        probes.push_back(random_probing(cfg.L, derive_seed(seed, static_cast<std::uint64_t>(j), Stream::probe), kind, var));
    }
    return probes;
}

inline CVector synthesize_mimo(const std::vector<ProbingSignal>& probes,
                               const std::vector<MimoScatterer>& scene, const MimoConfig& cfg)
{
    cfg.validate();
    if (static_cast<Index>(probes.size()) != cfg.n_tx) throw DimensionError("need one probing signal per transmitter");
    for (const auto& p : probes) {
        if (p.length() != cfg.L) throw DimensionError("probe length does not match L");
    }
    CVector y = CVector::Zero(cfg.n_rx * cfg.L);
    for (const auto& s : scene) y += s.b * array_response(probes, cfg.shape(), s.beta, s.tau, s.nu);
    return y;
}

///
/// Atom over the triple index (v, k, p), v = 0..N_T N_R - 1, k, p = -N..N,
/// stored at (v L + k + N) L + p + N, with entries e^{i2pi(v beta + k tau + p nu)}.
///
inline CVector mimo_atom(Real beta, Real tau, Real nu, Index aperture, Index L)
{
    const Index N = half_length(L);
    CVector f(aperture * L * L);
    for (Index v = 0; v < aperture; ++v) {
        const Complex ev = cis2pi(static_cast<Real>(v) * beta);
        for (Index k = -N; k <= N; ++k) {
            const Complex ek = ev * cis2pi(static_cast<Real>(k) * tau);
            for (Index p = -N; p <= N; ++p) {
                f((v * L + k + N) * L + p + N) = ek * cis2pi(static_cast<Real>(p) * nu);
            }
        }
    }
    return f;
}

///
/// A with A mimo_atom(r) equal to the array response at r:
///
///   (A z)_{r,p} = sum_j sum_k a_{p,k,j} z_{(j + r N_T, k, p)},
///   a_{p,k,j} = (1/L) sum_l [x_j]_l e^{i2pi(l - p)k/L}.
///
class MimoAtomOperator
{
public:
    MimoAtomOperator(std::vector<ProbingSignal> probes, ArrayShape shape)
        : m_probes(std::move(probes)), m_shape(shape)
    {
        if (static_cast<Index>(m_probes.size()) != shape.n_tx) {
            throw DimensionError("need one probing signal per transmitter");
        }
        m_L = m_probes.front().length();
        const Index N = half_length(m_L);
        for (const auto& x : m_probes) {
            if (x.length() != m_L) throw DimensionError("probing signals differ in length");
            CMatrix a(m_L, m_L);  // a(p + N, k + N)
            for (Index p = -N; p <= N; ++p) {
                for (Index k = -N; k <= N; ++k) {
                    Complex acc{0.0, 0.0};
                    for (Index l = -N; l <= N; ++l) {
                        acc += x.at(l) * cis2pi(static_cast<Real>(mod_index((l - p) * k, m_L)) / m_L);
                    }
                    a(p + N, k + N) = acc / static_cast<Real>(m_L);
                }
            }
            m_a.push_back(std::move(a));
        }
    }

    Index rows() const { return m_shape.n_rx * m_L; }
    Index cols() const { return m_shape.aperture() * m_L * m_L; }

    CVector apply(const CVector& z) const
    {
        if (z.size() != cols()) throw DimensionError("mimo atom operator: bad input size");
        const Index L = m_L;
        CVector y = CVector::Zero(rows());
        for (Index r = 0; r < m_shape.n_rx; ++r) {
            for (Index j = 0; j < m_shape.n_tx; ++j) {
                const Index v = j + r * m_shape.n_tx;
                for (Index p = 0; p < L; ++p) {
                    Complex acc{0.0, 0.0};
                    for (Index k = 0; k < L; ++k) acc += m_a[j](p, k) * z((v * L + k) * L + p);
                    y(r * L + p) += acc;
                }
            }
        }
        return y;
    }

    CVector adjoint(const CVector& y) const
    {
        if (y.size() != rows()) throw DimensionError("mimo atom operator: bad input size");
        const Index L = m_L;
        CVector w(cols());
        for (Index r = 0; r < m_shape.n_rx; ++r) {
            for (Index j = 0; j < m_shape.n_tx; ++j) {
                const Index v = j + r * m_shape.n_tx;
                for (Index p = 0; p < L; ++p) {
                    for (Index k = 0; k < L; ++k) w((v * L + k) * L + p) = std::conj(m_a[j](p, k)) * y(r * L + p);
                }
            }
        }
        return w;
    }

private:
    std::vector<ProbingSignal> m_probes;
    ArrayShape m_shape;
    Index m_L{0};
    std::vector<CMatrix> m_a;
};

/// Grid defaults K1 = srf N_T N_R, K2 = K3 = srf L.
inline FineGrid mimo_grid(const MimoConfig& cfg, Index srf, std::optional<Region> region = std::nullopt)
{
    return FineGrid::mimo(cfg.L, srf * cfg.aperture(), srf * cfg.L, srf * cfg.L, region);
}

inline Recovery solve_l1_mimo(const CVector& y, const std::vector<ProbingSignal>& probes,
                              const MimoConfig& cfg, const FineGrid& grid,
                              const SolverConfig& solver = {}, const ExtractConfig& ex = {})
{
    const GridOperator op(probes, cfg.shape(), grid);
    return recover(op, y, solver, ex);
}

inline ResolutionError mimo_resolution_error(const std::vector<Estimate>& est,
                                             const std::vector<MimoScatterer>& truth,
                                             const MimoConfig& cfg)
{
    std::vector<Estimate> t;
    t.reserve(truth.size());
    for (const auto& s : truth) t.push_back({s.b, s.beta, s.tau, s.nu, false});
    return resolution_error(est, t, ErrorScale::mimo(cfg.L, cfg.n_tx, cfg.n_rx));
}

} // namespace srradar

#endif
