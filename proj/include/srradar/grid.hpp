#ifndef SRRADAR_GRID_HPP
#define SRRADAR_GRID_HPP

///
/// \file grid.hpp
///
/// Fine-grid dictionary R whose columns are (virtual-array phased) fractional
/// time-frequency shifts of the probing signals, applied implicitly.
///

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <srradar/core.hpp>

namespace srradar
{

/// Fraction of the unit interval kept along the delay and Doppler axes.
struct Region
{
    Real tau_max_frac{1.0};
    Real nu_max_frac{1.0};
};

///
/// Grid with spacing (1/K_beta, 1/K_delay, 1/K_doppler). SISO grids have
/// K_beta = 1. An optional region keeps indices n < ceil(frac * K) on the
/// delay and Doppler axes.
///
struct FineGrid
{
    Index L{0};
    Index K_beta{1};
    Index K_delay{0};
    Index K_doppler{0};
    std::optional<Region> region;

    static FineGrid siso(Index L, Index K, std::optional<Region> region = std::nullopt)
    {
        FineGrid g;
        g.L = L;
        g.K_beta = 1;
        g.K_delay = K;
        g.K_doppler = K;
        g.region = region;
        g.validate(1);
        return g;
    }

    static FineGrid mimo(Index L, Index K1, Index K2, Index K3,
                         std::optional<Region> region = std::nullopt)
    {
        FineGrid g;
        g.L = L;
        g.K_beta = K1;
        g.K_delay = K2;
        g.K_doppler = K3;
        g.region = region;
        return g;
    }

    /// SISO grid with K = srf * L.
    static FineGrid from_srf(Index L, Index srf, std::optional<Region> region = std::nullopt)
    {
        return siso(L, srf * L, region);
    }

    Real srf() const { return static_cast<Real>(K_delay) / static_cast<Real>(L); }

    Index delay_count() const
    {
        if (!region) return K_delay;
        return clamp_count(region->tau_max_frac, K_delay);
    }

    Index doppler_count() const
    {
        if (!region) return K_doppler;
        return clamp_count(region->nu_max_frac, K_doppler);
    }

    Index size() const { return K_beta * delay_count() * doppler_count(); }

    /// Checks K >= L on the delay/Doppler axes and K_beta >= virtual aperture.
    void validate(Index virtual_aperture) const
    {
        half_length(L);
        if (K_delay < L || K_doppler < L) {
            throw DimensionError("fine grid must satisfy K >= L");
        }
        if (K_beta < virtual_aperture) {
            throw DimensionError("angle grid must satisfy K1 >= N_T * N_R");
        }
        if (region && (region->tau_max_frac <= 0.0 || region->nu_max_frac <= 0.0)) {
            throw std::invalid_argument("region fractions must be positive");
        }
    }

private:
    static Index clamp_count(Real frac, Index K)
    {
        const auto n = static_cast<Index>(std::ceil(frac * static_cast<Real>(K) - 1e-9));
        return std::clamp<Index>(n, 1, K);
    }
};

/// Integer location on the fine grid.
struct GridIndex
{
    Index beta{0};
    Index delay{0};
    Index doppler{0};

    friend bool operator==(const GridIndex&, const GridIndex&) = default;
    friend auto operator<=>(const GridIndex&, const GridIndex&) = default;
};

/// Virtual-array geometry: N_T transmitters, N_R receivers.
struct ArrayShape
{
    Index n_tx{1};
    Index n_rx{1};
    Index aperture() const { return n_tx * n_rx; }
};

///
/// Response of the virtual array to a unit scatterer at (beta, tau, nu):
/// block r holds e^{i2pi r N_T beta} sum_j e^{i2pi j beta} F_nu T_tau x_j.
///
inline CVector array_response(const std::vector<ProbingSignal>& probes, ArrayShape shape,
                              Real beta, Real tau, Real nu)
{
    if (static_cast<Index>(probes.size()) != shape.n_tx) {
        throw DimensionError("need one probing signal per transmitter");
    }
    const Index L = probes.front().length();
    CVector tx = CVector::Zero(L);
    for (Index j = 0; j < shape.n_tx; ++j) {
        if (probes[j].length() != L) throw DimensionError("probing signals differ in length");
        tx += cis2pi(static_cast<Real>(j) * beta) * shifted_probe(probes[j], tau, nu);
    }
    CVector y(shape.n_rx * L);
    for (Index r = 0; r < shape.n_rx; ++r) {
        y.segment(r * L, L) = cis2pi(static_cast<Real>(r * shape.n_tx) * beta) * tx;
    }
    return y;
}

enum class DopplerTransform
{
    automatic,
    dense,
    fft,
};

///
/// Implicit fine-grid matrix R. Column (n1, n2, n3) is
///
///   [ e^{i2pi r N_T beta} sum_j e^{i2pi j beta} F_nu T_tau x_j ]_{r = 0..N_R-1}
///
/// at (beta, tau, nu) = (n1/K1, n2/K2, n3/K3), stacked over receivers. Column
/// storage is row-major in (n1, n2, n3), so Doppler varies fastest.
///
/// Forward application factors as a Doppler transform (DFT along n3, read at
/// the L sample positions), an entrywise weighting by the precomputed delay
/// shifts [T_{n2/K2} x_j]_p, and a small phase sum over the angle axis.
///
class GridOperator
{
public:
    GridOperator(const ProbingSignal& x, const FineGrid& grid,
                 DopplerTransform transform = DopplerTransform::automatic)
        : GridOperator(std::vector<ProbingSignal>{x}, ArrayShape{1, 1}, grid, transform)
    {
    }

    GridOperator(std::vector<ProbingSignal> probes, ArrayShape shape, const FineGrid& grid,
                 DopplerTransform transform = DopplerTransform::automatic)
        : m_grid(grid), m_shape(shape)
    {
        if (static_cast<Index>(probes.size()) != shape.n_tx || shape.n_rx < 1) {
            throw DimensionError("need one probing signal per transmitter");
        }
        for (const auto& p : probes) {
            if (p.length() != grid.L) throw DimensionError("probe length does not match grid L");
        }
        m_grid.validate(shape.aperture());
        m_L = grid.L;
        m_N = half_length(m_L);
        m_nb = grid.K_beta;
        m_nd = grid.delay_count();
        m_nf = grid.doppler_count();

        m_delay.reserve(probes.size());
        for (const auto& p : probes) {
            CMatrix H(m_L, m_nd);
            for (Index n = 0; n < m_nd; ++n) {
                H.col(n) = fractional_time_shift(p, static_cast<Real>(n) / grid.K_delay);
            }
            m_delay.push_back(std::move(H));
        }

        m_doppler.resize(m_L, m_nf);
        for (Index p = -m_N; p <= m_N; ++p) {
            for (Index m = 0; m < m_nf; ++m) {
                m_doppler(p + m_N, m) =
                    cis2pi(static_cast<Real>(mod_index(p * m, grid.K_doppler)) / grid.K_doppler);
            }
        }

        m_phase.reserve(probes.size());
        for (Index j = 0; j < shape.n_tx; ++j) {
            CMatrix P(shape.n_rx, m_nb);
            for (Index r = 0; r < shape.n_rx; ++r) {
                const Index v = j + r * shape.n_tx;
                for (Index n1 = 0; n1 < m_nb; ++n1) {
                    P(r, n1) = cis2pi(static_cast<Real>(mod_index(v * n1, m_nb)) / m_nb);
                }
            }
            m_phase.push_back(std::move(P));
        }

        const bool full_doppler = (m_nf == grid.K_doppler);
        switch (transform) {
        case DopplerTransform::dense: m_use_fft = false; break;
        case DopplerTransform::fft:
            if (!full_doppler) throw std::invalid_argument("FFT path needs the full Doppler axis");
            m_use_fft = true;
            break;
        case DopplerTransform::automatic: {
            const Real K = static_cast<Real>(grid.K_doppler);
            m_use_fft = full_doppler && static_cast<Real>(m_L) > 20.0 * std::log2(K);
            break;
        }
        }
        m_probes = std::move(probes);
    }

    Index rows() const { return m_shape.n_rx * m_L; }
    Index cols() const { return m_nb * m_nd * m_nf; }

    const FineGrid& grid() const { return m_grid; }
    const ArrayShape& shape() const { return m_shape; }
    const std::vector<ProbingSignal>& probes() const { return m_probes; }
    bool uses_fft() const { return m_use_fft; }

    Index flat_index(const GridIndex& g) const
    {
        return (g.beta * m_nd + g.delay) * m_nf + g.doppler;
    }

    GridIndex grid_index(Index flat) const
    {
        GridIndex g;
        g.doppler = flat % m_nf;
        flat /= m_nf;
        g.delay = flat % m_nd;
        g.beta = flat / m_nd;
        return g;
    }

    bool contains(const GridIndex& g) const
    {
        return g.beta >= 0 && g.beta < m_nb && g.delay >= 0 && g.delay < m_nd &&
               g.doppler >= 0 && g.doppler < m_nf;
    }

    Real beta_of(const GridIndex& g) const { return static_cast<Real>(g.beta) / m_grid.K_beta; }
    Real tau_of(const GridIndex& g) const { return static_cast<Real>(g.delay) / m_grid.K_delay; }
    Real nu_of(const GridIndex& g) const { return static_cast<Real>(g.doppler) / m_grid.K_doppler; }

    /// Column for the flat index, O(rows).
    CVector column(Index flat) const
    {
        if (flat < 0 || flat >= cols()) throw std::out_of_range("grid column index out of range");
        const GridIndex g = grid_index(flat);
        CVector col(rows());
        CVector tx = CVector::Zero(m_L);
        for (Index r = 0; r < m_shape.n_rx; ++r) {
            tx.setZero();
            for (Index j = 0; j < m_shape.n_tx; ++j) tx += m_phase[j](r, g.beta) * m_delay[j].col(g.delay);
            col.segment(r * m_L, m_L) = tx.cwiseProduct(m_doppler.col(g.doppler));
        }
        return col;
    }

    /// Off-grid column: the array response at a continuous location.
    CVector column_at(Real beta, Real tau, Real nu) const
    {
        return array_response(m_probes, m_shape, beta, tau, nu);
    }

    CVector apply(const CVector& b) const
    {
        if (b.size() != cols()) throw DimensionError("grid forward: coefficient size mismatch");
        Eigen::Map<const CMatrix> B(b.data(), m_nf, m_nb * m_nd);
        const CMatrix D = doppler_forward(B);  // L x (nb * nd)

        CMatrix Y = CMatrix::Zero(m_shape.n_rx, m_L);
        CMatrix Ej(m_nb, m_L);
        for (Index j = 0; j < m_shape.n_tx; ++j) {
            const CMatrix& H = m_delay[j];
            for (Index n1 = 0; n1 < m_nb; ++n1) {
                Ej.row(n1) = D.middleCols(n1 * m_nd, m_nd)
                                 .cwiseProduct(H)
                                 .rowwise()
                                 .sum()
                                 .transpose();
            }
            if (m_nb == 1 && m_shape.n_rx == 1) {
                Y.row(0) += Ej.row(0);
            } else {
                Y.noalias() += m_phase[j] * Ej;
            }
        }
        CVector y(rows());
        for (Index r = 0; r < m_shape.n_rx; ++r) y.segment(r * m_L, m_L) = Y.row(r).transpose();
        return y;
    }

    CVector adjoint(const CVector& y) const
    {
        if (y.size() != rows()) throw DimensionError("grid adjoint: measurement size mismatch");
        CMatrix Y(m_shape.n_rx, m_L);
        for (Index r = 0; r < m_shape.n_rx; ++r) Y.row(r) = y.segment(r * m_L, m_L).transpose();

        CMatrix W = CMatrix::Zero(m_L, m_nb * m_nd);
        CMatrix Ebar(m_nb, m_L);
        for (Index j = 0; j < m_shape.n_tx; ++j) {
            if (m_nb == 1 && m_shape.n_rx == 1) {
                Ebar = Y;
            } else {
                Ebar.noalias() = m_phase[j].adjoint() * Y;
            }
            const CMatrix& H = m_delay[j];
            for (Index n1 = 0; n1 < m_nb; ++n1) {
                W.middleCols(n1 * m_nd, m_nd).noalias() +=
                    (H.conjugate().array().colwise() * Ebar.row(n1).transpose().array()).matrix();
            }
        }
        CVector b(cols());
        Eigen::Map<CMatrix> B(b.data(), m_nf, m_nb * m_nd);
        doppler_adjoint(W, B);
        return b;
    }

private:
    CMatrix doppler_forward(const Eigen::Map<const CMatrix>& B) const
    {
        if (!m_use_fft) return m_doppler * B;
        const Index K = m_grid.K_doppler;
        CMatrix D(m_L, B.cols());
        CVector col(K);
        for (Index c = 0; c < B.cols(); ++c) {
            col = B.col(c);
            const CVector t = idft(col);
            for (Index p = -m_N; p <= m_N; ++p) {
                D(p + m_N, c) = static_cast<Real>(K) * t(mod_index(p, K));
            }
        }
        return D;
    }

    void doppler_adjoint(const CMatrix& W, Eigen::Map<CMatrix>& B) const
    {
        if (!m_use_fft) {
            B.noalias() = m_doppler.adjoint() * W;
            return;
        }
        const Index K = m_grid.K_doppler;
        CVector pad(K);
        for (Index c = 0; c < W.cols(); ++c) {
            pad.setZero();
            for (Index p = -m_N; p <= m_N; ++p) pad(mod_index(p, K)) = W(p + m_N, c);
            B.col(c) = dft(pad);
        }
    }

    FineGrid m_grid;
    ArrayShape m_shape;
    std::vector<ProbingSignal> m_probes;
    Index m_L{0};
    Index m_N{0};
    Index m_nb{1};
    Index m_nd{0};
    Index m_nf{0};
    std::vector<CMatrix> m_delay;  // per transmitter, L x nd
    CMatrix m_doppler;             // L x nf, e^{i2pi p m / K3}
    std::vector<CMatrix> m_phase;  // per transmitter, N_R x K1
    bool m_use_fft{false};
};

} // namespace srradar

#endif
