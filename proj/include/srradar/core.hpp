#ifndef SRRADAR_CORE_HPP
#define SRRADAR_CORE_HPP

///
/// \file core.hpp
///
/// Discrete SISO radar signal model. All length-L vectors are indexed by the
/// symmetric range p = -N..N and stored at slot p + N.
///

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <srradar/fft.hpp>
#include <srradar/rng.hpp>
#include <srradar/types.hpp>

namespace srradar
{

enum class ProbeKind
{
    gaussian,          ///< real N(0, 1/L)
    signs,             ///< +-1/sqrt(L)
    complex_gaussian,  ///< circular complex, E|x|^2 = 1/L
};

inline std::string to_string(ProbeKind k)
{
    switch (k) {
    case ProbeKind::gaussian: return "gaussian";
    case ProbeKind::signs: return "signs";
    case ProbeKind::complex_gaussian: return "complex_gaussian";
    }
    return "gaussian";
}

inline ProbeKind probe_kind_from_string(const std::string& s)
{
    if (s == "gaussian") return ProbeKind::gaussian;
    if (s == "signs") return ProbeKind::signs;
    if (s == "complex_gaussian") return ProbeKind::complex_gaussian;
    throw std::invalid_argument("unknown probe kind '" + s + "'");
}

///
/// Probing signal x of odd length L. The spectrum (centered DFT) is cached,
/// since every shift operator starts from it.
///
class ProbingSignal
{
public:
    ProbingSignal() = default;

    explicit ProbingSignal(CVector samples)
        : m_samples(std::move(samples)),
          m_half(half_length(m_samples.size())),
          m_spectrum(centered_dft(m_samples))
    {
    }

    Index length() const { return m_samples.size(); }
    Index half() const { return m_half; }

    const CVector& samples() const { return m_samples; }
    const CVector& spectrum() const { return m_spectrum; }

    /// Sample x_p with circular indexing, p any integer.
    Complex at(Index p) const { return m_samples(mod_index(p + m_half, length())); }

private:
    CVector m_samples;
    Index m_half{0};
    CVector m_spectrum;
};

struct Scatterer
{
    Complex b{1.0, 0.0};
    Real tau{0.0};
    Real nu{0.0};
};

struct Scene
{
    Index L{0};
    std::vector<Scatterer> scatterers;
};

struct Measurement
{
    CVector y;
};

///
/// Random probing signal, deterministic for a given seed.
///
inline ProbingSignal random_probing(Index L, std::uint64_t seed,
                                    ProbeKind kind = ProbeKind::gaussian,
                                    Real variance = -1.0)
{
    half_length(L);
    if (variance <= 0.0) variance = 1.0 / static_cast<Real>(L);
    Rng rng(seed);
    CVector x(L);
    switch (kind) {
    case ProbeKind::gaussian: {
        std::normal_distribution<Real> g(0.0, std::sqrt(variance));
        for (Index i = 0; i < L; ++i) x(i) = g(rng);
        break;
    }
    case ProbeKind::signs: {
        const Real a = std::sqrt(variance);
        std::bernoulli_distribution coin(0.5);
        for (Index i = 0; i < L; ++i) x(i) = coin(rng) ? a : -a;
        break;
    }
    case ProbeKind::complex_gaussian: {
        std::normal_distribution<Real> g(0.0, std::sqrt(variance / 2.0));
        for (Index i = 0; i < L; ++i) {
            const Real re = g(rng);
            const Real im = g(rng);
            x(i) = Complex(re, im);
        }
        break;
    }
    }
    return ProbingSignal(std::move(x));
}

/// Time shift applied to a precomputed centered spectrum.
inline CVector time_shift_from_spectrum(const CVector& spectrum, Real tau,
                                        int derivative = 0)
{
    const Index L = spectrum.size();
    const Index N = half_length(L);
    CVector mod(L);
    for (Index k = -N; k <= N; ++k) {
        Complex ph = cis2pi(-static_cast<Real>(k) * tau);
        for (int d = 0; d < derivative; ++d) ph *= Complex(0.0, -two_pi * k);
        mod(k + N) = spectrum(k + N) * ph;
    }
    return centered_idft(mod);
}

///
/// Fractional time shift
///
///   [T_tau x]_p = (1/L) sum_k ( sum_l x_l e^{-i2pi lk/L} ) e^{-i2pi k tau} e^{i2pi pk/L}.
///
inline CVector fractional_time_shift(const ProbingSignal& x, Real tau)
{
    return time_shift_from_spectrum(x.spectrum(), tau);
}

inline CVector fractional_time_shift(const CVector& x, Real tau)
{
    return time_shift_from_spectrum(centered_dft(x), tau);
}

/// [F_nu x]_p = x_p e^{i2pi p nu}
inline CVector frequency_shift(const CVector& x, Real nu)
{
    const Index L = x.size();
    const Index N = half_length(L);
    CVector out(L);
    for (Index p = -N; p <= N; ++p) {
        out(p + N) = x(p + N) * cis2pi(static_cast<Real>(p) * nu);
    }
    return out;
}

/// F_nu T_tau x, the response to a single unit scatterer at (tau, nu).
inline CVector shifted_probe(const ProbingSignal& x, Real tau, Real nu)
{
    return frequency_shift(fractional_time_shift(x, tau), nu);
}

///
/// Partial derivatives of F_nu T_tau x with respect to tau (order d_tau) and
/// nu (order d_nu).
///
inline CVector shifted_probe_derivative(const ProbingSignal& x, Real tau, Real nu,
                                        int d_tau, int d_nu)
{
    CVector v = frequency_shift(time_shift_from_spectrum(x.spectrum(), tau, d_tau), nu);
    const Index N = x.half();
    for (int d = 0; d < d_nu; ++d) {
        for (Index p = -N; p <= N; ++p) v(p + N) *= Complex(0.0, two_pi * p);
    }
    return v;
}

inline Measurement synthesize(const ProbingSignal& x, const Scene& scene)
{
    if (scene.L != x.length()) {
        throw DimensionError("scene length " + std::to_string(scene.L) +
                             " does not match probe length " +
                             std::to_string(x.length()));
    }
    Measurement m{CVector::Zero(x.length())};
    for (const auto& s : scene.scatterers) {
        m.y += s.b * shifted_probe(x, s.tau, s.nu);
    }
    return m;
}

///
/// Column (k, l) of the Gabor matrix with window x: entry p is
/// x_{p-l} e^{i2pi kp/L}, k, l in -N..N.
///
inline CVector gabor_column(const ProbingSignal& x, Index k, Index l)
{
    const Index L = x.length();
    const Index N = x.half();
    if (k < -N || k > N || l < -N || l > N) {
        throw std::out_of_range("gabor index out of range");
    }
    CVector col(L);
    for (Index p = -N; p <= N; ++p) {
        col(p + N) = x.at(p - l) * cis2pi(static_cast<Real>(k * p) / L);
    }
    return col;
}

///
/// Atom f(r) in C^{L^2} with entries e^{-i2pi(a tau + c nu)}, double index
/// (a, c) in {-N..N}^2 stored at (a + N) * L + (c + N). The first index pairs
/// with the time shift, the second with the frequency shift.
///
inline CVector atom(Real tau, Real nu, Index L)
{
    const Index N = half_length(L);
    CVector f(L * L);
    for (Index a = -N; a <= N; ++a) {
        const Complex ea = cis2pi(-static_cast<Real>(a) * tau);
        for (Index c = -N; c <= N; ++c) {
            f((a + N) * L + (c + N)) = ea * cis2pi(-static_cast<Real>(c) * nu);
        }
    }
    return f;
}

///
/// The map A = G_x F^H from the L^2 coefficient space of atoms to C^L, so
/// that A f(r) = F_nu T_tau x.
///
/// Composing the inverse 2D DFT with Gabor synthesis collapses to
///
///   (A z)_p = (1/L) sum_a X_a e^{i2pi pa/L} z_{(a, -p)},
///
/// where X is the centered spectrum of x. Applying A or A^H costs O(L^2).
///
class AtomOperator
{
public:
    explicit AtomOperator(const ProbingSignal& x) : m_x(x) {}

    Index rows() const { return m_x.length(); }
    Index cols() const { return m_x.length() * m_x.length(); }
    const ProbingSignal& probe() const { return m_x; }

    CVector apply(const CVector& z) const
    {
        const Index L = m_x.length();
        const Index N = m_x.half();
        if (z.size() != L * L) throw DimensionError("atom operator: bad input size");
        const CVector& X = m_x.spectrum();
        CVector y(L);
        for (Index p = -N; p <= N; ++p) {
            Complex acc{0.0, 0.0};
            for (Index a = -N; a <= N; ++a) {
                acc += X(a + N) * cis2pi(static_cast<Real>(p * a) / L) *
                       z((a + N) * L + (-p + N));
            }
            y(p + N) = acc / static_cast<Real>(L);
        }
        return y;
    }

    CVector adjoint(const CVector& y) const
    {
        const Index L = m_x.length();
        const Index N = m_x.half();
        if (y.size() != L) throw DimensionError("atom operator: bad input size");
        const CVector& X = m_x.spectrum();
        CVector w = CVector::Zero(L * L);
        for (Index p = -N; p <= N; ++p) {
            for (Index a = -N; a <= N; ++a) {
                w((a + N) * L + (-p + N)) = std::conj(X(a + N)) *
                                            cis2pi(-static_cast<Real>(p * a) / L) *
                                            y(p + N) / static_cast<Real>(L);
            }
        }
        return w;
    }

private:
    ProbingSignal m_x;
};

/// The identity in place of A, which turns random certificates into their
/// deterministic counterparts.
class IdentityAtomOperator
{
public:
    explicit IdentityAtomOperator(Index L) : m_L(L) { half_length(L); }
    Index rows() const { return m_L * m_L; }
    Index cols() const { return m_L * m_L; }
    CVector apply(const CVector& z) const { return z; }
    CVector adjoint(const CVector& y) const { return y; }

private:
    Index m_L;
};

} // namespace srradar

#endif
