#ifndef SRRADAR_FFT_HPP
#define SRRADAR_FFT_HPP

#include <srradar/types.hpp>

#include <unsupported/Eigen/FFT>

namespace srradar
{
namespace detail
{

// Eigen::FFT caches twiddle tables per length and is not safe to share
// between threads.
inline Eigen::FFT<Real>& fft_engine()
{
    thread_local Eigen::FFT<Real> engine;
    return engine;
}

} // namespace detail

/// Unnormalized forward DFT over storage order: X[k] = sum_s x[s] e^{-i2pi sk/n}.
inline CVector dft(const CVector& x)
{
    CVector out(x.size());
    detail::fft_engine().fwd(out, x);
    return out;
}

/// Inverse DFT over storage order, carrying the 1/n factor.
inline CVector idft(const CVector& X)
{
    CVector out(X.size());
    detail::fft_engine().inv(out, X);
    return out;
}

///
/// DFT over the symmetric index range -N..N (storage slot = index + N):
///
///   X_k = sum_{l=-N}^{N} x_l e^{-i2pi lk/L}.
///
inline CVector centered_dft(const CVector& x)
{
    const Index L = x.size();
    const Index N = half_length(L);
    const CVector raw = dft(x);
    CVector out(L);
    for (Index k = -N; k <= N; ++k) {
        out(k + N) = cis2pi(static_cast<Real>(N * k) / L) * raw(mod_index(k, L));
    }
    return out;
}

///
/// Inverse of centered_dft:  x_p = (1/L) sum_{k=-N}^{N} X_k e^{i2pi pk/L}.
///
inline CVector centered_idft(const CVector& X)
{
    const Index L = X.size();
    const Index N = half_length(L);
    const CVector raw = idft(X);
    CVector out(L);
    for (Index p = -N; p <= N; ++p) {
        out(p + N) = cis2pi(-static_cast<Real>(N * p) / L) * raw(mod_index(p, L));
    }
    return out;
}

} // namespace srradar

#endif
