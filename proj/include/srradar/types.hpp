#ifndef SRRADAR_TYPES_HPP
#define SRRADAR_TYPES_HPP

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace srradar
{

using Index   = Eigen::Index;
using Real    = double;
using Complex = std::complex<double>;

using CVector = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;
using RVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using CMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;
using RMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr Real two_pi = 2.0 * std::numbers::pi;

/// Thrown when vector lengths or grid sizes do not agree.
class DimensionError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// e^{i 2 pi t}
inline Complex cis2pi(Real t)
{
    const Real a = two_pi * t;
    return {std::cos(a), std::sin(a)};
}

/// Representative of t modulo 1 in [0, 1).
inline Real wrap_unit(Real t)
{
    Real r = t - std::floor(t);
    return r >= 1.0 ? 0.0 : r;
}

/// Signed difference a - b reduced to [-1/2, 1/2).
inline Real wrap_diff(Real a, Real b)
{
    Real d = wrap_unit(a - b);
    return d >= 0.5 ? d - 1.0 : d;
}

/// Half-length N of an odd length L = 2N + 1. Throws on even or non-positive L.
inline Index half_length(Index L)
{
    if (L <= 0 || L % 2 == 0) {
        throw std::invalid_argument("length must be odd and positive, got " +
                                    std::to_string(L));
    }
    return (L - 1) / 2;
}

/// Nonnegative residue of k modulo n.
inline Index mod_index(Index k, Index n)
{
    Index r = k % n;
    return r < 0 ? r + n : r;
}

} // namespace srradar

#endif
