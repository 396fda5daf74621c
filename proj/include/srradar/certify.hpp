#ifndef SRRADAR_CERTIFY_HPP
#define SRRADAR_CERTIFY_HPP

///
/// \file certify.hpp
///
/// Dual certificates for recovery in the continuum. The random polynomial
///
///   Q(r) = <q, A f(r)> = sum_j a_j G_00(r, r_j) + a1_j G_10(r, r_j) + a2_j G_01(r, r_j),
///   G_n(r, r_j) = <A g_n(r_j), A f(r)>,
///
/// is built from the squared Fejer kernel so that it interpolates the signs
/// u_j at the nodes with vanishing gradient. Verification evaluates Q on a
/// dense grid; a separate routine samples Q on a fine grid (the l1 dual
/// certificate) and another estimates E[G_x^H G_x] by Monte Carlo.
///

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/QR>
#include <Eigen/SVD>

#include <srradar/analysis.hpp>
#include <srradar/core.hpp>
#include <srradar/grid.hpp>

namespace srradar
{

/// Coefficients g_j, j = -N..N (slot j + N), of F(t) = sum_j g_j e^{i2pi t j}.
struct FejerKernel
{
    RVector g;
    Index N{0};
    Real normalization{1.0};  ///< F(0)

    /// d-th derivative of F at t.
    Complex derivative(Real t, int d = 0) const
    {
        Complex acc{0.0, 0.0};
        for (Index j = -N; j <= N; ++j) {
            Complex term = g(j + N) * cis2pi(static_cast<Real>(j) * t);
            for (int k = 0; k < d; ++k) term *= Complex(0.0, two_pi * j);
            acc += term;
        }
        return acc;
    }

    Real operator()(Real t) const { return derivative(t, 0).real(); }
};

///
/// The Fejer kernel of order M = floor(N/2) + 1, with coefficients
/// (M - |j|) / M^2, convolved with itself. Its degree 2(M - 1) is at most N;
/// remaining coefficients are zero. F(0) = 1.
///
inline FejerKernel fejer_coefficients(Index N)
{
    if (N < 1) throw std::invalid_argument("Fejer kernel needs N >= 1");
    const Index M = N / 2 + 1;
    const auto m2 = static_cast<Real>(M * M);
    RVector tri(2 * M - 1);
    for (Index j = -(M - 1); j <= M - 1; ++j) tri(j + M - 1) = static_cast<Real>(M - std::abs(j)) / m2;

    FejerKernel k;
    k.N = N;
    k.g = RVector::Zero(2 * N + 1);
    for (Index a = 0; a < tri.size(); ++a) {
        for (Index b = 0; b < tri.size(); ++b) {
            const Index j = (a - (M - 1)) + (b - (M - 1));
            k.g(j + N) += tri(a) * tri(b);
        }
    }
    k.normalization = k.g.sum();
    k.g /= k.normalization;
    k.normalization = 1.0;
    return k;
}

///
/// g_n(r) over the double index (a, c), slot (a + N) L + (c + N):
/// g_a g_c (i2pi a)^{n1} (i2pi c)^{n2} e^{-i2pi(tau a + nu c)}.
///
inline CVector g_vector(Real tau, Real nu, int n1, int n2, const FejerKernel& kernel)
{
    if (n1 < 0 || n1 > 1 || n2 < 0 || n2 > 1) {
        throw std::invalid_argument("g_vector supports derivative orders 0 and 1");
    }
    const Index N = kernel.N;
    const Index L = 2 * N + 1;
    CVector out(L * L);
    for (Index a = -N; a <= N; ++a) {
        Complex fa = kernel.g(a + N) * cis2pi(-static_cast<Real>(a) * tau);
        if (n1 == 1) fa *= Complex(0.0, two_pi * a);
        for (Index c = -N; c <= N; ++c) {
            Complex fc = kernel.g(c + N) * cis2pi(-static_cast<Real>(c) * nu);
            if (n2 == 1) fc *= Complex(0.0, two_pi * c);
            out((a + N) * L + (c + N)) = fa * fc;
        }
    }
    return out;
}

///
/// The flat kernel g_j = 1. Interpolating with it places q in the span of
/// A f(r_j) and its first partials, which is the minimal-norm q meeting the
/// interpolation and vanishing-gradient conditions.
///
inline FejerKernel flat_kernel(Index N)
{
    if (N < 1) throw std::invalid_argument("kernel needs N >= 1");
    FejerKernel k;
    k.N = N;
    k.g = RVector::Ones(2 * N + 1);
    k.normalization = static_cast<Real>(2 * N + 1);
    return k;
}

namespace detail
{

/// Derivative (d_tau, d_nu) of sum_{a,c} w_{a,c} e^{i2pi(a tau + c nu)}.
inline Complex eval_trig(const CVector& w, Index L, Real tau, Real nu, int d_tau = 0, int d_nu = 0)
{
    const Index N = half_length(L);
    CVector et(L), en(L);
    for (Index a = -N; a <= N; ++a) {
        Complex e = cis2pi(static_cast<Real>(a) * tau);
        for (int k = 0; k < d_tau; ++k) e *= Complex(0.0, two_pi * a);
        et(a + N) = e;
        Complex f = cis2pi(static_cast<Real>(a) * nu);
        for (int k = 0; k < d_nu; ++k) f *= Complex(0.0, two_pi * a);
        en(a + N) = f;
    }
    Eigen::Map<const CMatrix> W(w.data(), L, L);  // W(c, a): column-major view of slot a*L + c
    return et.transpose() * (W.transpose() * en);
}

} // namespace detail

enum class CertificateStatus
{
    ok,
    singular,
};

///
/// Certificate for the atom operator Op (AtomOperator, or
/// IdentityAtomOperator for the deterministic counterpart).
///
template <typename Op>
struct DualCertificate
{
    Op op;
    FejerKernel kernel;
    std::vector<Node> nodes;
    std::vector<Complex> signs;
    CVector alpha, alpha1, alpha2;
    CVector q;
    CertificateStatus status{CertificateStatus::ok};
    Real condition_number{0.0};
    Index L{0};

    /// w = A^H q, so that Q(r) = sum_{a,c} w_{a,c} e^{i2pi(a tau + c nu)}.
    CVector trig_coefficients() const { return op.adjoint(q); }

    Complex evaluate(Real tau, Real nu, int d_tau = 0, int d_nu = 0) const
    {
        return detail::eval_trig(trig_coefficients(), L, tau, nu, d_tau, d_nu);
    }

    /// Q(r) computed as <q, A f(r)> = (A f(r))^H q.
    Complex evaluate_direct(Real tau, Real nu) const
    {
        return op.apply(atom(tau, nu, L)).dot(q);
    }
};

///
/// Solves the 3S x 3S interpolation system by column-pivoted QR. Reports
/// status singular when the system is numerically rank deficient.
///
template <typename Op>
DualCertificate<Op> build_certificate(const Op& op, Index L, const std::vector<Node>& nodes,
                                      const std::vector<Complex>& signs,
                                      std::optional<FejerKernel> kernel = std::nullopt)
{
    if (nodes.size() != signs.size()) throw DimensionError("one sign per node required");
    const Index N = half_length(L);
    if (kernel && kernel->N != N) throw DimensionError("kernel degree does not match L");
    DualCertificate<Op> cert{op, kernel ? *kernel : fejer_coefficients(N), nodes, signs, {}, {}, {}, {}};
    cert.L = L;
    const auto S = static_cast<Index>(nodes.size());
    cert.alpha = CVector::Zero(S);
    cert.alpha1 = CVector::Zero(S);
    cert.alpha2 = CVector::Zero(S);
    cert.q = CVector::Zero(op.rows());
    if (S == 0) return cert;

    // Basis columns A g_n(r_j) and their trigonometric coefficients A^H A g_n(r_j).
    std::vector<CVector> Ag, w;
    const int orders[3][2] = {{0, 0}, {1, 0}, {0, 1}};
    for (int n = 0; n < 3; ++n) {
        for (Index j = 0; j < S; ++j) {
            Ag.push_back(op.apply(g_vector(nodes[j].tau, nodes[j].nu, orders[n][0], orders[n][1], cert.kernel)));
            w.push_back(op.adjoint(Ag.back()));
        }
    }

    CMatrix M(3 * S, 3 * S);
    CVector rhs = CVector::Zero(3 * S);
    for (int d = 0; d < 3; ++d) {
        for (Index i = 0; i < S; ++i) {
            const Index row = d * S + i;
            for (Index k = 0; k < 3 * S; ++k) {
                M(row, k) = detail::eval_trig(w[k], L, nodes[i].tau, nodes[i].nu, orders[d][0], orders[d][1]);
            }
            if (d == 0) rhs(row) = signs[i];
        }
    }

    Eigen::JacobiSVD<CMatrix> svd(M);
    const RVector& sv = svd.singularValues();
    const Real smin = sv(sv.size() - 1);
    cert.condition_number = smin > 0.0 ? sv(0) / smin : std::numeric_limits<Real>::infinity();
    if (!(cert.condition_number < 1e12)) {
        cert.status = CertificateStatus::singular;
        return cert;
    }
    const CVector coef = M.colPivHouseholderQr().solve(rhs);
    cert.alpha = coef.segment(0, S);
    cert.alpha1 = coef.segment(S, S);
    cert.alpha2 = coef.segment(2 * S, S);
    for (Index k = 0; k < 3 * S; ++k) cert.q += coef(k) * Ag[k];
    return cert;
}

inline DualCertificate<AtomOperator> build_certificate(const ProbingSignal& x,
                                                       const std::vector<Node>& nodes,
                                                       const std::vector<Complex>& signs,
                                                       std::optional<FejerKernel> kernel = std::nullopt)
{
    return build_certificate(AtomOperator(x), x.length(), nodes, signs, std::move(kernel));
}

struct CertificateReport
{
    bool built{false};
    Real interp_residual{0.0};
    Real grad_residual{0.0};
    Real max_offgrid_Q{0.0};
    Real max_near_Q{0.0};
    bool concave{true};
    Real min_singular_value{0.0};
    Real condition_number{0.0};
    bool pass{false};
};

struct VerifyConfig
{
    Index grid_size{512};
    Real exclusion_radius{-1.0};  ///< per axis; negative selects 0.12 / N
    Index local_samples{9};       ///< per axis, inside each exclusion box
};

///
/// Evaluates Q on a grid_size^2 grid. Points within exclusion_radius of a
/// node along both axes are excluded from the boundedness check; there |Q| is
/// sampled on a local grid and required not to exceed 1, and the Hessian of
/// Re(conj(u_j) Q) at r_j must be negative definite.
///
template <typename Op>
CertificateReport verify_certificate(const DualCertificate<Op>& cert, const VerifyConfig& vc = {})
{
    CertificateReport rep;
    rep.built = cert.status == CertificateStatus::ok;
    rep.condition_number = cert.condition_number;
    const Index L = cert.L;
    const Index N = half_length(L);
    const Real rad = vc.exclusion_radius < 0.0 ? 0.12 / static_cast<Real>(N) : vc.exclusion_radius;
    const CVector w = cert.trig_coefficients();
    const auto S = cert.nodes.size();

    for (std::size_t j = 0; j < S; ++j) {
        const auto& r = cert.nodes[j];
        rep.interp_residual = std::max(rep.interp_residual,
                                       std::abs(detail::eval_trig(w, L, r.tau, r.nu) - cert.signs[j]));
        const Complex gt = detail::eval_trig(w, L, r.tau, r.nu, 1, 0);
        const Complex gn = detail::eval_trig(w, L, r.tau, r.nu, 0, 1);
        rep.grad_residual = std::max(rep.grad_residual, std::sqrt(std::norm(gt) + std::norm(gn)));

        const Complex u = std::conj(cert.signs[j]);
        const Real htt = (u * detail::eval_trig(w, L, r.tau, r.nu, 2, 0)).real();
        const Real hnn = (u * detail::eval_trig(w, L, r.tau, r.nu, 0, 2)).real();
        const Real htn = (u * detail::eval_trig(w, L, r.tau, r.nu, 1, 1)).real();
        if (!(htt < 0.0 && htt * hnn - htn * htn > 0.0)) rep.concave = false;

        const Index ns = std::max<Index>(vc.local_samples, 2);
        for (Index a = 0; a < ns; ++a) {
            for (Index b = 0; b < ns; ++b) {
                if (2 * a == ns - 1 && 2 * b == ns - 1) continue;
                const Real dt = rad * (2.0 * a / (ns - 1) - 1.0);
                const Real dn = rad * (2.0 * b / (ns - 1) - 1.0);
                rep.max_near_Q = std::max(rep.max_near_Q,
                                          std::abs(detail::eval_trig(w, L, r.tau + dt, r.nu + dn)));
            }
        }
    }

    // Separable evaluation: Q(m/G, n/G) = sum_a e^{i2pi a m/G} sum_c e^{i2pi c n/G} w_{a,c}.
    const Index G = vc.grid_size;
    CMatrix E(G, L);
    for (Index m = 0; m < G; ++m) {
        for (Index a = -N; a <= N; ++a) {
            E(m, a + N) = cis2pi(static_cast<Real>(mod_index(m * a, G)) / static_cast<Real>(G));
        }
    }
    Eigen::Map<const CMatrix> Wt(w.data(), L, L);  // Wt(c, a)
    const CMatrix Qgrid = E * Wt.transpose() * E.transpose();  // (m, n) -> tau = m/G, nu = n/G
    for (Index m = 0; m < G; ++m) {
        const Real tau = static_cast<Real>(m) / G;
        for (Index n = 0; n < G; ++n) {
            const Real nu = static_cast<Real>(n) / G;
            bool excluded = false;
            for (const auto& r : cert.nodes) {
                if (wrap_distance(tau, r.tau) < rad && wrap_distance(nu, r.nu) < rad) {
                    excluded = true;
                    break;
                }
            }
            if (!excluded) rep.max_offgrid_Q = std::max(rep.max_offgrid_Q, std::abs(Qgrid(m, n)));
        }
    }

    if (S > 0) {
        CMatrix F(cert.op.rows(), static_cast<Index>(S));
        for (std::size_t j = 0; j < S; ++j) {
            F.col(static_cast<Index>(j)) = cert.op.apply(atom(cert.nodes[j].tau, cert.nodes[j].nu, L));
        }
        Eigen::JacobiSVD<CMatrix> svd(F);
        rep.min_singular_value = svd.singularValues()(svd.singularValues().size() - 1);
    } else {
        rep.min_singular_value = std::numeric_limits<Real>::infinity();
    }

    rep.pass = rep.built && rep.interp_residual < 1e-8 && rep.grad_residual < 1e-6 &&
               rep.max_offgrid_Q < 1.0 && rep.max_near_Q <= 1.0 + 1e-12 && rep.concave &&
               rep.min_singular_value > 1e-10;
    return rep;
}

struct DiscreteCertificate
{
    CVector v;                     ///< over the K x K grid, GridOperator column order
    std::vector<Index> support;    ///< flat indices of the nodes
    Real support_residual{0.0};    ///< max |v_j - u_j| on the support
    Real max_off_support{0.0};     ///< max |v| off the support
    Real rowspace_residual{0.0};   ///< max |v - R^H q|
    bool valid{false};
};

///
/// Samples Q at (n/K, m/K) for every column of the K x K SISO grid and checks
/// it against the row space representation R^H q.
///
inline DiscreteCertificate discrete_certificate(const DualCertificate<AtomOperator>& cert, Index K)
{
    const GridOperator R(cert.op.probe(), FineGrid::siso(cert.L, K));
    DiscreteCertificate dc;
    for (const auto& r : cert.nodes) {
        const Real a = r.tau * K, b = r.nu * K;
        if (std::abs(a - std::round(a)) > 1e-9 || std::abs(b - std::round(b)) > 1e-9) {
            throw std::invalid_argument("certificate nodes are not on the K-grid");
        }
        dc.support.push_back(R.flat_index({0, mod_index(static_cast<Index>(std::lround(a)), K),
                                           mod_index(static_cast<Index>(std::lround(b)), K)}));
    }
    const CVector w = cert.trig_coefficients();
    const Index L = cert.L;
    const Index N = half_length(L);
    CMatrix E(K, L);
    for (Index m = 0; m < K; ++m) {
        for (Index a = -N; a <= N; ++a) {
            E(m, a + N) = cis2pi(static_cast<Real>(mod_index(m * a, K)) / static_cast<Real>(K));
        }
    }
    Eigen::Map<const CMatrix> Wt(w.data(), L, L);
    const CMatrix Qgrid = E * Wt.transpose() * E.transpose();  // (delay, doppler)
    dc.v.resize(R.cols());
    for (Index d = 0; d < K; ++d) {
        for (Index f = 0; f < K; ++f) dc.v(R.flat_index({0, d, f})) = Qgrid(d, f);
    }
    const CVector rq = R.adjoint(cert.q);
    dc.rowspace_residual = dc.v.size() > 0 ? (dc.v - rq).cwiseAbs().maxCoeff() : 0.0;

    std::vector<bool> on(static_cast<std::size_t>(R.cols()), false);
    for (std::size_t j = 0; j < dc.support.size(); ++j) {
        on[static_cast<std::size_t>(dc.support[j])] = true;
        dc.support_residual = std::max(dc.support_residual, std::abs(dc.v(dc.support[j]) - cert.signs[j]));
    }
    for (Index i = 0; i < dc.v.size(); ++i) {
        if (!on[static_cast<std::size_t>(i)]) dc.max_off_support = std::max(dc.max_off_support, std::abs(dc.v(i)));
    }
    dc.valid = dc.support_residual < 1e-8 && dc.max_off_support < 1.0 && dc.rowspace_residual < 1e-8;
    if (cert.nodes.empty()) dc.valid = true;
    return dc;
}

/// Gabor matrix G_x (L x L^2), column (k, l) at slot (k + N) L + (l + N).
inline CMatrix gabor_matrix(const ProbingSignal& x)
{
    const Index L = x.length();
    const Index N = x.half();
    CMatrix G(L, L * L);
    for (Index k = -N; k <= N; ++k) {
        for (Index l = -N; l <= N; ++l) G.col((k + N) * L + (l + N)) = gabor_column(x, k, l);
    }
    return G;
}

struct IsotropyStats
{
    Index trials{0};
    Real max_abs_dev{0.0};       ///< max |avg - I| over all entries
    Real max_offdiag_abs{0.0};
    Real max_diag_dev{0.0};
    Real max_z{0.0};             ///< max |avg - I| / standard error
    Real max_diag_z{0.0};
    std::optional<CMatrix> raw;  ///< the single draw when trials == 1
};

///
/// Monte-Carlo estimate of E[G_x^H G_x] over random real Gaussian probings.
/// The standard error of an entry is sqrt(E|Z - EZ|^2 / trials) from the
/// sample second moment.
///
inline IsotropyStats isotropy_check(Index L, Index trials, std::uint64_t seed,
                                    ProbeKind kind = ProbeKind::gaussian)
{
    if (trials < 1) throw std::invalid_argument("isotropy check needs at least one trial");
    const Index n = L * L;
    IsotropyStats st;
    st.trials = trials;
    CMatrix sum = CMatrix::Zero(n, n);
    RMatrix sum_sq = RMatrix::Zero(n, n);
    for (Index t = 0; t < trials; ++t) {
        const ProbingSignal x = random_probing(L, derive_seed(seed, static_cast<std::uint64_t>(t), Stream::probe), kind);
        const CMatrix G = gabor_matrix(x);
        CMatrix M(n, n);
        M.noalias() = G.adjoint() * G;
        if (trials == 1) st.raw = M;
        sum += M;
        sum_sq += M.cwiseAbs2();
    }
    const auto T = static_cast<Real>(trials);
    const CMatrix avg = sum / T;
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < n; ++i) {
            const Complex dev = avg(i, j) - (i == j ? Complex(1.0, 0.0) : Complex(0.0, 0.0));
            const Real a = std::abs(dev);
            st.max_abs_dev = std::max(st.max_abs_dev, a);
            if (i == j) {
                st.max_diag_dev = std::max(st.max_diag_dev, a);
            } else {
                st.max_offdiag_abs = std::max(st.max_offdiag_abs, std::abs(avg(i, j)));
            }
            if (trials > 1) {
                const Real var = std::max(0.0, (sum_sq(i, j) / T - std::norm(avg(i, j))) * T / (T - 1.0));
                const Real se = std::sqrt(var / T);
                const Real z = se > 0.0 ? a / se : (a > 1e-12 ? std::numeric_limits<Real>::infinity() : 0.0);
                st.max_z = std::max(st.max_z, z);
                if (i == j) st.max_diag_z = std::max(st.max_diag_z, z);
            }
        }
    }
    return st;
}

} // namespace srradar

#endif
