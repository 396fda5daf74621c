#ifndef SRRADAR_SOLVER_HPP
#define SRRADAR_SOLVER_HPP

///
/// \file solver.hpp
///
/// l1 recovery on an implicit dictionary:
///
///   L1-ERR:  minimize ||b||_1  subject to  ||y - R b||_2^2 <= delta,
///
/// and the equality-constrained program as the limit of tiny delta.
///
/// The constrained program is solved through its Lagrangian form
/// 0.5 ||y - R b||^2 + lambda ||b||_1, with lambda located on the Pareto curve
/// so that the residual matches sqrt(delta). Each penalized problem is handled
/// by monotone FISTA with function-value restart, warm-started from the
/// previous lambda. Operators that expose single columns are solved on a
/// working set: FISTA runs on the dense submatrix of active columns, and one
/// adjoint of the full operator per round checks optimality of the remaining
/// columns.
///

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <concepts>
#include <random>
#include <string>
#include <vector>

#include <srradar/types.hpp>

#include <Eigen/QR>
#include <Eigen/Cholesky>
#include <Eigen/LU>

namespace srradar
{

enum class SolveStatus
{
    converged,
    max_iterations,
    infeasible,
};

inline std::string to_string(SolveStatus s)
{
    switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iterations: return "max_iterations";
    case SolveStatus::infeasible: return "infeasible";
    }
    return "unknown";
}

enum class StepRule
{
    lipschitz,     ///< fixed step 1/Lip, Lip from power iteration on R^H R
    backtracking,  ///< per-iteration sufficient-decrease search
};

struct SolverConfig
{
    int max_iters{30000};
    Real tol{1e-7};
    Real delta{0.0};
    StepRule step_rule{StepRule::lipschitz};
    int power_iters{50};
    bool record_objective{false};
    bool working_set{true};

    void validate() const
    {
        if (!(tol > 0.0)) throw std::invalid_argument("solver tol must be positive");
        if (delta < 0.0) throw std::invalid_argument("solver delta must be nonnegative");
        if (max_iters < 1) throw std::invalid_argument("solver max_iters must be positive");
    }
};

/// Noise ball used when the equality program is requested.
inline Real equality_delta(const CVector& y)
{
    const Real r = 1e-8 * y.norm();
    return std::max(1e-20, r * r);
}

struct LassoResult
{
    CVector coeffs;
    CVector fitted;  ///< R * coeffs
    int iters{0};
    bool converged{false};
    Real objective{0.0};
    Real lipschitz{0.0};
    std::vector<Real> objective_history;
};

struct L1Result
{
    CVector coeffs;
    SolveStatus status{SolveStatus::max_iterations};
    int iters{0};
    Real residual{0.0};  ///< ||y - R b||_2
    Real lambda{0.0};
    int outer_steps{0};
    std::vector<Real> objective_history;  ///< final penalized stage
};

namespace detail
{

inline void soft_threshold(CVector& v, Real thr)
{
    for (Index i = 0; i < v.size(); ++i) {
        const Real a = std::abs(v(i));
        v(i) = a <= thr ? Complex(0.0, 0.0) : v(i) * ((a - thr) / a);
    }
}

inline Real l1_norm(const CVector& v) { return v.cwiseAbs().sum(); }

template <typename Op>
concept HasColumn = requires(const Op& op, Index i) {
    { op.column(i) } -> std::convertible_to<CVector>;
};

template <typename Op>
CVector column_of(const Op& op, Index i)
{
    if constexpr (HasColumn<Op>) {
        return op.column(i);
    } else {
        CVector e = CVector::Zero(op.cols());
        e(i) = 1.0;
        return op.apply(e);
    }
}

///
/// Least-squares refit on the support of x. Accepted when the refit meets the
/// residual bound and the minimal-norm pre-certificate v = R^H R_S (R_S^H R_S)^-1 s,
/// s = sign(b_S), stays strictly inside the unit disc off the support: the
/// refit is then the unique minimizer of ||b||_1 subject to ||y - R b|| <= bound
/// at bound -> 0.
///
template <typename Op>
bool polish_support(const Op& op, const CVector& y, const CVector& x, Real bound,
                    CVector& out, Real& out_rho)
{
    std::vector<Index> supp;
    for (Index i = 0; i < x.size(); ++i) {
        if (x(i) != Complex(0.0, 0.0)) supp.push_back(i);
    }
    const auto s = static_cast<Index>(supp.size());
    if (s == 0 || 2 * s > op.rows() || s > 256) return false;

    CMatrix RS(op.rows(), s);
    for (Index j = 0; j < s; ++j) RS.col(j) = column_of(op, supp[j]);
    Eigen::ColPivHouseholderQR<CMatrix> qr(RS);
    if (qr.rank() < s) return false;
    const CVector bS = qr.solve(y);
    const Real rho = (y - RS * bS).norm();
    if (!(rho <= bound)) return false;

    CVector sign(s);
    for (Index j = 0; j < s; ++j) {
        const Real a = std::abs(bS(j));
        if (a == 0.0) return false;
        sign(j) = bS(j) / a;
    }
    const CMatrix gram = RS.adjoint() * RS;
    const CVector w = RS * gram.ldlt().solve(sign);
    CVector v = op.adjoint(w);
    for (Index j = 0; j < s; ++j) v(supp[j]) = 0.0;
    if (!(v.cwiseAbs().maxCoeff() < 1.0 - 1e-9)) return false;

    out = CVector::Zero(op.cols());
    for (Index j = 0; j < s; ++j) out(supp[j]) = bS(j);
    out_rho = rho;
    return true;
}

} // namespace detail

///
/// Largest eigenvalue of R^H R by power iteration from a fixed pseudo-random
/// start vector.
///
template <typename Op>
Real estimate_lipschitz(const Op& op, int iterations = 50, std::uint64_t seed = 7)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<Real> g;
    CVector v(op.cols());
    for (Index i = 0; i < v.size(); ++i) v(i) = Complex(g(rng), g(rng));
    v.normalize();
    Real est = 0.0;
    for (int k = 0; k < iterations; ++k) {
        CVector w = op.adjoint(op.apply(v));
        est = w.norm();
        if (est == 0.0) return 0.0;
        v = w / est;
    }
    return est;
}

///
/// Monotone FISTA for 0.5 ||y - R b||^2 + lambda ||b||_1 started from x0.
/// Stops when the relative fixed-point residual ||prox step - z|| / ||b||
/// falls below tol.
///
template <typename Op>
LassoResult lasso_fista(const Op& op, const CVector& y, Real lambda, const CVector& x0,
                        Real lipschitz, Real tol, int max_iters,
                        StepRule rule = StepRule::lipschitz, bool record = false)
{
    LassoResult res;
    CVector x = x0;
    CVector Rx = op.apply(x);
    auto objective = [&](const CVector& b, const CVector& Rb) {
        return 0.5 * (y - Rb).squaredNorm() + lambda * detail::l1_norm(b);
    };
    Real Fx = objective(x, Rx);
    CVector z = x;
    CVector Rz = Rx;
    Real t = 1.0;
    Real step_L = rule == StepRule::backtracking ? std::max(1e-12, lipschitz * 1e-3) : lipschitz;
    if (record) res.objective_history.push_back(Fx);

    for (int k = 0; k < max_iters; ++k) {
        res.iters = k + 1;
        const CVector resid_z = Rz - y;
        const CVector grad = op.adjoint(resid_z);
        CVector xn;
        CVector Rxn;
        if (rule == StepRule::backtracking) {
            const Real fz = 0.5 * resid_z.squaredNorm();
            step_L = std::max(step_L * 0.8, 1e-12);
            for (int bt = 0; bt < 60; ++bt) {
                xn = z - grad / step_L;
                detail::soft_threshold(xn, lambda / step_L);
                Rxn = op.apply(xn);
                const CVector d = xn - z;
                const Real model =
                    fz + std::real(grad.dot(d)) + 0.5 * step_L * d.squaredNorm();
                if (0.5 * (y - Rxn).squaredNorm() <= model * (1.0 + 1e-12) + 1e-300) break;
                step_L *= 2.0;
            }
        } else {
            xn = z - grad / step_L;
            detail::soft_threshold(xn, lambda / step_L);
            Rxn = op.apply(xn);
        }
        const Real Fn = objective(xn, Rxn);
        const Real fpr = (xn - z).norm() / std::max(xn.norm(), 1e-300);

        if (Fn > Fx) {
            if (t > 1.0) {
                // Momentum overshoot: restart from the last accepted iterate.
                t = 1.0;
                z = x;
                Rz = Rx;
            } else {
                step_L *= 2.0;
            }
            if (record) res.objective_history.push_back(Fx);
            continue;
        }

        const Real tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const Real mom = (t - 1.0) / tn;
        z = xn + mom * (xn - x);
        Rz = Rxn + mom * (Rxn - Rx);
        x = std::move(xn);
        Rx = std::move(Rxn);
        Fx = Fn;
        t = tn;
        if (record) res.objective_history.push_back(Fx);
        if (fpr < tol) {
            res.converged = true;
            break;
        }
    }
    res.coeffs = std::move(x);
    res.fitted = std::move(Rx);
    res.objective = Fx;
    res.lipschitz = step_L;
    return res;
}

/// Explicit matrix as an operator.
class DenseOperator
{
public:
    explicit DenseOperator(const CMatrix& M) : m_M(M) {}
    Index rows() const { return m_M.rows(); }
    Index cols() const { return m_M.cols(); }
    CVector apply(const CVector& b) const { return m_M * b; }
    CVector adjoint(const CVector& y) const { return m_M.adjoint() * y; }
    CVector column(Index i) const { return m_M.col(i); }

private:
    const CMatrix& m_M;
};

namespace detail
{

///
/// Damped Newton iterations for the lasso objective restricted to the
/// nonzero entries of b (taken as 2s real unknowns), where it is smooth.
/// Returns false, leaving b unchanged, if the objective cannot be decreased
/// or an entry is driven to zero.
///
inline bool newton_on_support(const CMatrix& R, const CVector& y, Real lambda, CVector& b,
                              int max_steps = 30)
{
    std::vector<Index> supp;
    for (Index i = 0; i < b.size(); ++i) {
        if (b(i) != Complex(0.0, 0.0)) supp.push_back(i);
    }
    const auto s = static_cast<Index>(supp.size());
    if (s == 0) return false;
    CMatrix RS(R.rows(), s);
    CVector bs(s);
    for (Index j = 0; j < s; ++j) {
        RS.col(j) = R.col(supp[j]);
        bs(j) = b(supp[j]);
    }
    const CMatrix G = RS.adjoint() * RS;
    const CVector rty = RS.adjoint() * y;
    auto objective = [&](const CVector& v) {
        return 0.5 * (y - RS * v).squaredNorm() + lambda * v.cwiseAbs().sum();
    };
    Real F = objective(bs);
    const Real scale = std::max(rty.cwiseAbs().maxCoeff(), 1e-300);
    bool improved = false;

    for (int step = 0; step < max_steps; ++step) {
        const CVector g = G * bs - rty;
        RVector grad(2 * s);
        RMatrix H(2 * s, 2 * s);
        H.topLeftCorner(s, s) = G.real();
        H.topRightCorner(s, s) = -G.imag();
        H.bottomLeftCorner(s, s) = G.imag();
        H.bottomRightCorner(s, s) = G.real();
        for (Index j = 0; j < s; ++j) {
            const Real m = std::abs(bs(j));
            const Real ur = bs(j).real() / m, ui = bs(j).imag() / m;
            grad(j) = g(j).real() + lambda * ur;
            grad(s + j) = g(j).imag() + lambda * ui;
            const Real c = lambda / m;
            H(j, j) += c * (1.0 - ur * ur);
            H(s + j, s + j) += c * (1.0 - ui * ui);
            H(j, s + j) -= c * ur * ui;
            H(s + j, j) -= c * ur * ui;
        }
        if (grad.cwiseAbs().maxCoeff() <= 1e-13 * scale) break;
        const Real ridge = 1e-14 * std::max(H.diagonal().maxCoeff(), 1e-300);
        H.diagonal().array() += ridge;
        const RVector d = -H.ldlt().solve(grad);
        if (!d.allFinite()) break;
        CVector dc(s);
        for (Index j = 0; j < s; ++j) dc(j) = Complex(d(j), d(s + j));
        const Real slope = grad.dot(d);
        if (!(slope < 0.0)) break;

        Real t = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            const CVector trial = bs + t * dc;
            bool zero_hit = false;
            for (Index j = 0; j < s; ++j) {
                if (std::abs(trial(j)) <= 1e-12 * std::abs(bs(j))) zero_hit = true;
            }
            if (!zero_hit) {
                const Real Ft = objective(trial);
                if (Ft <= F + 1e-4 * t * slope) {
                    bs = trial;
                    F = Ft;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if (!accepted) break;
        improved = true;
    }
    if (!improved) return false;
    for (Index j = 0; j < s; ++j) b(supp[j]) = bs(j);
    return true;
}

} // namespace detail

///
/// FISTA on a growing working set W. Columns outside W whose correlation
/// |R_i^H (y - R b)| exceeds lambda are added, largest first, until none is
/// left; columns that stay at zero well inside the dual constraint are dropped.
///
template <typename Op>
LassoResult lasso_working_set(const Op& op, const CVector& y, Real lambda, const CVector& x0,
                              Real tol, int max_iters, StepRule rule = StepRule::lipschitz,
                              bool record = false)
{
    constexpr Real kkt_slack = 1e-6;
    LassoResult res;
    CVector x = x0;
    std::vector<Index> work;
    for (Index i = 0; i < x.size(); ++i) {
        if (x(i) != Complex(0.0, 0.0)) work.push_back(i);
    }
    CMatrix RW(op.rows(), static_cast<Index>(work.size()));
    for (std::size_t k = 0; k < work.size(); ++k) RW.col(static_cast<Index>(k)) = detail::column_of(op, work[k]);
    CVector fitted = CVector::Zero(op.rows());
    {
        CVector xw(static_cast<Index>(work.size()));
        for (std::size_t k = 0; k < work.size(); ++k) xw(static_cast<Index>(k)) = x(work[k]);
        if (!work.empty()) fitted = RW * xw;
    }
    std::vector<char> in_work(static_cast<std::size_t>(op.cols()), 0);
    for (Index i : work) in_work[static_cast<std::size_t>(i)] = 1;

    int budget = max_iters;
    for (int round = 0; round < 500; ++round) {
        const CVector g = op.adjoint(y - fitted);
        std::vector<std::pair<Real, Index>> viol;
        for (Index i = 0; i < g.size(); ++i) {
            if (in_work[static_cast<std::size_t>(i)]) continue;
            const Real a = std::abs(g(i));
            if (a > lambda * (1.0 + kkt_slack)) viol.emplace_back(a, i);
        }
        if (viol.empty() && round > 0) break;
        if (viol.empty() && work.empty()) {
            res.converged = true;
            break;
        }
        if (budget <= 0) break;

        // Drop zero columns far from the dual boundary.
        {
            std::vector<Index> keep;
            std::vector<Index> pos;
            for (std::size_t k = 0; k < work.size(); ++k) {
                const Index i = work[k];
                if (x(i) == Complex(0.0, 0.0) && std::abs(g(i)) < 0.5 * lambda) {
                    in_work[static_cast<std::size_t>(i)] = 0;
                } else {
                    keep.push_back(i);
                    pos.push_back(static_cast<Index>(k));
                }
            }
            if (keep.size() != work.size()) {
                CMatrix R2(op.rows(), static_cast<Index>(keep.size()));
                for (std::size_t k = 0; k < keep.size(); ++k) R2.col(static_cast<Index>(k)) = RW.col(pos[k]);
                RW = std::move(R2);
                work = std::move(keep);
            }
        }

        const std::size_t add = std::min(viol.size(), std::max<std::size_t>(16, work.size()));
        if (4 * static_cast<Index>(work.size() + add) > op.cols()) {
            // The active set is no longer small: continue on the implicit operator.
            const Real lip = 1.05 * estimate_lipschitz(op, 50);
            LassoResult r = lasso_fista(op, y, lambda, x, lip, tol, std::max(budget, 1), rule, record);
            res.iters += r.iters;
            res.converged = r.converged;
            if (record) {
                res.objective_history.insert(res.objective_history.end(), r.objective_history.begin(),
                                             r.objective_history.end());
            }
            x = std::move(r.coeffs);
            fitted = std::move(r.fitted);
            break;
        }
        std::partial_sort(viol.begin(), viol.begin() + static_cast<std::ptrdiff_t>(add), viol.end(),
                          [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
        const Index old = static_cast<Index>(work.size());
        RW.conservativeResize(Eigen::NoChange, old + static_cast<Index>(add));
        for (std::size_t k = 0; k < add; ++k) {
            const Index i = viol[k].second;
            work.push_back(i);
            in_work[static_cast<std::size_t>(i)] = 1;
            RW.col(old + static_cast<Index>(k)) = detail::column_of(op, i);
        }

        CVector xw(static_cast<Index>(work.size()));
        for (std::size_t k = 0; k < work.size(); ++k) xw(static_cast<Index>(k)) = x(work[k]);
        const DenseOperator sub(RW);
        const Real lip = 1.05 * estimate_lipschitz(sub, 30);
        // Loose FISTA to settle the support, Newton on it, then FISTA to the
        // requested tolerance (immediate when the Newton point is optimal).
        LassoResult r = lasso_fista(sub, y, lambda, xw, lip, std::max(tol, 1e-4),
                                    std::min(budget, 2000), rule, record);
        budget -= r.iters;
        res.iters += r.iters;
        if (record) {
            res.objective_history.insert(res.objective_history.end(), r.objective_history.begin(),
                                         r.objective_history.end());
        }
        xw = r.coeffs;
        detail::newton_on_support(RW, y, lambda, xw);
        r = lasso_fista(sub, y, lambda, xw, lip, tol, std::max(budget, 1), rule, record);
        budget -= r.iters;
        res.iters += r.iters;
        res.converged = r.converged;
        res.lipschitz = r.lipschitz;
        if (record) {
            res.objective_history.insert(res.objective_history.end(), r.objective_history.begin(),
                                         r.objective_history.end());
        }
        for (std::size_t k = 0; k < work.size(); ++k) x(work[k]) = r.coeffs(static_cast<Index>(k));
        fitted = std::move(r.fitted);
    }
    res.coeffs = std::move(x);
    res.fitted = std::move(fitted);
    res.objective = 0.5 * (y - res.fitted).squaredNorm() + lambda * detail::l1_norm(res.coeffs);
    return res;
}

///
/// L1-ERR: minimize ||b||_1 subject to ||y - R b||^2 <= cfg.delta.
///
/// Returns with status converged when the last penalized solve met cfg.tol
/// and the squared residual lies in [0.98 delta, 1.01 delta] (or below
/// 1.01 delta when delta is at equality scale). Reports infeasible when the
/// residual stalls above sqrt(delta) as lambda -> 0.
///
template <typename Op>
L1Result solve_l1_err(const Op& op, const CVector& y, const SolverConfig& cfg)
{
    cfg.validate();
    if (y.size() != op.rows()) throw DimensionError("measurement size does not match operator");

    L1Result out;
    out.coeffs = CVector::Zero(op.cols());
    const Real ynorm = y.norm();
    const Real target = std::sqrt(cfg.delta);
    if (ynorm * ynorm <= cfg.delta) {
        out.status = SolveStatus::converged;
        out.residual = ynorm;
        return out;
    }

    const Real lip = cfg.working_set ? 1.0 : 1.05 * estimate_lipschitz(op, cfg.power_iters);
    const CVector aty = op.adjoint(y);
    const Real lambda_max = aty.cwiseAbs().maxCoeff();
    if (lip <= 0.0 || lambda_max <= 0.0) {
        out.status = SolveStatus::infeasible;
        out.residual = ynorm;
        return out;
    }

    // Equality-scale targets accept any residual below the ball radius.
    const bool equality_scale = target <= 1e-6 * ynorm;
    const Real hi_ok = std::sqrt(1.01) * target;
    const Real lo_ok = equality_scale ? 0.0 : std::sqrt(0.98) * target;

    CVector x = CVector::Zero(op.cols());
    Real lam = 0.5 * lambda_max;
    Real prev_lam = lambda_max;
    Real prev_rho = ynorm;
    // Bracket on lambda: residual above target at lam_hi, below at lam_lo.
    Real lam_hi = lambda_max, rho_hi = ynorm;
    Real lam_lo = 0.0, rho_lo = 0.0;
    int budget = cfg.max_iters;
    int stalls = 0;

    for (int outer = 0; outer < 200 && budget > 0; ++outer) {
        out.outer_steps = outer + 1;
        // Inner accuracy scales with how small the residual must get.
        const Real rel_target = std::max(target, 1e-3 * prev_rho) / ynorm;
        const Real inner_tol = std::min(cfg.tol, 0.05 * rel_target);
        LassoResult r = cfg.working_set
                            ? lasso_working_set(op, y, lam, x, inner_tol, budget, cfg.step_rule,
                                                cfg.record_objective)
                            : lasso_fista(op, y, lam, x, lip, inner_tol, budget, cfg.step_rule,
                                          cfg.record_objective);
        budget -= r.iters;
        out.iters += r.iters;
        x = r.coeffs;
        const Real rho = (y - r.fitted).norm();
        out.coeffs = x;
        out.residual = rho;
        out.lambda = lam;
        if (cfg.record_objective) out.objective_history = std::move(r.objective_history);

        if (rho <= hi_ok && rho >= lo_ok) {
            out.status = r.converged ? SolveStatus::converged : SolveStatus::max_iterations;
            return out;
        }
        if (equality_scale) {
            CVector polished;
            Real polished_rho = 0.0;
            if (detail::polish_support(op, y, x, hi_ok, polished, polished_rho)) {
                out.coeffs = std::move(polished);
                out.residual = polished_rho;
                out.status = SolveStatus::converged;
                return out;
            }
        }

        if (rho > target) {
            lam_hi = lam;
            rho_hi = rho;
        } else {
            lam_lo = lam;
            rho_lo = rho;
        }

        if (lam < 1e-15 * lambda_max) {
            out.status = SolveStatus::infeasible;
            return out;
        }
        // A decade of lambda that barely moves the residual means the ball is
        // out of reach of range(R).
        if (rho > target && prev_rho > 0.0 && std::log(prev_rho / rho) < 1e-3 * std::log(prev_lam / lam)) {
            if (++stalls >= 4) {
                out.status = SolveStatus::infeasible;
                return out;
            }
        } else {
            stalls = 0;
        }

        Real next;
        if (lam_lo > 0.0) {
            // Bracketed: secant in (log lambda, log rho), kept inside the bracket.
            const Real a = std::log(lam_lo), b = std::log(lam_hi);
            const Real fa = std::log(std::max(rho_lo, 1e-300)) - std::log(target);
            const Real fb = std::log(rho_hi) - std::log(target);
            Real c = (fb - fa) != 0.0 ? b - fb * (b - a) / (fb - fa) : 0.5 * (a + b);
            const Real margin = 0.02 * (b - a);
            c = std::clamp(c, a + margin, b - margin);
            next = std::exp(c);
        } else {
            // Extrapolate the local slope of log rho against log lambda.
            const Real slope = (prev_lam > lam && prev_rho > rho)
                                   ? std::log(prev_rho / rho) / std::log(prev_lam / lam)
                                   : 0.0;
            Real ratio = 0.25;
            if (slope > 0.3) ratio = std::pow(target / rho, 1.0 / slope);
            ratio = std::clamp(ratio, 0.1, 0.5);
            next = lam * ratio;
        }
        prev_lam = lam;
        prev_rho = rho;
        lam = next;
    }
    out.status = SolveStatus::max_iterations;
    return out;
}

/// minimize ||b||_1 subject to y = R b, realized as L1-ERR at equality scale.
template <typename Op>
L1Result solve_l1(const Op& op, const CVector& y, SolverConfig cfg = {})
{
    cfg.delta = equality_delta(y);
    if (y.norm() == 0.0) cfg.delta = 0.0;
    return solve_l1_err(op, y, cfg);
}

} // namespace srradar

#endif
