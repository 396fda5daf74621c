#include <algorithm>
#include <gtest/gtest.h>

#include <random>
#include <set>

#include <srradar/extract.hpp>
#include <srradar/grid.hpp>
#include <srradar/solver.hpp>

#include "oracles.hpp"

using namespace srradar;

namespace
{

CVector random_vector(Index n, std::uint64_t seed)
{
    Rng rng(seed);
    std::normal_distribution<Real> g;
    CVector v(n);
    for (Index i = 0; i < n; ++i) {
        const Real re = g(rng);
        const Real im = g(rng);
        v(i) = Complex(re, im);
    }
    return v;
}

Complex unit_phase(Rng& rng)
{
    return cis2pi(std::uniform_real_distribution<Real>(0.0, 1.0)(rng));
}

} // namespace

TEST(GridOperator, SingleColumnIsShiftedProbe)
{
    const Index L = 15, K = 30;
    const ProbingSignal x = random_probing(L, 1);
    const GridOperator op(x, FineGrid::siso(L, K));
    CVector b = CVector::Zero(op.cols());
    b(op.flat_index({0, 7, 19})) = 1.0;
    const CVector want = shifted_probe(x, 7.0 / K, 19.0 / K);
    EXPECT_LT((op.apply(b) - want).norm(), 1e-12);
    EXPECT_LT((op.column(op.flat_index({0, 7, 19})) - want).norm(), 1e-12);
}

TEST(GridOperator, NaturalGridIsGaborMatrix)
{
    const Index L = 15, N = 7;
    const ProbingSignal x = random_probing(L, 2);
    const GridOperator op(x, FineGrid::siso(L, L));
    for (Index n = 0; n < L; ++n) {
        for (Index m = 0; m < L; ++m) {
            CVector e = CVector::Zero(op.cols());
            e(op.flat_index({0, n, m})) = 1.0;
            // Delay n / L is Gabor shift l = n, Doppler m / L is modulation k = m (mod L).
            const Index l = n > N ? n - L : n, k = m > N ? m - L : m;
            EXPECT_LT((op.apply(e) - oracle::gabor(x.samples(), k, l)).norm(), 1e-10);
        }
    }
}

TEST(GridOperator, SparseForwardMatchesDenseOracle)
{
    const Index L = 15, K = 30;
    const ProbingSignal x = random_probing(L, 3);
    const CMatrix R = oracle::dense_grid(x.samples(), K, K, K);
    for (auto transform : {DopplerTransform::dense, DopplerTransform::fft}) {
        const GridOperator op(x, FineGrid::siso(L, K), transform);
        Rng rng(4);
        for (int t = 0; t < 5; ++t) {
            CVector b = CVector::Zero(op.cols());
            for (int s = 0; s < 3; ++s) {
                b(std::uniform_int_distribution<Index>(0, op.cols() - 1)(rng)) = unit_phase(rng);
            }
            EXPECT_LT((op.apply(b) - R * b).norm(), 1e-10);
        }
        const CVector dense = random_vector(op.cols(), 5);
        EXPECT_LT((op.apply(dense) - R * dense).norm(), 1e-10 * dense.norm());
    }
}

TEST(GridOperator, AdjointIdentity)
{
    const Index L = 15, K = 30;
    const GridOperator op(random_probing(L, 6), FineGrid::siso(L, K));
    Real worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        const CVector b = random_vector(op.cols(), 100 + t), y = random_vector(L, 200 + t);
        worst = std::max(worst, std::abs(op.apply(b).dot(y) - b.dot(op.adjoint(y))) / (b.norm() * y.norm()));
    }
    EXPECT_LT(worst, 1e-10);
    EXPECT_EQ(op.adjoint(CVector::Zero(L)).norm(), 0.0);
}

TEST(GridOperator, AdjointOfUnitVectorIsConjugateGaborRow)
{
    const Index L = 15;
    const ProbingSignal x = random_probing(L, 7);
    const GridOperator op(x, FineGrid::siso(L, L));
    const CMatrix R = oracle::dense_grid(x.samples(), L, L, L);
    for (Index p = 0; p < L; ++p) {
        CVector e = CVector::Zero(L);
        e(p) = 1.0;
        EXPECT_LT((op.adjoint(e) - R.row(p).adjoint()).norm(), 1e-10);
    }
}

TEST(GridOperator, RegionKeepsLeadingIndices)
{
    const Index L = 15, K = 60;
    const ProbingSignal x = random_probing(L, 8);
    const FineGrid g = FineGrid::siso(L, K, Region{0.25, 0.5});
    EXPECT_EQ(g.delay_count(), 15);
    EXPECT_EQ(g.doppler_count(), 30);
    const GridOperator op(x, g);
    EXPECT_EQ(op.cols(), 15 * 30);
    const CMatrix R = oracle::dense_grid(x.samples(), K, 15, 30);
    const CVector b = random_vector(op.cols(), 9), y = random_vector(L, 10);
    EXPECT_LT((op.apply(b) - R * b).norm(), 1e-10 * b.norm());
    EXPECT_LT((op.adjoint(y) - R.adjoint() * y).norm(), 1e-10 * y.norm());
}

TEST(GridOperator, RejectsCoarseGridAndBadSizes)
{
    EXPECT_THROW(FineGrid::siso(15, 14), DimensionError);
    const GridOperator op(random_probing(15, 11), FineGrid::siso(15, 15));
    EXPECT_THROW(op.apply(CVector::Zero(10)), DimensionError);
    EXPECT_THROW(op.adjoint(CVector::Zero(14)), DimensionError);
}

TEST(GridOperator, ColumnAtMatchesOffGridShift)
{
    const ProbingSignal x = random_probing(15, 12);
    const GridOperator op(x, FineGrid::siso(15, 15));
    EXPECT_LT((op.column_at(0.0, 0.1234, 0.777) - oracle::shifted(x.samples(), 0.1234, 0.777)).norm(), 1e-10);
}

TEST(Solver, ZeroMeasurementGivesZero)
{
    const GridOperator op(random_probing(15, 13), FineGrid::siso(15, 30));
    const L1Result r = solve_l1(op, CVector::Zero(15));
    EXPECT_EQ(r.status, SolveStatus::converged);
    EXPECT_EQ(r.coeffs.norm(), 0.0);
}

TEST(Solver, SingleOnGridScatterer)
{
    const Index L = 63;
    const ProbingSignal x = random_probing(L, 14);
    const GridOperator op(x, FineGrid::siso(L, L));
    const Index idx = op.flat_index({0, 17, 40});
    const Complex b(0.6, -0.8);
    const CVector y = b * op.column(idx);
    const L1Result r = solve_l1(op, y);
    ASSERT_EQ(r.status, SolveStatus::converged);
    const SupportCheck c = check_support(op, y, r.coeffs, {{idx, b}});
    EXPECT_TRUE(c.exact);
    EXPECT_LT(c.coeff_error, 1e-6);
}

TEST(Solver, FourSeparatedScatterersOnFineGrid)
{
    const Index L = 63, K = 126;
    const ProbingSignal x = random_probing(L, 15);
    const GridOperator op(x, FineGrid::siso(L, K));
    // Spacing 16 / 126 exceeds 2.38 / 31 in both coordinates.
    const Index cells[4][2] = {{3, 5}, {40, 21}, {77, 90}, {110, 60}};
    Rng rng(16);
    std::vector<std::pair<Index, Complex>> truth;
    CVector y = CVector::Zero(L);
    for (const auto& c : cells) {
        const Index i = op.flat_index({0, c[0], c[1]});
        truth.emplace_back(i, unit_phase(rng));
        y += truth.back().second * op.column(i);
    }
    const L1Result r = solve_l1(op, y);
    ASSERT_EQ(r.status, SolveStatus::converged);
    const SupportCheck c = check_support(op, y, r.coeffs, truth);
    EXPECT_TRUE(c.exact);
    EXPECT_LT(c.coeff_error, 1e-6);
    // Optimality sanity: the l1 norm cannot exceed that of the truth.
    EXPECT_LE(r.coeffs.cwiseAbs().sum(), 4.0 + 1e-6);
}

TEST(Solver, LargeNoiseBallGivesZero)
{
    const ProbingSignal x = random_probing(15, 17);
    const GridOperator op(x, FineGrid::siso(15, 30));
    const CVector y = op.column(5) + 0.5 * op.column(100);
    SolverConfig cfg;
    cfg.delta = y.squaredNorm();
    const L1Result r = solve_l1_err(op, y, cfg);
    EXPECT_EQ(r.status, SolveStatus::converged);
    EXPECT_EQ(r.coeffs.norm(), 0.0);
}

TEST(Solver, TinyNoiseBallMatchesEqualityProgram)
{
    const Index L = 31;
    const ProbingSignal x = random_probing(L, 18);
    const GridOperator op(x, FineGrid::siso(L, 62));
    const CVector y = Complex(1.0, 0.5) * op.column(op.flat_index({0, 4, 9})) -
                      0.7 * op.column(op.flat_index({0, 40, 33}));
    SolverConfig cfg;
    cfg.delta = 1e-12;
    const L1Result a = solve_l1_err(op, y, cfg);
    const L1Result b = solve_l1(op, y);
    ASSERT_EQ(a.status, SolveStatus::converged);
    ASSERT_EQ(b.status, SolveStatus::converged);
    EXPECT_LT((a.coeffs - b.coeffs).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Solver, NoiseBallIsMetWithinOnePercent)
{
    const Index L = 63;
    const ProbingSignal x = random_probing(L, 19);
    const GridOperator op(x, FineGrid::from_srf(L, 2));
    Rng rng(20);
    std::uniform_real_distribution<Real> u(0.0, 1.0);
    CVector y = CVector::Zero(L);
    for (int k = 0; k < 4; ++k) y += unit_phase(rng) * shifted_probe(x, u(rng), u(rng));
    for (Real frac : {1e-3, 1e-2, 1e-1}) {
        SolverConfig cfg;
        cfg.delta = frac * y.squaredNorm();
        const L1Result r = solve_l1_err(op, y, cfg);
        ASSERT_EQ(r.status, SolveStatus::converged) << frac;
        const Real res2 = (y - op.apply(r.coeffs)).squaredNorm();
        EXPECT_LE(res2, 1.01 * cfg.delta);
        EXPECT_GE(res2, 0.98 * cfg.delta);
    }
}

TEST(Solver, BudgetExhaustionIsReported)
{
    const Index L = 31;
    const ProbingSignal x = random_probing(L, 21);
    const GridOperator op(x, FineGrid::from_srf(L, 4));
    const CVector y = shifted_probe(x, 0.3141, 0.2718) + shifted_probe(x, 0.7, 0.1);
    SolverConfig cfg;
    cfg.max_iters = 3;
    const L1Result r = solve_l1(op, y, cfg);
    EXPECT_EQ(r.status, SolveStatus::max_iterations);
}

TEST(Solver, FistaObjectiveIsMonotone)
{
    const Index L = 31;
    const ProbingSignal x = random_probing(L, 22);
    const GridOperator op(x, FineGrid::from_srf(L, 2));
    const CVector y = shifted_probe(x, 0.123, 0.456) + random_vector(L, 23) * 0.01;
    const Real lip = 1.05 * estimate_lipschitz(op);
    const Real lam = 0.05 * op.adjoint(y).cwiseAbs().maxCoeff();
    for (StepRule rule : {StepRule::lipschitz, StepRule::backtracking}) {
        const LassoResult r = lasso_fista(op, y, lam, CVector::Zero(op.cols()), lip, 1e-9, 2000, rule, true);
        ASSERT_GT(r.objective_history.size(), 10u);
        for (std::size_t k = 1; k < r.objective_history.size(); ++k) {
            EXPECT_LE(r.objective_history[k], r.objective_history[k - 1] + 1e-12);
        }
    }
}

TEST(Solver, WorkingSetAgreesWithPlainFista)
{
    const Index L = 31;
    const ProbingSignal x = random_probing(L, 24);
    const GridOperator op(x, FineGrid::from_srf(L, 2));
    const CVector y = shifted_probe(x, 0.2, 0.6) - 0.5 * shifted_probe(x, 0.71, 0.13);
    SolverConfig a, b;
    a.delta = b.delta = 1e-3 * y.squaredNorm();
    b.working_set = false;
    const L1Result ra = solve_l1_err(op, y, a), rb = solve_l1_err(op, y, b);
    ASSERT_EQ(ra.status, SolveStatus::converged);
    ASSERT_EQ(rb.status, SolveStatus::converged);
    EXPECT_NEAR(ra.coeffs.cwiseAbs().sum(), rb.coeffs.cwiseAbs().sum(), 1e-2 * rb.coeffs.cwiseAbs().sum());
}

TEST(Solver, ConfigValidation)
{
    SolverConfig c;
    c.tol = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.delta = -1.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Extract, OneSparseIsUnchanged)
{
    const Index L = 31, K = 62;
    const ProbingSignal x = random_probing(L, 25);
    const GridOperator op(x, FineGrid::siso(L, K));
    const Index i = op.flat_index({0, 11, 50});
    const Complex b(-0.3, 0.9);
    CVector coeffs = CVector::Zero(op.cols());
    coeffs(i) = 0.8 * b;  // shrunk, as l1 leaves it
    const CVector y = b * op.column(i);
    const SparseSolution s = extract_and_debias(op, y, coeffs);
    ASSERT_EQ(s.estimates.size(), 1u);
    EXPECT_NEAR(s.estimates[0].tau, 11.0 / K, 1e-15);
    EXPECT_NEAR(s.estimates[0].nu, 50.0 / K, 1e-15);
    EXPECT_LT(std::abs(s.estimates[0].b - b), 1e-8);
}

TEST(Extract, AdjacentCellsMerge)
{
    const Index L = 31, K = 62;
    const ProbingSignal x = random_probing(L, 26);
    const GridOperator op(x, FineGrid::siso(L, K));
    const Real tau = 10.5 / K, nu = 20.0 / K;
    const CVector y = shifted_probe(x, tau, nu);
    CVector coeffs = CVector::Zero(op.cols());
    coeffs(op.flat_index({0, 10, 20})) = 0.5;
    coeffs(op.flat_index({0, 11, 20})) = 0.5;
    const SparseSolution s = extract_and_debias(op, y, coeffs);
    ASSERT_EQ(s.estimates.size(), 1u);
    EXPECT_NEAR(s.estimates[0].tau, tau, 1e-12);
    EXPECT_NEAR(s.estimates[0].nu, nu, 1e-12);
    EXPECT_LT(std::abs(s.estimates[0].b - 1.0), 1e-8);
}

TEST(Extract, OffGridScattererDominantEstimate)
{
    const Index L = 31, K = 62;
    const ProbingSignal x = random_probing(L, 26);
    const GridOperator op(x, FineGrid::siso(L, K));
    const Real tau = 10.5 / K, nu = 20.25 / K;
    const CVector y = shifted_probe(x, tau, nu);
    // A loose residual leaves one cluster; a tight one adds weak off-target mass.
    for (Real frac : {1e-1, 1e-2}) {
        SolverConfig cfg;
        cfg.delta = frac * y.squaredNorm();
        const Recovery rec = recover(op, y, cfg);
        ASSERT_EQ(rec.solve.status, SolveStatus::converged);
        const auto& est = rec.solution.estimates;
        ASSERT_FALSE(est.empty());
        if (frac > 5e-2) EXPECT_EQ(est.size(), 1u);
        const auto top = std::max_element(est.begin(), est.end(),
                                          [](const Estimate& a, const Estimate& b) { return std::abs(a.b) < std::abs(b.b); });
        EXPECT_LT(std::abs(wrap_diff(top->tau, tau)) * K, 1.0);
        EXPECT_LT(std::abs(wrap_diff(top->nu, nu)) * K, 1.0);
        for (const auto& e : est) {
            if (&e != &*top) EXPECT_LT(std::abs(e.b), 0.1 * std::abs(top->b));
        }
    }
}

TEST(Extract, ClustersAcrossWrapPoint)
{
    const Index L = 15, K = 30;
    const GridOperator op(random_probing(L, 27), FineGrid::siso(L, K));
    CVector c = CVector::Zero(op.cols());
    c(op.flat_index({0, 0, 5})) = 1.0;
    c(op.flat_index({0, K - 1, 5})) = 1.0;
    const auto clusters = cluster_coefficients(op, c);
    ASSERT_EQ(clusters.size(), 1u);
    const Estimate e = cluster_centroid(op, clusters[0]);
    EXPECT_NEAR(std::abs(wrap_diff(e.tau, -0.5 / K)), 0.0, 1e-12);
}

TEST(Extract, EmptySolution)
{
    const GridOperator op(random_probing(15, 28), FineGrid::siso(15, 30));
    const CVector y = CVector::Zero(15);
    const SparseSolution s = extract_and_debias(op, y, CVector::Zero(op.cols()));
    EXPECT_TRUE(s.estimates.empty());
    EXPECT_TRUE(s.coeffs.empty());
}

TEST(Extract, CoincidentEstimatesFlagged)
{
    const Index L = 15;
    const ProbingSignal x = random_probing(L, 29);
    const GridOperator op(x, FineGrid::siso(L, 30));
    std::vector<Estimate> est{{Complex(1.0, 0.0), 0.0, 0.2, 0.3, false},
                              {Complex(0.5, 0.0), 0.0, 0.2, 0.3, false},
                              {Complex(0.7, 0.0), 0.0, 0.6, 0.1, false}};
    const CVector y = shifted_probe(x, 0.2, 0.3) + shifted_probe(x, 0.6, 0.1);
    debias(op, y, est);
    EXPECT_FALSE(est[0].rank_deficient);
    EXPECT_TRUE(est[1].rank_deficient);
    EXPECT_FALSE(est[2].rank_deficient);
    EXPECT_LT(std::abs(est[0].b - 1.0), 1e-10);
    EXPECT_LT(std::abs(est[2].b - 1.0), 1e-10);
}

TEST(ResolutionError, FormulaAndMatching)
{
    const Index L = 21;
    const std::vector<Scatterer> truth{{Complex(1.0, 0.0), 0.1, 0.2}};
    EXPECT_EQ(resolution_error({{Complex(1.0, 0.0), 0.0, 0.1, 0.2, false}}, truth, L).mean, 0.0);
    const auto half = resolution_error({{Complex(1.0, 0.0), 0.0, 0.1 + 0.5 / L, 0.2, false}}, truth, L);
    EXPECT_NEAR(half.mean, 0.5, 1e-12);
    // Wrap-around: 0.99 vs 0.01 is 0.02 apart.
    const auto wrap = resolution_error({{Complex(1.0, 0.0), 0.0, 0.99, 0.2, false}},
                                       {{Complex(1.0, 0.0), 0.01, 0.2}}, L);
    EXPECT_NEAR(wrap.mean, 0.02 * L, 1e-12);
    const auto miss = resolution_error({}, truth, L);
    EXPECT_EQ(miss.unmatched_truth, 1);
    EXPECT_EQ(miss.matched, 0);
}

TEST(ResolutionError, CoarseGridMatchesRounding)
{
    // At SRF 1 the on-grid estimate is the nearest natural grid point, up to
    // occasional neighbour picks; compare with direct rounding.
    const Index L = 63;
    Rng rng(30);
    std::uniform_real_distribution<Real> u(0.0, 1.0);
    Real solved = 0.0, rounded = 0.0;
    const int T = 10;
    for (int t = 0; t < T; ++t) {
        const ProbingSignal x = random_probing(L, 300 + t);
        const GridOperator op(x, FineGrid::siso(L, L));
        const Scatterer s{unit_phase(rng), u(rng), u(rng)};
        const CVector y = s.b * shifted_probe(x, s.tau, s.nu);
        SolverConfig cfg;
        cfg.delta = 0.05 * y.squaredNorm();
        ExtractConfig ex;
        ex.location = Location::peak;
        const Recovery rec = recover(op, y, cfg, ex);
        solved += resolution_error(rec.solution.estimates, {s}, L).mean;
        const Real rt = std::round(s.tau * L) / L, rn = std::round(s.nu * L) / L;
        rounded += resolution_error({{s.b, 0.0, rt, rn, false}}, {s}, L).mean;
    }
    EXPECT_LT(std::abs(solved - rounded) / T, 0.25);
    EXPECT_LT(rounded / T, 0.71);
}
