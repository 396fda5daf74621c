#include <gtest/gtest.h>

#include <random>
#include <set>

#include <srradar/experiment.hpp>
#include <srradar/mimo.hpp>

#include "oracles.hpp"

using namespace srradar;

namespace
{

std::vector<CVector> raw(const std::vector<ProbingSignal>& probes)
{
    std::vector<CVector> out;
    for (const auto& p : probes) out.push_back(p.samples());
    return out;
}

CVector random_cvector(Index n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<Real> g;
    CVector v(n);
    for (Index i = 0; i < n; ++i) {
        const Real re = g(rng);
        v(i) = Complex(re, g(rng));
    }
    return v;
}

Real rel_err(const CVector& a, const CVector& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

} // namespace

TEST(Geometry, AngleToBeta)
{
    EXPECT_NEAR(angle_to_beta(0.0), 0.0, 1e-15);
    EXPECT_NEAR(angle_to_beta(-M_PI / 2), 0.5, 1e-15);
    EXPECT_NEAR(angle_to_beta(M_PI / 6), 0.75, 1e-15);
}

TEST(Geometry, SpacingsFormUniformVirtualArray)
{
    MimoConfig cfg;
    cfg.n_tx = 3;
    cfg.n_rx = 4;
    cfg.f_c = 2e9;
    EXPECT_NEAR(cfg.tx_spacing(), speed_of_light / 4e9, 1e-9);
    EXPECT_NEAR(cfg.rx_spacing(), 3.0 * cfg.tx_spacing(), 1e-9);
    std::set<Index> seen;
    for (Index r = 0; r < cfg.n_rx; ++r) {
        for (Index j = 0; j < cfg.n_tx; ++j) EXPECT_TRUE(seen.insert(j + r * cfg.n_tx).second);
    }
    EXPECT_EQ(static_cast<Index>(seen.size()), cfg.aperture());
    EXPECT_EQ(*seen.begin(), 0);
    EXPECT_EQ(*seen.rbegin(), cfg.aperture() - 1);
}

TEST(SynthesizeMimo, MatchesOracle)
{
    const MimoConfig cfg{2, 3, 15};
    const auto probes = random_mimo_probing(cfg, 1);
    const std::vector<MimoScatterer> scene{{Complex(0.4, -0.7), 0.13, 0.41, 0.77}, {Complex(-1.0, 0.2), 0.62, 0.05, 0.33}};
    const CVector y = synthesize_mimo(probes, scene, cfg);
    CVector want = CVector::Zero(cfg.n_rx * cfg.L);
    for (const auto& s : scene) want += s.b * oracle::mimo_response(raw(probes), cfg.n_rx, s.beta, s.tau, s.nu);
    EXPECT_LT(rel_err(y, want), 1e-10);
}

TEST(SynthesizeMimo, SingleElementReducesToSiso)
{
    const MimoConfig cfg{1, 1, 31};
    const auto probes = random_mimo_probing(cfg, 2);
    const Scatterer s{Complex(0.3, 0.9), 0.27, 0.64};
    const CVector siso = synthesize(probes[0], Scene{31, {s}}).y;
    EXPECT_LT(rel_err(synthesize_mimo(probes, {{s.b, 0.37, s.tau, s.nu}}, cfg), siso), 1e-10);
}

TEST(SynthesizeMimo, ZeroDelayDoppler)
{
    const MimoConfig cfg{3, 2, 15};
    const auto probes = random_mimo_probing(cfg, 3);
    const Real beta = 0.21;
    const CVector y = synthesize_mimo(probes, {{Complex(1.0, 0.0), beta, 0.0, 0.0}}, cfg);
    for (Index r = 0; r < cfg.n_rx; ++r) {
        CVector want = CVector::Zero(cfg.L);
        for (Index j = 0; j < cfg.n_tx; ++j) want += oracle::e2pi(j * beta) * probes[j].samples();
        want *= oracle::e2pi(static_cast<Real>(r * cfg.n_tx) * beta);
        EXPECT_LT(rel_err(y.segment(r * cfg.L, cfg.L), want), 1e-12);
    }
}

TEST(SynthesizeMimo, ZeroAngleGivesIdenticalReceivers)
{
    const MimoConfig cfg{3, 3, 15};
    const auto probes = random_mimo_probing(cfg, 4);
    const CVector y = synthesize_mimo(probes, {{Complex(0.5, 0.5), 0.0, 0.3, 0.6}}, cfg);
    for (Index r = 1; r < cfg.n_rx; ++r) EXPECT_LT(rel_err(y.segment(r * cfg.L, cfg.L), y.head(cfg.L)), 1e-14);
}

TEST(SynthesizeMimo, LinearAndChecked)
{
    const MimoConfig cfg{2, 2, 9};
    const auto probes = random_mimo_probing(cfg, 5);
    const MimoScatterer a{Complex(1.0, -0.5), 0.3, 0.4, 0.5}, b{Complex(0.2, 0.1), 0.8, 0.1, 0.9};
    EXPECT_LT(rel_err(synthesize_mimo(probes, {a, b}, cfg),
                      synthesize_mimo(probes, {a}, cfg) + synthesize_mimo(probes, {b}, cfg)), 1e-12);
    MimoScatterer a3 = a;
    a3.b *= 3.0;
    EXPECT_LT(rel_err(synthesize_mimo(probes, {a3}, cfg), 3.0 * synthesize_mimo(probes, {a}, cfg)), 1e-12);
    EXPECT_THROW(synthesize_mimo({probes[0]}, {a}, cfg), DimensionError);
}

TEST(MimoProbing, VarianceIsOneOverNtL)
{
    const MimoConfig cfg{3, 3, 41};
    Real acc = 0.0;
    Index count = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        for (const auto& p : random_mimo_probing(cfg, 100 + s)) {
            acc += p.samples().squaredNorm();
            count += cfg.L;
        }
    }
    const Real want = 1.0 / (cfg.n_tx * cfg.L);
    EXPECT_NEAR(acc / count, want, 4.0 * want * std::sqrt(2.0 / count));
}

TEST(MimoGrid, ColumnsMatchSynthesis)
{
    const MimoConfig cfg{2, 3, 7};
    const auto probes = random_mimo_probing(cfg, 6);
    const FineGrid grid = mimo_grid(cfg, 2);
    const GridOperator op(probes, cfg.shape(), grid);
    EXPECT_EQ(op.cols(), 12 * 14 * 14);
    EXPECT_EQ(op.rows(), 21);
    for (const GridIndex g : {GridIndex{0, 0, 0}, GridIndex{5, 3, 11}, GridIndex{11, 13, 2}}) {
        CVector c = CVector::Zero(op.cols());
        c(op.flat_index(g)) = 1.0;
        const Real beta = g.beta / 12.0, tau = g.delay / 14.0, nu = g.doppler / 14.0;
        EXPECT_LT(rel_err(op.apply(c), synthesize_mimo(probes, {{Complex(1.0, 0.0), beta, tau, nu}}, cfg)), 1e-10);
        EXPECT_LT(rel_err(op.apply(c), oracle::mimo_response(raw(probes), cfg.n_rx, beta, tau, nu)), 1e-10);
    }
}

TEST(MimoGrid, AdjointIdentity)
{
    const MimoConfig cfg{2, 2, 7};
    const GridOperator op(random_mimo_probing(cfg, 7), cfg.shape(), mimo_grid(cfg, 2));
    for (int t = 0; t < 10; ++t) {
        const CVector z = random_cvector(op.cols(), 10 + t), y = random_cvector(op.rows(), 50 + t);
        EXPECT_LT(std::abs(op.apply(z).dot(y) - z.dot(op.adjoint(y))), 1e-10 * z.norm() * y.norm());
    }
}

TEST(MimoGrid, SingleElementMatchesSisoGrid)
{
    const Index L = 15;
    const MimoConfig cfg{1, 1, L};
    const auto probes = random_mimo_probing(cfg, 8);
    const GridOperator m(probes, cfg.shape(), mimo_grid(cfg, 2));
    const GridOperator s(probes[0], FineGrid::siso(L, 2 * L));
    ASSERT_EQ(m.rows(), s.rows());
    const CVector y = random_cvector(L, 9);
    const CVector am = m.adjoint(y), as = s.adjoint(y);
    for (Index n = 0; n < 2 * L; n += 3) {
        for (Index f = 0; f < 2 * L; ++f) {
            const Complex want = as(s.flat_index({0, n, f}));
            EXPECT_LT(std::abs(am(m.flat_index({0, n, f})) - want), 1e-10 * (1.0 + std::abs(want)));
            EXPECT_LT(std::abs(am(m.flat_index({1, n, f})) - want), 1e-10 * (1.0 + std::abs(want)));
        }
    }
}

TEST(MimoAtom, OriginIsAllOnes)
{
    const CVector f = mimo_atom(0.0, 0.0, 0.0, 9, 7);
    EXPECT_EQ(f.size(), 9 * 49);
    EXPECT_LT((f - CVector::Ones(f.size())).norm(), 1e-15);
}

TEST(MimoAtom, OperatorMapsAtomToResponse)
{
    const MimoConfig cfg{2, 3, 9};
    const auto probes = random_mimo_probing(cfg, 11);
    const MimoAtomOperator A(probes, cfg.shape());
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<Real> u(0.0, 1.0);
    for (int t = 0; t < 5; ++t) {
        const Real beta = u(rng), tau = u(rng), nu = u(rng);
        const CVector f = mimo_atom(beta, tau, nu, cfg.aperture(), cfg.L);
        EXPECT_LT(rel_err(A.apply(f), oracle::mimo_response(raw(probes), cfg.n_rx, beta, tau, nu)), 1e-10);
    }
    const CVector z = random_cvector(A.cols(), 13), y = random_cvector(A.rows(), 14);
    EXPECT_LT(std::abs(A.apply(z).dot(y) - z.dot(A.adjoint(y))), 1e-10 * z.norm() * y.norm());
}

TEST(SolveMimo, ZeroMeasurementGivesEmptySolution)
{
    const MimoConfig cfg{3, 3, 41};
    const auto probes = random_mimo_probing(cfg, 15);
    const Recovery rec = solve_l1_mimo(CVector::Zero(cfg.n_rx * cfg.L), probes, cfg, mimo_grid(cfg, 1));
    EXPECT_TRUE(rec.solution.estimates.empty());
}

TEST(SolveMimo, OnGridSceneRecoveredExactly)
{
    const MimoConfig cfg{3, 3, 41};
    const auto probes = random_mimo_probing(cfg, 16);
    // Delay levels 0, 14, 28 are 5/N apart; nodes sharing a level differ in Doppler.
    const std::vector<MimoScatterer> scene{{cis2pi(0.1), 1.0 / 9, 0.0, 0.0},
                                           {cis2pi(0.4), 4.0 / 9, 0.0, 20.0 / 41},
                                           {cis2pi(0.7), 7.0 / 9, 14.0 / 41, 5.0 / 41},
                                           {cis2pi(0.2), 2.0 / 9, 14.0 / 41, 25.0 / 41},
                                           {cis2pi(0.9), 5.0 / 9, 28.0 / 41, 10.0 / 41}};
    std::vector<Node> nodes;
    for (const auto& s : scene) nodes.push_back({s.beta, s.tau, s.nu});
    ASSERT_TRUE(check_separation_mimo(nodes, 3, 3, 41).satisfied);
    const CVector y = synthesize_mimo(probes, scene, cfg);
    const GridOperator op(probes, cfg.shape(), mimo_grid(cfg, 1));
    const L1Result r = solve_l1(op, y);
    std::vector<std::pair<Index, Complex>> truth;
    for (const auto& s : scene) {
        truth.push_back({op.flat_index({std::lround(s.beta * 9) % 9, std::lround(s.tau * 41) % 41, std::lround(s.nu * 41) % 41}), s.b});
    }
    const SupportCheck chk = check_support(op, y, r.coeffs, truth);
    EXPECT_TRUE(chk.exact);
    EXPECT_LT(chk.coeff_error, 1e-6);

    const Recovery rec = solve_l1_mimo(y, probes, cfg, mimo_grid(cfg, 1));
    std::vector<Estimate> est = rec.solution.estimates;
    EXPECT_LT(mimo_resolution_error(est, scene, cfg).mean, 1e-6);
}

TEST(SolveMimo, CoincidentAngleBeyondApertureIsRankDeficient)
{
    // With beta shared, every response is a fixed array pattern times a vector
    // in C^L, so S = min(L, N_T N_R) + 1 columns cannot be independent.
    const MimoConfig cfg{2, 2, 3};
    const auto probes = random_mimo_probing(cfg, 17);
    const Index S = std::min(cfg.L, cfg.aperture()) + 1;
    CMatrix F(cfg.n_rx * cfg.L, S);
    for (Index k = 0; k < S; ++k) {
        F.col(k) = synthesize_mimo(probes, {{Complex(1.0, 0.0), 0.25, 0.5, static_cast<Real>(k) / S}}, cfg);
    }
    Eigen::ColPivHouseholderQR<CMatrix> qr(F);
    qr.setThreshold(1e-10);
    EXPECT_LT(qr.rank(), S);
}

TEST(MimoError, Formula)
{
    const MimoConfig cfg{3, 3, 41};
    const std::vector<MimoScatterer> truth{{Complex(1.0, 0.0), 0.2, 0.3, 0.4}};
    std::vector<Estimate> est{{Complex(1.0, 0.0), 0.2, 0.3, 0.4, false}};
    EXPECT_NEAR(mimo_resolution_error(est, truth, cfg).mean, 0.0, 1e-12);
    est[0].beta = 0.2 + 1.0 / 9;
    EXPECT_NEAR(mimo_resolution_error(est, truth, cfg).mean, 1.0, 1e-12);
    est[0].beta = 0.2;
    est[0].tau = 0.3 + 1.0 / 41;
    est[0].nu = 0.4 - 1.0 / 41;
    EXPECT_NEAR(mimo_resolution_error(est, truth, cfg).mean, std::sqrt(2.0), 1e-12);
}
