// srradar: scenes, solves, sweeps and certificate checks from the command line.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <srradar/analysis.hpp>
#include <srradar/certify.hpp>
#include <srradar/experiment.hpp>
#include <srradar/io.hpp>
#include <srradar/mimo.hpp>

using namespace srradar;

namespace
{

struct UsageError : std::invalid_argument
{
    using std::invalid_argument::invalid_argument;
};

struct Options
{
    std::string mode{"siso"};
    Index L{201};
    Index nt{3};
    Index nr{3};
    Index S{10};
    std::vector<Index> srf{1, 2, 4, 8};
    std::vector<std::string> snr_db;
    Index trials{20};
    std::uint64_t seed{1};
    std::string out;
    std::optional<Real> delta;
    int max_iters{30000};
    Real tol{1e-7};

    std::string separation{"enforce"};
    std::string probe{"gaussian"};
    std::optional<Real> box;
    std::string scene;
    std::string measurement;
    unsigned threads{1};
    std::string kernel{"flat"};
    Index grid_size{512};
    Index eps_count{50};
    Real eps_max{0.98};
    std::vector<Index> s_list{2, 4, 8, 16, 32};
    bool lattice{false};
};

void emit(const Options& o, const std::string& text)
{
    if (o.out.empty() || o.out == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(o.out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + o.out);
    f << text;
}

bool is_mimo(const Options& o)
{
    if (o.mode == "siso") return false;
    if (o.mode == "mimo") return true;
    throw UsageError("--mode must be siso or mimo");
}

SeparationPolicy separation_of(const Options& o)
{
    if (o.separation == "enforce") return SeparationPolicy::enforce;
    if (o.separation == "free") return SeparationPolicy::free;
    throw UsageError("--separation must be enforce or free");
}

std::optional<Real> parse_snr(const std::string& s)
{
    if (s == "inf" || s == "none") return std::nullopt;
    std::size_t pos = 0;
    const Real v = std::stod(s, &pos);
    if (pos != s.size()) throw UsageError("bad --snr-db value '" + s + "'");
    return v;
}

SceneSpec scene_spec_of(const Options& o)
{
    SceneSpec s;
    s.L = o.L;
    s.S = o.S;
    s.separation = separation_of(o);
    if (o.box) s.tau_max = s.nu_max = *o.box;
    if (is_mimo(o)) {
        s.n_tx = o.nt;
        s.n_rx = o.nr;
    }
    return s;
}

SolverConfig solver_of(const Options& o)
{
    SolverConfig c;
    c.max_iters = o.max_iters;
    c.tol = o.tol;
    if (o.delta) c.delta = *o.delta;
    c.validate();
    return c;
}

std::optional<Region> region_of(const Options& o)
{
    if (!o.box || *o.box >= 1.0) return std::nullopt;
    return Region{*o.box, *o.box};
}

int cmd_gen_scene(const Options& o)
{
    const ProbeKind kind = probe_kind_from_string(o.probe);
    SceneFile file;
    if (is_mimo(o)) {
        SceneSpec spec = scene_spec_of(o);
        MimoConfig{o.nt, o.nr, o.L}.validate();
        file = scene_file(generate_mimo_scene(spec, o.seed), o.seed, kind);
    } else {
        file = scene_file(generate_scene(scene_spec_of(o), o.seed), o.seed, kind);
    }
    emit(o, to_json(file).dump(2) + "\n");
    return 0;
}

struct Pipeline
{
    SceneFile file;
    CVector y;
    Recovery rec;
    Real error{0.0};
};

/// Synthesize, add noise, solve, extract, score.
Pipeline run_pipeline(const SceneFile& file, const Options& o, std::optional<Real> snr)
{
    Pipeline p;
    p.file = file;
    const ProbeKind kind = file.probe_kind;
    SolverConfig cfg = solver_of(o);
    const Index srf = o.srf.empty() ? 1 : o.srf.front();
    if (srf < 1) throw UsageError("--srf must be positive");
    ExtractConfig ex;

    if (!file.mimo) {
        const Scene scene = file.siso();
        const ProbingSignal x = random_probing(file.L, derive_seed(file.seed, 0, Stream::probe), kind);
        const CVector clean = synthesize(x, scene).y;
        CVector noise = CVector::Zero(clean.size());
        if (snr) noise = noise_at_snr(clean, *snr, derive_seed(file.seed, 0, Stream::noise));
        p.y = clean + noise;
        if (snr && !o.delta) cfg.delta = noise.squaredNorm();
        const GridOperator op(x, FineGrid::from_srf(file.L, srf, region_of(o)));
        p.rec = recover(op, p.y, cfg, ex);
        p.error = resolution_error(p.rec.solution.estimates, scene.scatterers, file.L).mean;
        return p;
    }

    const MimoConfig mc = file.mimo_config();
    const auto probes = random_mimo_probing(mc, derive_seed(file.seed, 0, Stream::probe), kind);
    const CVector clean = synthesize_mimo(probes, file.scatterers, mc);
    CVector noise = CVector::Zero(clean.size());
    if (snr) noise = noise_at_snr(clean, *snr, derive_seed(file.seed, 0, Stream::noise));
    p.y = clean + noise;
    if (snr && !o.delta) cfg.delta = noise.squaredNorm();
    p.rec = solve_l1_mimo(p.y, probes, mc, mimo_grid(mc, srf, region_of(o)), cfg, ex);
    p.error = mimo_resolution_error(p.rec.solution.estimates, file.scatterers, mc).mean;
    return p;
}

std::optional<Real> single_snr(const Options& o)
{
    if (o.snr_db.size() > 1) throw UsageError("this command takes a single --snr-db value");
    return o.snr_db.empty() ? std::nullopt : parse_snr(o.snr_db.front());
}

void write_measurement(const Options& o, const CVector& y, Index L)
{
    if (o.measurement.empty()) return;
    std::ofstream f(o.measurement, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + o.measurement);
    write_measurement_csv(f, y, L);
}

int cmd_solve(const Options& o)
{
    if (o.scene.empty()) throw UsageError("solve needs --scene");
    if (o.srf.size() > 1) throw UsageError("solve takes a single --srf value");
    const SceneFile file = scene_from_json(read_json_file(o.scene));
    const Pipeline p = run_pipeline(file, o, single_snr(o));
    write_measurement(o, p.y, file.L);
    emit(o, to_json(p.rec.solve, p.rec.solution, file.mimo, p.error).dump(2) + "\n");
    return p.rec.solve.status == SolveStatus::converged ? 0 : 3;
}

int cmd_mimo_sim(const Options& o)
{
    if (o.srf.size() > 1) throw UsageError("mimo-sim takes a single --srf value");
    SceneFile file;
    if (!o.scene.empty()) {
        file = scene_from_json(read_json_file(o.scene));
        if (!file.mimo) throw UsageError("scene file is not a MIMO scene");
    } else {
        Options m = o;
        m.mode = "mimo";
        MimoConfig{o.nt, o.nr, o.L}.validate();
        file = scene_file(generate_mimo_scene(scene_spec_of(m), o.seed), o.seed, probe_kind_from_string(o.probe));
    }
    const Pipeline p = run_pipeline(file, o, single_snr(o));
    write_measurement(o, p.y, file.L);
    json j;
    j["scene"] = to_json(file);
    j["result"] = to_json(p.rec.solve, p.rec.solution, true, p.error);
    emit(o, j.dump(2) + "\n");
    return p.rec.solve.status == SolveStatus::converged ? 0 : 3;
}

int cmd_sweep(const Options& o)
{
    if (o.trials < 1) throw UsageError("--trials must be at least 1");
    SweepSpec s;
    s.mimo = is_mimo(o);
    s.L = o.L;
    s.n_tx = o.nt;
    s.n_rx = o.nr;
    s.S = o.S;
    s.srf_list = o.srf;
    s.snr_db_list.clear();
    for (const auto& v : o.snr_db) s.snr_db_list.push_back(parse_snr(v));
    if (s.snr_db_list.empty()) s.snr_db_list.push_back(std::nullopt);
    s.trials = o.trials;
    s.seed = o.seed;
    s.separation = separation_of(o);
    if (o.box) s.tau_max = s.nu_max = *o.box;
    s.solver = solver_of(o);
    s.delta = o.delta;
    s.threads = o.threads;
    const auto rows = run_sweep(s);
    std::ostringstream os;
    write_sweep_csv(os, rows, s.mimo);
    emit(o, os.str());
    return 0;
}

int cmd_certify(const Options& o)
{
    SceneSpec spec;
    spec.L = o.L;
    spec.S = o.S;
    spec.tau_max = spec.nu_max = o.box.value_or(1.0);
    spec.gains = GainModel::unit_circle;
    spec.separation = separation_of(o);
    if (o.lattice) spec.lattice_delay = spec.lattice_doppler = o.L;
    const Scene scene = generate_scene(spec, o.seed);
    const ProbingSignal x = random_probing(o.L, derive_seed(o.seed, 0, Stream::probe), probe_kind_from_string(o.probe));
    std::vector<Node> nodes;
    std::vector<Complex> signs;
    for (const auto& s : scene.scatterers) {
        nodes.push_back({0.0, s.tau, s.nu});
        signs.push_back(s.b / std::abs(s.b));
    }
    std::optional<FejerKernel> kernel;
    if (o.kernel == "flat") {
        kernel = flat_kernel(half_length(o.L));
    } else if (o.kernel != "fejer") {
        throw UsageError("--kernel must be fejer or flat");
    }
    const auto cert = build_certificate(x, nodes, signs, kernel);
    VerifyConfig vc;
    vc.grid_size = o.grid_size;
    const CertificateReport rep = verify_certificate(cert, vc);
    json j = to_json(rep);
    j["built"] = rep.built;
    j["condition_number"] = rep.condition_number;
    j["kernel"] = o.kernel;
    j["nodes"] = json::array();
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        j["nodes"].push_back({{"tau", nodes[k].tau}, {"nu", nodes[k].nu},
                              {"sign_re", signs[k].real()}, {"sign_im", signs[k].imag()}});
    }
    emit(o, j.dump(2) + "\n");
    return rep.pass ? 0 : 4;
}

int cmd_condnum(const Options& o)
{
    if (o.eps_count < 1) throw UsageError("--eps-count must be at least 1");
    std::ostringstream os;
    write_condition_csv(os, condition_sweep(o.L, o.s_list, eps_grid(o.eps_count, o.eps_max)));
    emit(o, os.str());
    return 0;
}

void error_json(const std::string& cmd, const std::string& kind, const std::string& msg)
{
    json j{{"error", kind}, {"message", msg}};
    if (!cmd.empty()) j["command"] = cmd;
    std::cerr << j.dump() << '\n';
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Super-resolution radar: delay-Doppler (and angle) recovery by l1 minimization"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* c) {
        c->add_option("--out", o.out, "output file (default stdout)");
        c->add_option("--seed", o.seed, "master seed");
    };
    auto scene_flags = [&](CLI::App* c) {
        c->add_option("--mode", o.mode, "siso or mimo")->check(CLI::IsMember({"siso", "mimo"}));
        c->add_option("--L", o.L, "samples per probe (odd)");
        c->add_option("--nt", o.nt, "transmit antennas")->check(CLI::PositiveNumber);
        c->add_option("--nr", o.nr, "receive antennas")->check(CLI::PositiveNumber);
        c->add_option("--S", o.S, "number of scatterers")->check(CLI::NonNegativeNumber);
        c->add_option("--separation", o.separation, "enforce or free")->check(CLI::IsMember({"enforce", "free"}));
        c->add_option("--box", o.box, "sampling box side for (tau, nu); default 2/sqrt(L)");
        c->add_option("--probe", o.probe, "gaussian, signs or complex_gaussian");
    };
    auto solver_flags = [&](CLI::App* c) {
        c->add_option("--delta", o.delta, "noise ball ||y - Rb||^2 <= delta (0: equality)")->check(CLI::NonNegativeNumber);
        c->add_option("--max-iters", o.max_iters, "iteration budget")->check(CLI::PositiveNumber);
        c->add_option("--tol", o.tol, "relative tolerance")->check(CLI::PositiveNumber);
    };

    auto* gen = app.add_subcommand("gen-scene", "draw a random scene");
    common(gen);
    scene_flags(gen);

    auto* solve = app.add_subcommand("solve", "synthesize, solve and score one scene");
    common(solve);
    solver_flags(solve);
    solve->add_option("--scene", o.scene, "scene JSON")->required()->check(CLI::ExistingFile);
    solve->add_option("--srf", o.srf, "super-resolution factor");
    solve->add_option("--snr-db", o.snr_db, "SNR in dB (omit for noiseless)");
    solve->add_option("--box", o.box, "restrict the grid to [0, box)^2 in (tau, nu)");
    solve->add_option("--measurement", o.measurement, "also write the measurement CSV here");

    auto* sweep = app.add_subcommand("sweep-srf", "resolution error versus super-resolution factor");
    common(sweep);
    scene_flags(sweep);
    solver_flags(sweep);
    sweep->add_option("--srf", o.srf, "super-resolution factors")->delimiter(',');
    sweep->add_option("--snr-db", o.snr_db, "SNR values in dB, 'inf' for noiseless")->delimiter(',');
    sweep->add_option("--trials", o.trials, "trials per (srf, snr)");
    sweep->add_option("--threads", o.threads, "worker threads");

    auto* cert = app.add_subcommand("certify", "build and verify a dual certificate");
    common(cert);
    cert->add_option("--L", o.L, "samples per probe (odd)");
    cert->add_option("--S", o.S, "number of nodes")->check(CLI::NonNegativeNumber);
    cert->add_option("--kernel", o.kernel, "fejer or flat")->check(CLI::IsMember({"fejer", "flat"}));
    cert->add_option("--grid-size", o.grid_size, "evaluation grid per axis")->check(CLI::PositiveNumber);
    cert->add_option("--box", o.box, "node sampling box side (default 1)");
    cert->add_option("--separation", o.separation, "enforce or free")->check(CLI::IsMember({"enforce", "free"}));
    cert->add_option("--probe", o.probe, "gaussian, signs or complex_gaussian");
    cert->add_flag("--on-grid", o.lattice, "nodes on the 1/L lattice");

    auto* cond = app.add_subcommand("condnum", "inverse condition number of the Vandermonde study");
    common(cond);
    cond->add_option("--L", o.L, "rows");
    cond->add_option("--S", o.s_list, "S values")->delimiter(',');
    cond->add_option("--eps-count", o.eps_count, "number of eps values");
    cond->add_option("--eps-max", o.eps_max, "largest eps")->check(CLI::Range(0.0, 0.999999));

    auto* mimo = app.add_subcommand("mimo-sim", "MIMO scene, measurement and recovery");
    common(mimo);
    scene_flags(mimo);
    solver_flags(mimo);
    mimo->add_option("--scene", o.scene, "MIMO scene JSON (default: draw one)")->check(CLI::ExistingFile);
    mimo->add_option("--srf", o.srf, "super-resolution factor");
    mimo->add_option("--snr-db", o.snr_db, "SNR in dB (omit for noiseless)");
    mimo->add_option("--measurement", o.measurement, "also write the measurement CSV here");

    std::string cmd;
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        error_json(cmd, "usage", e.what());
        return 2;
    }

    try {
        if (*gen) {
            cmd = "gen-scene";
            return cmd_gen_scene(o);
        }
        if (*solve) {
            cmd = "solve";
            if (solve->count("--srf") == 0) o.srf = {1};
            return cmd_solve(o);
        }
        if (*sweep) {
            cmd = "sweep-srf";
            return cmd_sweep(o);
        }
        if (*cert) {
            cmd = "certify";
            if (cert->count("--L") == 0) o.L = 31;
            if (cert->count("--S") == 0) o.S = 2;
            return cmd_certify(o);
        }
        if (*cond) {
            cmd = "condnum";
            if (cond->count("--L") == 0) o.L = 200;
            return cmd_condnum(o);
        }
        if (*mimo) {
            cmd = "mimo-sim";
            if (mimo->count("--L") == 0) o.L = 41;
            if (mimo->count("--S") == 0) o.S = 5;
            if (mimo->count("--srf") == 0) o.srf = {1};
            if (mimo->count("--box") == 0) o.box = 1.0;
            return cmd_mimo_sim(o);
        }
    } catch (const UsageError& e) {
        error_json(cmd, "usage", e.what());
        return 2;
    } catch (const SceneGenerationError& e) {
        error_json(cmd, "scene_generation", e.what());
        return 1;
    } catch (const std::exception& e) {
        error_json(cmd, "runtime", e.what());
        return 1;
    }
    return 0;
}
