#ifndef SRRADAR_IO_HPP
#define SRRADAR_IO_HPP

///
/// \file io.hpp
///
/// JSON and CSV forms of scenes, measurements, solver results, certificate
/// reports and sweep rows. Needs nlohmann/json (vendor/json.hpp).
///

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include <srradar/analysis.hpp>
#include <srradar/certify.hpp>
#include <srradar/core.hpp>
#include <srradar/experiment.hpp>
#include <srradar/extract.hpp>
#include <srradar/mimo.hpp>

namespace srradar
{

using json = nlohmann::json;

inline constexpr const char* version_string = "0.1.0";

/// Shortest round-trip text for a double.
inline std::string format_real(Real v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Scene file: SISO when n_t = n_r = 1 and no beta is present.
struct SceneFile
{
    Index L{0};
    std::uint64_t seed{0};
    ProbeKind probe_kind{ProbeKind::gaussian};
    bool mimo{false};
    Index n_tx{1};
    Index n_rx{1};
    std::vector<MimoScatterer> scatterers;

    Scene siso() const
    {
        Scene s;
        s.L = L;
        for (const auto& m : scatterers) s.scatterers.push_back({m.b, m.tau, m.nu});
        return s;
    }

    MimoConfig mimo_config() const { return {n_tx, n_rx, L}; }
};

inline json to_json(const SceneFile& f)
{
    json j;
    j["L"] = f.L;
    j["seed"] = f.seed;
    j["probe_kind"] = to_string(f.probe_kind);
    if (f.mimo) {
        j["n_t"] = f.n_tx;
        j["n_r"] = f.n_rx;
    }
    j["scatterers"] = json::array();
    for (const auto& s : f.scatterers) {
        json e{{"b_re", s.b.real()}, {"b_im", s.b.imag()}, {"tau", s.tau}, {"nu", s.nu}};
        if (f.mimo) e["beta"] = s.beta;
        j["scatterers"].push_back(e);
    }
    return j;
}

inline SceneFile scene_from_json(const json& j)
{
    SceneFile f;
    f.L = j.at("L").get<Index>();
    half_length(f.L);
    f.seed = j.value("seed", std::uint64_t{0});
    f.probe_kind = probe_kind_from_string(j.value("probe_kind", std::string("gaussian")));
    f.mimo = j.contains("n_t") || j.contains("n_r");
    f.n_tx = j.value("n_t", Index{1});
    f.n_rx = j.value("n_r", Index{1});
    if (f.n_tx < 1 || f.n_rx < 1) throw std::invalid_argument("n_t and n_r must be positive");
    for (const auto& e : j.at("scatterers")) {
        MimoScatterer s;
        s.b = {e.at("b_re").get<Real>(), e.at("b_im").get<Real>()};
        s.tau = e.at("tau").get<Real>();
        s.nu = e.at("nu").get<Real>();
        s.beta = e.value("beta", 0.0);
        if (e.contains("beta")) f.mimo = true;
        f.scatterers.push_back(s);
    }
    return f;
}

inline SceneFile scene_file(const Scene& s, std::uint64_t seed, ProbeKind kind = ProbeKind::gaussian)
{
    SceneFile f;
    f.L = s.L;
    f.seed = seed;
    f.probe_kind = kind;
    for (const auto& t : s.scatterers) f.scatterers.push_back({t.b, 0.0, t.tau, t.nu});
    return f;
}

inline SceneFile scene_file(const MimoScene& s, std::uint64_t seed, ProbeKind kind = ProbeKind::gaussian)
{
    SceneFile f;
    f.L = s.L;
    f.seed = seed;
    f.probe_kind = kind;
    f.mimo = true;
    f.n_tx = s.n_tx;
    f.n_rx = s.n_rx;
    f.scatterers = s.scatterers;
    return f;
}

///
/// Measurement CSV with columns p,re,im, p the logical sample index -N..N.
/// Stacked MIMO measurements add a leading receiver column r.
///
inline void write_measurement_csv(std::ostream& os, const CVector& y, Index L)
{
    const Index N = half_length(L);
    if (y.size() % L != 0) throw DimensionError("measurement length is not a multiple of L");
    const bool stacked = y.size() != L;
    os << (stacked ? "r,p,re,im\n" : "p,re,im\n");
    for (Index i = 0; i < y.size(); ++i) {
        if (stacked) os << i / L << ',';
        os << (i % L) - N << ',' << format_real(y(i).real()) << ',' << format_real(y(i).imag()) << '\n';
    }
}

/// Reads either layout back in storage order.
inline CVector read_measurement_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty measurement file");
    const bool stacked = line.rfind("r,", 0) == 0;
    std::vector<Complex> vals;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::vector<std::string> cells;
        for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
        if (cells.size() != (stacked ? 4u : 3u)) throw std::runtime_error("malformed measurement row: " + line);
        vals.emplace_back(std::stod(cells[cells.size() - 2]), std::stod(cells.back()));
    }
    CVector y(static_cast<Index>(vals.size()));
    for (Index i = 0; i < y.size(); ++i) y(i) = vals[static_cast<std::size_t>(i)];
    return y;
}

inline json to_json(const L1Result& r, const SparseSolution& sol, bool mimo,
                    std::optional<Real> resolution_error = std::nullopt)
{
    json j;
    j["status"] = to_string(r.status);
    j["iters"] = r.iters;
    j["residual"] = r.residual;
    j["estimates"] = json::array();
    for (const auto& e : sol.estimates) {
        json o{{"b_re", e.b.real()}, {"b_im", e.b.imag()}, {"tau", e.tau}, {"nu", e.nu}};
        if (mimo) o["beta"] = e.beta;
        if (e.rank_deficient) o["rank_deficient"] = true;
        j["estimates"].push_back(o);
    }
    j["resolution_error"] = resolution_error ? json(*resolution_error) : json(nullptr);
    return j;
}

inline json to_json(const CertificateReport& r)
{
    return json{{"interp_residual", r.interp_residual},
                {"grad_residual", r.grad_residual},
                {"max_offgrid_Q", r.max_offgrid_Q},
                {"min_singular_value", r.min_singular_value},
                {"pass", r.pass}};
}

///
/// Sweep CSV. The first line is a version comment; the rest depends only on
/// the sweep spec. Noiseless rows carry snr_db "inf".
///
inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, bool mimo)
{
    os << "# srradar " << version_string << '\n';
    os << "seed,srf,snr_db,resolution_error,iters,status";
    if (mimo) os << ",n_t,n_r,beta_error";
    os << '\n';
    for (const auto& r : rows) {
        os << r.seed << ',' << r.srf << ',' << (r.snr_db ? format_real(*r.snr_db) : std::string("inf")) << ','
           << format_real(r.resolution_error) << ',' << r.iters << ',' << to_string(r.status);
        if (mimo) os << ',' << r.n_tx << ',' << r.n_rx << ',' << format_real(r.beta_error);
        os << '\n';
    }
}

inline void write_condition_csv(std::ostream& os, const std::vector<ConditionRow>& rows)
{
    os << "s,eps,inv_kappa\n";
    for (const auto& r : rows) os << r.S << ',' << format_real(r.eps) << ',' << format_real(r.inv_kappa) << '\n';
}

inline json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return json::parse(in);
}

} // namespace srradar

#endif
