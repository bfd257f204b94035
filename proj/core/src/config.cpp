#include "cdarom/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "cdarom/error.hpp"

namespace cdarom {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& v, const std::string& key, int line) {
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (v.empty() || *end != '\0' || !std::isfinite(d))
        throw ConfigError("line " + std::to_string(line) + ": " + key + " expects a number, got '" + v + "'");
    return d;
}

int to_int(const std::string& v, const std::string& key, int line) {
    char* end = nullptr;
    const long i = std::strtol(v.c_str(), &end, 10);
    if (v.empty() || *end != '\0' || i < -(1L << 30) || i > (1L << 30))
        throw ConfigError("line " + std::to_string(line) + ": " + key + " expects an integer, got '" + v + "'");
    return static_cast<int>(i);
}

bool to_bool(const std::string& v, const std::string& key, int line) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("line " + std::to_string(line) + ": " + key + " expects true/false, got '" + v + "'");
}

template <class E>
E to_enum(const std::string& v, const std::string& key, int line, const std::map<std::string, E>& names) {
    const auto it = names.find(v);
    if (it != names.end()) return it->second;
    std::string allowed;
    for (const auto& [n, e] : names) allowed += (allowed.empty() ? "" : ", ") + n;
    throw ConfigError("line " + std::to_string(line) + ": " + key + " must be one of " + allowed + ", got '" + v + "'");
}

const std::map<std::string, MeshKind> mesh_kinds{
    {"channel", MeshKind::channel}, {"unit_square", MeshKind::unit_square}, {"file", MeshKind::file}};
const std::map<std::string, ProblemKind> problem_kinds{{"channel", ProblemKind::channel},
                                                       {"manufactured", ProblemKind::manufactured}};
const std::map<std::string, OutflowMode> outflow_modes{{"dirichlet", OutflowMode::dirichlet},
                                                       {"do_nothing", OutflowMode::do_nothing}};
const std::map<std::string, SolverKind> solver_kinds{{"direct", SolverKind::sparse_direct},
                                                     {"krylov", SolverKind::krylov}};

template <class E>
std::string enum_name(E e, const std::map<std::string, E>& names) {
    for (const auto& [n, v] : names)
        if (v == e) return n;
    return "?";
}

using Setter = std::function<void(PipelineConfig&, const std::string&, int)>;

std::map<std::string, Setter> setters() {
    std::map<std::string, Setter> s;
    auto num = [&](const std::string& k, auto member) {
        s[k] = [k, member](PipelineConfig& c, const std::string& v, int l) { member(c) = to_double(v, k, l); };
    };
    auto integer = [&](const std::string& k, auto member) {
        s[k] = [k, member](PipelineConfig& c, const std::string& v, int l) { member(c) = to_int(v, k, l); };
    };
    auto boolean = [&](const std::string& k, auto member) {
        s[k] = [k, member](PipelineConfig& c, const std::string& v, int l) { member(c) = to_bool(v, k, l); };
    };
    s["mesh.kind"] = [](PipelineConfig& c, const std::string& v, int l) {
        c.mesh.kind = to_enum(v, "mesh.kind", l, mesh_kinds);
    };
    num("mesh.target_h", [](PipelineConfig& c) -> double& { return c.mesh.target_h; });
    integer("mesh.circle_segments", [](PipelineConfig& c) -> int& { return c.mesh.circle_segments; });
    integer("mesh.divisions", [](PipelineConfig& c) -> int& { return c.mesh.divisions; });
    s["mesh.file"] = [](PipelineConfig& c, const std::string& v, int) { c.mesh.file = v; };

    s["physics.problem"] = [](PipelineConfig& c, const std::string& v, int l) {
        c.physics.problem = to_enum(v, "physics.problem", l, problem_kinds);
    };
    num("physics.nu", [](PipelineConfig& c) -> double& { return c.physics.nu; });
    num("physics.inflow_peak", [](PipelineConfig& c) -> double& { return c.physics.inflow_peak; });
    s["physics.outflow"] = [](PipelineConfig& c, const std::string& v, int l) {
        c.physics.outflow = to_enum(v, "physics.outflow", l, outflow_modes);
    };
    num("physics.ramp_time", [](PipelineConfig& c) -> double& { return c.physics.ramp_time; });

    num("time.t0", [](PipelineConfig& c) -> double& { return c.time.t0; });
    num("time.T", [](PipelineConfig& c) -> double& { return c.time.T; });
    num("time.dt", [](PipelineConfig& c) -> double& { return c.time.dt; });
    num("time.snapshot_start", [](PipelineConfig& c) -> double& { return c.time.snapshot_start; });
    num("time.snapshot_end", [](PipelineConfig& c) -> double& { return c.time.snapshot_end; });
    num("time.prediction_end", [](PipelineConfig& c) -> double& { return c.time.prediction_end; });
    integer("time.stride", [](PipelineConfig& c) -> int& { return c.time.stride; });

    integer("pod.r_u", [](PipelineConfig& c) -> int& { return c.pod.r_u; });
    integer("pod.r_p", [](PipelineConfig& c) -> int& { return c.pod.r_p; });
    num("pod.rank_tol", [](PipelineConfig& c) -> double& { return c.pod.rank_tol; });
    boolean("pod.center", [](PipelineConfig& c) -> bool& { return c.pod.center; });
    boolean("pod.dq", [](PipelineConfig& c) -> bool& { return c.pod.dq; });

    num("cda.gamma_u", [](PipelineConfig& c) -> double& { return c.cda.gamma_u; });
    num("cda.gamma_p", [](PipelineConfig& c) -> double& { return c.cda.gamma_p; });
    integer("cda.nx", [](PipelineConfig& c) -> int& { return c.cda.nx; });
    integer("cda.ny", [](PipelineConfig& c) -> int& { return c.cda.ny; });
    num("cda.H", [](PipelineConfig& c) -> double& { return c.cda.H; });
    s["cda.observations"] = [](PipelineConfig& c, const std::string& v, int) { c.cda.observations = v; };

    s["solver.kind"] = [](PipelineConfig& c, const std::string& v, int l) {
        c.solver.kind = to_enum(v, "solver.kind", l, solver_kinds);
    };
    num("solver.tolerance", [](PipelineConfig& c) -> double& { return c.solver.tolerance; });
    integer("solver.max_iterations", [](PipelineConfig& c) -> int& { return c.solver.max_iterations; });

    s["output.dir"] = [](PipelineConfig& c, const std::string& v, int) { c.output.dir = v; };
    boolean("output.write_observations", [](PipelineConfig& c) -> bool& { return c.output.write_observations; });
    return s;
}

bool divides(double length, double dt) {
    const double n = length / dt;
    return std::abs(n - std::round(n)) <= 1e-6 * std::max(1.0, n);
}

}  // namespace

PipelineConfig parse_config(std::string_view text) {
    static const auto table = setters();
    PipelineConfig c;
    std::string section;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (body.empty()) continue;
        if (body.front() == '[') {
            if (body.back() != ']') throw ConfigError("line " + std::to_string(line) + ": unterminated section header");
            section = trim(body.substr(1, body.size() - 2));
            static const char* known[] = {"mesh", "physics", "time", "pod", "cda", "solver", "output"};
            if (std::find(std::begin(known), std::end(known), section) == std::end(known))
                throw ConfigError("line " + std::to_string(line) + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line) + ": expected key = value");
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        if (section.empty()) throw ConfigError("line " + std::to_string(line) + ": key '" + key + "' outside a section");
        const auto it = table.find(section + "." + key);
        if (it == table.end())
            throw ConfigError("line " + std::to_string(line) + ": unknown key '" + key + "' in [" + section + "]");
        it->second(c, value, line);
    }
    validate(c);
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void validate(const PipelineConfig& c) {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (c.mesh.kind == MeshKind::channel) {
        if (!(c.mesh.target_h > 0.0) || c.mesh.target_h > 0.2) fail("mesh.target_h must lie in (0, 0.2]");
        if (c.mesh.circle_segments < 8) fail("mesh.circle_segments must be at least 8");
    }
    if (c.mesh.kind == MeshKind::unit_square && c.mesh.divisions < 1) fail("mesh.divisions must be positive");
    if (c.mesh.kind == MeshKind::file && c.mesh.file.empty()) fail("mesh.kind = file needs mesh.file");
    if (c.physics.problem == ProblemKind::manufactured && c.mesh.kind == MeshKind::channel)
        fail("the manufactured problem runs on the unit square (mesh.kind = unit_square)");
    if (c.physics.problem == ProblemKind::channel && c.mesh.kind == MeshKind::unit_square)
        fail("the channel problem needs a channel mesh");
    if (!(c.physics.nu > 0.0)) fail("physics.nu must be positive");
    if (!(c.physics.inflow_peak > 0.0)) fail("physics.inflow_peak must be positive");
    if (c.physics.ramp_time < 0.0) fail("physics.ramp_time must be nonnegative");

    const auto& t = c.time;
    if (!(t.dt > 0.0)) fail("time.dt must be positive");
    if (!(t.T > t.t0)) fail("time.T must exceed time.t0");
    if (!(t.t0 <= t.snapshot_start && t.snapshot_start < t.snapshot_end && t.snapshot_end < t.prediction_end &&
          t.prediction_end <= t.T + 1e-12))
        fail("time windows must satisfy t0 <= snapshot_start < snapshot_end < prediction_end <= T");
    if (t.snapshot_start - t.dt < t.t0 - 1e-12)
        fail("time.snapshot_start must be at least one step after time.t0");
    for (double len : {t.T - t.t0, t.snapshot_start - t.t0, t.snapshot_end - t.snapshot_start,
                       t.prediction_end - t.snapshot_end})
        if (!divides(len, t.dt)) fail("time.dt must divide every window length");
    if (t.stride != 1) fail("time.stride must be 1: the reduced model reads the truth at every step");

    if (c.pod.r_u < 0 || c.pod.r_p < 0) fail("pod.r_u and pod.r_p must be nonnegative");
    if (!(c.pod.rank_tol > 0.0 && c.pod.rank_tol < 1.0)) fail("pod.rank_tol must lie in (0, 1)");
    if (c.cda.gamma_u < 0.0 || c.cda.gamma_p < 0.0) fail("cda gains must be nonnegative");
    if (c.cda.nx < 1 || c.cda.ny < 1) fail("cda.nx and cda.ny must be positive");
    if (c.cda.H < 0.0) fail("cda.H must be nonnegative");
    if (!(c.solver.tolerance > 0.0)) fail("solver.tolerance must be positive");
    if (c.solver.max_iterations < 1) fail("solver.max_iterations must be positive");
    if (c.output.dir.empty()) fail("output.dir must not be empty");
}

std::string format_config(const PipelineConfig& c) {
    std::ostringstream o;
    o.precision(17);
    o << "[mesh]\nkind = " << enum_name(c.mesh.kind, mesh_kinds) << "\ntarget_h = " << c.mesh.target_h
      << "\ncircle_segments = " << c.mesh.circle_segments << "\ndivisions = " << c.mesh.divisions;
    if (!c.mesh.file.empty()) o << "\nfile = " << c.mesh.file;
    o << "\n\n[physics]\nproblem = " << enum_name(c.physics.problem, problem_kinds) << "\nnu = " << c.physics.nu
      << "\ninflow_peak = " << c.physics.inflow_peak << "\noutflow = " << enum_name(c.physics.outflow, outflow_modes)
      << "\nramp_time = " << c.physics.ramp_time;
    o << "\n\n[time]\nt0 = " << c.time.t0 << "\nT = " << c.time.T << "\ndt = " << c.time.dt
      << "\nsnapshot_start = " << c.time.snapshot_start << "\nsnapshot_end = " << c.time.snapshot_end
      << "\nprediction_end = " << c.time.prediction_end << "\nstride = " << c.time.stride;
    o << "\n\n[pod]\nr_u = " << c.pod.r_u << "\nr_p = " << c.pod.r_p << "\nrank_tol = " << c.pod.rank_tol
      << "\ncenter = " << (c.pod.center ? "true" : "false") << "\ndq = " << (c.pod.dq ? "true" : "false");
    o << "\n\n[cda]\ngamma_u = " << c.cda.gamma_u << "\ngamma_p = " << c.cda.gamma_p << "\nnx = " << c.cda.nx
      << "\nny = " << c.cda.ny << "\nH = " << c.cda.H;
    if (!c.cda.observations.empty()) o << "\nobservations = " << c.cda.observations;
    o << "\n\n[solver]\nkind = " << enum_name(c.solver.kind, solver_kinds) << "\ntolerance = " << c.solver.tolerance
      << "\nmax_iterations = " << c.solver.max_iterations;
    o << "\n\n[output]\ndir = " << c.output.dir
      << "\nwrite_observations = " << (c.output.write_observations ? "true" : "false") << "\n";
    return o.str();
}

std::uint64_t config_hash(const PipelineConfig& c) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : format_config(c)) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace cdarom
