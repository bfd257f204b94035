#include "cdarom/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unistd.h>

#include "cdarom/cda.hpp"
#include "cdarom/error.hpp"
#include "cdarom/pod.hpp"
#include "cdarom/quantities.hpp"
#include "cdarom/rom.hpp"
#include "cdarom/version.hpp"

namespace cdarom {

namespace fs = std::filesystem;

namespace {

constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

std::ostream& log_stream(const CommandOptions& opt) {
    static std::ostream null_stream(nullptr);
    return opt.log ? *opt.log : null_stream;
}

std::string hex(std::uint64_t v) {
    std::ostringstream o;
    o << std::hex << std::setw(16) << std::setfill('0') << v;
    return o.str();
}

/// Appends one provenance line per written artifact to manifest.txt.
void record_manifest(const fs::path& dir, const std::string& command, const PipelineConfig& cfg,
                     const std::vector<fs::path>& files) {
    std::ofstream f(dir / "manifest.txt", std::ios::app);
    if (!f) throw Error("cannot write '" + (dir / "manifest.txt").string() + "'");
    for (const auto& p : files)
        f << fs::relative(p, dir).generic_string() << " command=" << command << " config=" << hex(config_hash(cfg))
          << " version=" << version_string << '\n';
}

double mean_velocity(const PipelineConfig& cfg) { return 2.0 / 3.0 * cfg.physics.inflow_peak; }

std::unique_ptr<BenchmarkFunctionals> make_functionals(const PipelineConfig& cfg, const FlowProblem& pr) {
    if (cfg.physics.problem != ProblemKind::channel) return nullptr;
    BenchmarkFunctionals::Options o;
    o.mean_velocity = mean_velocity(cfg);
    return std::make_unique<BenchmarkFunctionals>(pr.velocity, pr.pressure, pr.nu, o);
}

CoarseOverlay make_overlay(const PipelineConfig& cfg, const Mesh& mesh) {
    return cfg.cda.H > 0.0 ? build_coarse_overlay(mesh, cfg.cda.H) : build_coarse_overlay(mesh, cfg.cda.nx, cfg.cda.ny);
}

std::vector<double> time_grid(double t0, double t1, double dt) {
    const long n = step_count(t0, t1, dt);
    std::vector<double> t(static_cast<std::size_t>(n + 1));
    for (long i = 0; i <= n; ++i) t[static_cast<std::size_t>(i)] = t0 + static_cast<double>(i) * dt;
    return t;
}

double mean_of(const std::vector<double>& v) {
    return v.empty() ? nan_value : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Loaded artifacts of a finished fom/pod pair.
struct Workspace {
    std::shared_ptr<const Mesh> mesh;
    FlowProblem problem;
    std::unique_ptr<FomSolver> fom;
};

Workspace open_workspace(const PipelineConfig& cfg, const fs::path& dir) {
    const fs::path mesh_path = dir / "mesh.txt";
    if (!fs::exists(mesh_path)) throw ConfigError("'" + mesh_path.string() + "' not found; run `fom` first");
    Workspace w;
    w.mesh = std::make_shared<const Mesh>(load_mesh(mesh_path));
    w.problem = build_problem(cfg, w.mesh);
    w.fom = std::make_unique<FomSolver>(w.problem, cfg.time.dt, cfg.solver);
    return w;
}

}  // namespace

fs::path output_directory(const PipelineConfig& cfg, const CommandOptions& opt) {
    return opt.out.empty() ? fs::path(cfg.output.dir) : opt.out;
}

Mesh build_mesh(const PipelineConfig& cfg) {
    switch (cfg.mesh.kind) {
        case MeshKind::channel: return generate_channel_mesh(cfg.mesh.target_h, cfg.mesh.circle_segments);
        case MeshKind::unit_square:
            return generate_rectangle_mesh(0.0, 1.0, 0.0, 1.0, cfg.mesh.divisions, cfg.mesh.divisions);
        case MeshKind::file: return load_mesh(cfg.mesh.file);
    }
    throw ConfigError("unknown mesh kind");
}

FlowProblem build_problem(const PipelineConfig& cfg, std::shared_ptr<const Mesh> mesh) {
    if (cfg.physics.problem == ProblemKind::channel) {
        ChannelOptions o;
        o.outflow = cfg.physics.outflow;
        o.ramp_time = cfg.physics.ramp_time;
        o.inflow_peak = cfg.physics.inflow_peak;
        return make_channel_problem(std::move(mesh), cfg.physics.nu, o);
    }
    const ExactSolution e = stationary_vortex_solution(cfg.physics.nu);
    return make_enclosed_problem(std::move(mesh), cfg.physics.nu, e.u, e.forcing);
}

// ---------------------------------------------------------------------------

FomSummary cmd_fom(const PipelineConfig& cfg, const CommandOptions& opt) {
    validate(cfg);
    auto& log = log_stream(opt);
    const fs::path dir = output_directory(cfg, opt);
    fs::create_directories(dir);

    auto mesh = std::make_shared<const Mesh>(build_mesh(cfg));
    const FlowProblem problem = build_problem(cfg, mesh);
    FomSolver solver(problem, cfg.time.dt, cfg.solver);
    const auto functionals = make_functionals(cfg, problem);
    log << "fom: " << mesh->num_vertices() << " vertices, " << problem.velocity->dof_count() << " velocity dofs, "
        << problem.pressure->dof_count() << " pressure dofs, h = " << mesh->h() << '\n';

    FOMState initial;
    if (cfg.physics.problem == ProblemKind::channel) {
        initial = solver.rest_state(cfg.time.t0);
    } else {
        const ExactSolution e = stationary_vortex_solution(cfg.physics.nu);
        const double t0 = cfg.time.t0;
        initial = solver.interpolated_state(e.u, [&](const Point& q) { return e.p(q, t0); }, t0);
    }

    FomRunConfig run;
    run.t0 = cfg.time.t0;
    run.T = cfg.time.T;
    run.dt = cfg.time.dt;
    run.record_start = cfg.time.snapshot_start;
    run.record_end = cfg.time.prediction_end;
    run.stride = cfg.time.stride;
    run.solver = cfg.solver;
    FomRunResult res = run_fom(solver, initial, run, functionals.get());
    res.snapshots.meta.config_hash = config_hash(cfg);
    res.snapshots.meta.version = version_string;

    FomSummary out;
    out.steps = step_count(cfg.time.t0, cfg.time.T, cfg.time.dt);
    out.snapshots = res.snapshots.size();
    out.files = {dir / "mesh.txt", dir / "snapshots.bin", dir / "fom_quantities.csv"};
    save_mesh(*mesh, out.files[0]);
    save_snapshots(res.snapshots, out.files[1]);
    write_quantities_csv(res.quantities, out.files[2]);
    record_manifest(dir, "fom", cfg, out.files);
    log << "fom: " << out.steps << " steps, " << out.snapshots << " snapshots on [" << cfg.time.snapshot_start << ", "
        << cfg.time.prediction_end << "]\n";
    return out;
}

// ---------------------------------------------------------------------------

PodSummary cmd_pod(const PipelineConfig& cfg, const CommandOptions& opt) {
    validate(cfg);
    auto& log = log_stream(opt);
    const fs::path dir = output_directory(cfg, opt);
    const Workspace w = open_workspace(cfg, dir);
    const fs::path snap_path = dir / "snapshots.bin";
    if (!fs::exists(snap_path)) throw ConfigError("'" + snap_path.string() + "' not found; run `fom` first");
    const SnapshotSet all = load_snapshots(snap_path);
    if (all.meta.mesh_hash != w.mesh->hash()) throw ParameterError("snapshots were computed on a different mesh");

    SnapshotSet s = all.slice(cfg.time.snapshot_start, cfg.time.snapshot_end);
    if (s.size() < 2) throw ConfigError("fewer than two snapshots on the snapshot window");
    const std::size_t plain = s.size();
    if (cfg.pod.dq) s = augment_dq(s, cfg.time.dt);

    FieldMatrices fm{&w.fom->velocity_mass(), &w.fom->pressure_mass(), &w.fom->velocity_stiffness(),
                     &w.fom->pressure_stiffness()};
    PODOptions po;
    po.r_u = cfg.pod.r_u;
    po.r_p = cfg.pod.r_p;
    po.rank_tol = cfg.pod.rank_tol;
    po.center = cfg.pod.center;
    PODBasis basis = build_pod_basis(s, fm, po);
    basis.mesh_hash = w.mesh->hash();
    basis.config_hash = config_hash(cfg);
    basis.version = version_string;

    PodSummary out;
    out.columns = s.size();
    out.d_u = basis.d_u;
    out.d_p = basis.d_p;
    out.energy_u = captured_energy(basis.lambda, basis.r_u());
    out.energy_p = captured_energy(basis.theta, basis.r_p());
    out.diagnostic = basis.r_u() < basis.d_u ? stability_diagnostic(w.mesh->h(), basis.lambda, basis.r_u()) : nan_value;
    out.files = {dir / "pod_basis.bin", dir / "eigenvalues.csv"};
    save_pod_basis(basis, out.files[0]);
    write_eigenvalue_csv(basis, out.files[1]);
    record_manifest(dir, "pod", cfg, out.files);

    log << "pod: " << plain << " snapshots";
    if (cfg.pod.dq) log << " + " << s.size() - plain << " difference quotients";
    log << ", rank d_u = " << out.d_u << ", d_p = " << out.d_p << '\n'
        << std::fixed << std::setprecision(6) << "pod: captured energy " << 100.0 * out.energy_u << "% (r_u = "
        << basis.r_u() << "), " << 100.0 * out.energy_p << "% (r_p = " << basis.r_p() << ")\n"
        << std::defaultfloat << "pod: h^-1 sqrt(lambda_{r_u+1}) = " << out.diagnostic << '\n';
    return out;
}

// ---------------------------------------------------------------------------

std::vector<std::pair<int, double>> sweep_points() { return {{8, 0.0}, {8, 100.0}, {19, 0.0}, {19, 100.0}}; }

std::vector<RomRunSummary> cmd_rom(const PipelineConfig& cfg, const CommandOptions& opt) {
    validate(cfg);
    auto& log = log_stream(opt);
    const fs::path dir = output_directory(cfg, opt);
    const Workspace w = open_workspace(cfg, dir);
    const fs::path basis_path = dir / "pod_basis.bin";
    if (!fs::exists(basis_path)) throw ConfigError("'" + basis_path.string() + "' not found; run `pod` first");
    const PODBasis basis = load_pod_basis(basis_path);
    if (basis.mesh_hash != w.mesh->hash()) throw ParameterError("POD basis was computed on a different mesh");

    struct SweepPoint {
        int r;
        double gu, gp;
        std::string name;
        fs::path dir;
    };
    std::vector<SweepPoint> points;
    if (opt.sweep) {
        for (auto [r, g] : sweep_points()) {
            std::ostringstream name;
            name << "r" << r << "_g" << g;
            points.push_back({r, g, g, name.str(), dir / name.str()});
        }
    } else {
        points.push_back({-1, cfg.cda.gamma_u, cfg.cda.gamma_p, "rom", dir});
    }
    const int need_u = opt.sweep ? 19 : cfg.pod.r_u;
    const int need_p = opt.sweep ? 19 : cfg.pod.r_p;
    if (basis.r_u() < need_u || basis.r_p() < need_p)
        throw ConfigError("the stored basis holds " + std::to_string(basis.r_u()) + "/" + std::to_string(basis.r_p()) +
                          " modes but " + std::to_string(need_u) + "/" + std::to_string(need_p) +
                          " are requested; rerun `pod` with larger pod.r_u/pod.r_p");

    const bool any_nudging = std::any_of(points.begin(), points.end(), [](const SweepPoint& p) { return p.gu > 0 || p.gp > 0; });
    const fs::path truth_path = dir / "snapshots.bin";
    std::unique_ptr<SnapshotSet> truth;
    if (fs::exists(truth_path)) {
        truth = std::make_unique<SnapshotSet>(load_snapshots(truth_path));
        if (truth->meta.mesh_hash != w.mesh->hash()) throw ParameterError("truth was computed on a different mesh");
    }
    if (!truth && any_nudging && cfg.cda.observations.empty())
        throw ConfigError("positive nudging gains need observations: no truth trajectory at '" + truth_path.string() +
                          "' and no cda.observations file");
    if (!truth) throw ConfigError("the initial condition needs the truth trajectory '" + truth_path.string() + "'");

    const double t0 = cfg.time.snapshot_end, t1 = cfg.time.prediction_end, dt = cfg.time.dt;
    const CoarseOverlay overlay = make_overlay(cfg, *w.mesh);
    const ObservationOperator uop(w.problem.velocity, overlay);
    const ObservationOperator pop(w.problem.pressure, overlay);
    const ObservationSeries obs = cfg.cda.observations.empty()
                                      ? observation_series(*truth, uop, pop, time_grid(t0, t1, dt))
                                      : read_observation_csv(cfg.cda.observations, uop, pop);
    log << "rom: " << overlay.size() << " observation cells (H = " << overlay.H() << "), " << obs.size()
        << " observation times, max time offset " << obs.max_offset() << '\n';

    const SnapshotSet reference = truth->slice(t0, t1);
    const bool reference_complete = reference.size() == static_cast<std::size_t>(step_count(t0, t1, dt) + 1);
    const auto functionals = make_functionals(cfg, w.problem);
    const auto full = full_order_operators(*w.fom);

    double forcing_sq = 0.0;
    if (w.problem.forcing) {
        const Eigen::VectorXd fh = w.problem.velocity->interpolate(w.problem.forcing, t0);
        forcing_sq = fh.dot(w.fom->velocity_mass() * fh);
    }

    auto run_point = [&](const SweepPoint& p) {
        const int ru = p.r >= 0 ? p.r : cfg.pod.r_u;
        const int rp = p.r >= 0 ? p.r : cfg.pod.r_p;
        const PODBasis b = basis.truncated(ru, rp);
        const ROMOperators ops = build_rom_operators(b, full, &uop, &pop);
        const ROMState init = initial_rom_state(b, w.fom->velocity_mass(), w.fom->pressure_mass(), *truth, t0, dt);
        RomRunConfig rc;
        rc.t0 = t0;
        rc.T = t1;
        rc.params = {dt, cfg.physics.nu, p.gu, p.gp};
        if (w.problem.forcing) {
            rc.poincare = 1.0 / (3.14159265358979323846 * std::sqrt(2.0));
            rc.forcing_norm_sq = [forcing_sq](double) { return forcing_sq; };
        }
        ROMTrajectory traj = run_rom(ops, init, rc, &obs);
        traj.config_hash = config_hash(cfg);
        traj.version = version_string;
        const QuantitySeries q = rom_quantities(traj, b, functionals.get(), w.fom->velocity_mass(),
                                                w.fom->pressure_mass(), reference_complete ? &reference : nullptr);

        fs::create_directories(p.dir);
        const std::vector<fs::path> files{p.dir / "rom_trajectory.bin", p.dir / "rom_quantities.csv"};
        save_rom_trajectory(traj, files[0]);
        write_report_csv(q, files[1]);

        RomRunSummary s;
        s.name = p.name;
        s.r_u = ru;
        s.r_p = rp;
        s.gamma_u = p.gu;
        s.gamma_p = p.gp;
        s.mean_err_u = mean_of(q.relerr_u);
        s.mean_err_p = mean_of(q.relerr_p);
        s.final_err_u = q.relerr_u.empty() ? nan_value : q.relerr_u.back();
        s.final_err_p = q.relerr_p.empty() ? nan_value : q.relerr_p.back();
        if (functionals) {
            const PeriodMaxima m = final_period_maxima(q);
            s.cd_max = m.cd_max;
            s.cl_max = m.cl_max;
            s.dp_final = q.dp.back();
        } else {
            s.cd_max = s.cl_max = s.dp_final = nan_value;
        }
        s.within_bound = true;
        for (std::size_t i = 0; i < traj.size(); ++i)
            if (!(traj.energy[i] <= traj.bound[i] * (1.0 + 1e-12))) s.within_bound = false;
        s.pseudo_inverse = traj.pseudo_inverse;
        s.directory = p.dir;
        return std::make_pair(s, files);
    };

    std::vector<RomRunSummary> out(points.size());
    std::vector<fs::path> written;
    const std::size_t batch = static_cast<std::size_t>(std::max(1, opt.threads));
    for (std::size_t start = 0; start < points.size(); start += batch) {
        const std::size_t stop = std::min(points.size(), start + batch);
        if (stop - start == 1) {
            auto [s, files] = run_point(points[start]);
            out[start] = s;
            written.insert(written.end(), files.begin(), files.end());
            continue;
        }
        std::vector<std::future<std::pair<RomRunSummary, std::vector<fs::path>>>> jobs;
        for (std::size_t i = start; i < stop; ++i) jobs.push_back(std::async(std::launch::async, run_point, points[i]));
        for (std::size_t i = start; i < stop; ++i) {
            auto [s, files] = jobs[i - start].get();
            out[i] = s;
            written.insert(written.end(), files.begin(), files.end());
        }
    }
    if (cfg.output.write_observations) {
        written.push_back(dir / "observations.csv");
        write_observation_csv(obs, uop, pop, written.back());
    }
    record_manifest(dir, opt.sweep ? "rom --sweep" : "rom", cfg, written);

    for (const auto& s : out)
        log << "rom " << s.name << ": r = " << s.r_u << "/" << s.r_p << ", gamma = " << s.gamma_u << "/" << s.gamma_p
            << ", mean rel. error u " << s.mean_err_u << " p " << s.mean_err_p << ", energy within bound "
            << (s.within_bound ? "yes" : "no") << '\n';
    return out;
}

// ---------------------------------------------------------------------------

std::string cmd_report(const PipelineConfig& cfg, const CommandOptions& opt) {
    validate(cfg);
    const fs::path dir = output_directory(cfg, opt);
    std::ostringstream o;
    o << std::setprecision(6);
    o << version_string << ", config " << hex(config_hash(cfg)) << '\n';
    const double t0 = cfg.time.snapshot_end;
    const bool channel = cfg.physics.problem == ProblemKind::channel;

    auto block = [&](const std::string& label, const QuantitySeries& q) {
        o << label << ":\n";
        if (q.size() == 0) {
            o << "  (empty)\n";
            return;
        }
        if (channel) {
            const PeriodMaxima m = final_period_maxima(q);
            o << "  c_D,max = " << m.cd_max << "  c_L,max = " << m.cl_max << "  over [" << m.period_start << ", "
              << m.period_end << "]" << (m.full_period ? "" : " (no full period)") << '\n'
              << "  dp(T) = " << q.dp.back() << '\n';
        }
        o << "  E_kin(T) = " << q.e_kin.back() << '\n';
        if (!q.relerr_u.empty() && std::isfinite(q.relerr_u.back()))
            o << "  mean relative error u = " << mean_of(q.relerr_u) << "  p = " << mean_of(q.relerr_p) << '\n'
              << "  final relative error u = " << q.relerr_u.back() << "  p = " << q.relerr_p.back() << '\n';
    };

    const fs::path fom_csv = dir / "fom_quantities.csv";
    if (fs::exists(fom_csv)) {
        const QuantitySeries all = read_quantities_csv(fom_csv);
        QuantitySeries window;
        for (std::size_t i = 0; i < all.size(); ++i)
            if (all.t[i] >= t0 - 1e-9 && all.t[i] <= cfg.time.prediction_end + 1e-9)
                window.push(all.t[i], all.c_d[i], all.c_l[i], all.e_kin[i], all.dp[i]);
        block("FOM on the prediction window", window);
    }
    std::vector<std::pair<std::string, fs::path>> runs;
    if (fs::exists(dir / "rom_quantities.csv")) runs.emplace_back("ROM", dir / "rom_quantities.csv");
    for (auto [r, g] : sweep_points()) {
        std::ostringstream name;
        name << "r" << r << "_g" << g;
        const fs::path p = dir / name.str() / "rom_quantities.csv";
        if (fs::exists(p)) runs.emplace_back("ROM " + name.str(), p);
    }
    for (const auto& [label, path] : runs) block(label, read_report_csv(path));

    const fs::path basis_path = dir / "pod_basis.bin";
    const fs::path mesh_path = dir / "mesh.txt";
    if (fs::exists(basis_path) && fs::exists(mesh_path)) {
        const PODBasis b = load_pod_basis(basis_path);
        const double h = load_mesh(mesh_path).h();
        o << "POD: d_u = " << b.d_u << ", d_p = " << b.d_p << '\n';
        std::vector<int> ranks{8, 19, cfg.pod.r_u};
        std::sort(ranks.begin(), ranks.end());
        ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());
        for (int r : ranks) {
            if (r >= b.d_u || r < 0) continue;
            o << "  r = " << r << ": captured energy " << captured_energy(b.lambda, r)
              << ", h^-1 sqrt(lambda_{r+1}) = " << stability_diagnostic(h, b.lambda, r) << '\n';
        }
    }
    if (runs.empty() && !fs::exists(fom_csv)) throw ConfigError("no results found in '" + dir.string() + "'");

    const std::string text = o.str();
    std::ofstream f(dir / "summary.txt");
    f << text;
    log_stream(opt) << text;
    return text;
}

// ---------------------------------------------------------------------------

VerifyReport cmd_verify(const PipelineConfig* cfg, const CommandOptions& opt) {
    auto& log = log_stream(opt);
    std::unique_ptr<fs::path> artifacts;
    if (cfg || !opt.out.empty()) {
        const fs::path dir = cfg ? output_directory(*cfg, opt) : opt.out;
        if (fs::exists(dir / "mesh.txt")) artifacts = std::make_unique<fs::path>(dir);
    }
    const fs::path scratch = fs::temp_directory_path() / ("cdarom_verify_" + std::to_string(::getpid()));
    VerifyReport r = run_property_suite(scratch, artifacts.get());
    std::error_code ec;
    fs::remove_all(scratch, ec);
    for (const auto& c : r.checks)
        log << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    log << "verify: " << (r.passed() ? "all checks passed" : "FAILED") << " in " << std::fixed << std::setprecision(2)
        << r.seconds << " s (budget 120 s)\n"
        << std::defaultfloat;
    return r;
}

}  // namespace cdarom
