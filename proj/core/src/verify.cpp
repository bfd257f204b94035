#include "cdarom/verify.hpp"

#include <Eigen/Cholesky>
#include <chrono>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include "cdarom/cda.hpp"
#include "cdarom/config.hpp"
#include "cdarom/error.hpp"
#include "cdarom/fom.hpp"
#include "cdarom/pod.hpp"
#include "cdarom/quantities.hpp"
#include "cdarom/rom.hpp"
#include "cdarom/version.hpp"

namespace cdarom {

bool VerifyReport::passed() const {
    for (const auto& c : checks)
        if (!c.passed) return false;
    return !checks.empty();
}

namespace {

namespace fs = std::filesystem;

std::string bytes_of(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::string sci(double v) {
    std::ostringstream o;
    o.precision(3);
    o << std::scientific << v;
    return o.str();
}

double max_abs(const SparseMatrix& m) {
    double v = 0.0;
    for (int k = 0; k < m.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(m, k); it; ++it) v = std::max(v, std::abs(it.value()));
    return v;
}

/// Saves with `save`, reloads with `load`, saves the copy again, and demands identical bytes.
template <class T, class Save, class Load>
CheckResult roundtrip(const std::string& name, const T& value, const fs::path& dir, Save save, Load load) {
    const fs::path a = dir / (name + ".a"), b = dir / (name + ".b");
    save(value, a);
    const T copy = load(a);
    save(copy, b);
    const bool same = bytes_of(a) == bytes_of(b) && !bytes_of(a).empty();
    fs::remove(a);
    fs::remove(b);
    return {name, same, same ? "byte-identical" : "files differ after reload"};
}

struct Fixture {
    std::shared_ptr<const Mesh> mesh;
    FlowProblem problem;
    std::unique_ptr<FomSolver> fom;
    SnapshotSet snapshots;
    PODBasis basis;
};

Fixture make_fixture() {
    Fixture f;
    f.mesh = std::make_shared<const Mesh>(generate_rectangle_mesh(0.0, 1.0, 0.0, 1.0, 6, 6));
    const ExactSolution exact = stationary_vortex_solution(1.0);
    f.problem = make_enclosed_problem(f.mesh, 1.0, exact.u, exact.forcing);
    f.fom = std::make_unique<FomSolver>(f.problem, 0.01);

    // Random columns give a generic full-rank snapshot set.
    std::mt19937_64 rng(20240915);
    std::normal_distribution<double> normal;
    const auto nu = static_cast<Eigen::Index>(f.problem.velocity->dof_count());
    const auto np = static_cast<Eigen::Index>(f.problem.pressure->dof_count());
    const int m = 12;
    f.snapshots.velocity.resize(nu, m);
    f.snapshots.pressure.resize(np, m);
    for (int j = 0; j < m; ++j) {
        for (Eigen::Index i = 0; i < nu; ++i) f.snapshots.velocity(i, j) = normal(rng);
        for (Eigen::Index i = 0; i < np; ++i) f.snapshots.pressure(i, j) = normal(rng);
        f.snapshots.times.push_back(0.01 * j);
    }
    f.snapshots.meta.mesh_hash = f.mesh->hash();
    f.snapshots.meta.version = version_string;
    f.snapshots.meta.dt = 0.01;
    f.snapshots.meta.nu = 1.0;
    f.snapshots.meta.window_end = 0.01 * (m - 1);

    FieldMatrices fm{&f.fom->velocity_mass(), &f.fom->pressure_mass(), &f.fom->velocity_stiffness(),
                     &f.fom->pressure_stiffness()};
    PODOptions opt;
    opt.r_u = 6;
    opt.r_p = 5;
    f.basis = build_pod_basis(f.snapshots, fm, opt);
    f.basis.mesh_hash = f.mesh->hash();
    return f;
}

void structural_checks(const Fixture& f, std::vector<CheckResult>& out) {
    const FESpace& vel = *f.problem.velocity;

    {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> uni(-1.0, 1.0);
        Eigen::VectorXd w(static_cast<Eigen::Index>(vel.dof_count()));
        for (auto& v : w) v = uni(rng);
        const SparseMatrix c = assemble_convection(vel, w);
        const SparseMatrix sum = c + SparseMatrix(c.transpose());
        const double err = max_abs(sum) / std::max(1e-300, max_abs(c));
        out.push_back({"convection_skew_symmetry", err <= 1e-12, "max|C + C^T|/max|C| = " + sci(err)});
    }

    {
        const ObservationOperator uop(f.problem.velocity, build_coarse_overlay(*f.mesh, 3, 3));
        const ObservationOperator pop(f.problem.pressure, build_coarse_overlay(*f.mesh, 3, 3));
        const ROMOperators ops = build_rom_operators(f.basis, full_order_operators(*f.fom), &uop, &pop);
        const auto bad = check_rom_operators(ops);
        std::string detail = bad.empty() ? "identity masses, semidefinite stiffness, skew slices" : bad.front();
        out.push_back({"reduced_operator_structure", bad.empty(), detail});
    }

    auto spd = [&](const SparseMatrix& m, const std::string& name) {
        const Eigen::MatrixXd d(m);
        const double asym = (d - d.transpose()).cwiseAbs().maxCoeff() / d.cwiseAbs().maxCoeff();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(d, Eigen::EigenvaluesOnly);
        const double lo = eig.eigenvalues().minCoeff();
        out.push_back({name, asym <= 1e-14 && lo > 0.0, "asymmetry " + sci(asym) + ", min eigenvalue " + sci(lo)});
    };
    spd(f.fom->velocity_mass(), "velocity_mass_spd");
    spd(f.fom->pressure_mass(), "pressure_mass_spd");

    {
        const SparseMatrix& ap = f.fom->pressure_stiffness();
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(ap.cols());
        const double err = (ap * ones).cwiseAbs().maxCoeff() / max_abs(ap);
        out.push_back({"pressure_stiffness_constant_kernel", err <= 1e-13, "max|A_p 1|/max|A_p| = " + sci(err)});
    }

    {
        // (x^2 - y^2 + xy, -2xy - y^2/2) is divergence free and lies in P2.
        const Eigen::VectorXd u = vel.interpolate(
            [](const Point& q, double) -> Eigen::Vector2d {
                return {q.x * q.x - q.y * q.y + q.x * q.y, -2.0 * q.x * q.y - 0.5 * q.y * q.y};
            },
            0.0);
        const Eigen::VectorXd bu = f.fom->divergence() * u;
        const double err = bu.cwiseAbs().maxCoeff() / (max_abs(f.fom->divergence()) * u.cwiseAbs().maxCoeff());
        out.push_back({"divergence_free_annihilation", err <= 1e-13, "max|B u| (scaled) = " + sci(err)});
    }

    {
        const SparseMatrix& mu = f.fom->velocity_mass();
        const Eigen::MatrixXd& phi = f.basis.phi;
        const Eigen::MatrixXd res = f.snapshots.velocity - phi * project(phi, mu, f.snapshots.velocity);
        const double err = (phi.transpose() * (mu * res)).cwiseAbs().maxCoeff() /
                           std::sqrt((f.snapshots.velocity.transpose() * (mu * f.snapshots.velocity)).trace());
        const double orth = (phi.transpose() * (mu * phi) - Eigen::MatrixXd::Identity(phi.cols(), phi.cols()))
                                .cwiseAbs()
                                .maxCoeff();
        out.push_back({"projection_residual_orthogonality", err <= 1e-12 && orth <= 1e-10,
                       "max|Phi^T M (s - Pi s)| = " + sci(err) + ", orthonormality " + sci(orth)});
    }
}

void roundtrip_checks(const Fixture& f, const fs::path& dir, std::vector<CheckResult>& out) {
    out.push_back(roundtrip(
        "mesh_roundtrip", *f.mesh, dir, [](const Mesh& m, const fs::path& p) { save_mesh(m, p); },
        [](const fs::path& p) { return load_mesh(p); }));
    out.push_back(roundtrip(
        "snapshot_roundtrip", f.snapshots, dir, [](const SnapshotSet& s, const fs::path& p) { save_snapshots(s, p); },
        [](const fs::path& p) { return load_snapshots(p); }));
    out.push_back(roundtrip(
        "basis_roundtrip", f.basis, dir, [](const PODBasis& b, const fs::path& p) { save_pod_basis(b, p); },
        [](const fs::path& p) { return load_pod_basis(p); }));

    ROMTrajectory traj;
    traj.times = {0.0, 0.5, 1.0};
    traj.a = Eigen::MatrixXd::Constant(3, 3, 1.0 / 7.0);
    traj.b = Eigen::MatrixXd::Constant(2, 3, -2.0 / 3.0);
    traj.energy = {1.0, 0.9, 0.8};
    traj.bound = {1.0, 1.1, 1.2};
    traj.gamma_u = 100.0;
    traj.dt = 0.5;
    traj.version = version_string;
    out.push_back(roundtrip(
        "trajectory_roundtrip", traj, dir,
        [](const ROMTrajectory& t, const fs::path& p) { save_rom_trajectory(t, p); },
        [](const fs::path& p) { return load_rom_trajectory(p); }));

    QuantitySeries q;
    for (int i = 0; i < 5; ++i) q.push(0.1 * i, std::sin(i + 0.1), std::cos(i / 3.0), 1.0 / (i + 3), 2.0 / 3.0 * i);
    out.push_back(roundtrip(
        "quantities_csv_roundtrip", q, dir,
        [](const QuantitySeries& s, const fs::path& p) { write_quantities_csv(s, p); },
        [](const fs::path& p) { return read_quantities_csv(p); }));

    const ObservationOperator uop(f.problem.velocity, build_coarse_overlay(*f.mesh, 3, 3));
    const ObservationOperator pop(f.problem.pressure, build_coarse_overlay(*f.mesh, 3, 3));
    const ObservationSeries obs = observation_series(f.snapshots, uop, pop, {0.0, 0.01, 0.02});
    out.push_back(roundtrip(
        "observation_csv_roundtrip", obs, dir,
        [&](const ObservationSeries& s, const fs::path& p) { write_observation_csv(s, uop, pop, p); },
        [&](const fs::path& p) { return read_observation_csv(p, uop, pop); }));

    PipelineConfig cfg;
    cfg.cda.gamma_u = 1.0 / 3.0;
    cfg.time.dt = 1e-4;
    const PipelineConfig copy = parse_config(format_config(cfg));
    const bool same = copy.cda.gamma_u == cfg.cda.gamma_u && format_config(copy) == format_config(cfg);
    out.push_back({"config_roundtrip", same, same ? "canonical text reproduced" : "canonical text changed"});
}

void artifact_checks(const fs::path& dir, std::vector<CheckResult>& out) {
    std::shared_ptr<const Mesh> mesh;
    try {
        mesh = std::make_shared<const Mesh>(load_mesh(dir / "mesh.txt"));
        out.push_back({"artifact_mesh_readable", true, (dir / "mesh.txt").string()});
    } catch (const Error& e) {
        out.push_back({"artifact_mesh_readable", false, e.what()});
        return;
    }
    if (fs::exists(dir / "snapshots.bin")) {
        try {
            const SnapshotSet s = load_snapshots(dir / "snapshots.bin");
            const bool ok = s.meta.mesh_hash == mesh->hash();
            out.push_back({"artifact_snapshots_match_mesh", ok, ok ? "mesh hash matches" : "mesh hash differs"});
        } catch (const Error& e) {
            out.push_back({"artifact_snapshots_match_mesh", false, e.what()});
        }
    }
    if (fs::exists(dir / "pod_basis.bin")) {
        PODBasis b;
        try {
            b = load_pod_basis(dir / "pod_basis.bin");
            out.push_back({"artifact_basis_readable", true, "checksum and dimensions consistent"});
        } catch (const Error& e) {
            out.push_back({"artifact_basis_readable", false, e.what()});
            return;
        }
        auto vel = std::make_shared<const FESpace>(mesh, 2, 2);
        auto pre = std::make_shared<const FESpace>(mesh, 1, 1);
        if (b.mesh_hash != mesh->hash() || b.phi.rows() != static_cast<Eigen::Index>(vel->dof_count()) ||
            b.psi.rows() != static_cast<Eigen::Index>(pre->dof_count())) {
            out.push_back({"artifact_basis_orthonormality", false, "basis does not belong to the stored mesh"});
            return;
        }
        const SparseMatrix mu = block_diagonal(assemble_mass(FESpace(mesh, 2, 1)), 2);
        const SparseMatrix mp = assemble_mass(*pre);
        const double eu = (b.phi.transpose() * (mu * b.phi) - Eigen::MatrixXd::Identity(b.r_u(), b.r_u()))
                              .cwiseAbs()
                              .maxCoeff();
        const double ep = (b.psi.transpose() * (mp * b.psi) - Eigen::MatrixXd::Identity(b.r_p(), b.r_p()))
                              .cwiseAbs()
                              .maxCoeff();
        const bool ok = eu <= 1e-10 && ep <= 1e-10 && std::isfinite(eu) && std::isfinite(ep);
        out.push_back({"artifact_basis_orthonormality", ok,
                       "max|Phi^T M Phi - I| = " + sci(eu) + ", max|Psi^T M Psi - I| = " + sci(ep)});
    }
}

}  // namespace

VerifyReport run_property_suite(const fs::path& scratch, const fs::path* artifacts) {
    const auto start = std::chrono::steady_clock::now();
    VerifyReport report;
    fs::create_directories(scratch);
    try {
        const Fixture f = make_fixture();
        structural_checks(f, report.checks);
        roundtrip_checks(f, scratch, report.checks);
    } catch (const Error& e) {
        report.checks.push_back({"suite_setup", false, e.what()});
    }
    if (artifacts) artifact_checks(*artifacts, report.checks);
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}  // namespace cdarom
