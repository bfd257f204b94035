#include "cdarom/fom.hpp"

#include <algorithm>
#include <cmath>

#include "binary_io.hpp"
#include "cdarom/error.hpp"
#include "cdarom/quantities.hpp"

namespace cdarom {

Eigen::Vector2d channel_inflow_profile(double y, double peak) {
    const double hgt = channel::height;
    return {4.0 * peak * y * (hgt - y) / (hgt * hgt), 0.0};
}

FlowProblem make_channel_problem(std::shared_ptr<const Mesh> mesh, double nu, ChannelOptions opt) {
    if (!(nu > 0.0)) throw ParameterError("viscosity must be positive");
    if (!(opt.inflow_peak > 0.0)) throw ParameterError("inflow peak velocity must be positive");
    if (opt.ramp_time < 0.0) throw ParameterError("ramp time must be nonnegative");
    if (!mesh->has_marker(BoundaryMarker::cylinder)) throw ParameterError("channel problem needs a cylinder boundary");
    FlowProblem pr;
    pr.mesh = mesh;
    pr.velocity = std::make_shared<FESpace>(mesh, 2, 2);
    pr.pressure = std::make_shared<FESpace>(mesh, 1, 1);
    pr.nu = nu;
    const bool dirichlet_outflow = opt.outflow == OutflowMode::dirichlet;
    const double ramp_time = opt.ramp_time, peak = opt.inflow_peak;
    pr.boundary_velocity = [ramp_time, peak, dirichlet_outflow](const Point& x, double t) -> Eigen::Vector2d {
        const double s = ramp_time > 0.0 ? std::min(t / ramp_time, 1.0) : 1.0;
        const bool at_inflow = x.x < 1e-12;
        const bool at_outflow = x.x > channel::length - 1e-12;
        if (at_inflow || (dirichlet_outflow && at_outflow)) return s * channel_inflow_profile(x.y, peak);
        return Eigen::Vector2d::Zero();
    };
    pr.dirichlet_markers = {BoundaryMarker::inflow, BoundaryMarker::wall, BoundaryMarker::cylinder};
    if (dirichlet_outflow) pr.dirichlet_markers.push_back(BoundaryMarker::outflow);
    return pr;
}

FlowProblem make_enclosed_problem(std::shared_ptr<const Mesh> mesh, double nu, VectorField g, VectorField forcing) {
    if (!(nu > 0.0)) throw ParameterError("viscosity must be positive");
    FlowProblem pr;
    pr.mesh = mesh;
    pr.velocity = std::make_shared<FESpace>(mesh, 2, 2);
    pr.pressure = std::make_shared<FESpace>(mesh, 1, 1);
    pr.nu = nu;
    pr.boundary_velocity = std::move(g);
    pr.forcing = std::move(forcing);
    pr.dirichlet_markers = {BoundaryMarker::inflow, BoundaryMarker::outflow, BoundaryMarker::wall,
                            BoundaryMarker::cylinder};
    return pr;
}

// ---------------------------------------------------------------------------

FomSolver::FomSolver(FlowProblem problem, double dt, LinearSolverOptions solver)
    : problem_(std::move(problem)),
      dt_(dt),
      solver_opt_(solver),
      momentum_solver_(solver),
      pressure_solver_(LinearSolverOptions{SolverKind::sparse_direct, solver.tolerance, solver.max_iterations}) {
    if (!(dt > 0.0)) throw ParameterError("time step must be positive");
    if (!problem_.velocity || !problem_.pressure) throw ParameterError("flow problem without spaces");
    if (problem_.velocity->components() != 2 || problem_.velocity->degree() != 2 || problem_.pressure->degree() != 1)
        throw ParameterError("FomSolver expects P2 vector velocity and P1 pressure");

    scalar_velocity_ = std::make_shared<FESpace>(problem_.mesh, 2, 1);
    pattern_ = std::make_shared<ElementPattern>(*scalar_velocity_);
    cache_ = std::make_shared<QuadratureCache>(*scalar_velocity_);
    convection_ = std::make_unique<ConvectionAssembler>(scalar_velocity_, pattern_, cache_);

    // Mass and stiffness on the shared pattern so the momentum matrix is a value-wise sum.
    mass_s_ = pattern_->zero_matrix();
    stiff_s_ = pattern_->zero_matrix();
    const int nb = scalar_velocity_->nodes_per_element();
    std::array<double, 36> lm{}, ls{};
    for (std::size_t e = 0; e < scalar_velocity_->num_elements(); ++e) {
        lm.fill(0.0);
        ls.fill(0.0);
        for (int q = 0; q < cache_->num_points(); ++q) {
            const double w = cache_->weight(e, q);
            const double* v = cache_->values(e, q);
            const Eigen::Vector2d* g = cache_->gradients(e, q);
            for (int i = 0; i < nb; ++i)
                for (int j = 0; j < nb; ++j) {
                    lm[i * nb + j] += w * v[i] * v[j];
                    ls[i * nb + j] += w * g[i].dot(g[j]);
                }
        }
        pattern_->scatter(mass_s_, e, lm.data());
        pattern_->scatter(stiff_s_, e, ls.data());
    }
    mass_u_ = block_diagonal(mass_s_, 2);
    stiff_u_ = block_diagonal(stiff_s_, 2);
    div_ = assemble_divergence(*problem_.velocity, *problem_.pressure);
    div_t_ = div_.transpose();
    mass_p_ = assemble_mass(*problem_.pressure);
    stiff_p_ = assemble_stiffness(*problem_.pressure);
    p_integrals_ = mass_p_ * Eigen::VectorXd::Ones(mass_p_.rows());
    area_ = p_integrals_.sum();

    dirichlet_nodes_ = scalar_velocity_->boundary_nodes(problem_.dirichlet_markers);
    reducer_ = std::make_unique<DirichletReducer>(scalar_velocity_->num_nodes(), dirichlet_nodes_);

    // Pressure increment: [dt A_p, m; m^T, 0] with m_i = (1, q_i).
    const Eigen::Index np = stiff_p_.rows();
    std::vector<Eigen::Triplet<double>> trip;
    for (Eigen::Index k = 0; k < stiff_p_.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(stiff_p_, k); it; ++it) trip.emplace_back(it.row(), it.col(), dt_ * it.value());
    for (Eigen::Index i = 0; i < np; ++i) {
        trip.emplace_back(i, np, p_integrals_[i]);
        trip.emplace_back(np, i, p_integrals_[i]);
    }
    SparseMatrix aug(np + 1, np + 1);
    aug.setFromTriplets(trip.begin(), trip.end());
    pressure_solver_.factorize(aug);
}

FOMState FomSolver::rest_state(double t0) const {
    FOMState s;
    s.u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(problem_.velocity->dof_count()));
    s.p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(problem_.pressure->dof_count()));
    s.p_prev = s.p;
    s.t = t0;
    return s;
}

FOMState FomSolver::interpolated_state(const VectorField& u0, const std::function<double(const Point&)>& p0,
                                       double t0) const {
    FOMState s;
    s.u = problem_.velocity->interpolate(u0, t0);
    s.p = problem_.pressure->interpolate_scalar(p0);
    s.p.array() -= p_integrals_.dot(s.p) / area_;
    s.p_prev = s.p;
    s.t = t0;
    return s;
}

Eigen::VectorXd FomSolver::boundary_values(double t) const {
    const auto nn = static_cast<Eigen::Index>(scalar_velocity_->num_nodes());
    Eigen::VectorXd g = Eigen::VectorXd::Zero(2 * nn);
    const auto& nodes = scalar_velocity_->node_coordinates();
    for (int i : dirichlet_nodes_) {
        const Eigen::Vector2d v = problem_.boundary_velocity(nodes[i], t);
        g[i] = v[0];
        g[nn + i] = v[1];
    }
    return g;
}

FOMState FomSolver::step(const FOMState& s) {
    const double t1 = s.t + dt_;
    const auto nn = static_cast<Eigen::Index>(scalar_velocity_->num_nodes());

    convection_->assemble(s.u, conv_s_);
    momentum_s_ = pattern_->zero_matrix();
    {
        double* k = momentum_s_.valuePtr();
        const double* m = mass_s_.valuePtr();
        const double* a = stiff_s_.valuePtr();
        const double* c = conv_s_.valuePtr();
        const double inv_dt = 1.0 / dt_;
        for (Eigen::Index i = 0; i < momentum_s_.nonZeros(); ++i) k[i] = inv_dt * m[i] + problem_.nu * a[i] + c[i];
    }

    const Eigen::VectorXd extrapolated = 2.0 * s.p - s.p_prev;
    Eigen::VectorXd rhs = div_t_ * extrapolated;
    rhs.head(nn) += (1.0 / dt_) * (mass_s_ * s.u.head(nn));
    rhs.tail(nn) += (1.0 / dt_) * (mass_s_ * s.u.tail(nn));
    if (problem_.forcing) rhs += assemble_load(*problem_.velocity, problem_.forcing, t1);

    const Eigen::VectorXd g = boundary_values(t1);
    momentum_solver_.factorize(reducer_->reduce_matrix(momentum_s_));

    FOMState out;
    out.u.resize(2 * nn);
    for (int c = 0; c < 2; ++c) {
        const Eigen::VectorXd gc = g.segment(c * nn, nn);
        const Eigen::VectorXd bc = rhs.segment(c * nn, nn);
        out.u.segment(c * nn, nn) = reducer_->expand(momentum_solver_.solve(reducer_->reduce_rhs(momentum_s_, bc, gc)), gc);
    }

    const Eigen::Index np = stiff_p_.rows();
    Eigen::VectorXd prhs = Eigen::VectorXd::Zero(np + 1);
    prhs.head(np) = -(div_ * out.u);
    const Eigen::VectorXd incr = pressure_solver_.solve(prhs);
    out.p = s.p + incr.head(np);
    out.p_prev = s.p;
    out.t = t1;
    out.n = s.n + 1;
    if (!out.u.allFinite() || !out.p.allFinite())
        throw NumericalError("non-finite FOM state at t=" + std::to_string(t1));
    return out;
}

EnergyTerms FomSolver::energy(const FOMState& s) const {
    EnergyTerms e;
    e.u_l2_sq = s.u.dot(mass_u_ * s.u);
    e.grad_p_sq = s.p.dot(stiff_p_ * s.p);
    e.grad_u_sq = s.u.dot(stiff_u_ * s.u);
    return e;
}

// ---------------------------------------------------------------------------

SnapshotSet SnapshotSet::slice(double t0, double t1) const {
    const double eps = 1e-9;
    std::vector<Eigen::Index> cols;
    for (std::size_t j = 0; j < times.size(); ++j)
        if (times[j] >= t0 - eps && times[j] <= t1 + eps) cols.push_back(static_cast<Eigen::Index>(j));
    SnapshotSet out;
    out.meta = meta;
    out.velocity.resize(velocity.rows(), static_cast<Eigen::Index>(cols.size()));
    out.pressure.resize(pressure.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
        out.times.push_back(times[cols[k]]);
        out.velocity.col(static_cast<Eigen::Index>(k)) = velocity.col(cols[k]);
        out.pressure.col(static_cast<Eigen::Index>(k)) = pressure.col(cols[k]);
    }
    if (!out.times.empty()) {
        out.meta.window_start = out.times.front();
        out.meta.window_end = out.times.back();
    }
    return out;
}

std::size_t SnapshotSet::nearest(double t, double* offset) const {
    if (times.empty()) throw ParameterError("empty snapshot set");
    const auto it = std::lower_bound(times.begin(), times.end(), t);
    std::size_t j = static_cast<std::size_t>(it - times.begin());
    if (j == times.size()) j = times.size() - 1;
    else if (j > 0 && std::abs(times[j - 1] - t) <= std::abs(times[j] - t)) j = j - 1;
    if (offset) *offset = times[j] - t;
    return j;
}

void SnapshotSet::append(double t, const Eigen::VectorXd& u, const Eigen::VectorXd& p) {
    if (velocity.cols() == 0) {
        velocity.resize(u.size(), 0);
        pressure.resize(p.size(), 0);
    }
    if (u.size() != velocity.rows() || p.size() != pressure.rows()) throw ParameterError("snapshot size mismatch");
    velocity.conservativeResize(Eigen::NoChange, velocity.cols() + 1);
    pressure.conservativeResize(Eigen::NoChange, pressure.cols() + 1);
    velocity.col(velocity.cols() - 1) = u;
    pressure.col(pressure.cols() - 1) = p;
    times.push_back(t);
}

namespace {
constexpr char snapshot_magic[8] = {'C', 'D', 'A', 'R', 'O', 'M', '1', '\0'};
}

void save_snapshots(const SnapshotSet& s, const std::filesystem::path& path) {
    detail::BinaryWriter w(path.string());
    w.magic(snapshot_magic);
    w.pod(s.meta.mesh_hash);
    w.pod(s.meta.config_hash);
    w.string(s.meta.version);
    w.pod(static_cast<std::uint64_t>(s.size()));
    w.pod(static_cast<std::uint64_t>(s.velocity.rows()));
    w.pod(static_cast<std::uint64_t>(s.pressure.rows()));
    w.pod(s.meta.dt);
    w.pod(s.meta.nu);
    w.pod(s.meta.window_start);
    w.pod(s.meta.window_end);
    w.pod(s.meta.stride);
    w.pod(static_cast<std::uint32_t>(s.meta.dq_augmented ? 1 : 0));
    w.vector(s.times);
    w.matrix(s.velocity);
    w.matrix(s.pressure);
    w.finish();
}

SnapshotSet load_snapshots(const std::filesystem::path& path) {
    detail::BinaryReader r(path.string());
    r.expect_magic(snapshot_magic);
    SnapshotSet s;
    s.meta.mesh_hash = r.pod<std::uint64_t>();
    s.meta.config_hash = r.pod<std::uint64_t>();
    s.meta.version = r.string();
    const auto m = r.pod<std::uint64_t>();
    const auto nu = r.pod<std::uint64_t>();
    const auto np = r.pod<std::uint64_t>();
    if (m == 0 || m > (1ull << 32) || nu > (1ull << 32) || np > (1ull << 32))
        throw ParseError("snapshot file '" + path.string() + "' has implausible dimensions");
    s.meta.dt = r.pod<double>();
    s.meta.nu = r.pod<double>();
    s.meta.window_start = r.pod<double>();
    s.meta.window_end = r.pod<double>();
    s.meta.stride = r.pod<std::uint32_t>();
    s.meta.dq_augmented = r.pod<std::uint32_t>() != 0;
    s.times = r.vector(m);
    s.velocity = r.matrix(nu, m);
    s.pressure = r.matrix(np, m);
    r.expect_end();
    return s;
}

void QuantitySeries::push(double time, double cd, double cl, double ek, double pd) {
    t.push_back(time);
    c_d.push_back(cd);
    c_l.push_back(cl);
    e_kin.push_back(ek);
    dp.push_back(pd);
}

long step_count(double t0, double T, double dt) {
    if (!(dt > 0.0)) throw ParameterError("time step must be positive");
    if (!(T >= t0)) throw ParameterError("end time precedes start time");
    const double n = (T - t0) / dt;
    const double rounded = std::round(n);
    if (std::abs(n - rounded) > 1e-6 * std::max(1.0, n))
        throw ParameterError("(T - t0)/dt = " + std::to_string(n) + " is not an integer");
    return static_cast<long>(rounded);
}

FomRunResult run_fom(FomSolver& solver, const FOMState& initial, const FomRunConfig& cfg,
                     const BenchmarkFunctionals* functionals) {
    const long n_steps = step_count(cfg.t0, cfg.T, cfg.dt);
    if (std::abs(cfg.dt - solver.dt()) > 1e-15) throw ParameterError("run config dt differs from the solver dt");
    if (cfg.stride < 1) throw ParameterError("snapshot stride must be >= 1");
    if (cfg.record_end < cfg.record_start) throw ParameterError("snapshot window is empty");

    const double eps = 1e-9 * cfg.dt;
    const auto& pr = solver.problem();
    FomRunResult res;
    res.snapshots.meta.dt = cfg.dt;
    res.snapshots.meta.nu = pr.nu;
    res.snapshots.meta.mesh_hash = pr.mesh->hash();
    res.snapshots.meta.stride = static_cast<std::uint32_t>(cfg.stride);
    res.snapshots.meta.window_start = cfg.record_start;
    res.snapshots.meta.window_end = cfg.record_end;

    long recorded_index = 0;
    auto record = [&](const FOMState& s) {
        if (s.t < cfg.record_start - eps || s.t > cfg.record_end + eps) return;
        if (recorded_index++ % cfg.stride != 0) return;
        res.snapshots.append(s.t, s.u, s.p);
    };
    auto measure = [&](const FOMState& s) {
        if (functionals) {
            const auto [cd, cl] = functionals->drag_lift(s.u, s.p);
            res.quantities.push(s.t, cd, cl, functionals->kinetic_energy(s.u), functionals->pressure_difference(s.p));
        } else {
            res.quantities.push(s.t, std::nan(""), std::nan(""), 0.5 * s.u.dot(solver.velocity_mass() * s.u),
                                std::nan(""));
        }
    };

    FOMState s = initial;
    double dissipation = 0.0;
    auto monitor = [&](const FOMState& st) {
        const auto e = solver.energy(st);
        return e.u_l2_sq + cfg.dt * cfg.dt * e.grad_p_sq + dissipation;
    };
    record(s);
    measure(s);
    if (cfg.observer) cfg.observer(s);
    res.energy.push_back(monitor(s));
    for (long n = 0; n < n_steps; ++n) {
        s = solver.step(s);
        dissipation += pr.nu * cfg.dt * solver.energy(s).grad_u_sq;
        record(s);
        measure(s);
        if (cfg.observer) cfg.observer(s);
        res.energy.push_back(monitor(s));
    }
    res.final_state = s;
    return res;
}

// ---------------------------------------------------------------------------

ErrorReport state_error(const FESpace& velocity, const FESpace& pressure, const Eigen::VectorXd& u,
                        const Eigen::VectorXd& p, const ExactSolution& exact, double t) {
    const QuadratureCache vc(velocity);
    const QuadratureCache pc(pressure);
    const int nbv = velocity.nodes_per_element(), nbp = pressure.nodes_per_element();
    const auto nn = static_cast<int>(velocity.num_nodes());

    double p_mean_h = 0.0, p_mean = 0.0, area = 0.0;
    for (std::size_t e = 0; e < pressure.num_elements(); ++e) {
        const auto lp = pressure.element_nodes(e);
        for (int q = 0; q < pc.num_points(); ++q) {
            const double w = pc.weight(e, q);
            double ph = 0.0;
            for (int i = 0; i < nbp; ++i) ph += p[lp[i]] * pc.values(e, q)[i];
            p_mean_h += w * ph;
            p_mean += w * exact.p(pc.point(e, q), t);
            area += w;
        }
    }
    p_mean_h /= area;
    p_mean /= area;

    double eu = 0.0, egu = 0.0, ep = 0.0;
    for (std::size_t e = 0; e < velocity.num_elements(); ++e) {
        const auto lv = velocity.element_nodes(e);
        const auto lp = pressure.element_nodes(e);
        for (int q = 0; q < vc.num_points(); ++q) {
            const double w = vc.weight(e, q);
            const Point& x = vc.point(e, q);
            Eigen::Vector2d uh = Eigen::Vector2d::Zero();
            Eigen::Matrix2d guh = Eigen::Matrix2d::Zero();
            for (int i = 0; i < nbv; ++i)
                for (int c = 0; c < 2; ++c) {
                    const double a = u[c * nn + lv[i]];
                    uh[c] += a * vc.values(e, q)[i];
                    guh.row(c) += a * vc.gradients(e, q)[i].transpose();
                }
            double ph = 0.0;
            for (int i = 0; i < nbp; ++i) ph += p[lp[i]] * pc.values(e, q)[i];
            eu += w * (exact.u(x, t) - uh).squaredNorm();
            egu += w * (exact.grad_u(x, t) - guh).squaredNorm();
            const double dp = (exact.p(x, t) - p_mean) - (ph - p_mean_h);
            ep += w * dp * dp;
        }
    }
    return {std::sqrt(eu), std::sqrt(egu), std::sqrt(ep), 0};
}

ErrorReport manufactured_error(std::shared_ptr<const Mesh> mesh, double nu, const ExactSolution& exact, double dt,
                               double t0, double T) {
    const long n_steps = step_count(t0, T, dt);
    FomSolver solver(make_enclosed_problem(mesh, nu, exact.u, exact.forcing), dt);
    FOMState s = solver.interpolated_state(exact.u, [&](const Point& x) { return exact.p(x, t0); }, t0);
    // p^{-1} from the exact pressure one step back.
    s.p_prev = solver.problem().pressure->interpolate_scalar([&](const Point& x) { return exact.p(x, t0 - dt); });
    s.p_prev.array() -= solver.pressure_integrals().dot(s.p_prev) / solver.domain_area();

    ErrorReport worst;
    for (long n = 0; n < n_steps; ++n) {
        s = solver.step(s);
        const auto e = state_error(*solver.problem().velocity, *solver.problem().pressure, s.u, s.p, exact, s.t);
        worst.l2_u = std::max(worst.l2_u, e.l2_u);
        worst.h1_u = std::max(worst.h1_u, e.h1_u);
        worst.l2_p = std::max(worst.l2_p, e.l2_p);
    }
    worst.steps = n_steps;
    return worst;
}

ExactSolution stationary_vortex_solution(double nu) {
    constexpr double pi = 3.14159265358979323846;
    auto velocity = [](const Point& q) -> Eigen::Vector2d {
        const double sx = std::sin(pi * q.x), sy = std::sin(pi * q.y);
        return {sx * sx * std::sin(2 * pi * q.y), -std::sin(2 * pi * q.x) * sy * sy};
    };
    auto gradient = [](const Point& q) -> Eigen::Matrix2d {
        const double sx = std::sin(pi * q.x), sy = std::sin(pi * q.y);
        Eigen::Matrix2d g;
        g(0, 0) = pi * std::sin(2 * pi * q.x) * std::sin(2 * pi * q.y);
        g(0, 1) = 2 * pi * sx * sx * std::cos(2 * pi * q.y);
        g(1, 0) = -2 * pi * std::cos(2 * pi * q.x) * sy * sy;
        g(1, 1) = -g(0, 0);
        return g;
    };
    ExactSolution e;
    e.u = [velocity](const Point& q, double) { return velocity(q); };
    e.grad_u = [gradient](const Point& q, double) { return gradient(q); };
    e.p = [](const Point& q, double) { return std::cos(pi * q.x) * std::cos(pi * q.y); };
    e.forcing = [nu, velocity, gradient](const Point& q, double) -> Eigen::Vector2d {
        const double sx = std::sin(pi * q.x), sy = std::sin(pi * q.y);
        const double s2x = std::sin(2 * pi * q.x), s2y = std::sin(2 * pi * q.y);
        const double lap1 = 2 * pi * pi * std::cos(2 * pi * q.x) * s2y - 4 * pi * pi * sx * sx * s2y;
        const double lap2 = -2 * pi * pi * std::cos(2 * pi * q.y) * s2x + 4 * pi * pi * sy * sy * s2x;
        const Eigen::Vector2d grad_p(-pi * sx * std::cos(pi * q.y), -pi * std::cos(pi * q.x) * sy);
        return Eigen::Vector2d(-nu * lap1, -nu * lap2) + gradient(q) * velocity(q) + grad_p;
    };
    return e;
}

}  // namespace cdarom
