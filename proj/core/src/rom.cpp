#include "cdarom/rom.hpp"

#include <cmath>
#include <limits>

#include "binary_io.hpp"
#include "cdarom/error.hpp"
#include "cdarom/quantities.hpp"

namespace cdarom {

FullOrderOperators full_order_operators(const FomSolver& fom) {
    FullOrderOperators f;
    f.velocity = fom.problem().velocity.get();
    f.mass_u = &fom.velocity_mass();
    f.stiff_u = &fom.velocity_stiffness();
    f.mass_p = &fom.pressure_mass();
    f.stiff_p = &fom.pressure_stiffness();
    f.div = &fom.divergence();
    f.forcing = fom.problem().forcing;
    return f;
}

ROMOperators build_rom_operators(const PODBasis& basis, const FullOrderOperators& fom,
                                 const ObservationOperator* velocity_obs, const ObservationOperator* pressure_obs) {
    if (!fom.velocity || !fom.mass_u || !fom.stiff_u || !fom.mass_p || !fom.stiff_p || !fom.div)
        throw ParameterError("incomplete full-order operators");
    if (basis.centered()) throw ParameterError("the reduced model needs an uncentered POD basis");
    const Eigen::MatrixXd& phi = basis.phi;
    const Eigen::MatrixXd& psi = basis.psi;
    if (phi.rows() != fom.mass_u->rows() || psi.rows() != fom.mass_p->rows() || fom.div->rows() != psi.rows() ||
        fom.div->cols() != phi.rows())
        throw ParameterError("POD basis does not match the full-order spaces");
    if ((velocity_obs == nullptr) != (pressure_obs == nullptr))
        throw ParameterError("velocity and pressure observation operators must be given together");

    ROMOperators ops;
    ops.mass_u = phi.transpose() * (*fom.mass_u * phi);
    ops.stiff_u = phi.transpose() * (*fom.stiff_u * phi);
    ops.mass_p = psi.transpose() * (*fom.mass_p * psi);
    ops.stiff_p = psi.transpose() * (*fom.stiff_p * psi);
    ops.div = psi.transpose() * (*fom.div * phi);
    ops.grad = -ops.div.transpose();

    ops.convection.reserve(static_cast<std::size_t>(phi.cols()));
    for (Eigen::Index k = 0; k < phi.cols(); ++k) {
        const SparseMatrix c = assemble_convection(*fom.velocity, phi.col(k));
        ops.convection.push_back(phi.transpose() * (c * phi));
    }

    if (velocity_obs) {
        ops.nudge_u = assemble_nudging_matrices(*velocity_obs, phi);
        ops.nudge_p = assemble_nudging_matrices(*pressure_obs, psi);
        ops.obs_weights_u = velocity_obs->weights();
        ops.obs_weights_p = pressure_obs->weights();
    }
    if (fom.forcing) {
        const FESpace* space = fom.velocity;
        VectorField f = fom.forcing;
        Eigen::MatrixXd phi_t = phi.transpose();
        ops.forcing = [space, f, phi_t](double t) -> Eigen::VectorXd { return phi_t * assemble_load(*space, f, t); };
    }
    return ops;
}

std::vector<std::string> check_rom_operators(const ROMOperators& ops) {
    std::vector<std::string> bad;
    const int r = ops.r_u();
    if ((ops.mass_u - Eigen::MatrixXd::Identity(r, r)).cwiseAbs().maxCoeff() > 1e-8 && r > 0)
        bad.push_back("reduced velocity mass differs from the identity");
    if (ops.r_p() > 0 && (ops.mass_p - Eigen::MatrixXd::Identity(ops.r_p(), ops.r_p())).cwiseAbs().maxCoeff() > 1e-8)
        bad.push_back("reduced pressure mass differs from the identity");
    auto check_spsd = [&](const Eigen::MatrixXd& m, const char* name) {
        if (m.size() == 0) return;
        const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
        if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) bad.push_back(std::string(name) + " is not symmetric");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() < -1e-10 * scale) bad.push_back(std::string(name) + " is not semidefinite");
    };
    check_spsd(ops.stiff_u, "reduced velocity stiffness");
    check_spsd(ops.stiff_p, "reduced pressure stiffness");
    check_spsd(ops.nudge_u.N, "velocity nudging matrix");
    check_spsd(ops.nudge_p.N, "pressure nudging matrix");
    for (std::size_t k = 0; k < ops.convection.size(); ++k) {
        const auto& t = ops.convection[k];
        const double scale = std::max(1.0, t.cwiseAbs().maxCoeff());
        if ((t + t.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
            bad.push_back("convection slice " + std::to_string(k) + " is not skew-symmetric");
    }
    return bad;
}

ROMState initial_rom_state(const PODBasis& basis, const SparseMatrix& mass_u, const SparseMatrix& mass_p,
                           const SnapshotSet& truth, double t0, double dt) {
    auto column = [&](double t) {
        double offset = 0.0;
        const auto j = truth.nearest(t, &offset);
        if (std::abs(offset) > 1e-9 * std::max(1.0, std::abs(t)))
            throw ParameterError("truth trajectory has no state at t = " + std::to_string(t));
        return static_cast<Eigen::Index>(j);
    };
    const auto j0 = column(t0);
    const auto jm = column(t0 - dt);
    ROMState s;
    s.a = project(basis.phi, mass_u, Eigen::VectorXd(truth.velocity.col(j0)));
    s.b = project(basis.psi, mass_p, Eigen::VectorXd(truth.pressure.col(j0)));
    s.b_prev = project(basis.psi, mass_p, Eigen::VectorXd(truth.pressure.col(jm)));
    s.t = t0;
    return s;
}

RomStepper::RomStepper(const ROMOperators& ops, ROMParameters params) : ops_(ops), params_(params) {
    if (!(params_.dt > 0.0)) throw ParameterError("time step must be positive");
    if (!(params_.nu > 0.0)) throw ParameterError("viscosity must be positive");
    if (params_.gamma_u < 0.0 || params_.gamma_p < 0.0) throw ParameterError("nudging gains must be nonnegative");
    if ((params_.gamma_u > 0.0 || params_.gamma_p > 0.0) && !ops_.has_nudging())
        throw ParameterError("nudging gains need an observation operator");
    pressure_matrix_ = params_.dt * ops_.stiff_p;
    if (ops_.has_nudging()) pressure_matrix_ += params_.gamma_p * ops_.nudge_p.N;
    if (pressure_matrix_.size() > 0) {
        pressure_cod_.compute(pressure_matrix_);
        pseudo_inverse_ = pressure_cod_.rank() < pressure_matrix_.rows();
        if (!pseudo_inverse_) pressure_lu_.compute(pressure_matrix_);
    }
}

ROMState RomStepper::step(const ROMState& s, const StepObservation& obs) const {
    const int ru = ops_.r_u();
    const double dt = params_.dt;
    const bool nudged = obs.velocity != nullptr || obs.pressure != nullptr;
    if (nudged && (!obs.velocity || !obs.pressure)) throw ParameterError("observations must cover velocity and pressure");
    if (nudged && !ops_.has_nudging()) throw ParameterError("observations given but no nudging operators");
    if (!nudged && (params_.gamma_u > 0.0 || params_.gamma_p > 0.0))
        throw ParameterError("positive nudging gains need observations at every step");

    const double t1 = s.t + dt;
    Eigen::MatrixXd k = ops_.mass_u / dt + params_.nu * ops_.stiff_u;
    for (int j = 0; j < ru; ++j) k += s.a[j] * ops_.convection[j];
    if (nudged) k += params_.gamma_u * ops_.nudge_u.N;

    Eigen::VectorXd rhs = ops_.mass_u * s.a / dt - ops_.grad * (2.0 * s.b - s.b_prev);
    if (ops_.forcing) rhs += ops_.forcing(t1);
    if (nudged) rhs += params_.gamma_u * (ops_.nudge_u.G * *obs.velocity);

    ROMState out;
    if (ru > 0) {
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(k);
        const double rcond = lu.rcond();
        if (!(rcond > 1e-14))
            throw NumericalError("reduced momentum matrix is singular (reciprocal condition " + std::to_string(rcond) +
                                     ") at t = " + std::to_string(t1),
                                 rcond);
        out.a = lu.solve(rhs);
    } else {
        out.a = Eigen::VectorXd::Zero(0);
    }

    Eigen::VectorXd prhs = dt * (ops_.stiff_p * s.b) - ops_.div * out.a;
    if (nudged) prhs += params_.gamma_p * (ops_.nudge_p.G * *obs.pressure);
    if (prhs.size() > 0)
        out.b = pseudo_inverse_ ? Eigen::VectorXd(pressure_cod_.solve(prhs)) : Eigen::VectorXd(pressure_lu_.solve(prhs));
    else
        out.b = Eigen::VectorXd::Zero(0);
    out.b_prev = s.b;
    out.t = t1;
    out.n = s.n + 1;
    if (!out.a.allFinite() || !out.b.allFinite())
        throw NumericalError("non-finite reduced state at t = " + std::to_string(t1));
    return out;
}

ROMTrajectory run_rom(const ROMOperators& ops, const ROMState& initial, const RomRunConfig& cfg,
                      const ObservationSeries* obs) {
    const long n_steps = step_count(cfg.t0, cfg.T, cfg.params.dt);
    const auto& prm = cfg.params;
    const bool gains = prm.gamma_u > 0.0 || prm.gamma_p > 0.0;
    if (gains && !obs) throw ParameterError("nudging gains are positive but no observations were supplied");
    if (initial.a.size() != ops.r_u() || initial.b.size() != ops.r_p() || initial.b_prev.size() != ops.r_p())
        throw ParameterError("initial reduced state does not match the operators");
    if (std::abs(initial.t - cfg.t0) > 1e-9 * std::max(1.0, std::abs(cfg.t0)))
        throw ParameterError("initial state time differs from the run start");

    const RomStepper stepper(ops, prm);
    ROMTrajectory tr;
    tr.gamma_u = prm.gamma_u;
    tr.gamma_p = prm.gamma_p;
    tr.dt = prm.dt;
    tr.pseudo_inverse = stepper.pressure_uses_pseudo_inverse();
    tr.a.resize(ops.r_u(), n_steps + 1);
    tr.b.resize(ops.r_p(), n_steps + 1);

    auto weighted_sq = [](const Eigen::VectorXd& w, const Eigen::VectorXd& v) {
        return (w.array() * v.array().square()).sum();
    };
    auto energy_state = [&](const ROMState& s) {
        return s.a.dot(ops.mass_u * s.a) + prm.dt * prm.dt * s.b.dot(ops.stiff_p * s.b);
    };

    ROMState s = initial;
    const Eigen::VectorXd db0 = s.b - s.b_prev;
    double bound = energy_state(s);
    if (ops.has_nudging()) bound += 0.5 * prm.dt * prm.gamma_p * db0.dot(ops.nudge_p.N * db0);
    double dissipation = 0.0;

    Eigen::VectorXd prev_p_obs;
    if (obs && ops.has_nudging()) prev_p_obs = obs->pressure.col(static_cast<Eigen::Index>(obs->index_of(cfg.t0)));

    tr.times.push_back(s.t);
    tr.a.col(0) = s.a;
    tr.b.col(0) = s.b;
    tr.energy.push_back(energy_state(s));
    tr.bound.push_back(bound);
    for (long n = 0; n < n_steps; ++n) {
        const double t1 = cfg.t0 + static_cast<double>(n + 1) * prm.dt;
        s.t = t1 - prm.dt;
        StepObservation so;
        Eigen::VectorXd yu, yp;
        if (obs && ops.has_nudging()) {
            const auto j = static_cast<Eigen::Index>(obs->index_of(t1));
            yu = obs->velocity.col(j);
            yp = obs->pressure.col(j);
            so.velocity = &yu;
            so.pressure = &yp;
        }
        s = stepper.step(s, so);
        s.t = t1;

        double increment = 0.0;
        if (cfg.forcing_norm_sq && cfg.poincare > 0.0)
            increment += cfg.poincare * cfg.poincare / prm.nu * cfg.forcing_norm_sq(t1);
        if (so.velocity) {
            const Eigen::VectorXd dp = yp - prev_p_obs;
            increment += 2.0 * prm.gamma_p * weighted_sq(ops.obs_weights_p, yp) +
                         2.0 * prm.gamma_p * weighted_sq(ops.obs_weights_p, dp) +
                         prm.gamma_u * weighted_sq(ops.obs_weights_u, yu);
            prev_p_obs = yp;
        }
        bound += prm.dt * increment;
        dissipation += prm.nu * prm.dt * s.a.dot(ops.stiff_u * s.a);

        tr.times.push_back(t1);
        tr.a.col(n + 1) = s.a;
        tr.b.col(n + 1) = s.b;
        tr.energy.push_back(energy_state(s) + dissipation);
        tr.bound.push_back(bound);
    }
    return tr;
}

QuantitySeries rom_quantities(const ROMTrajectory& traj, const PODBasis& basis, const BenchmarkFunctionals* functionals,
                              const SparseMatrix& mass_u, const SparseMatrix& mass_p, const SnapshotSet* truth) {
    if (traj.a.rows() != basis.r_u() || traj.b.rows() != basis.r_p())
        throw ParameterError("trajectory and POD basis have different mode counts");
    QuantitySeries q;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t n = 0; n < traj.size(); ++n) {
        const auto col = static_cast<Eigen::Index>(n);
        const Eigen::VectorXd u = basis.phi * traj.a.col(col);
        const Eigen::VectorXd p = basis.psi * traj.b.col(col);
        if (functionals) {
            const auto [cd, cl] = functionals->drag_lift(u, p);
            q.push(traj.times[n], cd, cl, functionals->kinetic_energy(u), functionals->pressure_difference(p));
        } else {
            q.push(traj.times[n], nan, nan, kinetic_energy(u, mass_u), nan);
        }
        if (truth) {
            double offset = 0.0;
            const auto j = static_cast<Eigen::Index>(truth->nearest(traj.times[n], &offset));
            if (std::abs(offset) > 1e-9 * std::max(1.0, std::abs(traj.times[n])))
                throw ParameterError("truth trajectory has no state at t = " + std::to_string(traj.times[n]));
            const Eigen::VectorXd du = u - truth->velocity.col(j);
            const Eigen::VectorXd dp = p - truth->pressure.col(j);
            const double nu_ref = std::sqrt(truth->velocity.col(j).dot(mass_u * truth->velocity.col(j)));
            const double np_ref = std::sqrt(truth->pressure.col(j).dot(mass_p * truth->pressure.col(j)));
            q.relerr_u.push_back(std::sqrt(du.dot(mass_u * du)) / nu_ref);
            q.relerr_p.push_back(std::sqrt(dp.dot(mass_p * dp)) / np_ref);
        }
    }
    return q;
}

namespace {
constexpr char trajectory_magic[8] = {'C', 'D', 'A', 'T', 'R', 'J', '1', '\0'};
}

void save_rom_trajectory(const ROMTrajectory& t, const std::filesystem::path& path) {
    detail::BinaryWriter w(path.string());
    w.magic(trajectory_magic);
    w.pod(t.config_hash);
    w.string(t.version);
    w.pod(static_cast<std::uint64_t>(t.a.rows()));
    w.pod(static_cast<std::uint64_t>(t.b.rows()));
    w.pod(static_cast<std::uint64_t>(t.size()));
    w.pod(t.gamma_u);
    w.pod(t.gamma_p);
    w.pod(t.dt);
    w.pod(static_cast<std::uint32_t>(t.pseudo_inverse ? 1 : 0));
    w.vector(t.times);
    w.matrix(t.a);
    w.matrix(t.b);
    w.vector(t.energy);
    w.vector(t.bound);
    w.finish();
}

ROMTrajectory load_rom_trajectory(const std::filesystem::path& path) {
    detail::BinaryReader r(path.string());
    r.expect_magic(trajectory_magic);
    ROMTrajectory t;
    t.config_hash = r.pod<std::uint64_t>();
    t.version = r.string();
    const auto ru = r.pod<std::uint64_t>();
    const auto rp = r.pod<std::uint64_t>();
    const auto n = r.pod<std::uint64_t>();
    if (ru > (1u << 16) || rp > (1u << 16) || n > (1ull << 32))
        throw ParseError("'" + path.string() + "' has implausible dimensions");
    t.gamma_u = r.pod<double>();
    t.gamma_p = r.pod<double>();
    t.dt = r.pod<double>();
    t.pseudo_inverse = r.pod<std::uint32_t>() != 0;
    t.times = r.vector(n);
    t.a = r.matrix(ru, n);
    t.b = r.matrix(rp, n);
    t.energy = r.vector(n);
    t.bound = r.vector(n);
    r.expect_end();
    return t;
}

}  // namespace cdarom
