#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cdarom/assembly.hpp"
#include "cdarom/fespace.hpp"
#include "cdarom/mesh.hpp"

namespace cdarom {

class BenchmarkFunctionals;

/// Taylor-Hood P2/P1 discretization of one incompressible flow problem.
struct FlowProblem {
    std::shared_ptr<const Mesh> mesh;
    std::shared_ptr<const FESpace> velocity;  ///< P2, 2 components
    std::shared_ptr<const FESpace> pressure;  ///< P1, scalar
    double nu = 1e-3;
    VectorField forcing;            ///< empty means f = 0
    VectorField boundary_velocity;  ///< prescribed on every Dirichlet node
    std::vector<BoundaryMarker> dirichlet_markers;
};

enum class OutflowMode { dirichlet, do_nothing };

/// Parabolic profile 4 peak y (0.41 - y) / 0.41^2 in x; peak 0.3 gives 0.41^-2 (1.2 y (0.41 - y), 0).
Eigen::Vector2d channel_inflow_profile(double y, double peak = 0.3);

struct ChannelOptions {
    OutflowMode outflow = OutflowMode::dirichlet;
    double ramp_time = 0.0;   ///< boundary data scaled by min(t/ramp_time, 1) when positive
    double inflow_peak = 1.5; ///< mean inflow 2/3 peak; 1.5 gives U = 1, Re = 100 at nu = 1e-3
};

/// Flow past the cylinder: the parabolic profile on the inflow (and, in `dirichlet` outflow
/// mode, on the outflow) boundary, no-slip on walls and cylinder, f = 0.
FlowProblem make_channel_problem(std::shared_ptr<const Mesh> mesh, double nu, ChannelOptions opt = {});

/// Problem with Dirichlet data g on every boundary edge.
FlowProblem make_enclosed_problem(std::shared_ptr<const Mesh> mesh, double nu, VectorField g, VectorField forcing);

struct FOMState {
    Eigen::VectorXd u;       ///< velocity coefficients at t
    Eigen::VectorXd p;       ///< pressure at t
    Eigen::VectorXd p_prev;  ///< pressure at t - dt
    double t = 0.0;
    long n = 0;
};

/// Terms of the discrete energy ||u||^2 + dt^2 ||grad p||^2 + nu dt sum ||grad u||^2.
struct EnergyTerms {
    double u_l2_sq = 0.0;
    double grad_p_sq = 0.0;
    double grad_u_sq = 0.0;
};

/// BDF1 pressure-correction stepper:
///   (u1 - u0)/dt + nu A u1 + C(u0) u1 + grad(2 p0 - p_prev) = f(t1)   (Dirichlet data at t1)
///   (div u1, q) + dt (grad(p1 - p0), grad q) = 0,  mean(p1 - p0) = 0
class FomSolver {
public:
    FomSolver(FlowProblem problem, double dt, LinearSolverOptions solver = {});

    const FlowProblem& problem() const noexcept { return problem_; }
    double dt() const noexcept { return dt_; }

    /// Zero velocity and pressure at time t0.
    FOMState rest_state(double t0) const;
    /// Interpolated initial data with p_prev = p (pressure shifted to zero mean).
    FOMState interpolated_state(const VectorField& u0, const std::function<double(const Point&)>& p0, double t0) const;

    /// One time step; throws NumericalError on solver failure or non-finite values.
    FOMState step(const FOMState& s);

    EnergyTerms energy(const FOMState& s) const;

    const SparseMatrix& velocity_mass() const noexcept { return mass_u_; }
    const SparseMatrix& velocity_stiffness() const noexcept { return stiff_u_; }
    const SparseMatrix& divergence() const noexcept { return div_; }
    const SparseMatrix& pressure_mass() const noexcept { return mass_p_; }
    const SparseMatrix& pressure_stiffness() const noexcept { return stiff_p_; }
    /// Entries (1, q_i), so that mean(p) * |Omega| = weights . p.
    const Eigen::VectorXd& pressure_integrals() const noexcept { return p_integrals_; }
    double domain_area() const noexcept { return area_; }

private:
    Eigen::VectorXd boundary_values(double t) const;  // scalar-node values, component-major

    FlowProblem problem_;
    double dt_;
    LinearSolverOptions solver_opt_;

    std::shared_ptr<const FESpace> scalar_velocity_;
    std::shared_ptr<const ElementPattern> pattern_;
    std::shared_ptr<const QuadratureCache> cache_;
    std::unique_ptr<ConvectionAssembler> convection_;
    SparseMatrix mass_s_, stiff_s_, conv_s_, momentum_s_;
    SparseMatrix mass_u_, stiff_u_, div_, div_t_, mass_p_, stiff_p_;
    Eigen::VectorXd p_integrals_;
    double area_ = 0.0;
    std::vector<int> dirichlet_nodes_;
    std::unique_ptr<DirichletReducer> reducer_;
    GeneralSolver momentum_solver_;
    GeneralSolver pressure_solver_;
};

struct SnapshotMetadata {
    std::uint64_t mesh_hash = 0;
    std::uint64_t config_hash = 0;
    std::string version;
    double dt = 0.0;
    double nu = 0.0;
    double window_start = 0.0;
    double window_end = 0.0;
    std::uint32_t stride = 1;
    bool dq_augmented = false;
};

/// Time-stamped velocity/pressure coefficient columns.
struct SnapshotSet {
    std::vector<double> times;
    Eigen::MatrixXd velocity;  ///< n_u x M
    Eigen::MatrixXd pressure;  ///< n_p x M
    SnapshotMetadata meta;

    std::size_t size() const noexcept { return times.size(); }
    /// Columns with t0 - eps <= t <= t1 + eps.
    SnapshotSet slice(double t0, double t1) const;
    /// Column whose time is nearest to t; `offset` receives stored_time - t.
    std::size_t nearest(double t, double* offset = nullptr) const;
    void append(double t, const Eigen::VectorXd& u, const Eigen::VectorXd& p);
};

void save_snapshots(const SnapshotSet& s, const std::filesystem::path& path);
SnapshotSet load_snapshots(const std::filesystem::path& path);

struct FomRunConfig {
    double t0 = 0.0;
    double T = 1.0;
    double dt = 1e-3;
    double record_start = 0.0;  ///< snapshot window, inclusive
    double record_end = 1.0;
    int stride = 1;
    LinearSolverOptions solver;
    std::function<void(const FOMState&)> observer;  ///< called at every time level, including t0
};

/// Per-step benchmark quantities; columns not applicable to a problem hold NaN.
struct QuantitySeries {
    std::vector<double> t, c_d, c_l, e_kin, dp;
    std::vector<double> relerr_u, relerr_p;  ///< filled by comparison against a reference
    void push(double time, double cd, double cl, double ek, double pd);
    std::size_t size() const noexcept { return t.size(); }
};

struct FomRunResult {
    SnapshotSet snapshots;
    QuantitySeries quantities;
    FOMState final_state;
    std::vector<double> energy;  ///< discrete energy monitor per time level (index 0 = initial)
};

/// Number of steps in [t0, T]; throws ParameterError unless (T - t0)/dt is integral.
long step_count(double t0, double T, double dt);

/// Runs from `initial` to cfg.T, recording snapshots on the window and quantities every step.
/// `functionals` may be null (only kinetic energy is then reported).
FomRunResult run_fom(FomSolver& solver, const FOMState& initial, const FomRunConfig& cfg,
                     const BenchmarkFunctionals* functionals = nullptr);

/// Analytic solution used for manufactured-solution tests.
struct ExactSolution {
    VectorField u;
    std::function<Eigen::Matrix2d(const Point&, double)> grad_u;  ///< (r, c) = d u_r / d x_c
    std::function<double(const Point&, double)> p;
    VectorField forcing;
};

/// Steady divergence-free field u = (sin^2(pi x) sin(2 pi y), -sin(2 pi x) sin^2(pi y)),
/// p = cos(pi x) cos(pi y) on the unit square, with the matching Navier-Stokes forcing.
/// u vanishes on the boundary of [0,1]^2.
ExactSolution stationary_vortex_solution(double nu);

struct ErrorReport {
    double l2_u = 0.0;  ///< max over steps of ||u - u_h||
    double h1_u = 0.0;  ///< max over steps of ||grad(u - u_h)||
    double l2_p = 0.0;  ///< max over steps of ||p - p_h|| after removing means
    long steps = 0;
};

/// Runs the scheme from the interpolated exact state on [t0, T] with Dirichlet data from the
/// exact velocity and reports max-in-time errors.
ErrorReport manufactured_error(std::shared_ptr<const Mesh> mesh, double nu, const ExactSolution& exact, double dt,
                               double t0, double T);

/// Error norms of a discrete state against an analytic one at time t.
ErrorReport state_error(const FESpace& velocity, const FESpace& pressure, const Eigen::VectorXd& u,
                        const Eigen::VectorXd& p, const ExactSolution& exact, double t);

}  // namespace cdarom
