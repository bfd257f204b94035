#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cdarom/assembly.hpp"
#include "cdarom/cda.hpp"
#include "cdarom/fom.hpp"
#include "cdarom/pod.hpp"

namespace cdarom {

class BenchmarkFunctionals;

/// Galerkin projections of the full-order operators onto the POD spaces.
struct ROMOperators {
    Eigen::MatrixXd mass_u;  ///< Phi^T M_u Phi (identity up to round-off)
    Eigen::MatrixXd stiff_u; ///< Phi^T A_u Phi
    Eigen::MatrixXd mass_p;  ///< Psi^T M_p Psi
    Eigen::MatrixXd stiff_p; ///< Psi^T A_p Psi
    Eigen::MatrixXd div;     ///< Psi^T B Phi
    Eigen::MatrixXd grad;    ///< Phi^T (-B^T) Psi
    /// convection[k](i, j) = b(phi_k, phi_j, phi_i).
    std::vector<Eigen::MatrixXd> convection;
    NudgingMatrices nudge_u, nudge_p;        ///< empty when no observation operator was given
    Eigen::VectorXd obs_weights_u, obs_weights_p;
    std::function<Eigen::VectorXd(double)> forcing;  ///< Phi^T F(t); empty means zero

    int r_u() const noexcept { return static_cast<int>(mass_u.rows()); }
    int r_p() const noexcept { return static_cast<int>(mass_p.rows()); }
    bool has_nudging() const noexcept { return nudge_u.N.size() > 0 || nudge_p.N.size() > 0; }
};

/// Full-order ingredients of the projection.
struct FullOrderOperators {
    const FESpace* velocity = nullptr;
    const SparseMatrix* mass_u = nullptr;
    const SparseMatrix* stiff_u = nullptr;
    const SparseMatrix* mass_p = nullptr;
    const SparseMatrix* stiff_p = nullptr;
    const SparseMatrix* div = nullptr;
    VectorField forcing;  ///< empty means f = 0
};
FullOrderOperators full_order_operators(const FomSolver& fom);

/// Throws ParameterError on dimension mismatches or a centered basis. The observation
/// operators are optional; without them only the plain Galerkin model can be stepped.
ROMOperators build_rom_operators(const PODBasis& basis, const FullOrderOperators& fom,
                                 const ObservationOperator* velocity_obs = nullptr,
                                 const ObservationOperator* pressure_obs = nullptr);

/// Violations of M^ = I (1e-8), symmetric semidefinite A^_u and A^_p, and skew slices (1e-10).
std::vector<std::string> check_rom_operators(const ROMOperators& ops);

struct ROMState {
    Eigen::VectorXd a;       ///< velocity coefficients
    Eigen::VectorXd b;       ///< pressure coefficients
    Eigen::VectorXd b_prev;  ///< pressure coefficients one step back
    double t = 0.0;
    long n = 0;
};

/// Projections of the stored truth at t0 (and of the pressure at t0 - dt).
ROMState initial_rom_state(const PODBasis& basis, const SparseMatrix& mass_u, const SparseMatrix& mass_p,
                           const SnapshotSet& truth, double t0, double dt);

struct ROMParameters {
    double dt = 1e-3;
    double nu = 1e-3;
    double gamma_u = 0.0;
    double gamma_p = 0.0;
};

/// Observed truth at the new time level.
struct StepObservation {
    const Eigen::VectorXd* velocity = nullptr;
    const Eigen::VectorXd* pressure = nullptr;
};

/// CDA-Proj-POD-ROM stepper:
///   (M^/dt + nu A^_u + sum_k a_k T_k + g_u N_u) a' = M^ a/dt - G^(2b - b_prev) + f^ + g_u G_u y_u
///   (dt A^_p + g_p N_p) b' = dt A^_p b - B^ a' + g_p G_p y_p
/// Without observations the nudging terms are skipped, which is the plain G-POD-ROM. With
/// observations and zero gains every added term is an exact zero, so both paths agree bitwise.
class RomStepper {
public:
    RomStepper(const ROMOperators& ops, ROMParameters params);

    /// Throws NumericalError when the momentum matrix is singular (with a condition estimate).
    ROMState step(const ROMState& s, const StepObservation& obs = {}) const;

    /// True when the pressure matrix was singular and the pseudo-inverse is used.
    bool pressure_uses_pseudo_inverse() const noexcept { return pseudo_inverse_; }
    const ROMParameters& parameters() const noexcept { return params_; }

private:
    const ROMOperators& ops_;
    ROMParameters params_;
    Eigen::MatrixXd pressure_matrix_;
    Eigen::PartialPivLU<Eigen::MatrixXd> pressure_lu_;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> pressure_cod_;
    bool pseudo_inverse_ = false;
};

struct RomRunConfig {
    double t0 = 0.0;
    double T = 1.0;
    ROMParameters params;
    double poincare = 0.0;  ///< C_P in the forcing part of the energy bound
    /// ||f(t)||^2, used by the energy bound when the problem is forced.
    std::function<double(double)> forcing_norm_sq;
};

struct ROMTrajectory {
    std::vector<double> times;
    Eigen::MatrixXd a;  ///< r_u x steps+1
    Eigen::MatrixXd b;  ///< r_p x steps+1
    /// ||u_r||^2 + dt^2 ||grad p_r||^2 + nu dt sum ||grad u_r||^2 per time level.
    std::vector<double> energy;
    /// Right-hand side of the summed stability estimate per time level.
    std::vector<double> bound;
    double gamma_u = 0.0, gamma_p = 0.0, dt = 0.0;
    std::uint64_t config_hash = 0;
    std::string version;
    bool pseudo_inverse = false;

    std::size_t size() const noexcept { return times.size(); }
};

/// Steps from `initial` (at cfg.t0) to cfg.T. Observations are looked up at every new time
/// level and at t0; they are required when either gain is positive.
ROMTrajectory run_rom(const ROMOperators& ops, const ROMState& initial, const RomRunConfig& cfg,
                      const ObservationSeries* obs = nullptr);

/// Lifted quantity series; with a truth set the relative L2 errors are filled in as well.
QuantitySeries rom_quantities(const ROMTrajectory& traj, const PODBasis& basis, const BenchmarkFunctionals* functionals,
                              const SparseMatrix& mass_u, const SparseMatrix& mass_p,
                              const SnapshotSet* truth = nullptr);

void save_rom_trajectory(const ROMTrajectory& t, const std::filesystem::path& path);
ROMTrajectory load_rom_trajectory(const std::filesystem::path& path);

}  // namespace cdarom
