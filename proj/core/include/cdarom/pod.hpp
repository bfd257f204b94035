#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cdarom/assembly.hpp"
#include "cdarom/fom.hpp"

namespace cdarom {

enum class Field { velocity, pressure };

/// K = (1/M) S^T Mass S for the M snapshot columns of S.
Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& snapshots, const SparseMatrix& mass);
Eigen::MatrixXd correlation_matrix(const SnapshotSet& s, Field which, const SparseMatrix& mass);

/// POD of one field.
///
/// Computed from the thin SVD of L^T P S / sqrt(M), where P^T L L^T P is the sparse Cholesky
/// factorization of the mass matrix. The right singular vectors are the eigenvectors x_k of K
/// and lambda_k = sigma_k^2; the modes (1/sqrt(M lambda_k)) S x_k are obtained as
/// P^T L^-T u_k, which stays accurate for eigenvalues near the rank cut-off.
struct PODModes {
    std::vector<double> eigenvalues;  ///< all M values, descending, nonnegative
    int rank = 0;                     ///< d: count of lambda_i > rank_tol * lambda_1
    Eigen::MatrixXd eigenvectors;     ///< M x M, columns x_k (first nonzero entry positive)
    Eigen::MatrixXd modes;            ///< dof x r, M-orthonormal
    std::vector<double> grad_norms;   ///< ||grad mode_i|| when a stiffness matrix is supplied
};

/// Throws ParameterError when r exceeds the numerical rank (the message reports the rank).
PODModes pod_modes(const Eigen::MatrixXd& snapshots, const SparseMatrix& mass, int r, double rank_tol = 1e-12,
                   const SparseMatrix* stiffness = nullptr);

/// sum_{i<=r} lambda_i / sum_i lambda_i.
double captured_energy(const std::vector<double>& eigenvalues, int r);

/// sum_{i>r} lambda_i over every supplied eigenvalue.
double eigenvalue_tail(const std::vector<double>& eigenvalues, int r);

/// Appends the M-1 difference quotients (f^i - f^{i-1})/dt to both fields.
SnapshotSet augment_dq(const SnapshotSet& s, double dt);

/// Reduced coefficients modes^T Mass u (one column per field column).
Eigen::MatrixXd project(const Eigen::MatrixXd& modes, const SparseMatrix& mass, const Eigen::MatrixXd& fields);
Eigen::VectorXd project(const Eigen::MatrixXd& modes, const SparseMatrix& mass, const Eigen::VectorXd& field);
Eigen::VectorXd lift(const Eigen::MatrixXd& modes, const Eigen::VectorXd& reduced);

/// (1/M) sum_j ||s_j - Pi s_j||_Mass^2 for the first r modes.
double mean_projection_error(const Eigen::MatrixXd& snapshots, const Eigen::MatrixXd& modes,
                             const SparseMatrix& mass, int r);

struct PODOptions {
    int r_u = 8;
    int r_p = 8;
    double rank_tol = 1e-12;
    bool center = false;  ///< subtract the snapshot mean before the decomposition
};

/// Velocity and pressure POD spaces.
struct PODBasis {
    std::vector<double> lambda;  ///< velocity eigenvalues
    std::vector<double> theta;   ///< pressure eigenvalues
    int d_u = 0;
    int d_p = 0;
    Eigen::MatrixXd phi;  ///< n_u x r_u
    Eigen::MatrixXd psi;  ///< n_p x r_p
    std::vector<double> grad_phi, grad_psi;
    Eigen::VectorXd mean_u, mean_p;  ///< empty unless centered
    std::uint64_t mesh_hash = 0;
    std::uint64_t config_hash = 0;
    std::string version;

    int r_u() const noexcept { return static_cast<int>(phi.cols()); }
    int r_p() const noexcept { return static_cast<int>(psi.cols()); }
    bool centered() const noexcept { return mean_u.size() > 0; }
    /// Copy restricted to the leading modes.
    PODBasis truncated(int r_u, int r_p) const;
};

struct FieldMatrices {
    const SparseMatrix* mass_u = nullptr;
    const SparseMatrix* mass_p = nullptr;
    const SparseMatrix* stiff_u = nullptr;
    const SparseMatrix* stiff_p = nullptr;
};

PODBasis build_pod_basis(const SnapshotSet& s, const FieldMatrices& m, const PODOptions& opt);

void save_pod_basis(const PODBasis& b, const std::filesystem::path& path);
PODBasis load_pod_basis(const std::filesystem::path& path);

/// CSV `i,lambda,theta` (1-based index, empty cell past the shorter list).
void write_eigenvalue_csv(const PODBasis& b, const std::filesystem::path& path);

}  // namespace cdarom
