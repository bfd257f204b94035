#pragma once

#include <Eigen/Core>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <functional>
#include <memory>
#include <vector>

#include "cdarom/fespace.hpp"

namespace cdarom {

using SparseMatrix = Eigen::SparseMatrix<double>;
using VectorField = std::function<Eigen::Vector2d(const Point&, double)>;

/// Sparsity pattern of a scalar space (all node pairs sharing a triangle) with the position
/// of every local (i,j) pair in the compressed value array. Lets operators on the same space
/// be combined value-by-value and reassembled without reallocating.
class ElementPattern {
public:
    explicit ElementPattern(const FESpace& space);

    /// Matrix with the full pattern and zero values.
    const SparseMatrix& zero_matrix() const noexcept { return zero_; }

    /// Adds a local nb-by-nb element matrix (row = test node, col = trial node).
    void scatter(SparseMatrix& m, std::size_t element, const double* local_row_major) const;

private:
    int nb_;
    SparseMatrix zero_;
    std::vector<int> positions_;
};

/// Per-element quadrature cache of a scalar space: weight*|J|, basis values, gradients.
class QuadratureCache {
public:
    explicit QuadratureCache(const FESpace& space);

    int num_points() const noexcept { return nq_; }
    int nodes_per_element() const noexcept { return nb_; }
    double weight(std::size_t e, int q) const { return weights_[e * nq_ + q]; }
    const double* values(std::size_t e, int q) const { return &values_[(e * nq_ + q) * nb_]; }
    const Eigen::Vector2d* gradients(std::size_t e, int q) const { return &grads_[(e * nq_ + q) * nb_]; }
    const Point& point(std::size_t e, int q) const { return points_[e * nq_ + q]; }

private:
    int nq_;
    int nb_;
    std::vector<double> weights_;
    std::vector<double> values_;
    std::vector<Eigen::Vector2d> grads_;
    std::vector<Point> points_;
};

/// Scalar blocks repeated along the diagonal (one per component).
SparseMatrix block_diagonal(const SparseMatrix& scalar, int components);

/// L2 mass matrix of the space; block diagonal for vector spaces.
SparseMatrix assemble_mass(const FESpace& space);
/// (grad u, grad v) without viscosity; block diagonal for vector spaces.
SparseMatrix assemble_stiffness(const FESpace& space);
/// Entry (i, j) = (q_i, div v_j) for pressure basis q_i and velocity basis v_j.
SparseMatrix assemble_divergence(const FESpace& velocity, const FESpace& pressure);

/// Skew-symmetric convection: entry (i, j) = b(w, phi_j, phi_i) with
/// b(w, u, v) = 1/2 (w.grad u, v) - 1/2 (w.grad v, u). `w` holds 2-component coefficients on
/// the scalar nodes of `space`; the result is block diagonal when `space` is a vector space.
SparseMatrix assemble_convection(const FESpace& space, const Eigen::VectorXd& w);

/// Reassembles scalar convection matrices on a fixed pattern.
class ConvectionAssembler {
public:
    ConvectionAssembler(std::shared_ptr<const FESpace> scalar_space, std::shared_ptr<const ElementPattern> pattern,
                        std::shared_ptr<const QuadratureCache> cache);

    /// Scalar block of C(w) (same pattern as pattern->zero_matrix()).
    void assemble(const Eigen::VectorXd& w, SparseMatrix& out) const;

private:
    std::shared_ptr<const FESpace> space_;
    std::shared_ptr<const ElementPattern> pattern_;
    std::shared_ptr<const QuadratureCache> cache_;
};

/// Load vector (f, v) for a vector space.
Eigen::VectorXd assemble_load(const FESpace& space, const VectorField& f, double t);

/// b(u, v, w) in the skew-symmetric form, by quadrature.
double trilinear_skew(const FESpace& space, const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                      const Eigen::VectorXd& w);
/// The equivalent form (u.grad v, w) + 1/2 ((div u) v, w) by quadrature (equals the skew form
/// when w vanishes on the boundary).
double trilinear_divergence_form(const FESpace& space, const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                                 const Eigen::VectorXd& w);

/// Essential boundary conditions by symmetric elimination: K_FF x_F = b_F - K_FD g_D.
class DirichletReducer {
public:
    /// `dofs` may contain duplicates only if their values agree when applied.
    DirichletReducer(std::size_t n, std::vector<int> dofs);

    std::size_t full_size() const noexcept { return n_; }
    std::size_t free_size() const noexcept { return free_.size(); }
    const std::vector<int>& constrained() const noexcept { return constrained_; }
    const std::vector<int>& free_dofs() const noexcept { return free_; }
    bool is_constrained(int dof) const { return free_index_[dof] < 0; }

    /// Reduced matrix K_FF.
    SparseMatrix reduce_matrix(const SparseMatrix& k) const;
    /// b_F - K_FD g (g is a full-length vector, only its constrained entries are read).
    Eigen::VectorXd reduce_rhs(const SparseMatrix& k, const Eigen::VectorXd& b, const Eigen::VectorXd& g) const;
    /// Full vector with free entries from x_free and constrained entries from g.
    Eigen::VectorXd expand(const Eigen::VectorXd& x_free, const Eigen::VectorXd& g) const;

private:
    std::size_t n_;
    std::vector<int> constrained_;
    std::vector<int> free_;
    std::vector<int> free_index_;
};

/// Applies (dof, value) constraints to K x = b and solves. Throws ParameterError when a dof is
/// out of range or constrained twice with different values.
Eigen::VectorXd solve_with_dirichlet(const SparseMatrix& k, const Eigen::VectorXd& b,
                                     const std::vector<std::pair<int, double>>& constraints);

enum class SolverKind { sparse_direct, krylov };

struct LinearSolverOptions {
    SolverKind kind = SolverKind::sparse_direct;
    double tolerance = 1e-10;  ///< relative residual
    int max_iterations = 20000;
};

/// Conjugate gradient with diagonal preconditioning; throws NumericalError on non-convergence.
Eigen::VectorXd solve_spd(const SparseMatrix& a, const Eigen::VectorXd& b, const LinearSolverOptions& opt = {});

/// Factor-once solver for a general sparse matrix (sparse LU, or BiCGSTAB with ILUT).
class GeneralSolver {
public:
    explicit GeneralSolver(LinearSolverOptions opt = {}) : opt_(opt) {}
    void factorize(const SparseMatrix& a);
    Eigen::VectorXd solve(const Eigen::VectorXd& b) const;

private:
    LinearSolverOptions opt_;
    const SparseMatrix* matrix_ = nullptr;
    SparseMatrix owned_;
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
    bool pattern_analyzed_ = false;
    std::unique_ptr<Eigen::BiCGSTAB<SparseMatrix, Eigen::IncompleteLUT<double>>> krylov_;
};

}  // namespace cdarom
