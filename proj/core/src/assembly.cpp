#include "cdarom/assembly.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <algorithm>
#include <cmath>
#include <map>

#include "cdarom/error.hpp"

namespace cdarom {

// ---------------------------------------------------------------------------
// Pattern and quadrature cache

ElementPattern::ElementPattern(const FESpace& space) : nb_(space.nodes_per_element()) {
    const auto n = static_cast<Eigen::Index>(space.num_nodes());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(space.num_elements() * nb_ * nb_);
    for (std::size_t e = 0; e < space.num_elements(); ++e) {
        const auto ln = space.element_nodes(e);
        for (int i = 0; i < nb_; ++i)
            for (int j = 0; j < nb_; ++j) trip.emplace_back(ln[i], ln[j], 0.0);
    }
    zero_.resize(n, n);
    zero_.setFromTriplets(trip.begin(), trip.end());
    zero_.makeCompressed();

    positions_.resize(space.num_elements() * nb_ * nb_);
    const int* outer = zero_.outerIndexPtr();
    const int* inner = zero_.innerIndexPtr();
    for (std::size_t e = 0; e < space.num_elements(); ++e) {
        const auto ln = space.element_nodes(e);
        for (int i = 0; i < nb_; ++i)
            for (int j = 0; j < nb_; ++j) {
                const int col = ln[j];
                const int* first = inner + outer[col];
                const int* last = inner + outer[col + 1];
                const int* it = std::lower_bound(first, last, ln[i]);
                positions_[(e * nb_ + i) * nb_ + j] = static_cast<int>(it - inner);
            }
    }
}

void ElementPattern::scatter(SparseMatrix& m, std::size_t element, const double* local) const {
    double* values = m.valuePtr();
    const int* pos = &positions_[element * nb_ * nb_];
    for (int k = 0; k < nb_ * nb_; ++k) values[pos[k]] += local[k];
}

QuadratureCache::QuadratureCache(const FESpace& space)
    : nq_(static_cast<int>(quadrature_order5().weights.size())), nb_(space.nodes_per_element()) {
    const auto& rule = quadrature_order5();
    const std::size_t ne = space.num_elements();
    weights_.resize(ne * nq_);
    values_.resize(ne * nq_ * nb_);
    grads_.resize(ne * nq_ * nb_);
    points_.resize(ne * nq_);
    std::array<double, 6> vals{};
    std::array<Eigen::Vector2d, 6> rg;
    for (std::size_t e = 0; e < ne; ++e) {
        const auto& g = space.geometry(e);
        for (int q = 0; q < nq_; ++q) {
            const double xi = rule.barycentric[q][1], eta = rule.barycentric[q][2];
            reference_basis(space.degree(), xi, eta, std::span(vals.data(), nb_), std::span(rg.data(), nb_));
            weights_[e * nq_ + q] = rule.weights[q] * std::abs(g.jac_det);
            points_[e * nq_ + q] = g.map(xi, eta);
            for (int i = 0; i < nb_; ++i) {
                values_[(e * nq_ + q) * nb_ + i] = vals[i];
                grads_[(e * nq_ + q) * nb_ + i] = g.inv_jac_t * rg[i];
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Generic operators

SparseMatrix block_diagonal(const SparseMatrix& scalar, int components) {
    if (components == 1) return scalar;
    const Eigen::Index n = scalar.rows();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(scalar.nonZeros() * components);
    for (int c = 0; c < components; ++c)
        for (Eigen::Index k = 0; k < scalar.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(scalar, k); it; ++it)
                trip.emplace_back(c * n + it.row(), c * n + it.col(), it.value());
    SparseMatrix out(n * components, scalar.cols() * components);
    out.setFromTriplets(trip.begin(), trip.end());
    out.makeCompressed();
    return out;
}

namespace {

template <class Kernel>
SparseMatrix assemble_scalar(const FESpace& space, Kernel&& kernel) {
    const ElementPattern pattern(space);
    const QuadratureCache cache(space);
    SparseMatrix m = pattern.zero_matrix();
    const int nb = space.nodes_per_element();
    std::array<double, 36> local{};
    for (std::size_t e = 0; e < space.num_elements(); ++e) {
        local.fill(0.0);
        for (int q = 0; q < cache.num_points(); ++q) kernel(cache, e, q, local.data(), nb);
        pattern.scatter(m, e, local.data());
    }
    return m;
}

}  // namespace

SparseMatrix assemble_mass(const FESpace& space) {
    const SparseMatrix s = assemble_scalar(space, [](const QuadratureCache& c, std::size_t e, int q, double* loc, int nb) {
        const double w = c.weight(e, q);
        const double* v = c.values(e, q);
        for (int i = 0; i < nb; ++i)
            for (int j = 0; j < nb; ++j) loc[i * nb + j] += w * v[i] * v[j];
    });
    return block_diagonal(s, space.components());
}

SparseMatrix assemble_stiffness(const FESpace& space) {
    const SparseMatrix s = assemble_scalar(space, [](const QuadratureCache& c, std::size_t e, int q, double* loc, int nb) {
        const double w = c.weight(e, q);
        const Eigen::Vector2d* g = c.gradients(e, q);
        for (int i = 0; i < nb; ++i)
            for (int j = 0; j < nb; ++j) loc[i * nb + j] += w * g[i].dot(g[j]);
    });
    return block_diagonal(s, space.components());
}

SparseMatrix assemble_divergence(const FESpace& velocity, const FESpace& pressure) {
    if (&velocity.mesh() != &pressure.mesh() && velocity.mesh().hash() != pressure.mesh().hash())
        throw ParameterError("assemble_divergence: spaces live on different meshes");
    if (velocity.components() != 2 || pressure.components() != 1)
        throw ParameterError("assemble_divergence: need a 2-component velocity and a scalar pressure space");
    const QuadratureCache vc(velocity);
    const QuadratureCache pc(pressure);
    const int nbv = velocity.nodes_per_element(), nbp = pressure.nodes_per_element();
    const int nv = static_cast<int>(velocity.num_nodes());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(velocity.num_elements() * nbv * nbp * 2);
    for (std::size_t e = 0; e < velocity.num_elements(); ++e) {
        const auto lv = velocity.element_nodes(e);
        const auto lp = pressure.element_nodes(e);
        for (int q = 0; q < vc.num_points(); ++q) {
            const double w = vc.weight(e, q);
            const double* qv = pc.values(e, q);
            const Eigen::Vector2d* g = vc.gradients(e, q);
            for (int i = 0; i < nbp; ++i)
                for (int j = 0; j < nbv; ++j) {
                    trip.emplace_back(lp[i], lv[j], w * qv[i] * g[j][0]);
                    trip.emplace_back(lp[i], nv + lv[j], w * qv[i] * g[j][1]);
                }
        }
    }
    SparseMatrix b(static_cast<Eigen::Index>(pressure.num_nodes()), static_cast<Eigen::Index>(velocity.dof_count()));
    b.setFromTriplets(trip.begin(), trip.end());
    b.makeCompressed();
    return b;
}

ConvectionAssembler::ConvectionAssembler(std::shared_ptr<const FESpace> scalar_space,
                                         std::shared_ptr<const ElementPattern> pattern,
                                         std::shared_ptr<const QuadratureCache> cache)
    : space_(std::move(scalar_space)), pattern_(std::move(pattern)), cache_(std::move(cache)) {}

void ConvectionAssembler::assemble(const Eigen::VectorXd& w, SparseMatrix& out) const {
    const auto& space = *space_;
    const int nb = space.nodes_per_element();
    const Eigen::Index nn = static_cast<Eigen::Index>(space.num_nodes());
    if (w.size() != 2 * nn) throw ParameterError("convection: advecting field has wrong size");
    out = pattern_->zero_matrix();
    std::array<double, 36> local{};
    std::array<double, 6> adv{};
    for (std::size_t e = 0; e < space.num_elements(); ++e) {
        local.fill(0.0);
        const auto ln = space.element_nodes(e);
        for (int q = 0; q < cache_->num_points(); ++q) {
            const double wq = cache_->weight(e, q);
            const double* v = cache_->values(e, q);
            const Eigen::Vector2d* g = cache_->gradients(e, q);
            double wx = 0.0, wy = 0.0;
            for (int k = 0; k < nb; ++k) {
                wx += w[ln[k]] * v[k];
                wy += w[nn + ln[k]] * v[k];
            }
            for (int k = 0; k < nb; ++k) adv[k] = wx * g[k][0] + wy * g[k][1];
            for (int i = 0; i < nb; ++i)
                for (int j = 0; j < nb; ++j) local[i * nb + j] += 0.5 * wq * (adv[j] * v[i] - adv[i] * v[j]);
        }
        pattern_->scatter(out, e, local.data());
    }
}

SparseMatrix assemble_convection(const FESpace& space, const Eigen::VectorXd& w) {
    auto scalar = std::make_shared<FESpace>(space.mesh_ptr(), space.degree(), 1);
    auto pattern = std::make_shared<ElementPattern>(*scalar);
    auto cache = std::make_shared<QuadratureCache>(*scalar);
    SparseMatrix c;
    ConvectionAssembler(scalar, pattern, cache).assemble(w, c);
    return block_diagonal(c, space.components());
}

Eigen::VectorXd assemble_load(const FESpace& space, const VectorField& f, double t) {
    const QuadratureCache cache(space);
    const int nb = space.nodes_per_element();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space.dof_count()));
    for (std::size_t e = 0; e < space.num_elements(); ++e) {
        const auto ln = space.element_nodes(e);
        for (int q = 0; q < cache.num_points(); ++q) {
            const Eigen::Vector2d fv = f(cache.point(e, q), t);
            const double w = cache.weight(e, q);
            const double* v = cache.values(e, q);
            for (int i = 0; i < nb; ++i)
                for (int c = 0; c < space.components(); ++c) out[space.dof(ln[i], c)] += w * fv[c] * v[i];
        }
    }
    return out;
}

namespace {

struct PointFields {
    Eigen::Vector2d val;
    Eigen::Matrix2d grad;  // grad(r, c) = d val_r / d x_c
};

PointFields eval_field(const FESpace& s, std::span<const int> ln, const double* v, const Eigen::Vector2d* g,
                       const Eigen::VectorXd& coef) {
    PointFields out{Eigen::Vector2d::Zero(), Eigen::Matrix2d::Zero()};
    const int nn = static_cast<int>(s.num_nodes());
    for (std::size_t k = 0; k < ln.size(); ++k)
        for (int c = 0; c < 2; ++c) {
            const double a = coef[c * nn + ln[k]];
            out.val[c] += a * v[k];
            out.grad.row(c) += a * g[k].transpose();
        }
    return out;
}

template <class Integrand>
double integrate_triple(const FESpace& space, const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                        const Eigen::VectorXd& w, Integrand&& f) {
    const QuadratureCache cache(space);
    double sum = 0.0;
    for (std::size_t e = 0; e < space.num_elements(); ++e) {
        const auto ln = space.element_nodes(e);
        for (int q = 0; q < cache.num_points(); ++q) {
            const auto* vals = cache.values(e, q);
            const auto* grads = cache.gradients(e, q);
            sum += cache.weight(e, q) * f(eval_field(space, ln, vals, grads, u), eval_field(space, ln, vals, grads, v),
                                          eval_field(space, ln, vals, grads, w));
        }
    }
    return sum;
}

}  // namespace

double trilinear_skew(const FESpace& space, const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                      const Eigen::VectorXd& w) {
    return integrate_triple(space, u, v, w, [](const PointFields& a, const PointFields& b, const PointFields& c) {
        return 0.5 * (b.grad * a.val).dot(c.val) - 0.5 * (c.grad * a.val).dot(b.val);
    });
}

double trilinear_divergence_form(const FESpace& space, const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                                 const Eigen::VectorXd& w) {
    return integrate_triple(space, u, v, w, [](const PointFields& a, const PointFields& b, const PointFields& c) {
        return (b.grad * a.val).dot(c.val) + 0.5 * a.grad.trace() * b.val.dot(c.val);
    });
}

// ---------------------------------------------------------------------------
// Dirichlet elimination

DirichletReducer::DirichletReducer(std::size_t n, std::vector<int> dofs) : n_(n), free_index_(n, 0) {
    std::sort(dofs.begin(), dofs.end());
    dofs.erase(std::unique(dofs.begin(), dofs.end()), dofs.end());
    for (int d : dofs) {
        if (d < 0 || static_cast<std::size_t>(d) >= n)
            throw ParameterError("Dirichlet dof " + std::to_string(d) + " out of range");
        free_index_[d] = -1;
    }
    constrained_ = std::move(dofs);
    for (std::size_t i = 0; i < n; ++i)
        if (free_index_[i] == 0) {
            free_index_[i] = static_cast<int>(free_.size());
            free_.push_back(static_cast<int>(i));
        }
}

SparseMatrix DirichletReducer::reduce_matrix(const SparseMatrix& k) const {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(k.nonZeros());
    for (Eigen::Index col = 0; col < k.outerSize(); ++col) {
        const int fc = free_index_[col];
        if (fc < 0) continue;
        for (SparseMatrix::InnerIterator it(k, col); it; ++it) {
            const int fr = free_index_[it.row()];
            if (fr >= 0) trip.emplace_back(fr, fc, it.value());
        }
    }
    const auto nf = static_cast<Eigen::Index>(free_.size());
    SparseMatrix out(nf, nf);
    out.setFromTriplets(trip.begin(), trip.end());
    out.makeCompressed();
    return out;
}

Eigen::VectorXd DirichletReducer::reduce_rhs(const SparseMatrix& k, const Eigen::VectorXd& b,
                                             const Eigen::VectorXd& g) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(free_.size()));
    for (std::size_t i = 0; i < free_.size(); ++i) out[i] = b[free_[i]];
    for (int col : constrained_) {
        const double gv = g[col];
        if (gv == 0.0) continue;
        for (SparseMatrix::InnerIterator it(k, col); it; ++it) {
            const int fr = free_index_[it.row()];
            if (fr >= 0) out[fr] -= it.value() * gv;
        }
    }
    return out;
}

Eigen::VectorXd DirichletReducer::expand(const Eigen::VectorXd& x_free, const Eigen::VectorXd& g) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(n_));
    for (int d : constrained_) out[d] = g[d];
    for (std::size_t i = 0; i < free_.size(); ++i) out[free_[i]] = x_free[i];
    return out;
}

Eigen::VectorXd solve_with_dirichlet(const SparseMatrix& k, const Eigen::VectorXd& b,
                                     const std::vector<std::pair<int, double>>& constraints) {
    const auto n = static_cast<std::size_t>(k.rows());
    std::map<int, double> value;
    for (const auto& [d, v] : constraints) {
        if (d < 0 || static_cast<std::size_t>(d) >= n)
            throw ParameterError("constraint on dof " + std::to_string(d) + " out of range");
        const auto [it, inserted] = value.emplace(d, v);
        if (!inserted && it->second != v)
            throw ParameterError("inconsistent constraint on dof " + std::to_string(d));
    }
    std::vector<int> dofs;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(k.rows());
    for (const auto& [d, v] : value) {
        dofs.push_back(d);
        g[d] = v;
    }
    const DirichletReducer red(n, dofs);
    if (red.free_size() == 0) return g;
    GeneralSolver solver;
    const SparseMatrix kff = red.reduce_matrix(k);
    solver.factorize(kff);
    return red.expand(solver.solve(red.reduce_rhs(k, b, g)), g);
}

// ---------------------------------------------------------------------------
// Solvers

Eigen::VectorXd solve_spd(const SparseMatrix& a, const Eigen::VectorXd& b, const LinearSolverOptions& opt) {
    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
    cg.setTolerance(opt.tolerance);
    cg.setMaxIterations(opt.max_iterations);
    cg.compute(a);
    Eigen::VectorXd x = cg.solve(b);
    if (cg.info() != Eigen::Success)
        throw NumericalError("conjugate gradient did not converge", cg.error());
    return x;
}

void GeneralSolver::factorize(const SparseMatrix& a) {
    if (opt_.kind == SolverKind::krylov) {
        owned_ = a;
        krylov_ = std::make_unique<Eigen::BiCGSTAB<SparseMatrix, Eigen::IncompleteLUT<double>>>();
        krylov_->setTolerance(opt_.tolerance);
        krylov_->setMaxIterations(opt_.max_iterations);
        krylov_->compute(owned_);
        if (krylov_->info() != Eigen::Success) throw NumericalError("ILUT preconditioner setup failed");
        matrix_ = &owned_;
        return;
    }
    owned_ = a;
    owned_.makeCompressed();
    if (!pattern_analyzed_ || lu_.rows() != owned_.rows()) {
        lu_.analyzePattern(owned_);
        pattern_analyzed_ = true;
    }
    lu_.factorize(owned_);
    if (lu_.info() != Eigen::Success) {
        // The pattern may have changed since the last analysis.
        lu_.analyzePattern(owned_);
        lu_.factorize(owned_);
        if (lu_.info() != Eigen::Success) throw NumericalError("sparse LU factorization failed: " + lu_.lastErrorMessage());
    }
    matrix_ = &owned_;
}

Eigen::VectorXd GeneralSolver::solve(const Eigen::VectorXd& b) const {
    if (!matrix_) throw NumericalError("GeneralSolver::solve called before factorize");
    Eigen::VectorXd x;
    if (opt_.kind == SolverKind::krylov) {
        x = krylov_->solve(b);
        if (krylov_->info() != Eigen::Success) throw NumericalError("BiCGSTAB did not converge", krylov_->error());
        return x;
    }
    x = const_cast<Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>&>(lu_).solve(b);
    const double bn = b.norm();
    const double res = (*matrix_ * x - b).norm() / (bn > 0 ? bn : 1.0);
    if (!std::isfinite(res) || res > opt_.tolerance)
        throw NumericalError("sparse LU solve residual " + std::to_string(res) + " above tolerance", res);
    return x;
}

}  // namespace cdarom
