#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "cdarom/assembly.hpp"
#include "cdarom/error.hpp"
#include "support.hpp"

using namespace cdarom;
using testing_support::dense;

namespace {

std::shared_ptr<const Mesh> square(int n) {
    return std::make_shared<const Mesh>(generate_rectangle_mesh(0, 1, 0, 1, n, n));
}

}  // namespace

TEST(Mass, SymmetricPositiveDefinite) {
    auto m = square(3);
    for (int degree : {1, 2}) {
        const FESpace s(m, degree, degree == 2 ? 2 : 1);
        const Eigen::MatrixXd M = dense(assemble_mass(s));
        EXPECT_LE((M - M.transpose()).cwiseAbs().maxCoeff(), 1e-14 * M.cwiseAbs().maxCoeff());
        for (unsigned seed = 1; seed <= 20; ++seed) {
            const Eigen::VectorXd v = testing_support::random_vector(M.rows(), seed);
            EXPECT_GT(v.dot(M * v), 0.0);
        }
    }
}

TEST(Mass, TwoTriangleP1MatchesHandAssembly) {
    auto m = std::make_shared<const Mesh>(testing_support::two_triangle_square());
    const FESpace s(m, 1, 1);
    const Eigen::MatrixXd M = dense(assemble_mass(s));
    // Element mass (|T|/12) [2 1 1; 1 2 1; 1 1 2] with |T| = 1/2 on both triangles.
    Eigen::MatrixXd hand = Eigen::MatrixXd::Zero(4, 4);
    for (const auto& t : m->triangles())
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) hand(t[i], t[j]) += (i == j ? 2.0 : 1.0) * 0.5 / 12.0;
    EXPECT_LE((M - hand).cwiseAbs().maxCoeff(), 1e-15);
    // Row sums are one third of the vertex patch areas.
    for (int v = 0; v < 4; ++v) {
        double patch = 0.0;
        for (const auto& t : m->triangles())
            if (t[0] == v || t[1] == v || t[2] == v) patch += 0.5;
        EXPECT_NEAR(M.row(v).sum(), patch / 3.0, 1e-15);
    }
}

TEST(Mass, PressureMassMeasuresTheChannel) {
    auto m = std::make_shared<const Mesh>(generate_channel_mesh(0.05, 32));
    const FESpace p(m, 1, 1);
    const SparseMatrix M = assemble_mass(p);
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(M.rows());
    const double area = 2.2 * 0.41 - std::numbers::pi * 0.05 * 0.05;
    EXPECT_NEAR(one.dot(M * one) / area, 1.0, 1e-3);
}

TEST(Stiffness, ConstantsInTheKernelAndSymmetry) {
    auto m = square(3);
    const FESpace vel(m, 2, 2);
    const Eigen::MatrixXd A = dense(assemble_stiffness(vel));
    EXPECT_LE((A - A.transpose()).cwiseAbs().maxCoeff(), 1e-14 * A.cwiseAbs().maxCoeff());
    Eigen::VectorXd c(A.rows());
    c.head(A.rows() / 2).setConstant(0.7);
    c.tail(A.rows() / 2).setConstant(-1.3);
    EXPECT_NEAR(c.dot(A * c), 0.0, 1e-12);

    const FESpace pre(m, 1, 1);
    const Eigen::MatrixXd Ap = dense(assemble_stiffness(pre));
    EXPECT_LE((Ap * Eigen::VectorXd::Ones(Ap.cols())).cwiseAbs().maxCoeff(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Ap);
    EXPECT_GT(eig.eigenvalues().minCoeff(), -1e-12);
}

TEST(Divergence, AnnihilatesDivergenceFreeFields) {
    auto m = square(3);
    const FESpace vel(m, 2, 2), pre(m, 1, 1);
    const SparseMatrix B = assemble_divergence(vel, pre);
    ASSERT_EQ(B.rows(), static_cast<Eigen::Index>(pre.dof_count()));
    ASSERT_EQ(B.cols(), static_cast<Eigen::Index>(vel.dof_count()));
    const Eigen::VectorXd shear = vel.interpolate([](const Point& p, double) { return Eigen::Vector2d(p.y, 0.0); }, 0);
    EXPECT_LE((B * shear).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ((B * Eigen::VectorXd::Zero(B.cols())).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Divergence, UnitDivergenceGivesPressureMassRowSums) {
    auto m = square(4);
    const FESpace vel(m, 2, 2), pre(m, 1, 1);
    const SparseMatrix B = assemble_divergence(vel, pre);
    const Eigen::VectorXd stretch = vel.interpolate([](const Point& p, double) { return Eigen::Vector2d(p.x, 0.0); }, 0);
    const Eigen::VectorXd rows = dense(assemble_mass(pre)).rowwise().sum();
    EXPECT_LE((B * stretch - rows).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Convection, SkewSymmetricForAnyAdvectingField) {
    auto m = square(3);
    const FESpace vel(m, 2, 2);
    const Eigen::VectorXd w = testing_support::random_vector(static_cast<Eigen::Index>(vel.dof_count()), 5);
    const Eigen::MatrixXd C = dense(assemble_convection(vel, w));
    EXPECT_LE((C + C.transpose()).cwiseAbs().maxCoeff(), 1e-12 * C.cwiseAbs().maxCoeff());
    for (unsigned seed = 10; seed < 15; ++seed) {
        const Eigen::VectorXd v = testing_support::random_vector(C.rows(), seed);
        EXPECT_NEAR(v.dot(C * v), 0.0, 1e-12);
    }
    const Eigen::MatrixXd Z = dense(assemble_convection(vel, Eigen::VectorXd::Zero(w.size())));
    EXPECT_EQ(Z.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Convection, SingleTriangleP1MatchesHandQuadrature) {
    std::vector<Point> v{{0, 0}, {2, 0}, {0, 1}};
    std::vector<BoundaryEdge> e{{{0, 1}, BoundaryMarker::wall}, {{1, 2}, BoundaryMarker::wall},
                                {{2, 0}, BoundaryMarker::wall}};
    auto m = std::make_shared<const Mesh>(v, std::vector<std::array<int, 3>>{{0, 1, 2}}, e);
    const FESpace s(m, 1, 2);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(6);
    w.head(3).setOnes();  // w = (1, 0)
    const Eigen::MatrixXd C = dense(assemble_convection(s, w));
    // With w = (1, 0): C_ij = 1/2 (d_x phi_j int phi_i - d_x phi_i int phi_j), int phi = |T|/3.
    const double area = 1.0, mean = area / 3.0;
    const std::array<double, 3> dx{-0.5, 0.5, 0.0};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const double expect = 0.5 * (dx[j] * mean - dx[i] * mean);
            EXPECT_NEAR(C(i, j), expect, 1e-15);
            EXPECT_NEAR(C(3 + i, 3 + j), expect, 1e-15);
            EXPECT_EQ(C(i, 3 + j), 0.0);
        }
}

TEST(Trilinear, TwoFormsAgreeForFieldsVanishingOnTheBoundary) {
    auto m = square(3);
    const FESpace vel(m, 2, 2);
    const auto n = static_cast<Eigen::Index>(vel.dof_count());
    const std::array<BoundaryMarker, 1> walls{BoundaryMarker::wall};
    const auto bd = vel.dirichlet_dofs(walls);
    auto zero_boundary = [&](Eigen::VectorXd x) {
        for (int d : bd) x[d] = 0.0;
        return x;
    };
    const Eigen::VectorXd u = testing_support::random_vector(n, 21);
    const Eigen::VectorXd v = testing_support::random_vector(n, 22);
    const Eigen::VectorXd w = zero_boundary(testing_support::random_vector(n, 23));
    const double skew = trilinear_skew(vel, u, v, w);
    const double divf = trilinear_divergence_form(vel, u, v, w);
    EXPECT_NEAR(skew, divf, 1e-12 * std::max(1.0, std::abs(skew)));
    // Matrix form agrees with the quadrature form.
    EXPECT_NEAR(w.dot(assemble_convection(vel, u) * v), skew, 1e-12);
}

TEST(Dirichlet, AllConstrainedSolutionEqualsData) {
    auto m = std::make_shared<const Mesh>(testing_support::two_triangle_square());
    const FESpace s(m, 1, 1);
    const SparseMatrix K = assemble_stiffness(s);
    std::vector<std::pair<int, double>> c{{0, 1.0}, {1, 2.0}, {2, -1.0}, {3, 0.5}};
    const Eigen::VectorXd x = solve_with_dirichlet(K, Eigen::VectorXd::Ones(4), c);
    for (auto [d, v] : c) EXPECT_EQ(x[d], v);
}

TEST(Dirichlet, PoissonReproducesLinearHarmonicData) {
    auto m = square(6);
    const FESpace s(m, 2, 1);
    const SparseMatrix K = assemble_stiffness(s);
    const std::array<BoundaryMarker, 1> walls{BoundaryMarker::wall};
    std::vector<std::pair<int, double>> c;
    for (int n : s.boundary_nodes(walls)) c.emplace_back(n, s.node_coordinates()[static_cast<std::size_t>(n)].x);
    const Eigen::VectorXd x = solve_with_dirichlet(K, Eigen::VectorXd::Zero(K.rows()), c);
    for (std::size_t i = 0; i < s.num_nodes(); ++i)
        EXPECT_NEAR(x[static_cast<Eigen::Index>(i)], s.node_coordinates()[i].x, 1e-10);
}

TEST(Dirichlet, ZeroDataLeavesTheInteriorBlock) {
    auto m = square(3);
    const FESpace s(m, 2, 1);
    const SparseMatrix K = assemble_stiffness(s);
    const std::array<BoundaryMarker, 1> walls{BoundaryMarker::wall};
    const auto bd = s.boundary_nodes(walls);
    const DirichletReducer red(s.num_nodes(), bd);
    const Eigen::MatrixXd reduced = dense(red.reduce_matrix(K));
    const Eigen::MatrixXd full = dense(K);
    const auto& free = red.free_dofs();
    for (std::size_t i = 0; i < free.size(); ++i)
        for (std::size_t j = 0; j < free.size(); ++j)
            EXPECT_EQ(reduced(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), full(free[i], free[j]));
    const Eigen::VectorXd b = testing_support::random_vector(K.rows(), 4);
    const Eigen::VectorXd rb = red.reduce_rhs(K, b, Eigen::VectorXd::Zero(K.rows()));
    for (std::size_t i = 0; i < free.size(); ++i) EXPECT_EQ(rb[static_cast<Eigen::Index>(i)], b[free[i]]);
}

TEST(Dirichlet, InconsistentConstraintsAreRejected) {
    auto m = std::make_shared<const Mesh>(testing_support::two_triangle_square());
    const FESpace s(m, 1, 1);
    const SparseMatrix K = assemble_stiffness(s);
    EXPECT_THROW(solve_with_dirichlet(K, Eigen::VectorXd::Zero(4), {{0, 1.0}, {0, 2.0}}), ParameterError);
    EXPECT_THROW(solve_with_dirichlet(K, Eigen::VectorXd::Zero(4), {{9, 1.0}}), ParameterError);
}

TEST(Solvers, KrylovAndDirectAgree) {
    auto m = square(4);
    const FESpace s(m, 2, 1);
    SparseMatrix K = assemble_stiffness(s) + assemble_mass(s);
    const Eigen::VectorXd b = testing_support::random_vector(K.rows(), 9);
    LinearSolverOptions direct, krylov;
    krylov.kind = SolverKind::krylov;
    const Eigen::VectorXd x1 = solve_spd(K, b, direct);
    const Eigen::VectorXd x2 = solve_spd(K, b, krylov);
    EXPECT_LE((x1 - x2).norm(), 1e-8 * x1.norm());
    GeneralSolver g(krylov);
    g.factorize(K);
    EXPECT_LE((g.solve(b) - x1).norm(), 1e-8 * x1.norm());
}
