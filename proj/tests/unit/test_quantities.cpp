#include <gtest/gtest.h>

#include <Eigen/SparseLU>
#include <cmath>
#include <fstream>
#include <numbers>

#include "cdarom/error.hpp"
#include "cdarom/quantities.hpp"
#include "support.hpp"

using namespace cdarom;

namespace {

struct Channel {
    std::shared_ptr<const Mesh> mesh = std::make_shared<const Mesh>(generate_channel_mesh(0.1, 16));
    std::shared_ptr<const FESpace> vel = std::make_shared<const FESpace>(mesh, 2, 2);
    std::shared_ptr<const FESpace> pre = std::make_shared<const FESpace>(mesh, 1, 1);
};

// The functional evaluated by element quadrature with the test field built from scratch.
std::pair<double, double> drag_lift_by_quadrature(const FESpace& V, const FESpace& Q, const Eigen::VectorXd& u,
                                                  const Eigen::VectorXd& p, double nu) {
    const auto nn = static_cast<int>(V.num_nodes());
    std::vector<double> on_cylinder(V.num_nodes(), 0.0);
    for (int i : V.boundary_nodes(std::array<BoundaryMarker, 1>{BoundaryMarker::cylinder})) on_cylinder[i] = 1.0;
    const auto& rule = quadrature_order5();
    double sum[2] = {0.0, 0.0};
    for (std::size_t e = 0; e < V.num_elements(); ++e) {
        const auto vn = V.element_nodes(e);
        const auto pn = Q.element_nodes(e);
        const double area = 0.5 * V.geometry(e).jac_det;
        for (std::size_t q = 0; q < rule.weights.size(); ++q) {
            const double xi = rule.barycentric[q][1], eta = rule.barycentric[q][2];
            const BasisEval bv = V.evaluate(e, xi, eta);
            const BasisEval bp = Q.evaluate(e, xi, eta);
            Eigen::Vector2d uh = Eigen::Vector2d::Zero();
            Eigen::Matrix2d gu = Eigen::Matrix2d::Zero();
            double ext = 0.0;
            Eigen::Vector2d gext = Eigen::Vector2d::Zero();
            for (int i = 0; i < 6; ++i) {
                for (int c = 0; c < 2; ++c) {
                    uh[c] += u[c * nn + vn[i]] * bv.values[i];
                    gu.row(c) += u[c * nn + vn[i]] * bv.gradients[i].transpose();
                }
                ext += on_cylinder[vn[i]] * bv.values[i];
                gext += on_cylinder[vn[i]] * bv.gradients[i];
            }
            double ph = 0.0;
            for (int i = 0; i < 3; ++i) ph += p[pn[i]] * bp.values[i];
            const double w = 2.0 * area * rule.weights[q];
            for (int d = 0; d < 2; ++d) {
                // v = ext * e_d, grad v has row d equal to grad ext.
                Eigen::Vector2d vh = Eigen::Vector2d::Zero();
                vh[d] = ext;
                Eigen::Matrix2d gv = Eigen::Matrix2d::Zero();
                gv.row(d) = gext.transpose();
                const double visc = nu * (gu.array() * gv.array()).sum();
                const double conv = 0.5 * ((gu * uh).dot(vh) - (gv * uh).dot(uh));
                const double pres = ph * gv.trace();
                sum[d] += w * (visc + conv - pres);
            }
        }
    }
    const double scale = -2.0 / (0.1 * 1.0 * 1.0);
    return {scale * sum[0], scale * sum[1]};
}

}  // namespace

TEST(DragLift, ZeroFieldsAndMissingCylinder) {
    Channel c;
    const BenchmarkFunctionals f(c.vel, c.pre, 1e-3);
    const auto [cd, cl] = f.drag_lift(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(c.vel->dof_count())),
                                      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(c.pre->dof_count())));
    EXPECT_EQ(cd, 0.0);
    EXPECT_EQ(cl, 0.0);

    auto sq = std::make_shared<const Mesh>(generate_rectangle_mesh(0, 1, 0, 1, 2, 2));
    EXPECT_THROW(BenchmarkFunctionals(std::make_shared<const FESpace>(sq, 2, 2), std::make_shared<const FESpace>(sq, 1, 1), 1.0),
                 ParameterError);
}

TEST(DragLift, MatchesIndependentQuadrature) {
    Channel c;
    const double nu = 1e-3;
    const BenchmarkFunctionals f(c.vel, c.pre, nu);
    for (unsigned seed = 0; seed < 3; ++seed) {
        const Eigen::VectorXd u = testing_support::random_vector(static_cast<Eigen::Index>(c.vel->dof_count()), seed);
        const Eigen::VectorXd p = testing_support::random_vector(static_cast<Eigen::Index>(c.pre->dof_count()), 9 + seed);
        const auto [cd, cl] = f.drag_lift(u, p);
        const auto [qd, ql] = drag_lift_by_quadrature(*c.vel, *c.pre, u, p, nu);
        EXPECT_NEAR(cd, qd, 1e-10 * std::max(1.0, std::abs(qd)));
        EXPECT_NEAR(cl, ql, 1e-10 * std::max(1.0, std::abs(ql)));
    }
}

TEST(DragLift, InteriorExtensionDoesNotMatterAtASteadySolution) {
    Channel c;
    const double nu = 0.01;
    const FlowProblem pr = make_channel_problem(c.mesh, nu);
    const SparseMatrix A = assemble_stiffness(*c.vel);
    const SparseMatrix B = assemble_divergence(*c.vel, *c.pre);
    const Eigen::VectorXd m = assemble_mass(*c.pre) * Eigen::VectorXd::Ones(static_cast<Eigen::Index>(c.pre->dof_count()));
    const auto nu_dofs = static_cast<Eigen::Index>(c.vel->dof_count());
    const auto np = static_cast<Eigen::Index>(c.pre->dof_count());
    const auto bd = c.vel->dirichlet_dofs(pr.dirichlet_markers);
    const Eigen::VectorXd g = c.vel->interpolate(pr.boundary_velocity, 0.0);
    std::vector<bool> fixed(static_cast<std::size_t>(nu_dofs), false);
    for (int d : bd) fixed[static_cast<std::size_t>(d)] = true;

    // Picard iteration for the steady discrete equations with a mean-zero pressure.
    Eigen::VectorXd u = Eigen::VectorXd::Zero(nu_dofs), p = Eigen::VectorXd::Zero(np);
    for (int it = 0; it < 200; ++it) {
        const SparseMatrix K = nu * A + assemble_convection(*c.vel, u);
        std::vector<Eigen::Triplet<double>> t;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nu_dofs + np + 1);
        for (Eigen::Index k = 0; k < K.outerSize(); ++k)
            for (SparseMatrix::InnerIterator i(K, k); i; ++i)
                if (!fixed[static_cast<std::size_t>(i.row())]) t.emplace_back(i.row(), i.col(), i.value());
        for (Eigen::Index k = 0; k < B.outerSize(); ++k)
            for (SparseMatrix::InnerIterator i(B, k); i; ++i) {
                if (!fixed[static_cast<std::size_t>(i.col())]) t.emplace_back(i.col(), nu_dofs + i.row(), -i.value());
                t.emplace_back(nu_dofs + i.row(), i.col(), i.value());
            }
        for (Eigen::Index i = 0; i < np; ++i) {
            t.emplace_back(nu_dofs + i, nu_dofs + np, m[i]);
            t.emplace_back(nu_dofs + np, nu_dofs + i, m[i]);
        }
        for (int d : bd) {
            t.emplace_back(d, d, 1.0);
            rhs[d] = g[d];
        }
        SparseMatrix S(nu_dofs + np + 1, nu_dofs + np + 1);
        S.setFromTriplets(t.begin(), t.end());
        Eigen::SparseLU<SparseMatrix> lu(S);
        ASSERT_EQ(lu.info(), Eigen::Success);
        const Eigen::VectorXd x = lu.solve(rhs);
        const double change = (x.head(nu_dofs) - u).norm();
        u = x.head(nu_dofs);
        p = x.segment(nu_dofs, np);
        if (change < 1e-13 * u.norm()) break;
    }

    BenchmarkFunctionals::Options opt;
    const BenchmarkFunctionals zero(c.vel, c.pre, nu, opt);
    opt.extension = DragExtension::harmonic;
    const BenchmarkFunctionals harmonic(c.vel, c.pre, nu, opt);
    EXPECT_NE(zero.drag_field(), harmonic.drag_field());
    const auto [cd0, cl0] = zero.drag_lift(u, p);
    const auto [cd1, cl1] = harmonic.drag_lift(u, p);
    EXPECT_GT(cd0, 1.0);
    EXPECT_NEAR(cd0, cd1, 1e-8);
    EXPECT_NEAR(cl0, cl1, 1e-8);
}

TEST(KineticEnergy, Oracles) {
    auto m = std::make_shared<const Mesh>(generate_rectangle_mesh(0, 1, 0, 1, 3, 3));
    const FESpace V(m, 2, 2);
    const SparseMatrix M = assemble_mass(V);
    EXPECT_EQ(kinetic_energy(Eigen::VectorXd::Zero(M.rows()), M), 0.0);
    const Eigen::VectorXd one = V.interpolate([](const Point&, double) { return Eigen::Vector2d(1.0, 0.0); }, 0);
    EXPECT_NEAR(kinetic_energy(one, M), 0.5, 1e-14);

    const Eigen::VectorXd u = testing_support::random_vector(M.rows(), 3);
    const auto nn = static_cast<int>(V.num_nodes());
    const auto& rule = quadrature_order5();
    double direct = 0.0;
    for (std::size_t e = 0; e < V.num_elements(); ++e) {
        const auto nodes = V.element_nodes(e);
        for (std::size_t q = 0; q < rule.weights.size(); ++q) {
            const BasisEval b = V.evaluate(e, rule.barycentric[q][1], rule.barycentric[q][2]);
            Eigen::Vector2d uh = Eigen::Vector2d::Zero();
            for (int i = 0; i < 6; ++i)
                for (int c = 0; c < 2; ++c) uh[c] += u[c * nn + nodes[i]] * b.values[i];
            direct += rule.weights[q] * V.geometry(e).jac_det * uh.squaredNorm();
        }
    }
    EXPECT_NEAR(kinetic_energy(u, M), 0.5 * direct, 1e-10 * direct);
    EXPECT_GE(kinetic_energy(u, M), 0.0);
    EXPECT_THROW(kinetic_energy(Eigen::VectorXd::Zero(3), M), ParameterError);
}

TEST(PressureDifference, Examples) {
    Channel c;
    const Eigen::VectorXd constant = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(c.pre->dof_count()), 4.0);
    EXPECT_NEAR(pressure_diff(constant, *c.pre), 0.0, 1e-14);
    const Eigen::VectorXd px = c.pre->interpolate_scalar([](const Point& p) { return p.x; });
    EXPECT_NEAR(pressure_diff(px, *c.pre), -0.1, 1e-14);
    const BenchmarkFunctionals f(c.vel, c.pre, 1e-3);
    EXPECT_NEAR(f.pressure_difference(px), -0.1, 1e-14);
    EXPECT_THROW(pressure_diff(px, *c.pre, {0.2, 0.2}), ParameterError);
    EXPECT_THROW(pressure_diff(px, *c.pre, {3.0, 0.2}), ParameterError);
}

TEST(RelativeError, Examples) {
    const SparseMatrix M = [] {
        SparseMatrix m(3, 3);
        m.insert(0, 0) = 1.0;
        m.insert(1, 1) = 2.0;
        m.insert(2, 2) = 0.5;
        m.makeCompressed();
        return m;
    }();
    const std::vector<double> t{0.0, 0.1};
    const Eigen::MatrixXd ref = testing_support::random_matrix(3, 2, 4);
    for (double e : relative_error_series(t, ref, t, ref, M)) EXPECT_EQ(e, 0.0);
    for (double e : relative_error_series(t, 2.0 * ref, t, ref, M)) EXPECT_NEAR(e, 1.0, 1e-15);

    const Eigen::MatrixXd test = testing_support::random_matrix(3, 2, 5);
    const auto s = relative_error_series(t, test, t, ref, M);
    const Eigen::Vector3d w(1.0, 2.0, 0.5);
    const Eigen::VectorXd d = test.col(1) - ref.col(1);
    const double oracle = std::sqrt((w.array() * d.array().square()).sum() /
                                    (w.array() * ref.col(1).array().square()).sum());
    EXPECT_NEAR(s[1], oracle, 1e-15);

    EXPECT_THROW(relative_error_series({0.0, 0.2}, test, t, ref, M), ParameterError);
    EXPECT_THROW(relative_error_series({0.0}, test.leftCols(1), t, ref, M), ParameterError);
}

TEST(StabilityDiagnostic, Examples) {
    EXPECT_NEAR(stability_diagnostic(0.1, {1.0, 1e-4}, 1), 0.1, 1e-15);
    EXPECT_EQ(stability_diagnostic(0.5, {1.0, 0.0}, 1), 0.0);
    EXPECT_THROW(stability_diagnostic(0.1, {1.0, 1e-4}, 2), ParameterError);
    EXPECT_THROW(stability_diagnostic(0.0, {1.0, 1e-4}, 0), ParameterError);
}

TEST(PeriodMaxima, SyntheticSignal) {
    QuantitySeries q;
    const double period = 0.33;
    for (int i = 0; i <= 2000; ++i) {
        const double t = 0.001 * i;
        const double phase = 2.0 * std::numbers::pi * t / period;
        // Amplitude grows in time so the last period has the largest values.
        q.push(t, 3.0 + 0.01 * t * std::sin(2.0 * phase), (0.5 + 0.1 * t) * std::sin(phase), 0.0, 0.0);
    }
    const PeriodMaxima m = final_period_maxima(q);
    ASSERT_TRUE(m.full_period);
    EXPECT_NEAR(m.period_end - m.period_start, period, 1e-4);
    EXPECT_NEAR(m.period_end, 6 * period, 1e-4);
    const double t_peak = m.period_start + 0.25 * period;
    EXPECT_NEAR(m.cl_max, 0.5 + 0.1 * t_peak, 1e-3);
    // sin(2 phase) peaks at 1/8 and 5/8 of the period; the later peak is larger.
    EXPECT_NEAR(m.cd_max, 3.0 + 0.01 * (m.period_start + 0.625 * period), 1e-5);

    QuantitySeries flat;
    for (int i = 0; i < 5; ++i) flat.push(i, i, -1.0, 0.0, 0.0);
    const PeriodMaxima f = final_period_maxima(flat);
    EXPECT_FALSE(f.full_period);
    EXPECT_EQ(f.cd_max, 4.0);
    EXPECT_THROW(final_period_maxima(QuantitySeries{}), ParameterError);
}

TEST(QuantityCsv, RoundTripAndParseErrors) {
    testing_support::TempDir dir;
    QuantitySeries q;
    for (int i = 0; i < 4; ++i) q.push(0.1 * i + 1e-17, std::sqrt(2.0) * i, -1.0 / 3.0, 1e-300, std::nan(""));
    write_quantities_csv(q, dir / "q.csv");
    const QuantitySeries r = read_quantities_csv(dir / "q.csv");
    EXPECT_EQ(r.t, q.t);
    EXPECT_EQ(r.c_d, q.c_d);
    EXPECT_EQ(r.c_l, q.c_l);
    EXPECT_EQ(r.e_kin, q.e_kin);
    for (double v : r.dp) EXPECT_TRUE(std::isnan(v));

    q.relerr_u = {0.1, 0.2, 0.3, 0.4};
    write_report_csv(q, dir / "r.csv");
    const QuantitySeries rr = read_report_csv(dir / "r.csv");
    EXPECT_EQ(rr.relerr_u, q.relerr_u);
    ASSERT_EQ(rr.relerr_p.size(), 4u);
    EXPECT_TRUE(std::isnan(rr.relerr_p[0]));

    {
        std::ofstream out(dir / "bad.csv");
        out << "t,c_D,c_L,E_kin,dp\n0,1,2,3,4\n0.1,1,x,3,4\n";
    }
    try {
        read_quantities_csv(dir / "bad.csv");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3);
    }
    {
        std::ofstream out(dir / "bad.csv");
        out << "t,c_D,c_L,E_kin,dp\n0,1,2,3\n";
    }
    EXPECT_THROW(read_quantities_csv(dir / "bad.csv"), ParseError);
    {
        std::ofstream out(dir / "bad.csv");
        out << "time,drag\n";
    }
    EXPECT_THROW(read_quantities_csv(dir / "bad.csv"), ParseError);
    EXPECT_THROW(read_report_csv(dir / "q.csv"), ParseError);
}
