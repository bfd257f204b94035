#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cdarom/assembly.hpp"
#include "cdarom/fespace.hpp"
#include "cdarom/fom.hpp"

namespace cdarom {

/// How the test fields v_D, v_L are extended into the interior.
enum class DragExtension { zero, harmonic };

/// Drag, lift, pressure difference, and kinetic energy of the cylinder benchmark.
///
/// Drag and lift use the volume form
///   c = -2/(D U^2) [nu (grad u, grad v) + b(u, u, v) - (p, div v)]
/// with v = (1,0) (drag) or (0,1) (lift) on the cylinder and zero on the other boundaries.
class BenchmarkFunctionals {
public:
    struct Options {
        double diameter = 0.1;
        double mean_velocity = 1.0;
        Point front{0.15, 0.2};
        Point back{0.25, 0.2};
        DragExtension extension = DragExtension::zero;
    };

    BenchmarkFunctionals(std::shared_ptr<const FESpace> velocity, std::shared_ptr<const FESpace> pressure, double nu);
    BenchmarkFunctionals(std::shared_ptr<const FESpace> velocity, std::shared_ptr<const FESpace> pressure, double nu,
                         Options opt);

    /// (c_D, c_L).
    std::pair<double, double> drag_lift(const Eigen::VectorXd& u, const Eigen::VectorXd& p) const;
    /// p(front) - p(back).
    double pressure_difference(const Eigen::VectorXd& p) const;
    /// 1/2 u^T M u.
    double kinetic_energy(const Eigen::VectorXd& u) const;

    const Eigen::VectorXd& drag_field() const noexcept { return v_drag_; }
    const Eigen::VectorXd& lift_field() const noexcept { return v_lift_; }

private:
    double convective(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const;

    std::shared_ptr<const FESpace> velocity_;
    std::shared_ptr<const FESpace> pressure_;
    double nu_;
    Options opt_;
    SparseMatrix mass_u_;
    Eigen::VectorXd v_drag_, v_lift_;
    Eigen::VectorXd a_drag_, a_lift_;  // A v
    Eigen::VectorXd d_drag_, d_lift_;  // B v
    std::vector<int> support_;         // triangles where v_D or v_L is nonzero
    std::unique_ptr<QuadratureCache> cache_;
    struct PointEval {
        int element = -1;
        std::array<double, 3> weights{};
    };
    PointEval front_, back_;
};

/// 1/2 u^T M u.
double kinetic_energy(const Eigen::VectorXd& u, const SparseMatrix& mass);

/// p(front) - p(back) by point evaluation of a P1/P2 field.
double pressure_diff(const Eigen::VectorXd& p, const FESpace& space, Point front = {0.15, 0.2},
                     Point back = {0.25, 0.2});

/// Per-column ||test - ref||_M / ||ref||_M. Throws ParameterError on misaligned time grids.
std::vector<double> relative_error_series(const std::vector<double>& test_times, const Eigen::MatrixXd& test,
                                          const std::vector<double>& ref_times, const Eigen::MatrixXd& ref,
                                          const SparseMatrix& mass);

/// h^{-1} sqrt(lambda_{r+1}) (lambda 1-based); throws ParameterError when r >= eigenvalues.size().
double stability_diagnostic(double h, const std::vector<double>& eigenvalues, int r);

/// Maxima of c_D and c_L over the last full lift period (between the last two upward zero
/// crossings of c_L), or over the whole series when fewer than two crossings exist.
struct PeriodMaxima {
    double cd_max = 0.0;
    double cl_max = 0.0;
    double period_start = 0.0;
    double period_end = 0.0;
    bool full_period = false;
};
PeriodMaxima final_period_maxima(const QuantitySeries& q);

/// CSV `t,c_D,c_L,E_kin,dp`.
void write_quantities_csv(const QuantitySeries& q, const std::filesystem::path& path);
QuantitySeries read_quantities_csv(const std::filesystem::path& path);
/// CSV `t,cD,cL,Ekin,dp,relerr_u,relerr_p`.
void write_report_csv(const QuantitySeries& q, const std::filesystem::path& path);
QuantitySeries read_report_csv(const std::filesystem::path& path);

}  // namespace cdarom
