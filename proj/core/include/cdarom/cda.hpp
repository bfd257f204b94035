#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <memory>
#include <vector>

#include "cdarom/assembly.hpp"
#include "cdarom/fespace.hpp"
#include "cdarom/fom.hpp"
#include "cdarom/mesh.hpp"

namespace cdarom {

/// Piecewise-constant observation operator I_H: on every retained overlay cell the field is
/// replaced by its value at one fine node inside the cell (the node nearest the cell center,
/// lowest index on ties).
///
/// Observed values are stored component-major: entry c * num_cells() + k is component c on
/// retained cell k.
class ObservationOperator {
public:
    /// Throws ParameterError naming the first overlay cell that holds no node of `space`.
    ObservationOperator(std::shared_ptr<const FESpace> space, CoarseOverlay overlay);

    const FESpace& space() const noexcept { return *space_; }
    const CoarseOverlay& overlay() const noexcept { return overlay_; }
    std::size_t num_cells() const noexcept { return nodes_.size(); }
    int components() const noexcept { return space_->components(); }
    std::size_t size() const noexcept { return nodes_.size() * static_cast<std::size_t>(components()); }

    /// Observation node of each retained cell.
    const std::vector<int>& nodes() const noexcept { return nodes_; }
    /// |cell intersected with the domain|, integrated with the element quadrature.
    const std::vector<double>& cell_measures() const noexcept { return measures_; }
    /// Cell measure for every observed entry.
    const Eigen::VectorXd& weights() const noexcept { return weights_; }
    /// Sparse 0/1 matrix picking the observed dofs (size() x dof_count()).
    const SparseMatrix& selection() const noexcept { return selection_; }

    Eigen::VectorXd apply(const Eigen::VectorXd& field) const;
    Eigen::MatrixXd apply(const Eigen::MatrixXd& fields) const;

    /// Piecewise-constant L2 norm sqrt(sum_k |cell_k| v_k^2) of observed values.
    double observed_norm(const Eigen::VectorXd& observed) const;
    /// ||I_H w - w||_{L2(Omega)} with I_H w extended as a constant on each cell.
    double interpolation_error(const Eigen::VectorXd& field) const;

private:
    std::shared_ptr<const FESpace> space_;
    CoarseOverlay overlay_;
    std::vector<int> nodes_;
    std::vector<double> measures_;
    Eigen::VectorXd weights_;
    SparseMatrix selection_;
};

ObservationOperator select_observation_points(std::shared_ptr<const FESpace> space, const CoarseOverlay& overlay);

/// N = (S Phi)^T W (S Phi) and the map G = (S Phi)^T W taking observed truth values to the
/// reduced right-hand side.
struct NudgingMatrices {
    Eigen::MatrixXd N;
    Eigen::MatrixXd G;
};
NudgingMatrices assemble_nudging_matrices(const ObservationOperator& op, const Eigen::MatrixXd& modes);

/// Observed truth values at requested times.
struct ObservationSeries {
    std::vector<double> times;
    Eigen::MatrixXd velocity;     ///< observed velocity entries x times
    Eigen::MatrixXd pressure;     ///< observed pressure entries x times
    std::vector<double> offsets;  ///< stored time minus requested time

    std::size_t size() const noexcept { return times.size(); }
    double max_offset() const;
    /// Column for time t (within 1e-9 relative); throws ParameterError if absent.
    std::size_t index_of(double t) const;
};

/// Samples `truth` at `times` through both operators, taking the nearest stored column when a
/// time is not stored exactly. Throws ParameterError for times outside the stored range by more
/// than half a stored interval, or when `times` is not strictly increasing.
ObservationSeries observation_series(const SnapshotSet& truth, const ObservationOperator& velocity_op,
                                     const ObservationOperator& pressure_op, const std::vector<double>& times);

/// CSV `t,cell_id,component,value`; component is ux, uy, or p, cell_id the overlay grid id.
void write_observation_csv(const ObservationSeries& s, const ObservationOperator& velocity_op,
                           const ObservationOperator& pressure_op, const std::filesystem::path& path);
/// Every (time, cell, component) of the two operators must appear exactly once.
ObservationSeries read_observation_csv(const std::filesystem::path& path, const ObservationOperator& velocity_op,
                                       const ObservationOperator& pressure_op);

}  // namespace cdarom
