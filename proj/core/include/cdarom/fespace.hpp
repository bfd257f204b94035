#pragma once

#include <Eigen/Core>
#include <array>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "cdarom/mesh.hpp"

namespace cdarom {

/// Symmetric triangle rule on the reference triangle {(xi,eta): xi,eta >= 0, xi+eta <= 1}.
struct QuadratureRule {
    std::vector<std::array<double, 3>> barycentric;  ///< (l0, l1, l2) with l1 = xi, l2 = eta
    std::vector<double> weights;                     ///< sum to 1/2
    int order = 0;
};

/// 7-point rule, exact for polynomials of degree <= 5.
const QuadratureRule& quadrature_order5();

/// Affine map data of one triangle.
struct ElementGeometry {
    Point origin;
    Eigen::Matrix2d jac;
    double jac_det = 0.0;       ///< twice the area
    Eigen::Matrix2d inv_jac_t;  ///< maps reference gradients to physical gradients

    Point map(double xi, double eta) const;
};

struct BasisEval {
    std::vector<double> values;
    std::vector<Eigen::Vector2d> gradients;  ///< physical gradients
};

/// Lagrange P1 or P2 space, scalar or 2-component, on a mesh.
///
/// Scalar nodes are the mesh vertices followed (P2) by edge midpoints, edges sorted by their
/// (min, max) vertex pair. Component c of node i has dof index c*num_nodes() + i.
/// Local node order on a triangle (a,b,c): a, b, c, then (P2) ab, bc, ca.
class FESpace {
public:
    FESpace(std::shared_ptr<const Mesh> mesh, int degree, int components);

    const Mesh& mesh() const noexcept { return *mesh_; }
    std::shared_ptr<const Mesh> mesh_ptr() const noexcept { return mesh_; }
    int degree() const noexcept { return degree_; }
    int components() const noexcept { return components_; }
    int nodes_per_element() const noexcept { return degree_ == 1 ? 3 : 6; }

    std::size_t num_nodes() const noexcept { return nodes_.size(); }
    std::size_t dof_count() const noexcept { return nodes_.size() * components_; }
    std::size_t num_elements() const noexcept { return element_nodes_.size(); }

    /// Scalar node indices of a triangle in local order.
    std::span<const int> element_nodes(std::size_t t) const {
        return {element_nodes_[t].data(), static_cast<std::size_t>(nodes_per_element())};
    }
    /// Global dof indices of a triangle: all nodes of component 0, then component 1.
    std::vector<int> element_dofs(std::size_t t) const;

    const std::vector<Point>& node_coordinates() const noexcept { return nodes_; }
    int dof(int node, int component) const { return component * static_cast<int>(nodes_.size()) + node; }

    const ElementGeometry& geometry(std::size_t t) const { return geometry_[t]; }

    /// Scalar basis values and physical gradients of triangle t at reference point (xi, eta).
    BasisEval evaluate(std::size_t t, double xi, double eta) const;

    /// Scalar nodes lying on boundary edges carrying any of the given markers, sorted.
    std::vector<int> boundary_nodes(std::span<const BoundaryMarker> markers) const;
    /// All dofs (every component) of boundary_nodes(markers), sorted.
    std::vector<int> dirichlet_dofs(std::span<const BoundaryMarker> markers) const;

    /// Nodal interpolant of f(x,t); f returns one value per component.
    Eigen::VectorXd interpolate(const std::function<Eigen::Vector2d(const Point&, double)>& f, double t) const;
    Eigen::VectorXd interpolate_scalar(const std::function<double(const Point&)>& f) const;

    /// Value of a scalar-space field (or one component) at an arbitrary point; throws
    /// ParameterError when the point is outside the mesh.
    double evaluate_at(const Eigen::VectorXd& coeffs, const Point& p, int component = 0) const;

    /// Triangle containing p and its reference coordinates; -1 when outside.
    int locate(const Point& p, double& xi, double& eta) const;

private:
    std::shared_ptr<const Mesh> mesh_;
    int degree_;
    int components_;
    std::vector<Point> nodes_;
    std::vector<std::array<int, 6>> element_nodes_;
    std::vector<ElementGeometry> geometry_;
    std::vector<std::vector<BoundaryMarker>> node_markers_;
};

/// Reference basis values (size 3 or 6) and reference gradients d/dxi, d/deta.
void reference_basis(int degree, double xi, double eta, std::span<double> values,
                     std::span<Eigen::Vector2d> ref_grads);

}  // namespace cdarom
