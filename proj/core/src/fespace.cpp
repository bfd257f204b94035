#include "cdarom/fespace.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "cdarom/error.hpp"

namespace cdarom {

const QuadratureRule& quadrature_order5() {
    static const QuadratureRule rule = [] {
        QuadratureRule q;
        q.order = 5;
        const double s15 = std::sqrt(15.0);
        const double a = (6.0 - s15) / 21.0, b = (6.0 + s15) / 21.0;
        const double wa = (155.0 - s15) / 2400.0, wb = (155.0 + s15) / 2400.0;
        q.barycentric = {{1.0 / 3, 1.0 / 3, 1.0 / 3},
                         {1 - 2 * a, a, a}, {a, 1 - 2 * a, a}, {a, a, 1 - 2 * a},
                         {1 - 2 * b, b, b}, {b, 1 - 2 * b, b}, {b, b, 1 - 2 * b}};
        q.weights = {9.0 / 80.0, wa, wa, wa, wb, wb, wb};
        return q;
    }();
    return rule;
}

Point ElementGeometry::map(double xi, double eta) const {
    return {origin.x + jac(0, 0) * xi + jac(0, 1) * eta, origin.y + jac(1, 0) * xi + jac(1, 1) * eta};
}

void reference_basis(int degree, double xi, double eta, std::span<double> values,
                     std::span<Eigen::Vector2d> ref_grads) {
    const double l0 = 1.0 - xi - eta, l1 = xi, l2 = eta;
    const Eigen::Vector2d g0(-1, -1), g1(1, 0), g2(0, 1);
    if (degree == 1) {
        values[0] = l0;
        values[1] = l1;
        values[2] = l2;
        ref_grads[0] = g0;
        ref_grads[1] = g1;
        ref_grads[2] = g2;
        return;
    }
    values[0] = l0 * (2 * l0 - 1);
    values[1] = l1 * (2 * l1 - 1);
    values[2] = l2 * (2 * l2 - 1);
    values[3] = 4 * l0 * l1;
    values[4] = 4 * l1 * l2;
    values[5] = 4 * l2 * l0;
    ref_grads[0] = (4 * l0 - 1) * g0;
    ref_grads[1] = (4 * l1 - 1) * g1;
    ref_grads[2] = (4 * l2 - 1) * g2;
    ref_grads[3] = 4 * (l0 * g1 + l1 * g0);
    ref_grads[4] = 4 * (l1 * g2 + l2 * g1);
    ref_grads[5] = 4 * (l2 * g0 + l0 * g2);
}

FESpace::FESpace(std::shared_ptr<const Mesh> mesh, int degree, int components)
    : mesh_(std::move(mesh)), degree_(degree), components_(components) {
    if (!mesh_) throw ParameterError("FESpace: null mesh");
    if (degree != 1 && degree != 2) throw ParameterError("FESpace: unsupported degree " + std::to_string(degree));
    if (components != 1 && components != 2)
        throw ParameterError("FESpace: components must be 1 or 2, got " + std::to_string(components));

    const auto& verts = mesh_->vertices();
    const auto& tris = mesh_->triangles();
    nodes_ = verts;

    std::map<std::pair<int, int>, int> edge_node;
    if (degree_ == 2) {
        std::set<std::pair<int, int>> edges;
        for (const auto& t : tris)
            for (int e = 0; e < 3; ++e) {
                const int a = t[e], b = t[(e + 1) % 3];
                edges.insert({std::min(a, b), std::max(a, b)});
            }
        for (const auto& e : edges) {
            edge_node.emplace(e, static_cast<int>(nodes_.size()));
            nodes_.push_back({0.5 * (verts[e.first].x + verts[e.second].x),
                              0.5 * (verts[e.first].y + verts[e.second].y)});
        }
    }
    auto en = [&](int a, int b) { return edge_node.at({std::min(a, b), std::max(a, b)}); };

    element_nodes_.resize(tris.size());
    geometry_.resize(tris.size());
    for (std::size_t k = 0; k < tris.size(); ++k) {
        const auto& t = tris[k];
        auto& ln = element_nodes_[k];
        ln = {t[0], t[1], t[2], -1, -1, -1};
        if (degree_ == 2) {
            ln[3] = en(t[0], t[1]);
            ln[4] = en(t[1], t[2]);
            ln[5] = en(t[2], t[0]);
        }
        const Point& p0 = verts[t[0]];
        const Point& p1 = verts[t[1]];
        const Point& p2 = verts[t[2]];
        Eigen::Matrix2d jac;
        jac << p1.x - p0.x, p2.x - p0.x, p1.y - p0.y, p2.y - p0.y;
        geometry_[k].origin = p0;
        geometry_[k].jac = jac;
        geometry_[k].jac_det = jac.determinant();
        geometry_[k].inv_jac_t = jac.inverse().transpose();
    }

    node_markers_.resize(nodes_.size());
    auto add_marker = [&](int node, BoundaryMarker m) {
        auto& v = node_markers_[node];
        if (std::find(v.begin(), v.end(), m) == v.end()) v.push_back(m);
    };
    for (const auto& e : mesh_->boundary_edges()) {
        add_marker(e.v[0], e.marker);
        add_marker(e.v[1], e.marker);
        if (degree_ == 2) add_marker(en(e.v[0], e.v[1]), e.marker);
    }
}

std::vector<int> FESpace::element_dofs(std::size_t t) const {
    const auto ln = element_nodes(t);
    std::vector<int> dofs;
    dofs.reserve(ln.size() * components_);
    for (int c = 0; c < components_; ++c)
        for (int n : ln) dofs.push_back(dof(n, c));
    return dofs;
}

BasisEval FESpace::evaluate(std::size_t t, double xi, double eta) const {
    const int nb = nodes_per_element();
    BasisEval out;
    out.values.resize(nb);
    out.gradients.resize(nb);
    std::array<Eigen::Vector2d, 6> rg;
    reference_basis(degree_, xi, eta, out.values, std::span(rg.data(), nb));
    for (int i = 0; i < nb; ++i) out.gradients[i] = geometry_[t].inv_jac_t * rg[i];
    return out;
}

std::vector<int> FESpace::boundary_nodes(std::span<const BoundaryMarker> markers) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        for (auto m : node_markers_[i])
            if (std::find(markers.begin(), markers.end(), m) != markers.end()) {
                out.push_back(static_cast<int>(i));
                break;
            }
    return out;
}

std::vector<int> FESpace::dirichlet_dofs(std::span<const BoundaryMarker> markers) const {
    const auto nodes = boundary_nodes(markers);
    std::vector<int> out;
    for (int c = 0; c < components_; ++c)
        for (int n : nodes) out.push_back(dof(n, c));
    return out;
}

Eigen::VectorXd FESpace::interpolate(const std::function<Eigen::Vector2d(const Point&, double)>& f, double t) const {
    Eigen::VectorXd out(dof_count());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Eigen::Vector2d v = f(nodes_[i], t);
        for (int c = 0; c < components_; ++c) out[dof(static_cast<int>(i), c)] = v[c];
    }
    return out;
}

Eigen::VectorXd FESpace::interpolate_scalar(const std::function<double(const Point&)>& f) const {
    Eigen::VectorXd out(num_nodes());
    for (std::size_t i = 0; i < nodes_.size(); ++i) out[i] = f(nodes_[i]);
    return out;
}

int FESpace::locate(const Point& p, double& xi, double& eta) const {
    const double tol = 1e-12;
    for (std::size_t t = 0; t < geometry_.size(); ++t) {
        const auto& g = geometry_[t];
        // reference coords = J^{-1}(p - origin) = inv_jac_t^T (p - origin)
        const Eigen::Vector2d d(p.x - g.origin.x, p.y - g.origin.y);
        const Eigen::Vector2d r = g.inv_jac_t.transpose() * d;
        if (r[0] >= -tol && r[1] >= -tol && r[0] + r[1] <= 1.0 + tol) {
            xi = r[0];
            eta = r[1];
            return static_cast<int>(t);
        }
    }
    return -1;
}

double FESpace::evaluate_at(const Eigen::VectorXd& coeffs, const Point& p, int component) const {
    double xi = 0, eta = 0;
    const int t = locate(p, xi, eta);
    if (t < 0)
        throw ParameterError("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ") is outside the mesh");
    std::array<double, 6> vals{};
    std::array<Eigen::Vector2d, 6> rg;
    const int nb = nodes_per_element();
    reference_basis(degree_, xi, eta, std::span(vals.data(), nb), std::span(rg.data(), nb));
    double v = 0.0;
    const auto ln = element_nodes(t);
    for (int i = 0; i < nb; ++i) v += vals[i] * coeffs[dof(ln[i], component)];
    return v;
}

}  // namespace cdarom
