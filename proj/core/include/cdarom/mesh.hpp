#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cdarom {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

enum class BoundaryMarker : std::uint8_t { inflow, outflow, wall, cylinder };

std::string to_string(BoundaryMarker m);
BoundaryMarker marker_from_string(const std::string& s);

struct BoundaryEdge {
    std::array<int, 2> v{};
    BoundaryMarker marker = BoundaryMarker::wall;
};

/// Geometry of the flow-past-cylinder channel, in meters.
namespace channel {
inline constexpr double length = 2.2;
inline constexpr double height = 0.41;
inline constexpr Point cylinder_center{0.2, 0.2};
inline constexpr double cylinder_radius = 0.05;
}  // namespace channel

/// Conforming triangulation with counterclockwise triangles and marked boundary edges.
///
/// Construction validates the invariants (positive areas, each boundary edge owned by
/// exactly one triangle, every boundary edge marked) and throws ParameterError otherwise.
/// Immutable afterwards.
class Mesh {
public:
    Mesh() = default;
    Mesh(std::vector<Point> vertices, std::vector<std::array<int, 3>> triangles,
         std::vector<BoundaryEdge> boundary_edges);

    const std::vector<Point>& vertices() const noexcept { return vertices_; }
    const std::vector<std::array<int, 3>>& triangles() const noexcept { return triangles_; }
    const std::vector<BoundaryEdge>& boundary_edges() const noexcept { return boundary_edges_; }

    std::size_t num_vertices() const noexcept { return vertices_.size(); }
    std::size_t num_triangles() const noexcept { return triangles_.size(); }

    /// Maximum triangle diameter.
    double h() const noexcept { return h_; }
    double signed_area(std::size_t t) const;
    double total_area() const;

    /// Lower-left and upper-right corners of the vertex bounding box.
    std::array<Point, 2> bounding_box() const;

    bool has_marker(BoundaryMarker m) const;

    /// FNV-1a hash over the binary vertex/triangle/edge data; identifies the mesh in artifacts.
    std::uint64_t hash() const;

private:
    void validate() const;

    std::vector<Point> vertices_;
    std::vector<std::array<int, 3>> triangles_;
    std::vector<BoundaryEdge> boundary_edges_;
    double h_ = 0.0;
};

/// Channel (0,2.2)x(0,0.41) minus the disk |x-(0.2,0.2)| <= 0.05.
///
/// Tensor background grid with the box [0.1,0.3]^2 cut out; the ring between the box and
/// the inscribed cylinder polygon is filled by radial layers. Realized h <= 1.5*target_h.
Mesh generate_channel_mesh(double target_h, int circle_segments);

/// Rectangle [x0,x1]x[y0,y1] on an nx-by-ny grid, each cell split along its (0,0)-(1,1)
/// diagonal. All boundary edges are marked `wall`.
Mesh generate_rectangle_mesh(double x0, double x1, double y0, double y1, int nx, int ny);

/// Unit square with ceil(1/target_h) cells per side.
Mesh generate_unit_square_mesh(double target_h);

/// Splits every triangle into four through the edge midpoints. Cylinder-marked edge
/// midpoints are projected onto the circle.
Mesh uniform_refine(const Mesh& mesh);

void save_mesh(const Mesh& mesh, const std::filesystem::path& path);
Mesh load_mesh(const std::filesystem::path& path);
Mesh parse_mesh(const std::string& text);
std::string format_mesh(const Mesh& mesh);

/// Axis-aligned rectangle grid over the mesh bounding box used for coarse observations.
class CoarseOverlay {
public:
    struct Cell {
        int id = 0;  ///< row-major index in the full nx-by-ny grid
        double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
        Point center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
        bool contains(const Point& p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
    };

    CoarseOverlay(const Mesh& mesh, int nx, int ny);

    int nx() const noexcept { return nx_; }
    int ny() const noexcept { return ny_; }
    double cell_width() const noexcept { return dx_; }
    double cell_height() const noexcept { return dy_; }
    /// Cell width H.
    double H() const noexcept { return dx_; }

    /// Retained cells (those intersecting the mesh), ordered by id.
    const std::vector<Cell>& cells() const noexcept { return cells_; }
    std::size_t size() const noexcept { return cells_.size(); }

    /// Index into cells() of the cell containing p, or -1 when p lies outside every retained
    /// cell. Points on shared cell edges go to the cell with the larger index in x/y.
    int cell_of_point(const Point& p) const;

private:
    int nx_ = 1, ny_ = 1;
    double x0_ = 0, y0_ = 0, dx_ = 1, dy_ = 1;
    std::vector<Cell> cells_;
    std::vector<int> grid_to_cell_;
};

/// Overlay with cells of width H: ceil(width/H) columns and ceil(height/H) rows.
CoarseOverlay build_coarse_overlay(const Mesh& mesh, double H);
/// Overlay with explicit column/row counts (8x8 reproduces 64 observation cells on the channel).
CoarseOverlay build_coarse_overlay(const Mesh& mesh, int nx, int ny);

}  // namespace cdarom
