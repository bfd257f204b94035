#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "cdarom/error.hpp"
#include "cdarom/mesh.hpp"
#include "support.hpp"

using namespace cdarom;

namespace {

double polygon_area(const std::vector<Point>& pts) {
    double a = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Point& p = pts[i];
        const Point& q = pts[(i + 1) % pts.size()];
        a += p.x * q.y - q.x * p.y;
    }
    return 0.5 * std::abs(a);
}

double triangle_area_sum(const Mesh& m) {
    double a = 0.0;
    for (std::size_t t = 0; t < m.num_triangles(); ++t) a += m.signed_area(t);
    return a;
}

std::vector<std::size_t> edges_with(const Mesh& m, BoundaryMarker mk) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < m.boundary_edges().size(); ++i)
        if (m.boundary_edges()[i].marker == mk) out.push_back(i);
    return out;
}

}  // namespace

TEST(ChannelMesh, InvariantsAndAreaMatchInscribedPolygon) {
    const Mesh m = generate_channel_mesh(0.05, 32);
    EXPECT_LE(m.h(), 0.075);
    for (std::size_t t = 0; t < m.num_triangles(); ++t) ASSERT_GT(m.signed_area(t), 0.0);

    const auto cyl = edges_with(m, BoundaryMarker::cylinder);
    ASSERT_EQ(cyl.size(), 32u);
    std::map<int, int> degree;
    std::vector<Point> ring;
    for (auto i : cyl)
        for (int v : m.boundary_edges()[i].v) degree[v]++;
    for (auto [v, d] : degree) {
        EXPECT_EQ(d, 2) << "cylinder polyline not closed at vertex " << v;
        const Point& p = m.vertices()[v];
        EXPECT_NEAR(std::hypot(p.x - 0.2, p.y - 0.2), 0.05, 1e-12);
        ring.push_back(p);
    }
    std::sort(ring.begin(), ring.end(), [](const Point& a, const Point& b) {
        return std::atan2(a.y - 0.2, a.x - 0.2) < std::atan2(b.y - 0.2, b.x - 0.2);
    });
    const double exact = 2.2 * 0.41 - polygon_area(ring);
    EXPECT_NEAR(triangle_area_sum(m), exact, 1e-12);
    const double continuous = 2.2 * 0.41 - std::numbers::pi * 0.05 * 0.05;
    EXPECT_NEAR(triangle_area_sum(m) / continuous, 1.0, 1e-3);
}

TEST(ChannelMesh, MarkersSitOnTheirBoundaries) {
    const Mesh m = generate_channel_mesh(0.1, 16);
    for (const auto& e : m.boundary_edges()) {
        const Point& a = m.vertices()[e.v[0]];
        const Point& b = m.vertices()[e.v[1]];
        switch (e.marker) {
            case BoundaryMarker::inflow: EXPECT_TRUE(a.x == 0.0 && b.x == 0.0); break;
            case BoundaryMarker::outflow: EXPECT_TRUE(a.x == 2.2 && b.x == 2.2); break;
            case BoundaryMarker::wall: EXPECT_TRUE((a.y == 0.0 && b.y == 0.0) || (a.y == 0.41 && b.y == 0.41)); break;
            case BoundaryMarker::cylinder: EXPECT_NEAR(std::hypot(a.x - 0.2, a.y - 0.2), 0.05, 1e-12); break;
        }
    }
}

TEST(ChannelMesh, RejectsDegenerateParameters) {
    EXPECT_THROW(generate_channel_mesh(0.0, 32), ParameterError);
    EXPECT_THROW(generate_channel_mesh(-1.0, 32), ParameterError);
    EXPECT_THROW(generate_channel_mesh(0.05, 7), ParameterError);
    try {
        generate_channel_mesh(0.05, 4);
        FAIL();
    } catch (const ParameterError& e) {
        EXPECT_NE(std::string(e.what()).find("circle_segments"), std::string::npos) << e.what();
    }
}

TEST(ChannelMesh, RefinementQuadruplesAndProjectsCylinderNodes) {
    const Mesh m = generate_channel_mesh(0.1, 16);
    const Mesh r = uniform_refine(m);
    EXPECT_EQ(r.num_triangles(), 4 * m.num_triangles());
    EXPECT_LE(r.h(), 0.5 * m.h() * 1.05);
    EXPECT_EQ(edges_with(r, BoundaryMarker::cylinder).size(), 32u);
    for (auto i : edges_with(r, BoundaryMarker::cylinder))
        for (int v : r.boundary_edges()[i].v) {
            const Point& p = r.vertices()[v];
            EXPECT_NEAR(std::hypot(p.x - 0.2, p.y - 0.2), 0.05, 1e-12);
        }
    // Refinement shrinks the gap to the true disk.
    const double continuous = 2.2 * 0.41 - std::numbers::pi * 0.05 * 0.05;
    EXPECT_LT(std::abs(triangle_area_sum(r) - continuous), std::abs(triangle_area_sum(m) - continuous));
}

TEST(Refinement, PreservesMarkersEdgeByEdge) {
    const Mesh m = generate_channel_mesh(0.15, 12);
    const Mesh r = uniform_refine(m);
    ASSERT_EQ(r.boundary_edges().size(), 2 * m.boundary_edges().size());
    for (const auto& child : r.boundary_edges()) {
        const Point& a = r.vertices()[child.v[0]];
        const Point& b = r.vertices()[child.v[1]];
        bool found = false;
        for (const auto& parent : m.boundary_edges()) {
            const Point& p = m.vertices()[parent.v[0]];
            const Point& q = m.vertices()[parent.v[1]];
            auto near = [](const Point& x, const Point& y) { return std::hypot(x.x - y.x, x.y - y.y) < 1e-12; };
            // Each child shares one endpoint with its parent.
            if ((near(a, p) || near(a, q) || near(b, p) || near(b, q)) &&
                std::hypot(0.5 * (a.x + b.x) - 0.5 * (p.x + q.x), 0.5 * (a.y + b.y) - 0.5 * (p.y + q.y)) <
                    0.5 * std::hypot(p.x - q.x, p.y - q.y)) {
                EXPECT_EQ(child.marker, parent.marker);
                found = true;
                break;
            }
        }
        EXPECT_TRUE(found);
    }
}

TEST(Refinement, TwoTriangleSquare) {
    const Mesh m = testing_support::two_triangle_square();
    ASSERT_EQ(m.num_triangles(), 2u);
    const Mesh r1 = uniform_refine(m);
    EXPECT_EQ(r1.num_triangles(), 8u);
    EXPECT_NEAR(r1.h(), 0.5 * m.h(), 1e-15);
    EXPECT_EQ(uniform_refine(r1).num_triangles(), 32u);
}

TEST(RectangleMesh, UnitSquareCounts) {
    const Mesh m = generate_unit_square_mesh(0.25);
    EXPECT_EQ(m.num_triangles(), 32u);
    EXPECT_EQ(m.num_vertices(), 25u);
    EXPECT_NEAR(triangle_area_sum(m), 1.0, 1e-14);
    EXPECT_NEAR(m.h(), std::sqrt(2.0) * 0.25, 1e-15);
}

TEST(MeshIO, RoundTripIsExact) {
    testing_support::TempDir dir;
    const Mesh m = generate_channel_mesh(0.1, 16);
    save_mesh(m, dir / "m.txt");
    const Mesh r = load_mesh(dir / "m.txt");
    ASSERT_EQ(r.num_vertices(), m.num_vertices());
    ASSERT_EQ(r.num_triangles(), m.num_triangles());
    for (std::size_t i = 0; i < m.num_vertices(); ++i) {
        EXPECT_EQ(r.vertices()[i].x, m.vertices()[i].x);
        EXPECT_EQ(r.vertices()[i].y, m.vertices()[i].y);
    }
    EXPECT_EQ(r.triangles(), m.triangles());
    ASSERT_EQ(r.boundary_edges().size(), m.boundary_edges().size());
    for (std::size_t i = 0; i < m.boundary_edges().size(); ++i) {
        EXPECT_EQ(r.boundary_edges()[i].v, m.boundary_edges()[i].v);
        EXPECT_EQ(r.boundary_edges()[i].marker, m.boundary_edges()[i].marker);
    }
    EXPECT_EQ(r.hash(), m.hash());
}

TEST(MeshIO, MalformedFilesReportLines) {
    const std::string missing_vertex = "3 1 3\n0 0\n1 0\n0 1\n0 1 7\n0 1 wall\n1 2 wall\n2 0 wall\n";
    try {
        parse_mesh(missing_vertex);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 5);
    }
    EXPECT_THROW(parse_mesh(""), ParseError);
    EXPECT_THROW(parse_mesh("3 1 3\n0 0\n1 0\n0 1\n0 1 2\n0 1 wall\n1 2 wall\n2 0 lid\n"), ParseError);
}

TEST(Overlay, ChannelStripsAtTheDefaultWidth) {
    const Mesh m = generate_channel_mesh(0.1, 16);
    const CoarseOverlay o = build_coarse_overlay(m, 2.2 / 8);
    EXPECT_EQ(o.nx(), 8);
    EXPECT_EQ(o.ny(), 2);
    EXPECT_EQ(o.size(), 16u);
}

TEST(Overlay, EightByEightGivesSixtyFourCells) {
    const Mesh m = generate_channel_mesh(0.1, 16);
    const CoarseOverlay o = build_coarse_overlay(m, 8, 8);
    EXPECT_EQ(o.size(), 64u);
    EXPECT_NEAR(o.cell_width(), 2.2 / 8, 1e-15);
    EXPECT_NEAR(o.cell_height(), 0.41 / 8, 1e-15);
}

TEST(Overlay, WideCellsAndUnitSquare) {
    const Mesh ch = generate_channel_mesh(0.1, 16);
    EXPECT_EQ(build_coarse_overlay(ch, 2.2).nx(), 1);
    EXPECT_EQ(build_coarse_overlay(ch, 3.0).nx(), 1);
    EXPECT_EQ(build_coarse_overlay(generate_unit_square_mesh(0.25), 0.5).size(), 4u);
    EXPECT_THROW(build_coarse_overlay(ch, 0.0), ParameterError);
    EXPECT_THROW(build_coarse_overlay(ch, -0.1), ParameterError);
}

TEST(Overlay, CellsTileWithoutOverlapAndEveryVertexHasOneCell) {
    const Mesh m = generate_channel_mesh(0.1, 16);
    const CoarseOverlay o = build_coarse_overlay(m, 8, 8);
    double area = 0.0;
    for (const auto& c : o.cells()) area += (c.x1 - c.x0) * (c.y1 - c.y0);
    EXPECT_NEAR(area, 2.2 * 0.41, 1e-12);
    for (const auto& v : m.vertices()) {
        const int k = o.cell_of_point(v);
        ASSERT_GE(k, 0);
        EXPECT_TRUE(o.cells()[static_cast<std::size_t>(k)].contains(v));
    }
}

TEST(Overlay, CellsOutsideTheDomainAreDropped) {
    // L-shaped mesh: the upper right quarter of the overlay holds no triangle.
    std::vector<Point> v{{0, 0}, {1, 0}, {2, 0}, {0, 1}, {1, 1}, {2, 1}, {0, 2}, {1, 2}};
    std::vector<std::array<int, 3>> t{{0, 1, 4}, {0, 4, 3}, {1, 2, 5}, {1, 5, 4}, {3, 4, 7}, {3, 7, 6}};
    std::vector<BoundaryEdge> e{{{0, 1}, BoundaryMarker::wall}, {{1, 2}, BoundaryMarker::wall},
                                {{2, 5}, BoundaryMarker::wall}, {{5, 4}, BoundaryMarker::wall},
                                {{4, 7}, BoundaryMarker::wall}, {{7, 6}, BoundaryMarker::wall},
                                {{6, 3}, BoundaryMarker::wall}, {{3, 0}, BoundaryMarker::wall}};
    const Mesh m(v, t, e);
    const CoarseOverlay o = build_coarse_overlay(m, 2, 2);
    EXPECT_EQ(o.size(), 3u);
    EXPECT_EQ(o.cell_of_point({1.5, 1.5}), -1);
}

TEST(MeshValidation, RejectsClockwiseTriangles) {
    std::vector<Point> v{{0, 0}, {1, 0}, {0, 1}};
    std::vector<BoundaryEdge> e{{{0, 1}, BoundaryMarker::wall}, {{1, 2}, BoundaryMarker::wall},
                                {{2, 0}, BoundaryMarker::wall}};
    EXPECT_NO_THROW(Mesh(v, {{0, 1, 2}}, e));
    EXPECT_THROW(Mesh(v, {{0, 2, 1}}, e), ParameterError);
}
