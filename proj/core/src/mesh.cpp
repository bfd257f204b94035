#include "cdarom/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "cdarom/error.hpp"

namespace cdarom {

namespace {

double cross(const Point& a, const Point& b, const Point& c) {
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

double dist(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::pair<int, int> edge_key(int a, int b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

// Orients a triangle counterclockwise; throws on zero area.
std::array<int, 3> ccw(const std::vector<Point>& v, int a, int b, int c) {
    const double s = cross(v[a], v[b], v[c]);
    if (s == 0.0) throw ParameterError("mesh generation produced a degenerate triangle");
    return s > 0 ? std::array{a, b, c} : std::array{a, c, b};
}

std::vector<double> subdivide(double a, double b, double target_h) {
    const int n = std::max(1, static_cast<int>(std::ceil((b - a) / target_h - 1e-9)));
    std::vector<double> out(n + 1);
    for (int i = 0; i <= n; ++i) out[i] = a + (b - a) * i / n;
    out.back() = b;
    return out;
}

std::vector<double> breakpoints_grid(const std::vector<double>& breaks, double target_h) {
    std::vector<double> out{breaks.front()};
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        const auto seg = subdivide(breaks[i], breaks[i + 1], target_h);
        out.insert(out.end(), seg.begin() + 1, seg.end());
    }
    return out;
}

int index_of(const std::vector<double>& v, double x) {
    for (std::size_t i = 0; i < v.size(); ++i)
        if (std::abs(v[i] - x) < 1e-12) return static_cast<int>(i);
    return -1;
}

double wrap_angle(double a) {
    const double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a, two_pi);
    if (a < 0) a += two_pi;
    return a;
}

// Triangulates the ring between two closed counterclockwise loops around `center`.
void zip_loops(const std::vector<Point>& pts, const std::vector<int>& inner,
               const std::vector<int>& outer, const Point& center,
               std::vector<std::array<int, 3>>& tris) {
    const double two_pi = 2.0 * std::numbers::pi;
    auto angle = [&](int v) { return std::atan2(pts[v].y - center.y, pts[v].x - center.x); };
    const double a0 = angle(inner[0]);

    std::size_t j0 = 0;
    double best = std::numeric_limits<double>::max();
    for (std::size_t j = 0; j < outer.size(); ++j) {
        double d = wrap_angle(angle(outer[j]) - a0);
        if (d > std::numbers::pi) d -= two_pi;
        if (std::abs(d) < best) {
            best = std::abs(d);
            j0 = j;
        }
    }
    const std::size_t na = inner.size(), nb = outer.size();
    auto inner_at = [&](std::size_t i) { return inner[i % na]; };
    auto outer_at = [&](std::size_t j) { return outer[(j0 + j) % nb]; };
    auto inner_angle = [&](std::size_t i) { return i == na ? two_pi : wrap_angle(angle(inner_at(i)) - a0); };
    double outer_start = wrap_angle(angle(outer_at(0)) - a0);
    if (outer_start > std::numbers::pi) outer_start -= two_pi;
    auto outer_angle = [&](std::size_t j) {
        return j == nb ? outer_start + two_pi : outer_start + wrap_angle(angle(outer_at(j)) - a0 - outer_start);
    };

    std::size_t i = 0, j = 0;
    while (i < na || j < nb) {
        const bool advance_inner = (j == nb) || (i < na && inner_angle(i + 1) <= outer_angle(j + 1));
        if (advance_inner) {
            tris.push_back(ccw(pts, inner_at(i), inner_at(i + 1), outer_at(j)));
            ++i;
        } else {
            tris.push_back(ccw(pts, inner_at(i), outer_at(j), outer_at(j + 1)));
            ++j;
        }
    }
}

Mesh build_channel(double target_h, int circle_segments, int layers) {
    using namespace channel;
    const Point c = cylinder_center;
    const double a = 0.1;  // half width of the box around the cylinder
    const double bx0 = c.x - a, bx1 = c.x + a, by0 = c.y - a, by1 = c.y + a;

    const auto xs = breakpoints_grid({0.0, bx0, bx1, length}, target_h);
    const auto ys = breakpoints_grid({0.0, by0, by1, height}, target_h);
    const int ix0 = index_of(xs, bx0), ix1 = index_of(xs, bx1);
    const int iy0 = index_of(ys, by0), iy1 = index_of(ys, by1);
    const int nx = static_cast<int>(xs.size()), ny = static_cast<int>(ys.size());

    auto inside_box = [&](int i, int j) { return i > ix0 && i < ix1 && j > iy0 && j < iy1; };

    std::vector<Point> pts;
    std::vector<int> grid_id(static_cast<std::size_t>(nx) * ny, -1);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            if (!inside_box(i, j)) {
                grid_id[j * nx + i] = static_cast<int>(pts.size());
                pts.push_back({xs[i], ys[j]});
            }
    auto gid = [&](int i, int j) { return grid_id[j * nx + i]; };

    std::vector<std::array<int, 3>> tris;
    for (int j = 0; j + 1 < ny; ++j)
        for (int i = 0; i + 1 < nx; ++i) {
            if (i >= ix0 && i < ix1 && j >= iy0 && j < iy1) continue;
            const int v00 = gid(i, j), v10 = gid(i + 1, j), v11 = gid(i + 1, j + 1), v01 = gid(i, j + 1);
            tris.push_back(ccw(pts, v00, v10, v11));
            tris.push_back(ccw(pts, v00, v11, v01));
        }

    // Box perimeter, counterclockwise from the lower-left corner.
    std::vector<int> perimeter;
    for (int i = ix0; i < ix1; ++i) perimeter.push_back(gid(i, iy0));
    for (int j = iy0; j < iy1; ++j) perimeter.push_back(gid(ix1, j));
    for (int i = ix1; i > ix0; --i) perimeter.push_back(gid(i, iy1));
    for (int j = iy1; j > iy0; --j) perimeter.push_back(gid(ix0, j));

    // Radial rings; ring 0 is the inscribed cylinder polygon.
    std::vector<std::vector<int>> rings(layers);
    for (int l = 0; l < layers; ++l) {
        const double s = static_cast<double>(l) / layers;
        for (int k = 0; k < circle_segments; ++k) {
            const double th = 2.0 * std::numbers::pi * k / circle_segments;
            const double ct = std::cos(th), st = std::sin(th);
            const double to_box = a / std::max(std::abs(ct), std::abs(st));
            const double rad = cylinder_radius + (to_box - cylinder_radius) * s;
            rings[l].push_back(static_cast<int>(pts.size()));
            pts.push_back(l == 0 ? Point{c.x + cylinder_radius * ct, c.y + cylinder_radius * st}
                                 : Point{c.x + rad * ct, c.y + rad * st});
        }
    }
    for (int l = 0; l + 1 < layers; ++l)
        for (int k = 0; k < circle_segments; ++k) {
            const int kn = (k + 1) % circle_segments;
            const int a0 = rings[l][k], a1 = rings[l][kn], b0 = rings[l + 1][k], b1 = rings[l + 1][kn];
            tris.push_back(ccw(pts, a0, a1, b1));
            tris.push_back(ccw(pts, a0, b1, b0));
        }
    zip_loops(pts, rings.back(), perimeter, c, tris);

    std::vector<BoundaryEdge> edges;
    for (int j = 0; j + 1 < ny; ++j) {
        edges.push_back({{gid(0, j), gid(0, j + 1)}, BoundaryMarker::inflow});
        edges.push_back({{gid(nx - 1, j), gid(nx - 1, j + 1)}, BoundaryMarker::outflow});
    }
    for (int i = 0; i + 1 < nx; ++i) {
        edges.push_back({{gid(i, 0), gid(i + 1, 0)}, BoundaryMarker::wall});
        edges.push_back({{gid(i, ny - 1), gid(i + 1, ny - 1)}, BoundaryMarker::wall});
    }
    for (int k = 0; k < circle_segments; ++k)
        edges.push_back({{rings[0][k], rings[0][(k + 1) % circle_segments]}, BoundaryMarker::cylinder});

    return Mesh(std::move(pts), std::move(tris), std::move(edges));
}

}  // namespace

std::string to_string(BoundaryMarker m) {
    switch (m) {
        case BoundaryMarker::inflow: return "inflow";
        case BoundaryMarker::outflow: return "outflow";
        case BoundaryMarker::wall: return "wall";
        case BoundaryMarker::cylinder: return "cylinder";
    }
    return "wall";
}

BoundaryMarker marker_from_string(const std::string& s) {
    if (s == "inflow") return BoundaryMarker::inflow;
    if (s == "outflow") return BoundaryMarker::outflow;
    if (s == "wall") return BoundaryMarker::wall;
    if (s == "cylinder") return BoundaryMarker::cylinder;
    throw ParameterError("unknown boundary marker '" + s + "'");
}

Mesh::Mesh(std::vector<Point> vertices, std::vector<std::array<int, 3>> triangles,
           std::vector<BoundaryEdge> boundary_edges)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)), boundary_edges_(std::move(boundary_edges)) {
    validate();
    for (const auto& t : triangles_)
        for (int e = 0; e < 3; ++e)
            h_ = std::max(h_, dist(vertices_[t[e]], vertices_[t[(e + 1) % 3]]));
}

void Mesh::validate() const {
    if (vertices_.empty() || triangles_.empty()) throw ParameterError("mesh has no vertices or no triangles");
    const int nv = static_cast<int>(vertices_.size());
    std::map<std::pair<int, int>, int> edge_count;
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
        const auto& tri = triangles_[t];
        for (int k : tri)
            if (k < 0 || k >= nv) throw ParameterError("triangle " + std::to_string(t) + " references missing vertex");
        if (signed_area(t) <= 0.0)
            throw ParameterError("triangle " + std::to_string(t) + " has non-positive signed area");
        for (int e = 0; e < 3; ++e) ++edge_count[edge_key(tri[e], tri[(e + 1) % 3])];
    }
    std::size_t n_boundary = 0;
    for (const auto& [k, n] : edge_count) {
        if (n > 2) throw ParameterError("non-manifold edge in mesh");
        if (n == 1) ++n_boundary;
    }
    std::map<std::pair<int, int>, int> marked;
    for (const auto& be : boundary_edges_) {
        const auto key = edge_key(be.v[0], be.v[1]);
        const auto it = edge_count.find(key);
        if (it == edge_count.end() || it->second != 1)
            throw ParameterError("marked edge (" + std::to_string(be.v[0]) + "," + std::to_string(be.v[1]) +
                                 ") is not a boundary edge of exactly one triangle");
        if (++marked[key] > 1) throw ParameterError("boundary edge marked twice");
    }
    if (marked.size() != n_boundary) throw ParameterError("boundary edges not fully marked");
}

double Mesh::signed_area(std::size_t t) const {
    const auto& tri = triangles_[t];
    return 0.5 * cross(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]);
}

double Mesh::total_area() const {
    double a = 0.0;
    for (std::size_t t = 0; t < triangles_.size(); ++t) a += signed_area(t);
    return a;
}

std::array<Point, 2> Mesh::bounding_box() const {
    Point lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
    Point hi{std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()};
    for (const auto& p : vertices_) {
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        hi.x = std::max(hi.x, p.x);
        hi.y = std::max(hi.y, p.y);
    }
    return {lo, hi};
}

bool Mesh::has_marker(BoundaryMarker m) const {
    return std::any_of(boundary_edges_.begin(), boundary_edges_.end(), [m](const auto& e) { return e.marker == m; });
}

std::uint64_t Mesh::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : vertices_) {
        h = fnv1a(h, &p.x, sizeof(double));
        h = fnv1a(h, &p.y, sizeof(double));
    }
    for (const auto& t : triangles_) h = fnv1a(h, t.data(), sizeof(int) * 3);
    for (const auto& e : boundary_edges_) {
        h = fnv1a(h, e.v.data(), sizeof(int) * 2);
        h = fnv1a(h, &e.marker, 1);
    }
    return h;
}

Mesh generate_channel_mesh(double target_h, int circle_segments) {
    if (!(target_h > 0.0) || !std::isfinite(target_h))
        throw ParameterError("generate_channel_mesh: target_h must be positive, got " + std::to_string(target_h));
    if (circle_segments < 8)
        throw ParameterError("generate_channel_mesh: circle_segments must be >= 8, got " +
                             std::to_string(circle_segments));
    if (target_h > 0.2) throw ParameterError("generate_channel_mesh: target_h must be <= 0.2");

    const double ring_gap = 0.1 * std::numbers::sqrt2 - channel::cylinder_radius;
    int layers = std::max(1, static_cast<int>(std::ceil(ring_gap / target_h)));
    for (int attempt = 0; attempt < 16; ++attempt, ++layers) {
        Mesh m = build_channel(target_h, circle_segments, layers);
        if (m.h() <= 1.5 * target_h) return m;
    }
    throw ParameterError("generate_channel_mesh: cannot reach h <= 1.5*target_h with circle_segments=" +
                         std::to_string(circle_segments));
}

Mesh generate_rectangle_mesh(double x0, double x1, double y0, double y1, int nx, int ny) {
    if (!(x1 > x0) || !(y1 > y0)) throw ParameterError("generate_rectangle_mesh: empty rectangle");
    if (nx < 1 || ny < 1) throw ParameterError("generate_rectangle_mesh: nx and ny must be >= 1");
    std::vector<Point> pts;
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i)
            pts.push_back({x0 + (x1 - x0) * i / nx, y0 + (y1 - y0) * j / ny});
    auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
    std::vector<std::array<int, 3>> tris;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            tris.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            tris.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    std::vector<BoundaryEdge> edges;
    for (int i = 0; i < nx; ++i) {
        edges.push_back({{id(i, 0), id(i + 1, 0)}, BoundaryMarker::wall});
        edges.push_back({{id(i, ny), id(i + 1, ny)}, BoundaryMarker::wall});
    }
    for (int j = 0; j < ny; ++j) {
        edges.push_back({{id(0, j), id(0, j + 1)}, BoundaryMarker::wall});
        edges.push_back({{id(nx, j), id(nx, j + 1)}, BoundaryMarker::wall});
    }
    return Mesh(std::move(pts), std::move(tris), std::move(edges));
}

Mesh generate_unit_square_mesh(double target_h) {
    if (!(target_h > 0.0)) throw ParameterError("generate_unit_square_mesh: target_h must be positive");
    const int n = std::max(1, static_cast<int>(std::ceil(1.0 / target_h - 1e-9)));
    return generate_rectangle_mesh(0.0, 1.0, 0.0, 1.0, n, n);
}

Mesh uniform_refine(const Mesh& mesh) {
    std::vector<Point> pts = mesh.vertices();
    std::map<std::pair<int, int>, int> midpoint;
    std::map<std::pair<int, int>, BoundaryMarker> boundary;
    for (const auto& e : mesh.boundary_edges()) boundary[edge_key(e.v[0], e.v[1])] = e.marker;

    auto mid = [&](int a, int b) {
        const auto key = edge_key(a, b);
        if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
        Point m{0.5 * (pts[a].x + pts[b].x), 0.5 * (pts[a].y + pts[b].y)};
        if (auto it = boundary.find(key); it != boundary.end() && it->second == BoundaryMarker::cylinder) {
            const Point c = channel::cylinder_center;
            const double r = std::hypot(m.x - c.x, m.y - c.y);
            m = {c.x + (m.x - c.x) * channel::cylinder_radius / r, c.y + (m.y - c.y) * channel::cylinder_radius / r};
        }
        const int id = static_cast<int>(pts.size());
        pts.push_back(m);
        midpoint.emplace(key, id);
        return id;
    };

    std::vector<std::array<int, 3>> tris;
    tris.reserve(4 * mesh.num_triangles());
    for (const auto& t : mesh.triangles()) {
        const int m01 = mid(t[0], t[1]), m12 = mid(t[1], t[2]), m20 = mid(t[2], t[0]);
        tris.push_back({t[0], m01, m20});
        tris.push_back({m01, t[1], m12});
        tris.push_back({m20, m12, t[2]});
        tris.push_back({m01, m12, m20});
    }
    std::vector<BoundaryEdge> edges;
    edges.reserve(2 * mesh.boundary_edges().size());
    for (const auto& e : mesh.boundary_edges()) {
        const int m = midpoint.at(edge_key(e.v[0], e.v[1]));
        edges.push_back({{e.v[0], m}, e.marker});
        edges.push_back({{m, e.v[1]}, e.marker});
    }
    return Mesh(std::move(pts), std::move(tris), std::move(edges));
}

std::string format_mesh(const Mesh& mesh) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << mesh.num_vertices() << ' ' << mesh.num_triangles() << ' ' << mesh.boundary_edges().size() << '\n';
    for (const auto& p : mesh.vertices()) os << p.x << ' ' << p.y << '\n';
    for (const auto& t : mesh.triangles()) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    for (const auto& e : mesh.boundary_edges()) os << e.v[0] << ' ' << e.v[1] << ' ' << to_string(e.marker) << '\n';
    return os.str();
}

Mesh parse_mesh(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    auto next_line = [&](const char* what) -> std::istringstream {
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") != std::string::npos) return std::istringstream(line);
        }
        throw ParseError(std::string("unexpected end of mesh file while reading ") + what, line_no + 1);
    };

    long nv = 0, nt = 0, ne = 0;
    {
        auto ls = next_line("header");
        if (!(ls >> nv >> nt >> ne) || nv <= 0 || nt <= 0 || ne < 0)
            throw ParseError("mesh header must be 'NV NT NE' with positive counts", line_no);
    }
    std::vector<Point> pts(nv);
    for (auto& p : pts) {
        auto ls = next_line("vertices");
        if (!(ls >> p.x >> p.y)) throw ParseError("expected 'x y'", line_no);
    }
    std::vector<std::array<int, 3>> tris(nt);
    for (auto& t : tris) {
        auto ls = next_line("triangles");
        if (!(ls >> t[0] >> t[1] >> t[2])) throw ParseError("expected 'i j k'", line_no);
        for (int k : t)
            if (k < 0 || k >= nv) throw ParseError("triangle references missing vertex " + std::to_string(k), line_no);
    }
    std::vector<BoundaryEdge> edges(ne);
    for (auto& e : edges) {
        auto ls = next_line("boundary edges");
        std::string marker;
        if (!(ls >> e.v[0] >> e.v[1] >> marker)) throw ParseError("expected 'i j marker'", line_no);
        for (int k : e.v)
            if (k < 0 || k >= nv) throw ParseError("edge references missing vertex " + std::to_string(k), line_no);
        try {
            e.marker = marker_from_string(marker);
        } catch (const ParameterError& err) {
            throw ParseError(err.what(), line_no);
        }
    }
    try {
        return Mesh(std::move(pts), std::move(tris), std::move(edges));
    } catch (const ParameterError& err) {
        throw ParseError(std::string("invalid mesh: ") + err.what());
    }
}

void save_mesh(const Mesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out << format_mesh(mesh);
}

Mesh load_mesh(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open mesh file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_mesh(ss.str());
}

// ---------------------------------------------------------------------------

namespace {

// Positive-area overlap between a triangle and an axis-aligned rectangle (separating axes).
bool triangle_overlaps_rect(const std::array<Point, 3>& t, const CoarseOverlay::Cell& c) {
    auto separated = [&](double nx, double ny) {
        double tmin = std::numeric_limits<double>::max(), tmax = std::numeric_limits<double>::lowest();
        for (const auto& p : t) {
            const double d = nx * p.x + ny * p.y;
            tmin = std::min(tmin, d);
            tmax = std::max(tmax, d);
        }
        double rmin = std::numeric_limits<double>::max(), rmax = std::numeric_limits<double>::lowest();
        for (double x : {c.x0, c.x1})
            for (double y : {c.y0, c.y1}) {
                const double d = nx * x + ny * y;
                rmin = std::min(rmin, d);
                rmax = std::max(rmax, d);
            }
        const double tol = 1e-12 * (std::abs(nx) + std::abs(ny));
        return tmax <= rmin + tol || rmax <= tmin + tol;
    };
    if (separated(1, 0) || separated(0, 1)) return false;
    for (int e = 0; e < 3; ++e) {
        const Point& a = t[e];
        const Point& b = t[(e + 1) % 3];
        if (separated(-(b.y - a.y), b.x - a.x)) return false;
    }
    return true;
}

}  // namespace

CoarseOverlay::CoarseOverlay(const Mesh& mesh, int nx, int ny) : nx_(nx), ny_(ny) {
    if (nx < 1 || ny < 1) throw ParameterError("coarse overlay needs at least one cell per direction");
    const auto [lo, hi] = mesh.bounding_box();
    x0_ = lo.x;
    y0_ = lo.y;
    dx_ = (hi.x - lo.x) / nx;
    dy_ = (hi.y - lo.y) / ny;

    std::vector<char> keep(static_cast<std::size_t>(nx) * ny, 0);
    for (const auto& tri : mesh.triangles()) {
        const std::array<Point, 3> t{mesh.vertices()[tri[0]], mesh.vertices()[tri[1]], mesh.vertices()[tri[2]]};
        const double txmin = std::min({t[0].x, t[1].x, t[2].x}), txmax = std::max({t[0].x, t[1].x, t[2].x});
        const double tymin = std::min({t[0].y, t[1].y, t[2].y}), tymax = std::max({t[0].y, t[1].y, t[2].y});
        const int i0 = std::clamp(static_cast<int>(std::floor((txmin - x0_) / dx_)), 0, nx - 1);
        const int i1 = std::clamp(static_cast<int>(std::floor((txmax - x0_) / dx_)), 0, nx - 1);
        const int j0 = std::clamp(static_cast<int>(std::floor((tymin - y0_) / dy_)), 0, ny - 1);
        const int j1 = std::clamp(static_cast<int>(std::floor((tymax - y0_) / dy_)), 0, ny - 1);
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) {
                Cell c{j * nx + i, x0_ + i * dx_, x0_ + (i + 1) * dx_, y0_ + j * dy_, y0_ + (j + 1) * dy_};
                if (!keep[c.id] && triangle_overlaps_rect(t, c)) keep[c.id] = 1;
            }
    }
    grid_to_cell_.assign(keep.size(), -1);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const int id = j * nx + i;
            if (!keep[id]) continue;
            grid_to_cell_[id] = static_cast<int>(cells_.size());
            cells_.push_back({id, x0_ + i * dx_, i + 1 == nx ? hi.x : x0_ + (i + 1) * dx_, y0_ + j * dy_,
                              j + 1 == ny ? hi.y : y0_ + (j + 1) * dy_});
        }
}

int CoarseOverlay::cell_of_point(const Point& p) const {
    const double fx = (p.x - x0_) / dx_, fy = (p.y - y0_) / dy_;
    const double slack = 1e-12;
    if (fx < -slack || fy < -slack || fx > nx_ + slack || fy > ny_ + slack) return -1;
    const int i = std::clamp(static_cast<int>(std::floor(fx)), 0, nx_ - 1);
    const int j = std::clamp(static_cast<int>(std::floor(fy)), 0, ny_ - 1);
    return grid_to_cell_[j * nx_ + i];
}

CoarseOverlay build_coarse_overlay(const Mesh& mesh, double H) {
    if (!(H > 0.0)) throw ParameterError("build_coarse_overlay: H must be positive, got " + std::to_string(H));
    const auto [lo, hi] = mesh.bounding_box();
    const int nx = std::max(1, static_cast<int>(std::ceil((hi.x - lo.x) / H - 1e-9)));
    const int ny = std::max(1, static_cast<int>(std::ceil((hi.y - lo.y) / H - 1e-9)));
    return CoarseOverlay(mesh, nx, ny);
}

CoarseOverlay build_coarse_overlay(const Mesh& mesh, int nx, int ny) { return CoarseOverlay(mesh, nx, ny); }

}  // namespace cdarom
