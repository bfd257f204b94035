#include "cdarom/quantities.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "cdarom/error.hpp"

namespace cdarom {

namespace {

Eigen::VectorXd harmonic_extension(const FESpace& scalar) {
    const SparseMatrix a = assemble_stiffness(scalar);
    const std::array<BoundaryMarker, 1> cyl{BoundaryMarker::cylinder};
    const std::array<BoundaryMarker, 3> rest{BoundaryMarker::inflow, BoundaryMarker::outflow, BoundaryMarker::wall};
    std::vector<std::pair<int, double>> bc;
    for (int i : scalar.boundary_nodes(rest)) bc.emplace_back(i, 0.0);
    // Corner-free geometry: cylinder nodes never coincide with outer-boundary nodes.
    for (int i : scalar.boundary_nodes(cyl)) bc.emplace_back(i, 1.0);
    return solve_with_dirichlet(a, Eigen::VectorXd::Zero(a.rows()), bc);
}

std::array<double, 3> p1_weights(const FESpace& space, const Point& x, int& element) {
    double xi = 0.0, eta = 0.0;
    element = space.locate(x, xi, eta);
    if (element < 0)
        throw ParameterError("point (" + std::to_string(x.x) + ", " + std::to_string(x.y) + ") is outside the mesh");
    return {1.0 - xi - eta, xi, eta};
}

}  // namespace

BenchmarkFunctionals::BenchmarkFunctionals(std::shared_ptr<const FESpace> velocity,
                                           std::shared_ptr<const FESpace> pressure, double nu)
    : BenchmarkFunctionals(std::move(velocity), std::move(pressure), nu, Options{}) {}

BenchmarkFunctionals::BenchmarkFunctionals(std::shared_ptr<const FESpace> velocity,
                                           std::shared_ptr<const FESpace> pressure, double nu, Options opt)
    : velocity_(std::move(velocity)), pressure_(std::move(pressure)), nu_(nu), opt_(opt) {
    if (velocity_->components() != 2) throw ParameterError("benchmark functionals need a vector velocity space");
    if (pressure_->degree() != 1) throw ParameterError("benchmark functionals need a P1 pressure space");
    if (!velocity_->mesh().has_marker(BoundaryMarker::cylinder))
        throw ParameterError("mesh has no cylinder boundary");
    if (!(opt_.diameter > 0.0) || !(opt_.mean_velocity > 0.0)) throw ParameterError("invalid reference scales");

    const auto nn = static_cast<Eigen::Index>(velocity_->num_nodes());
    Eigen::VectorXd ext = Eigen::VectorXd::Zero(nn);
    const FESpace scalar(velocity_->mesh_ptr(), velocity_->degree(), 1);
    if (opt_.extension == DragExtension::harmonic) {
        ext = harmonic_extension(scalar);
    } else {
        const std::array<BoundaryMarker, 1> cyl{BoundaryMarker::cylinder};
        for (int i : scalar.boundary_nodes(cyl)) ext[i] = 1.0;
    }
    v_drag_ = Eigen::VectorXd::Zero(2 * nn);
    v_lift_ = Eigen::VectorXd::Zero(2 * nn);
    v_drag_.head(nn) = ext;
    v_lift_.tail(nn) = ext;

    mass_u_ = assemble_mass(*velocity_);
    const SparseMatrix a = assemble_stiffness(*velocity_);
    const SparseMatrix b = assemble_divergence(*velocity_, *pressure_);
    a_drag_ = a * v_drag_;
    a_lift_ = a * v_lift_;
    d_drag_ = b * v_drag_;
    d_lift_ = b * v_lift_;

    for (std::size_t e = 0; e < velocity_->num_elements(); ++e) {
        const auto nodes = velocity_->element_nodes(e);
        if (std::any_of(nodes.begin(), nodes.end(), [&](int i) { return ext[i] != 0.0; }))
            support_.push_back(static_cast<int>(e));
    }
    cache_ = std::make_unique<QuadratureCache>(*velocity_);

    front_.weights = p1_weights(*pressure_, opt_.front, front_.element);
    back_.weights = p1_weights(*pressure_, opt_.back, back_.element);
}

double BenchmarkFunctionals::convective(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
    const auto nn = static_cast<Eigen::Index>(velocity_->num_nodes());
    const int nb = velocity_->nodes_per_element();
    double sum = 0.0;
    for (int e : support_) {
        const auto nodes = velocity_->element_nodes(e);
        for (int q = 0; q < cache_->num_points(); ++q) {
            const double* val = cache_->values(e, q);
            const Eigen::Vector2d* grad = cache_->gradients(e, q);
            Eigen::Vector2d uh = Eigen::Vector2d::Zero(), vh = Eigen::Vector2d::Zero();
            Eigen::Matrix2d gu = Eigen::Matrix2d::Zero(), gv = Eigen::Matrix2d::Zero();
            for (int i = 0; i < nb; ++i) {
                for (int c = 0; c < 2; ++c) {
                    const double uc = u[c * nn + nodes[i]];
                    const double vc = v[c * nn + nodes[i]];
                    uh[c] += uc * val[i];
                    vh[c] += vc * val[i];
                    gu.row(c) += uc * grad[i].transpose();
                    gv.row(c) += vc * grad[i].transpose();
                }
            }
            sum += cache_->weight(e, q) * 0.5 * ((gu * uh).dot(vh) - (gv * uh).dot(uh));
        }
    }
    return sum;
}

std::pair<double, double> BenchmarkFunctionals::drag_lift(const Eigen::VectorXd& u, const Eigen::VectorXd& p) const {
    if (u.size() != v_drag_.size() || p.size() != d_drag_.size()) throw ParameterError("state size mismatch");
    const double scale = -2.0 / (opt_.diameter * opt_.mean_velocity * opt_.mean_velocity);
    const double cd = scale * (nu_ * a_drag_.dot(u) + convective(u, v_drag_) - p.dot(d_drag_));
    const double cl = scale * (nu_ * a_lift_.dot(u) + convective(u, v_lift_) - p.dot(d_lift_));
    return {cd, cl};
}

double BenchmarkFunctionals::pressure_difference(const Eigen::VectorXd& p) const {
    auto eval = [&](const PointEval& pe) {
        const auto nodes = pressure_->element_nodes(pe.element);
        return pe.weights[0] * p[nodes[0]] + pe.weights[1] * p[nodes[1]] + pe.weights[2] * p[nodes[2]];
    };
    return eval(front_) - eval(back_);
}

double BenchmarkFunctionals::kinetic_energy(const Eigen::VectorXd& u) const { return cdarom::kinetic_energy(u, mass_u_); }

double kinetic_energy(const Eigen::VectorXd& u, const SparseMatrix& mass) {
    if (u.size() != mass.rows()) throw ParameterError("kinetic_energy: size mismatch");
    return 0.5 * u.dot(mass * u);
}

double pressure_diff(const Eigen::VectorXd& p, const FESpace& space, Point front, Point back) {
    return space.evaluate_at(p, front) - space.evaluate_at(p, back);
}

std::vector<double> relative_error_series(const std::vector<double>& test_times, const Eigen::MatrixXd& test,
                                          const std::vector<double>& ref_times, const Eigen::MatrixXd& ref,
                                          const SparseMatrix& mass) {
    if (test_times.size() != ref_times.size() || test.cols() != ref.cols() ||
        static_cast<std::size_t>(test.cols()) != test_times.size())
        throw ParameterError("relative_error_series: series lengths differ");
    if (test.rows() != ref.rows() || test.rows() != mass.rows())
        throw ParameterError("relative_error_series: dimension mismatch");
    std::vector<double> out(test_times.size());
    for (std::size_t j = 0; j < test_times.size(); ++j) {
        if (std::abs(test_times[j] - ref_times[j]) > 1e-9 * std::max(1.0, std::abs(ref_times[j])))
            throw ParameterError("relative_error_series: time grids are not aligned at index " + std::to_string(j));
        const auto k = static_cast<Eigen::Index>(j);
        const Eigen::VectorXd d = test.col(k) - ref.col(k);
        const double den = std::sqrt(ref.col(k).dot(mass * ref.col(k)));
        const double num = std::sqrt(d.dot(mass * d));
        out[j] = den > 0.0 ? num / den : (num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    }
    return out;
}

double stability_diagnostic(double h, const std::vector<double>& eigenvalues, int r) {
    if (!(h > 0.0)) throw ParameterError("mesh size must be positive");
    if (r < 0 || static_cast<std::size_t>(r) >= eigenvalues.size())
        throw ParameterError("stability diagnostic needs lambda_{r+1}; r = " + std::to_string(r) + " but only " +
                             std::to_string(eigenvalues.size()) + " eigenvalues are available");
    return std::sqrt(std::max(eigenvalues[static_cast<std::size_t>(r)], 0.0)) / h;
}

PeriodMaxima final_period_maxima(const QuantitySeries& q) {
    if (q.size() == 0) throw ParameterError("empty quantity series");
    std::vector<double> crossings;
    std::vector<std::size_t> idx;
    for (std::size_t i = 1; i < q.size(); ++i) {
        if (q.c_l[i - 1] < 0.0 && q.c_l[i] >= 0.0) {
            const double s = q.c_l[i - 1] / (q.c_l[i - 1] - q.c_l[i]);
            crossings.push_back(q.t[i - 1] + s * (q.t[i] - q.t[i - 1]));
            idx.push_back(i);
        }
    }
    PeriodMaxima m;
    std::size_t lo = 0, hi = q.size();
    if (idx.size() >= 2) {
        lo = idx[idx.size() - 2] - 1;
        hi = idx.back() + 1;
        m.full_period = true;
        m.period_start = crossings[crossings.size() - 2];
        m.period_end = crossings.back();
    } else {
        m.period_start = q.t.front();
        m.period_end = q.t.back();
    }
    m.cd_max = *std::max_element(q.c_d.begin() + static_cast<long>(lo), q.c_d.begin() + static_cast<long>(hi));
    m.cl_max = *std::max_element(q.c_l.begin() + static_cast<long>(lo), q.c_l.begin() + static_cast<long>(hi));
    return m;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open '" + path.string() + "' for writing");
    f << std::setprecision(17);
    return f;
}

double column(const std::vector<double>& v, std::size_t i) {
    return i < v.size() ? v[i] : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

void write_quantities_csv(const QuantitySeries& q, const std::filesystem::path& path) {
    auto f = open_csv(path);
    f << "t,c_D,c_L,E_kin,dp\n";
    for (std::size_t i = 0; i < q.size(); ++i)
        f << q.t[i] << ',' << q.c_d[i] << ',' << q.c_l[i] << ',' << q.e_kin[i] << ',' << q.dp[i] << '\n';
    if (!f) throw Error("write to '" + path.string() + "' failed");
}

namespace {

std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path, const std::string& header,
                                                  std::size_t ncols) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open '" + path.string() + "'", 0);
    std::string line;
    if (!std::getline(f, line) || line.rfind(header, 0) != 0)
        throw ParseError("'" + path.string() + "': missing header " + header, 1);
    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> v;
        std::istringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            if (v.size() >= ncols) throw ParseError("'" + path.string() + "': too many columns", lineno);
            char* end = nullptr;
            v.push_back(std::strtod(cell.c_str(), &end));
            if (end == cell.c_str() || *end != '\0')
                throw ParseError("'" + path.string() + "': bad number '" + cell + "'", lineno);
        }
        if (v.size() != ncols)
            throw ParseError("'" + path.string() + "': expected " + std::to_string(ncols) + " columns", lineno);
        rows.push_back(std::move(v));
    }
    return rows;
}

}  // namespace

QuantitySeries read_quantities_csv(const std::filesystem::path& path) {
    QuantitySeries q;
    for (const auto& v : read_numeric_csv(path, "t,c_D,c_L,E_kin,dp", 5)) q.push(v[0], v[1], v[2], v[3], v[4]);
    return q;
}

QuantitySeries read_report_csv(const std::filesystem::path& path) {
    QuantitySeries q;
    for (const auto& v : read_numeric_csv(path, "t,cD,cL,Ekin,dp,relerr_u,relerr_p", 7)) {
        q.push(v[0], v[1], v[2], v[3], v[4]);
        q.relerr_u.push_back(v[5]);
        q.relerr_p.push_back(v[6]);
    }
    return q;
}

void write_report_csv(const QuantitySeries& q, const std::filesystem::path& path) {
    auto f = open_csv(path);
    f << "t,cD,cL,Ekin,dp,relerr_u,relerr_p\n";
    for (std::size_t i = 0; i < q.size(); ++i)
        f << q.t[i] << ',' << q.c_d[i] << ',' << q.c_l[i] << ',' << q.e_kin[i] << ',' << q.dp[i] << ','
          << column(q.relerr_u, i) << ',' << column(q.relerr_p, i) << '\n';
    if (!f) throw Error("write to '" + path.string() + "' failed");
}

}  // namespace cdarom
