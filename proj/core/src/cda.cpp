#include "cdarom/cda.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "cdarom/error.hpp"

namespace cdarom {

ObservationOperator::ObservationOperator(std::shared_ptr<const FESpace> space, CoarseOverlay overlay)
    : space_(std::move(space)), overlay_(std::move(overlay)) {
    const auto& cells = overlay_.cells();
    const auto& pts = space_->node_coordinates();
    nodes_.assign(cells.size(), -1);
    for (std::size_t k = 0; k < cells.size(); ++k) {
        const Point c = cells[k].center();
        const double tie = 1e-12 * std::max(overlay_.cell_width(), overlay_.cell_height());
        double best = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (!cells[k].contains(pts[i])) continue;
            const double d = std::hypot(pts[i].x - c.x, pts[i].y - c.y);
            if (nodes_[k] < 0 || d < best - tie) {
                nodes_[k] = static_cast<int>(i);
                best = d;
            }
        }
        if (nodes_[k] < 0) {
            std::ostringstream msg;
            msg << "overlay cell " << cells[k].id << " [" << cells[k].x0 << ", " << cells[k].x1 << "] x ["
                << cells[k].y0 << ", " << cells[k].y1 << "] contains no finite element node";
            throw ParameterError(msg.str());
        }
    }

    measures_.assign(cells.size(), 0.0);
    const QuadratureCache cache(*space_);
    for (std::size_t e = 0; e < space_->num_elements(); ++e)
        for (int q = 0; q < cache.num_points(); ++q) {
            const int k = overlay_.cell_of_point(cache.point(e, q));
            if (k >= 0) measures_[k] += cache.weight(e, q);
        }

    const int nc = components();
    const auto ncell = static_cast<Eigen::Index>(cells.size());
    weights_.resize(nc * ncell);
    std::vector<Eigen::Triplet<double>> trip;
    for (int c = 0; c < nc; ++c)
        for (Eigen::Index k = 0; k < ncell; ++k) {
            weights_[c * ncell + k] = measures_[k];
            trip.emplace_back(c * ncell + k, space_->dof(nodes_[k], c), 1.0);
        }
    selection_.resize(nc * ncell, static_cast<Eigen::Index>(space_->dof_count()));
    selection_.setFromTriplets(trip.begin(), trip.end());
}

ObservationOperator select_observation_points(std::shared_ptr<const FESpace> space, const CoarseOverlay& overlay) {
    return ObservationOperator(std::move(space), overlay);
}

Eigen::VectorXd ObservationOperator::apply(const Eigen::VectorXd& field) const {
    if (field.size() != selection_.cols()) throw ParameterError("I_H: field size does not match the space");
    return selection_ * field;
}

Eigen::MatrixXd ObservationOperator::apply(const Eigen::MatrixXd& fields) const {
    if (fields.rows() != selection_.cols()) throw ParameterError("I_H: field size does not match the space");
    return selection_ * fields;
}

double ObservationOperator::observed_norm(const Eigen::VectorXd& observed) const {
    if (observed.size() != weights_.size()) throw ParameterError("observed vector has the wrong size");
    return std::sqrt((weights_.array() * observed.array().square()).sum());
}

double ObservationOperator::interpolation_error(const Eigen::VectorXd& field) const {
    const Eigen::VectorXd obs = apply(field);
    const QuadratureCache cache(*space_);
    const int nb = space_->nodes_per_element();
    const int nc = components();
    const auto ncell = static_cast<Eigen::Index>(num_cells());
    double sum = 0.0;
    for (std::size_t e = 0; e < space_->num_elements(); ++e) {
        const auto ln = space_->element_nodes(e);
        for (int q = 0; q < cache.num_points(); ++q) {
            const int k = overlay_.cell_of_point(cache.point(e, q));
            const double* v = cache.values(e, q);
            for (int c = 0; c < nc; ++c) {
                double wh = 0.0;
                for (int i = 0; i < nb; ++i) wh += field[space_->dof(ln[i], c)] * v[i];
                const double ih = k >= 0 ? obs[c * ncell + k] : 0.0;
                sum += cache.weight(e, q) * (ih - wh) * (ih - wh);
            }
        }
    }
    return std::sqrt(sum);
}

NudgingMatrices assemble_nudging_matrices(const ObservationOperator& op, const Eigen::MatrixXd& modes) {
    if (modes.rows() != op.selection().cols()) throw ParameterError("nudging: modes do not live in the observed space");
    const Eigen::MatrixXd observed = op.selection() * modes;
    NudgingMatrices out;
    out.G = observed.transpose() * op.weights().asDiagonal();
    out.N = out.G * observed;
    out.N = 0.5 * (out.N + out.N.transpose()).eval();
    return out;
}

double ObservationSeries::max_offset() const {
    double m = 0.0;
    for (double o : offsets) m = std::max(m, std::abs(o));
    return m;
}

std::size_t ObservationSeries::index_of(double t) const {
    const auto it = std::lower_bound(times.begin(), times.end(), t - 1e-9 * std::max(1.0, std::abs(t)));
    if (it == times.end() || std::abs(*it - t) > 1e-9 * std::max(1.0, std::abs(t)))
        throw ParameterError("no observation at t = " + std::to_string(t));
    return static_cast<std::size_t>(it - times.begin());
}

ObservationSeries observation_series(const SnapshotSet& truth, const ObservationOperator& velocity_op,
                                     const ObservationOperator& pressure_op, const std::vector<double>& times) {
    if (truth.size() == 0) throw ParameterError("truth trajectory is empty");
    if (truth.meta.dq_augmented) throw ParameterError("truth trajectory must not be DQ-augmented");
    if (truth.velocity.rows() != velocity_op.selection().cols() ||
        truth.pressure.rows() != pressure_op.selection().cols())
        throw ParameterError("truth trajectory does not match the observation spaces");
    const double spacing = truth.size() > 1 ? (truth.times.back() - truth.times.front()) / (truth.size() - 1) : 0.0;
    const double slack = 0.5 * spacing + 1e-9 * std::max(1.0, std::abs(truth.times.back()));

    ObservationSeries s;
    s.times = times;
    s.velocity.resize(static_cast<Eigen::Index>(velocity_op.size()), static_cast<Eigen::Index>(times.size()));
    s.pressure.resize(static_cast<Eigen::Index>(pressure_op.size()), static_cast<Eigen::Index>(times.size()));
    for (std::size_t j = 0; j < times.size(); ++j) {
        if (j > 0 && !(times[j] > times[j - 1])) throw ParameterError("observation times must increase strictly");
        if (times[j] < truth.times.front() - slack || times[j] > truth.times.back() + slack)
            throw ParameterError("observation time " + std::to_string(times[j]) + " lies outside the truth range [" +
                                 std::to_string(truth.times.front()) + ", " + std::to_string(truth.times.back()) + "]");
        double offset = 0.0;
        const auto col = static_cast<Eigen::Index>(truth.nearest(times[j], &offset));
        s.offsets.push_back(offset);
        const auto k = static_cast<Eigen::Index>(j);
        s.velocity.col(k) = velocity_op.selection() * truth.velocity.col(col);
        s.pressure.col(k) = pressure_op.selection() * truth.pressure.col(col);
    }
    return s;
}

namespace {

const char* component_name(int field, int c) {
    if (field == 1) return "p";
    return c == 0 ? "ux" : "uy";
}

}  // namespace

void write_observation_csv(const ObservationSeries& s, const ObservationOperator& velocity_op,
                           const ObservationOperator& pressure_op, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open '" + path.string() + "' for writing");
    f << std::setprecision(17) << "t,cell_id,component,value\n";
    for (std::size_t j = 0; j < s.size(); ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        for (int field = 0; field < 2; ++field) {
            const auto& op = field == 0 ? velocity_op : pressure_op;
            const auto& vals = field == 0 ? s.velocity : s.pressure;
            const auto nc = static_cast<Eigen::Index>(op.num_cells());
            for (int c = 0; c < op.components(); ++c)
                for (Eigen::Index k = 0; k < nc; ++k)
                    f << s.times[j] << ',' << op.overlay().cells()[k].id << ',' << component_name(field, c) << ','
                      << vals(c * nc + k, col) << '\n';
        }
    }
    if (!f) throw Error("write to '" + path.string() + "' failed");
}

ObservationSeries read_observation_csv(const std::filesystem::path& path, const ObservationOperator& velocity_op,
                                       const ObservationOperator& pressure_op) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(f, line) || line.rfind("t,cell_id,component,value", 0) != 0)
        throw ParseError("'" + path.string() + "': missing header t,cell_id,component,value", 1);

    auto cell_index = [](const ObservationOperator& op) {
        std::map<int, int> m;
        for (std::size_t k = 0; k < op.num_cells(); ++k) m[op.overlay().cells()[k].id] = static_cast<int>(k);
        return m;
    };
    const auto ucells = cell_index(velocity_op);
    const auto pcells = cell_index(pressure_op);
    const auto nu_cells = static_cast<Eigen::Index>(velocity_op.num_cells());

    struct Row {
        Eigen::VectorXd u, p;
        std::vector<char> seen_u, seen_p;
    };
    std::map<double, Row> rows;
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string ts, cs, comp, vs;
        if (!std::getline(ss, ts, ',') || !std::getline(ss, cs, ',') || !std::getline(ss, comp, ',') ||
            !std::getline(ss, vs))
            throw ParseError("'" + path.string() + "': expected 4 columns", lineno);
        char* end = nullptr;
        const double t = std::strtod(ts.c_str(), &end);
        if (end == ts.c_str() || *end != '\0') throw ParseError("'" + path.string() + "': bad time '" + ts + "'", lineno);
        const long cell = std::strtol(cs.c_str(), &end, 10);
        if (end == cs.c_str() || *end != '\0')
            throw ParseError("'" + path.string() + "': bad cell id '" + cs + "'", lineno);
        const double v = std::strtod(vs.c_str(), &end);
        if (end == vs.c_str() || *end != '\0')
            throw ParseError("'" + path.string() + "': bad value '" + vs + "'", lineno);

        auto& row = rows[t];
        if (row.u.size() == 0) {
            row.u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(velocity_op.size()));
            row.p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pressure_op.size()));
            row.seen_u.assign(velocity_op.size(), 0);
            row.seen_p.assign(pressure_op.size(), 0);
        }
        const bool is_p = comp == "p";
        if (!is_p && comp != "ux" && comp != "uy")
            throw ParseError("'" + path.string() + "': unknown component '" + comp + "'", lineno);
        const auto& cells = is_p ? pcells : ucells;
        const auto it = cells.find(static_cast<int>(cell));
        if (it == cells.end())
            throw ParseError("'" + path.string() + "': cell " + cs + " is not an observation cell", lineno);
        const Eigen::Index idx = is_p ? it->second : (comp == "uy" ? nu_cells : 0) + it->second;
        auto& seen = is_p ? row.seen_p : row.seen_u;
        if (seen[idx]) throw ParseError("'" + path.string() + "': duplicate entry", lineno);
        seen[idx] = 1;
        (is_p ? row.p : row.u)[idx] = v;
    }

    ObservationSeries s;
    s.velocity.resize(static_cast<Eigen::Index>(velocity_op.size()), static_cast<Eigen::Index>(rows.size()));
    s.pressure.resize(static_cast<Eigen::Index>(pressure_op.size()), static_cast<Eigen::Index>(rows.size()));
    Eigen::Index j = 0;
    for (const auto& [t, row] : rows) {
        if (std::count(row.seen_u.begin(), row.seen_u.end(), 0) || std::count(row.seen_p.begin(), row.seen_p.end(), 0))
            throw ParseError("'" + path.string() + "': incomplete observations at t = " + std::to_string(t));
        s.times.push_back(t);
        s.offsets.push_back(0.0);
        s.velocity.col(j) = row.u;
        s.pressure.col(j) = row.p;
        ++j;
    }
    return s;
}

}  // namespace cdarom
