#include "cdarom/pod.hpp"

#include <Eigen/SVD>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "binary_io.hpp"
#include "cdarom/error.hpp"

namespace cdarom {

Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& snapshots, const SparseMatrix& mass) {
    if (snapshots.cols() < 1) throw ParameterError("correlation matrix needs at least one snapshot");
    if (snapshots.rows() != mass.rows()) throw ParameterError("snapshot length does not match the mass matrix");
    const Eigen::MatrixXd ms = mass * snapshots;
    Eigen::MatrixXd k = (snapshots.transpose() * ms) / static_cast<double>(snapshots.cols());
    // Exact symmetry regardless of summation order.
    return 0.5 * (k + k.transpose());
}

Eigen::MatrixXd correlation_matrix(const SnapshotSet& s, Field which, const SparseMatrix& mass) {
    return correlation_matrix(which == Field::velocity ? s.velocity : s.pressure, mass);
}

PODModes pod_modes(const Eigen::MatrixXd& snapshots, const SparseMatrix& mass, int r, double rank_tol,
                   const SparseMatrix* stiffness) {
    const Eigen::Index m = snapshots.cols();
    if (m < 1) throw ParameterError("POD needs at least one snapshot");
    if (snapshots.rows() != mass.rows()) throw ParameterError("snapshot length does not match the mass matrix");
    if (r < 0) throw ParameterError("mode count must be nonnegative");

    Eigen::SimplicialLLT<SparseMatrix> llt(mass);
    if (llt.info() != Eigen::Success) throw NumericalError("mass matrix is not positive definite");
    const SparseMatrix lower = llt.matrixL();
    const Eigen::MatrixXd g =
        (lower.transpose() * (llt.permutationP() * snapshots)) / std::sqrt(static_cast<double>(m));

    Eigen::BDCSVD<Eigen::MatrixXd> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::MatrixXd u = svd.matrixU();
    Eigen::MatrixXd v = svd.matrixV();
    const Eigen::VectorXd& sigma = svd.singularValues();

    PODModes out;
    out.eigenvalues.assign(static_cast<std::size_t>(m), 0.0);
    for (Eigen::Index k = 0; k < sigma.size(); ++k) out.eigenvalues[k] = sigma[k] * sigma[k];
    for (Eigen::Index k = 0; k < v.cols(); ++k) {
        const double big = v.col(k).cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < m; ++i) {
            if (std::abs(v(i, k)) > 1e-12 * big) {
                if (v(i, k) < 0.0) {
                    v.col(k) *= -1.0;
                    u.col(k) *= -1.0;
                }
                break;
            }
        }
    }
    const double lambda1 = out.eigenvalues.front();
    out.rank = 0;
    if (lambda1 > 0.0)
        while (out.rank < static_cast<int>(m) && out.eigenvalues[out.rank] > rank_tol * lambda1) ++out.rank;
    if (r > out.rank)
        throw ParameterError("requested " + std::to_string(r) + " modes but the numerical rank is " +
                             std::to_string(out.rank));

    out.eigenvectors = std::move(v);
    out.modes = llt.permutationPinv() * Eigen::MatrixXd(llt.matrixU().solve(u.leftCols(r)));
    if (stiffness) {
        for (int k = 0; k < r; ++k) {
            const auto col = out.modes.col(k);
            out.grad_norms.push_back(std::sqrt(std::max(col.dot(*stiffness * col), 0.0)));
        }
    }
    return out;
}

double captured_energy(const std::vector<double>& eigenvalues, int r) {
    if (r < 0 || static_cast<std::size_t>(r) > eigenvalues.size())
        throw ParameterError("captured_energy: r out of range");
    double head = 0.0, total = 0.0;
    for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
        total += eigenvalues[i];
        if (i < static_cast<std::size_t>(r)) head += eigenvalues[i];
    }
    return total > 0.0 ? head / total : 1.0;
}

double eigenvalue_tail(const std::vector<double>& eigenvalues, int r) {
    if (r < 0 || static_cast<std::size_t>(r) > eigenvalues.size())
        throw ParameterError("eigenvalue_tail: r out of range");
    double tail = 0.0;
    for (std::size_t i = eigenvalues.size(); i-- > static_cast<std::size_t>(r);) tail += eigenvalues[i];
    return tail;
}

SnapshotSet augment_dq(const SnapshotSet& s, double dt) {
    if (s.size() < 2) throw ParameterError("difference quotients need at least two snapshots");
    if (!(dt > 0.0)) throw ParameterError("time step must be positive");
    if (s.meta.dq_augmented) throw ParameterError("snapshot set is already augmented");
    const Eigen::Index m = static_cast<Eigen::Index>(s.size());
    SnapshotSet out;
    out.meta = s.meta;
    out.meta.dq_augmented = true;
    out.times = s.times;
    out.times.insert(out.times.end(), s.times.begin() + 1, s.times.end());
    out.velocity.resize(s.velocity.rows(), 2 * m - 1);
    out.pressure.resize(s.pressure.rows(), 2 * m - 1);
    out.velocity.leftCols(m) = s.velocity;
    out.pressure.leftCols(m) = s.pressure;
    out.velocity.rightCols(m - 1) = (s.velocity.rightCols(m - 1) - s.velocity.leftCols(m - 1)) / dt;
    out.pressure.rightCols(m - 1) = (s.pressure.rightCols(m - 1) - s.pressure.leftCols(m - 1)) / dt;
    return out;
}

Eigen::MatrixXd project(const Eigen::MatrixXd& modes, const SparseMatrix& mass, const Eigen::MatrixXd& fields) {
    if (fields.rows() != mass.rows() || modes.rows() != mass.rows()) throw ParameterError("project: size mismatch");
    return modes.transpose() * (mass * fields);
}

Eigen::VectorXd project(const Eigen::MatrixXd& modes, const SparseMatrix& mass, const Eigen::VectorXd& field) {
    if (field.size() != mass.rows() || modes.rows() != mass.rows()) throw ParameterError("project: size mismatch");
    return modes.transpose() * (mass * field);
}

Eigen::VectorXd lift(const Eigen::MatrixXd& modes, const Eigen::VectorXd& reduced) {
    if (reduced.size() != modes.cols()) throw ParameterError("lift: size mismatch");
    return modes * reduced;
}

double mean_projection_error(const Eigen::MatrixXd& snapshots, const Eigen::MatrixXd& modes,
                             const SparseMatrix& mass, int r) {
    if (r < 0 || r > modes.cols()) throw ParameterError("mean_projection_error: r out of range");
    const auto phi = modes.leftCols(r);
    const Eigen::MatrixXd res = snapshots - phi * (phi.transpose() * (mass * snapshots));
    const Eigen::MatrixXd mres = mass * res;
    double sum = 0.0;
    for (Eigen::Index j = 0; j < res.cols(); ++j) sum += res.col(j).dot(mres.col(j));
    return sum / static_cast<double>(snapshots.cols());
}

PODBasis PODBasis::truncated(int ru, int rp) const {
    if (ru < 0 || rp < 0 || ru > r_u() || rp > r_p()) throw ParameterError("cannot truncate POD basis to more modes");
    PODBasis b = *this;
    b.phi = phi.leftCols(ru);
    b.psi = psi.leftCols(rp);
    b.grad_phi.resize(std::min<std::size_t>(grad_phi.size(), ru));
    b.grad_psi.resize(std::min<std::size_t>(grad_psi.size(), rp));
    return b;
}

PODBasis build_pod_basis(const SnapshotSet& s, const FieldMatrices& m, const PODOptions& opt) {
    if (!m.mass_u || !m.mass_p) throw ParameterError("POD needs velocity and pressure mass matrices");
    Eigen::MatrixXd su = s.velocity, sp = s.pressure;
    PODBasis b;
    if (opt.center) {
        b.mean_u = su.rowwise().mean();
        b.mean_p = sp.rowwise().mean();
        su.colwise() -= b.mean_u;
        sp.colwise() -= b.mean_p;
    }
    auto pu = pod_modes(su, *m.mass_u, opt.r_u, opt.rank_tol, m.stiff_u);
    auto pp = pod_modes(sp, *m.mass_p, opt.r_p, opt.rank_tol, m.stiff_p);
    b.lambda = std::move(pu.eigenvalues);
    b.theta = std::move(pp.eigenvalues);
    b.d_u = pu.rank;
    b.d_p = pp.rank;
    b.phi = std::move(pu.modes);
    b.psi = std::move(pp.modes);
    b.grad_phi = std::move(pu.grad_norms);
    b.grad_psi = std::move(pp.grad_norms);
    b.mesh_hash = s.meta.mesh_hash;
    b.config_hash = s.meta.config_hash;
    return b;
}

namespace {
constexpr char pod_magic[8] = {'C', 'D', 'A', 'P', 'O', 'D', '1', '\0'};
constexpr std::uint64_t max_entries = 1ull << 32;

void check_dims(std::uint64_t a, std::uint64_t b, const std::filesystem::path& path) {
    if (a > max_entries || b > max_entries || (a > 0 && b > max_entries / a))
        throw ParseError("'" + path.string() + "' has implausible dimensions");
}
}  // namespace

void save_pod_basis(const PODBasis& b, const std::filesystem::path& path) {
    detail::BinaryWriter w(path.string());
    w.magic(pod_magic);
    w.pod(b.mesh_hash);
    w.pod(b.config_hash);
    w.string(b.version);
    w.pod(static_cast<std::int64_t>(b.d_u));
    w.pod(static_cast<std::int64_t>(b.d_p));
    w.pod(static_cast<std::uint64_t>(b.lambda.size()));
    w.vector(b.lambda);
    w.pod(static_cast<std::uint64_t>(b.theta.size()));
    w.vector(b.theta);
    for (const Eigen::MatrixXd* mat : {&b.phi, &b.psi}) {
        w.pod(static_cast<std::uint64_t>(mat->rows()));
        w.pod(static_cast<std::uint64_t>(mat->cols()));
        w.matrix(*mat);
    }
    for (const auto* v : {&b.grad_phi, &b.grad_psi}) {
        w.pod(static_cast<std::uint64_t>(v->size()));
        w.vector(*v);
    }
    for (const Eigen::VectorXd* v : {&b.mean_u, &b.mean_p}) {
        w.pod(static_cast<std::uint64_t>(v->size()));
        w.doubles(v->data(), static_cast<std::size_t>(v->size()));
    }
    w.finish();
}

PODBasis load_pod_basis(const std::filesystem::path& path) {
    detail::BinaryReader r(path.string());
    r.expect_magic(pod_magic);
    PODBasis b;
    b.mesh_hash = r.pod<std::uint64_t>();
    b.config_hash = r.pod<std::uint64_t>();
    b.version = r.string();
    b.d_u = static_cast<int>(r.pod<std::int64_t>());
    b.d_p = static_cast<int>(r.pod<std::int64_t>());
    auto read_vec = [&]() {
        const auto n = r.pod<std::uint64_t>();
        check_dims(n, 1, path);
        return r.vector(n);
    };
    b.lambda = read_vec();
    b.theta = read_vec();
    for (Eigen::MatrixXd* mat : {&b.phi, &b.psi}) {
        const auto rows = r.pod<std::uint64_t>();
        const auto cols = r.pod<std::uint64_t>();
        check_dims(rows, cols, path);
        *mat = r.matrix(rows, cols);
    }
    b.grad_phi = read_vec();
    b.grad_psi = read_vec();
    for (Eigen::VectorXd* v : {&b.mean_u, &b.mean_p}) {
        const auto n = r.pod<std::uint64_t>();
        check_dims(n, 1, path);
        v->resize(static_cast<Eigen::Index>(n));
        r.doubles(v->data(), n);
    }
    r.expect_end();
    if (b.d_u < b.r_u() || b.d_p < b.r_p() || b.lambda.size() < static_cast<std::size_t>(b.d_u) ||
        b.theta.size() < static_cast<std::size_t>(b.d_p))
        throw ParseError("'" + path.string() + "': mode counts exceed the recorded rank");
    return b;
}

void write_eigenvalue_csv(const PODBasis& b, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open '" + path.string() + "' for writing");
    f << std::setprecision(17) << "i,lambda,theta\n";
    const std::size_t n = std::max(b.lambda.size(), b.theta.size());
    for (std::size_t i = 0; i < n; ++i) {
        f << i + 1 << ',';
        if (i < b.lambda.size()) f << b.lambda[i];
        f << ',';
        if (i < b.theta.size()) f << b.theta[i];
        f << '\n';
    }
    if (!f) throw Error("write to '" + path.string() + "' failed");
}

}  // namespace cdarom
