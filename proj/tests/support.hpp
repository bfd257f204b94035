#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "cdarom/assembly.hpp"
#include "cdarom/mesh.hpp"

namespace testing_support {

/// Directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("cdarom_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline Eigen::MatrixXd dense(const cdarom::SparseMatrix& m) { return Eigen::MatrixXd(m); }

inline Eigen::VectorXd random_vector(Eigen::Index n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Eigen::VectorXd v(n);
    for (auto& x : v) x = uni(rng);
    return v;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = uni(rng);
    return m;
}

/// Unit square split into two triangles along the (0,0)-(1,1) diagonal.
inline cdarom::Mesh two_triangle_square() { return cdarom::generate_rectangle_mesh(0, 1, 0, 1, 1, 1); }

}  // namespace testing_support
