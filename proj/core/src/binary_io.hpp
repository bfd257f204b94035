#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "cdarom/error.hpp"

namespace cdarom::detail {

/// Files end with an FNV-1a checksum of every preceding byte.
inline void fnv1a(std::uint64_t& h, const char* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        h ^= static_cast<unsigned char>(p[i]);
        h *= 1099511628211ull;
    }
}
inline constexpr std::uint64_t fnv_offset = 1469598103934665603ull;

class BinaryWriter {
public:
    explicit BinaryWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw Error("cannot open '" + path + "' for writing");
    }
    void magic(const char (&m)[8]) { write(m, 8); }
    template <class T>
    void pod(const T& v) {
        write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void string(const std::string& s) {
        pod(static_cast<std::uint32_t>(s.size()));
        write(s.data(), s.size());
    }
    void doubles(const double* p, std::size_t n) { write(reinterpret_cast<const char*>(p), n * sizeof(double)); }
    void vector(const std::vector<double>& v) { doubles(v.data(), v.size()); }
    void matrix(const Eigen::MatrixXd& m) { doubles(m.data(), static_cast<std::size_t>(m.size())); }
    void finish() {
        const std::uint64_t sum = hash_;
        out_.write(reinterpret_cast<const char*>(&sum), sizeof sum);
        out_.flush();
        if (!out_) throw Error("write failed");
    }

private:
    void write(const char* p, std::size_t n) {
        fnv1a(hash_, p, n);
        out_.write(p, static_cast<std::streamsize>(n));
    }

    std::ofstream out_;
    std::uint64_t hash_ = fnv_offset;
};

class BinaryReader {
public:
    explicit BinaryReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw ParseError("cannot open '" + path + "'");
    }
    void expect_magic(const char (&m)[8]) {
        char buf[8] = {};
        read(buf, 8);
        if (std::memcmp(buf, m, 8) != 0)
            throw ParseError("'" + path_ + "' does not start with magic " + std::string(m));
    }
    template <class T>
    T pod() {
        T v{};
        read(reinterpret_cast<char*>(&v), sizeof(T));
        return v;
    }
    std::string string() {
        const auto n = pod<std::uint32_t>();
        if (n > (1u << 20)) throw ParseError("'" + path_ + "' has an implausible string length");
        std::string s(n, '\0');
        read(s.data(), n);
        return s;
    }
    void doubles(double* p, std::size_t n) { read(reinterpret_cast<char*>(p), n * sizeof(double)); }
    std::vector<double> vector(std::size_t n) {
        std::vector<double> v(n);
        doubles(v.data(), n);
        return v;
    }
    Eigen::MatrixXd matrix(std::size_t rows, std::size_t cols) {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        doubles(m.data(), rows * cols);
        return m;
    }
    /// Reads and compares the checksum; throws ParseError on a mismatch or trailing bytes.
    void expect_end() {
        const std::uint64_t expected = hash_;
        std::uint64_t stored = 0;
        in_.read(reinterpret_cast<char*>(&stored), sizeof stored);
        if (!in_) throw ParseError("'" + path_ + "' is truncated");
        if (stored != expected) throw ParseError("'" + path_ + "' fails its checksum (corrupted file)");
        in_.peek();
        if (!in_.eof()) throw ParseError("'" + path_ + "' has trailing bytes");
    }

private:
    void read(char* p, std::size_t n) {
        in_.read(p, static_cast<std::streamsize>(n));
        if (!in_) throw ParseError("'" + path_ + "' is truncated");
        fnv1a(hash_, p, n);
    }

    std::ifstream in_;
    std::string path_;
    std::uint64_t hash_ = fnv_offset;
};

}  // namespace cdarom::detail
