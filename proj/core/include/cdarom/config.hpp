#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "cdarom/assembly.hpp"
#include "cdarom/fom.hpp"

namespace cdarom {

enum class MeshKind { channel, unit_square, file };
enum class ProblemKind { channel, manufactured };

/// Every setting of a pipeline run. Parsed from `key = value` lines grouped in [sections];
/// `#` starts a comment.
struct PipelineConfig {
    struct Mesh {
        MeshKind kind = MeshKind::channel;
        double target_h = 0.045;
        int circle_segments = 32;
        int divisions = 8;  ///< unit square cells per side
        std::string file;
    } mesh;
    struct Physics {
        ProblemKind problem = ProblemKind::channel;
        double nu = 1e-3;
        double inflow_peak = 1.5;
        OutflowMode outflow = OutflowMode::dirichlet;
        double ramp_time = 0.0;
    } physics;
    struct Time {
        double t0 = 0.0;
        double T = 7.0;
        double dt = 1e-3;
        double snapshot_start = 5.0;
        double snapshot_end = 5.4;
        double prediction_end = 7.0;
        int stride = 1;
    } time;
    struct Pod {
        int r_u = 8;
        int r_p = 8;
        double rank_tol = 1e-12;
        bool center = false;
        bool dq = false;
    } pod;
    struct Cda {
        double gamma_u = 100.0;
        double gamma_p = 100.0;
        int nx = 8;
        int ny = 8;
        double H = 0.0;  ///< positive: ceil(width/H) x ceil(height/H) cells instead of nx x ny
        std::string observations;  ///< external observation CSV; empty uses the stored truth
    } cda;
    LinearSolverOptions solver;
    struct Output {
        std::string dir = "out";
        bool write_observations = false;
    } output;
};

/// Throws ConfigError (with the line number for syntax errors) on unknown sections or keys,
/// malformed values, or settings that fail validate().
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Windows nested in [t0, T], dt dividing the window lengths, r >= 0, gains >= 0, etc.
void validate(const PipelineConfig& c);

/// Canonical text form; parse_config(format_config(c)) reproduces c.
std::string format_config(const PipelineConfig& c);

/// FNV-1a hash of the canonical text.
std::uint64_t config_hash(const PipelineConfig& c);

}  // namespace cdarom
