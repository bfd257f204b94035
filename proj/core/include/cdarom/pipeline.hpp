#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "cdarom/config.hpp"
#include "cdarom/fom.hpp"
#include "cdarom/verify.hpp"

namespace cdarom {

/// Command-line level options shared by the subcommands.
struct CommandOptions {
    std::filesystem::path out;  ///< empty: the config's output.dir
    bool sweep = false;         ///< rom: r in {8, 19} x gamma in {0, 100}
    int threads = 1;            ///< rom --sweep: parameter points run concurrently
    std::uint64_t seed = 0;     ///< recorded only
    std::ostream* log = nullptr;
};

std::filesystem::path output_directory(const PipelineConfig& cfg, const CommandOptions& opt);

/// Mesh described by the config (generated or loaded).
Mesh build_mesh(const PipelineConfig& cfg);
/// Flow problem on `mesh` described by the config.
FlowProblem build_problem(const PipelineConfig& cfg, std::shared_ptr<const Mesh> mesh);

struct FomSummary {
    long steps = 0;
    std::size_t snapshots = 0;
    std::vector<std::filesystem::path> files;
};

/// Runs the full-order model over [t0, T]; writes mesh.txt, snapshots.bin (window
/// [snapshot_start, prediction_end]) and fom_quantities.csv.
FomSummary cmd_fom(const PipelineConfig& cfg, const CommandOptions& opt);

struct PodSummary {
    std::size_t columns = 0;  ///< after optional difference-quotient augmentation
    int d_u = 0, d_p = 0;
    double energy_u = 0.0, energy_p = 0.0;  ///< captured fractions at r_u, r_p
    double diagnostic = 0.0;                ///< h^-1 sqrt(lambda_{r_u+1}); NaN when r_u = d_u
    std::vector<std::filesystem::path> files;
};

/// POD of the snapshots on [snapshot_start, snapshot_end]; writes pod_basis.bin and
/// eigenvalues.csv.
PodSummary cmd_pod(const PipelineConfig& cfg, const CommandOptions& opt);

struct RomRunSummary {
    std::string name;
    int r_u = 0, r_p = 0;
    double gamma_u = 0.0, gamma_p = 0.0;
    double mean_err_u = 0.0, mean_err_p = 0.0;
    double final_err_u = 0.0, final_err_p = 0.0;
    double cd_max = 0.0, cl_max = 0.0, dp_final = 0.0;
    bool within_bound = false;
    bool pseudo_inverse = false;
    std::filesystem::path directory;
};

/// Reduced-model prediction on [snapshot_end, prediction_end]; writes rom_trajectory.bin and
/// rom_quantities.csv (in one subdirectory per parameter point when sweeping).
std::vector<RomRunSummary> cmd_rom(const PipelineConfig& cfg, const CommandOptions& opt);

/// Summary of the stored runs; also written to summary.txt.
std::string cmd_report(const PipelineConfig& cfg, const CommandOptions& opt);

/// Property suite plus checks of any artifacts in the output directory.
VerifyReport cmd_verify(const PipelineConfig* cfg, const CommandOptions& opt);

/// Sweep points as (r, gamma) with gamma_u = gamma_p.
std::vector<std::pair<int, double>> sweep_points();

}  // namespace cdarom
