#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace cdarom {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct VerifyReport {
    std::vector<CheckResult> checks;
    double seconds = 0.0;
    bool passed() const;
};

/// Structural invariants on small built-in problems: skew convection (full and reduced),
/// SPD masses, constants in the kernel of A_p, annihilation of divergence-free fields,
/// orthogonal projection residuals, and bit-exact file round trips. Scratch files go under
/// `scratch`.
///
/// When `artifacts` names a pipeline output directory, the stored mesh, snapshots, and basis
/// found there are checked as well (readability, matching mesh hashes, Phi^T M Phi = I).
VerifyReport run_property_suite(const std::filesystem::path& scratch, const std::filesystem::path* artifacts = nullptr);

}  // namespace cdarom
