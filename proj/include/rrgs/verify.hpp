#pragma once

#include <string>
#include <vector>

namespace rrgs {

struct CheckResult {
    std::string name;
    double max_error = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct VerifyOptions {
    /// Test fixture: name of a check whose analytic result gets a sign flip
    /// injected, to prove the harness catches regressions. Empty = off.
    std::string inject_fault;
};

/// Runs the oracle suite: Welford vs two-pass, analytic vs finite-difference
/// gradients for the covariance / eigenvalue / MCR / SR / render paths, and
/// compositing vs the literal blend reference.
std::vector<CheckResult> run_verification(const VerifyOptions& opts = {});

std::string verification_report_json(const std::vector<CheckResult>& results);
bool all_passed(const std::vector<CheckResult>& results);

}  // namespace rrgs
