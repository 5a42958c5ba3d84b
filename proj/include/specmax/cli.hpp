#pragma once

#include <string>

#include "specmax/config.hpp"

namespace specmax {

// exit codes shared by every subcommand
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSolver = 3;
inline constexpr int kExitDiverged = 4;
inline constexpr int kExitVerifyFailed = 5;

// Presents eigenvalues, nu, the lambda_2 cluster, sign/simplicity checks and
// the standing-assumption warnings; writes spectrum_report.txt.
int cmd_spectrum(const RunConfig& cfg);

// Runs the continuation, writes checkpoints, optimize_report.txt and
// diagnostics.csv; exit 0 only when the classification resolved.
int cmd_optimize(const RunConfig& cfg);

// Derivative, continuity, maximality and worked-example inequality
// harnesses; exit 5 when any section fails, naming the section.
int cmd_verify(const RunConfig& cfg);

// Summarizes a previous optimize output directory.
int cmd_report(const RunConfig& cfg);

}  // namespace specmax
