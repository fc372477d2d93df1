#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "optcon/diagnostics.hpp"

namespace optcon::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kValidation = 2,
  kIntegration = 3,
  kSolve = 4,
  kCertificate = 5,
};

/// Loads a scenario file and applies `key=value` overrides before parsing.
Scenario load_with_overrides(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides);

/// Fixed trajectory CSV column names for a scenario.
std::vector<std::string> trajectory_columns(const Scenario& s, bool with_series);

/// Writes the trajectory CSV. W is left empty when `series.W` is empty.
void write_trajectory_csv(std::ostream& out, const Scenario& s, const Trajectory& traj,
                          const CertificateSeries& series, bool with_series);

nlohmann::json solution_to_json(const KktSolution& sol);
nlohmann::json residuals_to_json(const KktResiduals& r);

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace optcon::cli
