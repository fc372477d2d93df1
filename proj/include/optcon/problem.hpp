#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "optcon/functions.hpp"
#include "optcon/graph.hpp"

namespace optcon {

enum class Method { euler, rk4 };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);

/// One agent's private data: its objective f_i, its local constraints
/// g_ik(x) <= 0 and its initial primal/dual state.
struct AgentSpec {
  ScalarField objective;
  std::vector<ScalarField> constraints;
  Vec x0;
  Vec lambda0;  // one entry per constraint

  std::size_t constraint_count() const { return constraints.size(); }

  friend bool operator==(const AgentSpec&, const AgentSpec&) = default;
};

/// Full experiment description. A Scenario may be structurally complete but
/// still violate the standing assumptions; `validate` reports those.
struct Scenario {
  Topology topology;
  std::vector<AgentSpec> agents;
  double alpha = 0.1;
  double beta = 10.0;
  Eigen::Index dim = 1;
  double dt = 1e-3;
  double t_final = 20.0;
  Method method = Method::euler;
  std::uint64_t seed = 0;

  std::size_t agent_count() const { return agents.size(); }
  /// Total number of local constraints over all agents.
  std::size_t constraint_count() const;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  /// Strictly feasible point found by the feasibility search, if any.
  std::optional<Vec> slater_point;

  bool ok() const { return errors.empty(); }
};

/// Checks the standing assumptions. Never mutates `s`. Hard failures go to
/// `errors`; heuristic or advisory findings go to `warnings`.
ValidationReport validate(const Scenario& s);

/// Throws ValidationError listing every error in `validate(s)`.
void require_valid(const Scenario& s);

/// Searches for x with every g_ik(x) < 0 by minimizing
/// sum max(g_ik(x) + margin, 0)^2 over a decreasing margin schedule.
std::optional<Vec> find_slater_point(const Scenario& s);

// JSON encoding ------------------------------------------------------------

nlohmann::json field_to_json(const ScalarField& f);
ScalarField field_from_json(const nlohmann::json& j, const std::string& path = "field");

/// Canonical JSON representation: every key present, 1-based edge
/// endpoints, explicit weights.
nlohmann::json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);

/// Canonical text form (2-space indented) used for hashing and saving.
std::string canonical_text(const Scenario& s);

/// Parses scenario text. JSON syntax errors carry line and column.
Scenario parse_scenario(std::string_view text, const std::string& origin = "<string>");

Scenario load(const std::filesystem::path& path);
void save(const Scenario& s, const std::filesystem::path& path);

/// Applies `key=value` overrides to a scenario document. Keys are dotted
/// paths (`beta`, `agents.0.x0.1`); values are parsed as JSON when
/// possible and taken as strings otherwise.
void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& overrides);

/// FNV-1a 64-bit hash of the canonical text, as 16 hex digits.
std::string scenario_hash(const Scenario& s);

}  // namespace optcon
