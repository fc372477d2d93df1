#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "optcon/problem.hpp"

namespace optcon::testing {

inline std::string scenario_path(const std::string& name) {
  return std::string(OPTCON_SCENARIO_DIR) + "/" + name;
}

inline Scenario worked_example() { return load(scenario_path("worked_example.json")); }

inline Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

inline Mat diag(std::initializer_list<double> v) { return vec(v).asDiagonal(); }

/// Random spanning tree plus extra edges, so the graph is always connected.
inline Topology random_connected_graph(std::mt19937_64& rng, std::size_t n) {
  std::vector<Edge> edges;
  for (std::size_t v = 1; v < n; ++v) {
    std::uniform_int_distribution<std::size_t> pick(0, v - 1);
    edges.push_back({pick(rng), v, 1.0});
  }
  std::bernoulli_distribution extra(0.3);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool present = std::any_of(edges.begin(), edges.end(), [&](const Edge& e) {
        return (e.u == i && e.v == j) || (e.u == j && e.v == i);
      });
      if (!present && extra(rng)) edges.push_back({i, j, 1.0});
    }
  return Topology(n, std::move(edges));
}

inline Vec random_vec(std::mt19937_64& rng, Eigen::Index m, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(m);
  for (Eigen::Index i = 0; i < m; ++i) v(i) = u(rng);
  return v;
}

/// Random symmetric PSD matrix A^T A + shift * I.
inline Mat random_psd(std::mt19937_64& rng, Eigen::Index m, double shift) {
  Mat a(m, m);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) a(i, j) = u(rng);
  Mat q = a.transpose() * a + shift * Mat::Identity(m, m);
  return 0.5 * (q + q.transpose());
}

/// Single-agent scenario with no neighbors.
inline Scenario single_agent(ScalarField objective, std::vector<ScalarField> constraints, Vec x0,
                             double alpha = 1.0) {
  const auto m = objective.dim();
  const auto k = static_cast<Eigen::Index>(constraints.size());
  std::vector<AgentSpec> agents;
  agents.push_back({std::move(objective), std::move(constraints), std::move(x0), Vec::Zero(k)});
  Scenario s{.topology = Topology(1, {}), .agents = std::move(agents), .alpha = alpha,
             .beta = 1.0, .dim = m};
  return s;
}

}  // namespace optcon::testing
