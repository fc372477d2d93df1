#include "optcon/graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

#include "optcon/error.hpp"

namespace optcon {

Topology::Topology(std::size_t node_count, std::vector<Edge> edges)
    : node_count_(node_count), edges_(std::move(edges)), adjacency_(node_count) {
  if (node_count_ == 0) throw ValidationError("topology needs at least one node");
  for (auto& e : edges_) {
    if (e.u >= node_count_ || e.v >= node_count_)
      throw ValidationError(fmt::format("edge ({}, {}) has an endpoint outside [1, {}]",
                                        e.u + 1, e.v + 1, node_count_));
    if (e.u == e.v) throw ValidationError(fmt::format("self-loop at node {}", e.u + 1));
    if (!(e.weight > 0.0) || !std::isfinite(e.weight))
      throw ValidationError(fmt::format("edge ({}, {}) has non-positive weight {}",
                                        e.u + 1, e.v + 1, e.weight));
    if (e.u > e.v) std::swap(e.u, e.v);
  }
  std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
    return a.u != b.u ? a.u < b.u : a.v < b.v;
  });
  for (std::size_t k = 1; k < edges_.size(); ++k) {
    if (edges_[k].u == edges_[k - 1].u && edges_[k].v == edges_[k - 1].v)
      throw ValidationError(
          fmt::format("duplicate edge ({}, {})", edges_[k].u + 1, edges_[k].v + 1));
  }
  for (const auto& e : edges_) {
    adjacency_[e.u].push_back(e.v);
    adjacency_[e.v].push_back(e.u);
  }
  for (auto& nb : adjacency_) std::sort(nb.begin(), nb.end());
}

Topology Topology::ring(std::size_t n) {
  std::vector<Edge> edges;
  if (n == 2) edges.push_back({0, 1, 1.0});
  if (n > 2)
    for (std::size_t i = 0; i < n; ++i) edges.push_back({i, (i + 1) % n, 1.0});
  return Topology(n, std::move(edges));
}

Topology Topology::path(std::size_t n) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, 1.0});
  return Topology(n, std::move(edges));
}

Topology Topology::complete(std::size_t n) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) edges.push_back({i, j, 1.0});
  return Topology(n, std::move(edges));
}

bool Topology::weighted() const {
  return std::any_of(edges_.begin(), edges_.end(),
                     [](const Edge& e) { return e.weight != 1.0; });
}

const std::vector<std::size_t>& Topology::neighbors(std::size_t i) const {
  if (i >= node_count_)
    throw std::out_of_range(fmt::format("node {} outside [1, {}]", i + 1, node_count_));
  return adjacency_[i];
}

double Topology::weight(std::size_t i, std::size_t j) const {
  if (i > j) std::swap(i, j);
  auto it = std::lower_bound(edges_.begin(), edges_.end(), Edge{i, j, 0.0},
                             [](const Edge& a, const Edge& b) {
                               return a.u != b.u ? a.u < b.u : a.v < b.v;
                             });
  if (it != edges_.end() && it->u == i && it->v == j) return it->weight;
  return 0.0;
}

bool Topology::is_connected() const {
  std::vector<bool> seen(node_count_, false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    auto i = frontier.front();
    frontier.pop();
    for (auto j : adjacency_[i]) {
      if (seen[j]) continue;
      seen[j] = true;
      ++reached;
      frontier.push(j);
    }
  }
  return reached == node_count_;
}

Topology build_topology(std::size_t node_count, std::vector<Edge> edges) {
  return Topology(node_count, std::move(edges));
}

Eigen::MatrixXd incidence_matrix(const Topology& t) {
  return incidence_matrix(t, std::vector<bool>(t.edge_count(), false));
}

Eigen::MatrixXd incidence_matrix(const Topology& t, const std::vector<bool>& flip) {
  const auto n = static_cast<Eigen::Index>(t.node_count());
  const auto m = static_cast<Eigen::Index>(t.edge_count());
  if (flip.size() != t.edge_count())
    throw std::invalid_argument("orientation vector does not match edge count");
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto& e = t.edges()[static_cast<std::size_t>(k)];
    const double s = std::sqrt(e.weight) * (flip[static_cast<std::size_t>(k)] ? -1.0 : 1.0);
    d(static_cast<Eigen::Index>(e.u), k) = -s;
    d(static_cast<Eigen::Index>(e.v), k) = s;
  }
  return d;
}

Eigen::MatrixXd laplacian(const Topology& t) {
  const auto n = static_cast<Eigen::Index>(t.node_count());
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : t.edges()) {
    const auto u = static_cast<Eigen::Index>(e.u);
    const auto v = static_cast<Eigen::Index>(e.v);
    lap(u, u) += e.weight;
    lap(v, v) += e.weight;
    lap(u, v) -= e.weight;
    lap(v, u) -= e.weight;
  }
  return lap;
}

Eigen::VectorXd laplacian_spectrum(const Topology& t) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(laplacian(t),
                                                        Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

double algebraic_connectivity(const Topology& t) {
  if (t.node_count() < 2)
    throw ValidationError("algebraic connectivity needs at least two nodes");
  if (!t.is_connected())
    throw ValidationError("graph is disconnected; algebraic connectivity is zero");
  return laplacian_spectrum(t)(1);
}

double largest_laplacian_eigenvalue(const Topology& t) {
  if (t.node_count() < 2) return 0.0;
  const auto spectrum = laplacian_spectrum(t);
  return std::max(0.0, spectrum(spectrum.size() - 1));
}

}  // namespace optcon
