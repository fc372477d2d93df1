#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace optcon {

/// Undirected weighted edge. Node indices are zero-based; `u < v` after
/// canonicalization.
struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;
  double weight = 1.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Immutable undirected communication graph.
///
/// Edges are stored sorted by (u, v) with u < v. Construction rejects
/// self-loops, duplicates (in either orientation), out-of-range endpoints
/// and non-positive weights with `ValidationError`.
class Topology {
 public:
  Topology(std::size_t node_count, std::vector<Edge> edges);

  static Topology ring(std::size_t n);
  static Topology path(std::size_t n);
  static Topology complete(std::size_t n);

  std::size_t node_count() const { return node_count_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t edge_count() const { return edges_.size(); }

  /// True when any edge carries a weight other than 1.
  bool weighted() const;

  /// Neighbors of node `i`, ascending. Throws `std::out_of_range`.
  const std::vector<std::size_t>& neighbors(std::size_t i) const;
  /// Weight of edge {i, j}; 0 when absent.
  double weight(std::size_t i, std::size_t j) const;

  bool is_connected() const;

  friend bool operator==(const Topology& a, const Topology& b) {
    return a.node_count_ == b.node_count_ && a.edges_ == b.edges_;
  }

 private:
  std::size_t node_count_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

/// Builds a canonical topology; thin wrapper over the constructor.
Topology build_topology(std::size_t node_count, std::vector<Edge> edges);

/// N x |E| incidence matrix. Column k has -sqrt(w) at the lower endpoint
/// and +sqrt(w) at the higher one, so D * D^T is the weighted Laplacian.
Eigen::MatrixXd incidence_matrix(const Topology& t);

/// Same as `incidence_matrix` but edge k is flipped when `flip[k]` is set.
Eigen::MatrixXd incidence_matrix(const Topology& t, const std::vector<bool>& flip);

/// Weighted Laplacian assembled directly from the edge list.
Eigen::MatrixXd laplacian(const Topology& t);

/// Ascending eigenvalues of the Laplacian.
Eigen::VectorXd laplacian_spectrum(const Topology& t);

/// Second-smallest Laplacian eigenvalue. Throws `ValidationError` when the
/// graph is disconnected (or has a single node).
double algebraic_connectivity(const Topology& t);

/// Largest Laplacian eigenvalue (0 for an edgeless graph).
double largest_laplacian_eigenvalue(const Topology& t);

}  // namespace optcon
