#pragma once

#include "isogplvm/dissimilarity.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace isogplvm {

struct Edge {
  int i = 0;
  int j = 0;  // i < j
  double weight = 0.0;
};

// Undirected epsilon-neighborhood graph: edge (i, j) iff d_ij < eps.
class NeighborGraph {
public:
  NeighborGraph(int n, double eps, std::vector<Edge> edges);

  int size() const { return n_; }
  double eps() const { return eps_; }
  const std::vector<Edge>& edges() const { return edges_; }
  bool adjacent(int i, int j) const;
  // Neighbors of v as (vertex, weight), ascending by vertex.
  const std::vector<std::pair<int, double>>& neighbors(int v) const {
    return adjacency_[static_cast<std::size_t>(v)];
  }

  std::string to_json() const;

private:
  int n_;
  double eps_;
  std::vector<Edge> edges_;
  std::vector<std::uint64_t> bits_;
  std::vector<std::vector<std::pair<int, double>>> adjacency_;
};

NeighborGraph build_eps_graph(const DissimilarityMatrix& d, double eps);

// Component label per vertex, numbered in order of each component's smallest
// vertex.
std::vector<int> connected_components(const NeighborGraph& g);
int component_count(const std::vector<int>& labels);

struct PersistenceEvent {
  double merge_eps = 0.0;
  int components_after = 0;
};

// Single-linkage merge sequence (0-dimensional persistence). The graph at
// threshold eps has N - #{events with merge_eps < eps} components.
std::vector<PersistenceEvent> zero_dim_persistence(const DissimilarityMatrix& d);
int components_at(const std::vector<PersistenceEvent>& events, int n, double eps);

// Smallest threshold whose eps-graph has at most `target_components`
// components, scaled by `margin` (>= 1). Since edges need d < eps, the merge
// distance itself is nudged up by one ulp when margin == 1.
double suggest_eps(const std::vector<PersistenceEvent>& events, int n, int target_components,
                   double margin = 1.0);

std::string persistence_csv(const std::vector<PersistenceEvent>& events);

// Shortest path lengths from `source`; +inf for unreachable vertices.
std::vector<double> dijkstra_from(const NeighborGraph& g, int source);
Eigen::MatrixXd all_pairs_shortest(const NeighborGraph& g, int threads = 1);

}  // namespace isogplvm
