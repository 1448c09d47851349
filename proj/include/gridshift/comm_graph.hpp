#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace gridshift {

using NodeId = int;

struct GeoLocation {
  double x_km = 0.0;
  double y_km = 0.0;
};

inline double distance_km(const GeoLocation& a, const GeoLocation& b) {
  return std::hypot(a.x_km - b.x_km, a.y_km - b.y_km);
}

// Undirected communication topology of one region. Nodes are 0..n-1, edges
// are kept as (lo, hi) pairs in lexicographic order. Immutable after
// construction; safe to share across threads.
class CommGraph {
 public:
  CommGraph(int node_count, std::vector<std::pair<NodeId, NodeId>> edge_list)
      : n_(node_count),
        edges_(std::move(edge_list)),
        neighbours_(static_cast<std::size_t>(std::max(node_count, 0))) {
    if (n_ < 1) throw std::invalid_argument("CommGraph: node count must be >= 1");
    for (auto& e : edges_) {
      if (e.first == e.second) throw std::invalid_argument("CommGraph: self-loop");
      if (e.first < 0 || e.second < 0 || e.first >= n_ || e.second >= n_)
        throw std::invalid_argument("CommGraph: edge endpoint out of range");
      if (e.first > e.second) std::swap(e.first, e.second);
    }
    std::sort(edges_.begin(), edges_.end());
    if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end())
      throw std::invalid_argument("CommGraph: duplicate edge");
    for (const auto& [i, j] : edges_) {
      neighbours_[static_cast<std::size_t>(i)].push_back(j);
      neighbours_[static_cast<std::size_t>(j)].push_back(i);
    }
    for (auto& nb : neighbours_) std::sort(nb.begin(), nb.end());
  }

  int node_count() const { return n_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const std::vector<std::pair<NodeId, NodeId>>& edges() const { return edges_; }

  const std::vector<NodeId>& neighbours(NodeId i) const {
    return neighbours_.at(static_cast<std::size_t>(i));
  }
  int degree(NodeId i) const { return static_cast<int>(neighbours(i).size()); }

  bool has_edge(NodeId i, NodeId j) const {
    if (i > j) std::swap(i, j);
    return std::binary_search(edges_.begin(), edges_.end(), std::make_pair(i, j));
  }

  Eigen::MatrixXd adjacency() const {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_, n_);
    for (const auto& [i, j] : edges_) {
      a(i, j) = 1.0;
      a(j, i) = 1.0;
    }
    return a;
  }

  Eigen::VectorXd degrees() const {
    Eigen::VectorXd d(n_);
    for (NodeId i = 0; i < n_; ++i) d(i) = static_cast<double>(degree(i));
    return d;
  }

  Eigen::MatrixXd laplacian() const {
    Eigen::MatrixXd l = -adjacency();
    for (NodeId i = 0; i < n_; ++i) l(i, i) = static_cast<double>(degree(i));
    return l;
  }

 private:
  int n_;
  std::vector<std::pair<NodeId, NodeId>> edges_;
  std::vector<std::vector<NodeId>> neighbours_;
};

// Greedy nearest-neighbour link formation: the Euclidean minimum spanning
// tree grown in Prim order from node 0, ties broken towards lower node
// indices. Always yields a connected graph with exactly n-1 links.
inline CommGraph build_chain_from_locations(const std::vector<GeoLocation>& locations) {
  const int n = static_cast<int>(locations.size());
  if (n < 2) throw std::invalid_argument("build_chain_from_locations: need at least 2 nodes");
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(locations[i].x_km) || !std::isfinite(locations[i].y_km))
      throw std::invalid_argument("build_chain_from_locations: non-finite location");
    for (int j = i + 1; j < n; ++j) {
      if (locations[i].x_km == locations[j].x_km && locations[i].y_km == locations[j].y_km)
        throw std::invalid_argument("build_chain_from_locations: duplicate locations");
    }
  }

  std::vector<bool> in_tree(static_cast<std::size_t>(n), false);
  in_tree[0] = true;
  std::vector<std::pair<NodeId, NodeId>> edges;
  edges.reserve(static_cast<std::size_t>(n - 1));
  for (int step = 1; step < n; ++step) {
    double best_d = std::numeric_limits<double>::infinity();
    NodeId best_new = -1;
    NodeId best_tree = -1;
    for (NodeId j = 0; j < n; ++j) {
      if (in_tree[static_cast<std::size_t>(j)]) continue;
      for (NodeId i = 0; i < n; ++i) {
        if (!in_tree[static_cast<std::size_t>(i)]) continue;
        const double d = distance_km(locations[static_cast<std::size_t>(i)],
                                     locations[static_cast<std::size_t>(j)]);
        const bool better =
            d < best_d ||
            (d == best_d && (j < best_new || (j == best_new && i < best_tree)));
        if (better) {
          best_d = d;
          best_new = j;
          best_tree = i;
        }
      }
    }
    in_tree[static_cast<std::size_t>(best_new)] = true;
    edges.emplace_back(best_tree, best_new);
  }
  return CommGraph(n, std::move(edges));
}

// Second-smallest Laplacian eigenvalue; positive iff the graph is connected.
// A single node is trivially connected.
inline double algebraic_connectivity(const CommGraph& g) {
  if (g.node_count() == 1) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.laplacian(), Eigen::EigenvaluesOnly);
  return std::max(0.0, es.eigenvalues()(1));
}

// Exhaustive, disjoint node partition; parts ordered by their smallest
// member, members sorted.
inline std::vector<std::vector<NodeId>> connected_components(const CommGraph& g) {
  const int n = g.node_count();
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::vector<std::vector<NodeId>> parts;
  for (NodeId start = 0; start < n; ++start) {
    if (seen[static_cast<std::size_t>(start)]) continue;
    std::vector<NodeId> part;
    std::vector<NodeId> stack{start};
    seen[static_cast<std::size_t>(start)] = true;
    while (!stack.empty()) {
      const NodeId v = stack.back();
      stack.pop_back();
      part.push_back(v);
      for (NodeId w : g.neighbours(v)) {
        if (!seen[static_cast<std::size_t>(w)]) {
          seen[static_cast<std::size_t>(w)] = true;
          stack.push_back(w);
        }
      }
    }
    std::sort(part.begin(), part.end());
    parts.push_back(std::move(part));
  }
  return parts;
}

}  // namespace gridshift
