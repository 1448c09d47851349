#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "gridshift/comm_graph.hpp"

using namespace gridshift;

namespace {

// Exhaustive spanning-tree oracle: tries every (n-1)-subset of all pairs and
// returns the minimum total length. Only usable for small n.
double brute_force_mst_weight(const std::vector<GeoLocation>& locations) {
  const int n = static_cast<int>(locations.size());
  std::vector<std::pair<NodeId, NodeId>> pairs;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j) pairs.emplace_back(i, j);

  const int m = static_cast<int>(pairs.size());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(static_cast<std::size_t>(n - 1));
  const auto visit = [&](auto&& self, int from, int depth) -> void {
    if (depth == n - 1) {
      std::vector<std::pair<NodeId, NodeId>> edges;
      double weight = 0.0;
      for (int idx : pick) {
        edges.push_back(pairs[static_cast<std::size_t>(idx)]);
        weight += distance_km(locations[static_cast<std::size_t>(pairs[static_cast<std::size_t>(idx)].first)],
                              locations[static_cast<std::size_t>(pairs[static_cast<std::size_t>(idx)].second)]);
      }
      const CommGraph g(n, edges);
      if (connected_components(g).size() == 1) best = std::min(best, weight);
      return;
    }
    for (int i = from; i < m; ++i) {
      pick[static_cast<std::size_t>(depth)] = i;
      self(self, i + 1, depth + 1);
    }
  };
  visit(visit, 0, 0);
  return best;
}

double graph_weight(const CommGraph& g, const std::vector<GeoLocation>& locations) {
  double weight = 0.0;
  for (const auto& [i, j] : g.edges())
    weight += distance_km(locations[static_cast<std::size_t>(i)],
                          locations[static_cast<std::size_t>(j)]);
  return weight;
}

}  // namespace

TEST_CASE("chain formation on collinear points") {
  const std::vector<GeoLocation> locations{{0, 0}, {1, 0}, {2, 0}, {3, 0}};
  const CommGraph g = build_chain_from_locations(locations);
  REQUIRE(g.edge_count() == 3);
  REQUIRE(g.edges() == std::vector<std::pair<NodeId, NodeId>>{{0, 1}, {1, 2}, {2, 3}});
  REQUIRE(g.degree(0) == 1);
  REQUIRE(g.degree(1) == 2);
  REQUIRE(g.degree(2) == 2);
  REQUIRE(g.degree(3) == 1);
}

TEST_CASE("four-DG layout reproduces the chain adjacency") {
  // spacings chosen so each DG's nearest unconnected neighbour is the next one
  const std::vector<GeoLocation> locations{{0.0, 0.0}, {0.64, 0.05}, {1.36, 0.0}, {1.88, 0.1}};
  const CommGraph g = build_chain_from_locations(locations);
  const Eigen::MatrixXd a = g.adjacency();
  Eigen::MatrixXd expected(4, 4);
  expected << 0, 1, 0, 0,
              1, 0, 1, 0,
              0, 1, 0, 1,
              0, 0, 1, 0;
  REQUIRE((a - expected).norm() == 0.0);
  const Eigen::VectorXd d = g.degrees();
  REQUIRE(d(0) == 1.0);
  REQUIRE(d(1) == 2.0);
  REQUIRE(d(2) == 2.0);
  REQUIRE(d(3) == 1.0);
}

TEST_CASE("triangle with one short side matches the spanning-tree oracle") {
  const std::vector<GeoLocation> locations{{0.0, 0.0}, {1.0, 0.0}, {0.45, 0.75}};
  const CommGraph g = build_chain_from_locations(locations);
  REQUIRE(g.edge_count() == 2);
  REQUIRE(graph_weight(g, locations) == Catch::Approx(brute_force_mst_weight(locations)).epsilon(1e-12));
}

TEST_CASE("chain preconditions") {
  REQUIRE_THROWS_AS(build_chain_from_locations({{0, 0}}), std::invalid_argument);
  REQUIRE_THROWS_AS(build_chain_from_locations({{0, 0}, {0, 0}}), std::invalid_argument);
  REQUIRE_THROWS_AS(build_chain_from_locations({{0, 0}, {1, 0}, {1, 0}}), std::invalid_argument);
}

TEST_CASE("algebraic connectivity of elementary graphs") {
  REQUIRE(algebraic_connectivity(CommGraph(2, {})) == 0.0);
  REQUIRE(algebraic_connectivity(CommGraph(2, {{0, 1}})) == Catch::Approx(2.0).margin(1e-12));

  // path on 4 nodes: lambda_2 = 2 - 2 cos(pi/4)
  const CommGraph chain(4, {{0, 1}, {1, 2}, {2, 3}});
  const double analytic = 2.0 - 2.0 * std::cos(std::acos(-1.0) / 4.0);
  REQUIRE(algebraic_connectivity(chain) == Catch::Approx(analytic).margin(1e-12));
}

TEST_CASE("connected components") {
  const CommGraph isolated(3, {});
  REQUIRE(connected_components(isolated) ==
          std::vector<std::vector<NodeId>>{{0}, {1}, {2}});

  const CommGraph chain(4, {{0, 1}, {1, 2}, {2, 3}});
  REQUIRE(connected_components(chain).size() == 1);

  // three-MG block-diagonal topology: parts of sizes 4, 3 and 5
  const CommGraph blocks(12, {{0, 1}, {0, 2}, {2, 3},
                              {4, 5}, {5, 6},
                              {7, 8}, {7, 10}, {8, 9}, {9, 11}});
  const auto parts = connected_components(blocks);
  REQUIRE(parts.size() == 3);
  REQUIRE(parts[0].size() == 4);
  REQUIRE(parts[1].size() == 3);
  REQUIRE(parts[2].size() == 5);
}

TEST_CASE("graph invariants over random graphs") {
  std::mt19937_64 rng(90210);
  std::uniform_int_distribution<int> node_dist(2, 8);
  std::bernoulli_distribution edge(0.4);
  const Eigen::VectorXd ones8 = Eigen::VectorXd::Ones(8);

  for (int trial = 0; trial < 200; ++trial) {
    const int n = node_dist(rng);
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (NodeId i = 0; i < n; ++i)
      for (NodeId j = i + 1; j < n; ++j)
        if (edge(rng)) edges.emplace_back(i, j);
    const CommGraph g(n, edges);

    const Eigen::MatrixXd a = g.adjacency();
    REQUIRE((a - a.transpose()).norm() == 0.0);
    REQUIRE(a.trace() == 0.0);
    REQUIRE((g.laplacian() * ones8.head(n)).norm() == 0.0);
    for (NodeId i = 0; i < n; ++i) REQUIRE(a.row(i).sum() == g.degrees()(i));

    const bool one_part = connected_components(g).size() == 1;
    REQUIRE(one_part == (algebraic_connectivity(g) > 1e-9));
  }
}

TEST_CASE("nearest-neighbour formation always yields a connected tree") {
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<int> node_dist(2, 6);
  std::uniform_real_distribution<double> coord(0.0, 5.0);

  for (int trial = 0; trial < 100; ++trial) {
    const int n = node_dist(rng);
    std::vector<GeoLocation> locations;
    for (int i = 0; i < n; ++i) locations.push_back({coord(rng), coord(rng)});
    const CommGraph g = build_chain_from_locations(locations);
    REQUIRE(g.edge_count() == n - 1);
    REQUIRE(algebraic_connectivity(g) > 1e-9);
    REQUIRE(graph_weight(g, locations) ==
            Catch::Approx(brute_force_mst_weight(locations)).epsilon(1e-9));
  }
}
