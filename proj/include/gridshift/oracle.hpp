#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gridshift/allocation.hpp"
#include "gridshift/channel.hpp"
#include "gridshift/comm_graph.hpp"
#include "gridshift/control.hpp"

namespace gridshift {

// Random connected graph: a random attachment tree plus extra edges.
inline CommGraph random_connected_graph(std::mt19937_64& rng, int min_nodes, int max_nodes) {
  std::uniform_int_distribution<int> node_dist(min_nodes, max_nodes);
  const int n = node_dist(rng);
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId v = 1; v < n; ++v) {
    std::uniform_int_distribution<NodeId> pick(0, v - 1);
    edges.emplace_back(pick(rng), v);
  }
  std::bernoulli_distribution extra(0.25);
  CommGraph tree(n, edges);
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j)
      if (!tree.has_edge(i, j) && extra(rng)) edges.emplace_back(i, j);
  return CommGraph(n, std::move(edges));
}

struct SweepResult {
  int trials = 0;
  int stable = 0;
  std::vector<int> failed_trials;
  bool all_stable() const { return stable == trials; }
};

// Randomised check of the sufficiency direction of the closed-form gain
// criteria: every (connected graph, gains) pair that passes check_gains must
// be classified consensus-stable by the eigenvalue oracle.
inline SweepResult gain_criteria_sweep(std::uint64_t seed, int trials, int max_nodes = 8) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> frac(0.05, 0.95);
  std::uniform_real_distribution<double> first_order(0.05, 1.95);
  SweepResult result;
  result.trials = trials;
  for (int t = 0; t < trials; ++t) {
    const CommGraph g = random_connected_graph(rng, 2, max_nodes);
    const int n = g.node_count();
    ControllerGains gains;
    gains.k_omega.resize(static_cast<std::size_t>(n));
    gains.k_p.resize(static_cast<std::size_t>(n));
    gains.k_u.resize(static_cast<std::size_t>(n));
    for (NodeId i = 0; i < n; ++i) {
      gains.k_omega[static_cast<std::size_t>(i)] = first_order(rng);
      gains.k_u[static_cast<std::size_t>(i)] = first_order(rng);
      gains.k_p[static_cast<std::size_t>(i)] = frac(rng) / g.degree(i);
    }
    if (check_gains(gains, g).verdict != GainVerdict::Stable)
      throw std::logic_error("gain_criteria_sweep: generated gains must pass check_gains");
    const SpectralReport report = spectral_radius_oracle(g, gains.k_p);
    if (report.classification == ConsensusClass::ConsensusStable)
      ++result.stable;
    else
      result.failed_trials.push_back(t);
  }
  return result;
}

struct AllocComparison {
  int trials = 0;
  int dominance_violations = 0;  // brute-force optimum below allocate's rate
  double max_gap = 0.0;          // worst relative shortfall of allocate
  int symmetric_instances = 0;
  int symmetric_equal = 0;
  bool ok(double gap_limit) const {
    return dominance_violations == 0 && max_gap <= gap_limit &&
           symmetric_equal == symmetric_instances;
  }
};

// Seeded head-to-head of the production scheduler against the exhaustive
// reference on instances inside its caps. Every third instance is fully
// symmetric (equal spacing, equal budgets) where the two must agree exactly.
inline AllocComparison allocation_comparison(std::uint64_t seed, int trials,
                                             ChannelParams params) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> node_dist(2, 4);
  std::uniform_real_distribution<double> spacing(250.0, 900.0);
  std::uniform_real_distribution<double> budget_dbm(21.0, 27.0);

  AllocComparison result;
  result.trials = trials;
  for (int t = 0; t < trials; ++t) {
    const bool symmetric = (t % 3 == 0);
    const int n = node_dist(rng);
    const int links = n - 1;
    std::uniform_int_distribution<int> carrier_dist(links, 8);
    params.subcarrier_count = carrier_dist(rng);

    std::vector<GeoLocation> locations;
    double x = 0.0;
    const double equal_gap = spacing(rng);
    locations.push_back({0.0, 0.0});
    for (int i = 1; i < n; ++i) {
      x += symmetric ? equal_gap : spacing(rng);
      locations.push_back({x, 0.0});
    }
    const CommGraph graph = build_chain_from_locations(locations);
    RegionSpec spec = make_region_spec(graph, locations, params);
    if (!symmetric) {
      for (int i = 0; i < n; ++i) {
        spec.p_max_mw[static_cast<std::size_t>(i)] = dbm_to_mw(budget_dbm(rng));
        spec.p_cst_mw[static_cast<std::size_t>(i)] = params.p_cst_mw;
      }
    }

    const AllocationPlan heuristic = allocate({spec}, params);
    const RegionAllocation reference = brute_force_allocate(spec, params);
    const double got = heuristic.regions[0].min_rate_bps;
    const double best = reference.min_rate_bps;
    if (best < got) ++result.dominance_violations;
    const double gap = (best - got) / best;
    result.max_gap = std::max(result.max_gap, gap);
    if (symmetric) {
      ++result.symmetric_instances;
      if (got == best) ++result.symmetric_equal;
    }
  }
  return result;
}

}  // namespace gridshift
