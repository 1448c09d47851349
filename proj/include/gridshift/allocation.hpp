#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gridshift/channel.hpp"
#include "gridshift/comm_graph.hpp"
#include "gridshift/log.hpp"

namespace gridshift {

// One solved link: a set of exclusively owned sub-carriers plus a symmetric
// per-direction, per-carrier transmit power. Each endpoint pays for its own
// outgoing direction, so a link consumes |carriers| * power at both ends.
struct LinkAllocation {
  std::pair<NodeId, NodeId> link;
  std::vector<int> carriers;
  double power_per_carrier_mw = 0.0;
  double gain = 0.0;
  double rate_bps = 0.0;  // per direction
  double delay_s = 0.0;
};

// Allocation input for one region: topology, per-link gains (aligned with
// graph.edges()) and per-node power budgets.
struct RegionSpec {
  CommGraph graph;
  std::vector<double> link_gains;
  std::vector<double> p_max_mw;
  std::vector<double> p_cst_mw;
};

inline RegionSpec make_region_spec(const CommGraph& graph,
                                   const std::vector<GeoLocation>& locations,
                                   const ChannelParams& params) {
  if (static_cast<int>(locations.size()) != graph.node_count())
    throw std::invalid_argument("make_region_spec: location count does not match graph");
  RegionSpec spec{graph, {}, {}, {}};
  spec.link_gains.reserve(graph.edges().size());
  for (const auto& [i, j] : graph.edges()) {
    const double d = distance_km(locations[static_cast<std::size_t>(i)],
                                 locations[static_cast<std::size_t>(j)]);
    spec.link_gains.push_back(channel_gain(d, params));
  }
  spec.p_max_mw.assign(static_cast<std::size_t>(graph.node_count()), params.p_max_mw);
  spec.p_cst_mw.assign(static_cast<std::size_t>(graph.node_count()), params.p_cst_mw);
  return spec;
}

struct RegionAllocation {
  std::vector<LinkAllocation> links;
  double tau_max_s = 0.0;
  double min_rate_bps = 0.0;
};

struct AllocationPlan {
  std::vector<RegionAllocation> regions;
};

namespace detail {

// Per-carrier power needed for one link to reach `rate_bps` over
// `carriers` sub-carriers: inverts the Shannon formula.
inline double required_power_mw(double rate_bps, int carriers, double gain,
                                const ChannelParams& params) {
  const double bits_per_hz = rate_bps / (params.subcarrier_bandwidth_hz * carriers);
  return std::expm1(bits_per_hz * std::numbers::ln2) * params.noise_mw / gain;
}

inline void check_region_spec(const RegionSpec& spec, const ChannelParams& params) {
  const int n = spec.graph.node_count();
  const int e = spec.graph.edge_count();
  if (e < 1) throw std::invalid_argument("allocate: region has no links");
  if (connected_components(spec.graph).size() != 1)
    throw std::invalid_argument("allocate: region graph is not connected");
  if (static_cast<int>(spec.link_gains.size()) != e)
    throw std::invalid_argument("allocate: gain count does not match link count");
  for (double g : spec.link_gains)
    if (!(g > 0)) throw std::invalid_argument("allocate: non-positive link gain");
  if (static_cast<int>(spec.p_max_mw.size()) != n || static_cast<int>(spec.p_cst_mw.size()) != n)
    throw std::invalid_argument("allocate: budget vectors do not match node count");
  for (int i = 0; i < n; ++i) {
    if (!(spec.p_cst_mw[static_cast<std::size_t>(i)] <
          spec.p_max_mw[static_cast<std::size_t>(i)]))
      throw std::runtime_error("allocate: infeasible, node budget cannot cover circuit power");
  }
  if (params.subcarrier_count < e)
    throw std::runtime_error("allocate: infeasible, fewer sub-carriers than links");
}

struct PowerSolve {
  double min_rate_bps = 0.0;
  std::vector<double> power_per_carrier_mw;
};

// Max-min rate for fixed per-link carrier counts. All links are driven to a
// common rate target; the largest feasible target under the per-node power
// budgets is found by bisection, which is exact for this sub-problem.
inline PowerSolve solve_power(const RegionSpec& spec, const ChannelParams& params,
                              const std::vector<int>& carriers) {
  const auto& edges = spec.graph.edges();
  const int e_count = static_cast<int>(edges.size());
  std::vector<double> budget(spec.p_max_mw.size());
  for (std::size_t i = 0; i < budget.size(); ++i)
    budget[i] = spec.p_max_mw[i] - spec.p_cst_mw[i];

  // Upper bound: each link served alone by its poorer endpoint.
  double hi = std::numeric_limits<double>::infinity();
  for (int e = 0; e < e_count; ++e) {
    const auto& [a, b] = edges[static_cast<std::size_t>(e)];
    const double solo = std::min(budget[static_cast<std::size_t>(a)],
                                 budget[static_cast<std::size_t>(b)]) /
                        carriers[static_cast<std::size_t>(e)];
    hi = std::min(hi, link_rate(carriers[static_cast<std::size_t>(e)], solo,
                                spec.link_gains[static_cast<std::size_t>(e)], params));
  }

  std::vector<double> powers(static_cast<std::size_t>(e_count), 0.0);
  std::vector<double> load(budget.size(), 0.0);
  const auto feasible = [&](double rate) {
    std::fill(load.begin(), load.end(), 0.0);
    for (int e = 0; e < e_count; ++e) {
      const double p = required_power_mw(rate, carriers[static_cast<std::size_t>(e)],
                                         spec.link_gains[static_cast<std::size_t>(e)], params);
      powers[static_cast<std::size_t>(e)] = p;
      const auto& [a, b] = edges[static_cast<std::size_t>(e)];
      load[static_cast<std::size_t>(a)] += carriers[static_cast<std::size_t>(e)] * p;
      load[static_cast<std::size_t>(b)] += carriers[static_cast<std::size_t>(e)] * p;
    }
    for (std::size_t i = 0; i < budget.size(); ++i)
      if (load[i] > budget[i]) return false;
    return true;
  };

  double lo = 0.0;
  for (int it = 0; it < 120; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (feasible(mid))
      lo = mid;
    else
      hi = mid;
  }
  PowerSolve out;
  out.min_rate_bps = lo;
  feasible(lo);  // leaves the feasible powers in `powers`
  out.power_per_carrier_mw = powers;
  return out;
}

// Local search over integer carrier counts. Single-carrier moves alone get
// trapped (e.g. (1,5,1) on a 3-link chain when (2,3,2) is optimal, since the
// improving step moves two carriers at once), so the neighbourhood also
// contains donor->two-receivers and two-donors->receiver moves.
inline double carrier_local_search(const RegionSpec& spec, const ChannelParams& params,
                                   std::vector<int>& counts) {
  const int e_count = static_cast<int>(counts.size());
  const auto idx = [](int e) { return static_cast<std::size_t>(e); };
  double current = solve_power(spec, params, counts).min_rate_bps;
  const auto try_move = [&](std::vector<int>& candidate) {
    const double rate = solve_power(spec, params, candidate).min_rate_bps;
    if (rate > current * (1.0 + 1e-12)) {
      counts = candidate;
      current = rate;
      return true;
    }
    return false;
  };

  bool improved = true;
  for (int sweep = 0; improved && sweep < 200; ++sweep) {
    improved = false;
    for (int from = 0; from < e_count; ++from) {
      for (int to = 0; to < e_count; ++to) {
        if (to == from || counts[idx(from)] <= 1) continue;
        std::vector<int> candidate = counts;
        --candidate[idx(from)];
        ++candidate[idx(to)];
        improved |= try_move(candidate);
      }
    }
    for (int from = 0; from < e_count; ++from) {
      for (int to1 = 0; to1 < e_count; ++to1) {
        if (to1 == from) continue;
        for (int to2 = to1; to2 < e_count; ++to2) {
          if (to2 == from || counts[idx(from)] <= 2) continue;
          std::vector<int> candidate = counts;
          candidate[idx(from)] -= 2;
          ++candidate[idx(to1)];
          ++candidate[idx(to2)];
          improved |= try_move(candidate);
        }
      }
    }
    for (int from1 = 0; from1 < e_count; ++from1) {
      for (int from2 = from1 + 1; from2 < e_count; ++from2) {
        for (int to = 0; to < e_count; ++to) {
          if (to == from1 || to == from2) continue;
          if (counts[idx(from1)] <= 1 || counts[idx(from2)] <= 1) continue;
          std::vector<int> candidate = counts;
          --candidate[idx(from1)];
          --candidate[idx(from2)];
          candidate[idx(to)] += 2;
          improved |= try_move(candidate);
        }
      }
    }
  }
  return current;
}

// Integer carrier-count search: greedy growth from one carrier per link plus
// a balanced split as a second start, each refined by local search. The
// bandwidth term dominates, so all S carriers are always spent.
inline std::vector<int> search_carriers(const RegionSpec& spec, const ChannelParams& params) {
  const int e_count = spec.graph.edge_count();
  const int s = params.subcarrier_count;

  std::vector<int> greedy(static_cast<std::size_t>(e_count), 1);
  for (int extra = e_count; extra < s; ++extra) {
    int best_edge = 0;
    double best_rate = -1.0;
    for (int e = 0; e < e_count; ++e) {
      ++greedy[static_cast<std::size_t>(e)];
      const double rate = solve_power(spec, params, greedy).min_rate_bps;
      --greedy[static_cast<std::size_t>(e)];
      if (rate > best_rate) {
        best_rate = rate;
        best_edge = e;
      }
    }
    ++greedy[static_cast<std::size_t>(best_edge)];
  }
  const double greedy_rate = carrier_local_search(spec, params, greedy);

  std::vector<int> balanced(static_cast<std::size_t>(e_count), s / e_count);
  for (int e = 0; e < s % e_count; ++e) ++balanced[static_cast<std::size_t>(e)];
  const double balanced_rate = carrier_local_search(spec, params, balanced);

  return balanced_rate > greedy_rate ? balanced : greedy;
}

inline RegionAllocation assemble_region(const RegionSpec& spec, const ChannelParams& params,
                                        const std::vector<int>& counts) {
  const PowerSolve solved = solve_power(spec, params, counts);
  RegionAllocation region;
  region.min_rate_bps = std::numeric_limits<double>::infinity();
  int next_carrier = 0;
  const auto& edges = spec.graph.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    LinkAllocation link;
    link.link = edges[e];
    link.carriers.resize(static_cast<std::size_t>(counts[e]));
    for (int c = 0; c < counts[e]; ++c) link.carriers[static_cast<std::size_t>(c)] = next_carrier++;
    link.power_per_carrier_mw = solved.power_per_carrier_mw[e];
    link.gain = spec.link_gains[e];
    link.rate_bps = link_rate(counts[e], link.power_per_carrier_mw, link.gain, params);
    link.delay_s = link_delay(link.rate_bps, params);
    region.min_rate_bps = std::min(region.min_rate_bps, link.rate_bps);
    region.tau_max_s = std::max(region.tau_max_s, link.delay_s);
    region.links.push_back(std::move(link));
  }
  return region;
}

}  // namespace detail

// Pre-event scheduler: per region, maximises the minimum per-direction link
// rate subject to exclusive sub-carrier ownership and per-node power
// budgets. Sub-carriers are reused across regions. Deterministic.
inline AllocationPlan allocate(const std::vector<RegionSpec>& regions,
                               const ChannelParams& params) {
  params.validate();
  AllocationPlan plan;
  for (std::size_t r = 0; r < regions.size(); ++r) {
    detail::check_region_spec(regions[r], params);
    const auto counts = detail::search_carriers(regions[r], params);
    for (std::size_t e = 0; e < counts.size(); ++e)
      log::debug("region %zu link %zu: %d carriers", r, e, counts[e]);
    plan.regions.push_back(detail::assemble_region(regions[r], params, counts));
    log::info("region %zu: min rate %.1f bps, tau_max %.4f s", r,
              plan.regions.back().min_rate_bps, plan.regions.back().tau_max_s);
  }
  return plan;
}

// Exhaustive reference solver for small instances: enumerates every
// composition of the sub-carriers over the links and solves each power
// sub-problem exactly. The true optimum under the common-rate power
// convention used by allocate().
inline RegionAllocation brute_force_allocate(const RegionSpec& spec,
                                             const ChannelParams& params,
                                             int max_links = 3, int max_carriers = 8) {
  params.validate();
  detail::check_region_spec(spec, params);
  if (spec.graph.edge_count() > max_links || params.subcarrier_count > max_carriers)
    throw std::invalid_argument("brute_force_allocate: instance exceeds caps");

  const int e_count = spec.graph.edge_count();
  const int s = params.subcarrier_count;
  std::vector<int> counts(static_cast<std::size_t>(e_count), 1);
  std::vector<int> best;
  double best_rate = -1.0;

  const auto recurse = [&](auto&& self, int edge, int remaining) -> void {
    if (edge == e_count - 1) {
      counts[static_cast<std::size_t>(edge)] = remaining;
      const double rate = detail::solve_power(spec, params, counts).min_rate_bps;
      if (rate > best_rate) {
        best_rate = rate;
        best = counts;
      }
      return;
    }
    for (int c = 1; c <= remaining - (e_count - 1 - edge); ++c) {
      counts[static_cast<std::size_t>(edge)] = c;
      self(self, edge + 1, remaining - c);
    }
  };
  recurse(recurse, 0, s);
  return detail::assemble_region(spec, params, best);
}

inline nlohmann::ordered_json plan_to_json(const AllocationPlan& plan) {
  nlohmann::ordered_json doc;
  doc["regions"] = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < plan.regions.size(); ++r) {
    const auto& region = plan.regions[r];
    nlohmann::ordered_json jr;
    jr["index"] = r;
    jr["links"] = nlohmann::ordered_json::array();
    for (const auto& link : region.links) {
      nlohmann::ordered_json jl;
      jl["link"] = {link.link.first, link.link.second};
      jl["carriers"] = link.carriers;
      jl["power_per_carrier_mw"] = link.power_per_carrier_mw;
      jl["gain"] = link.gain;
      jl["rate_bps"] = link.rate_bps;
      jl["delay_s"] = link.delay_s;
      jr["links"].push_back(std::move(jl));
    }
    jr["min_rate_bps"] = region.min_rate_bps;
    jr["tau_max_s"] = region.tau_max_s;
    doc["regions"].push_back(std::move(jr));
  }
  return doc;
}

}  // namespace gridshift
