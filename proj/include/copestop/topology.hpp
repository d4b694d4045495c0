#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "copestop/coding.hpp"
#include "copestop/errors.hpp"
#include "copestop/rng.hpp"

namespace copestop {

struct Position {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Position& a, const Position& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Static node placement with symmetric radio adjacency: two nodes are
/// neighbors iff they sit within the radio radius of each other.
struct Topology {
  std::vector<Position> positions;
  double radius = 0.0;
  std::vector<std::vector<NodeId>> neighbors;  // ascending node ids

  static Topology from_positions(std::vector<Position> positions, double radius) {
    Topology topo;
    topo.positions = std::move(positions);
    topo.radius = radius;
    const std::size_t n = topo.positions.size();
    topo.neighbors.assign(n, {});
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = u + 1; v < n; ++v)
        if (distance(topo.positions[u], topo.positions[v]) <= radius) {
          topo.neighbors[u].push_back(static_cast<NodeId>(v));
          topo.neighbors[v].push_back(static_cast<NodeId>(u));
        }
    return topo;
  }

  std::size_t node_count() const { return positions.size(); }

  bool connected() const {
    if (positions.empty()) return true;
    std::vector<bool> seen(positions.size(), false);
    std::vector<NodeId> stack{0};
    seen[0] = true;
    std::size_t visited = 1;
    while (!stack.empty()) {
      NodeId u = stack.back();
      stack.pop_back();
      for (NodeId v : neighbors[u])
        if (!seen[v]) {
          seen[v] = true;
          ++visited;
          stack.push_back(v);
        }
    }
    return visited == positions.size();
  }
};

/// Uniform random placement over the field, reseeded until the adjacency
/// graph is connected. Deterministic for a given seed.
inline Topology build_topology(int node_count, double width, double height, double radius,
                               std::uint64_t seed, int max_retries = 64) {
  if (node_count < 2) throw std::invalid_argument("node_count must be >= 2");
  if (!(width > 0) || !(height > 0) || !(radius > 0))
    throw std::invalid_argument("field dimensions and radius must be > 0");
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    Rng rng(derive_seed(seed, /*stream_tag=*/0x746f706full, static_cast<std::uint64_t>(attempt)));
    std::vector<Position> positions(static_cast<std::size_t>(node_count));
    for (auto& p : positions) {
      p.x = rng.uniform(0.0, width);
      p.y = rng.uniform(0.0, height);
    }
    Topology topo = Topology::from_positions(std::move(positions), radius);
    if (topo.connected()) return topo;
  }
  throw TopologyError("could not place a connected topology within " +
                      std::to_string(max_retries) + " attempts");
}

/// Greedy geographic forwarding: the neighbor closest to the destination,
/// lowest id on ties. Returns nothing from a local minimum (no neighbor is
/// strictly closer than the current node), where the packet is unroutable.
inline std::optional<NodeId> route_next_hop(NodeId current, NodeId destination,
                                            const Topology& topo) {
  if (current == destination)
    throw std::invalid_argument("routing requires current != destination");
  const Position& goal = topo.positions[destination];
  std::optional<NodeId> best;
  double best_dist = 0.0;
  for (NodeId v : topo.neighbors[current]) {
    const double d = distance(topo.positions[v], goal);
    if (!best || d < best_dist) {
      best = v;
      best_dist = d;
    }
  }
  if (!best) return std::nullopt;
  if (best_dist >= distance(topo.positions[current], goal)) return std::nullopt;
  return best;
}

/// Walks the greedy route; nothing if forwarding stalls before the
/// destination.
inline std::optional<std::vector<NodeId>> greedy_route(NodeId source, NodeId destination,
                                                       const Topology& topo) {
  std::vector<NodeId> route{source};
  NodeId at = source;
  while (at != destination) {
    auto hop = route_next_hop(at, destination, topo);
    if (!hop) return std::nullopt;
    at = *hop;
    route.push_back(at);
    if (route.size() > topo.node_count()) return std::nullopt;
  }
  return route;
}

/// A unicast session generating packets with exponential inter-arrival times.
struct Flow {
  FlowId id = 0;
  NodeId source = 0;
  NodeId destination = 0;
  double packet_rate = 1.0;
};

}  // namespace copestop
