#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include "copestop/errors.hpp"

namespace copestop {

using NodeId = std::uint32_t;
using FlowId = std::uint32_t;
using PacketId = std::uint64_t;
using PayloadTag = std::uint64_t;

/// A native (uncoded) packet. The payload is modeled as an XOR-able tag so
/// the coding algebra can be verified without carrying real bytes.
struct Packet {
  PacketId id = 0;
  FlowId flow = 0;
  NodeId source = 0;
  NodeId destination = 0;
  NodeId next_hop = 0;
  std::uint32_t size_bytes = 1000;
  double created_at = 0.0;
  PayloadTag payload_tag = 0;
};

using PacketMap = std::map<PacketId, Packet>;

/// XOR combination of natives with pairwise distinct next hops; degree 1 is
/// a plain native transmission.
struct CodedPacket {
  std::vector<PacketId> native_ids;         // sorted
  std::map<NodeId, PacketId> per_next_hop;  // receiver -> the native meant for it
  PayloadTag xor_tag = 0;

  int degree() const { return static_cast<int>(native_ids.size()); }
};

/// What a node believes its neighbors hold, fed by reception reports (and by
/// hearing a neighbor transmit, which proves possession). Entries only grow
/// until a packet is retired end-of-life.
class NeighborKnowledge {
 public:
  NeighborKnowledge() = default;
  explicit NeighborKnowledge(std::set<NodeId> neighbors) {
    for (NodeId n : neighbors) known_[n];
  }

  void apply_reception_report(NodeId reporter, const std::set<PacketId>& packet_ids) {
    auto it = known_.find(reporter);
    if (it == known_.end())
      throw TopologyError("reception report from unknown neighbor " + std::to_string(reporter));
    it->second.insert(packet_ids.begin(), packet_ids.end());
  }

  bool knows(NodeId neighbor, PacketId id) const {
    auto it = known_.find(neighbor);
    return it != known_.end() && it->second.count(id) > 0;
  }

  const std::set<PacketId>& held_by(NodeId neighbor) const {
    auto it = known_.find(neighbor);
    if (it == known_.end())
      throw TopologyError("unknown neighbor " + std::to_string(neighbor));
    return it->second;
  }

  bool has_neighbor(NodeId neighbor) const { return known_.count(neighbor) > 0; }

  /// Retires a packet everywhere once it is acknowledged end-of-life.
  void purge(PacketId id) {
    for (auto& [neighbor, held] : known_) held.erase(id);
  }

 private:
  std::map<NodeId, std::set<PacketId>> known_;
};

/// A decodable subset of the output queue, always containing the head-of-line
/// packet (members[0]).
struct CodingOption {
  std::vector<PacketId> members;  // in queue order, members[0] is the head

  int degree() const { return static_cast<int>(members.size()); }
};

/// True iff every member's next hop already holds all the other members, so
/// each receiver can cancel everything but its own native.
inline bool is_decodable(const CodingOption& option, const NeighborKnowledge& knowledge,
                         const PacketMap& packets) {
  for (PacketId member : option.members) {
    auto it = packets.find(member);
    if (it == packets.end())
      throw std::invalid_argument("coding option references unknown packet " +
                                  std::to_string(member));
    const NodeId hop = it->second.next_hop;
    for (PacketId other : option.members) {
      if (other == member) continue;
      if (!knowledge.knows(hop, other)) return false;
    }
  }
  return true;
}

namespace detail {

inline bool hops_distinct(const std::vector<const Packet*>& members) {
  for (std::size_t i = 0; i < members.size(); ++i)
    for (std::size_t j = i + 1; j < members.size(); ++j)
      if (members[i]->next_hop == members[j]->next_hop) return false;
  return true;
}

}  // namespace detail

/// Greedy search for the densest decodable option containing the head:
/// scan the queue in order and keep a packet whenever its next hop is new
/// and the enlarged set stays decodable. Deterministic by construction.
inline CodingOption find_best_coding_option(std::span<const Packet> queue,
                                            const NeighborKnowledge& knowledge) {
  if (queue.empty()) throw std::invalid_argument("queue must contain the head packet");
  PacketMap map;
  for (const Packet& p : queue) map.emplace(p.id, p);

  CodingOption option{{queue[0].id}};
  std::set<NodeId> hops{queue[0].next_hop};
  for (std::size_t i = 1; i < queue.size(); ++i) {
    const Packet& candidate = queue[i];
    if (hops.count(candidate.next_hop)) continue;
    option.members.push_back(candidate.id);
    if (is_decodable(option, knowledge, map)) {
      hops.insert(candidate.next_hop);
    } else {
      option.members.pop_back();
    }
  }
  return option;
}

/// Exhaustive reference search: the maximum-degree decodable option holding
/// the head, ties broken toward the earliest queue positions. Test oracle
/// for the greedy search; refuses queues long enough to blow up.
inline CodingOption exhaustive_best_option(std::span<const Packet> queue,
                                           const NeighborKnowledge& knowledge) {
  if (queue.empty()) throw std::invalid_argument("queue must contain the head packet");
  if (queue.size() > 12)
    throw std::invalid_argument("exhaustive search limited to queues of at most 12 packets");
  PacketMap map;
  for (const Packet& p : queue) map.emplace(p.id, p);

  const std::size_t n = queue.size();
  std::vector<std::size_t> best{0};
  for (std::uint32_t mask = 0; mask < (1u << (n - 1)); ++mask) {
    std::vector<std::size_t> positions{0};
    for (std::size_t i = 1; i < n; ++i)
      if (mask & (1u << (i - 1))) positions.push_back(i);
    if (positions.size() < best.size()) continue;
    if (positions.size() == best.size() && positions >= best) continue;

    std::vector<const Packet*> members;
    CodingOption option;
    for (std::size_t pos : positions) {
      members.push_back(&queue[pos]);
      option.members.push_back(queue[pos].id);
    }
    if (!detail::hops_distinct(members)) continue;
    if (!is_decodable(option, knowledge, map)) continue;
    best = positions;
  }
  CodingOption out;
  for (std::size_t pos : best) out.members.push_back(queue[pos].id);
  return out;
}

/// XORs the option members into one coded packet. Rejects structurally
/// invalid options (duplicate next hops would make a receiver unable to
/// cancel both of its natives).
inline CodedPacket encode(const CodingOption& option, const PacketMap& packets) {
  if (option.members.empty()) throw std::invalid_argument("cannot encode an empty option");
  CodedPacket coded;
  for (PacketId id : option.members) {
    auto it = packets.find(id);
    if (it == packets.end())
      throw std::invalid_argument("coding option references unknown packet " + std::to_string(id));
    const Packet& p = it->second;
    if (!coded.per_next_hop.emplace(p.next_hop, p.id).second)
      throw std::invalid_argument("coding option members must have pairwise distinct next hops");
    coded.native_ids.push_back(id);
    coded.xor_tag ^= p.payload_tag;
  }
  std::sort(coded.native_ids.begin(), coded.native_ids.end());
  return coded;
}

/// Recovers the native intended for the receiver by cancelling every other
/// member against the receiver's pool. Returns nothing when the pool cannot
/// cancel the packet (a counted decode failure at this hop); throws if the
/// receiver is not a next hop of the coded packet at all.
inline std::optional<Packet> decode(const CodedPacket& coded, NodeId receiver,
                                    const std::set<PacketId>& pool, const PacketMap& packets) {
  auto hop = coded.per_next_hop.find(receiver);
  if (hop == coded.per_next_hop.end())
    throw std::invalid_argument("node " + std::to_string(receiver) +
                                " is not a next hop of this coded packet");
  const PacketId target = hop->second;
  PayloadTag recovered = coded.xor_tag;
  for (PacketId id : coded.native_ids) {
    if (id == target) continue;
    if (pool.count(id) == 0) return std::nullopt;
    auto it = packets.find(id);
    if (it == packets.end())
      throw std::invalid_argument("coded packet references unknown packet " + std::to_string(id));
    recovered ^= it->second.payload_tag;
  }
  auto it = packets.find(target);
  if (it == packets.end())
    throw std::invalid_argument("coded packet references unknown packet " + std::to_string(target));
  Packet out = it->second;
  out.payload_tag = recovered;  // reconstructed by cancellation, not copied
  return out;
}

}  // namespace copestop
