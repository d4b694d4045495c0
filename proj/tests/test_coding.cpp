#include <catch2/catch.hpp>

#include <algorithm>
#include <set>
#include <vector>

#include "copestop/coding.hpp"
#include "copestop/rng.hpp"

using namespace copestop;

namespace {

Packet make_packet(PacketId id, NodeId next_hop, PayloadTag tag) {
  Packet p;
  p.id = id;
  p.next_hop = next_hop;
  p.payload_tag = tag;
  return p;
}

PacketMap to_map(const std::vector<Packet>& packets) {
  PacketMap map;
  for (const Packet& p : packets) map.emplace(p.id, p);
  return map;
}

// The two-flow relay scene: the relay queues P1 (to node 2) and P2 (to
// node 1), and each endpoint already holds its own packet.
struct RelayScene {
  std::vector<Packet> queue{make_packet(1, 2, 0xAAAA), make_packet(2, 1, 0x5555)};
  NeighborKnowledge knowledge{std::set<NodeId>{1, 2}};
  RelayScene() {
    knowledge.apply_reception_report(1, {1});
    knowledge.apply_reception_report(2, {2});
  }
};

}  // namespace

TEST_CASE("reception reports grow knowledge") {
  NeighborKnowledge knowledge(std::set<NodeId>{1, 2});
  knowledge.apply_reception_report(1, {});
  CHECK_FALSE(knowledge.knows(1, 42));

  knowledge.apply_reception_report(1, {1});
  CHECK(knowledge.knows(1, 1));

  knowledge.apply_reception_report(1, {1});  // idempotent
  CHECK(knowledge.held_by(1).size() == 1);

  CHECK_THROWS_AS(knowledge.apply_reception_report(99, {1}), TopologyError);

  SECTION("knowledge only grows, until a packet is retired") {
    knowledge.apply_reception_report(2, {7, 8});
    CHECK(knowledge.held_by(2).size() == 2);
    knowledge.purge(7);
    CHECK_FALSE(knowledge.knows(2, 7));
    CHECK(knowledge.knows(2, 8));
  }
}

TEST_CASE("decodability") {
  RelayScene scene;
  const PacketMap packets = to_map(scene.queue);

  CHECK(is_decodable(CodingOption{{1}}, scene.knowledge, packets));
  CHECK(is_decodable(CodingOption{{1, 2}}, scene.knowledge, packets));

  NeighborKnowledge blank(std::set<NodeId>{1, 2});
  blank.apply_reception_report(1, {1});
  CHECK_FALSE(is_decodable(CodingOption{{1, 2}}, blank, packets));  // node 2 holds nothing

  CHECK_THROWS_AS(is_decodable(CodingOption{{99}}, scene.knowledge, packets),
                  std::invalid_argument);
}

TEST_CASE("greedy best option") {
  RelayScene scene;
  SECTION("single packet") {
    const std::vector<Packet> queue{scene.queue[0]};
    CHECK(find_best_coding_option(queue, scene.knowledge).degree() == 1);
  }
  SECTION("relay pairs both flows") {
    const CodingOption option = find_best_coding_option(scene.queue, scene.knowledge);
    CHECK(option.degree() == 2);
    CHECK(option.members == std::vector<PacketId>{1, 2});
  }
  SECTION("head always included") {
    const CodingOption option = find_best_coding_option(scene.queue, scene.knowledge);
    CHECK(option.members.front() == scene.queue.front().id);
  }
}

TEST_CASE("encode") {
  RelayScene scene;
  const PacketMap packets = to_map(scene.queue);

  const CodedPacket single = encode(CodingOption{{1}}, packets);
  CHECK(single.degree() == 1);
  CHECK(single.xor_tag == 0xAAAA);

  const CodedPacket pair = encode(CodingOption{{1, 2}}, packets);
  CHECK(pair.xor_tag == (0xAAAAull ^ 0x5555ull));
  CHECK(pair.per_next_hop.at(2) == 1);
  CHECK(pair.per_next_hop.at(1) == 2);

  // Duplicate next hops would XOR a receiver's two natives into garbage.
  const PacketMap clash = to_map({make_packet(1, 5, 1), make_packet(2, 5, 2)});
  CHECK_THROWS_AS(encode(CodingOption{{1, 2}}, clash), std::invalid_argument);
  CHECK_THROWS_AS(encode(CodingOption{}, packets), std::invalid_argument);
}

TEST_CASE("decode") {
  RelayScene scene;
  const PacketMap packets = to_map(scene.queue);
  const CodedPacket pair = encode(CodingOption{{1, 2}}, packets);

  SECTION("endpoint recovers the opposite packet") {
    const auto decoded = decode(pair, 1, {1}, packets);
    REQUIRE(decoded);
    CHECK(decoded->id == 2);
    CHECK(decoded->payload_tag == 0x5555);
  }
  SECTION("degree one needs no pool") {
    const CodedPacket single = encode(CodingOption{{1}}, packets);
    const auto decoded = decode(single, 2, {}, packets);
    REQUIRE(decoded);
    CHECK(decoded->id == 1);
    CHECK(decoded->payload_tag == 0xAAAA);
  }
  SECTION("empty pool cannot cancel") {
    CHECK_FALSE(decode(pair, 2, {}, packets));
  }
  SECTION("misdelivery") {
    CHECK_THROWS_AS(decode(pair, 7, {}, packets), std::invalid_argument);
  }
}

namespace {

// Random decodable instance: packets with next hops drawn from a small node
// pool, plus knowledge bits that make a chosen subset decodable.
struct RandomInstance {
  std::vector<Packet> queue;
  NeighborKnowledge knowledge;
  PacketMap packets;
};

RandomInstance random_instance(Rng& rng, int queue_len, int hop_pool) {
  RandomInstance inst;
  std::set<NodeId> hops;
  for (NodeId h = 1; h <= static_cast<NodeId>(hop_pool); ++h) hops.insert(h);
  inst.knowledge = NeighborKnowledge(hops);
  for (int i = 0; i < queue_len; ++i) {
    const auto hop = static_cast<NodeId>(1 + rng.below(hop_pool));
    inst.queue.push_back(make_packet(static_cast<PacketId>(i + 1), hop, rng.next()));
  }
  inst.packets = to_map(inst.queue);
  // Random knowledge: each (hop, packet) pair is known with probability 1/2.
  for (NodeId h = 1; h <= static_cast<NodeId>(hop_pool); ++h) {
    std::set<PacketId> report;
    for (const Packet& p : inst.queue)
      if (rng.uniform01() < 0.5) report.insert(p.id);
    inst.knowledge.apply_reception_report(h, report);
  }
  return inst;
}

}  // namespace

TEST_CASE("round trip property over randomized decodable options") {
  Rng rng(9001);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int degree = 1 + static_cast<int>(rng.below(5));
    std::vector<Packet> members;
    std::set<NodeId> hops;
    while (static_cast<int>(members.size()) < degree) {
      const auto hop = static_cast<NodeId>(1 + rng.below(32));
      if (!hops.insert(hop).second) continue;
      members.push_back(
          make_packet(static_cast<PacketId>(members.size() + 1), hop, rng.next()));
    }
    NeighborKnowledge knowledge(hops);
    for (const Packet& p : members) {
      std::set<PacketId> others;
      for (const Packet& q : members)
        if (q.id != p.id) others.insert(q.id);
      knowledge.apply_reception_report(p.next_hop, others);
    }
    const PacketMap packets = to_map(members);
    CodingOption option;
    for (const Packet& p : members) option.members.push_back(p.id);
    REQUIRE(is_decodable(option, knowledge, packets));
    const CodedPacket coded = encode(option, packets);
    for (const Packet& p : members) {
      std::set<PacketId> pool;
      for (const Packet& q : members)
        if (q.id != p.id) pool.insert(q.id);
      const auto decoded = decode(coded, p.next_hop, pool, packets);
      REQUIRE(decoded);
      CHECK(decoded->id == p.id);
      CHECK(decoded->payload_tag == p.payload_tag);
      ++checked;
    }
  }
  CHECK(checked >= 1000);
}

TEST_CASE("greedy is sound and the exhaustive oracle dominates it") {
  Rng rng(31337);
  int equal = 0;
  const int trials = 1000;
  for (int trial = 0; trial < trials; ++trial) {
    RandomInstance inst = random_instance(rng, 6, 4);
    const CodingOption greedy = find_best_coding_option(inst.queue, inst.knowledge);
    const CodingOption exact = exhaustive_best_option(inst.queue, inst.knowledge);
    REQUIRE(greedy.degree() >= 1);
    CHECK(greedy.members.front() == inst.queue.front().id);
    CHECK(exact.members.front() == inst.queue.front().id);
    CHECK(is_decodable(greedy, inst.knowledge, inst.packets));
    CHECK(is_decodable(exact, inst.knowledge, inst.packets));
    CHECK(greedy.degree() <= exact.degree());
    if (greedy.degree() == exact.degree()) ++equal;
  }
  INFO("greedy matched the exhaustive degree in " << equal << "/" << trials << " instances");
  CHECK(equal > 0);
}

TEST_CASE("exhaustive oracle") {
  RelayScene scene;
  SECTION("relay instance") {
    CHECK(exhaustive_best_option(scene.queue, scene.knowledge).degree() == 2);
  }
  SECTION("singleton") {
    const std::vector<Packet> queue{scene.queue[0]};
    CHECK(exhaustive_best_option(queue, scene.knowledge).degree() == 1);
  }
  SECTION("ties prefer earlier queue positions") {
    // Three candidates with the same degree-2 potential: packet ids 1+2 beat 1+3.
    std::vector<Packet> queue{make_packet(1, 1, 1), make_packet(2, 2, 2), make_packet(3, 2, 3)};
    NeighborKnowledge knowledge(std::set<NodeId>{1, 2});
    knowledge.apply_reception_report(1, {2, 3});
    knowledge.apply_reception_report(2, {1});
    const CodingOption best = exhaustive_best_option(queue, knowledge);
    CHECK(best.members == std::vector<PacketId>{1, 2});
  }
  SECTION("scope guard") {
    std::vector<Packet> queue;
    for (int i = 0; i < 13; ++i)
      queue.push_back(make_packet(static_cast<PacketId>(i + 1), static_cast<NodeId>(i + 1), 0));
    NeighborKnowledge knowledge{std::set<NodeId>{}};
    CHECK_THROWS_AS(exhaustive_best_option(queue, knowledge), std::invalid_argument);
  }
}
