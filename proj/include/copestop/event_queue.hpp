#pragma once

#include <cstdint>
#include <memory>
#include <queue>
#include <vector>

#include "copestop/coding.hpp"

namespace copestop {

/// Event classes, in tie-break rank order for events at the same timestamp.
enum class EventKind : std::uint8_t {
  PacketArrival = 0,
  ReceptionReport = 1,
  TxOpportunity = 2,
  Delivery = 3,
  AckTimeout = 4,
  MeasurementTick = 5,
};

struct Event {
  double time = 0.0;
  EventKind kind = EventKind::PacketArrival;
  NodeId node = 0;   // the node the event acts on (receiver for Delivery)
  NodeId peer = 0;   // transmitting node for Delivery
  FlowId flow = 0;   // for PacketArrival
  PacketId packet = 0;  // for AckTimeout
  std::shared_ptr<const CodedPacket> coded;  // for Delivery
  std::uint64_t seq = 0;  // insertion order, the final tie break
};

/// Time-ordered event queue. Ties resolve by (time, kind rank, node id) and
/// finally by insertion order, so the processing sequence is a pure function
/// of the pushed events.
class EventQueue {
 public:
  void push(Event ev) {
    ev.seq = next_seq_++;
    heap_.push(std::move(ev));
  }

  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  const Event& top() const { return heap_.top(); }

  Event pop() {
    Event ev = heap_.top();
    heap_.pop();
    return ev;
  }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      if (a.kind != b.kind) return a.kind > b.kind;
      if (a.node != b.node) return a.node > b.node;
      return a.seq > b.seq;
    }
  };

  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  std::uint64_t next_seq_ = 0;
};

}  // namespace copestop
