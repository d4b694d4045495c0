#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "copestop/coding.hpp"
#include "copestop/errors.hpp"
#include "copestop/estimators.hpp"
#include "copestop/event_queue.hpp"
#include "copestop/rng.hpp"
#include "copestop/stopping_policy.hpp"
#include "copestop/topology.hpp"

namespace copestop {

enum class PolicyKind : std::uint8_t { OptimalStopping, ImmediateSend, NoCoding };

inline const char* policy_name(PolicyKind p) {
  switch (p) {
    case PolicyKind::OptimalStopping: return "optimal-stopping";
    case PolicyKind::ImmediateSend: return "immediate-send";
    case PolicyKind::NoCoding: return "no-coding";
  }
  return "?";
}

/// Radio power draw in milliwatts per mode, plus the always-on circuit term.
struct EnergyModel {
  double tx_mw = 70.0;
  double rx_mw = 50.0;
  double idle_mw = 25.0;
  double circuit_mw = 10.0;
};

/// Energy in millijoules for a node that transmitted and received for the
/// given durations over the run horizon; whatever radio time is left is idle
/// (clamped at zero), and the circuit term burns for the whole horizon.
inline double account_energy(double tx_seconds, double rx_seconds, double horizon,
                             const EnergyModel& model = {}) {
  const double idle = std::max(0.0, horizon - tx_seconds - rx_seconds);
  return model.tx_mw * tx_seconds + model.rx_mw * rx_seconds + model.idle_mw * idle +
         model.circuit_mw * horizon;
}

struct ScriptedArrival {
  double time = 0.0;
  FlowId flow = 0;
};

struct SimConfig {
  int node_count = 30;
  double field_width = 600.0;
  double field_height = 600.0;
  double radius = 200.0;
  int flow_count = 0;
  double packet_rate = 1.0;      // per flow
  double opportunity_rate = 5.0; // per node
  double report_rate = 1.0;      // per node
  PolicyKind policy = PolicyKind::OptimalStopping;
  double delay_discount = 0.05;
  int buffer_size = 40;
  double gain_slope = 1.0;
  double gain_intercept = 0.0;
  int lms_taps = 4;
  double lms_step = 0.01;
  double measurement_tick = 1.0;
  double loss_probability = 0.0;
  double horizon = 3000.0;
  double arrival_stop = -1.0;  // < 0 means "generate until the horizon"
  double bitrate_bps = 1e6;
  int packet_size_bytes = 1000;
  EnergyModel energy;

  // Programmatic overrides for fixtures and tests; the flat config file
  // never populates these.
  std::optional<Topology> topology_override;
  std::vector<Flow> flows_override;
  std::vector<ScriptedArrival> scripted_arrivals;
  std::vector<double> opportunity_rate_per_node;
  bool collect_opportunity_samples = false;
  bool trace_enabled = false;

  double effective_arrival_stop() const { return arrival_stop < 0 ? horizon : arrival_stop; }

  void validate() const {
    if (node_count < 2) throw ConfigError("node_count", "must be >= 2");
    if (!(field_width > 0)) throw ConfigError("field_width", "must be > 0");
    if (!(field_height > 0)) throw ConfigError("field_height", "must be > 0");
    if (!(radius > 0)) throw ConfigError("radius", "must be > 0");
    if (flow_count < 0) throw ConfigError("flow_count", "must be >= 0");
    if (!(packet_rate > 0)) throw ConfigError("packet_rate", "must be > 0");
    if (!(opportunity_rate > 0)) throw ConfigError("opportunity_rate", "must be > 0");
    if (!(report_rate >= 0)) throw ConfigError("report_rate", "must be >= 0");
    if (!(delay_discount > 0)) throw ConfigError("delay_discount", "must be > 0");
    if (buffer_size < 1) throw ConfigError("buffer_size", "must be >= 1");
    if (!(gain_slope > 0)) throw ConfigError("gain_slope", "must be > 0");
    if (lms_taps < 1) throw ConfigError("lms_taps", "must be >= 1");
    if (!(lms_step > 0)) throw ConfigError("lms_step", "must be > 0");
    if (!(measurement_tick > 0)) throw ConfigError("measurement_tick", "must be > 0");
    if (loss_probability < 0 || loss_probability > 1)
      throw ConfigError("loss_probability", "must lie in [0, 1]");
    if (!(horizon > 0)) throw ConfigError("horizon", "must be > 0");
    if (!(bitrate_bps > 0)) throw ConfigError("bitrate_bps", "must be > 0");
    if (packet_size_bytes < 1) throw ConfigError("packet_size_bytes", "must be >= 1");
    if (!opportunity_rate_per_node.empty() &&
        opportunity_rate_per_node.size() != static_cast<std::size_t>(node_count))
      throw ConfigError("opportunity_rate_per_node", "must list one rate per node");
    for (double r : opportunity_rate_per_node)
      if (!(r > 0)) throw ConfigError("opportunity_rate_per_node", "rates must be > 0");
  }
};

struct MetricsReport {
  double coding_gain = 1.0;  // sum of effective degrees / transmissions; 1.0 when none
  std::optional<double> mean_delay;
  double throughput = 0.0;   // delivered packets per time unit
  double energy_per_node_mj = 0.0;
  long long transmissions = 0;
  std::map<int, long long> degree_histogram;
  long long drops_overflow = 0;
  long long drops_unroutable = 0;
  long long decode_failures = 0;
  long long generated = 0;
  long long delivered = 0;
  long long in_flight = 0;
  double est_opportunity_rate = 0.0;  // node means of the final estimates
  double est_degree_growth = 0.0;
  double observed_packet_raise = 0.0;
  double observed_report_raise = 0.0;
  std::string rng_algorithm{kRngAlgorithm};
};

struct NodeSummary {
  NodeId id = 0;
  double energy_mj = 0.0;
  double est_opportunity_rate = 0.0;
  double est_degree_growth = 0.0;
  double packet_raise_fraction = 0.0;
  double report_raise_fraction = 0.0;
  long long transmissions = 0;
};

struct TraceEntry {
  double time = 0.0;
  std::string kind;
  NodeId node = 0;
  std::string detail;
};

struct RunResult {
  MetricsReport report;
  std::vector<NodeSummary> nodes;
  long long in_flight_scan = 0;  // queues + pending at the horizon, counted independently
  std::vector<double> opportunity_interarrivals;
  std::vector<TraceEntry> trace;
};

namespace detail {

enum class PacketFate : std::uint8_t { InFlight, Delivered, Overflow, Unroutable };

class Simulation {
 public:
  Simulation(const SimConfig& config, std::uint64_t seed) : cfg_(config), seed_(seed) {
    cfg_.validate();
    topo_ = cfg_.topology_override ? *cfg_.topology_override
                                   : build_topology(cfg_.node_count, cfg_.field_width,
                                                    cfg_.field_height, cfg_.radius,
                                                    derive_seed(seed_, kTagTopology));
    if (static_cast<int>(topo_.node_count()) != cfg_.node_count)
      throw ConfigError("node_count", "does not match the topology override");
    build_flows();
    build_nodes();
  }

  RunResult run() {
    schedule_initial_events();
    while (!events_.empty() && events_.top().time <= cfg_.horizon) {
      const Event ev = events_.pop();
      dispatch(ev);
    }
    return collect_metrics();
  }

 private:
  static constexpr std::uint64_t kTagTopology = 0x746f706full;  // "topo"
  static constexpr std::uint64_t kTagFlowPlan = 0x706c616eull;  // "plan"
  static constexpr std::uint64_t kTagArrival = 0x666c6f77ull;   // "flow"
  static constexpr std::uint64_t kTagOpportunity = 0x6f707074ull;
  static constexpr std::uint64_t kTagReport = 0x72657074ull;
  static constexpr std::uint64_t kTagPayload = 0x74616773ull;
  static constexpr std::uint64_t kTagLoss = 0x6c6f7373ull;

  enum class RaiseClass { None, Arrival, Report };

  struct Node {
    NodeId id = 0;
    std::vector<Packet> queue;
    std::set<PacketId> held;          // everything this node can cancel with
    std::set<PacketId> report_delta;  // held ids not yet announced to neighbors
    NeighborKnowledge knowledge;
    CodingOption best_option;  // for the current head; empty with the queue
    RateCounter tx_counter;
    DegreeRateEstimator growth{4, 0.01};
    PolicyParams policy;
    int cycle_peak = 1;  // the degree baseline; resets to 1 with every send
    long long win_arrivals = 0, win_arr_raising = 0;
    long long win_knowledge = 0, win_know_raising = 0;
    long long arrivals = 0, arr_raising = 0;
    long long knowledge_rx = 0, know_raising = 0;
    std::set<PacketId> pending_ack;
    long long tx_bits = 0, rx_bits = 0;
    long long transmissions = 0;
    double last_opportunity = -1.0;
  };

  struct TxRecord {
    int intended = 0;
    int effective = 0;
  };

  void build_flows() {
    flows_ = cfg_.flows_override;
    if (!flows_.empty()) {
      for (const Flow& f : flows_) {
        if (f.source == f.destination) throw ConfigError("flows", "source == destination");
        if (!greedy_route(f.source, f.destination, topo_))
          throw ConfigError("flows", "flow " + std::to_string(f.id) + " is not routable");
      }
      return;
    }
    Rng plan(derive_seed(seed_, kTagFlowPlan));
    const auto n = static_cast<std::uint64_t>(cfg_.node_count);
    for (int k = 0; k < cfg_.flow_count; ++k) {
      bool placed = false;
      for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
        const auto src = static_cast<NodeId>(plan.below(n));
        const auto dst = static_cast<NodeId>(plan.below(n));
        if (src == dst) continue;
        if (!greedy_route(src, dst, topo_)) continue;
        flows_.push_back({static_cast<FlowId>(k), src, dst, cfg_.packet_rate});
        placed = true;
      }
      if (!placed) throw ConfigError("flow_count", "could not place a routable flow");
    }
  }

  void build_nodes() {
    nodes_.resize(topo_.node_count());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      Node& node = nodes_[i];
      node.id = static_cast<NodeId>(i);
      node.knowledge = NeighborKnowledge(
          {topo_.neighbors[i].begin(), topo_.neighbors[i].end()});
      node.growth = DegreeRateEstimator(cfg_.lms_taps, cfg_.lms_step);
      // Warm-up policy: no growth observed yet, so the threshold sits at
      // -intercept/slope and the node sends at every opportunity.
      node.policy = PolicyParams{0.0, 1.0, cfg_.delay_discount, cfg_.buffer_size,
                                 cfg_.gain_slope, cfg_.gain_intercept};
      opportunity_rng_.emplace_back(derive_seed(seed_, kTagOpportunity, i));
      report_rng_.emplace_back(derive_seed(seed_, kTagReport, i));
    }
    for (std::size_t f = 0; f < flows_.size(); ++f)
      arrival_rng_.emplace_back(derive_seed(seed_, kTagArrival, f));
    payload_rng_ = std::make_unique<Rng>(derive_seed(seed_, kTagPayload));
    loss_rng_ = std::make_unique<Rng>(derive_seed(seed_, kTagLoss));
  }

  double opportunity_rate(NodeId u) const {
    return cfg_.opportunity_rate_per_node.empty() ? cfg_.opportunity_rate
                                                  : cfg_.opportunity_rate_per_node[u];
  }

  double ack_timeout(NodeId u) const { return 5.0 / opportunity_rate(u); }

  void schedule_initial_events() {
    if (cfg_.scripted_arrivals.empty()) {
      const double stop = cfg_.effective_arrival_stop();
      for (std::size_t f = 0; f < flows_.size(); ++f) {
        const double t = arrival_rng_[f].exponential(flows_[f].packet_rate);
        if (t <= stop)
          events_.push({t, EventKind::PacketArrival, flows_[f].source, 0,
                        static_cast<FlowId>(f), 0, nullptr});
      }
    } else {
      for (const ScriptedArrival& a : cfg_.scripted_arrivals) {
        if (a.flow >= flows_.size()) throw ConfigError("scripted_arrivals", "unknown flow");
        events_.push({a.time, EventKind::PacketArrival, flows_[a.flow].source, 0, a.flow, 0,
                      nullptr});
      }
    }
    for (const Node& node : nodes_) {
      events_.push({opportunity_rng_[node.id].exponential(opportunity_rate(node.id)),
                    EventKind::TxOpportunity, node.id, 0, 0, 0, nullptr});
      if (cfg_.report_rate > 0)
        events_.push({report_rng_[node.id].exponential(cfg_.report_rate),
                      EventKind::ReceptionReport, node.id, 0, 0, 0, nullptr});
    }
    events_.push({cfg_.measurement_tick, EventKind::MeasurementTick, 0, 0, 0, 0, nullptr});
  }

  void dispatch(const Event& ev) {
    switch (ev.kind) {
      case EventKind::PacketArrival: on_arrival(ev); break;
      case EventKind::ReceptionReport: on_report(ev); break;
      case EventKind::TxOpportunity: on_opportunity(ev); break;
      case EventKind::Delivery: on_delivery(ev); break;
      case EventKind::AckTimeout: on_ack_timeout(ev); break;
      case EventKind::MeasurementTick: on_tick(ev); break;
    }
  }

  void trace(double time, const char* kind, NodeId node, std::string detail) {
    if (cfg_.trace_enabled) trace_.push_back({time, kind, node, std::move(detail)});
  }

  // ---- event handlers ----

  void on_arrival(const Event& ev) {
    const Flow& flow = flows_[ev.flow];
    if (cfg_.scripted_arrivals.empty()) {
      const double next = ev.time + arrival_rng_[ev.flow].exponential(flow.packet_rate);
      if (next <= cfg_.effective_arrival_stop())
        events_.push({next, EventKind::PacketArrival, flow.source, 0, ev.flow, 0, nullptr});
    }
    Packet packet;
    packet.id = ++last_packet_id_;
    packet.flow = flow.id;
    packet.source = flow.source;
    packet.destination = flow.destination;
    packet.size_bytes = static_cast<std::uint32_t>(cfg_.packet_size_bytes);
    packet.created_at = ev.time;
    packet.payload_tag = payload_rng_->next();
    ++generated_;
    const auto hop = route_next_hop(flow.source, flow.destination, topo_);
    if (!hop) {
      fate_[packet.id] = PacketFate::Unroutable;
      ++drops_unroutable_;
      return;
    }
    packet.next_hop = *hop;
    registry_.emplace(packet.id, packet);
    trace(ev.time, "arrival", flow.source, "packet " + std::to_string(packet.id));
    enqueue_packet(nodes_[flow.source], packet, RaiseClass::Arrival);
  }

  void on_report(const Event& ev) {
    Node& v = nodes_[ev.node];
    events_.push({ev.time + report_rng_[v.id].exponential(cfg_.report_rate),
                  EventKind::ReceptionReport, v.id, 0, 0, 0, nullptr});
    // Incremental announcement: every neighbor hears every report, so
    // advertising only what is new since the last report builds the same
    // knowledge as re-broadcasting the full pool listing.
    const std::set<PacketId> delta = std::move(v.report_delta);
    v.report_delta.clear();
    for (NodeId w_id : topo_.neighbors[v.id]) {
      Node& w = nodes_[w_id];
      w.knowledge.apply_reception_report(v.id, delta);
      // An empty announcement cannot move any option degree, so the cached
      // option is only recomputed when the report carried something.
      count_knowledge_reception(w, /*state_changed=*/!delta.empty());
    }
    trace(ev.time, "report", v.id, std::to_string(delta.size()) + " ids");
  }

  void on_opportunity(const Event& ev) {
    Node& u = nodes_[ev.node];
    if (cfg_.collect_opportunity_samples && u.last_opportunity >= 0)
      interarrivals_.push_back(ev.time - u.last_opportunity);
    u.last_opportunity = ev.time;
    u.tx_counter.record(ev.time);
    events_.push({ev.time + opportunity_rng_[u.id].exponential(opportunity_rate(u.id)),
                  EventKind::TxOpportunity, u.id, 0, 0, 0, nullptr});
    if (u.queue.empty()) return;

    switch (cfg_.policy) {
      case PolicyKind::NoCoding:
        transmit(u, CodingOption{{u.queue.front().id}}, ev.time);
        break;
      case PolicyKind::ImmediateSend:
        transmit(u, u.best_option, ev.time);
        break;
      case PolicyKind::OptimalStopping:
        if (decide(u.best_option.degree(), u.policy) == Decision::Send)
          transmit(u, u.best_option, ev.time);
        else
          trace(ev.time, "wait", u.id, "degree " + std::to_string(u.best_option.degree()));
        break;
    }
  }

  void transmit(Node& u, const CodingOption& option, double now) {
    const CodedPacket coded = encode(option, registry_);
    auto shared = std::make_shared<const CodedPacket>(coded);
    u.tx_bits += packet_bits();
    ++u.transmissions;
    const auto txid = static_cast<PacketId>(tx_records_.size());
    tx_records_.push_back({coded.degree(), 0});

    for (PacketId member : coded.native_ids) {
      std::erase_if(u.queue, [&](const Packet& p) { return p.id == member; });
      u.pending_ack.insert(member);
      events_.push({now + ack_timeout(u.id), EventKind::AckTimeout, u.id, 0, 0, member, nullptr});
    }
    for (NodeId w : topo_.neighbors[u.id]) {
      if (cfg_.loss_probability > 0 && loss_rng_->uniform01() <= cfg_.loss_probability) continue;
      events_.push({now, EventKind::Delivery, w, u.id, 0, txid, shared});
    }
    trace(now, "transmit", u.id, "degree " + std::to_string(coded.degree()));
    u.cycle_peak = 1;  // the decision state restarts at a bare native
    refresh_option(u, RaiseClass::None);
  }

  void on_delivery(const Event& ev) {
    Node& v = nodes_[ev.node];
    const CodedPacket& coded = *ev.coded;
    v.rx_bits += packet_bits();

    // Hearing the transmission proves the sender holds every native in it.
    std::set<PacketId> live;
    for (PacketId id : coded.native_ids)
      if (alive(id)) live.insert(id);
    v.knowledge.apply_reception_report(ev.peer, live);

    // Cancellation against the pool: one missing native can be recovered.
    std::vector<PacketId> missing;
    for (PacketId id : coded.native_ids)
      if (!v.held.count(id)) missing.push_back(id);
    if (missing.size() == 1 && alive(missing.front())) hold(v, missing.front());

    count_knowledge_reception(v, /*state_changed=*/true);

    auto hop = coded.per_next_hop.find(v.id);
    if (hop != coded.per_next_hop.end()) {
      const PacketId target = hop->second;
      const auto native = decode(coded, v.id, v.held, registry_);
      if (!native) {
        ++decode_failures_;
        trace(ev.time, "decode-failure", v.id, "packet " + std::to_string(target));
      } else if (alive(target)) {
        tx_records_[ev.packet].effective += 1;
        nodes_[ev.peer].pending_ack.erase(target);  // zero-cost hop acknowledgment
        hold(v, target);
        if (native->destination == v.id) {
          deliver(target, ev.time);
        } else {
          forward(v, *native, ev.time);
        }
      }
    }
  }

  void on_ack_timeout(const Event& ev) {
    Node& u = nodes_[ev.node];
    if (u.pending_ack.erase(ev.packet) == 0) return;  // acknowledged in time
    if (!alive(ev.packet)) return;
    trace(ev.time, "retransmit-queue", u.id, "packet " + std::to_string(ev.packet));
    enqueue_packet(u, registry_.at(ev.packet), RaiseClass::None, /*at_head=*/true);
  }

  void on_tick(const Event& ev) {
    for (Node& node : nodes_) {
      DegreeGrowthStats stats;
      stats.window = cfg_.measurement_tick;
      stats.packet_raise_fraction =
          node.win_arrivals ? static_cast<double>(node.win_arr_raising) / node.win_arrivals : 0.0;
      stats.report_raise_fraction = node.win_knowledge
                                        ? static_cast<double>(node.win_know_raising) / node.win_knowledge
                                        : 0.0;
      const double packet_rate = node.win_arrivals / cfg_.measurement_tick;
      const double report_rate = node.win_knowledge / cfg_.measurement_tick;
      node.growth.observe(degree_growth_estimate(stats, packet_rate, report_rate));
      node.win_arrivals = node.win_arr_raising = 0;
      node.win_knowledge = node.win_know_raising = 0;

      const double est_rate =
          node.tx_counter.event_count > 0 ? node.tx_counter.estimate(ev.time) : 0.0;
      if (est_rate > 0) {
        node.policy.degree_growth_rate = node.growth.predict();
        node.policy.opportunity_rate = est_rate;
      }
    }
    const double next = ev.time + cfg_.measurement_tick;
    if (next <= cfg_.horizon)
      events_.push({next, EventKind::MeasurementTick, 0, 0, 0, 0, nullptr});
  }

  // ---- mechanics ----

  bool alive(PacketId id) const {
    auto it = fate_.find(id);
    return it == fate_.end() || it->second == PacketFate::InFlight;
  }

  long long packet_bits() const { return 8ll * cfg_.packet_size_bytes; }

  void hold(Node& v, PacketId id) {
    if (v.held.insert(id).second) v.report_delta.insert(id);
  }

  void count_knowledge_reception(Node& w, bool state_changed) {
    ++w.knowledge_rx;
    ++w.win_knowledge;
    if (state_changed) refresh_option(w, RaiseClass::Report);
  }

  void enqueue_packet(Node& v, const Packet& packet, RaiseClass raise, bool at_head = false) {
    if (static_cast<int>(v.queue.size()) >= cfg_.buffer_size) {
      fate_[packet.id] = PacketFate::Overflow;
      ++drops_overflow_;
      retire(packet.id);
      return;
    }
    if (at_head)
      v.queue.insert(v.queue.begin(), packet);
    else
      v.queue.push_back(packet);
    hold(v, packet.id);
    if (raise == RaiseClass::Arrival) {
      ++v.arrivals;
      ++v.win_arrivals;
    }
    refresh_option(v, raise);
  }

  void forward(Node& v, const Packet& native, double now) {
    auto hop = route_next_hop(v.id, native.destination, topo_);
    if (!hop) {
      fate_[native.id] = PacketFate::Unroutable;
      ++drops_unroutable_;
      retire(native.id);
      return;
    }
    Packet onward = native;
    onward.next_hop = *hop;
    onward.payload_tag = registry_.at(native.id).payload_tag;
    registry_.at(native.id).next_hop = *hop;
    trace(now, "forward", v.id, "packet " + std::to_string(native.id));
    enqueue_packet(v, onward, RaiseClass::Arrival);
  }

  void deliver(PacketId id, double now) {
    auto& fate = fate_[id];
    if (fate == PacketFate::Delivered) return;
    fate = PacketFate::Delivered;
    ++delivered_;
    delay_sum_ += now - registry_.at(id).created_at;
    retire(id);
  }

  /// End-of-life cleanup: the packet disappears from every knowledge map and
  /// report buffer, so no future coding decision references it. Pool copies
  /// stay: a node that held the bytes can still cancel them out of a coded
  /// packet already in the air.
  void retire(PacketId id) {
    for (Node& node : nodes_) {
      node.report_delta.erase(id);
      node.knowledge.purge(id);
    }
  }

  /// Recomputes the cached best option for the current head and attributes a
  /// degree raise to the event class that caused it. Raises are measured
  /// against the per-cycle baseline, which restarts at 1 after every send:
  /// that is the growth process the threshold formula is parameterized by.
  void refresh_option(Node& v, RaiseClass raise) {
    if (v.queue.empty()) {
      v.best_option = CodingOption{};
      return;
    }
    v.best_option =
        find_best_coding_option(std::span<const Packet>(v.queue.data(), v.queue.size()),
                                v.knowledge);
    if (raise == RaiseClass::None) return;
    if (v.best_option.degree() > v.cycle_peak) {
      v.cycle_peak = v.best_option.degree();
      if (raise == RaiseClass::Arrival) {
        ++v.arr_raising;
        ++v.win_arr_raising;
      } else {
        ++v.know_raising;
        ++v.win_know_raising;
      }
    }
  }

  RunResult collect_metrics() {
    RunResult out;
    MetricsReport& report = out.report;
    long long sum_degrees = 0;
    for (const TxRecord& tx : tx_records_) {
      if (tx.effective < 1) continue;
      ++report.transmissions;
      sum_degrees += tx.effective;
      ++report.degree_histogram[tx.intended];
    }
    report.coding_gain = report.transmissions
                             ? static_cast<double>(sum_degrees) / report.transmissions
                             : 1.0;
    report.generated = generated_;
    report.delivered = delivered_;
    report.drops_overflow = drops_overflow_;
    report.drops_unroutable = drops_unroutable_;
    report.decode_failures = decode_failures_;
    report.in_flight = generated_ - delivered_ - drops_overflow_ - drops_unroutable_;
    report.throughput = delivered_ / cfg_.horizon;
    if (delivered_ > 0) report.mean_delay = delay_sum_ / delivered_;

    double energy_total = 0.0;
    for (Node& node : nodes_) {
      NodeSummary s;
      s.id = node.id;
      s.energy_mj = account_energy(node.tx_bits / cfg_.bitrate_bps,
                                   node.rx_bits / cfg_.bitrate_bps, cfg_.horizon, cfg_.energy);
      s.est_opportunity_rate =
          node.tx_counter.event_count > 0 ? node.tx_counter.estimate(cfg_.horizon) : 0.0;
      s.est_degree_growth = node.growth.predict();
      s.packet_raise_fraction =
          node.arrivals ? static_cast<double>(node.arr_raising) / node.arrivals : 0.0;
      s.report_raise_fraction =
          node.knowledge_rx ? static_cast<double>(node.know_raising) / node.knowledge_rx : 0.0;
      s.transmissions = node.transmissions;
      energy_total += s.energy_mj;
      report.est_opportunity_rate += s.est_opportunity_rate;
      report.est_degree_growth += s.est_degree_growth;
      report.observed_packet_raise += s.packet_raise_fraction;
      report.observed_report_raise += s.report_raise_fraction;
      out.in_flight_scan += static_cast<long long>(node.queue.size()) +
                            static_cast<long long>(node.pending_ack.size());
      out.nodes.push_back(s);
    }
    const double n = static_cast<double>(nodes_.size());
    report.energy_per_node_mj = energy_total / n;
    report.est_opportunity_rate /= n;
    report.est_degree_growth /= n;
    report.observed_packet_raise /= n;
    report.observed_report_raise /= n;
    out.opportunity_interarrivals = std::move(interarrivals_);
    out.trace = std::move(trace_);
    return out;
  }

  SimConfig cfg_;
  std::uint64_t seed_;
  Topology topo_;
  std::vector<Flow> flows_;
  std::vector<Node> nodes_;
  EventQueue events_;
  PacketMap registry_;
  std::map<PacketId, PacketFate> fate_;
  std::vector<TxRecord> tx_records_;
  std::vector<Rng> arrival_rng_, opportunity_rng_, report_rng_;
  std::unique_ptr<Rng> payload_rng_, loss_rng_;
  std::vector<double> interarrivals_;
  std::vector<TraceEntry> trace_;
  PacketId last_packet_id_ = 0;
  long long generated_ = 0, delivered_ = 0;
  long long drops_overflow_ = 0, drops_unroutable_ = 0, decode_failures_ = 0;
  double delay_sum_ = 0.0;
};

}  // namespace detail

/// Runs one seeded scenario to its horizon. Identical (config, seed) pairs
/// produce identical results; every random draw comes from named, derived
/// xoshiro256++ streams.
inline RunResult run(const SimConfig& config, std::uint64_t seed) {
  detail::Simulation sim(config, seed);
  return sim.run();
}

}  // namespace copestop
